#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mpsenc/common.hpp"
#include "mpsenc/mps.hpp"

namespace mpsenc::targets {

enum class Family {
  Gaussian,
  Cauchy,
  Sine,
  Cosine,
  Linear,
  Abs,
  Heaviside,
  Modulo,
  Root,
  LogShifted,
  Exp,
  Polynomial,
  UniformRootsPoly,
  CubicSpline,
  PiecewisePoly,
  PiecewiseChebyshev,
  SineReciprocal,
  HockeyStick,
};

std::string family_name(Family f);
/// Accepts the kebab-case names printed by family_name; throws InvalidParameter.
Family parse_family(const std::string& name);

/// Parameters of a function family. Only the fields relevant to `family` are read.
struct FunctionFamily {
  Family family = Family::Gaussian;
  double sigma = 0.3;    // Gaussian width
  double mu = 0.0;       // Gaussian / Cauchy centre
  double gamma = 0.5;    // Cauchy scale
  double k = 1.0;        // Sine / Cosine frequency, f = sin(k pi x)
  double epsilon = 1e-6; // LogShifted offset
  double strike = 0.0;   // HockeyStick K
  std::vector<double> coeffs;  // Polynomial, lowest order first
  int degree = 3;
  int intervals = 5;
  int knots = 8;
  std::uint64_t seed = 0;
  bool discontinuous = true;  // PiecewisePoly only
};

/// A compiled, pointwise-evaluable instance of a family on [a, b]. Seeded
/// randomness (roots, knots, coefficients) is drawn once at construction.
class Function {
 public:
  Function(const FunctionFamily& fam, double a, double b);
  double operator()(double x) const { return eval_(x); }
  const FunctionFamily& family() const { return fam_; }

 private:
  FunctionFamily fam_;
  std::function<double(double)> eval_;
};

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;  // row-major, values in [0, 1]
};

enum class TargetKind { Function, Image, RandomMps };

struct TargetSpec {
  TargetKind kind = TargetKind::Function;
  FunctionFamily function;
  double domain_min = -1.0;
  double domain_max = 1.0;
  Image image;
  std::size_t random_chi = 5;
  std::uint64_t random_seed = 0;
  bool random_complex = false;
  std::size_t n_qubits = 0;

  /// Throws InvalidParameter / ShapeError when an invariant is violated.
  void validate() const;
};

inline constexpr std::size_t kDenseCap = 24;

/// x_j = a + j (b - a) / (N - 1), j = 0..N-1.
double grid_point(double a, double b, std::size_t n, std::uint64_t j);

/// f(x_j) / ||f||_2 on the uniform grid. Throws InvalidTarget when ||f|| = 0 or
/// a value is not finite, CapacityError when n exceeds the dense cap.
ComplexVector discretise(const TargetSpec& spec, std::size_t dense_cap = kDenseCap);

/// Row-major flattening of the pixel matrix, L2-normalised.
ComplexVector image_vector(const Image& img);

/// Left-canonical target. chi_max = 0 means no cap.
tn::Mps target_mps(const TargetSpec& spec, std::size_t chi_max,
                   double svd_threshold = kDefaultSvdThreshold);

enum class ImageFormat { Pgm, Csv, RawU8 };
ImageFormat parse_image_format(const std::string& name);
ImageFormat image_format_from_path(const std::string& path);

Image read_image(const std::string& path, ImageFormat format);
TargetSpec ingest_image(const std::string& path, ImageFormat format);
void write_pgm(const std::string& path, const Image& img);

/// 128x128 (or any power-of-two side) smooth synthetic radiograph-like image.
Image synthetic_chest_image(std::size_t side = 128);

/// Sequentially generated random state: every core is a Haar-random right
/// isometry obtained from a seeded Gaussian block by QR (real orthogonal by
/// default, complex unitary with `complex_cores`). Bonds are min(chi, 2^side).
/// The result is left-canonicalised and normalised.
tn::Mps random_mps(std::size_t n, std::size_t chi, std::uint64_t seed, bool complex_cores = false);

// ---- tensor cross interpolation -------------------------------------------

struct CrossOptions {
  std::size_t max_sweeps = 12;
  std::size_t holdout_samples = 1000;
  /// Grow bond ranks by at most this much per sweep (0 = limited by chi_cap only).
  std::size_t rank_increment = 0;
  int maxvol_iterations = 100;
};

struct CrossResult {
  tn::Mps mps;                         // normalised
  std::size_t samples_used = 0;        // distinct grid points evaluated while building
  std::size_t total_evaluations = 0;   // every call to f, including repeats and the hold-out set
  double est_error = 0.0;              // relative L2 error on the hold-out set
  double norm = 0.0;                   // ||f||_2 over the full grid (from the interpolant)
  std::size_t sweeps = 0;
  bool converged = false;
  bool chi_cap_reached = false;
};

CrossResult tci_build(const std::function<double(double)>& f, double a, double b, std::size_t n,
                      std::size_t chi_cap, double tol, std::uint64_t seed,
                      const CrossOptions& options = {});

// ---- key=value configuration -----------------------------------------------

using KeyValues = std::map<std::string, std::string>;

/// Parses `key = value` lines; '#' starts a comment. Throws InvalidParameter on
/// lines without '=' or repeated keys.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::string& path);

/// Builds a TargetSpec from the documented keys (kind, family, sigma, gamma,
/// degree, intervals, knots, seed, domain_min, domain_max, n_qubits, image_path,
/// image_format, ...). Unknown keys are ignored here; the CLI rejects them.
TargetSpec target_from_config(const KeyValues& kv);

}  // namespace mpsenc::targets
