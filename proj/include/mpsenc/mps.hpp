#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mpsenc/common.hpp"

namespace mpsenc::tn {

/// One MPS core A[l, p, r] with physical dimension 2, stored row-major so that
/// element (l, p, r) lives at (l * 2 + p) * right + r.
struct Core {
  std::size_t left = 1;
  std::size_t right = 1;
  ComplexVector data;

  Core() : data(2, Complex{0.0}) {}
  Core(std::size_t l, std::size_t r) : left(l), right(r), data(l * 2 * r, Complex{0.0}) {}

  Complex& operator()(std::size_t l, std::size_t p, std::size_t r) {
    return data[(l * 2 + p) * right + r];
  }
  const Complex& operator()(std::size_t l, std::size_t p, std::size_t r) const {
    return data[(l * 2 + p) * right + r];
  }

  /// (left*2) x right view.
  Eigen::Map<RowMat> left_matrix() {
    return {data.data(), static_cast<Eigen::Index>(left * 2), static_cast<Eigen::Index>(right)};
  }
  Eigen::Map<const RowMat> left_matrix() const {
    return {data.data(), static_cast<Eigen::Index>(left * 2), static_cast<Eigen::Index>(right)};
  }
  /// left x (2*right) view.
  Eigen::Map<RowMat> right_matrix() {
    return {data.data(), static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(2 * right)};
  }
  Eigen::Map<const RowMat> right_matrix() const {
    return {data.data(), static_cast<Eigen::Index>(left), static_cast<Eigen::Index>(2 * right)};
  }
  /// left x right slice at fixed physical index.
  Eigen::Map<const RowMat, 0, Eigen::OuterStride<>> slice(std::size_t p) const {
    return {data.data() + p * right, static_cast<Eigen::Index>(left),
            static_cast<Eigen::Index>(right), Eigen::OuterStride<>(2 * right)};
  }
};

enum class CanonicalForm { None, Left, Right, Mixed };

/// Canonical-form tag. `center` is meaningful for Mixed only; Left and Right
/// are the Mixed(n-1) and Mixed(0) special cases.
struct Canonical {
  CanonicalForm form = CanonicalForm::None;
  std::size_t center = 0;

  static Canonical none() { return {}; }
  static Canonical left() { return {CanonicalForm::Left, 0}; }
  static Canonical right() { return {CanonicalForm::Right, 0}; }
  static Canonical mixed(std::size_t c) { return {CanonicalForm::Mixed, c}; }
};

class Mps;

/// Singular values across one bipartition and their von Neumann entropy (bits).
struct SchmidtSpectrum {
  std::size_t bond_index = 0;
  std::vector<double> singular_values;
  double entropy = 0.0;
};

/// Result of a truncating re-split: how much weight was discarded.
struct SplitInfo {
  std::size_t kept = 0;
  double discarded_weight = 0.0;  // sum of squared discarded singular values (unit-norm scale)
};

/// Open-boundary matrix product state over qubits.
///
/// Site 0 carries the most significant bit of the computational-basis index.
/// Value semantics: the free functions below never modify their arguments.
/// The in-place members exist for the iterative algorithms (MPD, circuit
/// simulation, TNO sweeps) that would otherwise copy the whole chain per gate.
class Mps {
 public:
  Mps() = default;
  /// Validates bond matching and boundary dimensions; throws ShapeError.
  explicit Mps(std::vector<Core> cores, Canonical canonical = Canonical::none(),
               std::size_t chi_max = 0);

  /// |b_0 b_1 ... b_{n-1}> with bits[0] on site 0.
  static Mps product_state(const std::vector<int>& bits);
  static Mps zero_state(std::size_t n);

  std::size_t size() const { return cores_.size(); }
  const Core& core(std::size_t k) const { return cores_.at(k); }
  const std::vector<Core>& cores() const { return cores_; }

  /// Dimension of virtual bond k, k in [0, n]; bond 0 and bond n are 1.
  std::size_t bond_dim(std::size_t k) const;
  std::size_t max_bond() const;
  std::vector<std::size_t> bond_dims() const;

  /// Cap on virtual dimensions recorded at construction (0 = uncapped).
  std::size_t chi_max() const { return chi_max_; }
  void set_chi_max(std::size_t c) { chi_max_ = c; }

  Canonical canonical() const;
  /// Site holding the orthogonality centre, if the chain is in some canonical form.
  std::optional<std::size_t> center() const { return center_; }

  double norm() const;
  ComplexVector to_dense() const;
  /// Single amplitude <index|psi>, index bit (n-1-k) belongs to site k.
  Complex amplitude(std::uint64_t index) const;

  // ---- in-place machinery -------------------------------------------------
  /// Bring the orthogonality centre to `site` via QR steps (full sweep if none).
  void move_center(std::size_t site);
  /// Scale the centre (or, without one, the last core) so that the norm is 1.
  void normalize();
  void apply_single_qubit(const Mat2& gate, std::size_t site);
  /// Gate on (site, site+1), index q = 2*q_site + q_{site+1}. Re-splits with SVD
  /// keeping at most chi_max values and dropping those below threshold; the
  /// centre ends at site+1. Kept singular values are renormalised when anything
  /// is discarded.
  SplitInfo apply_two_qubit(const Mat4& gate, std::size_t site, std::size_t chi_max,
                            double svd_threshold);
  /// Mutable core access; invalidates canonical bookkeeping.
  Core& mutable_core(std::size_t k);
  void set_center(std::optional<std::size_t> c) { center_ = c; }

 private:
  void check_bonds() const;
  void left_qr_step(std::size_t k);
  void right_lq_step(std::size_t k);

  std::vector<Core> cores_;
  std::optional<std::size_t> center_;
  std::size_t chi_max_ = 0;
};

/// Build a left-canonical MPS from a dense state by successive SVDs.
/// With chi_max == 0 and svd_threshold == 0 the factorisation is exact.
/// Throws InvalidInput for a zero vector, ShapeError for a non power-of-two length.
Mps mps_from_statevector(std::span<const Complex> amplitudes, std::size_t chi_max = 0,
                         double svd_threshold = 0.0);

struct TruncationResult {
  Mps mps;
  /// Root-sum-square of every discarded singular value.
  double truncation_error = 0.0;
};

/// Optimal left-to-right truncation from right-canonical form; output is
/// left-canonical and unit norm. Throws InvalidParameter for chi_max < 1.
TruncationResult truncate(const Mps& mps, std::size_t chi_max,
                          double svd_threshold = kDefaultSvdThreshold);

/// <a|b> by transfer-matrix contraction. Throws ShapeError on size mismatch.
Complex inner_product(const Mps& a, const Mps& b);

/// |<a|b>|^2 / (<a|a><b|b>).
double fidelity(const Mps& a, const Mps& b);

/// Returns a new MPS with `gate` applied on (site, site+1). Throws
/// ValidationError for a non-unitary gate and ShapeError for a bad site.
Mps apply_two_qubit_gate(const Mps& mps, const Mat4& gate, std::size_t site,
                         std::size_t chi_max = 0, double svd_threshold = kDefaultSvdThreshold);

/// Schmidt values across the cut after `bond_index` sites (1 <= bond_index <= n-1).
SchmidtSpectrum schmidt_spectrum(const Mps& mps, std::size_t bond_index);

Mps canonicalize(const Mps& mps, Canonical form);

/// Max deviation from the isometry conditions implied by `form`.
double isometry_residual(const Mps& mps, Canonical form);

/// Von Neumann entropy in bits of a (not necessarily normalised) spectrum.
double entropy_bits(std::span<const double> singular_values);

/// Binary container: "MPS1", u32 n, (n+1) u32 bond dims, then cores as
/// row-major little-endian (re, im) pairs of IEEE-754 binary64.
void write_mps(std::ostream& out, const Mps& mps);
Mps read_mps(std::istream& in);
void save_mps(const std::string& path, const Mps& mps);
Mps load_mps(const std::string& path);

}  // namespace mpsenc::tn
