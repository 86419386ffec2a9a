#include <algorithm>
#include <cmath>
#include <memory>

#include "mpsenc/linalg.hpp"
#include "mpsenc/rng.hpp"
#include "mpsenc/targets.hpp"

namespace mpsenc::targets {

namespace {

struct NameEntry {
  Family family;
  const char* name;
};

constexpr NameEntry kNames[] = {
    {Family::Gaussian, "gaussian"},
    {Family::Cauchy, "cauchy"},
    {Family::Sine, "sine"},
    {Family::Cosine, "cosine"},
    {Family::Linear, "linear"},
    {Family::Abs, "abs"},
    {Family::Heaviside, "heaviside"},
    {Family::Modulo, "modulo"},
    {Family::Root, "root"},
    {Family::LogShifted, "log"},
    {Family::Exp, "exp"},
    {Family::Polynomial, "polynomial"},
    {Family::UniformRootsPoly, "uniform-roots"},
    {Family::CubicSpline, "cubic-spline"},
    {Family::PiecewisePoly, "piecewise-poly"},
    {Family::PiecewiseChebyshev, "piecewise-chebyshev"},
    {Family::SineReciprocal, "sine-reciprocal"},
    {Family::HockeyStick, "hockey-stick"},
};

double horner(const std::vector<double>& c, double x) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * x + *it;
  return acc;
}

// Sum_k c_k T_k(t) by the Clenshaw recurrence.
double clenshaw(const std::vector<double>& c, double t) {
  double b1 = 0.0, b2 = 0.0;
  for (std::size_t k = c.size(); k-- > 1;) {
    const double b0 = 2.0 * t * b1 - b2 + c[k];
    b2 = b1;
    b1 = b0;
  }
  return t * b1 - b2 + (c.empty() ? 0.0 : c[0]);
}

struct Pieces {
  double a = 0.0, width = 1.0;
  std::vector<std::vector<double>> coeffs;

  std::size_t piece(double x, double& t) const {
    const auto count = coeffs.size();
    double pos = (x - a) / width;
    auto i = static_cast<std::size_t>(std::clamp(std::floor(pos), 0.0, double(count - 1)));
    // Local coordinate in [-1, 1].
    t = 2.0 * (pos - static_cast<double>(i)) - 1.0;
    return i;
  }
};

// Natural cubic spline through (xs, ys), xs strictly increasing.
struct Spline {
  std::vector<double> xs, ys, m;  // m: second derivatives

  Spline(std::vector<double> x, std::vector<double> y) : xs(std::move(x)), ys(std::move(y)) {
    const std::size_t k = xs.size();
    m.assign(k, 0.0);
    if (k < 3) return;
    // Tridiagonal system for interior second derivatives (Thomas algorithm).
    std::vector<double> sub(k, 0.0), diag(k, 1.0), sup(k, 0.0), rhs(k, 0.0);
    for (std::size_t i = 1; i + 1 < k; ++i) {
      const double h0 = xs[i] - xs[i - 1], h1 = xs[i + 1] - xs[i];
      sub[i] = h0;
      diag[i] = 2.0 * (h0 + h1);
      sup[i] = h1;
      rhs[i] = 6.0 * ((ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < k; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    m[k - 1] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) m[i] = (rhs[i] - sup[i] * m[i + 1]) / diag[i];
  }

  double operator()(double x) const {
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = it == xs.begin() ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
    i = std::min(i, xs.size() - 2);
    const double h = xs[i + 1] - xs[i];
    const double u = (xs[i + 1] - x) / h, v = (x - xs[i]) / h;
    return u * ys[i] + v * ys[i + 1] +
           ((u * u * u - u) * m[i] + (v * v * v - v) * m[i + 1]) * h * h / 6.0;
  }
};

}  // namespace

std::string family_name(Family f) {
  for (const auto& e : kNames)
    if (e.family == f) return e.name;
  return "unknown";
}

Family parse_family(const std::string& name) {
  for (const auto& e : kNames)
    if (name == e.name) return e.family;
  std::string known;
  for (const auto& e : kNames) known += std::string(known.empty() ? "" : ", ") + e.name;
  throw InvalidParameter("unknown function family '" + name + "' (known: " + known + ")");
}

Function::Function(const FunctionFamily& fam, double a, double b) : fam_(fam) {
  if (!(a < b)) throw InvalidParameter("function domain needs a < b");
  switch (fam.family) {
    case Family::Gaussian: {
      if (!(fam.sigma > 0)) throw InvalidParameter("gaussian sigma must be positive");
      const double s = fam.sigma, mu = fam.mu;
      eval_ = [s, mu](double x) { return std::exp(-(x - mu) * (x - mu) / (2.0 * s * s)); };
      break;
    }
    case Family::Cauchy: {
      if (!(fam.gamma > 0)) throw InvalidParameter("cauchy gamma must be positive");
      const double g = fam.gamma, mu = fam.mu;
      eval_ = [g, mu](double x) {
        const double z = (x - mu) / g;
        return 1.0 / (M_PI * g * (1.0 + z * z));
      };
      break;
    }
    case Family::Sine: {
      const double k = fam.k;
      eval_ = [k](double x) { return std::sin(k * M_PI * x); };
      break;
    }
    case Family::Cosine: {
      const double k = fam.k;
      eval_ = [k](double x) { return std::cos(k * M_PI * x); };
      break;
    }
    case Family::Linear: eval_ = [](double x) { return x; }; break;
    case Family::Abs: eval_ = [](double x) { return std::abs(x); }; break;
    case Family::Heaviside: eval_ = [](double x) { return x >= 0.0 ? 1.0 : 0.0; }; break;
    case Family::Modulo:
      eval_ = [](double x) {
        double r = std::fmod(x / 2.0, 1.0);
        return r < 0.0 ? r + 1.0 : r;
      };
      break;
    case Family::Root: eval_ = [](double x) { return std::sqrt(std::max(0.0, x + 1.0)); }; break;
    case Family::LogShifted: {
      const double eps = fam.epsilon;
      eval_ = [eps](double x) { return std::log10(x + 1.0 + eps); };
      break;
    }
    case Family::Exp: eval_ = [](double x) { return std::exp(x); }; break;
    case Family::Polynomial: {
      const auto c = fam.coeffs;
      eval_ = [c](double x) { return horner(c, x); };
      break;
    }
    case Family::UniformRootsPoly: {
      if (fam.degree < 0) throw InvalidParameter("degree must be non-negative");
      Rng rng(fam.seed);
      std::vector<double> roots(static_cast<std::size_t>(fam.degree));
      for (auto& r : roots) r = rng.uniform(a, b);
      eval_ = [roots](double x) {
        double p = 1.0;
        for (double r : roots) p *= (x - r);
        return p;
      };
      break;
    }
    case Family::CubicSpline: {
      if (fam.knots < 2) throw InvalidParameter("cubic spline needs at least 2 knots");
      Rng rng(fam.seed);
      const auto k = static_cast<std::size_t>(fam.knots);
      std::vector<double> xs(k), ys(k);
      xs.front() = a;
      xs.back() = b;
      for (std::size_t i = 1; i + 1 < k; ++i) xs[i] = rng.uniform(a, b);
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 1; i < k; ++i) {
        if (!(xs[i] > xs[i - 1])) throw InvalidParameter("degenerate spline knots, change the seed");
      }
      for (auto& y : ys) y = rng.uniform(-1.0, 1.0);
      auto sp = std::make_shared<Spline>(std::move(xs), std::move(ys));
      eval_ = [sp](double x) { return (*sp)(x); };
      break;
    }
    case Family::PiecewisePoly:
    case Family::PiecewiseChebyshev: {
      if (fam.intervals < 1) throw InvalidParameter("need at least one interval");
      if (fam.degree < 0) throw InvalidParameter("degree must be non-negative");
      Rng rng(fam.seed);
      auto pieces = std::make_shared<Pieces>();
      pieces->a = a;
      pieces->width = (b - a) / fam.intervals;
      pieces->coeffs.resize(static_cast<std::size_t>(fam.intervals));
      for (auto& c : pieces->coeffs) {
        c.resize(static_cast<std::size_t>(fam.degree) + 1);
        for (auto& v : c) v = rng.uniform(-1.0, 1.0);
      }
      const bool cheb = fam.family == Family::PiecewiseChebyshev;
      if (!cheb && !fam.discontinuous) {
        // Shift each constant term so piece i starts where piece i-1 ends.
        for (std::size_t i = 1; i < pieces->coeffs.size(); ++i) {
          const double end_prev = horner(pieces->coeffs[i - 1], 1.0);
          const double start = horner(pieces->coeffs[i], -1.0);
          pieces->coeffs[i][0] += end_prev - start;
        }
      }
      eval_ = [pieces, cheb](double x) {
        double t = 0.0;
        const std::size_t i = pieces->piece(x, t);
        return cheb ? clenshaw(pieces->coeffs[i], t) : horner(pieces->coeffs[i], t);
      };
      break;
    }
    case Family::SineReciprocal:
      eval_ = [](double x) { return x == 0.0 ? 0.0 : std::sin(1.0 / x); };
      break;
    case Family::HockeyStick: {
      const double kk = fam.strike;
      eval_ = [kk](double x) { return std::max(0.0, x - kk); };
      break;
    }
  }
}

void TargetSpec::validate() const {
  if (n_qubits < 1) throw InvalidParameter("n_qubits must be at least 1");
  switch (kind) {
    case TargetKind::Function:
      if (!(domain_min < domain_max)) throw InvalidParameter("domain_min must be below domain_max");
      break;
    case TargetKind::Image: {
      if (image.width != image.height || !is_power_of_two(image.width)) {
        throw ShapeError("image must be square with a power-of-two side");
      }
      if (image.pixels.size() != image.width * image.height) {
        throw ShapeError("pixel count does not match image dimensions");
      }
      if (2 * log2_exact(image.width) != n_qubits) {
        throw ShapeError("n_qubits does not match the image size");
      }
      for (double p : image.pixels) {
        if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("pixel values must lie in [0, 1]");
      }
      break;
    }
    case TargetKind::RandomMps:
      if (random_chi < 1) throw InvalidParameter("random MPS chi must be at least 1");
      break;
  }
}

double grid_point(double a, double b, std::size_t n, std::uint64_t j) {
  const double last = std::ldexp(1.0, static_cast<int>(n)) - 1.0;
  return a + static_cast<double>(j) * (b - a) / last;
}

ComplexVector discretise(const TargetSpec& spec, std::size_t dense_cap) {
  if (spec.kind != TargetKind::Function) throw InvalidParameter("discretise needs a function target");
  spec.validate();
  if (spec.n_qubits > dense_cap) {
    throw CapacityError("n_qubits = " + std::to_string(spec.n_qubits) +
                        " exceeds the dense cap; use tci-build instead");
  }
  const Function f(spec.function, spec.domain_min, spec.domain_max);
  const std::size_t len = std::size_t{1} << spec.n_qubits;
  ComplexVector v(len);
  double s = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    const double y = f(grid_point(spec.domain_min, spec.domain_max, spec.n_qubits, j));
    if (!std::isfinite(y)) {
      throw InvalidTarget("function is not finite at grid point " + std::to_string(j));
    }
    v[j] = y;
    s += y * y;
  }
  if (!(s > 0.0)) throw InvalidTarget("function has zero norm on the grid");
  const double inv = 1.0 / std::sqrt(s);
  for (auto& z : v) z *= inv;
  return v;
}

ComplexVector image_vector(const Image& img) {
  if (img.pixels.size() != img.width * img.height || img.pixels.empty()) {
    throw ShapeError("pixel count does not match image dimensions");
  }
  double s = 0.0;
  for (double p : img.pixels) s += p * p;
  if (!(s > 0.0)) throw InvalidTarget("image is entirely black");
  const double inv = 1.0 / std::sqrt(s);
  ComplexVector v(img.pixels.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = img.pixels[i] * inv;
  return v;
}

tn::Mps target_mps(const TargetSpec& spec, std::size_t chi_max, double svd_threshold) {
  spec.validate();
  switch (spec.kind) {
    case TargetKind::Function:
      return tn::mps_from_statevector(discretise(spec), chi_max, svd_threshold);
    case TargetKind::Image:
      return tn::mps_from_statevector(image_vector(spec.image), chi_max, svd_threshold);
    case TargetKind::RandomMps: {
      tn::Mps m = random_mps(spec.n_qubits, spec.random_chi, spec.random_seed, spec.random_complex);
      if (chi_max > 0 && chi_max < m.max_bond()) return tn::truncate(m, chi_max, svd_threshold).mps;
      return m;
    }
  }
  throw InvalidParameter("unknown target kind");
}

tn::Mps random_mps(std::size_t n, std::size_t chi, std::uint64_t seed, bool complex_cores) {
  if (n < 1) throw InvalidParameter("random MPS needs at least one site");
  if (chi < 1) throw InvalidParameter("random MPS chi must be at least 1");
  Rng rng(seed);
  std::vector<std::size_t> dims(n + 1, 1);
  for (std::size_t k = 1; k < n; ++k) {
    // Bonds cannot usefully exceed the smaller side of the cut.
    const std::size_t side = std::min(k, n - k);
    const std::size_t cap = side >= 20 ? chi : std::min<std::size_t>(chi, std::size_t{1} << side);
    dims[k] = cap;
  }
  std::vector<tn::Core> cores;
  cores.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    tn::Core c(dims[k], dims[k + 1]);
    for (auto& z : c.data) {
      const double re = rng.normal();
      const double im = rng.normal();
      z = Complex(re, complex_cores ? im : 0.0);
    }
    // Orthonormalise the rows of the l x 2r matrix: a Haar-random right
    // isometry, so the chain is a sequentially generated random state.
    RowMat q, r;
    linalg::thin_qr(RowMat(c.right_matrix().adjoint()), q, r);
    // Fix the QR phase freedom so the isometry is Haar distributed.
    for (Eigen::Index j = 0; j < q.cols(); ++j) {
      const double a = std::abs(r(j, j));
      if (a > 0.0) q.col(j) *= r(j, j) / a;
    }
    c.right_matrix() = q.adjoint();
    cores.push_back(std::move(c));
  }
  tn::Mps m = tn::canonicalize(tn::Mps(std::move(cores), tn::Canonical::none(), chi),
                               tn::Canonical::left());
  m.normalize();
  return m;
}

// ---- configuration ---------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const double v = std::stod(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("key '" + key + "' expects a number, got '" + it->second + "'");
  }
}

long long to_int(const KeyValues& kv, const std::string& key, long long fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(it->second, &pos);
    if (pos != it->second.size()) throw std::invalid_argument(key);
    return v;
  } catch (const std::exception&) {
    throw InvalidParameter("key '" + key + "' expects an integer, got '" + it->second + "'");
  }
}

bool to_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw InvalidParameter("key '" + key + "' expects true/false, got '" + v + "'");
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    ++line_no;
    std::string line = text.substr(start, end - start);
    start = end + 1;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidParameter("config line " + std::to_string(line_no) + " has no '='");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw InvalidParameter("config line " + std::to_string(line_no) + " has no key");
    if (!kv.emplace(key, value).second) throw InvalidParameter("repeated config key '" + key + "'");
  }
  return kv;
}

TargetSpec target_from_config(const KeyValues& kv) {
  TargetSpec spec;
  const std::string kind = kv.count("kind") ? kv.at("kind") : "function";
  if (kind == "function") {
    spec.kind = TargetKind::Function;
  } else if (kind == "image") {
    spec.kind = TargetKind::Image;
  } else if (kind == "random-mps" || kind == "random") {
    spec.kind = TargetKind::RandomMps;
  } else {
    throw InvalidParameter("unknown target kind '" + kind + "'");
  }
  auto& f = spec.function;
  if (kv.count("family")) f.family = parse_family(kv.at("family"));
  f.sigma = to_double(kv, "sigma", f.sigma);
  f.mu = to_double(kv, "mu", f.mu);
  f.gamma = to_double(kv, "gamma", f.gamma);
  f.k = to_double(kv, "k", f.k);
  f.epsilon = to_double(kv, "epsilon", f.epsilon);
  f.strike = to_double(kv, "strike", f.strike);
  f.degree = static_cast<int>(to_int(kv, "degree", f.degree));
  f.intervals = static_cast<int>(to_int(kv, "intervals", f.intervals));
  f.knots = static_cast<int>(to_int(kv, "knots", f.knots));
  f.discontinuous = to_bool(kv, "discontinuous", f.discontinuous);
  spec.random_complex = to_bool(kv, "complex", spec.random_complex);
  const long long seed = to_int(kv, "seed", 0);
  if (seed < 0) throw InvalidParameter("seed must be non-negative");
  f.seed = static_cast<std::uint64_t>(seed);
  spec.random_seed = f.seed;
  if (auto it = kv.find("coeffs"); it != kv.end()) {
    std::string s = it->second;
    std::replace(s.begin(), s.end(), ',', ' ');
    std::size_t pos = 0;
    while (pos < s.size()) {
      const auto b = s.find_first_not_of(' ', pos);
      if (b == std::string::npos) break;
      auto e = s.find(' ', b);
      if (e == std::string::npos) e = s.size();
      try {
        f.coeffs.push_back(std::stod(s.substr(b, e - b)));
      } catch (const std::exception&) {
        throw InvalidParameter("bad coefficient '" + s.substr(b, e - b) + "'");
      }
      pos = e;
    }
  }
  spec.domain_min = to_double(kv, "domain_min", spec.domain_min);
  spec.domain_max = to_double(kv, "domain_max", spec.domain_max);
  const long long chi = to_int(kv, "chi", static_cast<long long>(spec.random_chi));
  if (chi < 1) throw InvalidParameter("chi must be at least 1");
  spec.random_chi = static_cast<std::size_t>(chi);
  const long long n = to_int(kv, "n_qubits", 0);
  if (n < 0) throw InvalidParameter("n_qubits must be positive");
  spec.n_qubits = static_cast<std::size_t>(n);

  if (spec.kind == TargetKind::Image) {
    if (!kv.count("image_path")) throw InvalidParameter("image targets need image_path");
    const std::string& path = kv.at("image_path");
    const ImageFormat fmt = kv.count("image_format") ? parse_image_format(kv.at("image_format"))
                                                     : image_format_from_path(path);
    TargetSpec img = ingest_image(path, fmt);
    spec.image = std::move(img.image);
    if (spec.n_qubits != 0 && spec.n_qubits != img.n_qubits) {
      throw ShapeError("n_qubits does not match the image size");
    }
    spec.n_qubits = img.n_qubits;
  } else if (spec.n_qubits == 0) {
    throw InvalidParameter("n_qubits is required");
  }
  spec.validate();
  return spec;
}

}  // namespace mpsenc::targets
