#include "mpsenc/mps.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mpsenc/linalg.hpp"

namespace mpsenc::tn {

namespace {

using linalg::choose_rank;
using linalg::thin_qr;
using linalg::thin_svd;

Core core_from_matrix(const RowMat& m, std::size_t left, std::size_t right) {
  Core c(left, right);
  Eigen::Map<RowMat>(c.data.data(), m.rows(), m.cols()) = m;
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// Mps

Mps::Mps(std::vector<Core> cores, Canonical canonical, std::size_t chi_max)
    : cores_(std::move(cores)), chi_max_(chi_max) {
  if (cores_.empty()) throw ShapeError("MPS needs at least one site");
  check_bonds();
  const std::size_t n = cores_.size();
  switch (canonical.form) {
    case CanonicalForm::None: center_.reset(); break;
    case CanonicalForm::Left: center_ = n - 1; break;
    case CanonicalForm::Right: center_ = 0; break;
    case CanonicalForm::Mixed:
      if (canonical.center >= n) throw ShapeError("canonical centre out of range");
      center_ = canonical.center;
      break;
  }
}

void Mps::check_bonds() const {
  if (cores_.front().left != 1 || cores_.back().right != 1) {
    throw ShapeError("boundary bond dimensions must be 1");
  }
  for (std::size_t k = 0; k < cores_.size(); ++k) {
    const Core& c = cores_[k];
    if (c.left == 0 || c.right == 0 || c.data.size() != c.left * 2 * c.right) {
      throw ShapeError("core " + std::to_string(k) + " has inconsistent storage");
    }
    if (k + 1 < cores_.size() && c.right != cores_[k + 1].left) {
      throw ShapeError("bond mismatch between sites " + std::to_string(k) + " and " +
                       std::to_string(k + 1));
    }
  }
}

Mps Mps::product_state(const std::vector<int>& bits) {
  std::vector<Core> cores;
  cores.reserve(bits.size());
  for (int b : bits) {
    Core c(1, 1);
    c(0, b ? 1 : 0, 0) = 1.0;
    cores.push_back(std::move(c));
  }
  return Mps(std::move(cores), Canonical::left());
}

Mps Mps::zero_state(std::size_t n) { return product_state(std::vector<int>(n, 0)); }

std::size_t Mps::bond_dim(std::size_t k) const {
  if (k == 0) return 1;
  if (k > cores_.size()) throw ShapeError("bond index out of range");
  return cores_[k - 1].right;
}

std::vector<std::size_t> Mps::bond_dims() const {
  std::vector<std::size_t> d(cores_.size() + 1);
  for (std::size_t k = 0; k <= cores_.size(); ++k) d[k] = bond_dim(k);
  return d;
}

std::size_t Mps::max_bond() const {
  std::size_t m = 1;
  for (const auto& c : cores_) m = std::max(m, c.right);
  return m;
}

Canonical Mps::canonical() const {
  if (!center_) return Canonical::none();
  if (*center_ == cores_.size() - 1) return Canonical::left();
  if (*center_ == 0) return Canonical::right();
  return Canonical::mixed(*center_);
}

Core& Mps::mutable_core(std::size_t k) {
  center_.reset();
  return cores_.at(k);
}

double Mps::norm() const {
  if (center_) {
    const auto& c = cores_[*center_].data;
    double s = 0.0;
    for (const auto& z : c) s += std::norm(z);
    return std::sqrt(s);
  }
  return std::sqrt(std::max(0.0, inner_product(*this, *this).real()));
}

void Mps::normalize() {
  const double nrm = norm();
  if (!(nrm > 0.0)) throw InvalidInput("cannot normalise a zero-norm MPS");
  Core& c = center_ ? cores_[*center_] : cores_.back();
  for (auto& z : c.data) z /= nrm;
}

ComplexVector Mps::to_dense() const {
  // Contract left to right: running tensor of shape (2^k) x bond.
  RowMat acc = RowMat::Ones(1, 1);
  for (const Core& c : cores_) {
    const auto rows = acc.rows();
    RowMat next(rows * 2, static_cast<Eigen::Index>(c.right));
    for (std::size_t p = 0; p < 2; ++p) {
      RowMat block = acc * c.slice(p);
      for (Eigen::Index i = 0; i < rows; ++i) {
        next.row(i * 2 + static_cast<Eigen::Index>(p)) = block.row(i);
      }
    }
    acc = std::move(next);
  }
  ComplexVector out(static_cast<std::size_t>(acc.rows()));
  for (Eigen::Index i = 0; i < acc.rows(); ++i) out[static_cast<std::size_t>(i)] = acc(i, 0);
  return out;
}

Complex Mps::amplitude(std::uint64_t index) const {
  const std::size_t n = cores_.size();
  Eigen::RowVectorXcd v = Eigen::RowVectorXcd::Ones(1);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t bit = (index >> (n - 1 - k)) & 1U;
    v = v * cores_[k].slice(bit);
  }
  return v(0);
}

void Mps::left_qr_step(std::size_t k) {
  Core& a = cores_[k];
  Core& b = cores_[k + 1];
  RowMat q, r;
  thin_qr(RowMat(a.left_matrix()), q, r);
  const auto newdim = static_cast<std::size_t>(q.cols());
  RowMat nb = r * b.right_matrix();
  a = core_from_matrix(q, a.left, newdim);
  b = core_from_matrix(nb, newdim, b.right);
}

void Mps::right_lq_step(std::size_t k) {
  Core& b = cores_[k];
  Core& a = cores_[k - 1];
  RowMat q, r;
  // b = L Q with Q having orthonormal rows, via QR of b^dagger.
  thin_qr(RowMat(b.right_matrix().adjoint()), q, r);
  const auto newdim = static_cast<std::size_t>(q.cols());
  RowMat nb = q.adjoint();
  RowMat na = a.left_matrix() * r.adjoint();
  b = core_from_matrix(nb, newdim, b.right);
  a = core_from_matrix(na, a.left, newdim);
}

void Mps::move_center(std::size_t site) {
  const std::size_t n = cores_.size();
  if (site >= n) throw ShapeError("centre site out of range");
  if (!center_) {
    for (std::size_t k = 0; k < site; ++k) left_qr_step(k);
    for (std::size_t k = n - 1; k > site; --k) right_lq_step(k);
    center_ = site;
    return;
  }
  while (*center_ < site) {
    left_qr_step(*center_);
    ++*center_;
  }
  while (*center_ > site) {
    right_lq_step(*center_);
    --*center_;
  }
}

void Mps::apply_single_qubit(const Mat2& gate, std::size_t site) {
  Core& c = cores_.at(site);
  for (std::size_t l = 0; l < c.left; ++l) {
    for (std::size_t r = 0; r < c.right; ++r) {
      const Complex a0 = c(l, 0, r);
      const Complex a1 = c(l, 1, r);
      c(l, 0, r) = gate(0, 0) * a0 + gate(0, 1) * a1;
      c(l, 1, r) = gate(1, 0) * a0 + gate(1, 1) * a1;
    }
  }
  // A unitary on the physical leg preserves both isometry conditions.
}

SplitInfo Mps::apply_two_qubit(const Mat4& gate, std::size_t site, std::size_t chi_max,
                               double svd_threshold) {
  const std::size_t n = cores_.size();
  if (n < 2 || site + 1 >= n) throw ShapeError("two-qubit gate site out of range");
  const bool had_center = center_.has_value();
  if (had_center) move_center(site);

  const Core& a = cores_[site];
  const Core& b = cores_[site + 1];
  const std::size_t dl = a.left;
  const std::size_t dr = b.right;
  // theta(l, p1, p2, r) stored as (dl*2) x (2*dr).
  RowMat theta = a.left_matrix() * b.right_matrix();
  RowMat out(static_cast<Eigen::Index>(dl * 2), static_cast<Eigen::Index>(2 * dr));
  for (std::size_t l = 0; l < dl; ++l) {
    for (std::size_t r = 0; r < dr; ++r) {
      Complex v[4];
      for (std::size_t p1 = 0; p1 < 2; ++p1)
        for (std::size_t p2 = 0; p2 < 2; ++p2)
          v[p1 * 2 + p2] = theta(static_cast<Eigen::Index>(l * 2 + p1),
                                 static_cast<Eigen::Index>(p2 * dr + r));
      for (std::size_t q1 = 0; q1 < 2; ++q1) {
        for (std::size_t q2 = 0; q2 < 2; ++q2) {
          const auto q = static_cast<Eigen::Index>(q1 * 2 + q2);
          Complex acc = 0.0;
          for (Eigen::Index p = 0; p < 4; ++p) acc += gate(q, p) * v[p];
          out(static_cast<Eigen::Index>(l * 2 + q1), static_cast<Eigen::Index>(q2 * dr + r)) = acc;
        }
      }
    }
  }

  auto svd = thin_svd(out);
  const std::size_t keep = choose_rank(svd.s, chi_max, svd_threshold);
  SplitInfo info;
  info.kept = keep;
  const double total = svd.s.squaredNorm();
  double kept_w = 0.0;
  for (std::size_t i = 0; i < keep; ++i) kept_w += svd.s[static_cast<Eigen::Index>(i)] *
                                                   svd.s[static_cast<Eigen::Index>(i)];
  info.discarded_weight = total > 0.0 ? (total - kept_w) / total : 0.0;
  const auto k = static_cast<Eigen::Index>(keep);
  Eigen::VectorXd s = svd.s.head(k);
  if (keep < static_cast<std::size_t>(svd.s.size()) && kept_w > 0.0) {
    s *= std::sqrt(total / kept_w);
  }
  RowMat left = svd.u.leftCols(k);
  RowMat right = s.asDiagonal() * svd.vh.topRows(k);
  cores_[site] = core_from_matrix(left, dl, keep);
  cores_[site + 1] = core_from_matrix(right, keep, dr);
  if (had_center) {
    center_ = site + 1;
  } else {
    center_.reset();
  }
  return info;
}

// ---------------------------------------------------------------------------
// Free functions

Mps mps_from_statevector(std::span<const Complex> amplitudes, std::size_t chi_max,
                         double svd_threshold) {
  const std::size_t len = amplitudes.size();
  if (len < 2 || !is_power_of_two(len)) {
    throw ShapeError("state vector length must be a power of two >= 2, got " +
                     std::to_string(len));
  }
  double nrm2 = 0.0;
  for (const auto& z : amplitudes) nrm2 += std::norm(z);
  if (!(nrm2 > 0.0)) throw InvalidInput("state vector has zero norm");
  const double inv = 1.0 / std::sqrt(nrm2);
  const std::size_t n = log2_exact(len);

  std::vector<Core> cores;
  cores.reserve(n);
  // B has shape (bond * 2) x rest.
  RowMat b(2, static_cast<Eigen::Index>(len / 2));
  for (std::size_t i = 0; i < len; ++i) b(static_cast<Eigen::Index>(i / (len / 2)),
                                          static_cast<Eigen::Index>(i % (len / 2))) =
                                            amplitudes[i] * inv;
  std::size_t bond = 1;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    auto svd = thin_svd(b);
    const std::size_t keep = choose_rank(svd.s, chi_max, svd_threshold);
    const auto kk = static_cast<Eigen::Index>(keep);
    cores.push_back(core_from_matrix(svd.u.leftCols(kk), bond, keep));
    RowMat rest = svd.s.head(kk).asDiagonal() * svd.vh.topRows(kk);
    // Reshape keep x (2 * rest/2) into (keep*2) x (rest/2).
    const auto cols = rest.cols() / 2;
    b = Eigen::Map<RowMat>(rest.data(), kk * 2, cols);
    bond = keep;
  }
  Core last(bond, 1);
  Eigen::Map<RowMat>(last.data.data(), b.rows(), 1) = b;
  cores.push_back(std::move(last));
  Mps out(std::move(cores), Canonical::left(), chi_max);
  out.normalize();
  return out;
}

TruncationResult truncate(const Mps& mps, std::size_t chi_max, double svd_threshold) {
  if (chi_max < 1) throw InvalidParameter("chi_max must be at least 1");
  Mps work = mps;
  work.move_center(0);
  work.normalize();
  const std::size_t n = work.size();
  double discarded = 0.0;
  std::vector<Core> cores = work.cores();
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Core& a = cores[k];
    Core& b = cores[k + 1];
    auto svd = thin_svd(RowMat(a.left_matrix()));
    const std::size_t keep = choose_rank(svd.s, chi_max, svd_threshold);
    for (Eigen::Index i = static_cast<Eigen::Index>(keep); i < svd.s.size(); ++i) {
      discarded += svd.s[i] * svd.s[i];
    }
    const auto kk = static_cast<Eigen::Index>(keep);
    RowMat sv = svd.s.head(kk).asDiagonal() * svd.vh.topRows(kk);
    RowMat nb = sv * b.right_matrix();
    const std::size_t left = a.left;
    a = core_from_matrix(svd.u.leftCols(kk), left, keep);
    b = core_from_matrix(nb, keep, b.right);
  }
  Mps out(std::move(cores), Canonical::left(), chi_max);
  out.normalize();
  return {std::move(out), std::sqrt(discarded)};
}

Complex inner_product(const Mps& a, const Mps& b) {
  if (a.size() != b.size()) throw ShapeError("inner product of MPS with different site counts");
  RowMat env = RowMat::Ones(1, 1);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const Core& ca = a.core(k);
    const Core& cb = b.core(k);
    RowMat next = RowMat::Zero(static_cast<Eigen::Index>(ca.right),
                               static_cast<Eigen::Index>(cb.right));
    for (std::size_t p = 0; p < 2; ++p) {
      next.noalias() += ca.slice(p).adjoint() * (env * cb.slice(p));
    }
    env = std::move(next);
  }
  return env(0, 0);
}

double fidelity(const Mps& a, const Mps& b) {
  const double na = inner_product(a, a).real();
  const double nb = inner_product(b, b).real();
  return std::norm(inner_product(a, b)) / (na * nb);
}

Mps apply_two_qubit_gate(const Mps& mps, const Mat4& gate, std::size_t site, std::size_t chi_max,
                         double svd_threshold) {
  if (mps.size() < 2 || site + 1 >= mps.size()) {
    throw ShapeError("gate site " + std::to_string(site) + " out of range");
  }
  if (unitarity_defect(gate) > 1e-10) throw ValidationError("two-qubit gate is not unitary");
  Mps out = mps;
  if (!out.center()) out.move_center(site);
  out.apply_two_qubit(gate, site, chi_max, svd_threshold);
  return out;
}

SchmidtSpectrum schmidt_spectrum(const Mps& mps, std::size_t bond_index) {
  const std::size_t n = mps.size();
  if (bond_index < 1 || bond_index >= n) {
    throw ShapeError("bond index must lie in [1, n-1]");
  }
  Mps work = mps;
  work.move_center(bond_index - 1);
  auto svd = thin_svd(RowMat(work.core(bond_index - 1).left_matrix()));
  SchmidtSpectrum out;
  out.bond_index = bond_index;
  const double nrm = svd.s.norm();
  for (Eigen::Index i = 0; i < svd.s.size(); ++i) {
    out.singular_values.push_back(nrm > 0.0 ? svd.s[i] / nrm : 0.0);
  }
  out.entropy = entropy_bits(out.singular_values);
  return out;
}

double entropy_bits(std::span<const double> sv) {
  double total = 0.0;
  for (double s : sv) total += s * s;
  if (!(total > 0.0)) return 0.0;
  double h = 0.0;
  for (double s : sv) {
    const double p = s * s / total;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return std::max(0.0, h);
}

Mps canonicalize(const Mps& mps, Canonical form) {
  Mps out = mps;
  const std::size_t n = out.size();
  out.set_center(std::nullopt);
  switch (form.form) {
    case CanonicalForm::None: return out;
    case CanonicalForm::Left: out.move_center(n - 1); break;
    case CanonicalForm::Right: out.move_center(0); break;
    case CanonicalForm::Mixed: out.move_center(form.center); break;
  }
  return out;
}

double isometry_residual(const Mps& mps, Canonical form) {
  const std::size_t n = mps.size();
  std::size_t center = 0;
  switch (form.form) {
    case CanonicalForm::None: return 0.0;
    case CanonicalForm::Left: center = n - 1; break;
    case CanonicalForm::Right: center = 0; break;
    case CanonicalForm::Mixed: center = form.center; break;
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const Core& c = mps.core(k);
    if (k < center) {
      RowMat g = c.left_matrix().adjoint() * c.left_matrix();
      g -= RowMat::Identity(g.rows(), g.cols());
      worst = std::max(worst, g.cwiseAbs().maxCoeff());
    } else if (k > center) {
      RowMat g = c.right_matrix() * c.right_matrix().adjoint();
      g -= RowMat::Identity(g.rows(), g.cols());
      worst = std::max(worst, g.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Binary container

namespace {

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian platforms are not supported");

template <typename T>
void put_le(std::ostream& out, T value) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) {
    throw FormatError("truncated MPS container");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

}  // namespace

void write_mps(std::ostream& out, const Mps& mps) {
  out.write("MPS1", 4);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(mps.size()));
  for (std::size_t d : mps.bond_dims()) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  for (const Core& c : mps.cores()) {
    for (const Complex& z : c.data) {
      put_le<double>(out, z.real());
      put_le<double>(out, z.imag());
    }
  }
  if (!out) throw FormatError("failed writing MPS container");
}

Mps read_mps(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "MPS1", 4) != 0) {
    throw FormatError("bad MPS container magic");
  }
  const auto n = get_le<std::uint32_t>(in);
  if (n == 0 || n > 4096) throw FormatError("implausible site count in MPS container");
  std::vector<std::size_t> dims(n + 1);
  for (auto& d : dims) {
    d = get_le<std::uint32_t>(in);
    if (d == 0 || d > (1U << 20)) throw FormatError("implausible bond dimension");
  }
  std::vector<Core> cores;
  cores.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    Core c(dims[k], dims[k + 1]);
    for (auto& z : c.data) {
      const double re = get_le<double>(in);
      const double im = get_le<double>(in);
      z = Complex(re, im);
    }
    cores.push_back(std::move(c));
  }
  return Mps(std::move(cores));
}

void save_mps(const std::string& path, const Mps& mps) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  write_mps(f, mps);
}

Mps load_mps(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path);
  return read_mps(f);
}

}  // namespace mpsenc::tn
