#include "mpsenc/kernels/statevector.hpp"

#include <algorithm>
#include <cstdint>
#include <vector>

#include <omp.h>

namespace mpsenc::kernels {

namespace {

using Index = std::int64_t;

void check_len(std::span<const Complex> psi, std::size_t n) {
  if (psi.size() != (std::size_t{1} << n)) throw ShapeError("statevector length is not 2^n");
}

void check_wire(std::size_t q, std::size_t n) {
  if (q >= n) throw ShapeError("wire index out of range");
}

// Insert a zero bit at position `bit` of x.
inline std::uint64_t insert_zero(std::uint64_t x, unsigned bit) {
  const std::uint64_t low = x & ((std::uint64_t{1} << bit) - 1);
  return ((x >> bit) << (bit + 1)) | low;
}

// Gate entries are passed by value so the compiler need not reload them
// after every store through psi.
struct U2 {
  Complex u00, u01, u10, u11;
  explicit U2(const Mat2& u) : u00(u(0, 0)), u01(u(0, 1)), u10(u(1, 0)), u11(u(1, 1)) {}
};

inline void kernel_1q(Complex* psi, const U2 u, unsigned bit, std::uint64_t i) {
  const std::uint64_t i0 = insert_zero(i, bit);
  const std::uint64_t i1 = i0 | (std::uint64_t{1} << bit);
  const Complex a0 = psi[i0];
  const Complex a1 = psi[i1];
  psi[i0] = u.u00 * a0 + u.u01 * a1;
  psi[i1] = u.u10 * a0 + u.u11 * a1;
}

inline void kernel_2q(Complex* psi, const Mat4& u, unsigned b0, unsigned b1, unsigned lo,
                      unsigned hi, std::uint64_t i) {
  const std::uint64_t base = insert_zero(insert_zero(i, lo), hi);
  const std::uint64_t m0 = std::uint64_t{1} << b0;
  const std::uint64_t m1 = std::uint64_t{1} << b1;
  const std::uint64_t idx[4] = {base, base | m1, base | m0, base | m0 | m1};
  Complex v[4];
  for (int k = 0; k < 4; ++k) v[k] = psi[idx[k]];
  for (int r = 0; r < 4; ++r) {
    Complex acc = 0.0;
    for (int c = 0; c < 4; ++c) acc += u(r, c) * v[c];
    psi[idx[r]] = acc;
  }
}

struct KqPlan {
  std::vector<unsigned> sorted_bits;
  std::vector<std::uint64_t> offsets;  // offset of local index j in the full index
};

KqPlan make_plan(std::size_t n, std::span<const std::size_t> wires) {
  KqPlan p;
  const std::size_t k = wires.size();
  std::vector<unsigned> bits(k);
  for (std::size_t w = 0; w < k; ++w) {
    check_wire(wires[w], n);
    bits[w] = static_cast<unsigned>(n - 1 - wires[w]);
    for (std::size_t v = 0; v < w; ++v) {
      if (wires[v] == wires[w]) throw ShapeError("repeated wire in gate");
    }
  }
  p.sorted_bits = bits;
  std::sort(p.sorted_bits.begin(), p.sorted_bits.end());
  const std::size_t dim = std::size_t{1} << k;
  p.offsets.resize(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::uint64_t off = 0;
    for (std::size_t w = 0; w < k; ++w) {
      if ((j >> (k - 1 - w)) & 1U) off |= std::uint64_t{1} << bits[w];
    }
    p.offsets[j] = off;
  }
  return p;
}

inline void kernel_kq(Complex* psi, const RowMat& u, const KqPlan& p, std::uint64_t i,
                      Complex* scratch) {
  std::uint64_t base = i;
  for (unsigned b : p.sorted_bits) base = insert_zero(base, b);
  const auto dim = static_cast<Eigen::Index>(p.offsets.size());
  for (Eigen::Index j = 0; j < dim; ++j) scratch[j] = psi[base | p.offsets[j]];
  for (Eigen::Index r = 0; r < dim; ++r) {
    Complex acc = 0.0;
    for (Eigen::Index c = 0; c < dim; ++c) acc += u(r, c) * scratch[c];
    psi[base | p.offsets[r]] = acc;
  }
}

}  // namespace

ComplexVector zero_state(std::size_t n) {
  ComplexVector v(std::size_t{1} << n, Complex{0.0});
  v[0] = 1.0;
  return v;
}

namespace serial {

void apply_1q(std::span<Complex> psi, std::size_t n, const Mat2& u, std::size_t q) {
  check_len(psi, n);
  check_wire(q, n);
  const auto bit = static_cast<unsigned>(n - 1 - q);
  const std::uint64_t half = psi.size() / 2;
  const U2 v(u);
  for (std::uint64_t i = 0; i < half; ++i) kernel_1q(psi.data(), v, bit, i);
}

void apply_2q(std::span<Complex> psi, std::size_t n, const Mat4& u, std::size_t q0,
              std::size_t q1) {
  check_len(psi, n);
  check_wire(q0, n);
  check_wire(q1, n);
  if (q0 == q1) throw ShapeError("two-qubit gate on a single wire");
  const auto b0 = static_cast<unsigned>(n - 1 - q0);
  const auto b1 = static_cast<unsigned>(n - 1 - q1);
  const unsigned lo = std::min(b0, b1), hi = std::max(b0, b1);
  const std::uint64_t quarter = psi.size() / 4;
  for (std::uint64_t i = 0; i < quarter; ++i) kernel_2q(psi.data(), u, b0, b1, lo, hi, i);
}

void apply_kq(std::span<Complex> psi, std::size_t n, const RowMat& u,
              std::span<const std::size_t> wires) {
  check_len(psi, n);
  const KqPlan p = make_plan(n, wires);
  if (static_cast<std::size_t>(u.rows()) != p.offsets.size()) {
    throw ShapeError("gate dimension does not match wire count");
  }
  const std::uint64_t blocks = psi.size() >> wires.size();
  std::vector<Complex> scratch(p.offsets.size());
  for (std::uint64_t i = 0; i < blocks; ++i) kernel_kq(psi.data(), u, p, i, scratch.data());
}

void apply_cx(std::span<Complex> psi, std::size_t n, std::size_t control, std::size_t target) {
  check_len(psi, n);
  check_wire(control, n);
  check_wire(target, n);
  if (control == target) throw ShapeError("two-qubit gate on a single wire");
  const auto bc = static_cast<unsigned>(n - 1 - control);
  const auto bt = static_cast<unsigned>(n - 1 - target);
  const unsigned lo = std::min(bc, bt), hi = std::max(bc, bt);
  const std::uint64_t quarter = psi.size() / 4;
  for (std::uint64_t i = 0; i < quarter; ++i) {
    const std::uint64_t base = insert_zero(insert_zero(i, lo), hi) | (std::uint64_t{1} << bc);
    std::swap(psi[base], psi[base | (std::uint64_t{1} << bt)]);
  }
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw ShapeError("inner product of vectors with different lengths");
  Complex acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

Mat2 overlap_1q(std::span<const Complex> a, std::span<const Complex> b, std::size_t n,
                std::size_t q) {
  check_len(a, n);
  check_len(b, n);
  check_wire(q, n);
  const auto bit = static_cast<unsigned>(n - 1 - q);
  const std::uint64_t half = a.size() / 2;
  Mat2 m = Mat2::Zero();
  for (std::uint64_t i = 0; i < half; ++i) {
    const std::uint64_t i0 = insert_zero(i, bit);
    const std::uint64_t i1 = i0 | (std::uint64_t{1} << bit);
    const Complex a0 = std::conj(a[i0]), a1 = std::conj(a[i1]);
    m(0, 0) += a0 * b[i0];
    m(0, 1) += a0 * b[i1];
    m(1, 0) += a1 * b[i0];
    m(1, 1) += a1 * b[i1];
  }
  return m;
}

}  // namespace serial

namespace parallel {

void apply_1q(std::span<Complex> psi, std::size_t n, const Mat2& u, std::size_t q) {
  check_len(psi, n);
  check_wire(q, n);
  const auto bit = static_cast<unsigned>(n - 1 - q);
  const auto half = static_cast<Index>(psi.size() / 2);
  Complex* data = psi.data();
  const U2 v(u);
#pragma omp parallel for schedule(static) if (half > 4096)
  for (Index i = 0; i < half; ++i) kernel_1q(data, v, bit, static_cast<std::uint64_t>(i));
}

void apply_2q(std::span<Complex> psi, std::size_t n, const Mat4& u, std::size_t q0,
              std::size_t q1) {
  check_len(psi, n);
  check_wire(q0, n);
  check_wire(q1, n);
  if (q0 == q1) throw ShapeError("two-qubit gate on a single wire");
  const auto b0 = static_cast<unsigned>(n - 1 - q0);
  const auto b1 = static_cast<unsigned>(n - 1 - q1);
  const unsigned lo = std::min(b0, b1), hi = std::max(b0, b1);
  const auto quarter = static_cast<Index>(psi.size() / 4);
  Complex* data = psi.data();
#pragma omp parallel for schedule(static) if (quarter > 2048)
  for (Index i = 0; i < quarter; ++i) {
    kernel_2q(data, u, b0, b1, lo, hi, static_cast<std::uint64_t>(i));
  }
}

void apply_kq(std::span<Complex> psi, std::size_t n, const RowMat& u,
              std::span<const std::size_t> wires) {
  check_len(psi, n);
  const KqPlan p = make_plan(n, wires);
  if (static_cast<std::size_t>(u.rows()) != p.offsets.size()) {
    throw ShapeError("gate dimension does not match wire count");
  }
  const auto blocks = static_cast<Index>(psi.size() >> wires.size());
  Complex* data = psi.data();
#pragma omp parallel if (blocks > 64)
  {
    std::vector<Complex> scratch(p.offsets.size());
#pragma omp for schedule(static)
    for (Index i = 0; i < blocks; ++i) {
      kernel_kq(data, u, p, static_cast<std::uint64_t>(i), scratch.data());
    }
  }
}

void apply_cx(std::span<Complex> psi, std::size_t n, std::size_t control, std::size_t target) {
  check_len(psi, n);
  check_wire(control, n);
  check_wire(target, n);
  if (control == target) throw ShapeError("two-qubit gate on a single wire");
  const auto bc = static_cast<unsigned>(n - 1 - control);
  const auto bt = static_cast<unsigned>(n - 1 - target);
  const unsigned lo = std::min(bc, bt), hi = std::max(bc, bt);
  const auto quarter = static_cast<Index>(psi.size() / 4);
  Complex* data = psi.data();
#pragma omp parallel for schedule(static) if (quarter > 4096)
  for (Index i = 0; i < quarter; ++i) {
    const std::uint64_t base =
        insert_zero(insert_zero(static_cast<std::uint64_t>(i), lo), hi) | (std::uint64_t{1} << bc);
    std::swap(data[base], data[base | (std::uint64_t{1} << bt)]);
  }
}

Complex inner(std::span<const Complex> a, std::span<const Complex> b) {
  if (a.size() != b.size()) throw ShapeError("inner product of vectors with different lengths");
  const auto len = static_cast<Index>(a.size());
  double re = 0.0, im = 0.0;
#pragma omp parallel for reduction(+ : re, im) schedule(static) if (len > 8192)
  for (Index i = 0; i < len; ++i) {
    const Complex z = std::conj(a[i]) * b[i];
    re += z.real();
    im += z.imag();
  }
  return {re, im};
}

Mat2 overlap_1q(std::span<const Complex> a, std::span<const Complex> b, std::size_t n,
                std::size_t q) {
  check_len(a, n);
  check_len(b, n);
  check_wire(q, n);
  const auto bit = static_cast<unsigned>(n - 1 - q);
  const auto half = static_cast<Index>(a.size() / 2);
  double r00 = 0, i00 = 0, r01 = 0, i01 = 0, r10 = 0, i10 = 0, r11 = 0, i11 = 0;
#pragma omp parallel for reduction(+ : r00, i00, r01, i01, r10, i10, r11, i11) \
    schedule(static) if (half > 4096)
  for (Index i = 0; i < half; ++i) {
    const std::uint64_t i0 = insert_zero(static_cast<std::uint64_t>(i), bit);
    const std::uint64_t i1 = i0 | (std::uint64_t{1} << bit);
    const Complex a0 = std::conj(a[i0]), a1 = std::conj(a[i1]);
    const Complex z00 = a0 * b[i0], z01 = a0 * b[i1], z10 = a1 * b[i0], z11 = a1 * b[i1];
    r00 += z00.real(); i00 += z00.imag();
    r01 += z01.real(); i01 += z01.imag();
    r10 += z10.real(); i10 += z10.imag();
    r11 += z11.real(); i11 += z11.imag();
  }
  Mat2 m;
  m << Complex(r00, i00), Complex(r01, i01), Complex(r10, i10), Complex(r11, i11);
  return m;
}

}  // namespace parallel

}  // namespace mpsenc::kernels
