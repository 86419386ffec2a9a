#pragma once

#include <cstddef>
#include <span>

#include "mpsenc/common.hpp"

// Dense statevector kernels. Qubit k owns bit (n-1-k) of the basis index, the
// same convention as the MPS site order.
//
// `serial` is the reference implementation kept for testing; `parallel` splits
// the outer loop over amplitude pairs/blocks with OpenMP. Both produce
// bit-identical results because every output amplitude is computed by the same
// sequence of floating-point operations.

namespace mpsenc::kernels {

namespace serial {
void apply_1q(std::span<Complex> psi, std::size_t n, const Mat2& u, std::size_t q);
/// u indexed by 2*b(q0) + b(q1); q0 and q1 need not be adjacent.
void apply_2q(std::span<Complex> psi, std::size_t n, const Mat4& u, std::size_t q0,
              std::size_t q1);
/// u of dimension 2^k indexed with wires[0] as the most significant bit.
void apply_kq(std::span<Complex> psi, std::size_t n, const RowMat& u,
              std::span<const std::size_t> wires);
/// CNOT as an amplitude permutation.
void apply_cx(std::span<Complex> psi, std::size_t n, std::size_t control, std::size_t target);
Complex inner(std::span<const Complex> a, std::span<const Complex> b);
/// m(p, p') = sum over the other wires of conj(a[.., p, ..]) * b[.., p', ..] with
/// p, p' the value of wire q. <a|(A on q)|b> = sum_{p,p'} A(p, p') m(p, p').
Mat2 overlap_1q(std::span<const Complex> a, std::span<const Complex> b, std::size_t n,
                std::size_t q);
}  // namespace serial

namespace parallel {
void apply_1q(std::span<Complex> psi, std::size_t n, const Mat2& u, std::size_t q);
void apply_2q(std::span<Complex> psi, std::size_t n, const Mat4& u, std::size_t q0,
              std::size_t q1);
void apply_kq(std::span<Complex> psi, std::size_t n, const RowMat& u,
              std::span<const std::size_t> wires);
/// Reduction order differs from the serial sum; agrees to rounding only.
void apply_cx(std::span<Complex> psi, std::size_t n, std::size_t control, std::size_t target);
Complex inner(std::span<const Complex> a, std::span<const Complex> b);
Mat2 overlap_1q(std::span<const Complex> a, std::span<const Complex> b, std::size_t n,
                std::size_t q);
}  // namespace parallel

using parallel::apply_1q;
using parallel::apply_2q;
using parallel::apply_cx;
using parallel::apply_kq;
using parallel::inner;
using parallel::overlap_1q;

/// |0...0> on n qubits.
ComplexVector zero_state(std::size_t n);

}  // namespace mpsenc::kernels
