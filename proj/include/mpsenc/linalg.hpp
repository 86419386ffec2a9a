#pragma once

#include <cstddef>

#include "mpsenc/common.hpp"

namespace mpsenc::linalg {

struct Svd {
  RowMat u;              // m x k
  Eigen::VectorXd s;     // k, descending
  RowMat vh;             // k x n (V^dagger)
};

/// Thin SVD, singular values sorted descending.
Svd thin_svd(const RowMat& m);

/// Number of singular values to keep: those with s_i >= threshold * ||s||_2,
/// at most chi_max (0 = unlimited), never fewer than one.
std::size_t choose_rank(const Eigen::VectorXd& s, std::size_t chi_max, double threshold);

/// Thin QR: m = q * r with q having orthonormal columns.
void thin_qr(const RowMat& m, RowMat& q, RowMat& r);

/// Complete the leading `k` orthonormal columns of `m` (d x d) into a unitary.
/// The complement is built by modified Gram-Schmidt against the canonical
/// basis vectors in order, which makes the result deterministic.
void complete_unitary(RowMat& m, std::size_t k);

}  // namespace mpsenc::linalg
