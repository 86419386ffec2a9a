#include "mpsenc/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace mpsenc::linalg {

Svd thin_svd(const RowMat& m) {
  Svd out;
  // BDCSVD switches to one-sided Jacobi below 16 columns internally.
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("SVD did not converge");
  }
  out.u = svd.matrixU();
  out.s = svd.singularValues();
  out.vh = svd.matrixV().adjoint();
  return out;
}

std::size_t choose_rank(const Eigen::VectorXd& s, std::size_t chi_max, double threshold) {
  const auto total = static_cast<std::size_t>(s.size());
  if (total == 0) return 0;
  const double norm = s.norm();
  std::size_t keep = 0;
  const double cut = threshold * norm;
  while (keep < total && s[static_cast<Eigen::Index>(keep)] >= cut &&
         s[static_cast<Eigen::Index>(keep)] > 0.0) {
    ++keep;
  }
  if (chi_max > 0) keep = std::min(keep, chi_max);
  return std::max<std::size_t>(keep, 1);
}

void thin_qr(const RowMat& m, RowMat& q, RowMat& r) {
  const auto rows = m.rows();
  const auto cols = m.cols();
  const auto k = std::min(rows, cols);
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(m);
  q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, k);
  r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
}

void complete_unitary(RowMat& m, std::size_t k) {
  const auto d = static_cast<std::size_t>(m.rows());
  std::size_t filled = k;
  for (std::size_t e = 0; e < d && filled < d; ++e) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(d));
    v[static_cast<Eigen::Index>(e)] = 1.0;
    // Two passes of modified Gram-Schmidt for numerical orthogonality.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < filled; ++j) {
        const auto col = m.col(static_cast<Eigen::Index>(j));
        const Complex proj = col.dot(v);
        v -= proj * col;
      }
    }
    const double nv = v.norm();
    if (nv < 1e-6) continue;
    m.col(static_cast<Eigen::Index>(filled)) = v / nv;
    ++filled;
  }
  if (filled != d) {
    throw NumericalError("orthonormal completion failed");
  }
}

}  // namespace mpsenc::linalg
