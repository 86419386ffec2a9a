#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mpsenc {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

/// Row-major dynamic complex matrix. Tensor cores are stored row-major, so
/// reshapes between cores and matrices are free.
using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mat2 = Eigen::Matrix<Complex, 2, 2, Eigen::RowMajor>;
using Mat4 = Eigen::Matrix<Complex, 4, 4, Eigen::RowMajor>;

/// Default singular-value cut used throughout (absolute, on a unit-norm state).
inline constexpr double kDefaultSvdThreshold = 1e-10;

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers (notably the CLI exit-code contract) can tell library failures apart
// from unrelated exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is unusable (zero norm, empty vector, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Dimensions or indices do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An algorithm parameter is outside its admissible range.
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// A matrix that must be unitary is not, or a structural invariant failed.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A requested object would exceed a hard size guard.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// The requested target state cannot be normalised or evaluated.
class InvalidTarget : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed in a way that leaves no usable result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

inline bool is_power_of_two(std::uint64_t x) { return x != 0 && (x & (x - 1)) == 0; }

inline unsigned log2_exact(std::uint64_t x) {
  unsigned r = 0;
  while ((std::uint64_t{1} << r) < x) ++r;
  return r;
}

/// ceil(log2(x)) for x >= 1.
inline unsigned ceil_log2(std::uint64_t x) { return log2_exact(x); }

/// Largest absolute deviation of m^dagger m from the identity.
template <typename Derived>
double unitarity_defect(const Eigen::MatrixBase<Derived>& m) {
  const auto d = m.rows();
  RowMat g = m.adjoint() * m;
  g -= RowMat::Identity(d, d);
  return g.cwiseAbs().maxCoeff();
}

}  // namespace mpsenc
