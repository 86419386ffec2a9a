#include <cmath>
#include <numbers>
#include <optional>

#include <Eigen/Eigenvalues>

#include "mpsenc/circuit.hpp"

namespace mpsenc::circuit {

namespace {

using std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

Mat2 pauli_x() { return (Mat2() << 0, 1, 1, 0).finished(); }
Mat2 pauli_y() { return (Mat2() << 0, -kI, kI, 0).finished(); }
Mat2 pauli_z() { return (Mat2() << 1, 0, 0, -1).finished(); }
Mat2 hadamard() { return (Mat2() << 1, 1, 1, -1).finished() / std::sqrt(2.0); }
Mat2 phase_s() { return (Mat2() << 1, 0, 0, kI).finished(); }
Mat2 expi(const Mat2& p, double t) { return std::cos(t) * Mat2::Identity() + kI * std::sin(t) * p; }
Mat2 rx(double t) { return expi(pauli_x(), -t / 2); }
Mat2 ry(double t) { return expi(pauli_y(), -t / 2); }
Mat2 rz(double t) { return expi(pauli_z(), -t / 2); }

Mat4 kron2(const Mat2& a, const Mat2& b) {
  Mat4 k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

const Mat4& magic() {
  static const Mat4 b = [] {
    Mat4 m;
    m << 1, 0, 0, kI,
         0, kI, 1, 0,
         0, kI, -1, 0,
         1, 0, 0, -kI;
    return Mat4(m / std::sqrt(2.0));
  }();
  return b;
}

Mat4 cnot12() {
  Mat4 c = Mat4::Zero();
  c(0, 0) = c(1, 1) = c(2, 3) = c(3, 2) = 1;
  return c;
}
Mat4 cnot21() {
  Mat4 c = Mat4::Zero();
  c(0, 0) = c(3, 1) = c(2, 2) = c(1, 3) = 1;
  return c;
}

Mat4 canonical(double a, double b, double c) {
  // XX, YY and ZZ commute and square to the identity.
  auto factor = [](double t, const Mat2& p) {
    return Mat4(std::cos(t) * Mat4::Identity() + kI * std::sin(t) * kron2(p, p));
  };
  return factor(a, pauli_x()) * factor(b, pauli_y()) * factor(c, pauli_z());
}

// u = phase * left * Can(x) * right with left/right local.
struct Kak {
  Complex phase{1.0, 0.0};
  Mat4 left = Mat4::Identity();
  Mat4 right = Mat4::Identity();
  std::array<double, 3> x{};
};

Kak kak_raw(const Mat4& u) {
  const Complex q = std::pow(u.determinant(), 0.25);
  const Mat4 us = u / q;
  const Mat4& b = magic();
  const Mat4 up = b.adjoint() * us * b;
  const Mat4 m2 = up.transpose() * up;

  // m2 is symmetric unitary: Re and Im commute and share a real eigenbasis.
  Eigen::Matrix4d p;
  bool ok = false;
  for (int attempt = 0; attempt < 32 && !ok; ++attempt) {
    const double t = 0.4 + 0.77 * attempt;
    Eigen::Matrix4d s = std::cos(t) * m2.real() + std::sin(t) * m2.imag();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(s);
    p = es.eigenvectors();
    Mat4 d = p.transpose().cast<Complex>() * m2 * p.cast<Complex>();
    d.diagonal().setZero();
    ok = d.cwiseAbs().maxCoeff() < 1e-9;
  }
  if (!ok) throw NumericalError("two-qubit decomposition: simultaneous diagonalisation failed");
  if (p.determinant() < 0) p.col(0) *= -1.0;

  const Mat4 pc = p.cast<Complex>();
  const Eigen::Vector4cd d = (pc.transpose() * m2 * pc).diagonal();
  Eigen::Vector4d theta;
  for (int i = 0; i < 4; ++i) theta(i) = std::arg(d(i)) / 2;
  const long k = std::lround(theta.sum() / pi);
  if (k % 2 != 0) theta(0) -= pi;

  Eigen::Vector4cd inv_a;
  for (int i = 0; i < 4; ++i) inv_a(i) = std::polar(1.0, -theta(i));
  const Mat4 k1 = up * pc * inv_a.asDiagonal();
  const Mat4 k2 = pc.transpose();

  // Diagonals of XX, YY, ZZ in the magic basis.
  static const std::array<Eigen::Vector4d, 3> diag = [] {
    std::array<Eigen::Vector4d, 3> out;
    const Mat2 ps[3] = {pauli_x(), pauli_y(), pauli_z()};
    for (int j = 0; j < 3; ++j) out[static_cast<std::size_t>(j)] = (magic().adjoint() * kron2(ps[j], ps[j]) * magic()).diagonal().real();
    return out;
  }();

  Kak r;
  for (std::size_t j = 0; j < 3; ++j) r.x[j] = theta.dot(diag[j]) / 4;
  r.phase = q * std::polar(1.0, theta.sum() / 4);
  r.left = b * k1 * b.adjoint();
  r.right = b * k2 * b.adjoint();
  return r;
}

// Moves the coordinates into pi/4 >= a >= b >= |c| (a, b >= 0), tracking locals.
void canonicalize(Kak& k) {
  const Mat2 paulis[3] = {pauli_x(), pauli_y(), pauli_z()};
  auto shift = [&](std::size_t j, int dir) {
    // Can(x) = Can(x - dir pi/2) * exp(i dir pi/2 PP) = Can(x') * (i dir) PP.
    k.x[j] -= dir * pi / 2;
    k.right = kron2(paulis[j], paulis[j]) * k.right;
    k.phase *= Complex(0.0, dir);
  };
  // V Can(x) V^dag = Can(x'), so Can(x) = V^dag Can(x') V.
  auto conj = [&](const Mat4& v, std::array<double, 3> xp) {
    k.left = k.left * v.adjoint();
    k.right = v * k.right;
    k.x = xp;
  };
  for (std::size_t j = 0; j < 3; ++j) {
    while (k.x[j] > pi / 4) shift(j, +1);
    while (k.x[j] <= -pi / 4) shift(j, -1);
  }
  const Mat4 swap_xy = kron2(phase_s(), phase_s());
  const Mat4 swap_xz = kron2(hadamard(), hadamard());
  const Mat4 swap_yz = kron2(rx(pi / 2), rx(pi / 2));
  auto& x = k.x;
  if (std::abs(x[0]) < std::abs(x[1])) conj(swap_xy, {x[1], x[0], x[2]});
  if (std::abs(x[0]) < std::abs(x[2])) conj(swap_xz, {x[2], x[1], x[0]});
  if (std::abs(x[1]) < std::abs(x[2])) conj(swap_yz, {x[0], x[2], x[1]});
  const Mat2 id = Mat2::Identity();
  if (x[0] < 0 && x[1] < 0) {
    conj(kron2(pauli_z(), id), {-x[0], -x[1], x[2]});
  } else if (x[0] < 0) {
    conj(kron2(pauli_y(), id), {-x[0], x[1], -x[2]});
  } else if (x[1] < 0) {
    conj(kron2(pauli_x(), id), {x[0], -x[1], -x[2]});
  }
}

int classify(const std::array<double, 3>& x, double tol) {
  const double a = x[0], b = x[1], c = std::abs(x[2]);
  if (a < tol && b < tol && c < tol) return 0;
  if (std::abs(a - pi / 4) < tol && b < tol && c < tol) return 1;
  if (c < tol) return 2;
  return 3;
}

// Local 4x4 matrix -> phase * (a kron b) with a, b in SU(2).
void kron_factor(const Mat4& k, Mat2& a, Mat2& b, Complex& phase) {
  Eigen::Matrix4cd r;
  for (int i1 = 0; i1 < 2; ++i1)
    for (int i2 = 0; i2 < 2; ++i2)
      for (int j1 = 0; j1 < 2; ++j1)
        for (int j2 = 0; j2 < 2; ++j2) r(i1 * 2 + j1, i2 * 2 + j2) = k(i1 * 2 + i2, j1 * 2 + j2);
  Eigen::JacobiSVD<Eigen::Matrix4cd> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double s = std::sqrt(svd.singularValues()(0));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      a(i, j) = s * svd.matrixU()(i * 2 + j, 0);
      b(i, j) = s * std::conj(svd.matrixV()(i * 2 + j, 0));
    }
  a /= std::sqrt(a.determinant());
  b /= std::sqrt(b.determinant());
  phase = (kron2(a, b).adjoint() * k).trace() / 4.0;
}

struct Op {
  int wire = -1;      // single-qubit op on local wire 0/1
  Mat2 m = Mat2::Identity();
  int control = -1;   // CNOT when >= 0
  int target = -1;
};

Op op1(int w, const Mat2& m) { return Op{w, m, -1, -1}; }
Op opc(int c, int t) { return Op{-1, Mat2::Identity(), c, t}; }

Mat4 ops_matrix(const std::vector<Op>& ops) {
  Mat4 m = Mat4::Identity();
  for (const auto& o : ops) {
    if (o.control >= 0) {
      m = (o.control == 0 ? cnot12() : cnot21()) * m;
    } else {
      m = (o.wire == 0 ? kron2(o.m, Mat2::Identity()) : kron2(Mat2::Identity(), o.m)) * m;
    }
  }
  return m;
}

// Canonical-gate templates in time order.
std::vector<Op> template_ops(int cls, const std::array<double, 3>& x) {
  const double a = x[0], b = x[1], c = x[2];
  switch (cls) {
    case 0:
      return {};
    case 1:
      return {op1(0, hadamard()), opc(0, 1), op1(0, expi(pauli_z(), pi / 4)),
              op1(1, expi(pauli_x(), pi / 4)), op1(0, hadamard())};
    case 2:
      return {op1(0, rx(pi / 2)), op1(1, rx(pi / 2)), opc(0, 1), op1(0, expi(pauli_x(), a)),
              op1(1, expi(pauli_z(), b)), opc(0, 1), op1(0, rx(-pi / 2)), op1(1, rx(-pi / 2))};
    default:
      return {op1(0, rz(-pi / 2)), opc(1, 0), op1(1, ry(-pi / 2 - 2 * b)), opc(0, 1),
              op1(0, rz(-pi / 2 - 2 * c)), op1(1, ry(pi / 2 + 2 * a)), opc(1, 0), op1(1, rz(pi / 2))};
  }
}

double wrap_angle(double t) {
  double r = std::remainder(t, 2 * pi);
  if (r <= -pi) r += 2 * pi;
  return r;
}

bool is_identity_up_to_phase(const Mat2& m, double tol) {
  if (std::abs(m(0, 0)) < 0.5) return false;
  const Complex ph = m(0, 0) / std::abs(m(0, 0));
  return (m - ph * Mat2::Identity()).cwiseAbs().maxCoeff() < tol;
}

}  // namespace

Mat2 u3_matrix(double theta, double phi, double lambda) {
  const double c = std::cos(theta / 2), s = std::sin(theta / 2);
  Mat2 m;
  m << c, -std::polar(s, lambda), std::polar(s, phi), std::polar(c, phi + lambda);
  return m;
}

std::array<double, 3> u3_angles(const Mat2& m, double* alpha) {
  const double c = std::abs(m(0, 0)), s = std::abs(m(1, 0));
  const double theta = 2 * std::atan2(s, c);
  // Phases are read from the larger pair of entries; the small pair only fixes
  // the split of phi and lambda, whose error is then scaled by its magnitude.
  double a = 0.0, phi = 0.0, lambda = 0.0;
  if (c >= s) {
    a = std::arg(m(0, 0));
    const double sum = std::arg(m(1, 1)) - a;
    if (s > 0.0) {
      const double diff = std::arg(m(1, 0)) - std::arg(-m(0, 1));
      phi = (sum + diff) / 2;
      lambda = (sum - diff) / 2;
      if (std::cos(a + phi - std::arg(m(1, 0))) < 0) {
        phi += pi;
        lambda -= pi;
      }
    } else {
      lambda = sum;
    }
  } else {
    const double pa = std::arg(m(1, 0)), pb = std::arg(-m(0, 1));
    if (c > 0.0) {
      const double sum = std::arg(m(1, 1)) - std::arg(m(0, 0));
      phi = (sum + pa - pb) / 2;
      lambda = (sum - pa + pb) / 2;
      a = pa - phi;
      if (std::cos(a - std::arg(m(0, 0))) < 0) {
        phi += pi;
        lambda -= pi;
        a = pa - phi;
      }
    } else {
      a = pb;
      phi = pa - a;
    }
  }
  if (alpha) *alpha = a;
  return {theta, wrap_angle(phi), wrap_angle(lambda)};
}

WeylCoordinates weyl_coordinates(const Mat4& u) {
  Kak k = kak_raw(u);
  canonicalize(k);
  return {k.x[0], k.x[1], k.x[2]};
}

int cnot_class(const Mat4& u, double tol) {
  Kak k = kak_raw(u);
  canonicalize(k);
  return classify(k.x, tol);
}

std::vector<Gate> kak_decompose(const Mat4& u, std::size_t q0, std::size_t q1, double* global_phase) {
  if (unitarity_defect(u) > 1e-9) throw ValidationError("kak_decompose: matrix is not unitary");
  if (q0 == q1) throw ShapeError("kak_decompose: wires must differ");
  Kak k = kak_raw(u);
  canonicalize(k);
  const int cls = classify(k.x, 5e-9);

  std::array<double, 3> x = k.x;
  if (cls == 0) x = {0, 0, 0};
  if (cls == 1) x = {pi / 4, 0, 0};
  if (cls == 2) x[2] = 0.0;
  std::vector<Op> core = template_ops(cls, x);
  const Complex tph = (ops_matrix(core).adjoint() * canonical(x[0], x[1], x[2])).trace() / 4.0;

  Mat2 la, lb, ra, rb;
  Complex lph, rph;
  kron_factor(k.left, la, lb, lph);
  kron_factor(k.right, ra, rb, rph);

  std::vector<Op> ops;
  ops.push_back(op1(0, ra));
  ops.push_back(op1(1, rb));
  ops.insert(ops.end(), core.begin(), core.end());
  ops.push_back(op1(0, la));
  ops.push_back(op1(1, lb));

  double phase = std::arg(k.phase * tph * lph * rph);
  std::vector<Gate> gates;
  std::array<std::optional<Mat2>, 2> pending;
  const std::size_t wires[2] = {q0, q1};
  auto flush = [&](int w) {
    auto& p = pending[static_cast<std::size_t>(w)];
    if (!p) return;
    if (!is_identity_up_to_phase(*p, 1e-12)) {
      double al = 0.0;
      auto ang = u3_angles(*p, &al);
      phase += al;
      gates.push_back(Gate::u3(wires[w], ang[0], ang[1], ang[2]));
    } else {
      phase += std::arg((*p)(0, 0));
    }
    p.reset();
  };
  for (const auto& o : ops) {
    if (o.control >= 0) {
      flush(0);
      flush(1);
      gates.push_back(Gate::cnot(wires[o.control], wires[o.target]));
    } else {
      auto& p = pending[static_cast<std::size_t>(o.wire)];
      p = p ? Mat2(o.m * *p) : o.m;
    }
  }
  flush(0);
  flush(1);
  if (global_phase) *global_phase = wrap_angle(phase);
  return gates;
}

}  // namespace mpsenc::circuit
