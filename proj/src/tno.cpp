#include "mpsenc/tno.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "mpsenc/kernels/statevector.hpp"
#include "mpsenc/rng.hpp"

namespace mpsenc::tno {

using circuit::Circuit;
using circuit::Gate;
using circuit::GateKind;

namespace {

const Complex kI{0.0, 1.0};

Mat4 swap4() {
  Mat4 s = Mat4::Zero();
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1;
  return s;
}

// d(matrix_1q)/d(angles[slot]).
Mat2 derivative(const Gate& g, std::size_t slot) {
  Mat2 m;
  if (g.kind == GateKind::U3) {
    const double t = g.angles[0], ph = g.angles[1], la = g.angles[2];
    const double c = std::cos(t / 2), s = std::sin(t / 2);
    const Complex el = std::polar(1.0, la), ep = std::polar(1.0, ph), epl = std::polar(1.0, ph + la);
    switch (slot) {
      case 0: m << -s / 2, -el * c / 2.0, ep * c / 2.0, -epl * s / 2.0; break;
      case 1: m << 0, 0, kI * ep * s, kI * epl * c; break;
      default: m << 0, -kI * el * s, 0, kI * epl * c; break;
    }
    return m;
  }
  // exp(-i t P / 2): derivative is (-i/2) P exp(-i t P / 2).
  Mat2 pauli;
  switch (g.kind) {
    case GateKind::RX: pauli << 0, 1, 1, 0; break;
    case GateKind::RY: pauli << 0, -kI, kI, 0; break;
    default: pauli << 1, 0, 0, -1; break;
  }
  return (-0.5 * kI) * pauli * g.matrix_1q();
}

bool parametrized(const Gate& g) { return g.num_params() > 0; }

void check_inputs(const Circuit& c, const tn::Mps& target) {
  if (target.size() != c.n) throw ShapeError("target and circuit have different qubit counts");
  for (const Gate& g : c.gates) {
    if (g.kind == GateKind::OpaqueKQ) {
      throw InvalidParameter("angle optimization needs a circuit without multi-qubit opaque blocks");
    }
  }
}

// Sum over a reverse sweep: d<l|phi>/dtheta for a parametrized gate is
// <lambda_k| dG G^dagger |phi_k>, with both states taken after gate k.
double grad_entry(const Mat2& a, const Mat2& m, Complex overlap) {
  const Complex v = (a.array() * m.array()).sum();
  return -2.0 * (std::conj(overlap) * v).real();
}

// ---- dense backend ----------------------------------------------------------

CostGradient dense_eval(const Circuit& c, const ComplexVector& target, bool want_grad) {
  const std::size_t n = c.n;
  ComplexVector phi = kernels::zero_state(n);
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      kernels::apply_1q(phi, n, g.matrix_1q(), g.wires[0]);
    } else if (g.kind == GateKind::CNOT) {
      kernels::apply_cx(phi, n, g.wires[0], g.wires[1]);
    } else {
      kernels::apply_2q(phi, n, Mat4(g.unitary()), g.wires[0], g.wires[1]);
    }
  }
  CostGradient r;
  r.overlap = kernels::inner(target, phi);
  r.cost = 1.0 - std::norm(r.overlap);
  if (!want_grad) return r;

  std::size_t np = 0;
  for (const Gate& g : c.gates) np += g.num_params();
  r.gradient.assign(np, 0.0);
  ComplexVector lam = target;
  std::size_t idx = np;
  for (std::size_t k = c.gates.size(); k-- > 0;) {
    const Gate& g = c.gates[k];
    if (g.is_single_qubit()) {
      const Mat2 u = g.matrix_1q();
      const Mat2 ud = u.adjoint();
      if (parametrized(g)) {
        const Mat2 m = kernels::overlap_1q(lam, phi, n, g.wires[0]);
        idx -= g.num_params();
        for (std::size_t s = 0; s < g.num_params(); ++s) {
          r.gradient[idx + s] = grad_entry(derivative(g, s) * ud, m, r.overlap);
        }
      }
      if (k == 0) break;
      kernels::apply_1q(phi, n, ud, g.wires[0]);
      kernels::apply_1q(lam, n, ud, g.wires[0]);
    } else if (g.kind == GateKind::CNOT) {
      if (k == 0) break;
      kernels::apply_cx(phi, n, g.wires[0], g.wires[1]);
      kernels::apply_cx(lam, n, g.wires[0], g.wires[1]);
    } else {
      if (k == 0) break;
      const Mat4 ud = Mat4(g.unitary()).adjoint();
      kernels::apply_2q(phi, n, ud, g.wires[0], g.wires[1]);
      kernels::apply_2q(lam, n, ud, g.wires[0], g.wires[1]);
    }
  }
  return r;
}

// ---- MPS backend --------------------------------------------------------------

// Transfer environments of <lambda|phi>. left[j] covers sites [0, j), right[j]
// covers sites [j, n). Entries are valid for j <= lvalid and j >= rvalid.
class Environments {
 public:
  Environments(const tn::Mps& lam, const tn::Mps& phi) : lam_(lam), phi_(phi), n_(lam.size()) {
    left_.resize(n_ + 1);
    right_.resize(n_ + 1);
    left_[0] = RowMat::Ones(1, 1);
    right_[n_] = RowMat::Ones(1, 1);
    lvalid_ = 0;
    rvalid_ = n_;
  }

  // Sites [a, b] of either state changed.
  void invalidate(std::size_t a, std::size_t b) {
    lvalid_ = std::min(lvalid_, a);
    rvalid_ = std::max(rvalid_, b + 1);
  }

  // m(p, p') for an operator on site q.
  Mat2 local(std::size_t q) {
    while (lvalid_ < q) {
      const auto& a = lam_.core(lvalid_);
      const auto& b = phi_.core(lvalid_);
      RowMat e = RowMat::Zero(static_cast<Eigen::Index>(a.right), static_cast<Eigen::Index>(b.right));
      for (std::size_t p = 0; p < 2; ++p) e.noalias() += a.slice(p).adjoint() * (left_[lvalid_] * b.slice(p));
      left_[++lvalid_] = std::move(e);
    }
    while (rvalid_ > q + 1) {
      const std::size_t j = rvalid_ - 1;
      const auto& a = lam_.core(j);
      const auto& b = phi_.core(j);
      RowMat e = RowMat::Zero(static_cast<Eigen::Index>(b.left), static_cast<Eigen::Index>(a.left));
      for (std::size_t p = 0; p < 2; ++p) e.noalias() += (b.slice(p) * right_[rvalid_]) * a.slice(p).adjoint();
      right_[j] = std::move(e);
      rvalid_ = j;
    }
    const auto& a = lam_.core(q);
    const auto& b = phi_.core(q);
    Mat2 m;
    for (std::size_t pp = 0; pp < 2; ++pp) {
      const RowMat y = left_[q] * b.slice(pp) * right_[q + 1];
      for (std::size_t p = 0; p < 2; ++p) {
        m(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(pp)) =
            (a.slice(p).conjugate().cwiseProduct(y)).sum();
      }
    }
    return m;
  }

 private:
  const tn::Mps& lam_;
  const tn::Mps& phi_;
  std::size_t n_;
  std::vector<RowMat> left_, right_;
  std::size_t lvalid_, rvalid_;
};

// Applies a two-qubit unitary (index 2*b(w0) + b(w1)) to neighbouring wires and
// returns the range of sites whose cores changed.
std::pair<std::size_t, std::size_t> apply_2q(tn::Mps& m, const Mat4& u, std::size_t w0,
                                             std::size_t w1, double thr) {
  const std::size_t lo = std::min(w0, w1);
  const auto before = m.center();
  if (w1 == w0 + 1) {
    m.apply_two_qubit(u, lo, 0, thr);
  } else {
    const Mat4 s = swap4();
    m.apply_two_qubit(s * u * s, lo, 0, thr);
  }
  if (!before) return {0, m.size() - 1};
  return {std::min(*before, lo), std::max(*before, lo + 1)};
}

void check_adjacent(const Circuit& c) {
  for (const Gate& g : c.gates) {
    if (g.wires.size() == 2) {
      const std::size_t lo = std::min(g.wires[0], g.wires[1]), hi = std::max(g.wires[0], g.wires[1]);
      if (hi != lo + 1) throw InvalidParameter("the MPS backend needs nearest-neighbour two-qubit gates");
    }
  }
}

CostGradient mps_eval(const Circuit& c, const tn::Mps& target, double thr, bool want_grad) {
  check_adjacent(c);
  const std::size_t n = c.n;
  tn::Mps phi = tn::Mps::zero_state(n);
  phi.move_center(0);
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      phi.apply_single_qubit(g.matrix_1q(), g.wires[0]);
    } else {
      apply_2q(phi, Mat4(g.unitary()), g.wires[0], g.wires[1], thr);
    }
  }
  CostGradient r;
  r.overlap = tn::inner_product(target, phi);
  r.cost = 1.0 - std::norm(r.overlap);
  if (!want_grad) return r;

  std::size_t np = 0;
  for (const Gate& g : c.gates) np += g.num_params();
  r.gradient.assign(np, 0.0);
  tn::Mps lam = target;
  if (!lam.center()) lam.move_center(n - 1);
  Environments env(lam, phi);
  std::size_t idx = np;
  for (std::size_t k = c.gates.size(); k-- > 0;) {
    const Gate& g = c.gates[k];
    if (g.is_single_qubit()) {
      const std::size_t q = g.wires[0];
      const Mat2 ud = g.matrix_1q().adjoint();
      if (parametrized(g)) {
        const Mat2 m = env.local(q);
        idx -= g.num_params();
        for (std::size_t s = 0; s < g.num_params(); ++s) {
          r.gradient[idx + s] = grad_entry(derivative(g, s) * ud, m, r.overlap);
        }
      }
      if (k == 0) break;
      phi.apply_single_qubit(ud, q);
      lam.apply_single_qubit(ud, q);
      env.invalidate(q, q);
    } else {
      if (k == 0) break;
      const Mat4 ud = Mat4(g.unitary()).adjoint();
      const auto a = apply_2q(phi, ud, g.wires[0], g.wires[1], thr);
      const auto b = apply_2q(lam, ud, g.wires[0], g.wires[1], thr);
      env.invalidate(std::min(a.first, b.first), std::max(a.second, b.second));
    }
  }
  return r;
}

// Prepared target for repeated evaluations.
class Evaluator {
 public:
  Evaluator(const Circuit& c, const tn::Mps& target, const CostOptions& o) : o_(o) {
    check_inputs(c, target);
    if (c.n == 0) throw InvalidParameter("empty register");
    const double nrm = target.norm();
    if (!(nrm > 0.0) || !std::isfinite(nrm)) throw InvalidInput("target has zero norm");
    backend_ = o.backend;
    if (backend_ == Backend::Auto) backend_ = c.n <= o.dense_max_qubits ? Backend::Dense : Backend::Mps;
    if (backend_ == Backend::Dense) {
      if (c.n > 26) throw CapacityError("dense backend limited to 26 qubits");
      dense_ = target.to_dense();
      for (auto& z : dense_) z /= nrm;
    } else {
      check_adjacent(c);
      mps_ = target;
      mps_.normalize();
    }
  }

  Backend backend() const { return backend_; }

  CostGradient run(const Circuit& c, bool want_grad) const {
    return backend_ == Backend::Dense ? dense_eval(c, dense_, want_grad)
                                      : mps_eval(c, mps_, o_.svd_threshold, want_grad);
  }

 private:
  CostOptions o_;
  Backend backend_ = Backend::Dense;
  ComplexVector dense_;
  tn::Mps mps_;
};

void set_angles(Circuit& c, const ParamVector& p) {
  for (std::size_t i = 0; i < p.size(); ++i) c.gates[p.binding[i].gate].angles[p.binding[i].slot] = p.values[i];
}

void set_angles(Circuit& c, const std::vector<ParamSlot>& b, const Eigen::VectorXd& x) {
  for (std::size_t i = 0; i < b.size(); ++i) c.gates[b[i].gate].angles[b[i].slot] = x[static_cast<Eigen::Index>(i)];
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

// ---- parameters -----------------------------------------------------------------

void ParamVector::check(const Circuit& c) const {
  if (values.size() != binding.size()) throw ShapeError("parameter values and binding differ in length");
  std::size_t i = 0;
  for (std::size_t k = 0; k < c.gates.size(); ++k) {
    for (std::size_t s = 0; s < c.gates[k].num_params(); ++s, ++i) {
      if (i >= binding.size() || binding[i].gate != k || binding[i].slot != s) {
        throw ShapeError("parameter binding does not match the circuit");
      }
    }
  }
  if (i != binding.size()) throw ShapeError("parameter binding does not match the circuit");
  for (double v : values) {
    if (!std::isfinite(v)) throw ShapeError("non-finite parameter value");
  }
}

ParamVector bind(const Circuit& c) {
  ParamVector p;
  for (std::size_t k = 0; k < c.gates.size(); ++k) {
    for (std::size_t s = 0; s < c.gates[k].num_params(); ++s) {
      p.values.push_back(c.gates[k].angles[s]);
      p.binding.push_back({k, s});
    }
  }
  return p;
}

Circuit with_params(const Circuit& c, const ParamVector& p) {
  p.check(c);
  Circuit out = c;
  set_angles(out, p);
  return out;
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::Auto: return "auto";
    case Backend::Mps: return "mps";
    case Backend::Dense: return "dense";
  }
  return "auto";
}

Backend parse_backend(const std::string& s) {
  if (s == "auto") return Backend::Auto;
  if (s == "mps") return Backend::Mps;
  if (s == "dense") return Backend::Dense;
  throw InvalidParameter("unknown backend '" + s + "'");
}

// ---- cost and gradient ------------------------------------------------------------

CostGradient cost_and_gradient(const ParamVector& p, const Circuit& c, const tn::Mps& target,
                               const CostOptions& o) {
  const Circuit bound = with_params(c, p);
  bound.validate(1e-9);
  return Evaluator(bound, target, o).run(bound, true);
}

double cost(const ParamVector& p, const Circuit& c, const tn::Mps& target, const CostOptions& o) {
  const Circuit bound = with_params(c, p);
  bound.validate(1e-9);
  return Evaluator(bound, target, o).run(bound, false).cost;
}

std::vector<double> gradient(const ParamVector& p, const Circuit& c, const tn::Mps& target,
                             const CostOptions& o) {
  return cost_and_gradient(p, c, target, o).gradient;
}

// ---- optimizer ------------------------------------------------------------------------

OptimizeResult optimize(const Circuit& c, const tn::Mps& target, const OptimizeOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  c.validate(1e-9);
  const Evaluator eval(c, target, o.cost);
  const ParamVector start = bind(c);
  const auto np = static_cast<Eigen::Index>(start.size());

  Circuit work = c;
  std::size_t evaluations = 0;
  const opt::Objective f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    set_angles(work, start.binding, x);
    const CostGradient r = eval.run(work, true);
    ++evaluations;
    for (Eigen::Index i = 0; i < np; ++i) g[i] = r.gradient[static_cast<std::size_t>(i)];
    return r.cost;
  };

  opt::LbfgsOptions lo = o.lbfgs;
  lo.max_iters = o.max_iters;
  lo.gradient_tol = o.tol;
  Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(start.values.data(), np);

  OptimizeResult out;
  out.report.backend = backend_name(eval.backend());
  out.report.parameter_count = start.size();
  std::optional<opt::LbfgsResult> best;
  std::size_t iterations = 0;
  Rng rng(o.seed);
  for (std::size_t run = 0; run <= o.restarts; ++run) {
    Eigen::VectorXd x = x0;
    if (run > 0) {
      for (Eigen::Index i = 0; i < np; ++i) x[i] += o.restart_scale * rng.normal();
    }
    opt::LbfgsResult r = opt::lbfgs(f, x, lo);
    iterations += r.iterations;
    if (run == 0) out.report.initial_cost = r.initial_f;
    if (!best || r.f < best->f) best = std::move(r);
  }

  out.params = start;
  for (Eigen::Index i = 0; i < np; ++i) out.params.values[static_cast<std::size_t>(i)] = best->x[i];
  out.circuit = with_params(c, out.params);
  if (c.provenance == circuit::Provenance::Mpd) out.circuit.provenance = circuit::Provenance::MpdTno;

  auto& rep = out.report;
  rep.final_cost = best->f;
  rep.iterations = iterations;
  rep.evaluations = evaluations;
  rep.gradient_evaluations = evaluations;
  rep.converged = best->converged();
  rep.status = opt::status_name(best->status);
  for (const auto& t : best->trace) rep.cost_trace.push_back({t.iteration, t.f, t.gradient_norm, t.elapsed_ms});
  rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

std::string OptimizationReport::to_json(bool include_timing) const {
  nlohmann::ordered_json j;
  j["initial_cost"] = initial_cost;
  j["final_cost"] = final_cost;
  j["initial_fidelity"] = 1.0 - initial_cost;
  j["final_fidelity"] = 1.0 - final_cost;
  j["iterations"] = iterations;
  j["evaluations"] = evaluations;
  j["gradient_evaluations"] = gradient_evaluations;
  j["converged"] = converged;
  j["status"] = status;
  j["backend"] = backend;
  j["parameter_count"] = parameter_count;
  auto trace = nlohmann::ordered_json::array();
  for (const auto& t : cost_trace) {
    nlohmann::ordered_json e;
    e["iteration"] = t.iteration;
    e["cost"] = t.cost;
    e["gradient_norm"] = t.gradient_norm;
    if (include_timing) e["wall_time_ms"] = t.wall_time_ms;
    trace.push_back(std::move(e));
  }
  j["cost_trace"] = std::move(trace);
  if (include_timing) j["wall_time"] = wall_time;
  return j.dump(1);
}

std::string OptimizationReport::trace_csv(bool include_timing) const {
  std::ostringstream out;
  out << "iteration,cost,gradient_norm,wall_time_ms\n";
  for (const auto& t : cost_trace) {
    out << t.iteration << ',' << fmt17(t.cost) << ',' << fmt17(t.gradient_norm) << ','
        << (include_timing ? fmt17(t.wall_time_ms) : std::string("0")) << '\n';
  }
  return out.str();
}

}  // namespace mpsenc::tno
