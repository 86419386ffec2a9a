#include <cmath>
#include <numbers>

#include "doctest.h"
#include "mpsenc/circuit.hpp"
#include "mpsenc/kernels/statevector.hpp"
#include "mpsenc/lbfgs.hpp"
#include "mpsenc/mpd.hpp"
#include "mpsenc/targets.hpp"
#include "mpsenc/tno.hpp"
#include "test_util.hpp"

using namespace mpsenc;
using namespace mpsenc::tno;
using circuit::Circuit;
using circuit::Gate;

namespace {

const Backend kBackends[] = {Backend::Dense, Backend::Mps};

CostOptions with_backend(Backend b) {
  CostOptions o;
  o.backend = b;
  return o;
}

// MPD skeleton from one random target, angles scrambled, scored against another.
struct Instance {
  Circuit circuit;
  tn::Mps target;
};

Instance random_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n = 2 + rng.below(7);          // 2..8
  const std::size_t layers = 1 + rng.below(3);     // 1..3
  const auto skeleton = targets::random_mps(n, 4, 1000 + seed, true);
  Instance in;
  in.circuit = circuit::layers_to_circuit(mpd::mpd_extract(skeleton, layers, 8, 1e-12));
  for (auto& g : in.circuit.gates) {
    for (std::size_t s = 0; s < g.num_params(); ++s) g.angles[s] += 0.3 * rng.normal();
  }
  // A few plain rotations so every parametrized kind is covered.
  in.circuit.gates.push_back(Gate::rx(rng.below(n), rng.uniform(-3, 3)));
  in.circuit.gates.push_back(Gate::ry(rng.below(n), rng.uniform(-3, 3)));
  in.circuit.gates.push_back(Gate::rz(rng.below(n), rng.uniform(-3, 3)));
  in.target = targets::random_mps(n, 1 + rng.below(5), 2000 + seed, true);
  return in;
}

std::vector<double> central_differences(const ParamVector& p, const Circuit& c,
                                        const tn::Mps& target, double h) {
  std::vector<double> g(p.size());
  const CostOptions dense = with_backend(Backend::Dense);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ParamVector a = p, b = p;
    a.values[i] += h;
    b.values[i] -= h;
    g[i] = (cost(a, c, target, dense) - cost(b, c, target, dense)) / (2 * h);
  }
  return g;
}

double dense_cost_oracle(const Circuit& c, const tn::Mps& target) {
  const ComplexVector psi = circuit::simulate_dense(c);
  ComplexVector t = target.to_dense();
  return 1.0 - testutil::overlap_sq(t, psi);
}

tn::Mps sine_target(std::size_t n) {
  targets::TargetSpec s;
  s.function.family = targets::Family::Sine;
  s.n_qubits = n;
  return targets::target_mps(s, 0);
}

}  // namespace

TEST_CASE("parameter binding follows circuit order") {
  Circuit c;
  c.n = 2;
  c.gates = {Gate::u3(0, 0.1, 0.2, 0.3), Gate::cnot(0, 1), Gate::ry(1, 0.4), Gate::rz(0, 0.5)};
  const ParamVector p = bind(c);
  REQUIRE(p.size() == 5);
  CHECK(p.values == std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5});
  CHECK(p.binding[3].gate == 2);
  CHECK(p.binding[3].slot == 0);
  CHECK(p.binding[4].gate == 3);

  ParamVector q = p;
  q.values[3] = -1.0;
  const Circuit d = with_params(c, q);
  CHECK(d.gates[2].angles[0] == -1.0);
  CHECK(bind(d).values[3] == -1.0);

  ParamVector short_p = p;
  short_p.values.pop_back();
  CHECK_THROWS_AS(with_params(c, short_p), ShapeError);
  ParamVector moved = p;
  moved.binding[0].slot = 1;
  CHECK_THROWS_AS(moved.check(c), ShapeError);
  ParamVector nan = p;
  nan.values[0] = std::nan("");
  CHECK_THROWS_AS(nan.check(c), ShapeError);
  const tn::Mps t = tn::Mps::zero_state(2);
  CHECK_THROWS_AS(cost(short_p, c, t), ShapeError);
}

TEST_CASE("single RY against |0>: cost and derivative in closed form") {
  const tn::Mps target = tn::Mps::zero_state(1);
  for (Backend b : kBackends) {
    for (double theta : {-2.5, -0.7, 0.0, 0.3, 1.2, 3.0}) {
      Circuit c;
      c.n = 1;
      c.gates = {Gate::ry(0, theta)};
      const auto r = cost_and_gradient(bind(c), c, target, with_backend(b));
      CHECK(r.cost == doctest::Approx(std::pow(std::sin(theta / 2), 2)).epsilon(1e-13));
      REQUIRE(r.gradient.size() == 1);
      CHECK(r.gradient[0] == doctest::Approx(std::sin(theta) / 2).epsilon(1e-12));
    }
  }
}

TEST_CASE("empty circuit against |0...0> has zero cost") {
  Circuit c;
  c.n = 5;
  for (Backend b : kBackends) {
    CHECK(std::abs(cost(bind(c), c, tn::Mps::zero_state(5), with_backend(b))) < 1e-15);
    CHECK(gradient(bind(c), c, tn::Mps::zero_state(5), with_backend(b)).empty());
  }
}

TEST_CASE("analytic gradient matches central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Instance in = random_instance(seed);
    const ParamVector p = bind(in.circuit);
    const auto fd = central_differences(p, in.circuit, in.target, 1e-5);
    for (Backend b : kBackends) {
      const auto g = gradient(p, in.circuit, in.target, with_backend(b));
      REQUIRE(g.size() == fd.size());
      for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, std::abs(g[i] - fd[i]));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("dense and MPS backends agree on cost and gradient") {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const Instance in = random_instance(seed);
    const ParamVector p = bind(in.circuit);
    const auto d = cost_and_gradient(p, in.circuit, in.target, with_backend(Backend::Dense));
    const auto m = cost_and_gradient(p, in.circuit, in.target, with_backend(Backend::Mps));
    CHECK(std::abs(d.cost - m.cost) < 1e-10);
    for (std::size_t i = 0; i < d.gradient.size(); ++i) {
      CHECK(std::abs(d.gradient[i] - m.gradient[i]) < 1e-10);
    }
  }
}

TEST_CASE("contracted cost equals the dense overlap") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 77);
    const std::size_t n = 2 + rng.below(9);  // 2..10
    const auto skeleton = targets::random_mps(n, 3, seed, false);
    Circuit c = circuit::layers_to_circuit(mpd::mpd_extract(skeleton, 2, 8, 1e-12));
    for (auto& g : c.gates)
      for (std::size_t s = 0; s < g.num_params(); ++s) g.angles[s] += 0.2 * rng.normal();
    const auto target = targets::random_mps(n, 5, seed + 500, true);
    const double want = dense_cost_oracle(c, target);
    CHECK(std::abs(cost(bind(c), c, target, with_backend(Backend::Mps)) - want) < 1e-9);
    CHECK(std::abs(cost(bind(c), c, target, with_backend(Backend::Dense)) - want) < 1e-9);
  }
}

TEST_CASE("an exact preparation is a stationary point") {
  const auto target = sine_target(8);
  const Circuit c = circuit::layers_to_circuit(mpd::mpd_extract(target, 1, 2, 1e-12));
  for (Backend b : kBackends) {
    const auto r = cost_and_gradient(bind(c), c, target, with_backend(b));
    CHECK(std::abs(r.cost) < 1e-10);
    double gn = 0.0;
    for (double x : r.gradient) gn += x * x;
    CHECK(std::sqrt(gn) <= 1e-7);
  }
  OptimizeOptions o;
  o.tol = 1e-7;
  const auto res = optimize(c, target, o);
  CHECK(res.report.iterations <= 1);
  CHECK(res.report.final_cost <= res.report.initial_cost + 1e-12);
  CHECK(std::abs(res.report.final_cost) < 1e-10);
  CHECK(res.circuit.provenance == circuit::Provenance::MpdTno);
}

TEST_CASE("optimization improves an MPD start and keeps accepted steps monotone") {
  const auto target = targets::random_mps(8, 5, 3, false);
  const auto stack = mpd::mpd_extract(target, 2, 32, 1e-12);
  const Circuit c = circuit::layers_to_circuit(stack);
  OptimizeOptions o;
  o.max_iters = 60;
  const auto res = optimize(c, target, o);
  const auto& rep = res.report;
  CHECK(rep.initial_cost == doctest::Approx(1.0 - stack.per_layer_fidelity.back()).epsilon(1e-9));
  CHECK(rep.final_cost < rep.initial_cost - 1e-3);
  CHECK(rep.iterations <= 60);
  CHECK(rep.evaluations >= rep.iterations + 1);
  CHECK(rep.gradient_evaluations == rep.evaluations);
  CHECK(rep.parameter_count == bind(c).size());
  REQUIRE(rep.cost_trace.size() == rep.iterations + 1);
  CHECK(rep.cost_trace.front().cost == rep.initial_cost);
  CHECK(rep.cost_trace.back().cost == rep.final_cost);
  for (std::size_t i = 1; i < rep.cost_trace.size(); ++i) {
    CHECK(rep.cost_trace[i].cost <= rep.cost_trace[i - 1].cost);
  }
  // The returned circuit realizes the reported cost.
  CHECK(std::abs(dense_cost_oracle(res.circuit, target) - rep.final_cost) < 1e-9);
  CHECK(std::abs(cost(res.params, c, target) - rep.final_cost) < 1e-12);
  // Same skeleton: only angles moved.
  REQUIRE(res.circuit.gates.size() == c.gates.size());
  for (std::size_t k = 0; k < c.gates.size(); ++k) {
    CHECK(res.circuit.gates[k].kind == c.gates[k].kind);
    CHECK(res.circuit.gates[k].wires == c.gates[k].wires);
  }
}

TEST_CASE("optimization is deterministic and restarts never make it worse") {
  const auto target = targets::random_mps(6, 4, 11, true);
  const Circuit c = circuit::layers_to_circuit(mpd::mpd_extract(target, 1, 32, 1e-12));
  OptimizeOptions o;
  o.max_iters = 25;
  const auto a = optimize(c, target, o);
  const auto b = optimize(c, target, o);
  CHECK(a.report.to_json(false) == b.report.to_json(false));
  CHECK(a.report.trace_csv(false) == b.report.trace_csv(false));
  CHECK(a.params.values == b.params.values);

  o.restarts = 2;
  o.seed = 5;
  const auto r = optimize(c, target, o);
  CHECK(r.report.final_cost <= a.report.final_cost + 1e-15);
  CHECK(r.report.initial_cost == a.report.initial_cost);
}

TEST_CASE("report exports") {
  const auto target = targets::random_mps(4, 3, 2, false);
  const Circuit c = circuit::layers_to_circuit(mpd::mpd_extract(target, 1, 32, 1e-12));
  OptimizeOptions o;
  o.max_iters = 5;
  const auto res = optimize(c, target, o);
  const std::string csv = res.report.trace_csv();
  CHECK(csv.rfind("iteration,cost,gradient_norm,wall_time_ms\n", 0) == 0);
  std::size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == res.report.cost_trace.size() + 1);
  const std::string j = res.report.to_json();
  for (const char* key : {"\"initial_cost\"", "\"final_cost\"", "\"iterations\"", "\"evaluations\"",
                          "\"gradient_evaluations\"", "\"cost_trace\"", "\"converged\"", "\"wall_time\""}) {
    CHECK(j.find(key) != std::string::npos);
  }
  CHECK(res.report.to_json(false).find("wall_time") == std::string::npos);
}

TEST_CASE("input errors") {
  const tn::Mps t3 = tn::Mps::zero_state(3);
  Circuit c;
  c.n = 3;
  c.gates = {Gate::ry(0, 0.1), Gate::cnot(0, 2)};
  CHECK_NOTHROW(cost(bind(c), c, t3, with_backend(Backend::Dense)));
  CHECK_THROWS_AS(cost(bind(c), c, t3, with_backend(Backend::Mps)), InvalidParameter);
  CHECK_THROWS_AS(cost(bind(c), c, tn::Mps::zero_state(4)), ShapeError);

  Circuit big;
  big.n = 3;
  big.gates = {Gate::opaque(RowMat::Identity(8, 8), {0, 1, 2}, 10)};
  CHECK_THROWS_AS(cost(bind(big), big, t3), InvalidParameter);
  CHECK_THROWS_AS(parse_backend("gpu"), InvalidParameter);
  CHECK(parse_backend(backend_name(Backend::Mps)) == Backend::Mps);
}

TEST_CASE("auto backend switches on register size") {
  const auto target = targets::random_mps(6, 2, 1, false);
  const Circuit c = circuit::layers_to_circuit(mpd::mpd_extract(target, 1, 32, 1e-12));
  OptimizeOptions o;
  o.max_iters = 1;
  CHECK(optimize(c, target, o).report.backend == "dense");
  o.cost.dense_max_qubits = 4;
  CHECK(optimize(c, target, o).report.backend == "mps");
}

TEST_CASE("L-BFGS minimizes the Rosenbrock function") {
  for (int dim : {2, 10}) {
    const opt::Objective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      double f = 0.0;
      g.setZero();
      for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double a = x[i + 1] - x[i] * x[i], b = 1 - x[i];
        f += 100 * a * a + b * b;
        g[i] += -400 * a * x[i] - 2 * b;
        g[i + 1] += 200 * a;
      }
      return f;
    };
    // The classic start in 2-D; the origin in 10-D, where (-1.2, 1, ...) sits near a local minimum.
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(dim);
    if (dim == 2) x0 << -1.2, 1.0;
    opt::LbfgsOptions o;
    o.max_iters = 1000;
    o.gradient_tol = 1e-10;
    const auto r = opt::lbfgs(rosen, x0, o);
    CHECK(r.converged());
    CHECK((r.x - Eigen::VectorXd::Ones(dim)).norm() < 1e-6);
    for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i].f <= r.trace[i - 1].f);
  }
}

TEST_CASE("L-BFGS solves a convex quadratic quickly") {
  Rng rng(9);
  const int d = 20;
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  const Eigen::MatrixXd h = a.transpose() * a + Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b(d);
  for (int i = 0; i < d; ++i) b[i] = rng.normal();
  const opt::Objective q = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = h * x - b;
    return 0.5 * x.dot(h * x) - b.dot(x);
  };
  opt::LbfgsOptions o;
  o.gradient_tol = 1e-9;
  o.memory = 30;
  const auto r = opt::lbfgs(q, Eigen::VectorXd::Zero(d), o);
  CHECK(r.converged());
  CHECK((r.x - h.ldlt().solve(b)).norm() < 1e-6);
  CHECK(r.iterations < 100);
}

TEST_CASE("L-BFGS edge cases") {
  const opt::Objective flat = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g.setZero();
    return 1.0;
  };
  const auto r = opt::lbfgs(flat, Eigen::VectorXd::Ones(3));
  CHECK(r.iterations == 0);
  CHECK(r.status == opt::LbfgsStatus::GradientTolerance);

  // Gradient that disagrees with the function: no descent step exists.
  const opt::Objective liar = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Ones(x.size());
    return x.sum() * x.sum();
  };
  const auto l = opt::lbfgs(liar, Eigen::VectorXd::Zero(2));
  CHECK(l.status == opt::LbfgsStatus::LineSearchFailure);
  CHECK(l.f == 0.0);
  CHECK(!l.converged());

  opt::LbfgsOptions bad;
  bad.c2 = 1e-5;
  CHECK_THROWS_AS(opt::lbfgs(flat, Eigen::VectorXd::Ones(1), bad), InvalidParameter);
}
