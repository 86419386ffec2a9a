#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "mpsenc/circuit.hpp"
#include "mpsenc/kernels/statevector.hpp"

namespace mpsenc::circuit {

namespace {

using std::numbers::pi;
constexpr Complex kI{0.0, 1.0};

Mat4 swap_matrix() {
  Mat4 s = Mat4::Zero();
  s(0, 0) = s(1, 2) = s(2, 1) = s(3, 3) = 1;
  return s;
}

bool identity_up_to_phase(const Mat2& m, double tol) {
  if (std::abs(m(0, 0)) < 0.5) return false;
  const Complex ph = m(0, 0) / std::abs(m(0, 0));
  return (m - ph * Mat2::Identity()).cwiseAbs().maxCoeff() < tol;
}

}  // namespace

std::string gate_name(GateKind k) {
  switch (k) {
    case GateKind::RX: return "rx";
    case GateKind::RY: return "ry";
    case GateKind::RZ: return "rz";
    case GateKind::U3: return "u3";
    case GateKind::CNOT: return "cx";
    case GateKind::Opaque2Q: return "opaque2q";
    case GateKind::OpaqueKQ: return "opaquekq";
  }
  return "?";
}

Gate Gate::rx(std::size_t q, double theta) { return Gate{GateKind::RX, {q}, {theta, 0, 0}, {}, 0}; }
Gate Gate::ry(std::size_t q, double theta) { return Gate{GateKind::RY, {q}, {theta, 0, 0}, {}, 0}; }
Gate Gate::rz(std::size_t q, double theta) { return Gate{GateKind::RZ, {q}, {theta, 0, 0}, {}, 0}; }
Gate Gate::u3(std::size_t q, double theta, double phi, double lambda) {
  return Gate{GateKind::U3, {q}, {theta, phi, lambda}, {}, 0};
}
Gate Gate::cnot(std::size_t control, std::size_t target) {
  return Gate{GateKind::CNOT, {control, target}, {}, {}, 0};
}
Gate Gate::opaque(const RowMat& u, std::vector<std::size_t> wires, std::size_t cost) {
  const GateKind k = wires.size() == 2 ? GateKind::Opaque2Q : GateKind::OpaqueKQ;
  return Gate{k, std::move(wires), {}, u, cost};
}

bool Gate::is_single_qubit() const {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ || kind == GateKind::U3;
}

std::size_t Gate::num_params() const {
  switch (kind) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::RZ: return 1;
    case GateKind::U3: return 3;
    default: return 0;
  }
}

Mat2 Gate::matrix_1q() const {
  const double t = angles[0];
  const double c = std::cos(t / 2), s = std::sin(t / 2);
  Mat2 m;
  switch (kind) {
    case GateKind::RX: m << c, -kI * s, -kI * s, c; return m;
    case GateKind::RY: m << c, -s, s, c; return m;
    case GateKind::RZ: m << std::polar(1.0, -t / 2), 0, 0, std::polar(1.0, t / 2); return m;
    case GateKind::U3: return u3_matrix(angles[0], angles[1], angles[2]);
    default: throw InvalidParameter("matrix_1q on a multi-qubit gate");
  }
}

RowMat Gate::unitary() const {
  if (is_single_qubit()) return matrix_1q();
  if (kind == GateKind::CNOT) {
    RowMat c = RowMat::Zero(4, 4);
    c(0, 0) = c(1, 1) = c(2, 3) = c(3, 2) = 1;
    return c;
  }
  return matrix;
}

std::string provenance_name(Provenance p) {
  switch (p) {
    case Provenance::Mpd: return "mpd";
    case Provenance::MpdTno: return "mpd-tno";
    case Provenance::ExactSequential: return "exact";
    case Provenance::Other: return "other";
  }
  return "other";
}

Provenance parse_provenance(const std::string& s) {
  if (s == "mpd") return Provenance::Mpd;
  if (s == "mpd-tno") return Provenance::MpdTno;
  if (s == "exact") return Provenance::ExactSequential;
  if (s == "other") return Provenance::Other;
  throw InvalidParameter("unknown provenance '" + s + "'");
}

void Circuit::validate(double tol) const {
  for (std::size_t i = 0; i < gates.size(); ++i) {
    const Gate& g = gates[i];
    const std::string where = "gate " + std::to_string(i) + ": ";
    std::size_t want = 0;
    switch (g.kind) {
      case GateKind::RX:
      case GateKind::RY:
      case GateKind::RZ:
      case GateKind::U3: want = 1; break;
      case GateKind::CNOT:
      case GateKind::Opaque2Q: want = 2; break;
      case GateKind::OpaqueKQ: want = g.wires.size() >= 3 ? g.wires.size() : 3; break;
    }
    if (g.wires.size() != want) throw ValidationError(where + "wrong number of wires");
    for (std::size_t a = 0; a < g.wires.size(); ++a) {
      if (g.wires[a] >= n) throw ValidationError(where + "wire out of range");
      for (std::size_t b = 0; b < a; ++b)
        if (g.wires[a] == g.wires[b]) throw ValidationError(where + "repeated wire");
    }
    for (double t : g.angles)
      if (!std::isfinite(t)) throw ValidationError(where + "non-finite angle");
    if (!g.is_elementary()) {
      const auto dim = Eigen::Index{1} << g.wires.size();
      if (g.matrix.rows() != dim || g.matrix.cols() != dim) throw ValidationError(where + "matrix shape");
      if (unitarity_defect(g.matrix) > tol) throw ValidationError(where + "opaque block is not unitary");
    }
  }
}

CircuitMetrics metrics(const Circuit& c) {
  CircuitMetrics m;
  std::vector<std::size_t> level(c.n, 0);
  for (const Gate& g : c.gates) {
    std::size_t cost = 1;
    if (g.kind == GateKind::CNOT) {
      ++m.cnot_count;
    } else if (g.is_single_qubit()) {
      ++m.single_qubit_count;
    } else {
      ++m.opaque_count;
      cost = std::max<std::size_t>(g.modeled_cost, 1);
      m.modeled_gates += cost;
    }
    m.total_gates += cost;
    m.parameter_count += g.num_params();
    std::size_t start = 0;
    for (auto w : g.wires) start = std::max(start, level[w]);
    for (auto w : g.wires) level[w] = start + cost;
  }
  for (auto l : level) m.depth = std::max(m.depth, l);
  return m;
}

Circuit fuse_single_qubit(const Circuit& c, double identity_tol) {
  Circuit out;
  out.n = c.n;
  out.provenance = c.provenance;
  out.global_phase = c.global_phase;
  std::vector<std::optional<Mat2>> pending(c.n);
  auto flush = [&](std::size_t w) {
    auto& p = pending[w];
    if (!p) return;
    if (identity_up_to_phase(*p, identity_tol)) {
      out.global_phase += std::arg((*p)(0, 0));
    } else {
      double alpha = 0.0;
      auto a = u3_angles(*p, &alpha);
      out.global_phase += alpha;
      out.gates.push_back(Gate::u3(w, a[0], a[1], a[2]));
    }
    p.reset();
  };
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      auto& p = pending[g.wires[0]];
      p = p ? Mat2(g.matrix_1q() * *p) : g.matrix_1q();
      continue;
    }
    for (auto w : g.wires) flush(w);
    out.gates.push_back(g);
  }
  for (std::size_t w = 0; w < c.n; ++w) flush(w);
  out.global_phase = std::remainder(out.global_phase, 2 * pi);
  return out;
}

Circuit layers_to_circuit(const mpd::LayerStack& stack) {
  Circuit c;
  c.n = stack.n;
  c.provenance = Provenance::Mpd;
  for (auto layer = stack.layers.rbegin(); layer != stack.layers.rend(); ++layer) {
    for (const auto& b : *layer) {
      double ph = 0.0;
      auto gs = kak_decompose(b.u, b.site, b.site + 1, &ph);
      c.global_phase += ph;
      c.gates.insert(c.gates.end(), gs.begin(), gs.end());
    }
  }
  return fuse_single_qubit(c);
}

std::size_t modeled_cost(std::size_t qubits, CostModel model) {
  if (qubits == 0) return 0;
  if (qubits > 30) throw CapacityError("modeled cost only defined up to 30 qubits");
  if (model == CostModel::Power4) return std::size_t{1} << (2 * qubits);
  if (qubits == 1) return 1;
  std::size_t d = 7;
  for (std::size_t q = 3; q <= qubits; ++q) d = 4 * d + 3 * (std::size_t{1} << q);
  return d;
}

std::string cost_model_name(CostModel m) { return m == CostModel::Power4 ? "power4" : "shannon"; }

CostModel parse_cost_model(const std::string& s) {
  if (s == "power4") return CostModel::Power4;
  if (s == "shannon") return CostModel::Shannon;
  throw InvalidParameter("unknown cost model '" + s + "' (power4 | shannon)");
}

Circuit exact_to_circuit(const mpd::ExactSequentialProgram& program, CostModel model) {
  Circuit c;
  c.n = program.n;
  c.provenance = Provenance::ExactSequential;
  for (const auto& b : program.blocks) {
    if (b.width == 1) {
      double alpha = 0.0;
      auto a = u3_angles(Mat2(b.u), &alpha);
      c.global_phase += alpha;
      c.gates.push_back(Gate::u3(b.first, a[0], a[1], a[2]));
    } else if (b.width == 2) {
      double ph = 0.0;
      auto gs = kak_decompose(Mat4(b.u), b.first, b.first + 1, &ph);
      c.global_phase += ph;
      c.gates.insert(c.gates.end(), gs.begin(), gs.end());
    } else {
      std::vector<std::size_t> wires(b.width);
      for (std::size_t i = 0; i < b.width; ++i) wires[i] = b.first + i;
      c.gates.push_back(Gate::opaque(b.u, std::move(wires), modeled_cost(b.width, model)));
    }
  }
  return fuse_single_qubit(c);
}

tn::Mps simulate(const Circuit& c, const SimulateOptions& o) {
  c.validate(1e-9);
  tn::Mps m = tn::Mps::zero_state(c.n);
  const Mat4 sw = swap_matrix();
  auto two = [&](const Mat4& u, std::size_t w0, std::size_t w1) {
    // u acts with w0 as the high bit.
    if (w1 == w0 + 1) {
      m.apply_two_qubit(u, w0, o.chi_max, o.svd_threshold);
    } else {
      m.apply_two_qubit(sw * u * sw, w1, o.chi_max, o.svd_threshold);
    }
  };
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      m.apply_single_qubit(g.matrix_1q(), g.wires[0]);
      continue;
    }
    if (g.kind == GateKind::OpaqueKQ) {
      throw InvalidParameter("opaque multi-qubit blocks can only be simulated densely");
    }
    const Mat4 u = g.unitary();
    const std::size_t w0 = g.wires[0], w1 = g.wires[1];
    const std::size_t lo = std::min(w0, w1), hi = std::max(w0, w1);
    if (hi == lo + 1) {
      two(u, w0, w1);
      continue;
    }
    if (!o.route_swaps) {
      throw InvalidParameter("non-adjacent two-qubit gate on wires " + std::to_string(w0) + ", " +
                             std::to_string(w1) + " (enable SWAP routing)");
    }
    // Carry the qubit at `lo` down to hi - 1, apply, and carry it back.
    for (std::size_t s = lo; s + 1 < hi; ++s) m.apply_two_qubit(sw, s, o.chi_max, o.svd_threshold);
    if (w0 == lo) {
      two(u, hi - 1, hi);
    } else {
      two(u, hi, hi - 1);
    }
    for (std::size_t s = hi - 1; s-- > lo;) m.apply_two_qubit(sw, s, o.chi_max, o.svd_threshold);
  }
  return m;
}

ComplexVector simulate_dense(const Circuit& c) {
  c.validate(1e-9);
  if (c.n > 26) throw CapacityError("dense simulation limited to 26 qubits");
  ComplexVector v = kernels::zero_state(c.n);
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      kernels::apply_1q(v, c.n, g.matrix_1q(), g.wires[0]);
    } else if (g.kind == GateKind::CNOT) {
      kernels::apply_cx(v, c.n, g.wires[0], g.wires[1]);
    } else if (g.wires.size() == 2) {
      kernels::apply_2q(v, c.n, Mat4(g.unitary()), g.wires[0], g.wires[1]);
    } else {
      kernels::apply_kq(v, c.n, g.matrix, g.wires);
    }
  }
  return v;
}

}  // namespace mpsenc::circuit
