#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mpsenc/common.hpp"
#include "mpsenc/mpd.hpp"
#include "mpsenc/mps.hpp"

namespace mpsenc::circuit {

enum class GateKind { RX, RY, RZ, U3, CNOT, Opaque2Q, OpaqueKQ };

std::string gate_name(GateKind k);

struct Gate {
  GateKind kind = GateKind::U3;
  std::vector<std::size_t> wires;    // CNOT: {control, target}; opaque: index bits in wire order
  std::array<double, 3> angles{};    // RX/RY/RZ use angles[0]; U3 is (theta, phi, lambda)
  RowMat matrix;                     // opaque gates only
  std::size_t modeled_cost = 0;      // OpaqueKQ: modeled elementary gate count

  static Gate rx(std::size_t q, double theta);
  static Gate ry(std::size_t q, double theta);
  static Gate rz(std::size_t q, double theta);
  static Gate u3(std::size_t q, double theta, double phi, double lambda);
  static Gate cnot(std::size_t control, std::size_t target);
  static Gate opaque(const RowMat& u, std::vector<std::size_t> wires, std::size_t modeled_cost = 0);

  bool is_single_qubit() const;
  bool is_elementary() const { return kind != GateKind::Opaque2Q && kind != GateKind::OpaqueKQ; }
  std::size_t num_params() const;
  /// 2x2 matrix of a single-qubit gate.
  Mat2 matrix_1q() const;
  /// Full matrix over `wires` (first wire = most significant bit).
  RowMat unitary() const;
};

enum class Provenance { Mpd, MpdTno, ExactSequential, Other };
std::string provenance_name(Provenance p);
Provenance parse_provenance(const std::string& s);

struct Circuit {
  std::size_t n = 0;
  std::vector<Gate> gates;
  Provenance provenance = Provenance::Other;
  double global_phase = 0.0;  // recorded for debugging; ignored by simulation

  void validate(double tol = 1e-10) const;
};

struct CircuitMetrics {
  std::size_t cnot_count = 0;
  std::size_t single_qubit_count = 0;
  /// Elementary gates plus the modeled cost of opaque blocks.
  std::size_t total_gates = 0;
  /// Longest wire-dependency chain; an opaque block adds its modeled cost.
  std::size_t depth = 0;
  std::size_t parameter_count = 0;
  std::size_t opaque_count = 0;
  std::size_t modeled_gates = 0;
  bool modeled() const { return opaque_count > 0; }
};

CircuitMetrics metrics(const Circuit& c);

// ---- two-qubit decomposition ---------------------------------------------

/// Canonical (Weyl chamber) coordinates: u = phase * L * exp(i(a XX + b YY + c ZZ)) * R
/// with L, R local and pi/4 >= |a| >= |b| >= |c|.
struct WeylCoordinates {
  double a = 0.0, b = 0.0, c = 0.0;
};
WeylCoordinates weyl_coordinates(const Mat4& u);

/// Minimal CNOT count in {0, 1, 2, 3}.
int cnot_class(const Mat4& u, double tol = 5e-9);

/// Gates on wires {q0, q1} reproducing `u` up to global phase. Index convention:
/// 2 * bit(q0) + bit(q1). Single-qubit factors are emitted as U3 and fused.
/// Throws ValidationError when u is not unitary to 1e-9.
std::vector<Gate> kak_decompose(const Mat4& u, std::size_t q0 = 0, std::size_t q1 = 1,
                                double* global_phase = nullptr);

/// U3 angles (theta, phi, lambda), each in (-pi, pi], with m = e^{i alpha} U3.
std::array<double, 3> u3_angles(const Mat2& m, double* alpha = nullptr);
Mat2 u3_matrix(double theta, double phi, double lambda);

/// Merges runs of single-qubit gates on the same wire into one U3 and drops
/// gates equal to the identity up to phase.
Circuit fuse_single_qubit(const Circuit& c, double identity_tol = 1e-12);

// ---- conversions -----------------------------------------------------------

Circuit layers_to_circuit(const mpd::LayerStack& stack);

enum class CostModel {
  Power4,   // ceil(4^q)
  Shannon,  // D(q) = 4 D(q-1) + 3 * 2^q, D(2) = 7, D(1) = 1
};
std::size_t modeled_cost(std::size_t qubits, CostModel model);
std::string cost_model_name(CostModel m);
CostModel parse_cost_model(const std::string& s);

/// 1-qubit blocks become U3, 2-qubit blocks are decomposed exactly, wider
/// blocks are kept as OpaqueKQ with a modeled cost.
Circuit exact_to_circuit(const mpd::ExactSequentialProgram& program, CostModel model = CostModel::Power4);

// ---- simulation -----------------------------------------------------------

struct SimulateOptions {
  std::size_t chi_max = 0;  // 0 = unlimited
  double svd_threshold = kDefaultSvdThreshold;
  /// Route non-adjacent two-qubit gates with SWAPs instead of rejecting them.
  bool route_swaps = false;
};

tn::Mps simulate(const Circuit& c, const SimulateOptions& options = {});
ComplexVector simulate_dense(const Circuit& c);

// ---- serialization ----------------------------------------------------------

/// OpenQASM 2.0 with u3/cx only. Throws FormatError for opaque gates.
std::string to_qasm(const Circuit& c);
Circuit from_qasm(const std::string& text);
std::string to_json(const Circuit& c);
Circuit circuit_from_json(const std::string& text);

}  // namespace mpsenc::circuit
