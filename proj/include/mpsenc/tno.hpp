#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mpsenc/circuit.hpp"
#include "mpsenc/lbfgs.hpp"
#include "mpsenc/mps.hpp"

// Angle optimization of a fixed CNOT skeleton against a target MPS.
// Cost L(theta) = 1 - |<target|circuit(theta)|0...0>|^2.

namespace mpsenc::tno {

struct ParamSlot {
  std::size_t gate = 0;
  std::size_t slot = 0;  // index into Gate::angles
};

struct ParamVector {
  std::vector<double> values;
  std::vector<ParamSlot> binding;

  std::size_t size() const { return values.size(); }
  /// Throws ShapeError unless the binding addresses parametrized gates of `c`
  /// one-to-one, in circuit order, and every value is finite.
  void check(const circuit::Circuit& c) const;
};

/// Parameters of every rotation gate in circuit order (U3 contributes theta,
/// phi, lambda), initialized from the circuit's current angles.
ParamVector bind(const circuit::Circuit& c);
/// Copy of `c` with the angles replaced by `p`.
circuit::Circuit with_params(const circuit::Circuit& c, const ParamVector& p);

enum class Backend {
  Auto,   // Dense when n <= dense_max_qubits, otherwise Mps
  Mps,    // contraction with cached environments
  Dense,  // statevector reverse sweep
};
std::string backend_name(Backend b);
Backend parse_backend(const std::string& s);

struct CostOptions {
  Backend backend = Backend::Auto;
  std::size_t dense_max_qubits = 16;
  /// Relative singular-value cut for the MPS backend's internal states.
  double svd_threshold = 1e-14;
};

struct CostGradient {
  double cost = 0.0;
  std::vector<double> gradient;
  Complex overlap{};  // <target|circuit>
};

/// Requires an elementary circuit; the Mps backend also requires every
/// two-qubit gate on neighbouring wires. The target is normalized internally.
double cost(const ParamVector& p, const circuit::Circuit& c, const tn::Mps& target,
            const CostOptions& o = {});
std::vector<double> gradient(const ParamVector& p, const circuit::Circuit& c,
                             const tn::Mps& target, const CostOptions& o = {});
/// One forward pass and one reverse sweep.
CostGradient cost_and_gradient(const ParamVector& p, const circuit::Circuit& c,
                               const tn::Mps& target, const CostOptions& o = {});

struct OptimizeOptions {
  std::size_t max_iters = 500;
  double tol = 1e-8;  // gradient norm
  opt::LbfgsOptions lbfgs{};  // max_iters and gradient_tol are taken from above
  CostOptions cost{};
  /// Extra starts from perturbed initial angles; the best result is kept.
  std::size_t restarts = 0;
  double restart_scale = 0.05;
  std::uint64_t seed = 0;
};

struct TracePoint {
  std::size_t iteration = 0;
  double cost = 0.0;
  double gradient_norm = 0.0;
  double wall_time_ms = 0.0;
};

struct OptimizationReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  std::size_t gradient_evaluations = 0;
  std::vector<TracePoint> cost_trace;
  bool converged = false;
  std::string status;
  std::string backend;
  std::size_t parameter_count = 0;
  double wall_time = 0.0;  // seconds

  /// JSON object; wall-clock fields are omitted when include_timing is false.
  std::string to_json(bool include_timing = true) const;
  /// iteration,cost,gradient_norm,wall_time_ms
  std::string trace_csv(bool include_timing = true) const;
};

struct OptimizeResult {
  ParamVector params;
  circuit::Circuit circuit;  // provenance MpdTno when the input came from Mpd
  OptimizationReport report;
};

OptimizeResult optimize(const circuit::Circuit& c, const tn::Mps& target,
                        const OptimizeOptions& o = {});

}  // namespace mpsenc::tno
