#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mpsenc/common.hpp"
#include "mpsenc/mps.hpp"

namespace mpsenc::mpd {

/// A 4x4 unitary on (site, site + 1); row/column index is 2 q_site + q_{site+1}.
struct TwoQubitBlock {
  std::size_t site = 0;
  Mat4 u = Mat4::Identity();
};

/// One MPD layer in preparation time order: the first block acts on the
/// bottom pair (n-2, n-1), the last on (0, 1).
using Staircase = std::vector<TwoQubitBlock>;

struct StaircaseInfo {
  double truncation_fidelity = 1.0;  // |<psi|psi~>|^2 of the chi=2 truncation
  bool degenerate = false;           // some chi=2 bond collapsed to chi=1
};

/// Staircase that prepares the chi=2 truncation of `psi` from |0...0>.
/// Requires psi.size() >= 2.
Staircase chi2_disentangler(const tn::Mps& psi, StaircaseInfo* info = nullptr);

/// Staircase preparing `chi2` from |0...0>. Bonds must be at most 2 and the
/// state left-canonical with unit norm.
Staircase staircase_from_left_canonical(const tn::Mps& chi2);

struct LayerStack {
  std::size_t n = 0;
  /// layers[0] is U_1 (extracted first). Preparation applies layers[L-1] first.
  std::vector<Staircase> layers;
  std::size_t chi_max_used = 0;
  /// Entry k-1 is |<target| U_1^dag ... U_k^dag |0>|^2.
  std::vector<double> per_layer_fidelity;
  std::vector<std::string> diagnostics;

  std::size_t depth_layers() const { return layers.size(); }
  void validate(double tol = 1e-10) const;
};

struct MpdOptions {
  std::size_t layers = 1;
  std::size_t chi_max = 32;  // 0 = unlimited
  double svd_threshold = kDefaultSvdThreshold;
  /// Fidelities are tracked on a dense copy of the target up to this many
  /// qubits; above it they are estimated from the truncated MPS.
  std::size_t dense_fidelity_max_qubits = 20;
};

LayerStack mpd_extract(const tn::Mps& target, const MpdOptions& options);
LayerStack mpd_extract(const tn::Mps& target, std::size_t layers, std::size_t chi_max,
                       double svd_threshold = kDefaultSvdThreshold);

/// Applies the staircase inverse (disentangling direction) to `psi` in place.
void apply_disentangler(tn::Mps& psi, const Staircase& s, std::size_t chi_max, double svd_threshold);
void apply_disentangler(std::span<Complex> psi, std::size_t n, const Staircase& s);

/// Preparation direction, U_1^dag ... U_L^dag |0>.
ComplexVector prepare_dense(const LayerStack& stack);
tn::Mps prepare_mps(const LayerStack& stack, std::size_t chi_max = 0,
                    double svd_threshold = kDefaultSvdThreshold);

// ---- exact single-layer sequential program -------------------------------

/// A unitary on consecutive qubits [first, first + width). Index bits follow
/// the wire order (first is the most significant).
struct Block {
  std::size_t first = 0;
  std::size_t width = 1;
  RowMat u;
};

enum class Padding {
  PerBond,  // core k uses ceil(log2 D_k) + 1 qubits for its left bond D_k
  Uniform,  // every block uses ceil(log2 chi) + 1 qubits where room allows
};

struct ExactSequentialProgram {
  std::size_t n = 0;
  std::vector<Block> blocks;  // preparation time order (core n-1 first)
  std::vector<std::size_t> bond_dims;
  std::size_t max_width() const;
  void validate(double tol = 1e-10) const;
};

inline constexpr std::size_t kMaxBlockDim = std::size_t{1} << 12;

/// Exact preparation of `target` by one sequential layer of multi-qubit
/// blocks. The single-qubit block of site 0 is folded into its neighbour when
/// that block starts at qubit 0. Throws CapacityError when a block dimension
/// would exceed `max_block_dim`.
ExactSequentialProgram exact_sequential(const tn::Mps& target, Padding padding = Padding::PerBond,
                                        std::size_t max_block_dim = kMaxBlockDim);

ComplexVector prepare_dense(const ExactSequentialProgram& program);

// ---- serialization -------------------------------------------------------

std::string to_json(const LayerStack& stack);
LayerStack layer_stack_from_json(const std::string& text);
void save_layer_stack(const std::string& path, const LayerStack& stack);
LayerStack load_layer_stack(const std::string& path);

}  // namespace mpsenc::mpd
