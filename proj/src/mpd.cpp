#include "mpsenc/mpd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "mpsenc/kernels/statevector.hpp"
#include "mpsenc/linalg.hpp"

namespace mpsenc::mpd {

namespace {

constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();

// Column block for one core: u(2l + p, r) = A[l, p, r], completed to a unitary
// of dimension `dim`.
RowMat embed_core(const tn::Core& a, std::size_t dim) {
  RowMat u = RowMat::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (std::size_t l = 0; l < a.left; ++l)
    for (std::size_t p = 0; p < 2; ++p)
      for (std::size_t r = 0; r < a.right; ++r)
        u(static_cast<Eigen::Index>(2 * l + p), static_cast<Eigen::Index>(r)) = a(l, p, r);
  linalg::complete_unitary(u, a.right);
  return u;
}

}  // namespace

Staircase staircase_from_left_canonical(const tn::Mps& chi2) {
  const std::size_t n = chi2.size();
  if (n < 2) throw InvalidParameter("a staircase needs at least two qubits");
  if (chi2.max_bond() > 2) throw InvalidParameter("staircase embedding needs bond dimension <= 2");

  Staircase s;
  s.reserve(n - 1);
  for (std::size_t k = n - 1; k >= 1; --k) {
    s.push_back({k - 1, Mat4(embed_core(chi2.core(k), 4))});
  }
  // Core 0 is a single-qubit unitary on qubit 0; fold it into the (0, 1) block.
  const RowMat v = embed_core(chi2.core(0), 2);
  Mat4 vi = Mat4::Zero();
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      vi(2 * i, 2 * j) = v(i, j);
      vi(2 * i + 1, 2 * j + 1) = v(i, j);
    }
  s.back().u = vi * s.back().u;
  return s;
}

Staircase chi2_disentangler(const tn::Mps& psi, StaircaseInfo* info) {
  if (psi.size() < 2) throw InvalidParameter("chi2_disentangler needs at least two qubits");
  auto t = tn::truncate(psi, 2, kDefaultSvdThreshold);
  if (info) {
    info->truncation_fidelity = tn::fidelity(psi, t.mps);
    info->degenerate = false;
    for (std::size_t b = 1; b < psi.size(); ++b) {
      if (t.mps.bond_dim(b) < std::min<std::size_t>(2, psi.bond_dim(b))) info->degenerate = true;
    }
  }
  return staircase_from_left_canonical(t.mps);
}

void LayerStack::validate(double tol) const {
  for (const auto& layer : layers) {
    if (layer.size() + 1 != n) throw ValidationError("staircase length must be n - 1");
    for (const auto& b : layer) {
      if (b.site + 1 >= n) throw ValidationError("staircase block out of range");
      if (unitarity_defect(b.u) > tol) throw ValidationError("staircase block is not unitary");
    }
  }
  if (per_layer_fidelity.size() != layers.size())
    throw ValidationError("per_layer_fidelity length differs from layer count");
}

void apply_disentangler(tn::Mps& psi, const Staircase& s, std::size_t chi_max, double svd_threshold) {
  for (auto it = s.rbegin(); it != s.rend(); ++it) {
    psi.apply_two_qubit(it->u.adjoint(), it->site, chi_max, svd_threshold);
  }
}

void apply_disentangler(std::span<Complex> psi, std::size_t n, const Staircase& s) {
  for (auto it = s.rbegin(); it != s.rend(); ++it) {
    kernels::apply_2q(psi, n, it->u.adjoint(), it->site, it->site + 1);
  }
}

LayerStack mpd_extract(const tn::Mps& target, const MpdOptions& options) {
  if (options.layers < 1) throw InvalidParameter("L must be at least 1");
  const std::size_t n = target.size();
  if (n < 2) throw InvalidParameter("mpd_extract needs at least two qubits");

  LayerStack stack;
  stack.n = n;
  stack.chi_max_used = options.chi_max;

  tn::Mps psi = target;
  if (!psi.center()) psi = tn::canonicalize(psi, tn::Canonical::left());
  psi.normalize();

  const bool dense = n <= options.dense_fidelity_max_qubits;
  ComplexVector phi;
  if (dense) phi = psi.to_dense();

  for (std::size_t k = 1; k <= options.layers; ++k) {
    StaircaseInfo info;
    Staircase s = chi2_disentangler(psi, &info);
    if (info.degenerate) {
      stack.diagnostics.push_back("layer " + std::to_string(k) +
                                  ": chi=2 truncation degenerate, chi=1 embedding used on some bonds");
    }
    apply_disentangler(psi, s, options.chi_max, options.svd_threshold);
    double f = 0.0;
    if (dense) {
      apply_disentangler(std::span<Complex>(phi), n, s);
      f = std::norm(phi[0]);
    } else {
      f = std::norm(psi.amplitude(0));
    }
    stack.layers.push_back(std::move(s));
    stack.per_layer_fidelity.push_back(std::min(1.0, f));
    if (f >= 1.0 - options.svd_threshold) break;
  }
  return stack;
}

LayerStack mpd_extract(const tn::Mps& target, std::size_t layers, std::size_t chi_max,
                       double svd_threshold) {
  MpdOptions o;
  o.layers = layers;
  o.chi_max = chi_max;
  o.svd_threshold = svd_threshold;
  return mpd_extract(target, o);
}

ComplexVector prepare_dense(const LayerStack& stack) {
  ComplexVector v = kernels::zero_state(stack.n);
  for (auto layer = stack.layers.rbegin(); layer != stack.layers.rend(); ++layer) {
    for (const auto& b : *layer) kernels::apply_2q(v, stack.n, b.u, b.site, b.site + 1);
  }
  return v;
}

tn::Mps prepare_mps(const LayerStack& stack, std::size_t chi_max, double svd_threshold) {
  tn::Mps m = tn::Mps::zero_state(stack.n);
  for (auto layer = stack.layers.rbegin(); layer != stack.layers.rend(); ++layer) {
    for (const auto& b : *layer) m.apply_two_qubit(b.u, b.site, chi_max, svd_threshold);
  }
  return m;
}

// ---- exact sequential program ----------------------------------------------

std::size_t ExactSequentialProgram::max_width() const {
  std::size_t w = 0;
  for (const auto& b : blocks) w = std::max(w, b.width);
  return w;
}

void ExactSequentialProgram::validate(double tol) const {
  for (const auto& b : blocks) {
    if (b.first + b.width > n) throw ValidationError("block out of range");
    if (b.u.rows() != (Eigen::Index{1} << b.width) || b.u.cols() != b.u.rows())
      throw ValidationError("block matrix has the wrong shape");
    if (unitarity_defect(b.u) > tol) throw ValidationError("block is not unitary");
  }
}

ExactSequentialProgram exact_sequential(const tn::Mps& target, Padding padding,
                                        std::size_t max_block_dim) {
  const std::size_t n = target.size();
  // Minimal bonds in left-canonical form.
  auto t = tn::truncate(target, kNoCap, 1e-14);
  const tn::Mps& m = t.mps;

  ExactSequentialProgram prog;
  prog.n = n;
  prog.bond_dims = m.bond_dims();
  const unsigned widest = ceil_log2(m.max_bond());

  std::vector<unsigned> pad(n);
  for (std::size_t k = 0; k < n; ++k) {
    pad[k] = padding == Padding::Uniform ? std::min<unsigned>(widest, static_cast<unsigned>(k))
                                         : ceil_log2(m.core(k).left);
  }
  for (std::size_t k = n; k-- > 0;) {
    const std::size_t width = pad[k] + 1;
    const std::size_t dim = std::size_t{1} << width;
    if (dim > max_block_dim) {
      throw CapacityError("exact block of " + std::to_string(width) + " qubits exceeds the " +
                          std::to_string(max_block_dim) + "-dimensional guard");
    }
    prog.blocks.push_back({k - pad[k], width, embed_core(m.core(k), dim)});
  }
  if (prog.blocks.size() >= 2 && prog.blocks[prog.blocks.size() - 2].first == 0) {
    const Block v = prog.blocks.back();
    prog.blocks.pop_back();
    Block& b = prog.blocks.back();
    const auto half = b.u.rows() / 2;
    RowMat lift = RowMat::Zero(b.u.rows(), b.u.rows());
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        lift.block(i * half, j * half, half, half) = v.u(i, j) * RowMat::Identity(half, half);
    b.u = lift * b.u;
  }
  return prog;
}

ComplexVector prepare_dense(const ExactSequentialProgram& program) {
  ComplexVector v = kernels::zero_state(program.n);
  std::vector<std::size_t> wires;
  for (const auto& b : program.blocks) {
    wires.resize(b.width);
    for (std::size_t i = 0; i < b.width; ++i) wires[i] = b.first + i;
    kernels::apply_kq(v, program.n, b.u, wires);
  }
  return v;
}

// ---- serialization -----------------------------------------------------------

std::string to_json(const LayerStack& stack) {
  nlohmann::json j;
  j["n"] = stack.n;
  j["L"] = stack.layers.size();
  j["chi_max"] = stack.chi_max_used;
  j["per_layer_fidelity"] = stack.per_layer_fidelity;
  auto layers = nlohmann::json::array();
  for (const auto& layer : stack.layers) {
    auto jl = nlohmann::json::array();
    for (const auto& b : layer) {
      auto entries = nlohmann::json::array();
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) entries.push_back({b.u(r, c).real(), b.u(r, c).imag()});
      jl.push_back({{"site", b.site}, {"u", std::move(entries)}});
    }
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  if (!stack.diagnostics.empty()) j["diagnostics"] = stack.diagnostics;
  return j.dump(1);
}

LayerStack layer_stack_from_json(const std::string& text) {
  LayerStack s;
  try {
    const auto j = nlohmann::json::parse(text);
    s.n = j.at("n").get<std::size_t>();
    s.chi_max_used = j.at("chi_max").get<std::size_t>();
    s.per_layer_fidelity = j.at("per_layer_fidelity").get<std::vector<double>>();
    for (const auto& jl : j.at("layers")) {
      Staircase layer;
      for (const auto& jb : jl) {
        TwoQubitBlock b;
        b.site = jb.at("site").get<std::size_t>();
        const auto& e = jb.at("u");
        if (e.size() != 16) throw FormatError("layer block needs 16 entries");
        for (int i = 0; i < 16; ++i) b.u(i / 4, i % 4) = Complex(e[i].at(0).get<double>(), e[i].at(1).get<double>());
        layer.push_back(b);
      }
      s.layers.push_back(std::move(layer));
    }
    if (j.contains("diagnostics")) s.diagnostics = j["diagnostics"].get<std::vector<std::string>>();
    if (j.at("L").get<std::size_t>() != s.layers.size()) throw FormatError("L does not match the layer list");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid layer stack JSON: ") + e.what());
  }
  s.validate(1e-9);
  return s;
}

void save_layer_stack(const std::string& path, const LayerStack& stack) {
  std::ofstream f(path);
  if (!f) throw FormatError("cannot open " + path + " for writing");
  f << to_json(stack) << '\n';
  if (!f) throw FormatError("write failed: " + path);
}

LayerStack load_layer_stack(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return layer_stack_from_json(ss.str());
}

}  // namespace mpsenc::mpd
