#include "mpsenc/app.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <omp.h>

#include "json.hpp"

namespace mpsenc::app {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

const std::vector<std::string> kTargetKeys = {
    "kind",     "family",     "sigma",      "mu",      "gamma",      "k",          "epsilon",
    "strike",   "degree",     "intervals",  "knots",   "discontinuous", "complex", "seed",
    "coeffs",   "domain_min", "domain_max", "chi",     "n_qubits",   "image_path", "image_format"};

const std::vector<std::string> kRunKeys = {
    "method",  "layers",     "chi_max", "svd_threshold", "max_iters", "tol",     "restarts",
    "backend", "padding",    "cost_model", "output_dir", "run_id",    "formats", "timing",
    "chis",    "bonds",      "tci_tol", "manifest",      "threads",   "input"};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// ---- strict value parsing ------------------------------------------------------

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ConfigError("'" + key + "' needs a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(out)) {
    throw ConfigError("'" + key + "' needs a number, got '" + v + "'");
  }
  return out;
}

bool to_flag(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError("'" + key + "' needs true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::string s = v;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& t : split_list(v)) out.push_back(to_size(key, t));
  return out;
}

// ---- targets ------------------------------------------------------------------------

struct Prepared {
  targets::TargetSpec spec;
  std::string description;
  tn::Mps reference;  // as exact as practical
  tn::Mps capped;     // what the encoder sees
  double target_fidelity = 1.0;
};

bool is_synthetic(const targets::KeyValues& kv) {
  auto it = kv.find("image_path");
  return it != kv.end() && it->second.rfind("synthetic", 0) == 0;
}

targets::TargetSpec build_spec(const targets::KeyValues& kv) {
  if (is_synthetic(kv)) {
    // "synthetic" or "synthetic:<side>": the bundled generator, no file needed.
    const std::string& v = kv.at("image_path");
    std::size_t side = 128;
    if (v.size() > 9) {
      if (v[9] != ':') throw ConfigError("image_path 'synthetic' takes an optional ':<side>'");
      side = to_size("image_path", v.substr(10));
    }
    if (side < 2 || (side & (side - 1)) != 0) throw ConfigError("synthetic image side must be a power of two");
    targets::TargetSpec s;
    s.kind = targets::TargetKind::Image;
    s.image = targets::synthetic_chest_image(side);
    s.n_qubits = 2 * static_cast<std::size_t>(std::log2(static_cast<double>(side)) + 0.5);
    if (kv.count("n_qubits") && to_size("n_qubits", kv.at("n_qubits")) != s.n_qubits) {
      throw ConfigError("n_qubits does not match the image size");
    }
    return s;
  }
  return targets::target_from_config(kv);
}

std::string describe(const targets::TargetSpec& s, const targets::KeyValues& kv) {
  switch (s.kind) {
    case targets::TargetKind::Function: return targets::family_name(s.function.family);
    case targets::TargetKind::RandomMps: return "random-chi" + std::to_string(s.random_chi);
    case targets::TargetKind::Image: {
      if (is_synthetic(kv)) return "image-synthetic";
      return "image-" + fs::path(kv.at("image_path")).stem().string();
    }
  }
  return "target";
}

Prepared prepare(const RunConfig& c, std::size_t tci_cap) {
  Prepared p;
  try {
    p.spec = build_spec(c.target);
    p.description = describe(p.spec, c.target);
    if (p.spec.n_qubits <= targets::kDenseCap || p.spec.kind != targets::TargetKind::Function) {
      p.reference = targets::target_mps(p.spec, 0, 1e-14);
    } else {
      const targets::Function f(p.spec.function, p.spec.domain_min, p.spec.domain_max);
      auto r = targets::tci_build([&f](double x) { return f(x); }, p.spec.domain_min, p.spec.domain_max,
                                  p.spec.n_qubits, tci_cap, c.tci_tol, p.spec.function.seed);
      p.reference = std::move(r.mps);
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("target: ") + e.what());
  }
  p.capped = tn::truncate(p.reference, c.chi_max == 0 ? SIZE_MAX : c.chi_max, c.svd_threshold).mps;
  p.target_fidelity = std::min(1.0, tn::fidelity(p.reference, p.capped));
  return p;
}

// |<reference|circuit>|^2 and, when dense, the aligned amplitudes.
double circuit_fidelity(const circuit::Circuit& c, const tn::Mps& reference, ComplexVector* dense_out) {
  if (c.n <= targets::kDenseCap) {
    ComplexVector psi = circuit::simulate_dense(c);
    const ComplexVector ref = reference.to_dense();
    Complex ov = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) ov += std::conj(ref[i]) * psi[i];
    if (dense_out) {
      const Complex ph = std::abs(ov) > 0 ? std::conj(ov) / std::abs(ov) : Complex(1.0);
      for (auto& z : psi) z *= ph;
      *dense_out = std::move(psi);
    }
    return std::norm(ov) / reference.norm() / reference.norm();
  }
  return tn::fidelity(reference, circuit::simulate(c));
}

std::string run_dir_for(const RunConfig& c) {
  const fs::path dir = fs::path(c.output_dir) / c.run_id;
  fs::create_directories(dir);
  return dir.string();
}

std::string derive_run_id(const RunConfig& c, const std::string& target_desc, std::size_t n) {
  std::string id = target_desc + "-n" + std::to_string(n);
  if (c.command == Command::EncodeFunction || c.command == Command::EncodeImage) {
    id += "-" + method_name(c.method);
    if (c.method != Method::Exact) id += "-L" + std::to_string(c.layers);
  } else {
    id = command_name(c.command) + "-" + id;
  }
  id += c.chi_max ? "-chi" + std::to_string(c.chi_max) : "-chia";
  if (c.target.count("seed")) id += "-seed" + c.target.at("seed");
  return id;
}

void write_report(const std::string& dir, EncodeReport& r) {
  write_file_atomic((fs::path(dir) / "report.json").string(), r.to_json());
}

std::string csv_field(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

// ---- names ------------------------------------------------------------------------------

std::string command_name(Command c) {
  switch (c) {
    case Command::EncodeFunction: return "encode-function";
    case Command::EncodeImage: return "encode-image";
    case Command::TruncationScan: return "truncation-scan";
    case Command::TciBuild: return "tci-build";
    case Command::Benchmark: return "benchmark";
    case Command::Inspect: return "inspect";
  }
  return "unknown";
}

Command parse_command(const std::string& s) {
  for (Command c : {Command::EncodeFunction, Command::EncodeImage, Command::TruncationScan,
                    Command::TciBuild, Command::Benchmark, Command::Inspect}) {
    if (command_name(c) == s) return c;
  }
  throw ConfigError("unknown command '" + s + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::Mpd: return "mpd";
    case Method::MpdTno: return "mpd-tno";
    case Method::Exact: return "exact";
  }
  return "unknown";
}

Method parse_method(const std::string& s) {
  if (s == "mpd") return Method::Mpd;
  if (s == "mpd-tno" || s == "mpd+tno") return Method::MpdTno;
  if (s == "exact") return Method::Exact;
  throw ConfigError("unknown method '" + s + "' (mpd, mpd-tno, exact)");
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> all = [] {
    std::vector<std::string> v = kTargetKeys;
    v.insert(v.end(), kRunKeys.begin(), kRunKeys.end());
    return v;
  }();
  return all;
}

std::string normalize_key(const std::string& key) {
  std::string k = key;
  for (auto& ch : k) {
    ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ch == '-') ch = '_';
  }
  const auto& keys = known_keys();
  if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw ConfigError("unknown key '" + key + "'");
  return k;
}

targets::KeyValues merge_config(const targets::KeyValues& file, const targets::KeyValues& flags) {
  targets::KeyValues out;
  for (const auto& [k, v] : file) out[normalize_key(k)] = v;
  for (const auto& [k, v] : flags) out[normalize_key(k)] = v;
  return out;
}

// ---- configuration ---------------------------------------------------------------------

RunConfig make_config(Command command, const targets::KeyValues& raw) {
  targets::KeyValues kv;
  for (const auto& [k, v] : raw) {
    const std::string key = normalize_key(k);
    if (kv.count(key)) throw ConfigError("key '" + k + "' given twice");
    kv[key] = v;
  }
  RunConfig c;
  c.command = command;
  for (const auto& k : kTargetKeys) {
    if (kv.count(k)) c.target[k] = kv.at(k);
  }
  const bool image = command == Command::EncodeImage ||
                     (kv.count("kind") && kv.at("kind") == "image");
  if (command == Command::EncodeImage) {
    if (c.target.count("kind") && c.target.at("kind") != "image") {
      throw ConfigError("encode-image needs an image target");
    }
    c.target["kind"] = "image";
    if (!c.target.count("image_path")) throw ConfigError("encode-image needs image_path");
  }
  if (command == Command::EncodeFunction && c.target.count("kind") && c.target.at("kind") == "image") {
    throw ConfigError("use encode-image for image targets");
  }
  if (image) {
    c.chi_max = 32;
    c.max_iters = 400;
  }
  auto get = [&](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("method")) c.method = parse_method(*v);
  if (auto v = get("layers")) c.layers = to_size("layers", *v);
  if (auto v = get("chi_max")) c.chi_max = to_size("chi_max", *v);
  if (auto v = get("svd_threshold")) c.svd_threshold = to_real("svd_threshold", *v);
  if (auto v = get("max_iters")) c.max_iters = to_size("max_iters", *v);
  if (auto v = get("tol")) c.tol = to_real("tol", *v);
  if (auto v = get("restarts")) c.restarts = to_size("restarts", *v);
  if (auto v = get("seed")) c.seed = to_size("seed", *v);
  if (auto v = get("backend")) {
    try {
      c.backend = tno::parse_backend(*v);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = get("padding")) {
    if (*v == "per-bond" || *v == "per_bond") c.padding = mpd::Padding::PerBond;
    else if (*v == "uniform") c.padding = mpd::Padding::Uniform;
    else throw ConfigError("padding must be per-bond or uniform");
  }
  if (auto v = get("cost_model")) {
    try {
      c.cost_model = circuit::parse_cost_model(*v);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }
  if (auto v = get("output_dir")) c.output_dir = *v;
  if (auto v = get("run_id")) c.run_id = *v;
  if (auto v = get("formats")) {
    c.formats.clear();
    for (const auto& f : split_list(*v)) {
      if (f != "qasm" && f != "json" && f != "csv") throw ConfigError("unknown format '" + f + "'");
      c.formats.insert(f);
    }
  }
  if (auto v = get("timing")) c.timing = to_flag("timing", *v);
  if (auto v = get("chis")) c.chis = to_sizes("chis", *v);
  if (auto v = get("bonds")) c.bonds = to_sizes("bonds", *v);
  if (auto v = get("tci_tol")) c.tci_tol = to_real("tci_tol", *v);
  if (auto v = get("manifest")) c.manifest = *v;
  if (auto v = get("threads")) c.threads = to_size("threads", *v);
  if (auto v = get("input")) c.input = *v;

  if (c.layers == 0) throw ConfigError("layers must be at least 1");
  if (!(c.svd_threshold >= 0.0)) throw ConfigError("svd_threshold must be non-negative");
  if (!(c.tol >= 0.0)) throw ConfigError("tol must be non-negative");
  if (c.chis.empty() || std::count(c.chis.begin(), c.chis.end(), std::size_t{0})) {
    throw ConfigError("chis must be positive");
  }
  if (c.run_id.find('/') != std::string::npos || c.run_id == "." || c.run_id == "..") {
    throw ConfigError("run_id must be a plain name");
  }
  if (command == Command::Benchmark && c.manifest.empty()) throw ConfigError("benchmark needs manifest");
  if (command == Command::Inspect && c.input.empty()) throw ConfigError("inspect needs input");
  return c;
}

// ---- reports -------------------------------------------------------------------------------

std::string EncodeReport::to_json() const {
  ojson j;
  j["run_id"] = run_id;
  j["command"] = command;
  j["status"] = status;
  if (!error.empty()) j["error"] = error;
  j["method"] = method;
  j["target"] = target;
  j["seed"] = seed;
  j["n"] = n;
  j["L"] = layers;
  j["chi_max"] = chi_max;
  j["svd_threshold"] = svd_threshold;
  j["fidelity"] = fidelity;
  j["infidelity"] = infidelity;
  j["target_fidelity"] = target_fidelity;
  j["per_layer_fidelity"] = per_layer_fidelity;
  j["cnot_count"] = metrics.cnot_count;
  j["single_qubit_count"] = metrics.single_qubit_count;
  j["total_gates"] = metrics.total_gates;
  j["depth"] = metrics.depth;
  j["parameter_count"] = metrics.parameter_count;
  j["opaque_blocks"] = metrics.opaque_count;
  if (metrics.modeled()) j["modeled_gates"] = metrics.modeled_gates;
  if (!cost_model.empty()) j["cost_model"] = cost_model;
  if (optimization) j["optimization"] = ojson::parse(optimization->to_json(timing));
  j["wall_times"] = {{"target", timing ? seconds_target : 0.0},
                     {"encode", timing ? seconds_encode : 0.0},
                     {"optimize", timing ? seconds_optimize : 0.0},
                     {"total", timing ? seconds_total : 0.0}};
  j["files"] = files;
  return j.dump(1) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f << contents;
    f.flush();
    if (!f) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

// ---- encode ---------------------------------------------------------------------------------

RunResult encode(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  RunConfig c = cfg;
  Prepared p = prepare(c, c.chi_max ? c.chi_max : 64);
  if (c.run_id.empty()) c.run_id = derive_run_id(c, p.description, p.spec.n_qubits);

  RunResult res;
  EncodeReport& r = res.report;
  r.timing = c.timing;
  r.run_id = c.run_id;
  r.command = command_name(c.command);
  r.method = method_name(c.method);
  r.target = p.description;
  r.seed = p.spec.function.seed;
  r.n = p.spec.n_qubits;
  r.layers = c.method == Method::Exact ? 1 : c.layers;
  r.chi_max = c.chi_max;
  r.svd_threshold = c.svd_threshold;
  r.target_fidelity = p.target_fidelity;
  r.seconds_target = seconds_since(t0);
  res.run_dir = run_dir_for(c);

  try {
    const auto t1 = Clock::now();
    circuit::Circuit circ;
    std::optional<tno::OptimizeResult> opt;
    if (c.method == Method::Exact) {
      const auto program = mpd::exact_sequential(p.capped, c.padding);
      circ = circuit::exact_to_circuit(program, c.cost_model);
      r.cost_model = circuit::cost_model_name(c.cost_model);
      r.seconds_encode = seconds_since(t1);
    } else {
      const auto stack = mpd::mpd_extract(p.capped, c.layers, c.chi_max, c.svd_threshold);
      r.per_layer_fidelity = stack.per_layer_fidelity;
      circ = circuit::layers_to_circuit(stack);
      r.seconds_encode = seconds_since(t1);
      if (c.method == Method::MpdTno) {
        const auto t2 = Clock::now();
        tno::OptimizeOptions o;
        o.max_iters = c.max_iters;
        o.tol = c.tol;
        o.restarts = c.restarts;
        o.seed = c.seed;
        o.cost.backend = c.backend;
        opt = tno::optimize(circ, p.capped, o);
        circ = opt->circuit;
        r.optimization = opt->report;
        r.seconds_optimize = seconds_since(t2);
      }
    }
    ComplexVector amps;
    const bool want_image = c.command == Command::EncodeImage && c.formats.count("csv");
    r.fidelity = std::min(1.0, circuit_fidelity(circ, p.reference, want_image ? &amps : nullptr));
    r.infidelity = 1.0 - r.fidelity;
    r.metrics = circuit::metrics(circ);

    // Everything is computed; only now touch the run directory.
    const fs::path dir(res.run_dir);
    if (c.formats.count("qasm") && !r.metrics.modeled()) {
      write_file_atomic((dir / "circuit.qasm").string(), circuit::to_qasm(circ));
      r.files.push_back("circuit.qasm");
    }
    if (c.formats.count("json")) {
      write_file_atomic((dir / "circuit.json").string(), circuit::to_json(circ) + "\n");
      r.files.push_back("circuit.json");
    }
    if (c.formats.count("csv")) {
      if (!r.per_layer_fidelity.empty()) {
        std::string s = "layer,fidelity\n";
        for (std::size_t k = 0; k < r.per_layer_fidelity.size(); ++k) {
          s += std::to_string(k + 1) + "," + fmt17(r.per_layer_fidelity[k]) + "\n";
        }
        write_file_atomic((dir / "layers.csv").string(), s);
        r.files.push_back("layers.csv");
      }
      if (opt) {
        write_file_atomic((dir / "trace.csv").string(), opt->report.trace_csv(c.timing));
        r.files.push_back("trace.csv");
      }
      if (want_image && !amps.empty()) {
        const auto& img = p.spec.image;
        std::string s;
        for (std::size_t y = 0; y < img.height; ++y) {
          for (std::size_t x = 0; x < img.width; ++x) {
            s += (x ? "," : "") + fmt17(amps[y * img.width + x].real());
          }
          s += "\n";
        }
        write_file_atomic((dir / "image.csv").string(), s);
        r.files.push_back("image.csv");
      }
    }
  } catch (const std::exception& e) {
    r.status = "failed";
    r.error = e.what();
    res.exit_code = kExitNumerical;
  }
  r.files.push_back("report.json");
  r.seconds_total = seconds_since(t0);
  write_report(res.run_dir, r);
  return res;
}

// ---- truncation scan ------------------------------------------------------------------------

RunResult truncation_scan(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  RunConfig c = cfg;
  c.chi_max = 0;
  c.svd_threshold = 0.0;
  const std::size_t chi_top = *std::max_element(c.chis.begin(), c.chis.end());
  Prepared p = prepare(c, std::max<std::size_t>(chi_top, 2));
  if (c.run_id.empty()) c.run_id = derive_run_id(c, p.description, p.spec.n_qubits);
  const std::size_t n = p.spec.n_qubits;
  std::vector<std::size_t> bonds = c.bonds;
  if (bonds.empty()) bonds.push_back(n / 2);
  for (auto b : bonds) {
    if (b < 1 || b >= n) throw ConfigError("bond index must be in [1, n-1]");
  }

  RunResult res;
  EncodeReport& r = res.report;
  r.timing = c.timing;
  r.run_id = c.run_id;
  r.command = command_name(c.command);
  r.target = p.description;
  r.seed = p.spec.function.seed;
  r.n = n;
  res.run_dir = run_dir_for(c);
  try {
    ojson j;
    j["run_id"] = c.run_id;
    j["command"] = r.command;
    j["target"] = p.description;
    j["seed"] = r.seed;
    j["n"] = n;
    j["reference_max_bond"] = p.reference.max_bond();
    std::string curve = "chi,eps_t,truncation_error\n";
    auto rows = ojson::array();
    for (std::size_t chi : c.chis) {
      const auto t = tn::truncate(p.reference, chi, 0.0);
      const double eps = std::max(0.0, 1.0 - tn::fidelity(p.reference, t.mps));
      curve += std::to_string(chi) + "," + fmt17(eps) + "," + fmt17(t.truncation_error) + "\n";
      rows.push_back({{"chi", chi}, {"eps_t", eps}, {"truncation_error", t.truncation_error}});
      if (rows.size() == 1) {
        // Summary rows quote the truncation fidelity at the first chi.
        r.chi_max = chi;
        r.fidelity = 1.0 - eps;
        r.infidelity = eps;
      }
    }
    std::string spectra = "bond,index,singular_value\n";
    auto spec_json = ojson::array();
    for (std::size_t b : bonds) {
      const auto s = tn::schmidt_spectrum(p.reference, b);
      for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
        spectra += std::to_string(b) + "," + std::to_string(i) + "," + fmt17(s.singular_values[i]) + "\n";
      }
      spec_json.push_back({{"bond", b}, {"entropy_bits", s.entropy}, {"singular_values", s.singular_values}});
    }
    j["truncation"] = std::move(rows);
    j["spectra"] = std::move(spec_json);
    j["wall_time"] = c.timing ? seconds_since(t0) : 0.0;
    const fs::path dir(res.run_dir);
    write_file_atomic((dir / "truncation.csv").string(), curve);
    write_file_atomic((dir / "spectra.csv").string(), spectra);
    write_file_atomic((dir / "report.json").string(), j.dump(1) + "\n");
  } catch (const std::exception& e) {
    r.status = "failed";
    r.error = e.what();
    res.exit_code = kExitNumerical;
    write_report(res.run_dir, r);
  }
  return res;
}

// ---- TCI -----------------------------------------------------------------------------------------

RunResult tci_build(const RunConfig& cfg) {
  const auto t0 = Clock::now();
  RunConfig c = cfg;
  targets::TargetSpec spec;
  try {
    spec = build_spec(c.target);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(std::string("target: ") + e.what());
  }
  if (spec.kind != targets::TargetKind::Function) throw ConfigError("tci-build needs a function target");
  const std::size_t cap = c.chi_max ? c.chi_max : 16;
  if (c.run_id.empty()) c.run_id = derive_run_id(c, describe(spec, c.target), spec.n_qubits);

  RunResult res;
  EncodeReport& r = res.report;
  r.timing = c.timing;
  r.run_id = c.run_id;
  r.command = command_name(c.command);
  r.target = describe(spec, c.target);
  r.seed = spec.function.seed;
  r.n = spec.n_qubits;
  res.run_dir = run_dir_for(c);
  try {
    const targets::Function f(spec.function, spec.domain_min, spec.domain_max);
    const auto cr = targets::tci_build([&f](double x) { return f(x); }, spec.domain_min, spec.domain_max,
                                       spec.n_qubits, cap, c.tci_tol, spec.function.seed);
    ojson j;
    j["run_id"] = c.run_id;
    j["command"] = r.command;
    j["target"] = r.target;
    j["seed"] = r.seed;
    j["n"] = spec.n_qubits;
    j["chi_cap"] = cap;
    j["chi"] = cr.mps.max_bond();
    j["bond_dims"] = cr.mps.bond_dims();
    j["error"] = cr.est_error;
    j["samples"] = cr.samples_used;
    j["total_evaluations"] = cr.total_evaluations;
    j["sample_fraction"] = static_cast<double>(cr.samples_used) / std::ldexp(1.0, static_cast<int>(spec.n_qubits));
    j["sweeps"] = cr.sweeps;
    j["converged"] = cr.converged;
    j["chi_cap_reached"] = cr.chi_cap_reached;
    if (spec.n_qubits <= targets::kDenseCap) {
      const tn::Mps exact = targets::target_mps(spec, 0, 1e-14);
      j["dense_infidelity"] = std::max(0.0, 1.0 - tn::fidelity(exact, cr.mps));
    }
    j["wall_time"] = c.timing ? seconds_since(t0) : 0.0;
    std::ostringstream bin;
    tn::write_mps(bin, cr.mps);
    const fs::path dir(res.run_dir);
    write_file_atomic((dir / "target.mps").string(), bin.str());
    write_file_atomic((dir / "report.json").string(), j.dump(1) + "\n");
  } catch (const std::exception& e) {
    r.status = "failed";
    r.error = e.what();
    res.exit_code = kExitNumerical;
    write_report(res.run_dir, r);
  }
  return res;
}

// ---- benchmark -----------------------------------------------------------------------------------

namespace {

struct ManifestRun {
  std::size_t line = 0;
  std::string command;
  targets::KeyValues kv;
};

std::vector<ManifestRun> read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open manifest " + path);
  std::vector<ManifestRun> runs;
  std::string line;
  std::size_t no = 0;
  while (std::getline(f, line)) {
    ++no;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    std::istringstream in(line);
    ManifestRun r;
    r.line = no;
    if (!(in >> r.command)) continue;
    for (std::string tok; in >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw ConfigError("manifest line " + std::to_string(no) + ": expected key=value, got '" + tok + "'");
      }
      r.kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    runs.push_back(std::move(r));
  }
  return runs;
}

std::size_t pool_size(const RunConfig& c) {
  std::size_t n = c.threads ? c.threads : std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MPSENC_THREADS")) {
    // The environment caps whatever the configuration asks for.
    try {
      const std::size_t cap = to_size("MPSENC_THREADS", env);
      if (cap > 0) n = std::min(n, cap);
    } catch (const ConfigError&) {
    }
  }
  return n;
}

struct Row {
  std::string run_id, command, target, method, status, error;
  std::uint64_t seed = 0;
  std::size_t n = 0, layers = 0, chi_max = 0, cnots = 0, depth = 0, total = 0;
  double fidelity = 0.0, seconds = 0.0;
};

}  // namespace

RunResult benchmark(const RunConfig& cfg) {
  RunConfig c = cfg;
  if (c.run_id.empty()) c.run_id = "benchmark-" + fs::path(c.manifest).stem().string();
  const auto runs = read_manifest(c.manifest);
  RunResult res;
  res.report.run_id = c.run_id;
  res.report.command = command_name(c.command);
  res.run_dir = run_dir_for(c);

  std::vector<Row> rows(runs.size());
  std::atomic<std::size_t> next{0};
  const std::size_t workers = std::min<std::size_t>(pool_size(c), std::max<std::size_t>(runs.size(), 1));
  auto work = [&] {
    if (workers > 1) omp_set_num_threads(1);
    for (std::size_t i; (i = next.fetch_add(1)) < runs.size();) {
      const auto& m = runs[i];
      Row& row = rows[i];
      row.command = m.command;
      const auto t0 = Clock::now();
      try {
        const Command cmd = parse_command(m.command);
        if (cmd == Command::Benchmark || cmd == Command::Inspect) {
          throw ConfigError("manifest runs must encode, scan or build");
        }
        auto kv = m.kv;
        kv["output_dir"] = res.run_dir;
        if (!c.timing) kv["timing"] = "false";
        RunConfig rc = make_config(cmd, kv);
        char prefix[16];
        std::snprintf(prefix, sizeof prefix, "%03zu-", i + 1);
        if (rc.run_id.empty()) {
          const auto spec = build_spec(rc.target);
          rc.run_id = derive_run_id(rc, describe(spec, rc.target), spec.n_qubits);
        }
        rc.run_id = prefix + rc.run_id;
        row.method = cmd == Command::EncodeFunction || cmd == Command::EncodeImage ? method_name(rc.method) : "";
        row.layers = row.method.empty() ? 0 : rc.method == Method::Exact ? 1 : rc.layers;
        row.chi_max = cmd == Command::TruncationScan ? rc.chis.front() : rc.chi_max;
        RunResult rr = cmd == Command::TruncationScan ? truncation_scan(rc)
                       : cmd == Command::TciBuild     ? tci_build(rc)
                                                      : encode(rc);
        row.run_id = rc.run_id;
        row.target = rr.report.target;
        row.seed = rr.report.seed;
        row.n = rr.report.n;
        row.fidelity = rr.report.fidelity;
        row.cnots = rr.report.metrics.cnot_count;
        row.depth = rr.report.metrics.depth;
        row.total = rr.report.metrics.total_gates;
        row.status = rr.report.status;
        row.error = rr.report.error;
      } catch (const std::exception& e) {
        row.status = "failed";
        row.error = e.what();
      }
      row.seconds = c.timing ? seconds_since(t0) : 0.0;
      if (row.run_id.empty()) row.run_id = "line" + std::to_string(m.line);
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  std::string summary = "run_id,command,target,seed,n,method,L,chi_max,fidelity,cnots,depth,total_gates,seconds,status,error\n";
  for (const Row& r : rows) {
    summary += csv_field(r.run_id) + "," + r.command + "," + csv_field(r.target) + "," +
               std::to_string(r.seed) + "," + std::to_string(r.n) + "," + r.method + "," +
               std::to_string(r.layers) + "," + std::to_string(r.chi_max) + "," + fmt17(r.fidelity) + "," +
               std::to_string(r.cnots) + "," + std::to_string(r.depth) + "," + std::to_string(r.total) + "," +
               fmt17(r.seconds) + "," + r.status + "," + csv_field(r.error) + "\n";
  }
  // Mean and sample SD of successful runs that differ only in the seed.
  struct Group {
    std::vector<double> f;
    double cnots = 0, depth = 0;
    std::size_t failed = 0;
  };
  std::map<std::string, Group> groups;
  std::vector<std::string> order;
  for (const Row& r : rows) {
    const std::string key = r.command + "," + csv_field(r.target) + "," + std::to_string(r.n) + "," +
                            r.method + "," + std::to_string(r.layers) + "," + std::to_string(r.chi_max);
    if (!groups.count(key)) order.push_back(key);
    Group& g = groups[key];
    if (r.status != "ok") {
      ++g.failed;
      continue;
    }
    g.f.push_back(r.fidelity);
    g.cnots += static_cast<double>(r.cnots);
    g.depth += static_cast<double>(r.depth);
  }
  std::string stats = "command,target,n,method,L,chi_max,runs,failed,mean_fidelity,sd_fidelity,mean_cnots,mean_depth\n";
  for (const auto& key : order) {
    const Group& g = groups[key];
    const double k = static_cast<double>(g.f.size());
    double mean = 0.0, sd = 0.0;
    for (double x : g.f) mean += x;
    if (k > 0) mean /= k;
    for (double x : g.f) sd += (x - mean) * (x - mean);
    sd = k > 1 ? std::sqrt(sd / (k - 1)) : 0.0;
    stats += key + "," + std::to_string(g.f.size()) + "," + std::to_string(g.failed) + "," + fmt17(mean) + "," +
             fmt17(sd) + "," + fmt17(k > 0 ? g.cnots / k : 0.0) + "," + fmt17(k > 0 ? g.depth / k : 0.0) + "\n";
  }
  const fs::path dir(res.run_dir);
  write_file_atomic((dir / "summary.csv").string(), summary);
  write_file_atomic((dir / "summary_stats.csv").string(), stats);
  return res;
}

// ---- inspect ----------------------------------------------------------------------------------------

RunResult inspect(const RunConfig& c, std::ostream& out) {
  RunResult res;
  std::ifstream f(c.input, std::ios::binary);
  if (!f) throw ConfigError("cannot open " + c.input);
  const std::string ext = fs::path(c.input).extension().string();
  ojson j;
  j["path"] = c.input;
  try {
    if (ext == ".mps") {
      const tn::Mps m = tn::read_mps(f);
      j["type"] = "mps";
      j["n"] = m.size();
      j["bond_dims"] = m.bond_dims();
      j["max_bond"] = m.max_bond();
      j["norm"] = m.norm();
      if (m.size() >= 2) j["central_entropy_bits"] = tn::schmidt_spectrum(m, m.size() / 2).entropy;
    } else {
      std::stringstream ss;
      ss << f.rdbuf();
      const circuit::Circuit circ = ext == ".qasm" ? circuit::from_qasm(ss.str()) : circuit::circuit_from_json(ss.str());
      const auto m = circuit::metrics(circ);
      j["type"] = "circuit";
      j["n"] = circ.n;
      j["provenance"] = circuit::provenance_name(circ.provenance);
      j["gates"] = circ.gates.size();
      j["cnot_count"] = m.cnot_count;
      j["single_qubit_count"] = m.single_qubit_count;
      j["total_gates"] = m.total_gates;
      j["depth"] = m.depth;
      j["parameter_count"] = m.parameter_count;
      j["opaque_blocks"] = m.opaque_count;
    }
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  out << j.dump(1) << "\n";
  return res;
}

// ---- dispatch ---------------------------------------------------------------------------------------

RunResult run(const RunConfig& c, std::ostream& out) {
  switch (c.command) {
    case Command::EncodeFunction:
    case Command::EncodeImage: return encode(c);
    case Command::TruncationScan: return truncation_scan(c);
    case Command::TciBuild: return tci_build(c);
    case Command::Benchmark: return benchmark(c);
    case Command::Inspect: return inspect(c, out);
  }
  throw ConfigError("unknown command");
}

}  // namespace mpsenc::app
