#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mpsenc/circuit.hpp"
#include "mpsenc/mpd.hpp"
#include "mpsenc/targets.hpp"
#include "mpsenc/tno.hpp"

// Command implementations behind the mpsenc executable. Everything here is
// plain library code so the tests can drive it without spawning processes.

namespace mpsenc::app {

enum class Command { EncodeFunction, EncodeImage, TruncationScan, TciBuild, Benchmark, Inspect };
std::string command_name(Command c);
Command parse_command(const std::string& s);

enum class Method { Mpd, MpdTno, Exact };
std::string method_name(Method m);
Method parse_method(const std::string& s);

/// Exit codes of the command-line contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

/// Invalid user configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Every key a configuration may carry, in snake_case. Flags use the same
/// names in kebab-case.
const std::vector<std::string>& known_keys();
/// Lower-case and map '-' to '_'; throws ConfigError for unknown keys.
std::string normalize_key(const std::string& key);

struct RunConfig {
  Command command = Command::EncodeFunction;
  targets::KeyValues target;  // keys understood by targets::target_from_config
  Method method = Method::Mpd;
  std::size_t layers = 1;
  std::size_t chi_max = 0;  // 0 = adaptive (threshold only)
  double svd_threshold = 1e-10;
  std::size_t max_iters = 500;
  double tol = 1e-8;
  std::size_t restarts = 0;
  std::uint64_t seed = 0;
  tno::Backend backend = tno::Backend::Auto;
  mpd::Padding padding = mpd::Padding::PerBond;
  circuit::CostModel cost_model = circuit::CostModel::Shannon;
  std::string output_dir = "out";
  std::string run_id;  // derived from the configuration when empty
  std::set<std::string> formats{"qasm", "json", "csv"};
  bool timing = true;  // false: wall-clock fields are written as 0
  // truncation-scan
  std::vector<std::size_t> chis{1, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  std::vector<std::size_t> bonds;  // empty = middle bond
  // tci-build
  double tci_tol = 1e-12;
  // benchmark
  std::string manifest;
  std::size_t threads = 0;  // 0 = MPSENC_THREADS or hardware concurrency
  // inspect
  std::string input;
};

/// Applies the documented defaults (max_iters 400 and chi_max 32 for images)
/// to keys that were not given, then validates. Throws ConfigError.
RunConfig make_config(Command command, const targets::KeyValues& kv);

/// Config file (key=value) merged with flag overrides, flags winning.
targets::KeyValues merge_config(const targets::KeyValues& file, const targets::KeyValues& flags);

struct EncodeReport {
  std::string run_id;
  std::string command;
  std::string method;
  std::string target;  // description without the seed
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t layers = 0;
  std::size_t chi_max = 0;
  double svd_threshold = 0.0;
  double fidelity = 0.0;    // against the reference target
  double infidelity = 1.0;
  double target_fidelity = 1.0;  // chi_max-capped target against the reference
  std::vector<double> per_layer_fidelity;
  circuit::CircuitMetrics metrics;
  std::string cost_model;  // exact method only
  std::optional<tno::OptimizationReport> optimization;
  double seconds_target = 0.0, seconds_encode = 0.0, seconds_optimize = 0.0, seconds_total = 0.0;
  std::string status = "ok";
  std::string error;
  std::vector<std::string> files;
  bool timing = true;

  std::string to_json() const;
};

struct RunResult {
  int exit_code = kExitOk;
  std::string run_dir;
  EncodeReport report;
};

RunResult encode(const RunConfig& config);
RunResult truncation_scan(const RunConfig& config);
RunResult tci_build(const RunConfig& config);
/// Runs every manifest line ("<command> key=value ...") in a worker pool and
/// writes <output_dir>/<run_id>/summary.csv and summary_stats.csv.
RunResult benchmark(const RunConfig& config);
/// Prints a JSON description of a circuit (.json/.qasm) or MPS (.mps) file.
RunResult inspect(const RunConfig& config, std::ostream& out);

/// Dispatches on config.command and maps library failures to exit codes,
/// writing a diagnostic report for numerical failures.
RunResult run(const RunConfig& config, std::ostream& out);

/// Writes `contents` to `path` through a temporary file and a rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace mpsenc::app
