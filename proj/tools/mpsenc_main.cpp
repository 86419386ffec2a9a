#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "mpsenc/app.hpp"

using namespace mpsenc;

namespace {

std::string kebab(std::string s) {
  for (auto& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Quantum state preparation from matrix product states"};
  cli.require_subcommand(1);

  struct Sub {
    app::Command command;
    CLI::App* app = nullptr;
    std::string config;
    std::map<std::string, std::string> values;
    std::string positional;
  };
  std::vector<Sub> subs;
  for (app::Command c : {app::Command::EncodeFunction, app::Command::EncodeImage, app::Command::TruncationScan,
                         app::Command::TciBuild, app::Command::Benchmark, app::Command::Inspect}) {
    subs.push_back({c});
  }
  const std::map<app::Command, std::string> help = {
      {app::Command::EncodeFunction, "Encode a discretised function"},
      {app::Command::EncodeImage, "Encode a grayscale image"},
      {app::Command::TruncationScan, "Truncation error and Schmidt spectra of a target"},
      {app::Command::TciBuild, "Build a target MPS by tensor cross interpolation"},
      {app::Command::Benchmark, "Run every line of a manifest"},
      {app::Command::Inspect, "Describe a circuit or MPS file"}};
  for (auto& s : subs) {
    s.app = cli.add_subcommand(app::command_name(s.command), help.at(s.command));
    s.app->add_option("--config", s.config, "key = value file; flags override it");
    for (const auto& key : app::known_keys()) {
      s.app->add_option("--" + kebab(key), s.values[key]);
    }
    if (s.command == app::Command::Inspect) s.app->add_option("file", s.positional, "File to inspect");
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? app::kExitOk : app::kExitConfig;
  }

  for (auto& s : subs) {
    if (!s.app->parsed()) continue;
    try {
      targets::KeyValues file;
      if (!s.config.empty()) {
        try {
          file = targets::read_key_values(s.config);
        } catch (const Error& e) {
          throw app::ConfigError(e.what());
        }
      }
      targets::KeyValues flags;
      for (const auto& [key, value] : s.values) {
        if (s.app->count("--" + kebab(key)) > 0) flags[key] = value;
      }
      if (!s.positional.empty()) flags["input"] = s.positional;
      const app::RunConfig config = app::make_config(s.command, app::merge_config(file, flags));
      const app::RunResult r = app::run(config, std::cout);
      if (r.exit_code != app::kExitOk) {
        std::cerr << "error: " << r.report.error << "\n";
      } else if (!r.run_dir.empty()) {
        std::cout << r.run_dir << "\n";
      }
      return r.exit_code;
    } catch (const app::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return app::kExitConfig;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return app::kExitNumerical;
    }
  }
  return app::kExitConfig;
}
