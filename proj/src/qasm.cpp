#include <cmath>
#include <cstdio>
#include <numbers>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "mpsenc/circuit.hpp"

namespace mpsenc::circuit {

namespace {

using std::numbers::pi;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x == 0.0 ? 0.0 : x);  // no "-0"
  return buf;
}

std::array<double, 3> as_u3(const Gate& g) {
  switch (g.kind) {
    case GateKind::RX: return {g.angles[0], -pi / 2, pi / 2};
    case GateKind::RY: return {g.angles[0], 0.0, 0.0};
    case GateKind::RZ: return {0.0, 0.0, g.angles[0]};
    default: return g.angles;
  }
}

}  // namespace

std::string to_qasm(const Circuit& c) {
  std::ostringstream out;
  out << "OPENQASM 2.0;\ninclude \"qelib1.inc\";\nqreg q[" << c.n << "];\n";
  for (const Gate& g : c.gates) {
    if (g.is_single_qubit()) {
      const auto a = as_u3(g);
      out << "u3(" << fmt(a[0]) << "," << fmt(a[1]) << "," << fmt(a[2]) << ") q[" << g.wires[0] << "];\n";
    } else if (g.kind == GateKind::CNOT) {
      out << "cx q[" << g.wires[0] << "],q[" << g.wires[1] << "];\n";
    } else {
      throw FormatError("opaque blocks have no u3/cx QASM form; use the JSON export");
    }
  }
  return out.str();
}

Circuit from_qasm(const std::string& text) {
  static const std::regex header(R"(^OPENQASM\s+2\.0\s*;$)");
  static const std::regex include(R"(^include\s+"qelib1\.inc"\s*;$)");
  static const std::regex qreg(R"(^qreg\s+q\[(\d+)\]\s*;$)");
  static const std::regex u3(R"(^u3\(\s*([^,\s]+)\s*,\s*([^,\s]+)\s*,\s*([^,\s)]+)\s*\)\s+q\[(\d+)\]\s*;$)");
  static const std::regex cx(R"(^cx\s+q\[(\d+)\]\s*,\s*q\[(\d+)\]\s*;$)");
  Circuit c;
  bool have_reg = false, have_header = false;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto pos = line.find("//"); pos != std::string::npos) line.erase(pos);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    line = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    std::smatch m;
    try {
      if (std::regex_match(line, header)) {
        have_header = true;
      } else if (std::regex_match(line, include)) {
      } else if (std::regex_match(line, m, qreg)) {
        if (have_reg) throw FormatError("only one qreg is supported");
        c.n = std::stoul(m[1]);
        have_reg = true;
      } else if (std::regex_match(line, m, u3)) {
        c.gates.push_back(Gate::u3(std::stoul(m[4]), std::stod(m[1]), std::stod(m[2]), std::stod(m[3])));
      } else if (std::regex_match(line, m, cx)) {
        c.gates.push_back(Gate::cnot(std::stoul(m[1]), std::stoul(m[2])));
      } else {
        throw FormatError("unsupported statement");
      }
    } catch (const std::logic_error&) {
      throw FormatError("QASM line " + std::to_string(lineno) + ": bad number");
    } catch (const FormatError& e) {
      throw FormatError("QASM line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header || !have_reg) throw FormatError("QASM needs an OPENQASM 2.0 header and a qreg");
  try {
    c.validate();
  } catch (const ValidationError& e) {
    throw FormatError(std::string("QASM circuit is invalid: ") + e.what());
  }
  return c;
}

std::string to_json(const Circuit& c) {
  nlohmann::json j;
  j["n"] = c.n;
  j["provenance"] = provenance_name(c.provenance);
  j["global_phase"] = c.global_phase;
  auto gates = nlohmann::json::array();
  for (const Gate& g : c.gates) {
    nlohmann::json jg;
    jg["kind"] = gate_name(g.kind);
    jg["wires"] = g.wires;
    if (g.num_params() == 1) jg["params"] = {g.angles[0]};
    if (g.num_params() == 3) jg["params"] = g.angles;
    if (!g.is_elementary()) {
      auto e = nlohmann::json::array();
      for (Eigen::Index r = 0; r < g.matrix.rows(); ++r)
        for (Eigen::Index k = 0; k < g.matrix.cols(); ++k) e.push_back({g.matrix(r, k).real(), g.matrix(r, k).imag()});
      jg["matrix"] = std::move(e);
      jg["modeled_cost"] = g.modeled_cost;
    }
    gates.push_back(std::move(jg));
  }
  j["gates"] = std::move(gates);
  const auto m = metrics(c);
  j["metrics"] = {{"cnot_count", m.cnot_count},
                  {"single_qubit_count", m.single_qubit_count},
                  {"total_gates", m.total_gates},
                  {"depth", m.depth},
                  {"parameter_count", m.parameter_count},
                  {"modeled", m.modeled()}};
  return j.dump(1);
}

Circuit circuit_from_json(const std::string& text) {
  Circuit c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.n = j.at("n").get<std::size_t>();
    c.provenance = parse_provenance(j.value("provenance", std::string("other")));
    c.global_phase = j.value("global_phase", 0.0);
    for (const auto& jg : j.at("gates")) {
      const auto kind = jg.at("kind").get<std::string>();
      auto wires = jg.at("wires").get<std::vector<std::size_t>>();
      auto param = [&](std::size_t i) { return jg.at("params").at(i).get<double>(); };
      if (wires.empty()) throw FormatError("gate without wires");
      if (kind == "rx") c.gates.push_back(Gate::rx(wires[0], param(0)));
      else if (kind == "ry") c.gates.push_back(Gate::ry(wires[0], param(0)));
      else if (kind == "rz") c.gates.push_back(Gate::rz(wires[0], param(0)));
      else if (kind == "u3") c.gates.push_back(Gate::u3(wires[0], param(0), param(1), param(2)));
      else if (kind == "cx") {
        if (wires.size() != 2) throw FormatError("cx needs two wires");
        c.gates.push_back(Gate::cnot(wires[0], wires[1]));
      } else if (kind == "opaque2q" || kind == "opaquekq") {
        const auto dim = Eigen::Index{1} << wires.size();
        const auto& e = jg.at("matrix");
        if (static_cast<Eigen::Index>(e.size()) != dim * dim) throw FormatError("opaque matrix size");
        RowMat u(dim, dim);
        for (Eigen::Index i = 0; i < dim * dim; ++i)
          u(i / dim, i % dim) = Complex(e[static_cast<std::size_t>(i)].at(0).get<double>(),
                                        e[static_cast<std::size_t>(i)].at(1).get<double>());
        c.gates.push_back(Gate::opaque(u, wires, jg.value("modeled_cost", std::size_t{0})));
      } else {
        throw FormatError("unknown gate kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid circuit JSON: ") + e.what());
  } catch (const InvalidParameter& e) {
    throw FormatError(e.what());
  }
  try {
    c.validate(1e-9);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("circuit JSON is invalid: ") + e.what());
  }
  return c;
}

}  // namespace mpsenc::circuit
