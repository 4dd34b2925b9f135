#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "involute/catalog.hpp"
#include "involute/dynamics.hpp"

namespace involute::io {

using json = nlohmann::json;

/// Malformed JSON input (structure, map, or system file).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json to_json(const Point& p) {
  json out = json::object();
  for (const auto& [k, v] : p) out[k] = v;
  return out;
}

inline json to_json(const ResidualReport& r, double tolerance = kResidualTolerance) {
  json out{{"max_residual", r.max_residual},
           {"points_evaluated", r.points_evaluated},
           {"points_skipped", r.skipped.size()},
           {"tolerance", tolerance},
           {"passed", r.passes(tolerance)}};
  if (!r.worst_point.empty()) out["worst_point"] = to_json(r.worst_point);
  json table = json::object();
  for (std::size_t i = 0; i < r.labels.size() && i < r.per_item.size(); ++i) table[r.labels[i]] = r.per_item[i];
  out["per_item"] = std::move(table);
  return out;
}

// ---------------------------------------------------------------------------
// Structures: {"chart": [...], "parameters": {...}, "bivector": {"i,j": "expr"}}

inline json to_json(const PoissonStructure& L) {
  json bivector = json::object();
  const auto& names = L.chart().names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const Expression v = L(i, j);
      if (!v.is_constant(0.0)) bivector[names[i] + "," + names[j]] = to_string(v);
    }
  }
  json params = json::object();
  for (const auto& [k, v] : L.parameters()) params[k] = v;
  return json{{"chart", names}, {"parameters", std::move(params)}, {"bivector", std::move(bivector)}};
}

namespace detail {

inline Expression parse_field(const json& j, const std::string& where) {
  if (!j.is_string()) throw FormatError(where + ": expected an expression string");
  try {
    return parse(j.get<std::string>());
  } catch (const ParseError& e) {
    throw FormatError(where + ": " + e.what());
  }
}

inline std::string coordinate_ref(const std::string& token, const Chart& chart, const std::string& key) {
  if (chart.contains(token)) return token;
  if (!token.empty() && std::all_of(token.begin(), token.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    const std::size_t i = std::stoul(token);
    if (i < chart.dimension()) return chart[i];
  }
  throw FormatError("bivector key '" + key + "': unknown coordinate '" + token + "'");
}

}  // namespace detail

/// Keys "i,j" name coordinates, or give 0-based indices. Omitted entries are 0.
inline PoissonStructure structure_from_json(const json& j) {
  if (!j.is_object()) throw FormatError("system definition must be a JSON object");
  if (!j.contains("chart") || !j["chart"].is_array()) throw FormatError("system definition needs a \"chart\" array");
  std::vector<std::string> names;
  for (const auto& n : j["chart"]) {
    if (!n.is_string()) throw FormatError("chart entries must be strings");
    names.push_back(n.get<std::string>());
  }
  Parameters params;
  if (j.contains("parameters")) {
    if (!j["parameters"].is_object()) throw FormatError("\"parameters\" must be an object");
    for (const auto& [k, v] : j["parameters"].items()) {
      if (!v.is_number()) throw FormatError("parameter '" + k + "' must be a number");
      if (!is_identifier(k)) throw FormatError("invalid parameter name '" + k + "'");
      params[k] = v.get<double>();
    }
  }
  try {
    const Chart chart(names);
    std::vector<PoissonStructure::Entry> entries;
    if (j.contains("bivector")) {
      if (!j["bivector"].is_object()) throw FormatError("\"bivector\" must be an object");
      for (const auto& [key, v] : j["bivector"].items()) {
        const auto comma = key.find(',');
        if (comma == std::string::npos) throw FormatError("bivector key '" + key + "' must have the form \"i,j\"");
        auto trim = [](std::string s) {
          s.erase(0, s.find_first_not_of(' '));
          s.erase(s.find_last_not_of(' ') + 1);
          return s;
        };
        const std::string row = detail::coordinate_ref(trim(key.substr(0, comma)), chart, key);
        const std::string col = detail::coordinate_ref(trim(key.substr(comma + 1)), chart, key);
        entries.push_back({row, col, detail::parse_field(v, "bivector '" + key + "'")});
      }
    }
    return PoissonStructure(chart, std::move(params), entries);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Maps: {"source": ref, "target": ref, "components": {coord: "expr"}}

inline json to_json(const PoissonMap& m, const json& source_ref, const json& target_ref) {
  json comps = json::object();
  const auto& names = m.target().chart().names();
  for (std::size_t i = 0; i < names.size(); ++i) comps[names[i]] = to_string(m.components()[i]);
  return json{{"name", m.name()}, {"source", source_ref}, {"target", target_ref}, {"components", std::move(comps)}};
}

/// `resolve` turns a system reference (a space name or an inline structure
/// object) into a structure.
template <class Resolver>
PoissonMap map_from_json(const json& j, Resolver&& resolve, PoissonMap::Check check = PoissonMap::Check::Verify,
                         const VerifyOptions& opts = {}) {
  if (!j.is_object() || !j.contains("source") || !j.contains("target") || !j.contains("components")) {
    throw FormatError("map definition needs \"source\", \"target\" and \"components\"");
  }
  const PoissonStructure source = resolve(j["source"]);
  const PoissonStructure target = resolve(j["target"]);
  if (!j["components"].is_object()) throw FormatError("\"components\" must be an object");
  std::map<std::string, Expression> comps;
  for (const auto& [k, v] : j["components"].items()) comps.emplace(k, detail::parse_field(v, "component '" + k + "'"));
  const std::string name = j.value("name", std::string("map"));
  try {
    return PoissonMap(name, source, target, comps, check, opts);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Families, conservation, trajectories

inline json to_json(const FunctionFamily& f) {
  json members = json::array();
  for (const auto& m : f.members()) {
    members.push_back({{"name", m.name}, {"provenance", std::string(to_string(m.provenance))}, {"body", to_string(m.body)}});
  }
  return members;
}

inline json family_report(const FunctionFamily& f, const ResidualReport& involution, std::size_t rank,
                          double tolerance = kResidualTolerance) {
  return json{{"chart", f.structure().chart().names()},
              {"path", f.path()},
              {"members", to_json(f)},
              {"involution", to_json(involution, tolerance)},
              {"independence_rank", rank}};
}

/// {function-name: drift}; failed entries map to null.
inline json to_json(const ConservationReport& r) {
  json out = json::object();
  for (const auto& e : r.entries) out[e.name] = e.failed ? json(nullptr) : json(e.drift);
  return out;
}

inline json to_json(const Trajectory& tr) {
  json samples = json::array();
  for (std::size_t s = 0; s < tr.size(); ++s) {
    json row = json::array();
    row.push_back(tr.times[s]);
    for (double v : tr.states[s]) row.push_back(v);
    samples.push_back(std::move(row));
  }
  json out{{"columns", json::array()},
           {"method", std::string(to_string(tr.method))},
           {"step", tr.step},
           {"step_count", tr.step_count},
           {"complete", tr.complete},
           {"samples", std::move(samples)}};
  out["columns"].push_back("t");
  for (const auto& c : tr.coords) out["columns"].push_back(c);
  if (!tr.complete) out["error"] = tr.error;
  return out;
}

// ---------------------------------------------------------------------------
// Whole catalog systems

inline json to_json(const catalog::ParameterSet& p) {
  return json{{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma}, {"k", p.k},
              {"delta", p.delta}, {"a", p.a},       {"r", p.r},         {"k_sites", p.k_sites}};
}

/// Bundle with every space as a system definition, maps referring to space
/// names, Casimirs, functions and families.
inline json to_json(const catalog::SystemDefinition& sys) {
  json spaces = json::object();
  for (const auto& [name, s] : sys.spaces) spaces[name] = to_json(s);
  auto ref = [&](const PoissonStructure& L) -> json {
    if (const auto n = sys.space_of(L.chart())) return *n;
    return to_json(L);
  };
  json maps = json::array();
  for (const auto& m : sys.maps) maps.push_back(to_json(m, ref(m.source()), ref(m.target())));
  json casimirs = json::object();
  for (const auto& c : sys.casimirs) casimirs[c.name] = to_string(c.body);
  json functions = json::array();
  for (const auto& f : sys.functions) {
    functions.push_back({{"name", f.name}, {"space", f.space}, {"body", to_string(f.body)}});
  }
  json families = json::object();
  for (const auto& [name, f] : sys.families) {
    json fam{{"members", to_json(f)}, {"path", f.path()}};
    if (const auto s = sys.space_of(f.structure().chart())) fam["space"] = *s;
    families[name] = std::move(fam);
  }
  json out{{"name", sys.name},
           {"parameters", to_json(sys.params)},
           {"structure", to_json(sys.structure)},
           {"casimirs", std::move(casimirs)},
           {"spaces", std::move(spaces)},
           {"maps", std::move(maps)},
           {"functions", std::move(functions)},
           {"families", std::move(families)},
           {"phase_space", sys.phase_space},
           {"hamiltonian", sys.hamiltonian}};
  if (!sys.chain_map.empty()) out["chain_map"] = sys.chain_map;
  return out;
}

/// A system definition file: a structure plus optional "casimirs" and
/// "functions" objects ({name: "expr"}). Becomes a one-space system "M".
inline catalog::SystemDefinition system_from_json(const json& j, const Parameters& overrides = {}) {
  json patched = j;
  for (const auto& [k, v] : overrides) {
    if (!patched.contains("parameters") || !patched["parameters"].contains(k)) {
      throw FormatError("unknown parameter '" + k + "'");
    }
    patched["parameters"][k] = v;
  }
  catalog::SystemDefinition sys;
  sys.name = j.value("name", std::string("custom"));
  sys.structure = structure_from_json(patched);
  sys.spaces["M"] = sys.structure;
  sys.phase_space = "M";
  auto named = [&](const char* key) {
    std::vector<NamedFunction> out;
    if (!j.contains(key)) return out;
    if (!j[key].is_object()) throw FormatError(std::string("\"") + key + "\" must be an object");
    for (const auto& [name, body] : j[key].items()) {
      const Expression e = detail::parse_field(body, std::string(key) + " '" + name + "'");
      try {
        sys.structure.check_symbols(e);
      } catch (const std::invalid_argument& err) {
        throw FormatError(std::string(key) + " '" + name + "': " + err.what());
      }
      out.push_back({name, e});
    }
    return out;
  };
  sys.casimirs = named("casimirs");
  for (const auto& f : named("functions")) sys.functions.push_back({f.name, "M", f.body});
  if (j.contains("hamiltonian")) {
    if (!j["hamiltonian"].is_string()) throw FormatError("\"hamiltonian\" must name a function");
    sys.hamiltonian = j["hamiltonian"].get<std::string>();
  }
  return sys;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path + "': " + e.what());
  }
}

}  // namespace involute::io
