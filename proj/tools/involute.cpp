// involute: check, family, simulate, export.
// Exit codes: 0 success, 1 check or drift failure, 2 usage or input error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "involute/catalog.hpp"
#include "involute/dynamics.hpp"
#include "involute/io.hpp"

namespace {

using namespace involute;
using io::json;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  std::string system;
  std::vector<std::string> params;
  std::size_t points = 100;
  std::string seed = "0xC0FFEE";
  double tolerance = kResidualTolerance;
  std::string out;
  std::string format = "json";

  // check
  std::string what = "all";
  std::vector<std::string> functions;
  std::string space;

  // family
  std::size_t depth = 2;

  // simulate
  std::string hamiltonian;
  std::string x0;
  double t_end = 10.0;
  double step = 1e-3;
  std::string method = "rk4";
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t thin = 1;
  double drift_tol = 1e-6;
  std::string report;
};

std::uint64_t parse_seed(const std::string& s) {
  std::string digits = s;
  if (digits.starts_with("0x") || digits.starts_with("0X")) digits = digits.substr(2);
  if (digits.empty() || digits.find_first_not_of("0123456789abcdefABCDEF") != std::string::npos) {
    throw UsageError("--seed expects a hexadecimal value, got '" + s + "'");
  }
  return std::stoull(digits, nullptr, 16);
}

double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw UsageError(what + ": '" + s + "' is not a number");
  return v;
}

std::pair<std::string, double> parse_assignment(const std::string& s, const std::string& what) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError(what + " expects name=value, got '" + s + "'");
  return {s.substr(0, eq), parse_double(s.substr(eq + 1), what)};
}

SampleOptions sampling(const RunConfig& cfg) {
  SampleOptions opts;
  opts.count = cfg.points;
  opts.seed = parse_seed(cfg.seed);
  return opts;
}

VerifyOptions verify_options(const RunConfig& cfg) { return {sampling(cfg), cfg.tolerance}; }

bool is_file_reference(const std::string& s) {
  return s.ends_with(".json") || std::filesystem::exists(s);
}

catalog::SystemDefinition load_system(const RunConfig& cfg) {
  if (cfg.system.empty()) throw UsageError("--system is required");
  if (is_file_reference(cfg.system)) {
    Parameters overrides;
    for (const auto& p : cfg.params) overrides.insert(parse_assignment(p, "--param"));
    return io::system_from_json(io::read_json_file(cfg.system), overrides);
  }
  const auto name = catalog::system_from_name(cfg.system);
  if (!name) throw UsageError("unknown system '" + cfg.system + "'");
  catalog::ParameterSet ps;
  for (const auto& p : cfg.params) {
    const auto [k, v] = parse_assignment(p, "--param");
    try {
      ps.set(k, v);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  return catalog::get_system(*name, ps);
}

void emit(const RunConfig& cfg, const json& j) {
  const std::string text = j.dump(2) + "\n";
  if (cfg.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream os(cfg.out, std::ios::binary);
  if (!os) throw UsageError("cannot write '" + cfg.out + "'");
  os << text;
}

/// A function argument: either a name known to the system or an expression.
NamedFunction resolve_function(const catalog::SystemDefinition& sys, const std::string& text,
                               std::string* space = nullptr) {
  if (sys.has_function(text)) {
    const auto& f = sys.function(text);
    if (space) *space = f.space;
    return {f.name, f.body};
  }
  for (const auto& c : sys.casimirs) {
    if (c.name == text) {
      if (space) *space = "M";
      return c;
    }
  }
  try {
    return {text, parse(text)};
  } catch (const ParseError& e) {
    throw UsageError("function '" + text + "': " + e.what());
  }
}

const PoissonStructure& space_or_base(const catalog::SystemDefinition& sys, const std::string& space) {
  if (space.empty()) return sys.structure;
  try {
    return sys.space(space);
  } catch (const std::out_of_range& e) {
    throw UsageError(e.what());
  }
}

std::vector<Expression> domain_guards(const catalog::SystemDefinition& sys, const std::string& space) {
  const auto it = sys.domains.find(space.empty() ? "M" : space);
  return it == sys.domains.end() ? std::vector<Expression>{} : it->second;
}

// ---------------------------------------------------------------------------

int cmd_check(const RunConfig& cfg) {
  const auto sys = load_system(cfg);
  const auto vopts = verify_options(cfg);
  const auto& what = cfg.what;
  if (what != "all" && what != "jacobi" && what != "casimir" && what != "maps" && what != "involution") {
    throw UsageError("--what must be one of all, jacobi, casimir, maps, involution");
  }
  json checks = json::array();
  bool passed = true;
  auto record = [&](const std::string& kind, const std::string& subject, const ResidualReport& r) {
    json entry = io::to_json(r, cfg.tolerance);
    entry["kind"] = kind;
    entry["subject"] = subject;
    passed = passed && r.passes(cfg.tolerance);
    checks.push_back(std::move(entry));
  };

  const PoissonStructure& L = space_or_base(sys, cfg.space);
  const auto guards = domain_guards(sys, cfg.space);
  if (what == "all" || what == "jacobi") {
    if (cfg.space.empty() && what == "all") {
      for (const auto& [name, s] : sys.spaces) {
        record("jacobi", name, jacobi_residual(s, s.sample(vopts.sampling, domain_guards(sys, name))));
      }
    } else {
      record("jacobi", cfg.space.empty() ? "M" : cfg.space, jacobi_residual(L, L.sample(vopts.sampling, guards)));
    }
  }
  if (what == "all" || what == "casimir") {
    std::vector<NamedFunction> fns;
    if (!cfg.functions.empty()) {
      for (const auto& f : cfg.functions) fns.push_back(resolve_function(sys, f));
    } else {
      fns = sys.casimirs;
    }
    for (const auto& f : fns) {
      try {
        L.check_symbols(f.body);
      } catch (const std::invalid_argument& e) {
        throw UsageError("function '" + f.name + "': " + e.what());
      }
      std::vector<Expression> g = guards;
      g.push_back(f.body);
      record("casimir", f.name, is_casimir(f.body, L, L.sample(vopts.sampling, g)));
    }
  }
  if (what == "all" || what == "maps") {
    for (const auto& m : sys.maps) record("poisson-map", m.name(), verify_poisson_map(m, m.sample_source(vopts.sampling)));
  }
  if (what == "all" || what == "involution") {
    for (const auto& [name, f] : sys.families) {
      const auto points = f.structure().sample(vopts.sampling, f.bodies());
      record("involution", name, check_involution(f, points));
    }
  }
  emit(cfg, json{{"system", sys.name}, {"checks", std::move(checks)}, {"passed", passed}});
  return passed ? kOk : kCheckFailed;
}

int cmd_family(const RunConfig& cfg) {
  const auto sys = load_system(cfg);
  if (cfg.depth < 1) throw UsageError("--depth must be at least 1");
  const auto vopts = verify_options(cfg);
  FunctionFamily seed(sys.structure);
  if (!cfg.functions.empty()) {
    for (const auto& text : cfg.functions) {
      const auto eq = text.find('=');
      NamedFunction f;
      if (eq != std::string::npos && eq > 0 && is_identifier(text.substr(0, eq))) {
        try {
          f = {text.substr(0, eq), parse(text.substr(eq + 1))};
        } catch (const ParseError& e) {
          throw UsageError("seed '" + text + "': " + e.what());
        }
      } else {
        f = resolve_function(sys, text);
      }
      try {
        seed.add({f.name, f.body, Provenance::Seed});
      } catch (const std::invalid_argument& e) {
        throw UsageError("seed '" + f.name + "': " + e.what());
      }
    }
  } else if (sys.families.contains("F1")) {
    seed = sys.family("F1");
  } else {
    for (const auto& c : sys.casimirs) seed.add({c.name, c.body, Provenance::Seed});
  }
  FunctionFamily family = seed;
  if (cfg.depth > 1) {
    const auto spec = sys.chain();
    if (!spec) throw UsageError("system '" + sys.name + "' has no multiplication map for chains");
    family = build_chain(seed, *spec, cfg.depth, vopts);
  }
  const auto points = family.structure().sample(vopts.sampling, family.bodies());
  const auto report = check_involution(family, points);
  const std::size_t rank = family.size() == 0 ? 0 : independence_rank(family, points);
  json out = io::family_report(family, report, rank, cfg.tolerance);
  out["system"] = sys.name;
  out["depth"] = cfg.depth;
  emit(cfg, out);
  return report.passes(cfg.tolerance) ? kOk : kCheckFailed;
}

Point parse_x0(const std::string& text, const PoissonStructure& L) {
  Point x0;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (item.empty()) continue;
    const auto [k, v] = parse_assignment(item, "--x0");
    if (!L.chart().contains(k)) throw UsageError("--x0: '" + k + "' is not a coordinate of the phase space");
    x0[k] = v;
  }
  for (const auto& n : L.chart().names()) {
    if (!x0.contains(n)) throw UsageError("--x0: missing value for '" + n + "'");
  }
  return x0;
}

int cmd_simulate(const RunConfig& cfg) {
  const auto sys = load_system(cfg);
  if (cfg.hamiltonian.empty() && sys.hamiltonian.empty()) throw UsageError("--hamiltonian is required");
  if (!(cfg.t_end > 0.0)) throw UsageError("--t-end must be positive");
  if (!(cfg.step > 0.0)) throw UsageError("--step must be positive");
  if (cfg.format != "csv" && cfg.format != "json") throw UsageError("--format must be csv or json");
  std::string space;
  const NamedFunction H = resolve_function(sys, cfg.hamiltonian.empty() ? sys.hamiltonian : cfg.hamiltonian, &space);
  if (!cfg.space.empty()) space = cfg.space;
  if (space.empty()) space = sys.phase_space.empty() ? "M" : sys.phase_space;
  const PoissonStructure& L = space_or_base(sys, space);
  try {
    L.check_symbols(H.body);
  } catch (const std::invalid_argument& e) {
    throw UsageError("hamiltonian: " + std::string(e.what()));
  }
  const Point x0 = parse_x0(cfg.x0, L);

  IntegratorOptions opts;
  if (cfg.method == "rk4") {
    opts.method = Method::RK4;
  } else if (cfg.method == "rkf45") {
    opts.method = Method::RKF45;
  } else {
    throw UsageError("--method must be rk4 or rkf45");
  }
  opts.step = cfg.step;
  opts.rtol = cfg.rtol;
  opts.atol = cfg.atol;
  opts.thin = cfg.thin;
  const auto tr = integrate(hamiltonian_field(H.body, L), x0, cfg.t_end, opts);

  // Monitor the Hamiltonian and every named function on the same space.
  std::vector<NamedFunction> monitored{{"hamiltonian", H.body}};
  for (const auto& f : sys.functions) {
    if (f.space == space) monitored.push_back({f.name, f.body});
  }
  if (space == "M") {
    for (const auto& c : sys.casimirs) monitored.push_back(c);
  }
  for (const auto& text : cfg.functions) {
    const auto f = resolve_function(sys, text);
    try {
      L.check_symbols(f.body);
    } catch (const std::invalid_argument& e) {
      throw UsageError("function '" + f.name + "': " + e.what());
    }
    monitored.push_back(f);
  }
  const auto conservation = conservation_report(tr, monitored);

  if (!cfg.out.empty()) {
    std::ofstream os(cfg.out, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + cfg.out + "'");
    if (cfg.format == "csv") {
      write_trajectory_csv(os, tr);
    } else {
      os << io::to_json(tr).dump(2) << "\n";
    }
  }
  const bool ok = tr.complete && conservation.all_below(cfg.drift_tol);
  json summary{{"system", sys.name},
               {"space", space},
               {"hamiltonian", to_string(H.body)},
               {"method", std::string(to_string(tr.method))},
               {"step", tr.step},
               {"step_count", tr.step_count},
               {"samples", tr.size()},
               {"complete", tr.complete},
               {"drift_tolerance", cfg.drift_tol},
               {"conservation", io::to_json(conservation)},
               {"passed", ok}};
  if (!tr.complete) summary["error"] = tr.error;
  const std::string text = summary.dump(2) + "\n";
  if (cfg.report.empty()) {
    std::cout << text;
  } else {
    std::ofstream os(cfg.report, std::ios::binary);
    if (!os) throw UsageError("cannot write '" + cfg.report + "'");
    os << text;
  }
  return ok ? kOk : kCheckFailed;
}

int cmd_export(const RunConfig& cfg) {
  const auto sys = load_system(cfg);
  emit(cfg, io::to_json(sys));
  return kOk;
}

void add_common(CLI::App* sub, RunConfig& cfg) {
  sub->add_option("--system", cfg.system, "catalog name or system-definition JSON file")->required();
  sub->add_option("--param", cfg.params, "parameter override name=value (repeatable)");
  sub->add_option("--points", cfg.points, "sample points per check")->check(CLI::PositiveNumber);
  sub->add_option("--seed", cfg.seed, "sampling seed (hex)");
  sub->add_option("--tol", cfg.tolerance, "residual tolerance")->check(CLI::PositiveNumber);
  sub->add_option("--out", cfg.out, "output path (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Poisson structures, involutive families and Hamiltonian flows"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* check = app.add_subcommand("check", "verify structures, Casimirs, maps and families");
  add_common(check, cfg);
  check->add_option("--what", cfg.what, "all | jacobi | casimir | maps | involution");
  check->add_option("--function", cfg.functions, "function name or expression (repeatable)");
  check->add_option("--space", cfg.space, "space to check on (default: base structure)");

  auto* family = app.add_subcommand("family", "build a chain family");
  add_common(family, cfg);
  family->add_option("--depth", cfg.depth, "chain depth");
  family->add_option("--function", cfg.functions, "seed member, name=expr or expr (repeatable)");

  auto* simulate = app.add_subcommand("simulate", "integrate a Hamiltonian flow");
  add_common(simulate, cfg);
  simulate->add_option("--hamiltonian", cfg.hamiltonian, "function name or expression");
  simulate->add_option("--x0", cfg.x0, "initial point name=value,...")->required();
  simulate->add_option("--t-end", cfg.t_end, "final time");
  simulate->add_option("--step", cfg.step, "rk4 step or rkf45 initial step");
  simulate->add_option("--method", cfg.method, "rk4 | rkf45");
  simulate->add_option("--rtol", cfg.rtol, "rkf45 relative tolerance");
  simulate->add_option("--atol", cfg.atol, "rkf45 absolute tolerance");
  simulate->add_option("--thin", cfg.thin, "keep every n-th sample")->check(CLI::PositiveNumber);
  simulate->add_option("--format", cfg.format, "trajectory format: csv | json");
  simulate->add_option("--function", cfg.functions, "extra monitored function (repeatable)");
  simulate->add_option("--space", cfg.space, "phase space (default: the Hamiltonian's)");
  simulate->add_option("--drift-tol", cfg.drift_tol, "maximum allowed relative drift");
  simulate->add_option("--report", cfg.report, "conservation report path (default stdout)");

  auto* exp = app.add_subcommand("export", "write the system as JSON");
  add_common(exp, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (check->parsed()) return cmd_check(cfg);
    if (family->parsed()) return cmd_family(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    return cmd_export(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const io::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const catalog::InvalidParameters& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const VerificationError& e) {
    std::cerr << "verification failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
