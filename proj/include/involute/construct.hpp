#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "involute/poisson.hpp"

namespace involute {

using VerificationReport = ResidualReport;

/// Default residual tolerance for every structural check.
inline constexpr double kResidualTolerance = 1e-9;

struct VerifyOptions {
  SampleOptions sampling;
  double tolerance = kResidualTolerance;
};

class VerificationError : public std::runtime_error {
 public:
  VerificationError(std::string stage, const std::string& message, ResidualReport report = {})
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)), report_(std::move(report)) {}
  const std::string& stage() const { return stage_; }
  const ResidualReport& report() const { return report_; }

 private:
  std::string stage_;
  ResidualReport report_;
};

struct NamedFunction {
  std::string name;
  Expression body;
};

// ---------------------------------------------------------------------------
// Poisson maps

class PoissonMap;
ResidualReport verify_poisson_map(const PoissonMap& m, std::span<const Point> points);

/// A map between charts given by one component per target coordinate,
/// written in source coordinates. Both structures share one parameter set.
class PoissonMap {
 public:
  enum class Check { Verify, Defer };

  PoissonMap() = default;

  PoissonMap(std::string name, const PoissonStructure& source, const PoissonStructure& target,
             std::vector<Expression> components, Check check = Check::Verify, const VerifyOptions& opts = {})
      : name_(std::move(name)), components_(std::move(components)) {
    const Parameters params = merge_parameters(source.parameters(), target.parameters());
    source_ = with_parameters(source, params);
    target_ = with_parameters(target, params);
    if (components_.size() != target_.dimension()) {
      throw std::invalid_argument("map '" + name_ + "': need one component per target coordinate");
    }
    for (const auto& c : components_) source_.check_symbols(c);
    if (check == Check::Verify) {
      const auto points = sample_source(opts.sampling);
      auto report = verify_poisson_map(*this, points);
      if (!report.passes(opts.tolerance)) {
        throw VerificationError("map '" + name_ + "'", "not a Poisson map (residual " +
                                                           format_number(report.max_residual) + ")",
                                std::move(report));
      }
    }
  }

  PoissonMap(std::string name, const PoissonStructure& source, const PoissonStructure& target,
             const std::map<std::string, Expression>& components, Check check = Check::Verify,
             const VerifyOptions& opts = {})
      : PoissonMap(std::move(name), source, target, ordered(target, components), check, opts) {}

  const std::string& name() const { return name_; }
  const PoissonStructure& source() const { return source_; }
  const PoissonStructure& target() const { return target_; }
  const std::vector<Expression>& components() const { return components_; }
  const Expression& component(std::string_view target_coord) const {
    const auto i = target_.chart().index_of(target_coord);
    if (!i) throw std::invalid_argument("unknown target coordinate '" + std::string(target_coord) + "'");
    return components_[*i];
  }

  /// target coordinate ↦ component, for substitution.
  std::map<std::string, Expression> substitution() const {
    std::map<std::string, Expression> out;
    for (std::size_t i = 0; i < components_.size(); ++i) out.emplace(target_.chart()[i], components_[i]);
    return out;
  }

  /// Source points at which every component evaluates.
  std::vector<Point> sample_source(const SampleOptions& opts = {}, std::span<const Expression> extra_guards = {}) const {
    std::vector<Expression> guards = components_;
    guards.insert(guards.end(), extra_guards.begin(), extra_guards.end());
    return source_.sample(opts, guards);
  }

  static PoissonStructure with_parameters(const PoissonStructure& L, const Parameters& params) {
    std::vector<PoissonStructure::Entry> entries;
    const auto& names = L.chart().names();
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t j = i + 1; j < names.size(); ++j) {
        if (!L(i, j).is_constant(0.0)) entries.push_back({names[i], names[j], L(i, j)});
      }
    }
    return PoissonStructure(L.chart(), params, entries);
  }

 private:
  static std::vector<Expression> ordered(const PoissonStructure& target,
                                         const std::map<std::string, Expression>& components) {
    std::vector<Expression> out;
    for (const auto& n : target.chart().names()) {
      const auto it = components.find(n);
      if (it == components.end()) throw std::invalid_argument("missing component for '" + n + "'");
      out.push_back(it->second);
    }
    if (components.size() != out.size()) throw std::invalid_argument("component for unknown target coordinate");
    return out;
  }

  std::string name_;
  PoissonStructure source_;
  PoissonStructure target_;
  std::vector<Expression> components_;
};

/// f ∘ m, by substituting m's components for the target coordinates.
inline Expression pullback(const Expression& f, const PoissonMap& m) {
  m.target().check_symbols(f);
  return simplify(substitute(f, m.substitution()));
}

/// For every target pair (i,j): {x_i∘m, x_j∘m}_source − Λ_target^{ij}∘m.
inline ResidualReport verify_poisson_map(const PoissonMap& m, std::span<const Point> points) {
  const auto& target = m.target();
  const auto& names = target.chart().names();
  const auto subst = m.substitution();
  std::vector<Expression> residuals;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const Expression lhs = bracket(m.components()[i], m.components()[j], m.source());
      const Expression rhs = substitute(target(i, j), subst);
      residuals.push_back(lhs - rhs);
      labels.push_back(names[i] + "," + names[j]);
    }
  }
  auto report = max_abs_residual(residuals, points, std::move(labels));
  if (residuals.empty()) report.points_evaluated = points.size();
  return report;
}

inline PoissonMap identity_map(const PoissonStructure& L, std::string name = "id") {
  std::vector<Expression> comps;
  for (const auto& n : L.chart().names()) comps.push_back(variable(n));
  return PoissonMap(std::move(name), L, L, std::move(comps), PoissonMap::Check::Defer);
}

/// outer ∘ inner, from inner.source() to outer.target().
inline PoissonMap compose(const PoissonMap& outer, const PoissonMap& inner,
                          PoissonMap::Check check = PoissonMap::Check::Verify, const VerifyOptions& opts = {}) {
  if (!(outer.source().chart() == inner.target().chart())) {
    throw std::invalid_argument("compose: '" + inner.name() + "' does not land on the source of '" + outer.name() + "'");
  }
  std::vector<Expression> comps;
  const auto subst = inner.substitution();
  for (const auto& c : outer.components()) comps.push_back(simplify(substitute(c, subst)));
  return PoissonMap(outer.name() + "." + inner.name(), inner.source(), outer.target(), std::move(comps), check, opts);
}

/// φ₁ × … × φₙ between the product structures.
inline PoissonMap product_map(std::span<const PoissonMap> maps, PoissonMap::Check check = PoissonMap::Check::Verify,
                              const VerifyOptions& opts = {}) {
  if (maps.empty()) throw std::invalid_argument("product_map needs at least one map");
  if (maps.size() == 1) return maps.front();
  std::vector<PoissonStructure> sources, targets;
  std::vector<Expression> comps;
  std::string name;
  for (std::size_t f = 0; f < maps.size(); ++f) {
    const auto& m = maps[f];
    sources.push_back(m.source());
    targets.push_back(m.target());
    const auto renaming = factor_renaming(m.source().chart(), f);
    for (const auto& c : m.components()) comps.push_back(rename(c, renaming));
    name += (f == 0 ? "" : "x") + m.name();
  }
  return PoissonMap(name, product(sources), product(targets), std::move(comps), check, opts);
}

// ---------------------------------------------------------------------------
// Families in involution

enum class Provenance { Seed, PulledBack, CasimirFactor };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::Seed: return "seed";
    case Provenance::PulledBack: return "pulled-back";
    case Provenance::CasimirFactor: return "casimir-factor";
  }
  return "";
}

struct FamilyMember {
  std::string name;
  Expression body;
  Provenance provenance = Provenance::Seed;
};

/// Functions claimed to be pairwise in involution on one structure.
class FunctionFamily {
 public:
  FunctionFamily() = default;
  explicit FunctionFamily(PoissonStructure structure) : structure_(std::move(structure)) {}

  /// Adds a member unless one with the same printed form is present.
  /// Returns whether it was added.
  bool add(FamilyMember m) {
    structure_.check_symbols(m.body);
    const std::string key = to_string(m.body);
    if (!printed_.insert(key).second) return false;
    members_.push_back(std::move(m));
    return true;
  }

  const PoissonStructure& structure() const { return structure_; }
  const std::vector<FamilyMember>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  const FamilyMember& operator[](std::size_t i) const { return members_.at(i); }
  const FamilyMember* find(std::string_view name) const {
    for (const auto& m : members_) {
      if (m.name == name) return &m;
    }
    return nullptr;
  }

  std::vector<Expression> bodies() const {
    std::vector<Expression> out;
    for (const auto& m : members_) out.push_back(m.body);
    return out;
  }

  /// Construction history, one entry per recursion step (the chain path).
  const std::vector<std::string>& path() const { return path_; }
  void record_step(std::string step) { path_.push_back(std::move(step)); }

 private:
  PoissonStructure structure_;
  std::vector<FamilyMember> members_;
  std::set<std::string> printed_;
  std::vector<std::string> path_;
};

/// max over pairs and points of |{f_i, f_j}|.
inline VerificationReport check_involution(const FunctionFamily& f, const PoissonStructure& L,
                                           std::span<const Point> points) {
  std::vector<Expression> brackets;
  std::vector<std::string> labels;
  const auto& ms = f.members();
  for (std::size_t i = 0; i < ms.size(); ++i) {
    for (std::size_t j = i + 1; j < ms.size(); ++j) {
      brackets.push_back(bracket(ms[i].body, ms[j].body, L));
      labels.push_back(ms[i].name + "|" + ms[j].name);
    }
  }
  auto report = max_abs_residual(brackets, points, std::move(labels));
  if (brackets.empty()) report.points_evaluated = points.size();
  return report;
}

inline VerificationReport check_involution(const FunctionFamily& f, std::span<const Point> points) {
  return check_involution(f, f.structure(), points);
}

/// Rank of a dense row-major matrix by Gaussian elimination with complete
/// pivoting; pivots below rel_tol × (largest pivot) count as zero.
inline std::size_t numeric_rank(std::vector<double> a, std::size_t rows, std::size_t cols, double rel_tol) {
  std::size_t rank = 0;
  double first_pivot = 0.0;
  std::vector<std::size_t> col_order(cols);
  for (std::size_t c = 0; c < cols; ++c) col_order[c] = c;
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * cols + c]; };
  for (std::size_t step = 0; step < std::min(rows, cols); ++step) {
    std::size_t pr = step, pc = step;
    double best = 0.0;
    for (std::size_t r = step; r < rows; ++r) {
      for (std::size_t c = step; c < cols; ++c) {
        if (std::fabs(at(r, c)) > best) {
          best = std::fabs(at(r, c));
          pr = r;
          pc = c;
        }
      }
    }
    if (step == 0) first_pivot = best;
    if (best == 0.0 || best <= rel_tol * first_pivot) break;
    for (std::size_t c = 0; c < cols; ++c) std::swap(at(step, c), at(pr, c));
    for (std::size_t r = 0; r < rows; ++r) std::swap(at(r, step), at(r, pc));
    for (std::size_t r = step + 1; r < rows; ++r) {
      const double factor = at(r, step) / at(step, step);
      for (std::size_t c = step; c < cols; ++c) at(r, c) -= factor * at(step, c);
    }
    ++rank;
  }
  return rank;
}

/// Max over points of the numeric rank of the family's Jacobian.
inline std::size_t independence_rank(const FunctionFamily& f, std::span<const Point> points, double rel_tol = 1e-8) {
  if (points.empty()) throw std::invalid_argument("independence_rank needs at least one point");
  const auto& names = f.structure().chart().names();
  std::vector<Expression> grads;
  for (const auto& m : f.members()) {
    for (const auto& n : names) grads.push_back(differentiate(m.body, n));
  }
  const auto slots = keys_of(points.front());
  std::vector<CompiledExpression> compiled;
  for (const auto& g : grads) compiled.emplace_back(g, slots);
  std::size_t best = 0;
  for (const auto& p : points) {
    const auto values = values_of(p);
    std::vector<double> jac(grads.size());
    try {
      for (std::size_t i = 0; i < grads.size(); ++i) jac[i] = compiled[i](values);
    } catch (const EvalError&) {
      continue;
    }
    best = std::max(best, numeric_rank(std::move(jac), f.size(), names.size(), rel_tol));
  }
  return best;
}

// ---------------------------------------------------------------------------
// The recursion F_{n+1} = (F_n ∘ Φ_n) ∪ C_{n+1}

/// One recursion step: pull every member of `f` back through `m` and adjoin
/// the supplied Casimir-factor functions on m.source(). Each Casimir is
/// checked first; the result is checked for involution.
inline FunctionFamily extend_family(const FunctionFamily& f, const PoissonMap& m,
                                    const std::vector<NamedFunction>& casimirs, const VerifyOptions& opts = {}) {
  if (!(f.structure().chart() == m.target().chart())) {
    throw std::invalid_argument("extend_family: family does not live on the map's target");
  }
  std::vector<Expression> guards;
  for (const auto& c : casimirs) guards.push_back(c.body);
  const auto points = m.sample_source(opts.sampling, guards);
  for (const auto& c : casimirs) {
    auto report = is_casimir(c.body, m.source(), points);
    if (!report.passes(opts.tolerance)) {
      throw VerificationError("casimir '" + c.name + "'", "not a Casimir on the map source (residual " +
                                                             format_number(report.max_residual) + ")",
                              std::move(report));
    }
  }
  FunctionFamily out(m.source());
  for (const auto& step : f.path()) out.record_step(step);
  out.record_step(m.name());
  for (const auto& member : f.members()) {
    out.add({member.name + "." + m.name(), pullback(member.body, m), Provenance::PulledBack});
  }
  for (const auto& c : casimirs) out.add({c.name, c.body, Provenance::CasimirFactor});
  auto report = check_involution(out, points);
  if (!report.passes(opts.tolerance)) {
    throw VerificationError("involution after '" + m.name() + "'",
                            "family not in involution (residual " + format_number(report.max_residual) + ")",
                            std::move(report));
  }
  return out;
}

/// Recursion pattern. Multiplication: Φ: M×M → M, levels M^n.
/// Action: Φ: M×N → N, levels M^(n−1)×N. `product_map` must be a map whose
/// source is product(M, M) (resp. product(M, N)).
struct ChainSpec {
  enum class Kind { Multiplication, Action };
  Kind kind = Kind::Multiplication;
  PoissonStructure base;    // M
  PoissonStructure acted;   // N (action chains only)
  PoissonMap phi;
  std::vector<NamedFunction> base_casimirs;   // Casimir basis of M
  std::vector<NamedFunction> acted_casimirs;  // Casimir basis of N
};

namespace detail {

inline std::vector<PoissonStructure> chain_factors(const ChainSpec& spec, std::size_t level) {
  if (spec.kind == ChainSpec::Kind::Multiplication) return std::vector<PoissonStructure>(level, spec.base);
  std::vector<PoissonStructure> out(level - 1, spec.base);
  out.push_back(spec.acted);
  return out;
}

/// Φ_level: level+1 factors → level factors, left-nested for multiplication
/// (Φ × Id × …), acting with the last M for actions (Id × … × Φ).
inline PoissonMap chain_map(const ChainSpec& spec, std::size_t level, const VerifyOptions& opts) {
  const auto src_factors = chain_factors(spec, level + 1);
  const auto tgt_factors = chain_factors(spec, level);
  // A one-factor level is the bare M (or N), without renamed coordinates.
  const PoissonStructure source = product(src_factors);
  const PoissonStructure target = tgt_factors.size() == 1 ? tgt_factors.front() : product(tgt_factors);
  const auto tsuffix = [&](std::size_t t) { return tgt_factors.size() == 1 ? std::string() : std::to_string(t + 1); };
  const bool mult = spec.kind == ChainSpec::Kind::Multiplication;
  // Source factor indices consumed by Φ, and the target factor it produces.
  const std::size_t phi_first = mult ? 0 : level - 1;
  const std::size_t phi_target = mult ? 0 : level - 1;
  std::map<std::string, Expression> phi_rename;
  const PoissonStructure& second = mult ? spec.base : spec.acted;
  for (const auto& c : spec.base.chart().names()) {
    phi_rename.emplace(c + "1", variable(c + std::to_string(phi_first + 1)));
  }
  for (const auto& c : second.chart().names()) {
    phi_rename.emplace(c + "2", variable(c + std::to_string(phi_first + 2)));
  }
  std::map<std::string, Expression> comps;
  for (std::size_t t = 0; t < tgt_factors.size(); ++t) {
    const auto& factor = tgt_factors[t];
    for (const auto& c : factor.chart().names()) {
      const std::string tname = c + tsuffix(t);
      if (t == phi_target) {
        comps.emplace(tname, substitute(spec.phi.component(c), phi_rename));
      } else {
        const std::size_t s = t < phi_target ? t : t + 1;
        comps.emplace(tname, variable(c + std::to_string(s + 1)));
      }
    }
  }
  std::string label = "Phi_" + std::to_string(level);
  return PoissonMap(label, source, target, comps, PoissonMap::Check::Verify, opts);
}

}  // namespace detail

/// Builds F_depth on the depth-fold product by repeated extend_family. Any
/// failed verification aborts with the failing stage named.
inline FunctionFamily build_chain(const FunctionFamily& seed, const ChainSpec& spec, std::size_t depth,
                                  const VerifyOptions& opts = {}) {
  if (depth < 1) throw std::invalid_argument("build_chain: depth must be at least 1");
  FunctionFamily family = seed;
  for (std::size_t level = 1; level < depth; ++level) {
    const std::string stage = "stage " + std::to_string(level + 1);
    try {
      const PoissonMap step = detail::chain_map(spec, level, opts);
      std::vector<NamedFunction> casimirs;
      const auto factors = detail::chain_factors(spec, level + 1);
      for (std::size_t f = 0; f < factors.size(); ++f) {
        const bool is_acted = spec.kind == ChainSpec::Kind::Action && f + 1 == factors.size();
        const auto& basis = is_acted ? spec.acted_casimirs : spec.base_casimirs;
        for (const auto& c : basis) {
          casimirs.push_back({c.name + "@" + std::to_string(f + 1), lift(c.body, factors[f].chart(), f)});
        }
      }
      family = extend_family(family, step, casimirs, opts);
    } catch (const VerificationError& e) {
      throw VerificationError(stage, e.what(), e.report());
    }
  }
  return family;
}

}  // namespace involute
