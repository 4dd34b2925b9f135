#pragma once

#include <algorithm>
#include <cctype>
#include <optional>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "involute/expr.hpp"

namespace involute {

/// Named structure parameters (alpha, k, ...). Bound at evaluation time.
using Parameters = std::map<std::string, double>;

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  const auto alpha = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
  if (!alpha(s.front())) return false;
  return std::all_of(s.begin(), s.end(),
                     [&](char c) { return alpha(c) || std::isdigit(static_cast<unsigned char>(c)); });
}

/// Ordered list of distinct coordinate names.
class Chart {
 public:
  Chart() = default;
  Chart(std::vector<std::string> names) : names_(std::move(names)) {  // NOLINT: implicit from list
    if (names_.empty()) throw std::invalid_argument("chart must have at least one coordinate");
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (!is_identifier(n)) throw std::invalid_argument("invalid coordinate name '" + n + "'");
      if (!seen.insert(n).second) throw std::invalid_argument("duplicate coordinate name '" + n + "'");
    }
  }
  Chart(std::initializer_list<std::string> names) : Chart(std::vector<std::string>(names)) {}

  std::size_t dimension() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& operator[](std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }
  bool contains(std::string_view name) const { return index_of(name).has_value(); }

  bool operator==(const Chart&) const = default;

 private:
  std::vector<std::string> names_;
};

/// Maximum absolute residual of a set of expressions over sample points.
struct ResidualReport {
  double max_residual = 0.0;
  Point worst_point;
  std::vector<std::string> labels;
  std::vector<double> per_item;
  std::size_t points_evaluated = 0;
  std::vector<std::string> skipped;

  bool passes(double tolerance) const { return points_evaluated > 0 && max_residual < tolerance; }
};

inline std::vector<std::string> keys_of(const Point& p) {
  std::vector<std::string> out;
  out.reserve(p.size());
  for (const auto& [k, v] : p) out.push_back(k);
  return out;
}

inline std::vector<double> values_of(const Point& p) {
  std::vector<double> out;
  out.reserve(p.size());
  for (const auto& [k, v] : p) out.push_back(v);
  return out;
}

/// Evaluates every expression at every point and records max |value|. A
/// point at which any expression fails to evaluate is skipped and reported.
inline ResidualReport max_abs_residual(std::span<const Expression> exprs, std::span<const Point> points,
                                       std::vector<std::string> labels = {}) {
  ResidualReport report;
  report.labels = std::move(labels);
  report.per_item.assign(exprs.size(), 0.0);
  if (points.empty()) return report;
  const auto slots = keys_of(points.front());
  std::vector<CompiledExpression> compiled;
  compiled.reserve(exprs.size());
  for (const auto& e : exprs) compiled.emplace_back(e, slots);
  std::vector<double> row(exprs.size());
  for (const auto& p : points) {
    if (p.size() != slots.size()) throw std::invalid_argument("sample points have inconsistent bindings");
    const auto values = values_of(p);
    try {
      for (std::size_t i = 0; i < exprs.size(); ++i) row[i] = std::fabs(compiled[i](values));
    } catch (const EvalError& err) {
      report.skipped.push_back(err.what());
      continue;
    }
    ++report.points_evaluated;
    for (std::size_t i = 0; i < exprs.size(); ++i) {
      report.per_item[i] = std::max(report.per_item[i], row[i]);
      if (report.worst_point.empty() || row[i] > report.max_residual) {
        report.max_residual = row[i];
        report.worst_point = p;
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Sampling

struct SampleOptions {
  std::size_t count = 100;
  std::uint64_t seed = 0xC0FFEE;
  double lower = -2.0;
  double upper = 2.0;
  std::size_t max_retries = 1000;
};

/// Uniform points in [lower, upper]^n over the chart, with the parameters
/// bound. A candidate on which any guard fails to evaluate (or `accept`
/// rejects) is redrawn.
inline std::vector<Point> sample_points(const Chart& chart, const Parameters& params, const SampleOptions& opts,
                                        std::span<const Expression> guards = {},
                                        const std::function<bool(const Point&)>& accept = {}) {
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> dist(opts.lower, opts.upper);
  std::vector<Point> out;
  out.reserve(opts.count);
  for (std::size_t n = 0; n < opts.count; ++n) {
    bool ok = false;
    for (std::size_t attempt = 0; attempt <= opts.max_retries && !ok; ++attempt) {
      Point p = params;
      for (const auto& name : chart.names()) p[name] = dist(rng);
      try {
        for (const auto& g : guards) (void)evaluate(g, p);
        ok = !accept || accept(p);
      } catch (const EvalError&) {
        ok = false;
      }
      if (ok) out.push_back(std::move(p));
    }
    if (!ok) throw std::runtime_error("sampling: no admissible point after max retries");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poisson structures

/// A bivector Λ on a single chart, stored as its strict upper triangle. The
/// lower triangle is the negation and the diagonal is zero by construction.
class PoissonStructure {
 public:
  struct Entry {
    std::string row;
    std::string col;
    Expression value;
  };

  PoissonStructure() = default;

  PoissonStructure(Chart chart, Parameters params, const std::vector<Entry>& entries = {})
      : chart_(std::move(chart)), params_(std::move(params)) {
    const std::size_t n = chart_.dimension();
    upper_.assign(n * (n - 1) / 2, constant(0.0));
    for (const auto& [name, v] : params_) {
      if (chart_.contains(name)) throw std::invalid_argument("parameter '" + name + "' clashes with a coordinate");
    }
    for (const auto& e : entries) {
      const auto i = chart_.index_of(e.row);
      const auto j = chart_.index_of(e.col);
      if (!i || !j) throw std::invalid_argument("bivector entry refers to unknown coordinate");
      if (*i == *j) {
        if (!e.value.is_constant(0.0)) throw std::invalid_argument("diagonal bivector entry must be zero");
        continue;
      }
      check_symbols(e.value);
      if (*i < *j) {
        upper_[index(*i, *j)] = e.value;
      } else {
        upper_[index(*j, *i)] = neg(e.value);
      }
    }
  }

  const Chart& chart() const { return chart_; }
  const Parameters& parameters() const { return params_; }
  std::size_t dimension() const { return chart_.dimension(); }

  /// Λ^{ij} = {x_i, x_j}.
  Expression operator()(std::size_t i, std::size_t j) const {
    if (i == j) return constant(0.0);
    if (i < j) return upper_[index(i, j)];
    return neg(upper_[index(j, i)]);
  }

  /// Coordinates followed by parameter names: the evaluation slot layout.
  std::vector<std::string> slots() const {
    std::vector<std::string> out = chart_.names();
    for (const auto& [k, v] : params_) out.push_back(k);
    return out;
  }

  /// Throws if the expression mentions anything other than coordinates and
  /// parameters of this structure.
  void check_symbols(const Expression& e) const {
    for (const auto& v : free_variables(e)) {
      if (!chart_.contains(v) && !params_.contains(v)) {
        throw std::invalid_argument("free variable '" + v + "' is neither a coordinate nor a parameter");
      }
    }
  }

  std::vector<Point> sample(const SampleOptions& opts = {}, std::span<const Expression> guards = {},
                            const std::function<bool(const Point&)>& accept = {}) const {
    return sample_points(chart_, params_, opts, guards, accept);
  }

 private:
  std::size_t index(std::size_t i, std::size_t j) const {
    const std::size_t n = chart_.dimension();
    return i * n - i * (i + 1) / 2 + (j - i - 1);
  }

  Chart chart_;
  Parameters params_;
  std::vector<Expression> upper_;
};

/// {f,g} = Σ_{i<j} Λ^{ij} (∂_i f ∂_j g − ∂_j f ∂_i g), simplified once.
inline Expression bracket(const Expression& f, const Expression& g, const PoissonStructure& L) {
  L.check_symbols(f);
  L.check_symbols(g);
  const auto& names = L.chart().names();
  const auto df = gradient(f, names);
  const auto dg = gradient(g, names);
  Expression sum = constant(0.0);
  for (std::size_t i = 0; i < names.size(); ++i) {
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      const Expression lij = L(i, j);
      if (lij.is_constant(0.0)) continue;
      const Expression cross = df[i] * dg[j] - df[j] * dg[i];
      if (cross.is_constant(0.0)) continue;
      sum = sum + lij * cross;
    }
  }
  return simplify(sum);
}

/// max over points and coordinate triples of the cyclic Jacobi sum
/// {{x_i,x_j},x_k} + {{x_j,x_k},x_i} + {{x_k,x_i},x_j}.
inline ResidualReport jacobi_residual(const PoissonStructure& L, std::span<const Point> points) {
  const auto& names = L.chart().names();
  const std::size_t n = names.size();
  std::vector<Expression> cyclic;
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t k = j + 1; k < n; ++k) {
        const Expression xi = variable(names[i]), xj = variable(names[j]), xk = variable(names[k]);
        cyclic.push_back(simplify(bracket(L(i, j), xk, L) + bracket(L(j, k), xi, L) + bracket(L(k, i), xj, L)));
        labels.push_back(names[i] + "," + names[j] + "," + names[k]);
      }
    }
  }
  auto report = max_abs_residual(cyclic, points, std::move(labels));
  if (cyclic.empty()) report.points_evaluated = points.size();
  return report;
}

/// max over points and coordinates of |{c, x_i}|.
inline ResidualReport is_casimir(const Expression& c, const PoissonStructure& L, std::span<const Point> points) {
  std::vector<Expression> brackets;
  std::vector<std::string> labels;
  for (const auto& x : L.chart().names()) {
    brackets.push_back(bracket(c, variable(x), L));
    labels.push_back(x);
  }
  return max_abs_residual(brackets, points, std::move(labels));
}

// ---------------------------------------------------------------------------
// Products

/// Renaming for factor `index` (0-based) of a product: each coordinate gets
/// the 1-based factor number appended.
inline std::map<std::string, std::string> factor_renaming(const Chart& chart, std::size_t index) {
  std::map<std::string, std::string> out;
  for (const auto& n : chart.names()) out.emplace(n, n + std::to_string(index + 1));
  return out;
}

/// Lifts a function on factor `index` to the product: f ↦ 1⊗…⊗f⊗…⊗1.
inline Expression lift(const Expression& f, const Chart& factor_chart, std::size_t index) {
  return rename(f, factor_renaming(factor_chart, index));
}

inline Parameters merge_parameters(const Parameters& a, const Parameters& b) {
  Parameters out = a;
  for (const auto& [k, v] : b) {
    const auto [it, inserted] = out.emplace(k, v);
    if (!inserted && it->second != v) {
      throw std::invalid_argument("conflicting values for parameter '" + k + "'");
    }
  }
  return out;
}

/// Block-diagonal product Λ₁ × … × Λₙ on the renamed union chart.
inline PoissonStructure product(std::span<const PoissonStructure> factors) {
  if (factors.empty()) throw std::invalid_argument("product of zero structures");
  std::vector<std::string> names;
  Parameters params;
  std::vector<PoissonStructure::Entry> entries;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    const auto& L = factors[f];
    const auto renaming = factor_renaming(L.chart(), f);
    for (const auto& n : L.chart().names()) names.push_back(renaming.at(n));
    params = merge_parameters(params, L.parameters());
    const std::size_t n = L.dimension();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const Expression v = L(i, j);
        if (v.is_constant(0.0)) continue;
        entries.push_back({renaming.at(L.chart()[i]), renaming.at(L.chart()[j]), rename(v, renaming)});
      }
    }
  }
  return PoissonStructure(Chart(std::move(names)), std::move(params), entries);
}

inline PoissonStructure product(const PoissonStructure& a, const PoissonStructure& b) {
  const std::vector<PoissonStructure> both{a, b};
  return product(both);
}

inline PoissonStructure power(const PoissonStructure& L, std::size_t copies) {
  return product(std::vector<PoissonStructure>(copies, L));
}

// ---------------------------------------------------------------------------
// Canonical structures

/// Which of the two sign conventions the canonical pairs follow.
enum class CanonicalOrientation {
  QP,  // {q_i, p_i} = 1
  PQ,  // {p_i, q_i} = 1
};

/// Canonical symplectic bivector on the chart (q_1..q_n, p_1..p_n).
inline PoissonStructure canonical_structure(const std::vector<std::string>& q, const std::vector<std::string>& p,
                                            CanonicalOrientation orientation, Parameters params = {}) {
  if (q.size() != p.size()) throw std::invalid_argument("canonical chart needs equally many q and p");
  std::vector<std::string> names = q;
  names.insert(names.end(), p.begin(), p.end());
  std::vector<PoissonStructure::Entry> entries;
  const double sign = orientation == CanonicalOrientation::QP ? 1.0 : -1.0;
  for (std::size_t i = 0; i < q.size(); ++i) entries.push_back({q[i], p[i], constant(sign)});
  return PoissonStructure(Chart(std::move(names)), std::move(params), entries);
}

}  // namespace involute
