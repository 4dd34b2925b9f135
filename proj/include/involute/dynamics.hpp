#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "involute/construct.hpp"

namespace involute {

/// Components Γ^j of a vector field on a chart.
struct VectorFieldSpec {
  Chart chart;
  Parameters params;
  std::vector<Expression> components;
};

/// Γ^j = Σ_i Λ^{ij} ∂_i H, i.e. ẋ_j = {H, x_j}. With H = x₁x₂+y₁y₂+z₁z₂ on
/// su(2)*×su(2)* this gives ẋ₁ = z₂y₁ − y₂z₁, the spin–spin flow.
inline VectorFieldSpec hamiltonian_field(const Expression& H, const PoissonStructure& L) {
  L.check_symbols(H);
  const auto& names = L.chart().names();
  const auto dH = gradient(H, names);
  VectorFieldSpec v{L.chart(), L.parameters(), {}};
  for (std::size_t j = 0; j < names.size(); ++j) {
    Expression sum = constant(0.0);
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i == j || dH[i].is_constant(0.0)) continue;
      const Expression lij = L(i, j);
      if (lij.is_constant(0.0)) continue;
      sum = sum + lij * dH[i];
    }
    v.components.push_back(simplify(sum));
  }
  return v;
}

enum class Method { RK4, RKF45 };

inline std::string_view to_string(Method m) { return m == Method::RK4 ? "rk4" : "rkf45"; }

struct IntegratorOptions {
  Method method = Method::RK4;
  double step = 1e-3;  // fixed step (rk4) or initial step (rkf45)
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t thin = 1;  // keep every thin-th sample; the last one is always kept
  std::size_t max_steps = 50'000'000;
};

struct Trajectory {
  std::vector<std::string> coords;
  Parameters params;
  std::vector<double> times;
  std::vector<std::vector<double>> states;
  Method method = Method::RK4;
  double step = 0.0;
  std::size_t step_count = 0;
  bool complete = true;
  std::string error;

  std::size_t size() const { return times.size(); }
  Point point(std::size_t i) const {
    Point p = params;
    for (std::size_t c = 0; c < coords.size(); ++c) p[coords[c]] = states[i][c];
    return p;
  }
};

namespace detail {

class FieldEvaluator {
 public:
  explicit FieldEvaluator(const VectorFieldSpec& v) : dim_(v.chart.dimension()) {
    std::vector<std::string> slots = v.chart.names();
    for (const auto& [k, val] : v.params) {
      slots.push_back(k);
      params_.push_back(val);
    }
    for (const auto& c : v.components) compiled_.emplace_back(c, slots);
    buffer_.resize(slots.size());
    std::copy(params_.begin(), params_.end(), buffer_.begin() + static_cast<std::ptrdiff_t>(dim_));
  }

  void operator()(std::span<const double> x, std::span<double> out) {
    std::copy(x.begin(), x.end(), buffer_.begin());
    for (std::size_t j = 0; j < dim_; ++j) out[j] = compiled_[j](buffer_);
  }

 private:
  std::size_t dim_;
  std::vector<double> params_;
  std::vector<double> buffer_;
  std::vector<CompiledExpression> compiled_;
};

inline std::size_t fixed_step_count(double t_end, double h) {
  const double r = t_end / h;
  const double nearest = std::round(r);
  if (std::fabs(r - nearest) <= 1e-9 * std::max(1.0, r)) return static_cast<std::size_t>(std::max(1.0, nearest));
  return static_cast<std::size_t>(std::ceil(r));
}

}  // namespace detail

/// Integrates ẋ = Γ(x) from t = 0 to t_end. rk4 takes ⌈t_end/h⌉ equal
/// steps ending exactly at t_end; rkf45 adapts from the initial step h. On a
/// domain violation the partial trajectory is returned with complete=false.
inline Trajectory integrate(const VectorFieldSpec& v, const Point& x0, double t_end,
                            const IntegratorOptions& opts = {}) {
  if (!(opts.step > 0.0)) throw std::invalid_argument("integrate: step must be positive");
  if (!(t_end > 0.0)) throw std::invalid_argument("integrate: t_end must be positive");
  const std::size_t n = v.chart.dimension();
  Trajectory tr;
  tr.coords = v.chart.names();
  tr.params = v.params;
  tr.method = opts.method;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = x0.find(tr.coords[i]);
    if (it == x0.end()) throw std::invalid_argument("initial point missing coordinate '" + tr.coords[i] + "'");
    x[i] = it->second;
  }
  const std::size_t thin = std::max<std::size_t>(1, opts.thin);
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  detail::FieldEvaluator field(v);
  std::size_t since_kept = 0;
  auto keep = [&](double t, const std::vector<double>& state, bool last) {
    if (++since_kept >= thin || last) {
      tr.times.push_back(t);
      tr.states.push_back(state);
      since_kept = 0;
    }
  };
  auto flush = [&](double t, const std::vector<double>& state) {
    if (since_kept != 0) {
      tr.times.push_back(t);
      tr.states.push_back(state);
    }
  };

  std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), tmp(n);
  double t = 0.0;
  try {
    if (opts.method == Method::RK4) {
      const std::size_t steps = detail::fixed_step_count(t_end, opts.step);
      const double h = t_end / static_cast<double>(steps);
      tr.step = h;
      for (std::size_t s = 0; s < steps; ++s) {
        field(x, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k1[i];
        field(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * h * k2[i];
        field(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * k3[i];
        field(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t = static_cast<double>(s + 1) * h;
        ++tr.step_count;
        keep(t, x, s + 1 == steps);
      }
    } else {
      // Fehlberg 4(5); the fifth-order solution is propagated.
      constexpr double a21 = 1.0 / 4.0;
      constexpr double a31 = 3.0 / 32.0, a32 = 9.0 / 32.0;
      constexpr double a41 = 1932.0 / 2197.0, a42 = -7200.0 / 2197.0, a43 = 7296.0 / 2197.0;
      constexpr double a51 = 439.0 / 216.0, a52 = -8.0, a53 = 3680.0 / 513.0, a54 = -845.0 / 4104.0;
      constexpr double a61 = -8.0 / 27.0, a62 = 2.0, a63 = -3544.0 / 2565.0, a64 = 1859.0 / 4104.0,
                       a65 = -11.0 / 40.0;
      constexpr std::array<double, 6> b5{16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0,
                                         2.0 / 55.0};
      constexpr std::array<double, 6> b4{25.0 / 216.0, 0.0, 1408.0 / 2565.0, 2197.0 / 4104.0, -1.0 / 5.0, 0.0};
      double h = std::min(opts.step, t_end);
      tr.step = h;
      std::vector<double> x5(n);
      while (t < t_end) {
        if (tr.step_count >= opts.max_steps) throw std::runtime_error("rkf45: step limit reached");
        if (h < 1e-14 * std::max(1.0, std::fabs(t))) throw std::runtime_error("rkf45: step size underflow");
        const bool last = t + h >= t_end;
        if (last) h = t_end - t;
        field(x, k1);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * a21 * k1[i];
        field(tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a31 * k1[i] + a32 * k2[i]);
        field(tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        field(tmp, k4);
        for (std::size_t i = 0; i < n; ++i) {
          tmp[i] = x[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        }
        field(tmp, k5);
        for (std::size_t i = 0; i < n; ++i) {
          tmp[i] = x[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        }
        field(tmp, k6);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double inc5 = b5[0] * k1[i] + b5[2] * k3[i] + b5[3] * k4[i] + b5[4] * k5[i] + b5[5] * k6[i];
          const double inc4 = b4[0] * k1[i] + b4[2] * k3[i] + b4[3] * k4[i] + b4[4] * k5[i];
          x5[i] = x[i] + h * inc5;
          const double scale = opts.atol + opts.rtol * std::max(std::fabs(x[i]), std::fabs(x5[i]));
          err = std::max(err, std::fabs(h * (inc5 - inc4)) / scale);
        }
        if (err <= 1.0) {
          t = last ? t_end : t + h;
          x = x5;
          ++tr.step_count;
          keep(t, x, last);
        }
        const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        if (!(last && err <= 1.0)) h *= factor;
      }
    }
  } catch (const std::exception& e) {
    flush(t, x);
    tr.complete = false;
    tr.error = e.what();
  }
  return tr;
}

struct ConservationEntry {
  std::string name;
  double drift = 0.0;
  bool failed = false;
  std::string error;
};

struct ConservationReport {
  std::vector<ConservationEntry> entries;

  const ConservationEntry* find(std::string_view name) const {
    for (const auto& e : entries) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }
  bool all_below(double bound) const {
    return std::all_of(entries.begin(), entries.end(), [&](const auto& e) { return !e.failed && e.drift < bound; });
  }
};

/// Per function: max_t |F(x(t)) − F(x(0))| / (1 + |F(x(0))|).
inline ConservationReport conservation_report(const Trajectory& tr, std::span<const NamedFunction> fns) {
  ConservationReport out;
  std::vector<std::string> slots = tr.coords;
  std::vector<double> values(tr.coords.size());
  for (const auto& [k, v] : tr.params) {
    slots.push_back(k);
    values.push_back(v);
  }
  for (const auto& f : fns) {
    ConservationEntry entry;
    entry.name = f.name;
    try {
      const CompiledExpression c(f.body, slots);
      double f0 = 0.0;
      for (std::size_t s = 0; s < tr.size(); ++s) {
        std::copy(tr.states[s].begin(), tr.states[s].end(), values.begin());
        const double fv = c(values);
        if (s == 0) f0 = fv;
        entry.drift = std::max(entry.drift, std::fabs(fv - f0) / (1.0 + std::fabs(f0)));
      }
    } catch (const EvalError& e) {
      entry.failed = true;
      entry.error = e.what();
    }
    out.entries.push_back(std::move(entry));
  }
  return out;
}

inline ConservationReport conservation_report(const Trajectory& tr, const FunctionFamily& family) {
  std::vector<NamedFunction> fns;
  for (const auto& m : family.members()) fns.push_back({m.name, m.body});
  return conservation_report(tr, fns);
}

/// %.17g: 17 significant digits, trailing zeros dropped.
inline std::string format_csv_number(double v) {
  std::array<char, 40> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

/// Header `t,<coord1>,...,<coordN>`, one row per sample.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << 't';
  for (const auto& c : tr.coords) os << ',' << c;
  os << '\n';
  for (std::size_t s = 0; s < tr.size(); ++s) {
    os << format_csv_number(tr.times[s]);
    for (double v : tr.states[s]) os << ',' << format_csv_number(v);
    os << '\n';
  }
}

}  // namespace involute
