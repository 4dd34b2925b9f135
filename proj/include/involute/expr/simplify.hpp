#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "involute/expr/expression.hpp"

namespace involute {

namespace detail {

// Sum-of-products normal form: Σ coef · Π factors. Factors are simplified,
// non-constant, never Add/Sub/Neg/Mul at top level unless they are a
// sign-normalized multi-term sum that could not be distributed.
struct Term {
  double coef = 1.0;
  std::vector<Expression> factors;  // sorted by compare()
};
using Sum = std::vector<Term>;

inline int compare_factors(const std::vector<Expression>& a, const std::vector<Expression>& b) {
  // The constant term (no factors) orders last.
  if (a.empty() != b.empty()) return a.empty() ? 1 : -1;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    if (const int c = compare(a[i], b[i]); c != 0) return c;
  }
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return 0;
}

inline Sum combine(Sum terms) {
  std::stable_sort(terms.begin(), terms.end(),
                   [](const Term& a, const Term& b) { return compare_factors(a.factors, b.factors) < 0; });
  Sum out;
  for (auto& t : terms) {
    if (!out.empty() && compare_factors(out.back().factors, t.factors) == 0) {
      out.back().coef += t.coef;
    } else {
      out.push_back(std::move(t));
    }
  }
  std::erase_if(out, [](const Term& t) { return t.coef == 0.0; });
  return out;
}

inline Sum negate(Sum s) {
  for (auto& t : s) t.coef = -t.coef;
  return s;
}

inline Expression build(const Sum& s);
inline Sum normal_form(const Expression& e);

inline Expression simplify_expr(const Expression& e) { return build(normal_form(e)); }

/// Collapses a sum to a single multiplicative term. A multi-term sum becomes
/// one opaque factor whose leading coefficient is made positive, so that
/// (P - Q) and (Q - P) share a factor and differ only in sign.
inline Term as_term(Sum s) {
  if (s.size() == 1) return std::move(s.front());
  double sign = 1.0;
  if (s.front().coef < 0.0) {
    sign = -1.0;
    s = negate(std::move(s));
  }
  return Term{sign, {build(s)}};
}

inline Sum multiply(Sum a, Sum b) {
  if (a.empty() || b.empty()) return {};
  Term ta = as_term(std::move(a));
  Term tb = as_term(std::move(b));
  Term out;
  out.coef = ta.coef * tb.coef;
  if (out.coef == 0.0) return {};
  out.factors = std::move(ta.factors);
  out.factors.insert(out.factors.end(), tb.factors.begin(), tb.factors.end());
  std::stable_sort(out.factors.begin(), out.factors.end(), ExpressionLess{});
  return {std::move(out)};
}

inline Sum single(const Expression& e) {
  if (e.is_constant()) {
    if (e.value() == 0.0) return {};
    return {Term{e.value(), {}}};
  }
  return {Term{1.0, {e}}};
}

inline Sum normal_form(const Expression& e) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable: return single(e);
    case Op::Add: {
      Sum s = normal_form(e.child(0));
      Sum r = normal_form(e.child(1));
      s.insert(s.end(), r.begin(), r.end());
      return combine(std::move(s));
    }
    case Op::Sub: {
      Sum s = normal_form(e.child(0));
      Sum r = negate(normal_form(e.child(1)));
      s.insert(s.end(), r.begin(), r.end());
      return combine(std::move(s));
    }
    case Op::Neg: return negate(normal_form(e.child(0)));
    case Op::Mul: return multiply(normal_form(e.child(0)), normal_form(e.child(1)));
    case Op::Div: {
      Sum num = normal_form(e.child(0));
      const Expression den = simplify_expr(e.child(1));
      if (num.empty()) return {};
      if (den.is_constant(1.0)) return num;
      double sign = 1.0;
      if (num.front().coef < 0.0) {
        sign = -1.0;
        num = negate(std::move(num));
      }
      const Expression q = div(build(num), den);
      Sum s = single(q);
      for (auto& t : s) t.coef *= sign;
      return s;
    }
    case Op::Pow: {
      const Expression r = pow(simplify_expr(e.child(0)), simplify_expr(e.child(1)));
      if (r.op() != Op::Pow) return normal_form(r);
      return single(r);
    }
    default: return single(apply(e.op(), simplify_expr(e.child(0))));
  }
}

inline Expression build_product(const Term& t) {
  Expression p;
  bool first = true;
  for (const auto& f : t.factors) {
    p = first ? f : Expression::raw(Op::Mul, {p, f});
    first = false;
  }
  return p;
}

inline Expression build(const Sum& s) {
  if (s.empty()) return constant(0.0);
  Expression acc;
  bool first = true;
  for (const auto& t : s) {
    const double mag = std::fabs(t.coef);
    Expression term;
    if (t.factors.empty()) {
      term = constant(mag);
    } else if (mag == 1.0) {
      term = build_product(t);
    } else if (first && t.coef < 0.0) {
      term = Expression::raw(Op::Mul, {constant(t.coef), build_product(t)});
      acc = term;
      first = false;
      continue;
    } else {
      term = Expression::raw(Op::Mul, {constant(mag), build_product(t)});
    }
    if (first) {
      acc = t.coef < 0.0 ? neg(term) : term;
      first = false;
    } else {
      acc = Expression::raw(t.coef < 0.0 ? Op::Sub : Op::Add, {acc, term});
    }
  }
  return acc;
}

}  // namespace detail

/// Best-effort algebraic cleanup: constant folding, 0/1 identities, and
/// cancellation of like additive terms under a canonical term order. Never
/// expands products of sums, so it cannot prove general identities; it does
/// reduce any antisymmetric construction such as {f,f} to the literal 0.
inline Expression simplify(const Expression& e) { return detail::simplify_expr(e); }

}  // namespace involute
