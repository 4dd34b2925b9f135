#pragma once

#include <cmath>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "involute/expr/expression.hpp"

namespace involute {

/// Binding of coordinate and parameter names to values.
using Point = std::map<std::string, double>;

class EvalError : public std::runtime_error {
 public:
  enum class Kind { UnboundVariable, DomainViolation };

  EvalError(Kind kind, std::string subterm, const std::string& message)
      : std::runtime_error(message + ": " + subterm), kind_(kind), subterm_(std::move(subterm)) {}

  Kind kind() const { return kind_; }
  /// Printed form of the offending subexpression.
  const std::string& subterm() const { return subterm_; }

 private:
  Kind kind_;
  std::string subterm_;
};

namespace detail {

[[noreturn]] inline void domain_error(const Expression& e, const char* what) {
  throw EvalError(EvalError::Kind::DomainViolation, to_string(e), what);
}

/// Applies a node's operation to already-evaluated operands, raising a
/// domain violation instead of producing a non-real or non-finite value.
inline double apply_checked(const Expression& e, double a, double b) {
  double r = 0.0;
  switch (e.op()) {
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div:
      if (b == 0.0) domain_error(e, "division by zero");
      r = a / b;
      break;
    case Op::Pow:
      if (a < 0.0 && !is_integral(b)) domain_error(e, "negative base with non-integer exponent");
      if (a == 0.0 && b < 0.0) domain_error(e, "zero base with negative exponent");
      r = std::pow(a, b);
      break;
    case Op::Neg: r = -a; break;
    case Op::Sin: r = std::sin(a); break;
    case Op::Cos: r = std::cos(a); break;
    case Op::Sinh: r = std::sinh(a); break;
    case Op::Cosh: r = std::cosh(a); break;
    case Op::Tanh: r = std::tanh(a); break;
    case Op::Exp: r = std::exp(a); break;
    case Op::Log:
      if (!(a > 0.0)) domain_error(e, "log of non-positive value");
      r = std::log(a);
      break;
    case Op::Sqrt:
      if (a < 0.0) domain_error(e, "sqrt of negative value");
      r = std::sqrt(a);
      break;
    default: break;
  }
  if (!std::isfinite(r)) domain_error(e, "non-finite result");
  return r;
}

}  // namespace detail

/// Tree-walking evaluation against a named point.
inline double evaluate(const Expression& e, const Point& p) {
  switch (e.op()) {
    case Op::Constant: return e.value();
    case Op::Variable: {
      const auto it = p.find(e.name());
      if (it == p.end()) {
        throw EvalError(EvalError::Kind::UnboundVariable, e.name(), "unbound variable");
      }
      return it->second;
    }
    default: break;
  }
  const double a = evaluate(e.child(0), p);
  const double b = is_binary(e.op()) ? evaluate(e.child(1), p) : 0.0;
  return detail::apply_checked(e, a, b);
}

/// An expression lowered to a postfix program over indexed slots. Used on hot
/// paths (integration, sampled verification) where name lookups dominate.
/// Results are bit-identical to evaluate().
class CompiledExpression {
 public:
  CompiledExpression() = default;

  CompiledExpression(const Expression& e, std::span<const std::string> slots) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < slots.size(); ++i) index.emplace(slots[i], i);
    std::size_t depth = 0;
    lower(e, index, depth);
  }

  double operator()(std::span<const double> values) const {
    std::vector<double> stack(max_depth_);
    std::size_t top = 0;
    for (const auto& ins : program_) {
      switch (ins.node.op()) {
        case Op::Constant: stack[top++] = ins.node.value(); break;
        case Op::Variable: stack[top++] = values[ins.slot]; break;
        default:
          if (is_binary(ins.node.op())) {
            const double b = stack[--top];
            const double a = stack[top - 1];
            stack[top - 1] = detail::apply_checked(ins.node, a, b);
          } else {
            stack[top - 1] = detail::apply_checked(ins.node, stack[top - 1], 0.0);
          }
      }
    }
    return stack[0];
  }

 private:
  struct Instruction {
    Expression node;
    std::size_t slot = 0;
  };

  void lower(const Expression& e, const std::map<std::string, std::size_t>& index, std::size_t& depth) {
    if (e.is_variable()) {
      const auto it = index.find(e.name());
      if (it == index.end()) {
        throw EvalError(EvalError::Kind::UnboundVariable, e.name(), "unbound variable");
      }
      program_.push_back({e, it->second});
      max_depth_ = std::max(max_depth_, ++depth);
      return;
    }
    if (e.is_constant()) {
      program_.push_back({e, 0});
      max_depth_ = std::max(max_depth_, ++depth);
      return;
    }
    for (const auto& c : e.children()) lower(c, index, depth);
    if (is_binary(e.op())) --depth;
    program_.push_back({e, 0});
  }

  std::vector<Instruction> program_;
  std::size_t max_depth_ = 0;
};

}  // namespace involute
