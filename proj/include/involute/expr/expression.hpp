#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace involute {

/// Node kinds. The declaration order is the operator rank used by the
/// canonical ordering in simplify().
enum class Op : std::uint8_t {
  Constant,
  Variable,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Neg,
  Sin,
  Cos,
  Sinh,
  Cosh,
  Tanh,
  Exp,
  Log,
  Sqrt,
};

inline bool is_function(Op op) { return op >= Op::Sin; }
inline bool is_binary(Op op) { return op >= Op::Add && op <= Op::Pow; }

inline std::string_view function_name(Op op) {
  switch (op) {
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sinh: return "sinh";
    case Op::Cosh: return "cosh";
    case Op::Tanh: return "tanh";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sqrt: return "sqrt";
    default: return "";
  }
}

inline std::optional<Op> function_from_name(std::string_view name) {
  for (Op op : {Op::Sin, Op::Cos, Op::Sinh, Op::Cosh, Op::Tanh, Op::Exp, Op::Log, Op::Sqrt}) {
    if (function_name(op) == name) return op;
  }
  return std::nullopt;
}

struct Node;

/// Immutable handle to a shared expression tree. Copies are cheap and the
/// underlying nodes are never mutated, so expressions can be shared freely
/// between threads.
class Expression {
 public:
  /// The constant 0.
  Expression();

  static Expression constant(double value);
  static Expression variable(std::string name);
  /// Builds a node as given, with no folding. Used by the parser so that the
  /// printed form round-trips structurally.
  static Expression raw(Op op, std::vector<Expression> children);

  Op op() const;
  double value() const;
  const std::string& name() const;
  std::span<const Expression> children() const;
  const Expression& child(std::size_t i) const;
  std::size_t hash() const;
  std::size_t size() const;

  bool is_constant() const { return op() == Op::Constant; }
  bool is_constant(double v) const { return is_constant() && value() == v; }
  bool is_variable() const { return op() == Op::Variable; }

  bool same_node(const Expression& other) const { return node_ == other.node_; }

 private:
  explicit Expression(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

struct Node {
  Op op = Op::Constant;
  double value = 0.0;
  std::string name;
  std::vector<Expression> children;
  std::size_t hash = 0;
  std::size_t size = 1;
};

namespace detail {

inline std::size_t mix(std::size_t seed, std::size_t v) {
  return seed ^ (v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
}

inline const std::shared_ptr<const Node>& zero_node() {
  static const std::shared_ptr<const Node> zero = [] {
    auto n = std::make_shared<Node>();
    n->hash = mix(static_cast<std::size_t>(Op::Constant), std::hash<double>{}(0.0));
    return std::shared_ptr<const Node>(std::move(n));
  }();
  return zero;
}

}  // namespace detail

inline Expression::Expression() : node_(detail::zero_node()) {}

inline Expression Expression::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("non-finite constant in expression");
  if (value == 0.0) value = 0.0;  // drop the sign of -0
  auto n = std::make_shared<Node>();
  n->op = Op::Constant;
  n->value = value;
  n->hash = detail::mix(static_cast<std::size_t>(Op::Constant), std::hash<double>{}(value));
  return Expression(std::move(n));
}

inline Expression Expression::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->hash = detail::mix(static_cast<std::size_t>(Op::Variable), std::hash<std::string>{}(name));
  n->name = std::move(name);
  return Expression(std::move(n));
}

inline Expression Expression::raw(Op op, std::vector<Expression> children) {
  const std::size_t arity = is_binary(op) ? 2 : 1;
  if (op == Op::Constant || op == Op::Variable || children.size() != arity) {
    throw std::invalid_argument("Expression::raw: bad arity");
  }
  auto n = std::make_shared<Node>();
  n->op = op;
  std::size_t h = static_cast<std::size_t>(op) * 0x100000001b3ULL;
  for (const auto& c : children) {
    h = detail::mix(h, c.hash());
    n->size += c.size();
  }
  n->hash = h;
  n->children = std::move(children);
  return Expression(std::move(n));
}

inline Op Expression::op() const { return node_->op; }
inline double Expression::value() const { return node_->value; }
inline const std::string& Expression::name() const { return node_->name; }
inline std::span<const Expression> Expression::children() const { return node_->children; }
inline const Expression& Expression::child(std::size_t i) const { return node_->children.at(i); }
inline std::size_t Expression::hash() const { return node_->hash; }
inline std::size_t Expression::size() const { return node_->size; }

// ---------------------------------------------------------------------------
// Structural comparison

/// Total order: operator rank first, then constant value / variable name,
/// then children lexicographically.
inline int compare(const Expression& a, const Expression& b) {
  if (a.same_node(b)) return 0;
  if (a.op() != b.op()) return a.op() < b.op() ? -1 : 1;
  switch (a.op()) {
    case Op::Constant:
      if (a.value() == b.value()) return 0;
      return a.value() < b.value() ? -1 : 1;
    case Op::Variable: {
      const int c = a.name().compare(b.name());
      return c < 0 ? -1 : (c > 0 ? 1 : 0);
    }
    default: break;
  }
  const auto ca = a.children();
  const auto cb = b.children();
  for (std::size_t i = 0; i < ca.size() && i < cb.size(); ++i) {
    if (const int c = compare(ca[i], cb[i]); c != 0) return c;
  }
  if (ca.size() != cb.size()) return ca.size() < cb.size() ? -1 : 1;
  return 0;
}

inline bool operator==(const Expression& a, const Expression& b) {
  return a.same_node(b) || (a.hash() == b.hash() && compare(a, b) == 0);
}

struct ExpressionLess {
  bool operator()(const Expression& a, const Expression& b) const { return compare(a, b) < 0; }
};

// ---------------------------------------------------------------------------
// Folding constructors. Each is evaluation-equivalent to the raw node it
// replaces wherever the raw node evaluates.

namespace detail {

inline std::optional<double> apply_function(Op op, double x) {
  double r = 0.0;
  switch (op) {
    case Op::Neg: r = -x; break;
    case Op::Sin: r = std::sin(x); break;
    case Op::Cos: r = std::cos(x); break;
    case Op::Sinh: r = std::sinh(x); break;
    case Op::Cosh: r = std::cosh(x); break;
    case Op::Tanh: r = std::tanh(x); break;
    case Op::Exp: r = std::exp(x); break;
    case Op::Log:
      if (!(x > 0.0)) return std::nullopt;
      r = std::log(x);
      break;
    case Op::Sqrt:
      if (x < 0.0) return std::nullopt;
      r = std::sqrt(x);
      break;
    default: return std::nullopt;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

inline bool is_integral(double v) { return std::isfinite(v) && std::trunc(v) == v; }

inline std::optional<double> apply_binary(Op op, double a, double b) {
  double r = 0.0;
  switch (op) {
    case Op::Add: r = a + b; break;
    case Op::Sub: r = a - b; break;
    case Op::Mul: r = a * b; break;
    case Op::Div:
      if (b == 0.0) return std::nullopt;
      r = a / b;
      break;
    case Op::Pow:
      if (a < 0.0 && !is_integral(b)) return std::nullopt;
      if (a == 0.0 && b < 0.0) return std::nullopt;
      r = std::pow(a, b);
      break;
    default: return std::nullopt;
  }
  if (!std::isfinite(r)) return std::nullopt;
  return r;
}

}  // namespace detail

inline Expression constant(double v) { return Expression::constant(v); }
inline Expression variable(std::string name) { return Expression::variable(std::move(name)); }

inline Expression neg(const Expression& a) {
  if (a.is_constant()) return constant(-a.value());
  if (a.op() == Op::Neg) return a.child(0);
  return Expression::raw(Op::Neg, {a});
}

inline Expression add(const Expression& a, const Expression& b) {
  if (a.is_constant(0.0)) return b;
  if (b.is_constant(0.0)) return a;
  if (a.is_constant() && b.is_constant()) {
    if (auto r = detail::apply_binary(Op::Add, a.value(), b.value())) return constant(*r);
  }
  return Expression::raw(Op::Add, {a, b});
}

inline Expression sub(const Expression& a, const Expression& b) {
  if (b.is_constant(0.0)) return a;
  if (a.is_constant(0.0)) return neg(b);
  if (a.is_constant() && b.is_constant()) {
    if (auto r = detail::apply_binary(Op::Sub, a.value(), b.value())) return constant(*r);
  }
  return Expression::raw(Op::Sub, {a, b});
}

inline Expression mul(const Expression& a, const Expression& b) {
  if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
  if (a.is_constant(1.0)) return b;
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(-1.0)) return neg(b);
  if (b.is_constant(-1.0)) return neg(a);
  if (a.is_constant() && b.is_constant()) {
    if (auto r = detail::apply_binary(Op::Mul, a.value(), b.value())) return constant(*r);
  }
  return Expression::raw(Op::Mul, {a, b});
}

inline Expression div(const Expression& a, const Expression& b) {
  if (b.is_constant(1.0)) return a;
  if (a.is_constant(0.0) && !b.is_constant(0.0)) return constant(0.0);
  if (a.is_constant() && b.is_constant()) {
    if (auto r = detail::apply_binary(Op::Div, a.value(), b.value())) return constant(*r);
  }
  return Expression::raw(Op::Div, {a, b});
}

inline Expression pow(const Expression& base, const Expression& exponent) {
  if (exponent.is_constant(0.0)) return constant(1.0);
  if (exponent.is_constant(1.0)) return base;
  if (base.is_constant() && exponent.is_constant()) {
    if (auto r = detail::apply_binary(Op::Pow, base.value(), exponent.value())) return constant(*r);
  }
  return Expression::raw(Op::Pow, {base, exponent});
}

inline Expression apply(Op fn, const Expression& arg) {
  if (fn == Op::Neg) return neg(arg);
  if (arg.is_constant()) {
    if (auto r = detail::apply_function(fn, arg.value())) return constant(*r);
  }
  return Expression::raw(fn, {arg});
}

inline Expression sin(const Expression& a) { return apply(Op::Sin, a); }
inline Expression cos(const Expression& a) { return apply(Op::Cos, a); }
inline Expression sinh(const Expression& a) { return apply(Op::Sinh, a); }
inline Expression cosh(const Expression& a) { return apply(Op::Cosh, a); }
inline Expression tanh(const Expression& a) { return apply(Op::Tanh, a); }
inline Expression exp(const Expression& a) { return apply(Op::Exp, a); }
inline Expression log(const Expression& a) { return apply(Op::Log, a); }
inline Expression sqrt(const Expression& a) { return apply(Op::Sqrt, a); }

inline Expression operator+(const Expression& a, const Expression& b) { return add(a, b); }
inline Expression operator-(const Expression& a, const Expression& b) { return sub(a, b); }
inline Expression operator*(const Expression& a, const Expression& b) { return mul(a, b); }
inline Expression operator/(const Expression& a, const Expression& b) { return div(a, b); }
inline Expression operator-(const Expression& a) { return neg(a); }
inline Expression operator+(const Expression& a, double b) { return add(a, constant(b)); }
inline Expression operator+(double a, const Expression& b) { return add(constant(a), b); }
inline Expression operator-(const Expression& a, double b) { return sub(a, constant(b)); }
inline Expression operator-(double a, const Expression& b) { return sub(constant(a), b); }
inline Expression operator*(double a, const Expression& b) { return mul(constant(a), b); }
inline Expression operator*(const Expression& a, double b) { return mul(a, constant(b)); }
inline Expression operator/(const Expression& a, double b) { return div(a, constant(b)); }
inline Expression operator/(double a, const Expression& b) { return div(constant(a), b); }
inline Expression pow(const Expression& a, double b) { return pow(a, constant(b)); }

/// Rebuilds a node of the same kind with new children, applying folding.
inline Expression rebuild(const Expression& e, std::vector<Expression> kids) {
  switch (e.op()) {
    case Op::Constant:
    case Op::Variable: return e;
    case Op::Add: return add(kids[0], kids[1]);
    case Op::Sub: return sub(kids[0], kids[1]);
    case Op::Mul: return mul(kids[0], kids[1]);
    case Op::Div: return div(kids[0], kids[1]);
    case Op::Pow: return pow(kids[0], kids[1]);
    default: return apply(e.op(), kids[0]);
  }
}

// ---------------------------------------------------------------------------
// Traversal helpers

inline void collect_variables(const Expression& e, std::set<std::string>& out) {
  if (e.is_variable()) {
    out.insert(e.name());
    return;
  }
  for (const auto& c : e.children()) collect_variables(c, out);
}

inline std::set<std::string> free_variables(const Expression& e) {
  std::set<std::string> out;
  collect_variables(e, out);
  return out;
}

inline bool depends_on(const Expression& e, std::string_view name) {
  if (e.is_variable()) return e.name() == name;
  for (const auto& c : e.children()) {
    if (depends_on(c, name)) return true;
  }
  return false;
}

/// Simultaneous substitution of variables by expressions. Variables not in
/// the map are left untouched.
inline Expression substitute(const Expression& e, const std::map<std::string, Expression>& with) {
  if (e.is_variable()) {
    const auto it = with.find(e.name());
    return it == with.end() ? e : it->second;
  }
  if (e.children().empty()) return e;
  std::vector<Expression> kids;
  kids.reserve(e.children().size());
  bool changed = false;
  for (const auto& c : e.children()) {
    kids.push_back(substitute(c, with));
    changed = changed || !kids.back().same_node(c);
  }
  return changed ? rebuild(e, std::move(kids)) : e;
}

inline Expression rename(const Expression& e, const std::map<std::string, std::string>& names) {
  std::map<std::string, Expression> with;
  for (const auto& [from, to] : names) with.emplace(from, variable(to));
  return substitute(e, with);
}

// ---------------------------------------------------------------------------
// Printing

inline std::string format_number(double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace detail {

// 1: + -   2: * /   3: unary minus   4: ^   5: atoms and calls
inline int precedence(const Expression& e) {
  switch (e.op()) {
    case Op::Constant: return e.value() < 0.0 ? 3 : 5;
    case Op::Variable: return 5;
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

inline void print_into(const Expression& e, int min_prec, std::string& out) {
  const bool parens = precedence(e) < min_prec;
  if (parens) out += '(';
  switch (e.op()) {
    case Op::Constant: out += format_number(e.value()); break;
    case Op::Variable: out += e.name(); break;
    case Op::Add:
    case Op::Sub:
      print_into(e.child(0), 1, out);
      out += e.op() == Op::Add ? '+' : '-';
      print_into(e.child(1), 2, out);
      break;
    case Op::Mul:
    case Op::Div:
      print_into(e.child(0), 2, out);
      out += e.op() == Op::Mul ? '*' : '/';
      print_into(e.child(1), 3, out);
      break;
    case Op::Neg:
      out += '-';
      print_into(e.child(0), 3, out);
      break;
    case Op::Pow:
      print_into(e.child(0), 5, out);
      out += '^';
      print_into(e.child(1), 3, out);
      break;
    default:
      out += function_name(e.op());
      out += '(';
      print_into(e.child(0), 0, out);
      out += ')';
      break;
  }
  if (parens) out += ')';
}

}  // namespace detail

/// Minimal-parenthesis infix form. This is the wire format used in every
/// JSON file the toolkit reads or writes.
inline std::string to_string(const Expression& e) {
  std::string out;
  detail::print_into(e, 0, out);
  return out;
}

}  // namespace involute
