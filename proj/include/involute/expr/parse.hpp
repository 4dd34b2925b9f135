#pragma once

#include <cctype>
#include <charconv>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

#include "involute/expr/expression.hpp"

namespace involute {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : std::runtime_error(message + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

namespace detail {

// expr    := term (('+' | '-') term)*
// term    := unary (('*' | '/') unary)*
// unary   := '-' unary | power
// power   := primary ('^' unary)?
// primary := number | ident | ident '(' expr ')' | '(' expr ')'
class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Expression parse_all() {
    Expression e = parse_expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected character '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const { throw ParseError("syntax error: " + message, pos_); }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expression parse_expr() {
    Expression lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = Expression::raw(Op::Add, {lhs, parse_term()});
      } else if (accept('-')) {
        lhs = Expression::raw(Op::Sub, {lhs, parse_term()});
      } else {
        return lhs;
      }
    }
  }

  Expression parse_term() {
    Expression lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = Expression::raw(Op::Mul, {lhs, parse_unary()});
      } else if (accept('/')) {
        lhs = Expression::raw(Op::Div, {lhs, parse_unary()});
      } else {
        return lhs;
      }
    }
  }

  Expression parse_unary() {
    if (accept('-')) {
      Expression operand = parse_unary();
      if (operand.is_constant()) return Expression::constant(-operand.value());
      return Expression::raw(Op::Neg, {operand});
    }
    return parse_power();
  }

  Expression parse_power() {
    Expression base = parse_primary();
    if (accept('^')) return Expression::raw(Op::Pow, {base, parse_unary()});
    return base;
  }

  Expression parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
        ++pos_;
      }
      std::string ident(text_.substr(start, pos_ - start));
      skip_space();
      if (pos_ < text_.size() && text_[pos_] == '(') {
        const auto fn = function_from_name(ident);
        if (!fn) throw ParseError("unknown function '" + ident + "'", start);
        ++pos_;
        Expression arg = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return Expression::raw(*fn, {arg});
      }
      return Expression::variable(std::move(ident));
    }
    if (c == '(') {
      ++pos_;
      Expression inner = parse_expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  Expression parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t mantissa = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0) fail("malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < text_.size() && (text_[look] == '+' || text_[look] == '-')) ++look;
      if (look < text_.size() && std::isdigit(static_cast<unsigned char>(text_[look]))) {
        pos_ = look;
        digits();
      }
    }
    double value = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, value);
    if (res.ec != std::errc{} || res.ptr != text_.data() + pos_) {
      throw ParseError("syntax error: malformed number", start);
    }
    return Expression::constant(value);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Parses the infix grammar used throughout the toolkit. Throws ParseError
/// carrying the 0-based offset of the offending character.
inline Expression parse(std::string_view text) { return detail::Parser(text).parse_all(); }

}  // namespace involute
