#pragma once

#include <string_view>

#include "involute/expr/expression.hpp"

namespace involute {

/// Exact partial derivative with respect to `var`; every other variable is
/// treated as a constant. Uses the folding constructors, so derivatives of
/// polynomials come out free of 0*... and 1*... noise.
inline Expression differentiate(const Expression& e, std::string_view var) {
  if (!depends_on(e, var)) return constant(0.0);
  switch (e.op()) {
    case Op::Constant: return constant(0.0);
    case Op::Variable: return constant(1.0);
    default: break;
  }
  const Expression& u = e.child(0);
  const Expression du = differentiate(u, var);
  switch (e.op()) {
    case Op::Add: return du + differentiate(e.child(1), var);
    case Op::Sub: return du - differentiate(e.child(1), var);
    case Op::Neg: return -du;
    case Op::Mul: {
      const Expression& w = e.child(1);
      return du * w + u * differentiate(w, var);
    }
    case Op::Div: {
      const Expression& w = e.child(1);
      const Expression dw = differentiate(w, var);
      if (dw.is_constant(0.0)) return du / w;
      return (du * w - u * dw) / pow(w, 2.0);
    }
    case Op::Pow: {
      const Expression& w = e.child(1);
      if (!depends_on(w, var)) {
        return w * pow(u, w - 1.0) * du;
      }
      const Expression dw = differentiate(w, var);
      if (!depends_on(u, var)) return e * log(u) * dw;
      return e * (dw * log(u) + w * du / u);
    }
    case Op::Sin: return cos(u) * du;
    case Op::Cos: return -(sin(u) * du);
    case Op::Sinh: return cosh(u) * du;
    case Op::Cosh: return sinh(u) * du;
    case Op::Tanh: return (1.0 - pow(e, 2.0)) * du;
    case Op::Exp: return e * du;
    case Op::Log: return du / u;
    case Op::Sqrt: return du / (2.0 * e);
    default: return constant(0.0);
  }
}

/// Gradient with respect to an ordered list of coordinates.
template <typename Names>
std::vector<Expression> gradient(const Expression& e, const Names& coords) {
  std::vector<Expression> out;
  for (const auto& c : coords) out.push_back(differentiate(e, c));
  return out;
}

}  // namespace involute
