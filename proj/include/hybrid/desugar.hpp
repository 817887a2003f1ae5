#pragma once

#include <numbers>

#include "hybrid/program.hpp"

namespace hybrid {

/// `x := unif(a,b)` as `x := unif(0,1) ; x := (b - a) * x + a`.
/// The affine rescale is dropped when a and b are the literals 0 and 1.
inline ProgramPtr desugar_unif(std::size_t x, const ExprPtr& a, const ExprPtr& b) {
  if (is_literal(a, 0.0) && is_literal(b, 1.0)) return make_sample(x);
  return make_seq(make_sample(x), make_assign(x, add(mul(sub(b, a), var(x)), a)));
}

/// `x := exp(lambda)` as `x := unif(0,1) ; x := -ln(x)/lambda`.
inline ProgramPtr desugar_exp(std::size_t x, const ExprPtr& lambda) {
  return make_seq(make_sample(x), make_assign(x, div(neg(apply(Prim::Ln, {var(x)})), lambda)));
}

/// Box-Muller over the helpers x1, x2, then `x := m + s * x` unless (m,s) = (0,1).
inline ProgramPtr desugar_normal(std::size_t x, const ExprPtr& m, const ExprPtr& s, std::size_t x1,
                                 std::size_t x2) {
  auto radius = apply(Prim::Sqrt, {mul(lit(-2.0), apply(Prim::Ln, {var(x1)}))});
  auto angle = apply(Prim::Cos, {mul(mul(lit(2.0), apply(Prim::Pi, {})), var(x2))});
  std::vector<ProgramPtr> out{make_sample(x1), make_sample(x2), make_assign(x, mul(radius, angle))};
  if (!(is_literal(m, 0.0) && is_literal(s, 1.0))) out.push_back(make_assign(x, add(m, mul(s, var(x)))));
  return make_block(std::move(out));
}

/// `bernoulli(r, p, q)` as `xf := unif(0,1) ; if xf <= r then p else q`.
inline ProgramPtr desugar_bernoulli(std::size_t xf, const ExprPtr& r, ProgramPtr p, ProgramPtr q) {
  return make_seq(make_sample(xf), make_if(leq(var(xf), r), std::move(p), std::move(q)));
}

}  // namespace hybrid
