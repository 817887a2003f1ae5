#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hybrid/expr.hpp"

namespace hybrid {

/// A total map from the program's variables to reals. Entries are always finite.
class Store {
 public:
  Store() = default;
  explicit Store(std::size_t n) : values_(n, 0.0) {}
  explicit Store(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(std::size_t i) const { return values_.at(i); }
  std::span<const double> values() const { return values_; }

  /// sigma[x -> v]; the receiver is left untouched.
  Store update(std::size_t x, double v) const {
    Store out = *this;
    out.values_.at(x) = v;
    return out;
  }

  friend bool operator==(const Store&, const Store&) = default;
  friend bool operator<(const Store& a, const Store& b) { return a.values_ < b.values_; }

 private:
  std::vector<double> values_;
};

inline Store update(const Store& s, std::size_t x, double v) { return s.update(x, v); }

enum class UndefReason { DivByZero, LnDomain, SqrtDomain, NonFinite, NonAffine, NegativeDuration };

inline const char* to_string(UndefReason r) {
  switch (r) {
    case UndefReason::DivByZero:
      return "division by zero";
    case UndefReason::LnDomain:
      return "ln of non-positive value";
    case UndefReason::SqrtDomain:
      return "sqrt of negative value";
    case UndefReason::NonFinite:
      return "non-finite value";
    case UndefReason::NonAffine:
      return "exact flow requested for non-affine system";
    case UndefReason::NegativeDuration:
      return "negative duration";
  }
  return "undefined";
}

struct Undefined {
  UndefReason reason;
};

/// Result of a partial map: either a value or the reason it is undefined.
template <class V>
class EvalResult {
 public:
  EvalResult(V v) : data_(std::move(v)) {}
  EvalResult(Undefined u) : data_(u) {}

  bool defined() const { return std::holds_alternative<V>(data_); }
  explicit operator bool() const { return defined(); }
  const V& value() const { return std::get<V>(data_); }
  const V& operator*() const { return value(); }
  const V* operator->() const { return &value(); }
  UndefReason reason() const { return std::get<Undefined>(data_).reason; }

 private:
  std::variant<V, Undefined> data_;
};

namespace detail {

inline EvalResult<double> finite_or_undef(double v) {
  if (!std::isfinite(v)) return Undefined{UndefReason::NonFinite};
  return v;
}

inline EvalResult<double> eval_in(const Expr& e, std::span<const double> sigma) {
  if (const auto* c = std::get_if<Const>(&e.node)) return finite_or_undef(c->value);
  if (const auto* v = std::get_if<VarRef>(&e.node)) return sigma[v->index];
  const auto& ap = std::get<Apply>(e.node);
  double a[2] = {0.0, 0.0};
  // strict: every argument is evaluated before the primitive is applied
  std::optional<UndefReason> failed;
  for (std::size_t i = 0; i < ap.args.size(); ++i) {
    auto r = eval_in(*ap.args[i], sigma);
    if (!r) {
      if (!failed) failed = r.reason();
    } else {
      a[i] = *r;
    }
  }
  if (failed) return Undefined{*failed};
  switch (ap.prim) {
    case Prim::Add:
      return finite_or_undef(a[0] + a[1]);
    case Prim::Sub:
      return finite_or_undef(a[0] - a[1]);
    case Prim::Mul:
      return finite_or_undef(a[0] * a[1]);
    case Prim::Div:
      if (a[1] == 0.0) return Undefined{UndefReason::DivByZero};
      return finite_or_undef(a[0] / a[1]);
    case Prim::Neg:
      return -a[0];
    case Prim::Ln:
      if (!(a[0] > 0.0)) return Undefined{UndefReason::LnDomain};
      return finite_or_undef(std::log(a[0]));
    case Prim::Sqrt:
      if (a[0] < 0.0) return Undefined{UndefReason::SqrtDomain};
      return std::sqrt(a[0]);
    case Prim::Sin:
      return std::sin(a[0]);
    case Prim::Cos:
      return std::cos(a[0]);
    case Prim::Euler:
      return finite_or_undef(std::exp(a[0]));
    case Prim::Pi:
      return std::numbers::pi;
  }
  return Undefined{UndefReason::NonFinite};
}

inline EvalResult<bool> eval_bool_in(const BoolExpr& b, std::span<const double> sigma) {
  return std::visit(
      [&](const auto& n) -> EvalResult<bool> {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Leq>) {
          auto l = eval_in(*n.lhs, sigma);
          auto r = eval_in(*n.rhs, sigma);
          if (!l) return Undefined{l.reason()};
          if (!r) return Undefined{r.reason()};
          return *l <= *r;
        } else {
          auto l = eval_bool_in(*n.lhs, sigma);
          auto r = eval_bool_in(*n.rhs, sigma);
          if (!l) return Undefined{l.reason()};
          if (!r) return Undefined{r.reason()};
          if constexpr (std::is_same_v<T, And>)
            return *l && *r;
          else
            return *l || *r;
        }
      },
      b.node);
}

}  // namespace detail

inline EvalResult<double> eval_expr(const Expr& e, const Store& sigma) {
  return detail::eval_in(e, sigma.values());
}
inline EvalResult<double> eval_expr(const ExprPtr& e, const Store& sigma) { return eval_expr(*e, sigma); }

/// Boolean operators are strict: an undefined operand poisons the whole
/// condition regardless of the other operand's value.
inline EvalResult<bool> eval_bool(const BoolExpr& b, const Store& sigma) {
  return detail::eval_bool_in(b, sigma.values());
}
inline EvalResult<bool> eval_bool(const BoolExprPtr& b, const Store& sigma) { return eval_bool(*b, sigma); }

}  // namespace hybrid
