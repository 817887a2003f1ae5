#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "hybrid/store.hpp"

namespace hybrid {

/// x' = A x + c, with A stored row-major.
struct AffineForm {
  std::size_t n = 0;
  std::vector<double> A;
  std::vector<double> c;

  double a(std::size_t i, std::size_t j) const { return A[i * n + j]; }
};

namespace detail {

// Linear form: coeffs . x + constant. Empty optional = not affine.
struct Linear {
  std::vector<double> coeffs;
  double constant = 0.0;

  bool is_constant() const {
    return std::all_of(coeffs.begin(), coeffs.end(), [](double v) { return v == 0.0; });
  }
};

inline std::optional<Linear> linearize(const Expr& e, std::size_t n) {
  if (const auto* c = std::get_if<Const>(&e.node)) return Linear{std::vector<double>(n, 0.0), c->value};
  if (const auto* v = std::get_if<VarRef>(&e.node)) {
    Linear out{std::vector<double>(n, 0.0), 0.0};
    out.coeffs.at(v->index) = 1.0;
    return out;
  }
  const auto& ap = std::get<Apply>(e.node);
  std::vector<Linear> args;
  for (const auto& a : ap.args) {
    auto l = linearize(*a, n);
    if (!l) return std::nullopt;
    args.push_back(std::move(*l));
  }
  auto scaled = [](Linear l, double k) {
    for (auto& x : l.coeffs) x *= k;
    l.constant *= k;
    return l;
  };
  // non-linear primitives are affine only when applied to constants
  auto fold = [&]() -> std::optional<Linear> {
    for (const auto& a : args)
      if (!a.is_constant()) return std::nullopt;
    auto r = eval_expr(e, Store(n));
    if (!r) return std::nullopt;
    return Linear{std::vector<double>(n, 0.0), *r};
  };
  switch (ap.prim) {
    case Prim::Add:
    case Prim::Sub: {
      double sign = ap.prim == Prim::Add ? 1.0 : -1.0;
      Linear out = args[0];
      for (std::size_t i = 0; i < n; ++i) out.coeffs[i] += sign * args[1].coeffs[i];
      out.constant += sign * args[1].constant;
      return out;
    }
    case Prim::Neg:
      return scaled(args[0], -1.0);
    case Prim::Mul:
      if (args[0].is_constant()) return scaled(args[1], args[0].constant);
      if (args[1].is_constant()) return scaled(args[0], args[1].constant);
      return std::nullopt;
    case Prim::Div:
      if (args[1].is_constant() && args[1].constant != 0.0) return scaled(args[0], 1.0 / args[1].constant);
      return std::nullopt;
    default:
      return fold();
  }
}

}  // namespace detail

/// The data of a differential block minus its duration: one derivative per
/// variable. Affine systems are recognised once, at construction.
class OdeSystem {
 public:
  OdeSystem() = default;
  explicit OdeSystem(std::vector<ExprPtr> derivatives) : derivs_(std::move(derivatives)) {
    affine_ = classify(derivs_);
    halted_ = affine_ && std::all_of(affine_->A.begin(), affine_->A.end(), [](double a) { return a == 0.0; }) &&
              std::all_of(affine_->c.begin(), affine_->c.end(), [](double c) { return c == 0.0; });
  }

  /// All-zero derivatives over n variables.
  static OdeSystem halted(std::size_t n) { return OdeSystem(std::vector<ExprPtr>(n, lit(0.0))); }

  std::size_t size() const { return derivs_.size(); }
  const std::vector<ExprPtr>& derivatives() const { return derivs_; }
  const ExprPtr& derivative(std::size_t i) const { return derivs_.at(i); }
  const std::optional<AffineForm>& affine() const { return affine_; }
  /// Every derivative is the constant zero.
  bool is_halted() const { return halted_; }

  static std::optional<AffineForm> classify(const std::vector<ExprPtr>& derivs) {
    const std::size_t n = derivs.size();
    AffineForm out{n, std::vector<double>(n * n, 0.0), std::vector<double>(n, 0.0)};
    for (std::size_t i = 0; i < n; ++i) {
      auto l = detail::linearize(*derivs[i], n);
      if (!l) return std::nullopt;
      for (std::size_t j = 0; j < n; ++j) out.A[i * n + j] = l->coeffs[j];
      out.c[i] = l->constant;
    }
    return out;
  }

 private:
  std::vector<ExprPtr> derivs_;
  std::optional<AffineForm> affine_;
  bool halted_ = false;
};

/// Structural test for x' = A x + c; returns (A, c) when it holds.
inline std::optional<AffineForm> classify_affine(const OdeSystem& sys) { return sys.affine(); }

struct FlowMethod {
  enum class Kind { Auto, ExactAffine, RungeKutta4 };
  Kind kind = Kind::Auto;
  double step = 1e-3;

  static FlowMethod automatic(double rk4_step = 1e-3) { return {Kind::Auto, rk4_step}; }
  static FlowMethod exact() { return {Kind::ExactAffine, 1e-3}; }
  static FlowMethod rk4(double step) {
    if (!(step > 0.0)) throw std::invalid_argument("RK4 step must be positive");
    return {Kind::RungeKutta4, step};
  }
};

namespace detail {

using Matrix = std::vector<double>;  // square, row-major

inline Matrix matmul(const Matrix& a, const Matrix& b, std::size_t m) {
  Matrix out(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < m; ++k) {
      double aik = a[i * m + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += aik * b[k * m + j];
    }
  return out;
}

inline std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  const std::size_t m = x.size();
  std::vector<double> out(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (a[i * m + j] != 0.0) acc += a[i * m + j] * x[j];
    out[i] = acc;
  }
  return out;
}

// exp(M) by scaling and squaring a truncated Taylor series.
inline Matrix expm(const Matrix& mat, std::size_t m) {
  double norm = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < m; ++i) col += std::abs(mat[i * m + j]);
    norm = std::max(norm, col);
  }
  int squarings = 0;
  if (norm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  const double scale = std::ldexp(1.0, -squarings);
  Matrix a = mat;
  for (auto& v : a) v *= scale;

  Matrix result(m * m, 0.0), term(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) result[i * m + i] = term[i * m + i] = 1.0;
  for (int k = 1; k <= 30; ++k) {
    term = matmul(term, a, m);
    double tmax = 0.0;
    for (auto& v : term) {
      v /= k;
      tmax = std::max(tmax, std::abs(v));
    }
    for (std::size_t i = 0; i < m * m; ++i) result[i] += term[i];
    if (tmax < 1e-18) break;
  }
  for (int s = 0; s < squarings; ++s) result = matmul(result, result, m);
  return result;
}

inline std::vector<double> augmented_matrix_times(const AffineForm& f, const std::vector<double>& y) {
  const std::size_t n = f.n;
  std::vector<double> out(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      if (f.A[i * n + j] != 0.0) acc += f.A[i * n + j] * y[j];
    if (f.c[i] != 0.0) acc += f.c[i] * y[n];
    out[i] = acc;
  }
  return out;
}

inline EvalResult<Store> checked_store(std::vector<double> v) {
  for (double x : v)
    if (!std::isfinite(x)) return Undefined{UndefReason::NonFinite};
  return Store(std::move(v));
}

// Closed form of x' = A x + c via the augmented system y' = M y, y = (x, 1).
inline EvalResult<Store> flow_affine(const AffineForm& f, const Store& sigma, double tau) {
  const std::size_t n = f.n;
  std::vector<double> y(n + 1);
  for (std::size_t i = 0; i < n; ++i) y[i] = sigma[i];
  y[n] = 1.0;

  // When M^k y vanishes (always, for nilpotent A) the series is a finite
  // polynomial in tau and is summed directly.
  std::vector<double> acc = y, power = y;
  double coef = 1.0;
  for (std::size_t k = 1; k <= n + 1; ++k) {
    power = augmented_matrix_times(f, power);
    if (std::all_of(power.begin(), power.end(), [](double v) { return v == 0.0; })) {
      acc.pop_back();
      return checked_store(std::move(acc));
    }
    coef *= tau / static_cast<double>(k);
    for (std::size_t i = 0; i <= n; ++i) acc[i] += coef * power[i];
  }

  const std::size_t m = n + 1;
  Matrix mt(m * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) mt[i * m + j] = f.A[i * n + j] * tau;
    mt[i * m + n] = f.c[i] * tau;
  }
  auto out = matvec(expm(mt, m), y);
  out.pop_back();
  return checked_store(std::move(out));
}

inline EvalResult<std::vector<double>> derivative_at(const OdeSystem& sys, const std::vector<double>& x) {
  std::vector<double> dx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto r = eval_in(*sys.derivative(i), x);
    if (!r) return Undefined{r.reason()};
    dx[i] = *r;
  }
  return dx;
}

inline EvalResult<Store> flow_rk4(const OdeSystem& sys, const Store& sigma, double tau, double h) {
  std::vector<double> x(sigma.values().begin(), sigma.values().end());
  const std::size_t n = x.size();
  auto full = static_cast<std::size_t>(std::floor(tau / h));
  double rest = tau - static_cast<double>(full) * h;
  if (rest < 0.0) {
    --full;
    rest = tau - static_cast<double>(full) * h;
  }
  auto advance = [&](double dt) -> std::optional<UndefReason> {
    std::vector<double> tmp(n);
    auto k1 = derivative_at(sys, x);
    if (!k1) return k1.reason();
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * (*k1)[i];
    auto k2 = derivative_at(sys, tmp);
    if (!k2) return k2.reason();
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * (*k2)[i];
    auto k3 = derivative_at(sys, tmp);
    if (!k3) return k3.reason();
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * (*k3)[i];
    auto k4 = derivative_at(sys, tmp);
    if (!k4) return k4.reason();
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += dt / 6.0 * ((*k1)[i] + 2.0 * (*k2)[i] + 2.0 * (*k3)[i] + (*k4)[i]);
      if (!std::isfinite(x[i])) return UndefReason::NonFinite;
    }
    return std::nullopt;
  };
  for (std::size_t s = 0; s < full; ++s)
    if (auto err = advance(h)) return Undefined{*err};
  if (rest > 0.0)
    if (auto err = advance(rest)) return Undefined{*err};
  return Store(std::move(x));
}

}  // namespace detail

/// phi(sigma, tau): the state reached after evolving for tau time units.
inline EvalResult<Store> flow(const OdeSystem& sys, const Store& sigma, double tau,
                              FlowMethod method = FlowMethod::automatic()) {
  if (!(tau >= 0.0)) throw std::invalid_argument("flow duration must be non-negative");
  if (sys.size() != sigma.size()) throw std::invalid_argument("ODE system and store sizes differ");
  if (tau == 0.0 || sys.is_halted()) return sigma;
  switch (method.kind) {
    case FlowMethod::Kind::ExactAffine:
      if (!sys.affine()) return Undefined{UndefReason::NonAffine};
      return detail::flow_affine(*sys.affine(), sigma, tau);
    case FlowMethod::Kind::RungeKutta4:
      return detail::flow_rk4(sys, sigma, tau, method.step);
    case FlowMethod::Kind::Auto:
      if (sys.affine()) return detail::flow_affine(*sys.affine(), sigma, tau);
      return detail::flow_rk4(sys, sigma, tau, method.step);
  }
  return Undefined{UndefReason::NonAffine};
}

/// flow sampled at each time of a sorted grid inside [0, duration]. Every
/// entry equals flow(sys, sigma, t, method) exactly.
inline std::vector<std::pair<double, EvalResult<Store>>> flow_segment(const OdeSystem& sys, const Store& sigma,
                                                                      double duration,
                                                                      const std::vector<double>& grid,
                                                                      FlowMethod method = FlowMethod::automatic()) {
  if (!std::is_sorted(grid.begin(), grid.end())) throw std::invalid_argument("grid must be sorted");
  if (!grid.empty() && (grid.front() < 0.0 || grid.back() > duration))
    throw std::invalid_argument("grid must lie within [0, duration]");
  std::vector<std::pair<double, EvalResult<Store>>> out;
  out.reserve(grid.size());
  for (double t : grid) out.emplace_back(t, flow(sys, sigma, t, method));
  return out;
}

}  // namespace hybrid
