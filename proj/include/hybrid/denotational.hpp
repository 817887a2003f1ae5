#pragma once

#include <boost/multiprecision/cpp_int.hpp>
#include <functional>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "hybrid/bigstep.hpp"

namespace hybrid {

using Rational = boost::multiprecision::cpp_rational;

template <class W>
double to_double(const W& w) {
  if constexpr (std::is_arithmetic_v<W>)
    return static_cast<double>(w);
  else
    return w.template convert_to<double>();
}

/// An outcome of E + X: a time-based termination (E) or a store with
/// remaining time (X).
struct Point {
  enum class Kind { E, X };
  Kind kind = Kind::X;
  Store store;
  double t = 0.0;

  static Point e(Store s) { return {Kind::E, std::move(s), 0.0}; }
  static Point x(Store s, double t) {
    if (!(t >= 0.0)) throw std::invalid_argument("X-point time must be non-negative");
    return {Kind::X, std::move(s), t};
  }
  bool is_e() const { return kind == Kind::E; }

  friend bool operator<(const Point& a, const Point& b) {
    return std::tie(a.kind, a.store, a.t) < std::tie(b.kind, b.store, b.t);
  }
  friend bool operator==(const Point& a, const Point& b) {
    return a.kind == b.kind && a.store == b.store && a.t == b.t;
  }
};

/// Finite-support subdistribution over E + X. Zero weights are never stored.
template <class W = double>
class DiscMeasure {
 public:
  using map_type = std::map<Point, W>;

  DiscMeasure() = default;

  void add(const Point& p, const W& w) {
    if (w == W(0)) return;
    auto [it, inserted] = weights_.try_emplace(p, w);
    if (!inserted) {
      it->second += w;
      if (it->second == W(0)) weights_.erase(it);
    }
  }

  void add(const DiscMeasure& other, const W& scale = W(1)) {
    for (const auto& [p, w] : other.weights_) add(p, w * scale);
  }

  W weight(const Point& p) const {
    auto it = weights_.find(p);
    return it == weights_.end() ? W(0) : it->second;
  }

  W mass() const {
    W m(0);
    for (const auto& [p, w] : weights_) m += w;
    return m;
  }

  std::size_t size() const { return weights_.size(); }
  bool empty() const { return weights_.empty(); }
  auto begin() const { return weights_.begin(); }
  auto end() const { return weights_.end(); }

  friend DiscMeasure operator+(DiscMeasure a, const DiscMeasure& b) {
    a.add(b);
    return a;
  }
  friend DiscMeasure operator*(const W& k, const DiscMeasure& m) {
    DiscMeasure out;
    out.add(m, k);
    return out;
  }
  friend bool operator==(const DiscMeasure& a, const DiscMeasure& b) { return a.weights_ == b.weights_; }

 private:
  map_type weights_;
};

template <class W = double>
DiscMeasure<W> dirac(const Point& p) {
  DiscMeasure<W> m;
  m.add(p, W(1));
  return m;
}

/// A Markov kernel X -> G(E + X).
template <class W = double>
using Kernel = std::function<DiscMeasure<W>(const Store&, double)>;

/// Lift a kernel to measures. E-points pass through untouched, X-points are
/// fed to the kernel and the results summed with their weights.
template <class W>
DiscMeasure<W> extend(const DiscMeasure<W>& mu, const Kernel<W>& k) {
  DiscMeasure<W> out;
  for (const auto& [p, w] : mu) {
    if (p.is_e())
      out.add(p, w);
    else
      out.add(k(p.store, p.t), w);
  }
  return out;
}

template <class W>
std::function<DiscMeasure<W>(const DiscMeasure<W>&)> kleisli_extend(Kernel<W> k) {
  return [k = std::move(k)](const DiscMeasure<W>& mu) { return extend(mu, k); };
}

/// (mu restricted to E, mu restricted to X).
template <class W>
std::pair<DiscMeasure<W>, DiscMeasure<W>> mass_split(const DiscMeasure<W>& mu) {
  std::pair<DiscMeasure<W>, DiscMeasure<W>> out;
  for (const auto& [p, w] : mu) (p.is_e() ? out.first : out.second).add(p, w);
  return out;
}

/// Total variation norm of mu - nu on the union of the supports.
template <class W>
W tv_distance(const DiscMeasure<W>& mu, const DiscMeasure<W>& nu) {
  // merge in point order so the sum is the same for (mu, nu) and (nu, mu)
  W total(0);
  auto a = mu.begin(), b = nu.begin();
  while (a != mu.end() || b != nu.end()) {
    if (b == nu.end() || (a != mu.end() && a->first < b->first)) {
      total += a++->second;
    } else if (a == mu.end() || b->first < a->first) {
      total += b++->second;
    } else {
      total += a->second < b->second ? b->second - a->second : a->second - b->second;
      ++a, ++b;
    }
  }
  return total;
}

/// k equally weighted midpoint atoms standing in for the uniform distribution.
struct Discretization {
  std::size_t k = 2;

  explicit Discretization(std::size_t k_) : k(k_) {
    if (k == 0) throw std::invalid_argument("discretization needs k >= 1");
  }

  std::vector<double> atoms() const {
    std::vector<double> a(k);
    for (std::size_t i = 0; i < k; ++i) a[i] = static_cast<double>(2 * i + 1) / static_cast<double>(2 * k);
    return a;
  }

  template <class W = double>
  W weight() const {
    return W(1) / W(static_cast<long long>(k));
  }
};

namespace detail {

template <class W>
struct Denotation {
  std::vector<double> atoms;
  W atom_weight;
  std::size_t max_iter;
  FlowMethod method;

  DiscMeasure<W> at(const ProgramPtr& p, const Store& sigma, double t) const {
    return std::visit(
        [&](const auto& n) -> DiscMeasure<W> {
          using T = std::decay_t<decltype(n)>;
          DiscMeasure<W> out;
          if constexpr (std::is_same_v<T, Sample>) {
            for (double a : atoms) out.add(Point::x(sigma.update(n.var, a), t), atom_weight);
          } else if constexpr (std::is_same_v<T, Assign>) {
            if (auto v = eval_expr(n.value, sigma)) out.add(Point::x(sigma.update(n.var, *v), t), W(1));
          } else if constexpr (std::is_same_v<T, DiffBlock>) {
            auto d = eval_expr(n.duration, sigma);
            if (!d || *d < 0.0) return out;
            if (*d > t) {
              if (auto end = flow(*n.system, sigma, t, method)) out.add(Point::e(*end), W(1));
            } else if (auto end = flow(*n.system, sigma, *d, method)) {
              out.add(Point::x(*end, t - *d), W(1));
            }
          } else if constexpr (std::is_same_v<T, Seq>) {
            return then(at(n.first, sigma, t), [&](const Store& s, double u) { return at(n.second, s, u); });
          } else if constexpr (std::is_same_v<T, If>) {
            auto b = eval_bool(n.cond, sigma);
            if (b) return at(*b ? n.then_branch : n.else_branch, sigma, t);
          } else {
            return approximant(n, max_iter, sigma, t);
          }
          return out;
        },
        p->node);
  }

  template <class F>
  static DiscMeasure<W> then(const DiscMeasure<W>& mu, F&& k) {
    DiscMeasure<W> out;
    for (const auto& [p, w] : mu) {
      if (p.is_e())
        out.add(p, w);
      else
        out.add(k(p.store, p.t), w);
    }
    return out;
  }

  // g_0 = 0, g_{i+1}(sigma, t) = g_i* (body(sigma, t)) when the guard holds
  DiscMeasure<W> approximant(const While& w, std::size_t i, const Store& sigma, double t) const {
    if (i == 0) return {};
    auto b = eval_bool(w.cond, sigma);
    if (!b) return {};
    if (!*b) return dirac<W>(Point::x(sigma, t));
    return then(at(w.body, sigma, t), [&](const Store& s, double u) { return approximant(w, i - 1, s, u); });
  }
};

}  // namespace detail

/// Denotation of p with sampling read through d and loops cut at the
/// max_iter-th Kleene approximant.
template <class W = double>
Kernel<W> denote(ProgramPtr p, const Discretization& d, std::size_t max_iter,
                 FlowMethod method = FlowMethod::automatic()) {
  auto den = std::make_shared<detail::Denotation<W>>(
      detail::Denotation<W>{d.atoms(), d.weight<W>(), max_iter, method});
  return [den, p = std::move(p)](const Store& sigma, double t) { return den->at(p, sigma, t); };
}

class BranchExplosion : public std::runtime_error {
 public:
  BranchExplosion(std::size_t cap, std::size_t live)
      : std::runtime_error("branch explosion: " + std::to_string(live) + " live branches exceed the cap of " +
                           std::to_string(cap)),
        cap_(cap),
        live_(live) {}
  std::size_t cap() const { return cap_; }
  std::size_t live() const { return live_; }

 private:
  std::size_t cap_, live_;
};

inline constexpr std::size_t default_branch_cap = 10'000'000;

/// Operational side of adequacy: eval_functional run on every branch of a
/// k-ary enumerator, each branch weighted by (1/k)^draws.
template <class W = double>
DiscMeasure<W> enumerate_operational(const ProgramPtr& p, const Store& sigma, double t, const Discretization& d,
                                     std::size_t max_unfold, std::size_t cap = default_branch_cap,
                                     FlowMethod method = FlowMethod::automatic()) {
  auto atoms = std::make_shared<const std::vector<double>>(d.atoms());
  const W atom_weight = d.weight<W>();
  DiscMeasure<W> out;
  std::vector<std::pair<std::vector<std::size_t>, W>> stack{{{}, W(1)}};
  std::size_t leaves = 0;
  while (!stack.empty()) {
    auto [path, weight] = std::move(stack.back());
    stack.pop_back();
    FunOutcome r;
    try {
      r = eval_functional(p, sigma, t, EntropySource::enumerator(atoms, path), max_unfold, method);
    } catch (const EntropyExhausted&) {
      for (std::size_t i = d.k; i-- > 0;) {
        auto next = path;
        next.push_back(i);
        stack.emplace_back(std::move(next), weight * atom_weight);
      }
      if (leaves + stack.size() > cap) throw BranchExplosion(cap, leaves + stack.size());
      continue;
    }
    ++leaves;
    if (const auto* n = std::get_if<Normal>(&r))
      out.add(Point::x(n->store, n->t), weight);
    else if (const auto* ts = std::get_if<TimeStop>(&r))
      out.add(Point::e(ts->store), weight);
  }
  return out;
}

template <class W = double>
struct AdequacyResult {
  DiscMeasure<W> operational, denotational;
  W tv;
  bool pass;
};

inline constexpr double adequacy_tolerance = 1e-9;

/// Compare the enumerated operational measure with the denotation, both
/// pushed forward from mu0 with the same loop bound.
template <class W = double>
AdequacyResult<W> adequacy_check(const ProgramPtr& p, const DiscMeasure<W>& mu0, const Discretization& d,
                                 std::size_t bound, std::size_t cap = default_branch_cap,
                                 FlowMethod method = FlowMethod::automatic()) {
  Kernel<W> op = [&](const Store& s, double t) { return enumerate_operational<W>(p, s, t, d, bound, cap, method); };
  AdequacyResult<W> r{extend(mu0, op), extend(mu0, denote<W>(p, d, bound, method)), W(0), false};
  r.tv = tv_distance(r.operational, r.denotational);
  r.pass = to_double(r.tv) <= adequacy_tolerance;
  return r;
}

inline nlohmann::json point_json(const Point& p) {
  nlohmann::json j{{"kind", p.is_e() ? "E" : "X"}, {"store", store_json(p.store)}};
  if (!p.is_e()) j["t"] = p.t;
  return j;
}

template <class W>
nlohmann::json measure_json(const DiscMeasure<W>& mu) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& [p, w] : mu) {
    auto j = point_json(p);
    j["weight"] = to_double(w);
    if constexpr (!std::is_arithmetic_v<W>) j["exact-weight"] = w.str();
    a.push_back(std::move(j));
  }
  return a;
}

/// Adequacy over a time grid, starting from Dirac measures at (sigma0, t).
template <class W = double>
nlohmann::json adequacy_report(const ProgramPtr& p, const VarTable& vars, const Store& sigma0,
                               const Discretization& d, std::size_t bound, const std::vector<double>& times,
                               std::size_t cap = default_branch_cap, FlowMethod method = FlowMethod::automatic()) {
  nlohmann::json sizes = nlohmann::json::array(), per_t = nlohmann::json::array();
  double worst = 0.0;
  bool pass = true;
  for (double t : times) {
    auto r = adequacy_check<W>(p, dirac<W>(Point::x(sigma0, t)), d, bound, cap, method);
    double tv = to_double(r.tv);
    worst = std::max(worst, tv);
    pass = pass && r.pass;
    sizes.push_back({{"t", t}, {"operational", r.operational.size()}, {"denotational", r.denotational.size()}});
    per_t.push_back({{"t", t},
                     {"tv", tv},
                     {"operational-mass", to_double(r.operational.mass())},
                     {"denotational-mass", to_double(r.denotational.mass())}});
  }
  return {{"program", pretty_print(p, vars)},
          {"k", d.k},
          {"N", bound},
          {"t-grid", times},
          {"tv", worst},
          {"pass", pass},
          {"supports-sizes", sizes},
          {"per-t", per_t},
          {"weights", std::is_arithmetic_v<W> ? "double" : "rational"}};
}

}  // namespace hybrid
