#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "hybrid/printer.hpp"
#include "hybrid/smallstep.hpp"

namespace hybrid {

namespace detail {

struct BigStep {
  const FlowMethod& method;
  std::size_t unfoldings_left;

  Outcome eval(const ProgramPtr& p, const Store& sigma, double t, const EntropySource& s) {
    return std::visit(
        [&](const auto& n) -> Outcome {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Sample>) {
            auto [h, rest] = s.draw();
            return Normal{sigma.update(n.var, h), t, rest};
          } else if constexpr (std::is_same_v<T, Assign>) {
            auto v = eval_expr(n.value, sigma);
            if (!v) return Err{v.reason()};
            return Normal{sigma.update(n.var, *v), t, s};
          } else if constexpr (std::is_same_v<T, DiffBlock>) {
            auto d = eval_expr(n.duration, sigma);
            if (!d) return Err{d.reason()};
            if (*d < 0.0) return Err{UndefReason::NegativeDuration};
            if (*d > t) {
              auto end = flow(*n.system, sigma, t, method);
              if (!end) return Err{end.reason()};
              return TimeStop{*end};
            }
            auto end = flow(*n.system, sigma, *d, method);
            if (!end) return Err{end.reason()};
            return Normal{*end, t - *d, s};
          } else if constexpr (std::is_same_v<T, Seq>) {
            auto first = eval(n.first, sigma, t, s);
            if (auto* nm = std::get_if<Normal>(&first)) return eval(n.second, nm->store, nm->t, nm->entropy);
            return first;
          } else if constexpr (std::is_same_v<T, If>) {
            auto b = eval_bool(n.cond, sigma);
            if (!b) return Err{b.reason()};
            return eval(*b ? n.then_branch : n.else_branch, sigma, t, s);
          } else {
            // (wh-true) evaluates body ; while, unrolled into a loop here
            Normal cur{sigma, t, s};
            for (;;) {
              auto b = eval_bool(n.cond, cur.store);
              if (!b) return Err{b.reason()};
              if (!*b) return cur;
              if (unfoldings_left == 0) return OutOfFuel{0};
              --unfoldings_left;
              auto r = eval(n.body, cur.store, cur.t, cur.entropy);
              auto* nm = std::get_if<Normal>(&r);
              if (!nm) return r;
              cur = std::move(*nm);
            }
          }
        },
        p->node);
  }
};

}  // namespace detail

/// Big-step evaluation; `fuel` bounds the total number of (wh-true) unfoldings.
inline Outcome eval_big(const Config& c, std::size_t fuel = default_fuel,
                        const FlowMethod& method = FlowMethod::automatic()) {
  if (fuel == 0) throw std::invalid_argument("fuel must be positive");
  if (c.is_skip()) return Normal{c.store, c.t, c.entropy};
  detail::BigStep ev{method, fuel};
  auto out = ev.eval(c.program, c.store, c.t, c.entropy);
  if (auto* o = std::get_if<OutOfFuel>(&out)) o->steps = fuel;
  return out;
}

/// The undefined value of the functional semantics: error or divergence.
struct Bottom {};
inline bool operator==(const Bottom&, const Bottom&) { return true; }

using FunOutcome = std::variant<Normal, TimeStop, Bottom>;

struct FunStats {
  bool truncated = false;  // some loop reached its zeroth approximant
  std::size_t draws = 0;
};

namespace detail {

struct Functional {
  const FlowMethod& method;
  std::size_t index;
  FunStats& stats;

  FunOutcome eval(const ProgramPtr& p, const Store& sigma, double t, const EntropySource& s) {
    return std::visit(
        [&](const auto& n) -> FunOutcome {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Sample>) {
            auto [h, rest] = s.draw();
            ++stats.draws;
            return Normal{sigma.update(n.var, h), t, rest};
          } else if constexpr (std::is_same_v<T, Assign>) {
            auto v = eval_expr(n.value, sigma);
            if (!v) return Bottom{};
            return Normal{sigma.update(n.var, *v), t, s};
          } else if constexpr (std::is_same_v<T, DiffBlock>) {
            auto d = eval_expr(n.duration, sigma);
            if (!d || *d < 0.0) return Bottom{};
            auto end = flow(*n.system, sigma, *d > t ? t : *d, method);
            if (!end) return Bottom{};
            if (*d > t) return TimeStop{*end};
            return Normal{*end, t - *d, s};
          } else if constexpr (std::is_same_v<T, Seq>) {
            auto first = eval(n.first, sigma, t, s);
            if (auto* nm = std::get_if<Normal>(&first)) return eval(n.second, nm->store, nm->t, nm->entropy);
            return first;
          } else if constexpr (std::is_same_v<T, If>) {
            auto b = eval_bool(n.cond, sigma);
            if (!b) return Bottom{};
            return eval(*b ? n.then_branch : n.else_branch, sigma, t, s);
          } else {
            return approximant(n, index, sigma, t, s);
          }
        },
        p->node);
  }

  // f_0 is everywhere undefined; f_{i+1} unfolds the body once and continues with f_i
  FunOutcome approximant(const While& w, std::size_t i, const Store& sigma, double t, const EntropySource& s) {
    Normal cur{sigma, t, s};
    for (;; --i) {
      if (i == 0) {
        stats.truncated = true;
        return Bottom{};
      }
      auto b = eval_bool(w.cond, cur.store);
      if (!b) return Bottom{};
      if (!*b) return cur;
      auto r = eval(w.body, cur.store, cur.t, cur.entropy);
      auto* nm = std::get_if<Normal>(&r);
      if (!nm) return r;
      cur = std::move(*nm);
    }
  }
};

}  // namespace detail

/// Functional semantics with every while loop read as its `fuel`-th Kleene approximant.
inline FunOutcome eval_functional(const ProgramPtr& p, const Store& sigma, double t, const EntropySource& s,
                                  std::size_t fuel, const FlowMethod& method = FlowMethod::automatic(),
                                  FunStats* stats = nullptr) {
  FunStats local;
  FunStats& st = stats ? *stats : local;
  if (!p) return Normal{sigma, t, s};
  detail::Functional ev{method, fuel, st};
  return ev.eval(p, sigma, t, s);
}

inline const char* outcome_kind(const FunOutcome& o) {
  static constexpr const char* names[] = {"normal", "time-stop", "bottom"};
  return names[o.index()];
}

// ---- reports

inline nlohmann::json store_json(const Store& s) {
  nlohmann::json a = nlohmann::json::array();
  for (double v : s.values()) a.push_back(v);
  return a;
}

inline nlohmann::json outcome_json(const Outcome& o) {
  nlohmann::json j{{"kind", outcome_kind(o)}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Err>) {
          j["reason"] = to_string(x.reason);
        } else if constexpr (std::is_same_v<T, TimeStop>) {
          j["store"] = store_json(x.store);
        } else if constexpr (std::is_same_v<T, Normal>) {
          j["store"] = store_json(x.store);
          j["t"] = x.t;
          j["entropy"] = x.entropy.position();
        } else {
          j["steps"] = x.steps;
        }
      },
      o);
  return j;
}

inline nlohmann::json outcome_json(const FunOutcome& o) {
  nlohmann::json j{{"kind", outcome_kind(o)}};
  if (const auto* n = std::get_if<Normal>(&o)) {
    j["store"] = store_json(n->store);
    j["t"] = n->t;
    j["entropy"] = n->entropy.position();
  } else if (const auto* ts = std::get_if<TimeStop>(&o)) {
    j["store"] = store_json(ts->store);
  }
  return j;
}

struct AgreementReport {
  Outcome small, big;
  FunOutcome functional;
  bool skipped = false;  // some evaluator was cut off by its budget
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

inline bool same_terminal(const Outcome& a, const FunOutcome& f) {
  if (auto* n = std::get_if<Normal>(&a)) {
    auto* m = std::get_if<Normal>(&f);
    return m && *n == *m;
  }
  if (auto* ts = std::get_if<TimeStop>(&a)) {
    auto* us = std::get_if<TimeStop>(&f);
    return us && *ts == *us;
  }
  return false;
}

/// Runs the small-step, big-step and functional evaluators on one input and
/// checks the equivalence and implications that relate them.
inline AgreementReport check_agreement(const ProgramPtr& p, const Store& sigma, double t, const EntropySource& s,
                                       std::size_t fuel, const FlowMethod& method = FlowMethod::automatic()) {
  Config c{p, sigma, t, s};
  FunStats stats;
  AgreementReport r{run_to_terminal(c, fuel, method).outcome, eval_big(c, fuel, method),
                    eval_functional(p, sigma, t, s, fuel, method, &stats), false, {}};
  bool small_cut = std::holds_alternative<OutOfFuel>(r.small);
  bool big_cut = std::holds_alternative<OutOfFuel>(r.big);
  r.skipped = small_cut || big_cut || stats.truncated;
  if (r.skipped) return r;

  if (!(r.small == r.big)) r.violations.push_back("small-step and big-step terminals differ");
  bool fun_bottom = std::holds_alternative<Bottom>(r.functional);
  if (std::holds_alternative<Err>(r.big)) {
    if (!fun_bottom) r.violations.push_back("big-step err but functional result defined");
  } else if (!same_terminal(r.big, r.functional)) {
    r.violations.push_back("big-step and functional results differ");
  }
  if (fun_bottom && !std::holds_alternative<Err>(r.big))
    r.violations.push_back("functional bottom but big-step neither err nor out of fuel");
  return r;
}

inline nlohmann::json to_json(const AgreementReport& r) {
  return {{"small-step", outcome_json(r.small)},
          {"big-step", outcome_json(r.big)},
          {"functional", outcome_json(r.functional)},
          {"skipped", r.skipped},
          {"violations", r.violations}};
}

/// Tally of many agreement checks with the first failing witness.
struct AgreementSummary {
  std::size_t cases = 0, skipped = 0, violations = 0;
  nlohmann::json first_counterexample;

  void add(const AgreementReport& r, const ProgramPtr& p, const VarTable& vars, const Store& sigma, double t) {
    ++cases;
    if (r.skipped) ++skipped;
    if (r.ok()) return;
    if (violations++ == 0) {
      first_counterexample = to_json(r);
      first_counterexample["program"] = pretty_print(p, vars);
      first_counterexample["store"] = store_json(sigma);
      first_counterexample["t"] = t;
    }
  }

  nlohmann::json json() const {
    return {{"cases", cases},
            {"skipped", skipped},
            {"violations", violations},
            {"first-counterexample", first_counterexample}};
  }
};

}  // namespace hybrid
