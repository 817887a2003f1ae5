#pragma once

#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "hybrid/entropy.hpp"
#include "hybrid/program.hpp"

namespace hybrid {

/// Evaluation tuple (p, sigma, t, s). A null program is the empty stack, skip.
struct Config {
  ProgramPtr program;
  Store store;
  double t = 0.0;
  EntropySource entropy;

  bool is_skip() const { return program == nullptr; }
};

inline bool operator==(const Config& a, const Config& b) {
  bool programs = (a.is_skip() && b.is_skip()) || (!a.is_skip() && !b.is_skip() && same(a.program, b.program));
  return programs && a.store == b.store && a.t == b.t && a.entropy == b.entropy;
}

enum class Rule {
  AsgRnd, Asg, AsgErr,
  DiffStop, DiffSkip, DiffErr,
  IfTrue, IfFalse, IfErr,
  WhTrue, WhFalse, WhErr,
  SeqStop, SeqSkip, SeqErr, Seq,
};

inline const char* to_string(Rule r) {
  static constexpr const char* names[] = {"asg-rnd", "asg",     "asg-err",  "diff-stop", "diff-skip", "diff-err",
                                          "if-true", "if-false", "if-err",  "wh-true",   "wh-false",  "wh-err",
                                          "seq-stop", "seq-skip", "seq-err", "seq"};
  return names[static_cast<int>(r)];
}

struct Err {
  UndefReason reason;
};

/// Time-based termination: the query time fell strictly inside a flow.
struct TimeStop {
  Store store;
};

/// The stack emptied with time t and entropy s left over.
struct Normal {
  Store store;
  double t;
  EntropySource entropy;
};

struct OutOfFuel {
  std::size_t steps;
};

using Terminal = std::variant<Err, TimeStop, Normal>;
using Outcome = std::variant<Err, TimeStop, Normal, OutOfFuel>;

inline bool operator==(const Err&, const Err&) { return true; }
inline bool operator==(const TimeStop& a, const TimeStop& b) { return a.store == b.store; }
inline bool operator==(const Normal& a, const Normal& b) {
  return a.store == b.store && a.t == b.t && a.entropy == b.entropy;
}
inline bool operator==(const OutOfFuel& a, const OutOfFuel& b) { return a.steps == b.steps; }

struct StepOutcome {
  Rule rule;   // the rule at the root of the derivation
  Rule axiom;  // the premise-free rule at its leaf
  std::variant<Err, TimeStop, Config> result;
};

namespace detail {

inline StepOutcome step_program(const ProgramPtr& p, const Store& sigma, double t, const EntropySource& s,
                                const FlowMethod& method) {
  auto resume = [&](Rule r, ProgramPtr next, Store st, double tt, EntropySource es) {
    return StepOutcome{r, r, Config{std::move(next), std::move(st), tt, std::move(es)}};
  };
  auto err = [](Rule r, UndefReason why) { return StepOutcome{r, r, Err{why}}; };

  return std::visit(
      [&](const auto& n) -> StepOutcome {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Sample>) {
          auto [h, rest] = s.draw();
          return resume(Rule::AsgRnd, nullptr, sigma.update(n.var, h), t, rest);
        } else if constexpr (std::is_same_v<T, Assign>) {
          auto v = eval_expr(n.value, sigma);
          if (!v) return err(Rule::AsgErr, v.reason());
          return resume(Rule::Asg, nullptr, sigma.update(n.var, *v), t, s);
        } else if constexpr (std::is_same_v<T, DiffBlock>) {
          auto d = eval_expr(n.duration, sigma);
          if (!d) return err(Rule::DiffErr, d.reason());
          if (*d < 0.0) return err(Rule::DiffErr, UndefReason::NegativeDuration);
          if (*d > t) {
            auto end = flow(*n.system, sigma, t, method);
            if (!end) return err(Rule::DiffErr, end.reason());
            return StepOutcome{Rule::DiffStop, Rule::DiffStop, TimeStop{*end}};
          }
          auto end = flow(*n.system, sigma, *d, method);
          if (!end) return err(Rule::DiffErr, end.reason());
          return resume(Rule::DiffSkip, nullptr, *end, t - *d, s);
        } else if constexpr (std::is_same_v<T, If>) {
          auto b = eval_bool(n.cond, sigma);
          if (!b) return err(Rule::IfErr, b.reason());
          if (*b) return resume(Rule::IfTrue, n.then_branch, sigma, t, s);
          return resume(Rule::IfFalse, n.else_branch, sigma, t, s);
        } else if constexpr (std::is_same_v<T, While>) {
          auto b = eval_bool(n.cond, sigma);
          if (!b) return err(Rule::WhErr, b.reason());
          if (*b) return resume(Rule::WhTrue, make_seq(n.body, p), sigma, t, s);
          return resume(Rule::WhFalse, nullptr, sigma, t, s);
        } else {
          auto inner = step_program(n.first, sigma, t, s, method);
          if (std::holds_alternative<Err>(inner.result)) return {Rule::SeqErr, inner.axiom, inner.result};
          if (std::holds_alternative<TimeStop>(inner.result)) return {Rule::SeqStop, inner.axiom, inner.result};
          auto& c = std::get<Config>(inner.result);
          if (c.is_skip()) {
            c.program = n.second;
            return {Rule::SeqSkip, inner.axiom, std::move(c)};
          }
          c.program = make_seq(c.program, n.second);
          return {Rule::Seq, inner.axiom, std::move(c)};
        }
      },
      p->node);
}

}  // namespace detail

/// One transition. Exactly one rule matches any non-skip configuration.
inline StepOutcome step(const Config& c, const FlowMethod& method = FlowMethod::automatic()) {
  if (c.is_skip()) throw std::logic_error("step: the empty program has no transitions");
  if (!(c.t >= 0.0)) throw std::invalid_argument("step: remaining time must be non-negative");
  return detail::step_program(c.program, c.store, c.t, c.entropy, method);
}

inline constexpr std::size_t default_fuel = 1'000'000;

struct RunResult {
  Outcome outcome;
  std::size_t steps = 0;
  double remaining = 0.0;  // t of the last configuration reached
};

/// Iterate step until a terminal shape or `fuel` steps have been taken.
inline RunResult run_to_terminal(Config c, std::size_t fuel = default_fuel,
                                 const FlowMethod& method = FlowMethod::automatic()) {
  if (fuel == 0) throw std::invalid_argument("fuel must be positive");
  RunResult r{Err{UndefReason::NonFinite}, 0, c.t};
  if (c.is_skip()) {
    r.outcome = Normal{c.store, c.t, c.entropy};
    return r;
  }
  while (r.steps < fuel) {
    auto out = step(c, method);
    ++r.steps;
    if (auto* e = std::get_if<Err>(&out.result)) {
      r.outcome = *e;
      return r;
    }
    if (auto* ts = std::get_if<TimeStop>(&out.result)) {
      r.outcome = std::move(*ts);
      return r;
    }
    c = std::move(std::get<Config>(out.result));
    r.remaining = c.t;
    if (c.is_skip()) {
      r.outcome = Normal{std::move(c.store), c.t, std::move(c.entropy)};
      return r;
    }
  }
  r.outcome = OutOfFuel{r.steps};
  return r;
}

struct Trace {
  std::vector<Config> configs;  // every configuration visited, the initial one first
  std::vector<Rule> rules;      // rule of each transition
  Outcome outcome;
};

inline Trace trace(Config c, std::size_t fuel = default_fuel, const FlowMethod& method = FlowMethod::automatic()) {
  if (fuel == 0) throw std::invalid_argument("fuel must be positive");
  Trace tr{{c}, {}, OutOfFuel{0}};
  while (!c.is_skip() && tr.rules.size() < fuel) {
    auto out = step(c, method);
    tr.rules.push_back(out.rule);
    if (auto* e = std::get_if<Err>(&out.result)) {
      tr.outcome = *e;
      return tr;
    }
    if (auto* ts = std::get_if<TimeStop>(&out.result)) {
      tr.outcome = *ts;
      return tr;
    }
    c = std::get<Config>(out.result);
    tr.configs.push_back(c);
  }
  if (c.is_skip())
    tr.outcome = Normal{c.store, c.t, c.entropy};
  else
    tr.outcome = OutOfFuel{tr.rules.size()};
  return tr;
}

inline const char* outcome_kind(const Outcome& o) {
  static constexpr const char* names[] = {"err", "time-stop", "normal", "out-of-fuel"};
  return names[o.index()];
}

}  // namespace hybrid
