#pragma once
// Shared fixtures: program corpus, random AST generator, exhaustive grammar.

#include <algorithm>
#include <cmath>
#include <set>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hybrid/hybrid.hpp"

namespace hybrid::fixtures {

inline std::string programs_dir() { return HYBRID_PROGRAMS_DIR; }

inline ParsedProgram load_program(const std::string& name) {
  std::ifstream in(programs_dir() + "/" + name + ".hyb");
  if (!in) throw std::runtime_error("missing program " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_program(ss.str());
}

struct CorpusEntry {
  std::string name;
  ParsedProgram parsed;
  Store init;
};

inline Store with_inits(const VarTable& vars, const std::vector<std::pair<std::string, double>>& inits) {
  Store s(vars.size());
  for (const auto& [n, v] : inits) s = s.update(vars.at(n), v);
  return s;
}

/// The six worked examples with their loop parameters fixed.
inline std::vector<CorpusEntry> example_corpus() {
  std::vector<CorpusEntry> out;
  auto add = [&](const std::string& name, std::vector<std::pair<std::string, double>> inits) {
    auto pp = load_program(name);
    auto init = with_inits(pp.vars, inits);
    out.push_back({name, std::move(pp), std::move(init)});
  };
  add("random_walk", {{"n", 3}});
  add("ctrw", {});
  add("ball", {});
  add("einstein", {{"lambda", 1}});
  add("positioning", {});
  add("stop", {});
  return out;
}

/// Examples plus the remaining regression programs.
inline std::vector<CorpusEntry> regression_corpus() {
  auto out = example_corpus();
  out[0].init = with_inits(out[0].parsed.vars, {{"n", 10}});
  for (auto name : {"ctrw_count", "positioning_exact", "acc", "acc_exp", "pendulum"}) {
    auto pp = load_program(name);
    Store init(pp.vars.size());
    out.push_back({name, std::move(pp), std::move(init)});
  }
  return out;
}

// ---- random ASTs

class Generator {
 public:
  Generator(std::uint64_t seed, std::size_t nvars) : rng_(seed), n_(nvars) {}

  std::size_t pick(std::size_t k) { return std::uniform_int_distribution<std::size_t>(0, k - 1)(rng_); }
  bool coin(double p = 0.5) { return std::bernoulli_distribution(p)(rng_); }

  ExprPtr literal() {
    static constexpr double pool[] = {0, 1, 2, 0.5, 3.25, -1, -0.75, 10};
    return lit(pool[pick(std::size(pool))]);
  }

  ExprPtr expr(int depth) {
    if (depth <= 0 || coin(0.3)) return coin() ? var(pick(n_)) : literal();
    switch (pick(10)) {
      case 0: return add(expr(depth - 1), expr(depth - 1));
      case 1: return sub(expr(depth - 1), expr(depth - 1));
      case 2: return mul(expr(depth - 1), expr(depth - 1));
      case 3: return div(expr(depth - 1), expr(depth - 1));
      case 4: return neg(expr(depth - 1));
      case 5: return apply(Prim::Ln, {expr(depth - 1)});
      case 6: return apply(Prim::Sqrt, {expr(depth - 1)});
      case 7: return apply(coin() ? Prim::Sin : Prim::Cos, {expr(depth - 1)});
      case 8: return apply(Prim::Euler, {expr(depth - 1)});
      default: return apply(Prim::Pi, {});
    }
  }

  BoolExprPtr cond(int depth) {
    if (depth <= 0 || coin(0.5)) {
      if (coin(0.15)) return truth(coin());
      return leq(expr(2), expr(2));
    }
    return coin() ? conj(cond(depth - 1), cond(depth - 1)) : disj(cond(depth - 1), cond(depth - 1));
  }

  /// Affine derivatives keep flows exact; set `affine` false for arbitrary ones.
  ExprPtr derivative(bool affine) {
    if (!affine) return expr(2);
    auto e = literal();
    for (std::size_t j = 0; j < n_; ++j)
      if (coin(0.4)) e = add(mul(literal(), var(j)), e);
    return e;
  }

  ProgramPtr atomic(bool affine) {
    switch (pick(5)) {
      case 0:
      case 1: return make_assign(pick(n_), expr(2));
      case 2: return make_sample(pick(n_));
      case 3: return desugar_wait(coin() ? literal() : expr(1), n_);
      default: {
        std::vector<std::pair<std::size_t, ExprPtr>> listing;
        for (std::size_t j = 0; j < n_; ++j)
          if (coin(0.6)) listing.emplace_back(j, derivative(affine));
        if (listing.empty()) listing.emplace_back(pick(n_), derivative(affine));
        std::shuffle(listing.begin(), listing.end(), rng_);
        return make_diff(std::move(listing), coin() ? literal() : expr(1), n_);
      }
    }
  }

  ProgramPtr program(int depth, bool affine = true) {
    if (depth <= 0 || coin(0.3)) return atomic(affine);
    switch (pick(4)) {
      case 0:
      case 1: return make_seq(program(depth - 1, affine), program(depth - 1, affine));
      case 2: return make_if(cond(1), program(depth - 1, affine), program(depth - 1, affine));
      default: {
        // half the loops count a variable up to a bound so they usually exit
        if (coin()) {
          std::size_t c = pick(n_);
          auto body = make_seq(program(depth - 1, affine), make_assign(c, add(var(c), lit(1))));
          return make_while(leq(var(c), lit(static_cast<double>(pick(4)))), body);
        }
        return make_while(cond(1), program(depth - 1, affine));
      }
    }
  }

  Store store() {
    std::vector<double> v(n_);
    for (auto& x : v) x = std::uniform_real_distribution<double>(-2.0, 3.0)(rng_);
    return Store(std::move(v));
  }

  double time() {
    static constexpr double pool[] = {0, 0.5, 1, 1.5, 2, 3.5, 5};
    return pool[pick(std::size(pool))];
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  std::mt19937_64 rng_;
  std::size_t n_;
};

inline VarTable names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, static_cast<char>('x' + i % 3)) + (i >= 3 ? std::to_string(i) : ""));
  return VarTable(out);
}

// ---- exhaustive grammar over x, y

/// Every program of AST depth <= 3 built from a small stock of atoms and guards.
inline std::vector<ProgramPtr> exhaustive_programs() {
  const std::size_t x = 0, y = 1, n = 2;
  std::vector<ProgramPtr> atoms{
      make_assign(x, add(var(x), lit(1))),
      make_assign(y, div(lit(1), var(x))),
      make_sample(x),
      make_diff({{x, lit(1)}, {y, var(x)}}, var(x), n),
  };
  std::vector<BoolExprPtr> guards{leq(var(x), var(y)), leq(apply(Prim::Ln, {var(x)}), lit(0))};

  auto grow = [&](const std::vector<ProgramPtr>& kids) {
    std::vector<ProgramPtr> out;
    for (const auto& a : kids)
      for (const auto& b : kids) {
        out.push_back(make_seq(a, b));
        for (const auto& g : guards) out.push_back(make_if(g, a, b));
      }
    for (const auto& a : kids)
      for (const auto& g : guards) out.push_back(make_while(g, a));
    return out;
  };
  auto upto2 = atoms;
  for (auto& p : grow(atoms)) upto2.push_back(p);
  auto all = upto2;
  for (auto& p : grow(upto2)) all.push_back(normalize_seq(p));
  return all;
}

/// All entropy prefixes of length <= 3 over the atoms {0.25, 0.75}.
inline std::vector<EntropySource> exhaustive_prefixes() {
  std::vector<EntropySource> out;
  for (std::size_t len = 0; len <= 3; ++len)
    for (std::size_t mask = 0; mask < (1u << len); ++mask) {
      std::vector<double> v;
      for (std::size_t i = 0; i < len; ++i) v.push_back((mask >> i) & 1 ? 0.75 : 0.25);
      out.push_back(EntropySource::finite(v));
    }
  return out;
}

/// A deterministic pseudo-random kernel: the output depends only on (store, t).
/// Outputs mix E- and X-points drawn from a small pool and have mass <= 1.
inline Kernel<double> random_kernel(std::uint64_t seed, std::size_t n) {
  return [seed, n](const Store& s, double t) {
    std::uint64_t h = mix64(seed);
    for (double v : s.values()) h = mix64(h ^ std::hash<double>{}(v));
    h = mix64(h ^ std::hash<double>{}(t));
    std::mt19937_64 rng(h);
    std::uniform_int_distribution<int> small(0, 3);
    std::size_t width = 1 + rng() % 3;
    double budget = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
    DiscMeasure<double> out;
    for (std::size_t i = 0; i < width; ++i) {
      std::vector<double> v(n);
      for (auto& x : v) x = small(rng);
      double w = budget / static_cast<double>(width);
      if (rng() % 4 == 0)
        out.add(Point::e(Store(v)), w);
      else
        out.add(Point::x(Store(v), static_cast<double>(small(rng))), w);
    }
    return out;
  };
}

/// Random finite measure over the same point pool, total mass <= 1.
inline DiscMeasure<double> random_measure(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<int> small(0, 3);
  std::size_t width = 1 + rng() % 5;
  DiscMeasure<double> out;
  for (std::size_t i = 0; i < width; ++i) {
    std::vector<double> v(n);
    for (auto& x : v) x = small(rng);
    double w = std::uniform_real_distribution<double>(0.0, 1.0)(rng) / static_cast<double>(width);
    if (rng() % 4 == 0)
      out.add(Point::e(Store(v)), w);
    else
      out.add(Point::x(Store(v), static_cast<double>(small(rng))), w);
  }
  return out;
}

// ---- reference samplers built on the standard library alone

/// Mean and sample std of x = (sum of n+1 fair +-1 steps) / sqrt(n).
inline std::pair<double, double> reference_random_walk(int n, int runs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  double sum = 0, sq = 0;
  for (int r = 0; r < runs; ++r) {
    int x = 0;
    for (int i = 0; i <= n; ++i) x += coin(rng) ? 1 : -1;
    double v = x / std::sqrt(static_cast<double>(n));
    sum += v;
    sq += v * v;
  }
  double mean = sum / runs;
  return {mean, std::sqrt((sq - runs * mean * mean) / (runs - 1))};
}

/// Mean number of jumps before time T when jumps happen at 0 and after
/// each uniform(0,1) waiting time.
inline double reference_ctrw_jumps(double horizon, int runs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double total = 0;
  for (int r = 0; r < runs; ++r) {
    double clock = 0;
    int jumps = 0;
    while (clock <= horizon) {
      ++jumps;
      clock += u(rng);
    }
    total += jumps;
  }
  return total / runs;
}

/// Agreement check that treats a prefix running dry as a skipped case.
inline std::optional<AgreementReport> agreement_or_skip(const ProgramPtr& p, const Store& s, double t,
                                                        const EntropySource& e, std::size_t fuel,
                                                        const FlowMethod& m = FlowMethod::automatic()) {
  try {
    return check_agreement(p, s, t, e, fuel, m);
  } catch (const EntropyExhausted&) {
    return std::nullopt;
  }
}

}  // namespace hybrid::fixtures
