#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <utility>
#include <variant>
#include <vector>

#include "hybrid/ode.hpp"

namespace hybrid {

struct Program;
using ProgramPtr = std::shared_ptr<const Program>;

/// `x1' = e1, ..., xk' = ek for d`. `listing` keeps the derivatives as
/// written; `system` is the dense form over all n variables, unlisted
/// variables having derivative 0.
struct DiffBlock {
  std::vector<std::pair<std::size_t, ExprPtr>> listing;
  ExprPtr duration;
  std::shared_ptr<const OdeSystem> system;
};

struct Assign {
  std::size_t var;
  ExprPtr value;
};

/// `x := unif(0,1)`, the only primitive source of randomness.
struct Sample {
  std::size_t var;
};

struct Seq {
  ProgramPtr first, second;
};

struct If {
  BoolExprPtr cond;
  ProgramPtr then_branch, else_branch;
};

struct While {
  BoolExprPtr cond;
  ProgramPtr body;
};

struct Program {
  std::variant<DiffBlock, Assign, Sample, Seq, If, While> node;
};

inline ProgramPtr make_diff(std::vector<std::pair<std::size_t, ExprPtr>> listing, ExprPtr duration,
                            std::size_t n) {
  std::vector<ExprPtr> dense(n, nullptr);
  for (const auto& [v, e] : listing) {
    if (v >= n) throw std::out_of_range("derivative for unknown variable");
    if (dense[v]) throw std::invalid_argument("variable differentiated twice in one block");
    dense[v] = e;
  }
  for (auto& e : dense)
    if (!e) e = lit(0.0);
  auto sys = std::make_shared<const OdeSystem>(std::move(dense));
  return std::make_shared<const Program>(Program{DiffBlock{std::move(listing), std::move(duration), std::move(sys)}});
}

/// `wait e`: every derivative is 0 for e time units.
inline ProgramPtr desugar_wait(ExprPtr duration, std::size_t n) { return make_diff({}, std::move(duration), n); }

inline ProgramPtr make_assign(std::size_t x, ExprPtr e) {
  return std::make_shared<const Program>(Program{Assign{x, std::move(e)}});
}
inline ProgramPtr make_sample(std::size_t x) { return std::make_shared<const Program>(Program{Sample{x}}); }
inline ProgramPtr make_seq(ProgramPtr a, ProgramPtr b) {
  return std::make_shared<const Program>(Program{Seq{std::move(a), std::move(b)}});
}
inline ProgramPtr make_if(BoolExprPtr b, ProgramPtr p, ProgramPtr q) {
  return std::make_shared<const Program>(Program{If{std::move(b), std::move(p), std::move(q)}});
}
inline ProgramPtr make_while(BoolExprPtr b, ProgramPtr body) {
  return std::make_shared<const Program>(Program{While{std::move(b), std::move(body)}});
}

/// Right-nested sequence of the given statements.
inline ProgramPtr make_block(std::vector<ProgramPtr> stmts) {
  if (stmts.empty()) throw std::invalid_argument("empty block");
  ProgramPtr out = stmts.back();
  for (auto it = stmts.rbegin() + 1; it != stmts.rend(); ++it) out = make_seq(*it, out);
  return out;
}

/// Rebuild with every Seq right-associated: (p ; q) ; r becomes p ; (q ; r).
inline ProgramPtr normalize_seq(const ProgramPtr& p) {
  return std::visit(
      [&](const auto& n) -> ProgramPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Seq>) {
          std::vector<ProgramPtr> flat;
          auto collect = [&](auto&& self, const ProgramPtr& q) -> void {
            if (const auto* s = std::get_if<Seq>(&q->node)) {
              self(self, s->first);
              self(self, s->second);
            } else {
              flat.push_back(normalize_seq(q));
            }
          };
          collect(collect, p);
          return make_block(std::move(flat));
        } else if constexpr (std::is_same_v<T, If>) {
          return make_if(n.cond, normalize_seq(n.then_branch), normalize_seq(n.else_branch));
        } else if constexpr (std::is_same_v<T, While>) {
          return make_while(n.cond, normalize_seq(n.body));
        } else {
          return p;
        }
      },
      p->node);
}

namespace detail {

inline std::map<std::size_t, ExprPtr> nonzero_derivatives(const DiffBlock& d) {
  std::map<std::size_t, ExprPtr> out;
  for (const auto& [v, e] : d.listing)
    if (!is_literal(e, 0.0)) out.emplace(v, e);
  return out;
}

}  // namespace detail

/// Structural equality. Differential blocks compare by their dense
/// derivative assignment, not by the order the derivatives were written in.
inline bool same(const ProgramPtr& a, const ProgramPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, DiffBlock>) {
          if (!same(x.duration, y.duration)) return false;
          auto dx = detail::nonzero_derivatives(x), dy = detail::nonzero_derivatives(y);
          if (dx.size() != dy.size()) return false;
          for (const auto& [v, e] : dx) {
            auto it = dy.find(v);
            if (it == dy.end() || !same(e, it->second)) return false;
          }
          return true;
        } else if constexpr (std::is_same_v<T, Assign>) {
          return x.var == y.var && same(x.value, y.value);
        } else if constexpr (std::is_same_v<T, Sample>) {
          return x.var == y.var;
        } else if constexpr (std::is_same_v<T, Seq>) {
          return same(x.first, y.first) && same(x.second, y.second);
        } else if constexpr (std::is_same_v<T, If>) {
          return same(x.cond, y.cond) && same(x.then_branch, y.then_branch) && same(x.else_branch, y.else_branch);
        } else {
          return same(x.cond, y.cond) && same(x.body, y.body);
        }
      },
      a->node);
}

/// Leftmost statement of the sequence spine, the one the next step acts on.
inline const Program& head_statement(const Program& p) {
  const Program* cur = &p;
  while (const auto* s = std::get_if<Seq>(&cur->node)) cur = s->first.get();
  return *cur;
}

/// Number of sampling instructions in the program text.
inline std::size_t count_samples(const ProgramPtr& p) {
  return std::visit(
      [](const auto& n) -> std::size_t {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Sample>)
          return 1;
        else if constexpr (std::is_same_v<T, Seq>)
          return count_samples(n.first) + count_samples(n.second);
        else if constexpr (std::is_same_v<T, If>)
          return count_samples(n.then_branch) + count_samples(n.else_branch);
        else if constexpr (std::is_same_v<T, While>)
          return count_samples(n.body);
        else
          return 0;
      },
      p->node);
}

/// Parse result: the program and the variables it ranges over.
struct ParsedProgram {
  ProgramPtr program;
  VarTable vars;
};

}  // namespace hybrid
