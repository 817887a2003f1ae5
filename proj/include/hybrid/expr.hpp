#pragma once

#include <charconv>
#include <cstddef>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace hybrid {

/// The fixed stock of partial primitive functions. Extending the language
/// with a new primitive means adding an entry here and in `primitive_table`.
enum class Prim { Add, Sub, Mul, Div, Neg, Ln, Sqrt, Sin, Cos, Euler, Pi };

struct PrimInfo {
  Prim prim;
  std::string_view name;
  std::size_t arity;
};

// Named primitives callable as `name(args)`. Operators are not listed.
inline constexpr PrimInfo primitive_table[] = {
    {Prim::Ln, "ln", 1},     {Prim::Sqrt, "sqrt", 1}, {Prim::Sin, "sin", 1},
    {Prim::Cos, "cos", 1},   {Prim::Euler, "euler", 1}, {Prim::Pi, "pi", 0},
};

inline std::optional<PrimInfo> lookup_primitive(std::string_view name) {
  for (const auto& info : primitive_table)
    if (info.name == name) return info;
  return std::nullopt;
}

inline std::size_t arity(Prim p) {
  switch (p) {
    case Prim::Add:
    case Prim::Sub:
    case Prim::Mul:
    case Prim::Div:
      return 2;
    case Prim::Pi:
      return 0;
    default:
      return 1;
  }
}

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Const {
  double value;
};
struct VarRef {
  std::size_t index;
};
struct Apply {
  Prim prim;
  std::vector<ExprPtr> args;
};

struct Expr {
  std::variant<Const, VarRef, Apply> node;
};

inline ExprPtr lit(double v) { return std::make_shared<const Expr>(Expr{Const{v}}); }
inline ExprPtr var(std::size_t i) { return std::make_shared<const Expr>(Expr{VarRef{i}}); }
inline ExprPtr apply(Prim p, std::vector<ExprPtr> args) {
  if (args.size() != arity(p)) throw std::invalid_argument("primitive arity mismatch");
  return std::make_shared<const Expr>(Expr{Apply{p, std::move(args)}});
}
inline ExprPtr add(ExprPtr a, ExprPtr b) { return apply(Prim::Add, {std::move(a), std::move(b)}); }
inline ExprPtr sub(ExprPtr a, ExprPtr b) { return apply(Prim::Sub, {std::move(a), std::move(b)}); }
inline ExprPtr mul(ExprPtr a, ExprPtr b) { return apply(Prim::Mul, {std::move(a), std::move(b)}); }
inline ExprPtr div(ExprPtr a, ExprPtr b) { return apply(Prim::Div, {std::move(a), std::move(b)}); }
inline ExprPtr neg(ExprPtr a) { return apply(Prim::Neg, {std::move(a)}); }

inline bool is_literal(const ExprPtr& e, double v) {
  const auto* c = std::get_if<Const>(&e->node);
  return c != nullptr && c->value == v;
}

inline bool operator==(const Expr& a, const Expr& b);

inline bool same(const ExprPtr& a, const ExprPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return *a == *b;
}

inline bool operator==(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const auto* c = std::get_if<Const>(&a.node)) return c->value == std::get<Const>(b.node).value;
  if (const auto* v = std::get_if<VarRef>(&a.node)) return v->index == std::get<VarRef>(b.node).index;
  const auto& x = std::get<Apply>(a.node);
  const auto& y = std::get<Apply>(b.node);
  if (x.prim != y.prim || x.args.size() != y.args.size()) return false;
  for (std::size_t i = 0; i < x.args.size(); ++i)
    if (!same(x.args[i], y.args[i])) return false;
  return true;
}

struct BoolExpr;
using BoolExprPtr = std::shared_ptr<const BoolExpr>;

struct Leq {
  ExprPtr lhs, rhs;
};
struct And {
  BoolExprPtr lhs, rhs;
};
struct Or {
  BoolExprPtr lhs, rhs;
};
struct BoolLit {
  bool value;
};

struct BoolExpr {
  std::variant<Leq, And, Or, BoolLit> node;
};

inline BoolExprPtr leq(ExprPtr a, ExprPtr b) {
  return std::make_shared<const BoolExpr>(BoolExpr{Leq{std::move(a), std::move(b)}});
}
inline BoolExprPtr conj(BoolExprPtr a, BoolExprPtr b) {
  return std::make_shared<const BoolExpr>(BoolExpr{And{std::move(a), std::move(b)}});
}
inline BoolExprPtr disj(BoolExprPtr a, BoolExprPtr b) {
  return std::make_shared<const BoolExpr>(BoolExpr{Or{std::move(a), std::move(b)}});
}
inline BoolExprPtr truth(bool v) { return std::make_shared<const BoolExpr>(BoolExpr{BoolLit{v}}); }

inline bool same(const BoolExprPtr& a, const BoolExprPtr& b) {
  if (a == b) return true;
  if (!a || !b || a->node.index() != b->node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b->node);
        if constexpr (std::is_same_v<T, Leq>)
          return same(x.lhs, y.lhs) && same(x.rhs, y.rhs);
        else if constexpr (std::is_same_v<T, BoolLit>)
          return x.value == y.value;
        else
          return same(x.lhs, y.lhs) && same(x.rhs, y.rhs);
      },
      a->node);
}

/// Ordered set of the program's variables. Stores are indexed by position.
class VarTable {
 public:
  VarTable() = default;
  explicit VarTable(std::vector<std::string> names) {
    for (auto& n : names) intern(n);
  }

  std::size_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, names_.size());
    if (inserted) names_.push_back(name);
    return it->second;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t at(std::string_view name) const {
    auto i = find(name);
    if (!i) throw std::out_of_range("unknown variable '" + std::string(name) + "'");
    return *i;
  }

  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool operator==(const VarTable& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Shortest decimal text that reads back to the same double.
inline std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace hybrid
