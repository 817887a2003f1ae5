#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hybrid/desugar.hpp"
#include "hybrid/program.hpp"

namespace hybrid {

/// Lexical or syntax error with a 1-based source position.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, int column, const std::string& message, bool at_end = false)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column),
        message_(message),
        at_end_(at_end) {}

  int line() const { return line_; }
  int column() const { return column_; }
  const std::string& message() const { return message_; }
  bool at_end() const { return at_end_; }

 private:
  int line_, column_;
  std::string message_;
  bool at_end_;
};

namespace detail {

struct Token {
  enum Kind { Ident, Number, Sym, End } kind;
  std::string text;
  double number = 0.0;
  int line = 1, col = 1;
};

inline bool is_keyword(std::string_view s) {
  static constexpr std::string_view words[] = {"while", "do",   "if",  "then",   "else",      "for",
                                               "wait",  "tt",   "ff",  "unif",   "exp",       "normal",
                                               "bernoulli"};
  for (auto w : words)
    if (w == s) return true;
  return lookup_primitive(s).has_value();
}

inline std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
  auto is_alpha = [](char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; };
  while (i < src.size()) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token tok;
    tok.line = line;
    tok.col = col;
    if (is_alpha(c)) {
      std::size_t j = i;
      while (j < src.size() && (is_alpha(src[j]) || is_digit(src[j]))) ++j;
      tok.kind = Token::Ident;
      tok.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (is_digit(c)) {
      std::size_t j = i;
      while (j < src.size() && is_digit(src[j])) ++j;
      if (j + 1 < src.size() && src[j] == '.' && is_digit(src[j + 1])) {
        ++j;
        while (j < src.size() && is_digit(src[j])) ++j;
      }
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && is_digit(src[k])) {
          while (k < src.size() && is_digit(src[k])) ++k;
          j = k;
        }
      }
      tok.kind = Token::Number;
      tok.text = std::string(src.substr(i, j - i));
      auto res = std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), tok.number);
      if (res.ec != std::errc() || !std::isfinite(tok.number))
        throw ParseError(line, col, "numeric literal out of range '" + tok.text + "'");
      advance(j - i);
    } else {
      static constexpr std::string_view two[] = {":=", "<=", ">=", "&&", "||", "++", "--"};
      tok.kind = Token::Sym;
      for (auto t : two)
        if (src.substr(i, 2) == t) tok.text = std::string(t);
      if (tok.text.empty()) {
        if (std::string_view(";,(){}'=+-*/").find(c) == std::string_view::npos)
          throw ParseError(line, col, std::string("unexpected character '") + c + "'");
        tok.text = std::string(1, c);
      }
      advance(tok.text.size());
    }
    out.push_back(std::move(tok));
  }
  Token end;
  end.kind = Token::End;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

inline ExprPtr rename_expr(const ExprPtr& e, const std::function<std::size_t(std::size_t)>& f) {
  if (const auto* v = std::get_if<VarRef>(&e->node)) return var(f(v->index));
  if (std::holds_alternative<Const>(e->node)) return e;
  const auto& ap = std::get<Apply>(e->node);
  std::vector<ExprPtr> args;
  for (const auto& a : ap.args) args.push_back(rename_expr(a, f));
  return apply(ap.prim, std::move(args));
}

inline BoolExprPtr rename_bool(const BoolExprPtr& b, const std::function<std::size_t(std::size_t)>& f) {
  return std::visit(
      [&](const auto& n) -> BoolExprPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>)
          return b;
        else if constexpr (std::is_same_v<T, Leq>)
          return leq(rename_expr(n.lhs, f), rename_expr(n.rhs, f));
        else if constexpr (std::is_same_v<T, And>)
          return conj(rename_bool(n.lhs, f), rename_bool(n.rhs, f));
        else
          return disj(rename_bool(n.lhs, f), rename_bool(n.rhs, f));
      },
      b->node);
}

inline void collect_vars(const ExprPtr& e, std::vector<std::size_t>& out) {
  if (const auto* v = std::get_if<VarRef>(&e->node)) {
    out.push_back(v->index);
  } else if (const auto* ap = std::get_if<Apply>(&e->node)) {
    for (const auto& a : ap->args) collect_vars(a, out);
  }
}

inline void collect_vars(const BoolExprPtr& b, std::vector<std::size_t>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (!std::is_same_v<T, BoolLit>) {
          collect_vars(n.lhs, out);
          collect_vars(n.rhs, out);
        }
      },
      b->node);
}

// print order, the order the pretty-printer mentions variables in
inline void collect_vars(const ProgramPtr& p, std::vector<std::size_t>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, DiffBlock>) {
          for (const auto& [v, e] : n.listing) {
            out.push_back(v);
            collect_vars(e, out);
          }
          collect_vars(n.duration, out);
        } else if constexpr (std::is_same_v<T, Assign>) {
          out.push_back(n.var);
          collect_vars(n.value, out);
        } else if constexpr (std::is_same_v<T, Sample>) {
          out.push_back(n.var);
        } else if constexpr (std::is_same_v<T, Seq>) {
          collect_vars(n.first, out);
          collect_vars(n.second, out);
        } else if constexpr (std::is_same_v<T, If>) {
          collect_vars(n.cond, out);
          collect_vars(n.then_branch, out);
          collect_vars(n.else_branch, out);
        } else {
          collect_vars(n.cond, out);
          collect_vars(n.body, out);
        }
      },
      p->node);
}

inline ProgramPtr rebuild(const ProgramPtr& p, const std::function<std::size_t(std::size_t)>& f, std::size_t n) {
  return std::visit(
      [&](const auto& x) -> ProgramPtr {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, DiffBlock>) {
          std::vector<std::pair<std::size_t, ExprPtr>> listing;
          for (const auto& [v, e] : x.listing) listing.emplace_back(f(v), rename_expr(e, f));
          return make_diff(std::move(listing), rename_expr(x.duration, f), n);
        } else if constexpr (std::is_same_v<T, Assign>) {
          return make_assign(f(x.var), rename_expr(x.value, f));
        } else if constexpr (std::is_same_v<T, Sample>) {
          return make_sample(f(x.var));
        } else if constexpr (std::is_same_v<T, Seq>) {
          return make_seq(rebuild(x.first, f, n), rebuild(x.second, f, n));
        } else if constexpr (std::is_same_v<T, If>) {
          return make_if(rename_bool(x.cond, f), rebuild(x.then_branch, f, n), rebuild(x.else_branch, f, n));
        } else {
          return make_while(rename_bool(x.cond, f), rebuild(x.body, f, n));
        }
      },
      p->node);
}

}  // namespace detail

/// Renumber variables in the order the program text mentions them, drop
/// unused names, right-associate sequences and rebuild the dense ODE systems.
/// Parsing always returns this form, so parse(pretty_print(p)) reproduces it.
inline ParsedProgram canonicalize(const ProgramPtr& p, const VarTable& vars) {
  std::vector<std::size_t> order;
  detail::collect_vars(p, order);
  std::vector<std::size_t> remap(vars.size(), std::numeric_limits<std::size_t>::max());
  VarTable out;
  for (auto v : order)
    if (remap.at(v) == std::numeric_limits<std::size_t>::max()) remap[v] = out.intern(vars.name(v));
  auto f = [&](std::size_t v) { return remap.at(v); };
  return {normalize_seq(detail::rebuild(p, f, out.size())), std::move(out)};
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : toks_(tokenize(src)) {
    for (const auto& t : toks_)
      if (t.kind == Token::Ident) idents_.insert(t.text);
  }

  Parser(std::string_view src, const VarTable& vars) : Parser(src) {
    vars_ = vars;
    closed_ = true;
  }

  ParsedProgram program() {
    auto body = statements();
    if (peek().kind != Token::End) fail(peek(), "unexpected '" + peek().text + "'");
    return canonicalize(body, vars_);
  }

  ExprPtr expression_only() {
    auto e = expr();
    if (peek().kind != Token::End) fail(peek(), "unexpected '" + peek().text + "'");
    return e;
  }

  BoolExprPtr condition_only() {
    auto b = bool_or();
    if (peek().kind != Token::End) fail(peek(), "unexpected '" + peek().text + "'");
    return b;
  }

 private:
  struct Pending {
    std::string kind;
    std::vector<ExprPtr> args;
    std::size_t placeholder;
  };

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  VarTable vars_;
  bool closed_ = false;
  std::set<std::string> idents_;
  std::vector<Pending>* pending_ = nullptr;
  std::size_t next_placeholder_ = std::numeric_limits<std::size_t>::max();

  [[noreturn]] static void fail(const Token& t, const std::string& msg) {
    throw ParseError(t.line, t.col, msg, t.kind == Token::End);
  }

  const Token& peek(std::size_t ahead = 0) const { return toks_[std::min(pos_ + ahead, toks_.size() - 1)]; }
  const Token& take() {
    const Token& t = toks_[pos_];
    if (t.kind != Token::End) ++pos_;
    return t;
  }
  bool is_sym(std::string_view s, std::size_t ahead = 0) const {
    return peek(ahead).kind == Token::Sym && peek(ahead).text == s;
  }
  bool is_word(std::string_view s) const { return peek().kind == Token::Ident && peek().text == s; }
  bool accept(std::string_view s) {
    if (!is_sym(s)) return false;
    take();
    return true;
  }
  const Token& expect(std::string_view s) {
    if (!is_sym(s)) {
      const Token& t = peek();
      fail(t, "expected '" + std::string(s) + "' but found " +
                  (t.kind == Token::End ? std::string("end of input") : "'" + t.text + "'"));
    }
    return take();
  }
  void expect_word(std::string_view w) {
    if (!is_word(w)) {
      const Token& t = peek();
      fail(t, "expected '" + std::string(w) + "' but found " +
                  (t.kind == Token::End ? std::string("end of input") : "'" + t.text + "'"));
    }
    take();
  }

  std::size_t variable(const Token& t) {
    if (closed_) {
      auto i = vars_.find(t.text);
      if (!i) fail(t, "unknown variable '" + t.text + "'");
      return *i;
    }
    return vars_.intern(t.text);
  }

  std::size_t fresh(std::string base) {
    while (idents_.count(base) || is_keyword(base)) base += '_';
    return vars_.intern(base);
  }

  // ---- expressions

  ExprPtr expr() {
    auto l = term();
    while (is_sym("+") || is_sym("-")) {
      bool plus = take().text == "+";
      auto r = term();
      l = plus ? add(l, r) : sub(l, r);
    }
    return l;
  }

  ExprPtr term() {
    auto l = unary();
    while (is_sym("*") || is_sym("/")) {
      bool times = take().text == "*";
      auto r = unary();
      l = times ? mul(l, r) : div(l, r);
    }
    return l;
  }

  ExprPtr unary() {
    if (accept("-")) {
      // a minus sign directly before a numeral is part of the literal
      if (peek().kind == Token::Number) return lit(-take().number);
      return neg(unary());
    }
    return primary();
  }

  template <class F>
  auto grouped(const Token& open, const char* what, F&& body) {
    try {
      return body();
    } catch (const ParseError& e) {
      if (e.at_end()) throw ParseError(open.line, open.col, std::string("unclosed '") + what + "'");
      throw;
    }
  }

  std::vector<ExprPtr> call_args(const Token& name) {
    const Token& open = expect("(");
    return grouped(open, "(", [&] {
      std::vector<ExprPtr> args;
      if (!is_sym(")")) {
        args.push_back(expr());
        while (accept(",")) args.push_back(expr());
      }
      expect(")");
      (void)name;
      return args;
    });
  }

  static void check_arity(const Token& name, const std::vector<ExprPtr>& args, std::size_t n) {
    if (args.size() != n)
      fail(name, "'" + name.text + "' expects " + std::to_string(n) + " argument" + (n == 1 ? "" : "s") +
                     ", got " + std::to_string(args.size()));
  }

  static const double* literal(const ExprPtr& e) {
    const auto* c = std::get_if<Const>(&e->node);
    return c ? &c->value : nullptr;
  }

  ExprPtr sampler(const Token& name) {
    if (!pending_) fail(name, "sampler '" + name.text + "' is only allowed on the right of an assignment");
    auto args = call_args(name);
    if (name.text == "exp") {
      check_arity(name, args, 1);
      if (auto l = literal(args[0]); l && !(*l > 0.0)) fail(name, "exp rate must be positive");
    } else {
      check_arity(name, args, 2);
      auto a = literal(args[0]), b = literal(args[1]);
      if (name.text == "unif" && a && b && *a > *b) fail(name, "unif bounds must satisfy a <= b");
      if (name.text == "normal" && b && *b < 0.0) fail(name, "normal deviation must be non-negative");
    }
    std::size_t ph = next_placeholder_--;
    pending_->push_back({name.text, std::move(args), ph});
    return var(ph);
  }

  ExprPtr primary() {
    const Token& t = peek();
    if (t.kind == Token::Number) return lit(take().number);
    if (is_sym("(")) {
      const Token& open = take();
      return grouped(open, "(", [&] {
        auto e = expr();
        expect(")");
        return e;
      });
    }
    if (t.kind == Token::Ident) {
      const Token& name = take();
      if (name.text == "unif" || name.text == "exp" || name.text == "normal") return sampler(name);
      if (auto prim = lookup_primitive(name.text)) {
        if (is_sym("(")) {
          auto args = call_args(name);
          check_arity(name, args, prim->arity);
          return apply(prim->prim, std::move(args));
        }
        if (prim->arity == 0) return apply(prim->prim, {});
        return apply(prim->prim, {unary()});
      }
      if (is_keyword(name.text)) fail(name, "unexpected keyword '" + name.text + "' in expression");
      if (is_sym("(")) fail(name, "unknown primitive '" + name.text + "'");
      return var(variable(name));
    }
    if (t.kind == Token::End) fail(t, "unexpected end of input in expression");
    fail(t, "unexpected '" + t.text + "' in expression");
  }

  // ---- conditions

  BoolExprPtr bool_or() {
    auto l = bool_and();
    while (accept("||")) l = disj(l, bool_and());
    return l;
  }

  BoolExprPtr bool_and() {
    auto l = bool_atom();
    while (accept("&&")) l = conj(l, bool_atom());
    return l;
  }

  BoolExprPtr comparison() {
    auto l = expr();
    if (accept("<=")) return leq(l, expr());
    if (accept(">=")) {
      auto r = expr();
      return leq(r, l);
    }
    const Token& t = peek();
    fail(t, "expected '<=' or '>=' but found " +
                (t.kind == Token::End ? std::string("end of input") : "'" + t.text + "'"));
  }

  static bool later(const ParseError& a, const ParseError& b) {
    return std::pair(a.line(), a.column()) > std::pair(b.line(), b.column());
  }

  BoolExprPtr bool_atom() {
    if (is_word("tt") || is_word("ff")) return truth(take().text == "tt");
    if (!is_sym("(")) return comparison();
    // "(" opens either a nested condition or an arithmetic group
    std::size_t save = pos_;
    try {
      const Token& open = take();
      return grouped(open, "(", [&] {
        auto b = bool_or();
        expect(")");
        return b;
      });
    } catch (const ParseError& first) {
      pos_ = save;
      try {
        return comparison();
      } catch (const ParseError& second) {
        if (later(first, second)) throw first;
        throw;
      }
    }
  }

  // ---- statements

  ProgramPtr statements() {
    std::vector<ProgramPtr> items{statement()};
    while (accept(";")) {
      if (is_sym("}") || peek().kind == Token::End) break;
      items.push_back(statement());
    }
    return make_block(std::move(items));
  }

  ProgramPtr braced() {
    const Token& open = expect("{");
    return grouped(open, "{", [&] {
      if (is_sym("}")) fail(peek(), "empty block");
      auto body = statements();
      expect("}");
      return body;
    });
  }

  ProgramPtr branch() { return is_sym("{") ? braced() : statement(); }

  static ProgramPtr raw_diff(std::vector<std::pair<std::size_t, ExprPtr>> listing, ExprPtr duration) {
    return std::make_shared<const Program>(Program{DiffBlock{std::move(listing), std::move(duration), nullptr}});
  }

  ProgramPtr statement() {
    const Token& t = peek();
    if (t.kind != Token::Ident) {
      if (is_sym("{")) return braced();
      fail(t, t.kind == Token::End ? "expected a statement but found end of input"
                                   : "expected a statement but found '" + t.text + "'");
    }
    if (t.text == "while") {
      take();
      auto cond = bool_or();
      if (is_word("do")) take();
      return make_while(cond, braced());
    }
    if (t.text == "if") {
      take();
      auto cond = bool_or();
      expect_word("then");
      auto p = branch();
      expect_word("else");
      return make_if(cond, p, branch());
    }
    if (t.text == "bernoulli") {
      const Token& name = take();
      const Token& open = expect("(");
      return grouped(open, "(", [&] {
        auto r = expr();
        if (auto v = literal(r); v && !(*v >= 0.0 && *v <= 1.0)) fail(name, "bernoulli bias must lie in [0,1]");
        expect(",");
        auto p = branch();
        expect(",");
        auto q = branch();
        expect(")");
        return desugar_bernoulli(fresh("x_f"), r, p, q);
      });
    }
    if (t.text == "wait") {
      take();
      return raw_diff({}, expr());
    }
    if (is_keyword(t.text)) fail(t, "unexpected keyword '" + t.text + "'");
    if (is_sym("++", 1) || is_sym("--", 1)) {
      std::size_t x = variable(take());
      bool inc = take().text == "++";
      return make_assign(x, inc ? add(var(x), lit(1.0)) : sub(var(x), lit(1.0)));
    }
    if (is_sym(":=", 1)) return assignment();
    if (is_sym("'", 1)) return differential();
    take();
    fail(peek(), "expected ':=', '++', '--' or a derivative after '" + t.text + "'");
  }

  ProgramPtr differential() {
    std::vector<std::pair<std::size_t, ExprPtr>> listing;
    std::set<std::size_t> seen;
    do {
      const Token& name = take();
      std::size_t x = variable(name);
      if (!seen.insert(x).second) fail(name, "variable '" + name.text + "' differentiated twice");
      expect("'");
      expect("=");
      listing.emplace_back(x, expr());
    } while (is_sym(",") && peek(1).kind == Token::Ident && is_sym("'", 2) && (take(), true));
    expect_word("for");
    return raw_diff(std::move(listing), expr());
  }

  ProgramPtr assignment() {
    const Token& target = take();
    std::size_t x = variable(target);
    take();
    std::vector<Pending> pending;
    pending_ = &pending;
    ExprPtr rhs;
    try {
      rhs = expr();
    } catch (...) {
      pending_ = nullptr;
      throw;
    }
    pending_ = nullptr;
    if (pending.empty()) return make_assign(x, rhs);

    std::vector<std::size_t> refs;
    collect_vars(rhs, refs);
    for (const auto& p : pending)
      for (const auto& a : p.args) collect_vars(a, refs);
    bool target_read = std::find(refs.begin(), refs.end(), x) != refs.end();

    std::vector<std::pair<std::size_t, std::size_t>> scratch;  // placeholder -> variable
    for (std::size_t i = 0; i < pending.size(); ++i) {
      std::size_t s = (pending.size() == 1 && !target_read)
                          ? x
                          : fresh(target.text + "_s" + std::to_string(i + 1));
      scratch.emplace_back(pending[i].placeholder, s);
    }
    auto resolve = [&](std::size_t v) {
      for (const auto& [ph, s] : scratch)
        if (ph == v) return s;
      return v;
    };

    std::vector<ProgramPtr> out;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const auto& p = pending[i];
      std::size_t s = scratch[i].second;
      std::vector<ExprPtr> args;
      for (const auto& a : p.args) args.push_back(rename_expr(a, resolve));
      if (p.kind == "unif")
        out.push_back(desugar_unif(s, args[0], args[1]));
      else if (p.kind == "exp")
        out.push_back(desugar_exp(s, args[0]));
      else
        out.push_back(desugar_normal(s, args[0], args[1], fresh("x1"), fresh("x2")));
    }
    auto value = rename_expr(rhs, resolve);
    if (!same(value, var(x))) out.push_back(make_assign(x, value));
    return make_block(std::move(out));
  }
};

}  // namespace detail

/// Parse a program. Variables are declared by use and numbered in the order
/// the desugared program mentions them; sampler sugar is expanded in place.
inline ParsedProgram parse_program(std::string_view text) { return detail::Parser(text).program(); }

/// Parse an arithmetic expression over an existing variable table.
inline ExprPtr parse_expr(std::string_view text, const VarTable& vars) {
  return detail::Parser(text, vars).expression_only();
}

/// Parse a condition over an existing variable table (used by `--check`).
inline BoolExprPtr parse_bool_expr(std::string_view text, const VarTable& vars) {
  return detail::Parser(text, vars).condition_only();
}

}  // namespace hybrid
