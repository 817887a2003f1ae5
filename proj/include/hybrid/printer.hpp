#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hybrid/program.hpp"

namespace hybrid {

namespace detail {

inline int expr_precedence(const Expr& e) {
  if (const auto* c = std::get_if<Const>(&e.node)) return std::signbit(c->value) ? 3 : 4;
  if (std::holds_alternative<VarRef>(e.node)) return 4;
  switch (std::get<Apply>(e.node).prim) {
    case Prim::Add:
    case Prim::Sub:
      return 1;
    case Prim::Mul:
    case Prim::Div:
      return 2;
    case Prim::Neg:
      return 3;
    default:
      return 4;
  }
}

inline void print_expr(const Expr& e, const VarTable& vt, int min_prec, std::string& out) {
  const bool parens = expr_precedence(e) < min_prec;
  if (parens) out += '(';
  if (const auto* c = std::get_if<Const>(&e.node)) {
    out += format_real(c->value);
  } else if (const auto* v = std::get_if<VarRef>(&e.node)) {
    out += vt.name(v->index);
  } else {
    const auto& ap = std::get<Apply>(e.node);
    auto binary = [&](const char* op, int prec) {
      print_expr(*ap.args[0], vt, prec, out);
      out += op;
      print_expr(*ap.args[1], vt, prec + 1, out);
    };
    switch (ap.prim) {
      case Prim::Add:
        binary(" + ", 1);
        break;
      case Prim::Sub:
        binary(" - ", 1);
        break;
      case Prim::Mul:
        binary(" * ", 2);
        break;
      case Prim::Div:
        binary(" / ", 2);
        break;
      case Prim::Neg: {
        // "-(2)" keeps negation distinct from the literal -2; "-(-x)" avoids "--"
        const Expr& a = *ap.args[0];
        bool wrap = std::holds_alternative<Const>(a.node) || expr_precedence(a) == 3;
        out += '-';
        if (wrap) {
          out += '(';
          print_expr(a, vt, 0, out);
          out += ')';
        } else {
          print_expr(a, vt, 3, out);
        }
        break;
      }
      case Prim::Pi:
        out += "pi";
        break;
      default: {
        for (const auto& info : primitive_table)
          if (info.prim == ap.prim) out += info.name;
        out += '(';
        for (std::size_t i = 0; i < ap.args.size(); ++i) {
          if (i) out += ", ";
          print_expr(*ap.args[i], vt, 0, out);
        }
        out += ')';
      }
    }
  }
  if (parens) out += ')';
}

inline int bool_precedence(const BoolExpr& b) {
  if (std::holds_alternative<Or>(b.node)) return 1;
  if (std::holds_alternative<And>(b.node)) return 2;
  return 3;
}

inline void print_bool(const BoolExpr& b, const VarTable& vt, int min_prec, std::string& out) {
  const bool parens = bool_precedence(b) < min_prec;
  if (parens) out += '(';
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>) {
          out += n.value ? "tt" : "ff";
        } else if constexpr (std::is_same_v<T, Leq>) {
          print_expr(*n.lhs, vt, 0, out);
          out += " <= ";
          print_expr(*n.rhs, vt, 0, out);
        } else {
          int prec = std::is_same_v<T, Or> ? 1 : 2;
          print_bool(*n.lhs, vt, prec, out);
          out += std::is_same_v<T, Or> ? " || " : " && ";
          print_bool(*n.rhs, vt, prec + 1, out);
        }
      },
      b.node);
  if (parens) out += ')';
}

struct Line {
  int indent;
  std::string text;
};

inline void print_program(const ProgramPtr& p, const VarTable& vt, int indent, std::vector<Line>& out);

inline void print_braced(const std::string& head, const ProgramPtr& body, const std::string& tail,
                         const VarTable& vt, int indent, std::vector<Line>& out) {
  out.push_back({indent, head + " {"});
  print_program(body, vt, indent + 1, out);
  out.push_back({indent, "}" + tail});
}

inline void print_program(const ProgramPtr& p, const VarTable& vt, int indent, std::vector<Line>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Seq>) {
          std::vector<ProgramPtr> items;
          auto collect = [&](auto&& self, const ProgramPtr& q) -> void {
            if (const auto* s = std::get_if<Seq>(&q->node)) {
              self(self, s->first);
              self(self, s->second);
            } else {
              items.push_back(q);
            }
          };
          collect(collect, p);
          for (std::size_t i = 0; i < items.size(); ++i) {
            print_program(items[i], vt, indent, out);
            if (i + 1 < items.size()) out.back().text += " ;";
          }
        } else if constexpr (std::is_same_v<T, Assign>) {
          std::string s = vt.name(n.var) + " := ";
          print_expr(*n.value, vt, 0, s);
          out.push_back({indent, std::move(s)});
        } else if constexpr (std::is_same_v<T, Sample>) {
          out.push_back({indent, vt.name(n.var) + " := unif(0,1)"});
        } else if constexpr (std::is_same_v<T, DiffBlock>) {
          std::string s;
          if (n.listing.empty()) {
            s = "wait ";
          } else {
            for (std::size_t i = 0; i < n.listing.size(); ++i) {
              if (i) s += ", ";
              s += vt.name(n.listing[i].first) + "' = ";
              print_expr(*n.listing[i].second, vt, 0, s);
            }
            s += " for ";
          }
          print_expr(*n.duration, vt, 0, s);
          out.push_back({indent, std::move(s)});
        } else if constexpr (std::is_same_v<T, If>) {
          std::string head = "if ";
          print_bool(*n.cond, vt, 0, head);
          head += " then";
          print_braced(head, n.then_branch, " else {", vt, indent, out);
          print_program(n.else_branch, vt, indent + 1, out);
          out.push_back({indent, "}"});
        } else {
          std::string head = "while ";
          print_bool(*n.cond, vt, 0, head);
          head += " do";
          print_braced(head, n.body, "", vt, indent, out);
        }
      },
      p->node);
}

}  // namespace detail

inline std::string pretty_print(const Expr& e, const VarTable& vt) {
  std::string out;
  detail::print_expr(e, vt, 0, out);
  return out;
}

inline std::string pretty_print(const BoolExpr& b, const VarTable& vt) {
  std::string out;
  detail::print_bool(b, vt, 0, out);
  return out;
}

/// Concrete syntax accepted back by parse_program. Sequences print flat,
/// branches and loop bodies are always braced.
inline std::string pretty_print(const ProgramPtr& p, const VarTable& vt, bool multiline = false) {
  std::vector<detail::Line> lines;
  detail::print_program(p, vt, 0, lines);
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (multiline) {
      out.append(static_cast<std::size_t>(lines[i].indent) * 2, ' ');
      out += lines[i].text;
      out += '\n';
    } else {
      if (i) out += ' ';
      out += lines[i].text;
    }
  }
  return out;
}

}  // namespace hybrid
