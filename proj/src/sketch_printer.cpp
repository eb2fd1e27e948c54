#include <charconv>
#include <string>

#include "internal/overloaded.hpp"
#include "sketchreward/sketch.hpp"

namespace sketchreward::dsl {

namespace {

using detail::Overloaded;

constexpr int kIf = 0;
constexpr int kAdditive = 1;
constexpr int kMultiplicative = 2;
constexpr int kUnary = 3;
constexpr int kAtom = 4;

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

int precedence(const Expr& e) {
  return std::visit(Overloaded{
                        [](const If&) { return kIf; },
                        [](const Arith& a) {
                          switch (a.op) {
                            case ArithOp::Add:
                            case ArithOp::Sub: return kAdditive;
                            case ArithOp::Mul: return kMultiplicative;
                            case ArithOp::Neg: return kUnary;
                          }
                          return kAtom;
                        },
                        [](const auto&) { return kAtom; },
                    },
                    e.node);
}

class Printer {
 public:
  explicit Printer(const Vocabulary& vocab) : vocab_(vocab) {}

  void print(const Expr& e, int min_prec, int indent) {
    if (precedence(e) < min_prec) {
      out += '(';
      print(e, kIf, indent);
      out += ')';
      return;
    }
    std::visit(Overloaded{
                   [&](const Const& c) { out += number(c.value); },
                   [&](const Hole& h) { out += "?" + std::to_string(h.id); },
                   [&](const Count& c) {
                     out += c.inclusive ? "count_inclusive(" : "count(";
                     out += vocab_.name(c.token);
                     out += ')';
                   },
                   [&](const StepIndex&) { out += "step"; },
                   [&](const Len&) { out += "len"; },
                   [&](const TokenMatch& m) {
                     const std::string pad(static_cast<std::size_t>(indent + 2), ' ');
                     out += "match token {\n";
                     for (const auto& arm : m.arms) {
                       out += pad + vocab_.name(arm.token) + " => ";
                       print(*arm.body, kIf, indent + 2);
                       out += ",\n";
                     }
                     out += pad + "_ => ";
                     print(*m.fallback, kIf, indent + 2);
                     out += '\n' + std::string(static_cast<std::size_t>(indent), ' ') + '}';
                   },
                   [&](const If& i) {
                     out += "if ";
                     print(*i.guard.lhs, kAdditive, indent);
                     out += ' ';
                     out += cmp_symbol(i.guard.op);
                     out += ' ';
                     print(*i.guard.rhs, kAdditive, indent);
                     out += " then ";
                     print(*i.then_branch, kIf, indent);
                     out += " else ";
                     print(*i.else_branch, kIf, indent);
                   },
                   [&](const Arith& a) {
                     if (a.op == ArithOp::Neg) {
                       out += '-';
                       const bool bare = precedence(*a.lhs) == kAtom && !std::holds_alternative<Const>(a.lhs->node);
                       if (bare) {
                         print(*a.lhs, kAtom, indent);
                       } else {
                         out += '(';
                         print(*a.lhs, kIf, indent);
                         out += ')';
                       }
                       return;
                     }
                     const int p = precedence(e);
                     print(*a.lhs, p, indent);
                     out += a.op == ArithOp::Add ? " + " : a.op == ArithOp::Sub ? " - " : " * ";
                     print(*a.rhs, p + 1, indent);
                   },
               },
               e.node);
  }

  std::string out;

 private:
  const Vocabulary& vocab_;
};

}  // namespace

std::string print_expr(const Expr& e, const Vocabulary& vocab) {
  Printer p(vocab);
  p.print(e, kIf, 0);
  return std::move(p.out);
}

std::string print_sketch(const Sketch& s) {
  Printer p(s.vocabulary());
  p.out = "fn(" + s.parameter() + ") {\n  ";
  p.print(s.root(), kIf, 2);
  p.out += "\n}\n";
  return std::move(p.out);
}

}  // namespace sketchreward::dsl
