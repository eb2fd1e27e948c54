#include <algorithm>

#include "internal/lexer.hpp"
#include "sketchreward/error.hpp"
#include "sketchreward/sketch.hpp"

namespace sketchreward::dsl {

namespace {

using detail::Lex;
using detail::Lexeme;

class Parser {
 public:
  Parser(std::string_view text, const Vocabulary& vocab) : lx_(detail::lex(text)), vocab_(vocab) {}

  Sketch parse(std::shared_ptr<const Vocabulary> vocab) {
    keyword("fn");
    expect(Lex::LParen, "'('");
    const Lexeme& param = expect(Lex::Ident, "parameter name");
    std::string name = param.text;
    expect(Lex::RParen, "')'");
    expect(Lex::LBrace, "'{'");
    ExprPtr body = expr();
    expect(Lex::RBrace, "'}'");
    if (peek().kind != Lex::End) fail(peek(), "unexpected " + detail::describe(peek()) + " after sketch body");
    return Sketch(std::move(body), std::move(vocab), std::move(name));
  }

 private:
  const Lexeme& peek(std::size_t ahead = 0) const { return lx_[std::min(pos_ + ahead, lx_.size() - 1)]; }
  const Lexeme& next() {
    const Lexeme& l = lx_[pos_];
    if (pos_ + 1 < lx_.size()) ++pos_;
    return l;
  }
  [[noreturn]] static void fail(const Lexeme& at, const std::string& msg) { throw ParseError(at.where, msg); }

  const Lexeme& expect(Lex kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what + ", found " + detail::describe(peek()));
    return next();
  }
  bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
    return peek(ahead).kind == Lex::Ident && peek(ahead).text == kw;
  }
  void keyword(std::string_view kw) {
    if (!is_keyword(kw)) fail(peek(), "expected '" + std::string(kw) + "', found " + detail::describe(peek()));
    next();
  }

  ExprPtr expr() {
    if (!is_keyword("if")) return additive();
    next();
    ExprPtr lhs = additive();
    const Lexeme& op = next();
    CmpOp cmp;
    switch (op.kind) {
      case Lex::Le: cmp = CmpOp::Le; break;
      case Lex::Lt: cmp = CmpOp::Lt; break;
      case Lex::Ge: cmp = CmpOp::Ge; break;
      case Lex::Gt: cmp = CmpOp::Gt; break;
      case Lex::EqEq: cmp = CmpOp::Eq; break;
      default: fail(op, "expected comparison operator, found " + detail::describe(op));
    }
    ExprPtr rhs = additive();
    keyword("then");
    ExprPtr then_branch = expr();
    keyword("else");
    ExprPtr else_branch = expr();
    return if_then_else(cmp, std::move(lhs), std::move(rhs), std::move(then_branch), std::move(else_branch));
  }

  ExprPtr additive() {
    ExprPtr acc = term();
    while (peek().kind == Lex::Plus || peek().kind == Lex::Minus) {
      const bool plus = next().kind == Lex::Plus;
      ExprPtr rhs = term();
      acc = plus ? add(std::move(acc), std::move(rhs)) : sub(std::move(acc), std::move(rhs));
    }
    return acc;
  }

  ExprPtr term() {
    ExprPtr acc = unary();
    while (peek().kind == Lex::Star) {
      const Lexeme& star = next();
      ExprPtr rhs = unary();
      if (contains_hole(*acc) && contains_hole(*rhs))
        fail(star, "product of two hole-dependent expressions is not allowed");
      acc = mul(std::move(acc), std::move(rhs));
    }
    return acc;
  }

  ExprPtr unary() {
    if (peek().kind != Lex::Minus) return primary();
    next();
    if (peek().kind == Lex::Number) return constant(-next().number);
    return neg(unary());
  }

  Token token_name(const Lexeme& l) {
    if (auto t = vocab_.find(l.text)) return *t;
    fail(l, "unknown token '" + l.text + "'");
  }

  ExprPtr primary() {
    const Lexeme& l = peek();
    switch (l.kind) {
      case Lex::Number: next(); return constant(l.number);
      case Lex::Hole: {
        next();
        if (l.hole < 1) fail(l, "hole ids start at ?1");
        if (l.hole > max_hole_ + 1)
          fail(l, "hole " + l.text + " appears before ?" + std::to_string(max_hole_ + 1));
        max_hole_ = std::max(max_hole_, l.hole);
        return hole(l.hole);
      }
      case Lex::LParen: {
        next();
        ExprPtr e = expr();
        expect(Lex::RParen, "')'");
        return e;
      }
      case Lex::Ident: break;
      default: fail(l, "expected expression, found " + detail::describe(l));
    }
    if (l.text == "match") return match_expr();
    if (l.text == "count" || l.text == "count_inclusive") {
      const bool inclusive = l.text == "count_inclusive";
      next();
      expect(Lex::LParen, "'('");
      const Token t = token_name(expect(Lex::Ident, "token name"));
      expect(Lex::RParen, "')'");
      return count(t, inclusive);
    }
    if (l.text == "step") {
      next();
      return step_index();
    }
    if (l.text == "len") {
      next();
      return len();
    }
    if (l.text == "if") fail(l, "conditional used as an operand must be parenthesized");
    fail(l, "unexpected " + detail::describe(l));
  }

  ExprPtr match_expr() {
    next();
    keyword("token");
    expect(Lex::LBrace, "'{'");
    std::vector<MatchArm> arms;
    ExprPtr fallback;
    while (peek().kind != Lex::RBrace) {
      const Lexeme& name = expect(Lex::Ident, "token name or '_'");
      if (fallback) fail(name, "default arm '_' must be the last arm");
      if (name.text == "_") {
        expect(Lex::Arrow, "'=>'");
        fallback = expr();
      } else {
        const Token t = token_name(name);
        for (const auto& arm : arms)
          if (arm.token == t) fail(name, "duplicate arm for token '" + name.text + "'");
        expect(Lex::Arrow, "'=>'");
        arms.push_back({t, expr()});
      }
      if (peek().kind != Lex::Comma) break;
      next();
    }
    expect(Lex::RBrace, "'}'");
    return match(std::move(arms), fallback ? std::move(fallback) : constant(0.0));
  }

  std::vector<Lexeme> lx_;
  std::size_t pos_ = 0;
  const Vocabulary& vocab_;
  int max_hole_ = 0;
};

}  // namespace

Sketch parse_sketch(std::string_view text, std::shared_ptr<const Vocabulary> vocab) {
  if (!vocab) throw ContractError("parse_sketch needs a vocabulary");
  Parser p(text, *vocab);
  return p.parse(std::move(vocab));
}

}  // namespace sketchreward::dsl
