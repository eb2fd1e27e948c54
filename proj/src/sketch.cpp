#include "sketchreward/sketch.hpp"

#include <cstring>

#include "internal/overloaded.hpp"
#include "sketchreward/error.hpp"

namespace sketchreward::dsl {

namespace {

using detail::Overloaded;

ExprPtr make(auto node) { return std::make_shared<const Expr>(Expr{std::move(node)}); }

void require(const ExprPtr& e, const char* what) {
  if (!e) throw ContractError(std::string("null sub-expression in ") + what);
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

void collect_holes(const Expr& e, std::vector<int>& order, std::vector<bool>& seen) {
  std::visit(Overloaded{
                 [&](const Hole& h) {
                   if (h.id >= static_cast<int>(seen.size())) seen.resize(h.id + 1, false);
                   if (!seen[h.id]) {
                     seen[h.id] = true;
                     order.push_back(h.id);
                   }
                 },
                 [&](const TokenMatch& m) {
                   for (const auto& arm : m.arms) collect_holes(*arm.body, order, seen);
                   collect_holes(*m.fallback, order, seen);
                 },
                 [&](const If& i) {
                   collect_holes(*i.guard.lhs, order, seen);
                   collect_holes(*i.guard.rhs, order, seen);
                   collect_holes(*i.then_branch, order, seen);
                   collect_holes(*i.else_branch, order, seen);
                 },
                 [&](const Arith& a) {
                   collect_holes(*a.lhs, order, seen);
                   if (a.rhs) collect_holes(*a.rhs, order, seen);
                 },
                 [](const auto&) {},
             },
             e.node);
}

void check_tree(const Expr& e, const Vocabulary& vocab) {
  const auto check_token = [&](Token t) {
    if (t.id >= vocab.size()) throw ContractError("token id outside the vocabulary");
  };
  std::visit(Overloaded{
                 [&](const Hole& h) {
                   if (h.id < 1) throw ContractError("hole ids start at 1");
                 },
                 [&](const TokenMatch& m) {
                   for (std::size_t i = 0; i < m.arms.size(); ++i) {
                     check_token(m.arms[i].token);
                     for (std::size_t j = 0; j < i; ++j)
                       if (m.arms[j].token == m.arms[i].token) throw ContractError("duplicate match arm");
                     check_tree(*m.arms[i].body, vocab);
                   }
                   check_tree(*m.fallback, vocab);
                 },
                 [&](const If& i) {
                   check_tree(*i.guard.lhs, vocab);
                   check_tree(*i.guard.rhs, vocab);
                   check_tree(*i.then_branch, vocab);
                   check_tree(*i.else_branch, vocab);
                 },
                 [&](const Arith& a) {
                   check_tree(*a.lhs, vocab);
                   if (a.rhs) check_tree(*a.rhs, vocab);
                   if (a.op == ArithOp::Mul && contains_hole(*a.lhs) && contains_hole(*a.rhs))
                     throw ContractError("product of two hole-dependent expressions is not allowed");
                 },
                 [&](const Count& c) { check_token(c.token); },
                 [](const auto&) {},
             },
             e.node);
}

}  // namespace

ExprPtr constant(double v) { return make(Const{v}); }
ExprPtr hole(int id) { return make(Hole{id}); }

ExprPtr match(std::vector<MatchArm> arms, ExprPtr fallback) {
  for (const auto& arm : arms) require(arm.body, "match arm");
  if (!fallback) fallback = constant(0.0);
  return make(TokenMatch{std::move(arms), std::move(fallback)});
}

ExprPtr if_then_else(CmpOp op, ExprPtr lhs, ExprPtr rhs, ExprPtr then_branch, ExprPtr else_branch) {
  require(lhs, "guard");
  require(rhs, "guard");
  require(then_branch, "if");
  require(else_branch, "if");
  return make(If{Guard{op, std::move(lhs), std::move(rhs)}, std::move(then_branch), std::move(else_branch)});
}

ExprPtr add(ExprPtr a, ExprPtr b) {
  require(a, "+");
  require(b, "+");
  return make(Arith{ArithOp::Add, std::move(a), std::move(b)});
}
ExprPtr sub(ExprPtr a, ExprPtr b) {
  require(a, "-");
  require(b, "-");
  return make(Arith{ArithOp::Sub, std::move(a), std::move(b)});
}
ExprPtr mul(ExprPtr a, ExprPtr b) {
  require(a, "*");
  require(b, "*");
  return make(Arith{ArithOp::Mul, std::move(a), std::move(b)});
}
ExprPtr neg(ExprPtr a) {
  require(a, "negation");
  return make(Arith{ArithOp::Neg, std::move(a), nullptr});
}
ExprPtr count(Token t, bool inclusive) { return make(Count{t, inclusive}); }
ExprPtr step_index() { return make(StepIndex{}); }
ExprPtr len() { return make(Len{}); }

bool structurally_equal(const Expr& a, const Expr& b) {
  if (&a == &b) return true;
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      Overloaded{
          [&](const Const& x) { return same_bits(x.value, std::get<Const>(b.node).value); },
          [&](const Hole& x) { return x.id == std::get<Hole>(b.node).id; },
          [&](const TokenMatch& x) {
            const auto& y = std::get<TokenMatch>(b.node);
            if (x.arms.size() != y.arms.size()) return false;
            for (std::size_t i = 0; i < x.arms.size(); ++i) {
              if (x.arms[i].token != y.arms[i].token) return false;
              if (!structurally_equal(*x.arms[i].body, *y.arms[i].body)) return false;
            }
            return structurally_equal(*x.fallback, *y.fallback);
          },
          [&](const If& x) {
            const auto& y = std::get<If>(b.node);
            return x.guard.op == y.guard.op && structurally_equal(*x.guard.lhs, *y.guard.lhs) &&
                   structurally_equal(*x.guard.rhs, *y.guard.rhs) &&
                   structurally_equal(*x.then_branch, *y.then_branch) &&
                   structurally_equal(*x.else_branch, *y.else_branch);
          },
          [&](const Arith& x) {
            const auto& y = std::get<Arith>(b.node);
            if (x.op != y.op || !structurally_equal(*x.lhs, *y.lhs)) return false;
            if (!x.rhs || !y.rhs) return !x.rhs && !y.rhs;
            return structurally_equal(*x.rhs, *y.rhs);
          },
          [&](const Count& x) {
            const auto& y = std::get<Count>(b.node);
            return x.token == y.token && x.inclusive == y.inclusive;
          },
          [](const StepIndex&) { return true; },
          [](const Len&) { return true; },
      },
      a.node);
}

bool contains_hole(const Expr& e) {
  return std::visit(Overloaded{
                        [](const Hole&) { return true; },
                        [](const TokenMatch& m) {
                          for (const auto& arm : m.arms)
                            if (contains_hole(*arm.body)) return true;
                          return contains_hole(*m.fallback);
                        },
                        [](const If& i) {
                          return contains_hole(*i.guard.lhs) || contains_hole(*i.guard.rhs) ||
                                 contains_hole(*i.then_branch) || contains_hole(*i.else_branch);
                        },
                        [](const Arith& a) { return contains_hole(*a.lhs) || (a.rhs && contains_hole(*a.rhs)); },
                        [](const auto&) { return false; },
                    },
                    e.node);
}

std::vector<int> hole_order(const Expr& e) {
  std::vector<int> order;
  std::vector<bool> seen;
  collect_holes(e, order, seen);
  return order;
}

Sketch::Sketch(ExprPtr root, std::shared_ptr<const Vocabulary> vocab, std::string parameter)
    : root_(std::move(root)), vocab_(std::move(vocab)), parameter_(std::move(parameter)) {
  require(root_, "sketch");
  if (!vocab_) throw ContractError("sketch needs a vocabulary");
  check_tree(*root_, *vocab_);
  const auto order = hole_order(*root_);
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] != static_cast<int>(i) + 1)
      throw ContractError("hole ?" + std::to_string(order[i]) + " appears before ?" + std::to_string(i + 1));
  hole_count_ = order.size();
}

std::vector<int> holes_of(const Sketch& s) {
  std::vector<int> ids(s.hole_count());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i) + 1;
  return ids;
}

std::string_view cmp_symbol(CmpOp op) {
  switch (op) {
    case CmpOp::Le: return "<=";
    case CmpOp::Lt: return "<";
    case CmpOp::Ge: return ">=";
    case CmpOp::Gt: return ">";
    case CmpOp::Eq: return "==";
  }
  return "?";
}

}  // namespace sketchreward::dsl
