#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sketchreward/vocabulary.hpp"

namespace sketchreward::dsl {

enum class CmpOp { Le, Lt, Ge, Gt, Eq };
enum class ArithOp { Add, Sub, Mul, Neg };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Const {
  double value = 0.0;
};
struct Hole {
  int id = 1;
};
struct MatchArm {
  Token token;
  ExprPtr body;
};
/// Dispatch on the current step's token; arms keep source order.
struct TokenMatch {
  std::vector<MatchArm> arms;
  ExprPtr fallback;
};
struct Guard {
  CmpOp op = CmpOp::Le;
  ExprPtr lhs;
  ExprPtr rhs;
};
struct If {
  Guard guard;
  ExprPtr then_branch;
  ExprPtr else_branch;
};
/// Binary op on lhs/rhs; Neg uses lhs only.
struct Arith {
  ArithOp op = ArithOp::Add;
  ExprPtr lhs;
  ExprPtr rhs;
};
/// Occurrences of `token` before the current step (inclusive: up to and including it).
struct Count {
  Token token;
  bool inclusive = false;
};
struct StepIndex {};
struct Len {};

struct Expr {
  std::variant<Const, Hole, TokenMatch, If, Arith, Count, StepIndex, Len> node;
};

ExprPtr constant(double v);
ExprPtr hole(int id);
ExprPtr match(std::vector<MatchArm> arms, ExprPtr fallback = nullptr);
ExprPtr if_then_else(CmpOp op, ExprPtr lhs, ExprPtr rhs, ExprPtr then_branch, ExprPtr else_branch);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr neg(ExprPtr a);
ExprPtr count(Token t, bool inclusive = false);
ExprPtr step_index();
ExprPtr len();

bool structurally_equal(const Expr& a, const Expr& b);
bool contains_hole(const Expr& e);
/// Hole ids in order of first appearance (preorder: guard, then, else, arms, default).
std::vector<int> hole_order(const Expr& e);

/// A reward sketch: an expression over the trajectory prefix with holes ?1..?n.
class Sketch {
 public:
  /// Throws ContractError when holes are not numbered 1..n by first appearance,
  /// when a product has hole-dependent factors on both sides, or when a token is
  /// outside the vocabulary.
  Sketch(ExprPtr root, std::shared_ptr<const Vocabulary> vocab, std::string parameter = "traj");

  const Expr& root() const noexcept { return *root_; }
  const ExprPtr& root_ptr() const noexcept { return root_; }
  const Vocabulary& vocabulary() const noexcept { return *vocab_; }
  const std::shared_ptr<const Vocabulary>& vocabulary_ptr() const noexcept { return vocab_; }
  std::size_t hole_count() const noexcept { return hole_count_; }
  const std::string& parameter() const noexcept { return parameter_; }

  friend bool operator==(const Sketch& a, const Sketch& b) {
    return a.vocabulary() == b.vocabulary() && structurally_equal(a.root(), b.root());
  }

 private:
  ExprPtr root_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::string parameter_;
  std::size_t hole_count_ = 0;
};

/// Ordered hole ids [1..n].
std::vector<int> holes_of(const Sketch& s);

/// Parses `fn(<ident>) { <expr> }`. Errors carry line/column.
Sketch parse_sketch(std::string_view text, std::shared_ptr<const Vocabulary> vocab = Vocabulary::standard());
/// Canonical source text; parse_sketch(print_sketch(s)) == s.
std::string print_sketch(const Sketch& s);
std::string print_expr(const Expr& e, const Vocabulary& vocab);

std::string_view cmp_symbol(CmpOp op);

}  // namespace sketchreward::dsl
