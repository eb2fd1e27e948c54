#include "sketchreward/eval.hpp"

#include <cmath>
#include <cstring>

#include "internal/overloaded.hpp"
#include "sketchreward/error.hpp"

namespace sketchreward::dsl {

namespace {

using detail::Overloaded;

struct StepContext {
  Token token;
  const std::vector<int>* counts = nullptr;
  int step = 0;
};

double arith(ArithOp op, double a, double b) {
  switch (op) {
    case ArithOp::Add: return a + b;
    case ArithOp::Sub: return a - b;
    case ArithOp::Mul: return a * b;
    case ArithOp::Neg: return -a;
  }
  return 0.0;
}

bool compare(CmpOp op, double a, double b) {
  switch (op) {
    case CmpOp::Le: return a <= b;
    case CmpOp::Lt: return a < b;
    case CmpOp::Ge: return a >= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Eq: return std::memcmp(&a, &b, sizeof(double)) == 0;
  }
  return false;
}

const ExprPtr& select_arm(const TokenMatch& m, Token t) {
  for (const auto& arm : m.arms)
    if (arm.token == t) return arm.body;
  return m.fallback;
}

double count_value(const Count& c, const StepContext& ctx) {
  int n = (*ctx.counts)[c.token.id];
  if (c.inclusive && ctx.token == c.token) ++n;
  return static_cast<double>(n);
}

const StepContext& need(const StepContext* ctx) {
  if (!ctx) throw ContractError("trajectory-dependent node in a residual expression");
  return *ctx;
}

double eval_node(const Expr& e, const StepContext* ctx, std::span<const double> h) {
  return std::visit(Overloaded{
                        [](const Const& c) { return c.value; },
                        [&](const Hole& x) {
                          if (static_cast<std::size_t>(x.id) > h.size())
                            throw ContractError("hole ?" + std::to_string(x.id) + " has no value");
                          return h[x.id - 1];
                        },
                        [&](const TokenMatch& m) { return eval_node(*select_arm(m, need(ctx).token), ctx, h); },
                        [&](const If& i) {
                          const double a = eval_node(*i.guard.lhs, ctx, h);
                          const double b = eval_node(*i.guard.rhs, ctx, h);
                          return eval_node(compare(i.guard.op, a, b) ? *i.then_branch : *i.else_branch, ctx, h);
                        },
                        [&](const Arith& a) {
                          const double x = eval_node(*a.lhs, ctx, h);
                          const double y = a.rhs ? eval_node(*a.rhs, ctx, h) : 0.0;
                          return arith(a.op, x, y);
                        },
                        [&](const Count& c) { return count_value(c, need(ctx)); },
                        [&](const StepIndex&) { return static_cast<double>(need(ctx).step); },
                        [&](const Len&) { return static_cast<double>(need(ctx).step + 1); },
                    },
                    e.node);
}

ExprPtr residualize(const ExprPtr& e, const StepContext& ctx) {
  return std::visit(Overloaded{
                        [&](const Const&) { return e; },
                        [&](const Hole&) { return e; },
                        [&](const TokenMatch& m) { return residualize(select_arm(m, ctx.token), ctx); },
                        [&](const If& i) -> ExprPtr {
                          ExprPtr a = residualize(i.guard.lhs, ctx);
                          ExprPtr b = residualize(i.guard.rhs, ctx);
                          const auto* ca = std::get_if<Const>(&a->node);
                          const auto* cb = std::get_if<Const>(&b->node);
                          if (ca && cb)
                            return residualize(compare(i.guard.op, ca->value, cb->value) ? i.then_branch
                                                                                          : i.else_branch,
                                               ctx);
                          return if_then_else(i.guard.op, std::move(a), std::move(b),
                                              residualize(i.then_branch, ctx), residualize(i.else_branch, ctx));
                        },
                        [&](const Arith& a) -> ExprPtr {
                          ExprPtr x = residualize(a.lhs, ctx);
                          const auto* cx = std::get_if<Const>(&x->node);
                          if (a.op == ArithOp::Neg) return cx ? constant(arith(a.op, cx->value, 0.0)) : neg(x);
                          ExprPtr y = residualize(a.rhs, ctx);
                          const auto* cy = std::get_if<Const>(&y->node);
                          if (cx && cy) return constant(arith(a.op, cx->value, cy->value));
                          return std::make_shared<const Expr>(Expr{Arith{a.op, std::move(x), std::move(y)}});
                        },
                        [&](const Count& c) { return constant(count_value(c, ctx)); },
                        [&](const StepIndex&) { return constant(static_cast<double>(ctx.step)); },
                        [&](const Len&) { return constant(static_cast<double>(ctx.step + 1)); },
                    },
                    e->node);
}

void check_inputs(const Sketch& s, std::size_t n_values, const Trajectory& tau) {
  if (n_values != s.hole_count())
    throw ContractError("hole assignment has " + std::to_string(n_values) + " values, sketch has " +
                        std::to_string(s.hole_count()) + " holes");
  if (tau.tokens.empty()) throw ContractError("trajectory is empty");
  for (Token t : tau.tokens)
    if (t.id >= s.vocabulary().size()) throw ContractError("trajectory token outside the sketch vocabulary");
}

/// Calls fn(t, ctx) for every step with prefix counts maintained.
template <class Fn>
void for_each_step(const Sketch& s, const Trajectory& tau, Fn&& fn) {
  std::vector<int> counts(s.vocabulary().size(), 0);
  for (std::size_t t = 0; t < tau.tokens.size(); ++t) {
    const StepContext ctx{tau.tokens[t], &counts, static_cast<int>(t)};
    fn(t, ctx);
    ++counts[tau.tokens[t].id];
  }
}

ExprPtr substitute_node(const ExprPtr& e, const HoleAssignment& h) {
  return std::visit(Overloaded{
                        [&](const Hole& x) { return constant(h.values[x.id - 1]); },
                        [&](const TokenMatch& m) {
                          std::vector<MatchArm> arms;
                          arms.reserve(m.arms.size());
                          for (const auto& arm : m.arms) arms.push_back({arm.token, substitute_node(arm.body, h)});
                          return match(std::move(arms), substitute_node(m.fallback, h));
                        },
                        [&](const If& i) {
                          return if_then_else(i.guard.op, substitute_node(i.guard.lhs, h),
                                              substitute_node(i.guard.rhs, h), substitute_node(i.then_branch, h),
                                              substitute_node(i.else_branch, h));
                        },
                        [&](const Arith& a) {
                          if (a.op == ArithOp::Neg) return neg(substitute_node(a.lhs, h));
                          return std::make_shared<const Expr>(
                              Expr{Arith{a.op, substitute_node(a.lhs, h), substitute_node(a.rhs, h)}});
                        },
                        [&](const auto&) { return e; },
                    },
                    e->node);
}

}  // namespace

std::vector<double> eval_program(const Sketch& sketch, const HoleAssignment& h, const Trajectory& tau) {
  check_inputs(sketch, h.size(), tau);
  std::vector<double> out(tau.tokens.size());
  for_each_step(sketch, tau,
                [&](std::size_t t, const StepContext& ctx) { out[t] = eval_node(sketch.root(), &ctx, h.values); });
  return out;
}

double total_reward(const Sketch& sketch, const HoleAssignment& h, const Trajectory& tau) {
  double sum = 0.0;
  for (double r : eval_program(sketch, h, tau)) sum += r;
  return sum;
}

Sketch substitute(const Sketch& sketch, const HoleAssignment& h) {
  if (h.size() != sketch.hole_count())
    throw ContractError("hole assignment has " + std::to_string(h.size()) + " values, sketch has " +
                        std::to_string(sketch.hole_count()) + " holes");
  for (double v : h.values)
    if (!std::isfinite(v)) throw ContractError("hole assignment has a non-finite value");
  return Sketch(substitute_node(sketch.root_ptr(), h), sketch.vocabulary_ptr(), sketch.parameter());
}

ResidualProgram partial_eval(const Sketch& sketch, const Trajectory& tau) {
  check_inputs(sketch, sketch.hole_count(), tau);
  ResidualProgram r;
  r.hole_count = sketch.hole_count();
  r.per_step.resize(tau.tokens.size());
  for_each_step(sketch, tau,
                [&](std::size_t t, const StepContext& ctx) { r.per_step[t] = residualize(sketch.root_ptr(), ctx); });
  return r;
}

double eval_residual_expr(const Expr& e, std::span<const double> h) { return eval_node(e, nullptr, h); }

void apply_residual(const ResidualProgram& r, std::span<const double> h, std::span<double> out) {
  if (h.size() != r.hole_count) throw ContractError("hole assignment length does not match the residual");
  if (out.size() != r.per_step.size()) throw ContractError("output span length does not match the residual");
  for (std::size_t t = 0; t < r.per_step.size(); ++t) out[t] = eval_node(*r.per_step[t], nullptr, h);
}

std::vector<double> apply_residual(const ResidualProgram& r, const HoleAssignment& h) {
  std::vector<double> out(r.per_step.size());
  apply_residual(r, h.values, out);
  return out;
}

double residual_total(const ResidualProgram& r, std::span<const double> h) {
  if (h.size() != r.hole_count) throw ContractError("hole assignment length does not match the residual");
  double sum = 0.0;
  for (const auto& e : r.per_step) sum += eval_node(*e, nullptr, h);
  return sum;
}

std::optional<AffineForm> affine_form(const Expr& e, std::size_t hole_count) {
  return std::visit(
      Overloaded{
          [&](const Const& c) -> std::optional<AffineForm> {
            return AffineForm{c.value, std::vector<double>(hole_count, 0.0)};
          },
          [&](const Hole& x) -> std::optional<AffineForm> {
            if (static_cast<std::size_t>(x.id) > hole_count) return std::nullopt;
            AffineForm f{0.0, std::vector<double>(hole_count, 0.0)};
            f.coeffs[x.id - 1] = 1.0;
            return f;
          },
          [&](const Arith& a) -> std::optional<AffineForm> {
            auto x = affine_form(*a.lhs, hole_count);
            if (!x) return std::nullopt;
            if (a.op == ArithOp::Neg) {
              x->offset = -x->offset;
              for (double& c : x->coeffs) c = -c;
              return x;
            }
            auto y = affine_form(*a.rhs, hole_count);
            if (!y) return std::nullopt;
            const auto constant_part = [](const AffineForm& f) {
              for (double c : f.coeffs)
                if (c != 0.0) return false;
              return true;
            };
            if (a.op == ArithOp::Mul) {
              if (constant_part(*y)) std::swap(x, y);
              if (!constant_part(*x)) return std::nullopt;
              const double k = x->offset;
              y->offset *= k;
              for (double& c : y->coeffs) c *= k;
              return y;
            }
            const double sign = a.op == ArithOp::Add ? 1.0 : -1.0;
            x->offset += sign * y->offset;
            for (std::size_t j = 0; j < hole_count; ++j) x->coeffs[j] += sign * y->coeffs[j];
            return x;
          },
          [](const auto&) -> std::optional<AffineForm> { return std::nullopt; },
      },
      e.node);
}

}  // namespace sketchreward::dsl
