#pragma once

#include <initializer_list>
#include <optional>
#include <span>
#include <vector>

#include "sketchreward/sketch.hpp"
#include "sketchreward/trajectory.hpp"

namespace sketchreward::dsl {

/// Values for ?1..?n, stored 0-based.
struct HoleAssignment {
  std::vector<double> values;

  HoleAssignment() = default;
  explicit HoleAssignment(std::vector<double> v) : values(std::move(v)) {}
  HoleAssignment(std::initializer_list<double> v) : values(v) {}

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  friend bool operator==(const HoleAssignment&, const HoleAssignment&) = default;
};

/// Per-step rewards: output[t] is the sketch evaluated on the prefix tau[0..t].
std::vector<double> eval_program(const Sketch& sketch, const HoleAssignment& h, const Trajectory& tau);

/// l(tau) = sum_t eval_program(...)[t].
double total_reward(const Sketch& sketch, const HoleAssignment& h, const Trajectory& tau);

/// Complete program e[h/?]: every hole replaced by its value.
Sketch substitute(const Sketch& sketch, const HoleAssignment& h);

/// Per-step residuals of a sketch on a fixed trajectory. Each entry is an
/// expression over holes only (Const, Hole, Arith, If); everything that depends
/// on the trajectory has been folded away.
struct ResidualProgram {
  std::vector<ExprPtr> per_step;
  std::size_t hole_count = 0;

  std::size_t size() const noexcept { return per_step.size(); }
};

ResidualProgram partial_eval(const Sketch& sketch, const Trajectory& tau);

/// Bit-identical to eval_program(sketch, h, tau) for the residual's source.
std::vector<double> apply_residual(const ResidualProgram& r, const HoleAssignment& h);
void apply_residual(const ResidualProgram& r, std::span<const double> h, std::span<double> out);
double residual_total(const ResidualProgram& r, std::span<const double> h);

/// offset + coeffs . h
struct AffineForm {
  double offset = 0.0;
  std::vector<double> coeffs;
};

/// Affine view of a conditional-free residual expression; nullopt if it contains If
/// or trajectory-dependent nodes.
std::optional<AffineForm> affine_form(const Expr& e, std::size_t hole_count);

/// Evaluates a hole-only expression (residual step) at h.
double eval_residual_expr(const Expr& e, std::span<const double> h);

/// Program = Sketch x HoleAssignment.
struct Program {
  Sketch sketch;
  HoleAssignment holes;

  std::vector<double> rewards(const Trajectory& tau) const { return eval_program(sketch, holes, tau); }
  double total(const Trajectory& tau) const { return total_reward(sketch, holes, tau); }
};

}  // namespace sketchreward::dsl
