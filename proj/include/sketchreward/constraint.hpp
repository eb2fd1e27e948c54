#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sketchreward::constraints {

/// u(h) = coeffs . h + offset; the predicate holds iff u(h) <= 0.
struct AtomicPredicate {
  std::vector<double> coeffs;
  double offset = 0.0;

  double value(std::span<const double> h) const;
  bool holds(std::span<const double> h) const { return value(h) <= 0.0; }
  friend bool operator==(const AtomicPredicate&, const AtomicPredicate&) = default;
};

class Constraint {
 public:
  enum class Kind { Atom, Not, And, Or };

  static Constraint atom(AtomicPredicate a);
  static Constraint negation(Constraint c);
  static Constraint all_of(std::vector<Constraint> cs);
  static Constraint any_of(std::vector<Constraint> cs);

  Kind kind() const noexcept { return kind_; }
  const AtomicPredicate& predicate() const;
  const std::vector<Constraint>& children() const noexcept { return children_; }

 private:
  Kind kind_ = Kind::And;
  AtomicPredicate atom_;
  std::vector<Constraint> children_;
};

/// +1 / -1 semantics: atoms by sign of u, Not negates, And = min, Or = max.
/// An empty And is +1, an empty Or is -1.
double eval_constraint(const Constraint& c, std::span<const double> h);
bool is_satisfied(const Constraint& c, std::span<const double> h);

/// Atoms of a conjunction (nested Ands flattened). Throws ContractError on Not/Or.
std::vector<AtomicPredicate> conjunctive_atoms(const Constraint& c);

/// sum_i -log(1 - sigmoid(relu(u_i(h)))); n log 2 on the feasible set.
double soft_penalty(const Constraint& c, std::span<const double> h);
std::vector<double> grad_soft_penalty(const Constraint& c, std::span<const double> h);

/// sum_i relu(u_i(h)) over a conjunction.
double total_violation(const Constraint& c, std::span<const double> h);
/// -max_i u_i(h); nonnegative iff every atom holds. +inf for an empty conjunction.
double constraint_margin(const Constraint& c, std::span<const double> h);

/// One line of a constraint file: an optional label and a conjunction of atoms.
struct LabelledPredicate {
  std::string label;
  std::vector<AtomicPredicate> atoms;
  std::string source;
  int line = 0;
};

struct ConstraintSet {
  std::vector<LabelledPredicate> predicates;
  std::size_t hole_count = 0;

  std::size_t atom_count() const;
  Constraint conjunction() const;
};

/// Parses a .rsc file. Each non-empty line is `[label:] lin (<=|>=) lin (&& ...)*`
/// over ?ids and numeric literals. Ids above `hole_count` raise LinkError; when
/// hole_count is nullopt it is taken as the largest id referenced.
ConstraintSet parse_constraints(std::string_view text, std::optional<std::size_t> hole_count = std::nullopt);

std::string format_atom(const AtomicPredicate& a);

}  // namespace sketchreward::constraints
