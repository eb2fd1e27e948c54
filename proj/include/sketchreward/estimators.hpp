#pragma once

#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "sketchreward/policy.hpp"
#include "sketchreward/tabular_mdp.hpp"
#include "sketchreward/trajectory.hpp"

namespace sketchreward::est {

/// Scalar function of a whole trajectory: a program total l(tau), an integrand v(tau).
using TrajectoryFn = std::function<double(const Trajectory&)>;

struct EstimateReport {
  double estimate = 0.0;
  std::size_t m = 0;
  std::optional<double> exact;
  std::optional<std::pair<double, double>> interval;
  std::optional<double> confidence;
};

/// log of the importance weight p(tau) exp(l) / q_A(tau) with the uniform action prior:
/// l - log_pi - |tau| log(n_actions). The dynamics terms cancel.
double log_weight(double l, const Trajectory& tau, int n_actions);

/// Z_l = sum_tau p(tau) exp(l(tau)) by enumeration.
double exact_zl(const env::TabularMdp& mdp, const TrajectoryFn& l, double cap = 1e7);
/// J = sum_tau p(tau) exp(l(tau)) v(tau) / Z_l by enumeration.
double exact_expectation(const env::TabularMdp& mdp, const TrajectoryFn& l, const TrajectoryFn& v, double cap = 1e7);
/// max_tau l(tau) over trajectories with nonzero probability.
double exact_l_max(const env::TabularMdp& mdp, const TrajectoryFn& l, double cap = 1e7);
/// min_tau pi_A(tau) * n_actions^|tau|: the floor of the likelihood ratio between the
/// agent policy and the uniform action prior.
double exact_ratio_floor(const env::TabularMdp& mdp, const Policy& policy, double cap = 1e7);

/// sum_i exp(lw_i) v_i / sum_i exp(lw_i), evaluated with a max shift.
double snis(std::span<const double> log_weights, std::span<const double> values);

EstimateReport snis_expectation(std::span<const Trajectory> batch, const TrajectoryFn& l, const TrajectoryFn& v,
                                int n_actions);

/// Two-batch estimator pieces: numerator (1/m) sum_i w_i v_i over batch_i, denominator
/// (1/m) sum_j w_j over batch_j, and their ratio. The ratio is computed from shifted
/// weights so it is finite whenever log weights are.
struct TwoBatchParts {
  double numerator = 0.0;
  double denominator = 0.0;
  double ratio = 0.0;
};

TwoBatchParts two_batch_parts(std::span<const double> log_w_i, std::span<const double> v_i,
                              std::span<const double> log_w_j);
TwoBatchParts two_batch_parts(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                              const TrajectoryFn& l, const TrajectoryFn& v, int n_actions);
EstimateReport two_batch_estimate(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                                  const TrajectoryFn& l, const TrajectoryFn& v, int n_actions);

struct Theorem1Input {
  std::size_t m = 0;
  double hoeffding_gamma = 0.0;
  /// Upper bound of the integrand, which must take values in [0, v_bar].
  double v_bar = 1.0;
  /// Lower bound of the likelihood ratio pi_A(tau) * n_actions^|tau|.
  double ratio_floor = 1.0;
  /// l_max >= max_tau l(tau).
  double l_max = 0.0;
  double z = 1.0;
  double j = 0.0;
};

struct Theorem1Bound {
  double lo = 0.0;
  double hi = 0.0;
  double confidence = 0.0;
};

/// Interval containing the two-batch estimate of J with probability at least
/// `confidence`: [(zJ - g)/(z + g/v), (zJ + g)/(z - g/v)], upper end +inf when
/// z <= g/v; confidence (1 - exp(-2 m g^2 rho^2 / v^2 / exp(2 l_max)))^4 clamped to [0, 1].
Theorem1Bound theorem1_interval(const Theorem1Input& in);
double theorem1_confidence(std::size_t m, double gamma, double v_bar, double ratio_floor, double l_max);
/// Smallest m whose confidence reaches `target` (< 1).
std::size_t theorem1_min_samples(double target, double gamma, double v_bar, double ratio_floor, double l_max);

struct SafetySpec {
  double d = 1.0;
  double kappa = 0.5;
  /// c_bar >= max_tau c(tau).
  double cost_cap = 1.0;
  double alpha = 0.9;
  double lambda = 0.0;

  /// Throws ContractError unless 0 < kappa < d, cost_cap >= 0, alpha in [0, 1], lambda <= 0.
  void validate() const;
};

/// L_c(q) = sum_k q_k 1{J_c(l_k) <= d}, costs from the MDP's step cost table.
double exact_safety_lc(const env::TabularMdp& mdp, std::span<const TrajectoryFn> programs,
                       std::span<const double> q, const SafetySpec& spec, double cap = 1e7);

/// Fraction of program samples whose two-batch cost ratio is >= d - kappa (ties unsafe).
double empirical_safety_lhat(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                             std::span<const TrajectoryFn> program_samples, const TrajectoryFn& cost,
                             const SafetySpec& spec, int n_actions);
/// Per-sample unsafe flags behind empirical_safety_lhat.
std::vector<bool> safety_flags(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                               std::span<const TrajectoryFn> program_samples, const TrajectoryFn& cost,
                               const SafetySpec& spec, int n_actions);

/// exp(-2 (delta + delta_hat)^2) with
/// delta_hat = (1 - L_c)(1 - (1 - exp(-2 m kappa^2 rho^2 / (c_bar + d - kappa)^2))^2), clamped to [0, 1].
double proposition1_bound(std::size_t m, const SafetySpec& spec, double ratio_floor, double lc, double delta);

}  // namespace sketchreward::est
