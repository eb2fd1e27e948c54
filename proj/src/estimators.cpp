#include "sketchreward/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sketchreward/error.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward::est {

double log_weight(double l, const Trajectory& tau, int n_actions) {
  return l - tau.log_pi - static_cast<double>(tau.size()) * std::log(static_cast<double>(n_actions));
}

double exact_zl(const env::TabularMdp& mdp, const TrajectoryFn& l, double cap) {
  std::vector<double> terms;
  for (const auto& e : env::enumerate_trajectories(mdp, nullptr, cap)) terms.push_back(std::log(e.prob) + l(e.tau));
  return std::exp(log_sum_exp(terms));
}

double exact_expectation(const env::TabularMdp& mdp, const TrajectoryFn& l, const TrajectoryFn& v, double cap) {
  std::vector<double> logs, values;
  for (const auto& e : env::enumerate_trajectories(mdp, nullptr, cap)) {
    logs.push_back(std::log(e.prob) + l(e.tau));
    values.push_back(v(e.tau));
  }
  return snis(logs, values);
}

double exact_l_max(const env::TabularMdp& mdp, const TrajectoryFn& l, double cap) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& e : env::enumerate_trajectories(mdp, nullptr, cap)) best = std::max(best, l(e.tau));
  return best;
}

double exact_ratio_floor(const env::TabularMdp& mdp, const Policy& policy, double cap) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& e : env::enumerate_trajectories(mdp, &policy, cap))
    best = std::min(best, std::exp(e.tau.log_pi + e.tau.size() * std::log(static_cast<double>(mdp.n_actions))));
  return best;
}

double snis(std::span<const double> log_weights, std::span<const double> values) {
  if (log_weights.empty()) throw ContractError("importance sampling needs a non-empty batch");
  if (log_weights.size() != values.size()) throw ContractError("weights and values differ in length");
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m)) throw NumericalError("non-finite log importance weight");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    const double w = std::exp(log_weights[i] - m);
    num += w * values[i];
    den += w;
  }
  return num / den;
}

namespace {

void check_batch(std::span<const Trajectory> batch) {
  if (batch.empty()) throw ContractError("importance sampling needs a non-empty batch");
  for (const auto& tau : batch)
    if (!std::isfinite(tau.log_pi)) throw ContractError("trajectory log_pi is not finite");
}

}  // namespace

EstimateReport snis_expectation(std::span<const Trajectory> batch, const TrajectoryFn& l, const TrajectoryFn& v,
                                int n_actions) {
  check_batch(batch);
  std::vector<double> lw(batch.size()), vals(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    lw[i] = log_weight(l(batch[i]), batch[i], n_actions);
    vals[i] = v(batch[i]);
  }
  EstimateReport r;
  r.estimate = snis(lw, vals);
  r.m = batch.size();
  return r;
}

TwoBatchParts two_batch_parts(std::span<const double> log_w_i, std::span<const double> v_i,
                              std::span<const double> log_w_j) {
  if (log_w_i.empty() || log_w_j.empty()) throw ContractError("two-batch estimator needs non-empty batches");
  if (log_w_i.size() != log_w_j.size()) throw ContractError("two-batch estimator needs batches of equal size");
  if (log_w_i.size() != v_i.size()) throw ContractError("weights and values differ in length");
  const double m = std::max(*std::max_element(log_w_i.begin(), log_w_i.end()),
                            *std::max_element(log_w_j.begin(), log_w_j.end()));
  if (!std::isfinite(m)) throw NumericalError("non-finite log importance weight");
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < log_w_i.size(); ++k) {
    num += std::exp(log_w_i[k] - m) * v_i[k];
    den += std::exp(log_w_j[k] - m);
  }
  const double n = static_cast<double>(log_w_i.size());
  TwoBatchParts p;
  p.ratio = num / den;
  p.numerator = num / n * std::exp(m);
  p.denominator = den / n * std::exp(m);
  return p;
}

TwoBatchParts two_batch_parts(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                              const TrajectoryFn& l, const TrajectoryFn& v, int n_actions) {
  check_batch(batch_i);
  check_batch(batch_j);
  if (batch_i.size() != batch_j.size()) throw ContractError("two-batch estimator needs batches of equal size");
  std::vector<double> lwi(batch_i.size()), vi(batch_i.size()), lwj(batch_j.size());
  for (std::size_t k = 0; k < batch_i.size(); ++k) {
    lwi[k] = log_weight(l(batch_i[k]), batch_i[k], n_actions);
    vi[k] = v(batch_i[k]);
    lwj[k] = log_weight(l(batch_j[k]), batch_j[k], n_actions);
  }
  return two_batch_parts(lwi, vi, lwj);
}

EstimateReport two_batch_estimate(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                                  const TrajectoryFn& l, const TrajectoryFn& v, int n_actions) {
  EstimateReport r;
  r.estimate = two_batch_parts(batch_i, batch_j, l, v, n_actions).ratio;
  r.m = batch_i.size();
  return r;
}

double theorem1_confidence(std::size_t m, double gamma, double v_bar, double ratio_floor, double l_max) {
  if (!(gamma > 0.0)) throw ContractError("hoeffding_gamma must be positive");
  if (!(v_bar > 0.0)) throw ContractError("v_bar must be positive");
  if (!(ratio_floor > 0.0)) throw ContractError("ratio floor must be positive");
  const double exponent =
      -2.0 * static_cast<double>(m) * gamma * gamma * ratio_floor * ratio_floor / (v_bar * v_bar) / std::exp(2.0 * l_max);
  const double base = 1.0 - std::exp(exponent);
  return std::clamp(std::pow(base, 4.0), 0.0, 1.0);
}

std::size_t theorem1_min_samples(double target, double gamma, double v_bar, double ratio_floor, double l_max) {
  if (!(target > 0.0 && target < 1.0)) throw ContractError("target confidence must lie in (0, 1)");
  const double per_sample = 2.0 * gamma * gamma * ratio_floor * ratio_floor / (v_bar * v_bar) / std::exp(2.0 * l_max);
  auto m = static_cast<std::size_t>(std::ceil(-std::log(1.0 - std::pow(target, 0.25)) / per_sample));
  while (theorem1_confidence(m, gamma, v_bar, ratio_floor, l_max) < target) ++m;
  return m;
}

Theorem1Bound theorem1_interval(const Theorem1Input& in) {
  Theorem1Bound b;
  b.confidence = theorem1_confidence(in.m, in.hoeffding_gamma, in.v_bar, in.ratio_floor, in.l_max);
  const double g = in.hoeffding_gamma;
  b.lo = (in.z * in.j - g) / (in.z + g / in.v_bar);
  const double den = in.z - g / in.v_bar;
  b.hi = den > 0.0 ? (in.z * in.j + g) / den : std::numeric_limits<double>::infinity();
  return b;
}

void SafetySpec::validate() const {
  if (!(kappa > 0.0 && kappa < d)) throw ContractError("safety spec needs 0 < kappa < d");
  if (!(cost_cap >= 0.0)) throw ContractError("safety spec needs a nonnegative cost cap");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("safety alpha must lie in [0, 1]");
  if (!(lambda <= 0.0)) throw ContractError("lagrange multiplier must be nonpositive");
}

double exact_safety_lc(const env::TabularMdp& mdp, std::span<const TrajectoryFn> programs, std::span<const double> q,
                       const SafetySpec& spec, double cap) {
  spec.validate();
  if (programs.size() != q.size() || programs.empty()) throw ContractError("program set and q differ in size");
  double total = 0.0;
  for (double w : q) {
    if (!(w >= 0.0)) throw ContractError("q has a negative weight");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw ContractError("q is not normalized");
  const TrajectoryFn cost = [&](const Trajectory& t) { return mdp.cost(t); };
  double lc = 0.0;
  for (std::size_t k = 0; k < programs.size(); ++k)
    if (exact_expectation(mdp, programs[k], cost, cap) <= spec.d) lc += q[k];
  return lc;
}

std::vector<bool> safety_flags(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                               std::span<const TrajectoryFn> program_samples, const TrajectoryFn& cost,
                               const SafetySpec& spec, int n_actions) {
  spec.validate();
  std::vector<bool> flags;
  flags.reserve(program_samples.size());
  for (const auto& l : program_samples)
    flags.push_back(two_batch_parts(batch_i, batch_j, l, cost, n_actions).ratio >= spec.d - spec.kappa);
  return flags;
}

double empirical_safety_lhat(std::span<const Trajectory> batch_i, std::span<const Trajectory> batch_j,
                             std::span<const TrajectoryFn> program_samples, const TrajectoryFn& cost,
                             const SafetySpec& spec, int n_actions) {
  if (program_samples.empty()) throw ContractError("need at least one program sample");
  const auto flags = safety_flags(batch_i, batch_j, program_samples, cost, spec, n_actions);
  return static_cast<double>(std::count(flags.begin(), flags.end(), true)) / static_cast<double>(flags.size());
}

double proposition1_bound(std::size_t m, const SafetySpec& spec, double ratio_floor, double lc, double delta) {
  spec.validate();
  if (!(delta >= 0.0)) throw ContractError("delta must be nonnegative");
  if (!(lc >= 0.0 && lc <= 1.0)) throw ContractError("L_c must lie in [0, 1]");
  if (!(ratio_floor > 0.0)) throw ContractError("ratio floor must be positive");
  const double spread = spec.cost_cap + spec.d - spec.kappa;
  const double e = std::exp(-2.0 * static_cast<double>(m) * spec.kappa * spec.kappa * ratio_floor * ratio_floor /
                            (spread * spread));
  const double delta_hat = (1.0 - lc) * (1.0 - (1.0 - e) * (1.0 - e));
  const double s = delta + delta_hat;
  return std::clamp(std::exp(-2.0 * s * s), 0.0, 1.0);
}

}  // namespace sketchreward::est
