#include <cmath>

#include "sketchreward/error.hpp"
#include "sketchreward/learner.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward::learn {

namespace {

struct StateView {
  std::vector<double> soft;
  std::vector<double> prob;
  double mix;
};

StateView view(const PolicyTable& policy, int state) {
  const int n = policy.n_actions();
  StateView v{std::vector<double>(n), std::vector<double>(n), 1.0 - n * policy.eps_floor()};
  softmax(policy.logits(state), v.soft);
  for (int a = 0; a < n; ++a) v.prob[a] = v.mix * v.soft[a] + policy.eps_floor();
  return v;
}

}  // namespace

double policy_entropy(const PolicyTable& policy, int state) {
  const auto v = view(policy, state);
  double h = 0.0;
  for (double p : v.prob) h -= p * std::log(p);
  return h;
}

std::vector<double> policy_entropy_grad(const PolicyTable& policy, int state) {
  const auto v = view(policy, state);
  double avg = 0.0;
  for (std::size_t a = 0; a < v.soft.size(); ++a) avg += v.soft[a] * std::log(v.prob[a]);
  std::vector<double> g(v.soft.size());
  for (std::size_t b = 0; b < g.size(); ++b) g[b] = -v.mix * v.soft[b] * (std::log(v.prob[b]) - avg);
  return g;
}

void policy_update(PolicyTable& policy, ValueBaseline& baseline, std::span<const Trajectory> batch,
                   std::span<const std::vector<double>> rewards, const PolicyUpdateConfig& cfg) {
  if (rewards.size() != batch.size()) throw ContractError("one reward list per trajectory is required");
  if (baseline.value.size() != static_cast<std::size_t>(policy.n_states()))
    throw ContractError("baseline size does not match the policy");
  std::vector<std::vector<double>> returns(batch.size()), adv(batch.size());
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tau = batch[i];
    if (rewards[i].size() != tau.size()) throw ContractError("reward list length does not match its trajectory");
    returns[i].resize(tau.size());
    adv[i].resize(tau.size());
    double g = 0.0;
    for (std::size_t t = tau.size(); t-- > 0;) {
      g = rewards[i][t] + cfg.discount * g;
      returns[i][t] = g;
      const int s = tau.steps[t].state;
      adv[i][t] = g - (baseline.seen[s] ? baseline.value[s] : 0.0);
      sq += adv[i][t] * adv[i][t];
      ++count;
    }
  }
  const double rms = count ? std::sqrt(sq / static_cast<double>(count)) : 0.0;
  const double scale = rms > 1e-300 ? 1.0 / rms : 0.0;
  const int n = policy.n_actions();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tau = batch[i];
    for (std::size_t t = 0; t < tau.size(); ++t) {
      const int s = tau.steps[t].state;
      const int a = tau.steps[t].action;
      const auto v = view(policy, s);
      const auto ent = policy_entropy_grad(policy, s);
      const double a_scaled = adv[i][t] * scale;
      auto logits = policy.logits(s);
      for (int b = 0; b < n; ++b) {
        const double dlogp = v.mix * v.soft[a] * ((a == b ? 1.0 : 0.0) - v.soft[b]) / v.prob[a];
        logits[b] += cfg.learning_rate * (a_scaled * dlogp + cfg.entropy_coef * ent[b]);
      }
    }
  }
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t t = 0; t < batch[i].size(); ++t) {
      const int s = batch[i].steps[t].state;
      if (!baseline.seen[s]) {
        baseline.value[s] = returns[i][t];
        baseline.seen[s] = 1;
      } else {
        baseline.value[s] += cfg.baseline_rate * (returns[i][t] - baseline.value[s]);
      }
    }
  for (double x : policy.raw_logits())
    if (!std::isfinite(x)) throw NumericalError("policy logits became non-finite");
}

}  // namespace sketchreward::learn
