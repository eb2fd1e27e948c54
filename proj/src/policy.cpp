#include "sketchreward/policy.hpp"

#include <vector>

#include "sketchreward/error.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward {

int Policy::sample(int state, Rng& rng) const {
  const int n = n_actions();
  double u = uniform01(rng);
  for (int a = 0; a < n - 1; ++a) {
    u -= probability(state, a);
    if (u < 0) return a;
  }
  return n - 1;
}

PolicyTable::PolicyTable(int n_states, int n_actions, double eps_floor)
    : n_states_(n_states), n_actions_(n_actions), eps_floor_(eps_floor < 0 ? 0.01 / n_actions : eps_floor) {
  if (n_states <= 0 || n_actions <= 0) throw ContractError("policy table needs positive state and action counts");
  if (eps_floor_ * n_actions_ >= 1.0) throw ContractError("eps_floor * n_actions must be below 1");
  logits_.assign(static_cast<std::size_t>(n_states) * n_actions, 0.0);
}

std::size_t PolicyTable::offset(int state) const {
  if (state < 0 || state >= n_states_) throw ContractError("state index out of range");
  return static_cast<std::size_t>(state) * n_actions_;
}

void PolicyTable::probabilities(int state, std::span<double> out) const {
  softmax(logits(state), out);
  const double mix = 1.0 - n_actions_ * eps_floor_;
  for (double& p : out) p = mix * p + eps_floor_;
}

double PolicyTable::probability(int state, int action) const {
  std::vector<double> p(n_actions_);
  probabilities(state, p);
  return p.at(action);
}

int PolicyTable::sample(int state, Rng& rng) const {
  std::vector<double> p(n_actions_);
  probabilities(state, p);
  double u = uniform01(rng);
  for (int a = 0; a < n_actions_ - 1; ++a) {
    u -= p[a];
    if (u < 0) return a;
  }
  return n_actions_ - 1;
}

int PolicyTable::greedy_action(int state) const {
  const auto l = logits(state);
  int best = 0;
  for (int a = 1; a < n_actions_; ++a)
    if (l[a] > l[best]) best = a;
  return best;
}

}  // namespace sketchreward
