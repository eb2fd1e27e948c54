#pragma once

#include <span>
#include <vector>

#include "sketchreward/random.hpp"

namespace sketchreward {

/// Stochastic action selection over integer states.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual int n_actions() const = 0;
  virtual double probability(int state, int action) const = 0;
  virtual int sample(int state, Rng& rng) const;
};

/// Tabular softmax policy mixed with a uniform floor:
/// pi(a|s) = (1 - n*eps) * softmax(logits[s])[a] + eps.
class PolicyTable final : public Policy {
 public:
  /// eps_floor < 0 selects the default 0.01 / n_actions.
  PolicyTable(int n_states, int n_actions, double eps_floor = -1.0);

  int n_states() const noexcept { return n_states_; }
  int n_actions() const override { return n_actions_; }
  double eps_floor() const noexcept { return eps_floor_; }

  double probability(int state, int action) const override;
  int sample(int state, Rng& rng) const override;
  /// Highest-probability action; ties go to the lowest index.
  int greedy_action(int state) const;
  void probabilities(int state, std::span<double> out) const;

  std::span<double> logits(int state) { return {logits_.data() + offset(state), static_cast<std::size_t>(n_actions_)}; }
  std::span<const double> logits(int state) const {
    return {logits_.data() + offset(state), static_cast<std::size_t>(n_actions_)};
  }
  std::vector<double>& raw_logits() noexcept { return logits_; }
  const std::vector<double>& raw_logits() const noexcept { return logits_; }

 private:
  std::size_t offset(int state) const;

  int n_states_;
  int n_actions_;
  double eps_floor_;
  std::vector<double> logits_;
};

/// Deterministic policy view: always the greedy action of a table.
class GreedyPolicy final : public Policy {
 public:
  explicit GreedyPolicy(const PolicyTable& table) : table_(table) {}
  int n_actions() const override { return table_.n_actions(); }
  double probability(int state, int action) const override {
    return action == table_.greedy_action(state) ? 1.0 : 0.0;
  }
  int sample(int state, Rng&) const override { return table_.greedy_action(state); }

 private:
  const PolicyTable& table_;
};

/// Uniform over actions.
class UniformPolicy final : public Policy {
 public:
  explicit UniformPolicy(int n_actions) : n_(n_actions) {}
  int n_actions() const override { return n_; }
  double probability(int, int) const override { return 1.0 / n_; }

 private:
  int n_;
};

}  // namespace sketchreward
