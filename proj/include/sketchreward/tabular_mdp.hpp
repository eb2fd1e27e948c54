#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "sketchreward/environment.hpp"

namespace sketchreward::env {

/// Explicit finite MDP with fixed-length episodes of `horizon` steps.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 1;
  /// P[s][a][s'] flattened as (s * n_actions + a) * n_states + s'.
  std::vector<double> transition;
  std::vector<double> init;
  /// Token emitted by (s, a), flattened as s * n_actions + a.
  std::vector<Token> tokens;
  /// Per-step cost c(s, a); empty means zero cost.
  std::vector<double> step_cost;
  std::shared_ptr<const Vocabulary> vocab = Vocabulary::standard();

  double p(int s, int a, int s_next) const {
    return transition[(static_cast<std::size_t>(s) * n_actions + a) * n_states + s_next];
  }
  Token token(int s, int a) const { return tokens[static_cast<std::size_t>(s) * n_actions + a]; }
  double cost(int s, int a) const {
    return step_cost.empty() ? 0.0 : step_cost[static_cast<std::size_t>(s) * n_actions + a];
  }
  /// c(tau) = sum of per-step costs.
  double cost(const Trajectory& tau) const;
  /// Largest c(tau) over trajectories with nonzero probability.
  double max_cost() const;

  /// Throws InputError unless rows sum to 1 within 1e-12 and shapes agree.
  void validate() const;
};

/// Reads the JSON MDP format: {"n_states", "n_actions", "horizon", "init",
/// "transition": [s][a][s'], "tokens": [s][a] names, optional "step_cost": [s][a],
/// optional "vocabulary": [names]}.
TabularMdp parse_mdp_json(std::string_view text);
TabularMdp load_mdp(const std::string& path);

class TabularEnv final : public Environment {
 public:
  explicit TabularEnv(TabularMdp mdp, std::string name = "tabular");

  std::string id() const override { return name_; }
  int n_states() const override { return mdp_.n_states; }
  int n_actions() const override { return mdp_.n_actions; }
  int horizon() const override { return mdp_.horizon; }
  const std::shared_ptr<const Vocabulary>& vocabulary() const override { return mdp_.vocab; }
  int reset(Rng& rng) const override;
  Transition step(int state, int action, Rng& rng) const override;
  Token pred(std::span<const Step> prefix) const override;

  const TabularMdp& mdp() const noexcept { return mdp_; }

 private:
  TabularMdp mdp_;
  std::string name_;
};

struct EnumeratedTrajectory {
  Trajectory tau;
  /// d0(s0) * prod P(s_{t+1} | s_t, a_t).
  double passive_prob = 0.0;
  /// passive_prob * (1/n_actions)^|tau|: the trajectory law under the uniform action prior.
  double prob = 0.0;
};

/// Every trajectory with nonzero passive probability. log_pi is filled from `policy`
/// when given, otherwise from the uniform policy. Throws ContractError when
/// (n_states * n_actions)^horizon exceeds `cap`.
std::vector<EnumeratedTrajectory> enumerate_trajectories(const TabularMdp& mdp, const Policy* policy = nullptr,
                                                         double cap = 1e7);

}  // namespace sketchreward::env
