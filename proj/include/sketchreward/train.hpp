#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sketchreward/config.hpp"
#include "sketchreward/constraint.hpp"
#include "sketchreward/environment.hpp"
#include "sketchreward/estimators.hpp"
#include "sketchreward/learner.hpp"

namespace sketchreward::learn {

enum class Mode { Standard, Soft, Hard, Safety };

Mode parse_mode(const std::string& name);
std::string mode_name(Mode m);

struct TrainConfig {
  Mode mode = Mode::Standard;
  /// Iterations; the run also stops once max_frames environment steps were taken (0: no cap).
  long long iterations = 100;
  long long max_frames = 0;
  int m = 16;
  int k = 16;
  double alpha = 0.001;
  double beta = 0.0003;
  double eta = 1e8;
  double sigma = 1.0;
  int noise_draws = 1;
  double discount_gamma = 0.99;
  double eps_floor = -1.0;
  double h_max = 10.0;
  std::string optimizer = "adam";
  /// Initial log z_hat; unset means log(n_actions), which levels the shifted step
  /// rewards with the uniform-softmax f = -log(n_actions).
  std::optional<double> log_z_init;
  std::uint64_t seed = 0;
  int jobs = 1;

  PolicyUpdateConfig policy;

  /// When > 0, stop after the first evaluation reaching this success rate while the
  /// sampler mean satisfies the constraint.
  double target_success = 0.0;
  int eval_every = 10;
  int eval_episodes = 100;
  std::uint64_t eval_seed = 1000;

  est::SafetySpec safety;
  double safety_b = 100.0;
  double lambda_step = 0.01;
  std::string safety_form = "substituted";
  /// Tokens costing 1 per occurrence when the environment has no cost table.
  std::vector<std::string> cost_tokens;

  /// Placeholders recorded with the hyperparameters; unused by the tabular learner.
  double gae_lambda = 0.95;
  double clip = 0.2;

  void validate() const;
  /// Reads every known key; unknown keys are an InputError.
  static TrainConfig from_config(const KeyValueConfig& kv);
  /// key = value lines covering every field, in a fixed order.
  std::string to_config_text() const;
};

struct MetricsRow {
  long long iter = 0;
  double elbo = 0.0;
  double entropy = 0.0;
  double j_c = 0.0;
  double j_gen = 0.0;
  double j_adv = 0.0;
  double constraint_margin = 0.0;
  std::optional<double> eval_success;
  long long frames = 0;
};

std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

struct TrainInputs {
  const dsl::Sketch* sketch = nullptr;
  const constraints::Constraint* constraint = nullptr;
  const std::vector<Trajectory>* demos = nullptr;
  const env::Environment* env = nullptr;
  /// Trajectory cost for the safety mode; defaults to counting cost_tokens.
  est::TrajectoryFn cost;
};

struct TrainResult {
  HoleSampler sampler;
  PolicyTable policy;
  RewardModel reward_model;
  std::vector<MetricsRow> metrics;
  long long frames = 0;
  double lambda = 0.0;
  bool reached_target = false;

  dsl::Program program(const dsl::Sketch& sketch) const { return most_likely_program(sampler, sketch); }
};

/// Fraction of `episodes` greedy rollouts (start states from frozen seeds) that end at the goal token.
double greedy_success(const PolicyTable& policy, const env::Environment& env, int episodes, std::uint64_t seed,
                      const std::string& goal_token = "reach_goal");

/// Called after every iteration with the row just recorded.
using ProgressFn = std::function<void(const MetricsRow&)>;

TrainResult train(const TrainConfig& cfg, const TrainInputs& in, const ProgressFn& progress = {});

}  // namespace sketchreward::learn
