#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sketchreward/constraint.hpp"
#include "sketchreward/estimators.hpp"
#include "sketchreward/eval.hpp"
#include "sketchreward/policy.hpp"
#include "sketchreward/random.hpp"
#include "sketchreward/trajectory.hpp"

namespace sketchreward::learn {

/// Diagonal Gaussian over hole assignments plus the learned normalizer log z_hat.
struct HoleSampler {
  std::vector<double> mean;
  std::vector<double> log_var;
  double log_z_hat = 0.0;

  HoleSampler() = default;
  explicit HoleSampler(std::size_t holes) : mean(holes, 0.0), log_var(holes, 0.0) {}

  std::size_t size() const noexcept { return mean.size(); }
  std::vector<double> sample(Rng& rng) const;
  double log_density(std::span<const double> h) const;
  /// sum_j (log_var_j + log 2 pi e) / 2
  double entropy() const;
  /// d log q(h) / d(mean, log_var), concatenated.
  std::vector<double> score(std::span<const double> h) const;
  /// Throws NumericalError on non-finite parameters.
  void validate() const;
};

/// f(s, a) = log softmax(scores[s])[a].
class RewardModel {
 public:
  RewardModel(int n_states, int n_actions);

  int n_states() const noexcept { return n_states_; }
  int n_actions() const noexcept { return n_actions_; }
  double f(int state, int action) const;
  void log_probs(int state, std::span<double> out) const;
  std::span<double> scores(int state) {
    return {scores_.data() + static_cast<std::size_t>(state) * n_actions_, static_cast<std::size_t>(n_actions_)};
  }
  std::vector<double>& raw_scores() noexcept { return scores_; }
  const std::vector<double>& raw_scores() const noexcept { return scores_; }

  /// Chains d objective / d f(s, a) = g into d objective / d scores[s].
  void accumulate_grad(int state, int action, double g, std::span<double> grad_scores) const;

 private:
  int n_states_;
  int n_actions_;
  std::vector<double> scores_;
};

/// Gradient ascent step rule. Adam with bias correction, or plain steps.
class Optimizer {
 public:
  enum class Kind { Adam, Sgd };

  Optimizer(Kind kind, double step, std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  /// params += step * direction(grad).
  void ascend(std::span<double> params, std::span<const double> grad);
  std::size_t size() const noexcept { return m_.size(); }

 private:
  Kind kind_;
  double step_;
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<double> m_, v_;
};

Optimizer::Kind parse_optimizer(const std::string& name);

/// Trajectories with their residual programs, f values and agent log-probabilities per step.
struct PreparedBatch {
  std::vector<Trajectory> trajectories;
  std::vector<dsl::ResidualProgram> residuals;
  std::vector<std::vector<double>> f;
  std::vector<std::vector<double>> log_pi_step;

  std::size_t size() const noexcept { return trajectories.size(); }
  void refresh_f(const RewardModel& model);
  void refresh_policy(const Policy& policy);
};

PreparedBatch prepare_batch(const dsl::Sketch& sketch, std::vector<Trajectory> trajectories, const RewardModel& model,
                            const Policy& policy);

/// Per-step rewards r_t = [[l]](tau)[t] - log z_hat of every trajectory in a batch.
std::vector<std::vector<double>> shifted_rewards(const PreparedBatch& batch, std::span<const double> h,
                                                 double log_z_hat);

/// sum_t log sigmoid(f_t - r_t): log-probability that every step is labelled agent-side.
double log_confidence_agent(std::span<const double> f, std::span<const double> r);
/// sum_t log sigmoid(r_t - f_t).
double log_confidence_demo(std::span<const double> f, std::span<const double> r);
double log_confidence_agent(const dsl::Program& l, const RewardModel& model, const Trajectory& tau);

/// Per-program generator objective with its derivative in log z_hat.
struct GenTerms {
  double agent = 0.0;
  double demo = 0.0;
  double d_log_z = 0.0;
  double value() const noexcept { return agent + demo; }
};

/// SNIS estimate of E_{p(tau|l)}[log p(1_A|tau)] over the agent batch plus the demo mean
/// of log p(0_E|tau). Importance weights use the shifted total l(tau) - |tau| log z_hat.
GenTerms gen_terms(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h, double log_z_hat,
                   int n_actions);

/// Mean over the sampled programs of gen_terms(...).value().
double j_gen(std::span<const std::vector<double>> programs, const PreparedBatch& agent, const PreparedBatch& demo,
             double log_z_hat, int n_actions);

/// Discriminator objective: mean_A sum_t log sigmoid(r - f) + mean_E sum_t log sigmoid(f - r).
/// Adds d/d scores into grad_scores when given (size n_states * n_actions).
double j_adv(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h, double log_z_hat,
             const RewardModel& model, std::vector<double>* grad_scores = nullptr);

/// Log-trick estimate of d E_q[value] / d(mean, log_var) with a leave-one-out baseline.
std::vector<double> grad_q_logtrick(const HoleSampler& sampler, std::span<const std::vector<double>> samples,
                                    std::span<const double> values);

struct ElboTerms {
  double entropy = 0.0;
  double j_c = 0.0;
  double j_gen = 0.0;
  double total = 0.0;
};

/// H(q) + J_c + J_gen with J_c = -eta * soft_penalty(mean).
ElboTerms elbo(const HoleSampler& sampler, const constraints::Constraint& constraint, double eta, double j_gen_value);

/// (f - l)^2 / (2 sigma^2): KL between equal-variance Gaussians centred at f and l.
double step_kl(double f, double l, double sigma);

struct StochasticTerms {
  /// Monte-Carlo mean of J(f + eps).
  double j_noisy = 0.0;
  /// Noiseless J(f).
  double j_clean = 0.0;
  /// Mean over the pooled batch of sum_t step_kl.
  double kl = 0.0;
  /// Mean over the pooled batch of sum_t log N(f_t; r_t, sigma^2).
  double log_lik = 0.0;
  double l_f() const noexcept { return j_noisy - kl; }
  double hard() const noexcept { return j_clean + log_lik; }
};

/// Discriminator D_t = sigmoid(f_t + eps_t - log pi_A(a_t|s_t)); J = mean_A sum log(1 - D) +
/// mean_E sum log D. Gradients in the scores of L_f (soft) or of J + log_lik (hard) are
/// added into grad_scores when given; d kl / d log z_hat goes to d_log_z when given.
struct StochasticGrad {
  std::vector<double>* soft_scores = nullptr;
  std::vector<double>* hard_scores = nullptr;
  double* d_kl_log_z = nullptr;
};

StochasticTerms stochastic_objectives(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h,
                                      double log_z_hat, const RewardModel& model, double sigma, int noise_draws,
                                      Rng& rng, const StochasticGrad& grad = {});

/// Soft-mode prior penalty: sum_j relu(|mean_j| - h_max), the mass-outside-the-box hinge.
double box_penalty(std::span<const double> mean, double h_max);
std::vector<double> grad_box_penalty(std::span<const double> mean, double h_max);

struct PolicyUpdateConfig {
  double learning_rate = 0.5;
  double entropy_coef = 0.01;
  double discount = 0.99;
  double baseline_rate = 0.1;
};

/// Per-state running mean of returns used as the REINFORCE baseline.
struct ValueBaseline {
  std::vector<double> value;
  std::vector<std::uint8_t> seen;
  explicit ValueBaseline(int n_states) : value(static_cast<std::size_t>(n_states), 0.0), seen(value.size(), 0) {}
};

/// REINFORCE on discounted returns with the baseline, advantages scaled by their batch
/// RMS, plus the exact entropy gradient of the floored mixture. rewards[i][t] pairs with
/// batch[i].steps[t].
void policy_update(PolicyTable& policy, ValueBaseline& baseline, std::span<const Trajectory> batch,
                   std::span<const std::vector<double>> rewards, const PolicyUpdateConfig& cfg);

/// d H(pi(.|s)) / d logits(s).
std::vector<double> policy_entropy_grad(const PolicyTable& policy, int state);
double policy_entropy(const PolicyTable& policy, int state);

struct SafetyStep {
  /// Added to each program's objective value before the log-trick gradient.
  std::vector<double> adjustments;
  double lambda = 0.0;
  /// Fraction of programs flagged by ratio >= d - kappa.
  double l_hat = 0.0;
  /// Fraction of programs with ratio <= d.
  double lc_plugin = 0.0;
};

/// Lagrangian safety terms from per-program two-batch cost ratios. The substituted form
/// adds (lambda - b) * flag and uses the slack 1 - l_hat - alpha; the direct form adds
/// -lambda * safe - b * flag with the slack lc_plugin - alpha. lambda takes one projected
/// step lambda <- min(0, lambda + lambda_step * slack).
SafetyStep safety_train_step(std::span<const double> ratios, const est::SafetySpec& spec, double b, double lambda,
                             double lambda_step, bool direct_form);

/// l* = sketch with the sampler mean substituted.
dsl::Program most_likely_program(const HoleSampler& sampler, const dsl::Sketch& sketch);

}  // namespace sketchreward::learn
