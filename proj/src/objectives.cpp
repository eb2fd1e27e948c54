#include <algorithm>
#include <cmath>
#include <random>

#include "sketchreward/error.hpp"
#include "sketchreward/learner.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward::learn {

void PreparedBatch::refresh_f(const RewardModel& model) {
  f.resize(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& steps = trajectories[i].steps;
    f[i].resize(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) f[i][t] = model.f(steps[t].state, steps[t].action);
  }
}

void PreparedBatch::refresh_policy(const Policy& policy) {
  log_pi_step.resize(trajectories.size());
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const auto& steps = trajectories[i].steps;
    log_pi_step[i].resize(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t)
      log_pi_step[i][t] = std::log(policy.probability(steps[t].state, steps[t].action));
  }
}

PreparedBatch prepare_batch(const dsl::Sketch& sketch, std::vector<Trajectory> trajectories, const RewardModel& model,
                            const Policy& policy) {
  PreparedBatch b;
  b.trajectories = std::move(trajectories);
  b.residuals.reserve(b.trajectories.size());
  for (const auto& tau : b.trajectories) b.residuals.push_back(dsl::partial_eval(sketch, tau));
  b.refresh_f(model);
  b.refresh_policy(policy);
  return b;
}

std::vector<std::vector<double>> shifted_rewards(const PreparedBatch& batch, std::span<const double> h,
                                                 double log_z_hat) {
  std::vector<std::vector<double>> r(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    r[i].resize(batch.residuals[i].size());
    dsl::apply_residual(batch.residuals[i], h, r[i]);
    for (double& x : r[i]) x -= log_z_hat;
  }
  return r;
}

double log_confidence_agent(std::span<const double> f, std::span<const double> r) {
  if (f.size() != r.size()) throw ContractError("reward sequences differ in length");
  double acc = 0.0;
  for (std::size_t t = 0; t < f.size(); ++t) acc += log_sigmoid(f[t] - r[t]);
  return acc;
}

double log_confidence_demo(std::span<const double> f, std::span<const double> r) {
  if (f.size() != r.size()) throw ContractError("reward sequences differ in length");
  double acc = 0.0;
  for (std::size_t t = 0; t < f.size(); ++t) acc += log_sigmoid(r[t] - f[t]);
  return acc;
}

double log_confidence_agent(const dsl::Program& l, const RewardModel& model, const Trajectory& tau) {
  const auto r = l.rewards(tau);
  std::vector<double> f(tau.size());
  for (std::size_t t = 0; t < tau.size(); ++t) f[t] = model.f(tau.steps[t].state, tau.steps[t].action);
  return log_confidence_agent(f, r);
}

namespace {

void require_batches(const PreparedBatch& agent, const PreparedBatch& demo) {
  if (agent.size() == 0) throw ContractError("agent batch is empty");
  if (demo.size() == 0) throw ContractError("demo batch is empty");
}

}  // namespace

GenTerms gen_terms(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h, double log_z_hat,
                   int n_actions) {
  require_batches(agent, demo);
  const double log_a = std::log(static_cast<double>(n_actions));
  const auto ra = shifted_rewards(agent, h, log_z_hat);
  const std::size_t n = agent.size();
  std::vector<double> lw(n), conf(n), dconf(n), len(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& tau = agent.trajectories[i];
    len[i] = static_cast<double>(tau.size());
    double total = 0.0, c = 0.0, dc = 0.0;
    for (std::size_t t = 0; t < tau.size(); ++t) {
      total += ra[i][t];
      c += log_sigmoid(agent.f[i][t] - ra[i][t]);
      dc += sigmoid(ra[i][t] - agent.f[i][t]);
    }
    lw[i] = total - tau.log_pi - len[i] * log_a;
    conf[i] = c;
    dconf[i] = dc;
  }
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw NumericalError("non-finite importance weights in the generator objective");
  std::vector<double> w(n);
  double mean_len = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = std::exp(lw[i] - lse);
    mean_len += w[i] * len[i];
  }
  GenTerms g;
  for (std::size_t i = 0; i < n; ++i) {
    g.agent += w[i] * conf[i];
    g.d_log_z += w[i] * dconf[i] + w[i] * (mean_len - len[i]) * conf[i];
  }
  const auto rd = shifted_rewards(demo, h, log_z_hat);
  for (std::size_t i = 0; i < demo.size(); ++i) {
    for (std::size_t t = 0; t < rd[i].size(); ++t) {
      g.demo += log_sigmoid(rd[i][t] - demo.f[i][t]);
      g.d_log_z -= sigmoid(demo.f[i][t] - rd[i][t]) / static_cast<double>(demo.size());
    }
  }
  g.demo /= static_cast<double>(demo.size());
  return g;
}

double j_gen(std::span<const std::vector<double>> programs, const PreparedBatch& agent, const PreparedBatch& demo,
             double log_z_hat, int n_actions) {
  if (programs.empty()) throw ContractError("j_gen needs at least one program sample");
  double acc = 0.0;
  for (const auto& h : programs) acc += gen_terms(agent, demo, h, log_z_hat, n_actions).value();
  return acc / static_cast<double>(programs.size());
}

double j_adv(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h, double log_z_hat,
             const RewardModel& model, std::vector<double>* grad_scores) {
  require_batches(agent, demo);
  if (grad_scores) grad_scores->resize(model.raw_scores().size(), 0.0);
  double value = 0.0;
  const auto ra = shifted_rewards(agent, h, log_z_hat);
  const double na = static_cast<double>(agent.size());
  for (std::size_t i = 0; i < agent.size(); ++i)
    for (std::size_t t = 0; t < ra[i].size(); ++t) {
      const double gap = ra[i][t] - agent.f[i][t];
      value += log_sigmoid(gap) / na;
      if (grad_scores) {
        const Step& s = agent.trajectories[i].steps[t];
        model.accumulate_grad(s.state, s.action, -sigmoid(-gap) / na, *grad_scores);
      }
    }
  const auto rd = shifted_rewards(demo, h, log_z_hat);
  const double nd = static_cast<double>(demo.size());
  for (std::size_t i = 0; i < demo.size(); ++i)
    for (std::size_t t = 0; t < rd[i].size(); ++t) {
      const double gap = demo.f[i][t] - rd[i][t];
      value += log_sigmoid(gap) / nd;
      if (grad_scores) {
        const Step& s = demo.trajectories[i].steps[t];
        model.accumulate_grad(s.state, s.action, sigmoid(-gap) / nd, *grad_scores);
      }
    }
  return value;
}

std::vector<double> grad_q_logtrick(const HoleSampler& sampler, std::span<const std::vector<double>> samples,
                                    std::span<const double> values) {
  const std::size_t k = samples.size();
  if (k < 2) throw ContractError("the leave-one-out baseline needs K >= 2 samples");
  if (values.size() != k) throw ContractError("one value per program sample is required");
  double total = 0.0;
  for (double v : values) total += v;
  std::vector<double> g(2 * sampler.size(), 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double baseline = (total - values[i]) / static_cast<double>(k - 1);
    const double centred = values[i] - baseline;
    const auto s = sampler.score(samples[i]);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += s[j] * centred;
  }
  for (double& x : g) x /= static_cast<double>(k);
  return g;
}

ElboTerms elbo(const HoleSampler& sampler, const constraints::Constraint& constraint, double eta, double j_gen_value) {
  ElboTerms e;
  e.entropy = sampler.entropy();
  e.j_c = -eta * constraints::soft_penalty(constraint, sampler.mean);
  e.j_gen = j_gen_value;
  e.total = e.entropy + e.j_c + e.j_gen;
  if (!std::isfinite(e.total)) throw NumericalError("ELBO became non-finite");
  return e;
}

double step_kl(double f, double l, double sigma) {
  if (!(sigma > 0.0)) throw ContractError("noise sigma must be positive");
  const double d = f - l;
  return d * d / (2.0 * sigma * sigma);
}

StochasticTerms stochastic_objectives(const PreparedBatch& agent, const PreparedBatch& demo, std::span<const double> h,
                                      double log_z_hat, const RewardModel& model, double sigma, int noise_draws,
                                      Rng& rng, const StochasticGrad& grad) {
  require_batches(agent, demo);
  if (!(sigma > 0.0)) throw ContractError("noise sigma must be positive");
  if (noise_draws < 1) throw ContractError("noise_draws must be >= 1");
  const std::size_t n_scores = model.raw_scores().size();
  if (grad.soft_scores) grad.soft_scores->resize(n_scores, 0.0);
  if (grad.hard_scores) grad.hard_scores->resize(n_scores, 0.0);
  std::normal_distribution<double> noise(0.0, sigma);
  StochasticTerms out;
  const double var = sigma * sigma;
  const double pooled = static_cast<double>(agent.size() + demo.size());
  const double draws = static_cast<double>(noise_draws);

  const auto visit = [&](const PreparedBatch& b, bool expert) {
    const auto r = shifted_rewards(b, h, log_z_hat);
    const double nb = static_cast<double>(b.size());
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t t = 0; t < r[i].size(); ++t) {
        const Step& s = b.trajectories[i].steps[t];
        const double f = b.f[i][t];
        const double logit = f - b.log_pi_step[i][t];
        const double clean = expert ? log_sigmoid(logit) : log_sigmoid(-logit);
        const double d_clean = expert ? sigmoid(-logit) : -sigmoid(logit);
        out.j_clean += clean / nb;
        double d_noisy = 0.0;
        for (int k = 0; k < noise_draws; ++k) {
          const double z = logit + noise(rng);
          out.j_noisy += (expert ? log_sigmoid(z) : log_sigmoid(-z)) / nb / draws;
          d_noisy += (expert ? sigmoid(-z) : -sigmoid(z)) / draws;
        }
        const double gap = f - r[i][t];
        out.kl += gap * gap / (2.0 * var) / pooled;
        out.log_lik += (-gap * gap / (2.0 * var) - 0.5 * std::log(2.0 * M_PI * var)) / pooled;
        const double d_kl = gap / var / pooled;
        if (grad.d_kl_log_z) *grad.d_kl_log_z += d_kl;
        if (grad.soft_scores) model.accumulate_grad(s.state, s.action, d_noisy / nb - d_kl, *grad.soft_scores);
        if (grad.hard_scores) model.accumulate_grad(s.state, s.action, d_clean / nb - d_kl, *grad.hard_scores);
      }
  };
  visit(agent, false);
  visit(demo, true);
  return out;
}

double box_penalty(std::span<const double> mean, double h_max) {
  double acc = 0.0;
  for (double m : mean) acc += std::max(std::fabs(m) - h_max, 0.0);
  return acc;
}

std::vector<double> grad_box_penalty(std::span<const double> mean, double h_max) {
  std::vector<double> g(mean.size(), 0.0);
  for (std::size_t j = 0; j < mean.size(); ++j)
    if (std::fabs(mean[j]) > h_max) g[j] = mean[j] > 0 ? 1.0 : -1.0;
  return g;
}

SafetyStep safety_train_step(std::span<const double> ratios, const est::SafetySpec& spec, double b, double lambda,
                             double lambda_step, bool direct_form) {
  spec.validate();
  if (ratios.empty()) throw ContractError("safety step needs at least one program");
  if (lambda > 0.0) throw ContractError("the safety multiplier must be <= 0");
  const double k = static_cast<double>(ratios.size());
  SafetyStep out;
  out.adjustments.resize(ratios.size());
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double flag = ratios[i] >= spec.d - spec.kappa ? 1.0 : 0.0;
    const double safe = ratios[i] <= spec.d ? 1.0 : 0.0;
    out.l_hat += flag / k;
    out.lc_plugin += safe / k;
    out.adjustments[i] = direct_form ? -lambda * safe - b * flag : (lambda - b) * flag;
  }
  const double slack = direct_form ? out.lc_plugin - spec.alpha : 1.0 - out.l_hat - spec.alpha;
  out.lambda = std::min(0.0, lambda + lambda_step * slack);
  return out;
}

}  // namespace sketchreward::learn
