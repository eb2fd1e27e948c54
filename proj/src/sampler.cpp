#include <cmath>
#include <random>

#include "sketchreward/error.hpp"
#include "sketchreward/learner.hpp"
#include "sketchreward/numeric.hpp"

namespace sketchreward::learn {

std::vector<double> HoleSampler::sample(Rng& rng) const {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> h(size());
  for (std::size_t j = 0; j < size(); ++j) h[j] = mean[j] + std::exp(0.5 * log_var[j]) * normal(rng);
  return h;
}

double HoleSampler::log_density(std::span<const double> h) const {
  if (h.size() != size()) throw ContractError("assignment size does not match the sampler");
  double acc = 0.0;
  for (std::size_t j = 0; j < size(); ++j) {
    const double d = h[j] - mean[j];
    acc -= 0.5 * (kLog2Pi + log_var[j] + d * d * std::exp(-log_var[j]));
  }
  return acc;
}

double HoleSampler::entropy() const {
  double acc = 0.0;
  for (double lv : log_var) acc += 0.5 * (lv + kLog2Pi + 1.0);
  return acc;
}

std::vector<double> HoleSampler::score(std::span<const double> h) const {
  if (h.size() != size()) throw ContractError("assignment size does not match the sampler");
  std::vector<double> g(2 * size());
  for (std::size_t j = 0; j < size(); ++j) {
    const double inv_var = std::exp(-log_var[j]);
    const double d = h[j] - mean[j];
    g[j] = d * inv_var;
    g[size() + j] = -0.5 + 0.5 * d * d * inv_var;
  }
  return g;
}

void HoleSampler::validate() const {
  if (mean.size() != log_var.size()) throw ContractError("sampler mean and log_var differ in size");
  for (std::size_t j = 0; j < size(); ++j)
    if (!std::isfinite(mean[j]) || !std::isfinite(log_var[j]))
      throw NumericalError("hole sampler parameter became non-finite");
  if (!std::isfinite(log_z_hat)) throw NumericalError("log z_hat became non-finite");
}

RewardModel::RewardModel(int n_states, int n_actions)
    : n_states_(n_states), n_actions_(n_actions),
      scores_(static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions), 0.0) {
  if (n_states < 1 || n_actions < 1) throw ContractError("reward model needs positive dimensions");
}

void RewardModel::log_probs(int state, std::span<double> out) const {
  const std::span<const double> s(scores_.data() + static_cast<std::size_t>(state) * n_actions_,
                                  static_cast<std::size_t>(n_actions_));
  const double lse = log_sum_exp(s);
  for (int a = 0; a < n_actions_; ++a) out[a] = s[a] - lse;
}

double RewardModel::f(int state, int action) const {
  const std::span<const double> s(scores_.data() + static_cast<std::size_t>(state) * n_actions_,
                                  static_cast<std::size_t>(n_actions_));
  return s[action] - log_sum_exp(s);
}

void RewardModel::accumulate_grad(int state, int action, double g, std::span<double> grad_scores) const {
  const std::size_t off = static_cast<std::size_t>(state) * n_actions_;
  const std::span<const double> s(scores_.data() + off, static_cast<std::size_t>(n_actions_));
  const double lse = log_sum_exp(s);
  for (int b = 0; b < n_actions_; ++b) grad_scores[off + b] -= g * std::exp(s[b] - lse);
  grad_scores[off + action] += g;
}

Optimizer::Optimizer(Kind kind, double step, std::size_t size, double beta1, double beta2, double eps)
    : kind_(kind), step_(step), beta1_(beta1), beta2_(beta2), eps_(eps), m_(size, 0.0), v_(size, 0.0) {
  if (!(step > 0.0)) throw ContractError("optimizer step size must be positive");
}

void Optimizer::ascend(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ContractError("optimizer size mismatch");
  if (kind_ == Kind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += step_ * grad[i];
    return;
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
    params[i] += step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

Optimizer::Kind parse_optimizer(const std::string& name) {
  if (name == "adam") return Optimizer::Kind::Adam;
  if (name == "sgd") return Optimizer::Kind::Sgd;
  throw InputError("unknown optimizer '" + name + "' (expected adam or sgd)");
}

dsl::Program most_likely_program(const HoleSampler& sampler, const dsl::Sketch& sketch) {
  if (sampler.size() != sketch.hole_count())
    throw ContractError("sampler has " + std::to_string(sampler.size()) + " holes, sketch has " +
                        std::to_string(sketch.hole_count()));
  return dsl::Program{sketch, dsl::HoleAssignment(sampler.mean)};
}

}  // namespace sketchreward::learn
