#include "sketchreward/train.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "sketchreward/error.hpp"
#include "sketchreward/parallel.hpp"
#include "sketchreward/policy.hpp"

namespace sketchreward::learn {

Mode parse_mode(const std::string& name) {
  if (name == "standard") return Mode::Standard;
  if (name == "soft") return Mode::Soft;
  if (name == "hard") return Mode::Hard;
  if (name == "safety") return Mode::Safety;
  throw InputError("unknown mode '" + name + "' (expected standard, soft, hard or safety)");
}

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Standard: return "standard";
    case Mode::Soft: return "soft";
    case Mode::Hard: return "hard";
    case Mode::Safety: return "safety";
  }
  return "standard";
}

void TrainConfig::validate() const {
  if (iterations < 0) throw InputError("N must be >= 0");
  if (max_frames < 0) throw InputError("max_frames must be >= 0");
  if (m < 1) throw InputError("m must be >= 1");
  if (k < 2) throw InputError("K must be >= 2 (leave-one-out baseline)");
  if (!(alpha > 0.0) || !(beta > 0.0)) throw InputError("step sizes alpha and beta must be positive");
  if (!(eta >= 0.0)) throw InputError("eta must be >= 0");
  if (!(sigma > 0.0)) throw InputError("sigma must be positive");
  if (noise_draws < 1) throw InputError("noise_draws must be >= 1");
  if (!(discount_gamma >= 0.0 && discount_gamma <= 1.0)) throw InputError("discount_gamma must lie in [0, 1]");
  if (!(h_max > 0.0)) throw InputError("h_max must be positive");
  if (!(policy.learning_rate > 0.0)) throw InputError("policy_lr must be positive");
  if (!(policy.entropy_coef >= 0.0)) throw InputError("entropy_coef must be >= 0");
  if (!(policy.baseline_rate > 0.0 && policy.baseline_rate <= 1.0)) throw InputError("baseline_rate must lie in (0, 1]");
  if (!(target_success >= 0.0 && target_success <= 1.0)) throw InputError("target_success must lie in [0, 1]");
  if (eval_every < 1 || eval_episodes < 1) throw InputError("eval_every and eval_episodes must be >= 1");
  if (jobs < 1) throw InputError("jobs must be >= 1");
  parse_optimizer(optimizer);
  if (mode == Mode::Safety) {
    try {
      safety.validate();
    } catch (const ContractError& e) {
      throw InputError(e.what());
    }
    if (m < 2 || m % 2) throw InputError("safety mode splits the rollouts into two batches: m must be even");
    if (safety_form != "substituted" && safety_form != "direct")
      throw InputError("safety.form must be substituted or direct");
    if (!(safety_b >= 0.0) || !(lambda_step > 0.0)) throw InputError("safety.B must be >= 0 and lambda_step > 0");
  }
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
  kv.require_known({"mode", "N", "max_frames", "m", "K", "alpha", "beta", "eta", "sigma", "noise_draws",
                    "discount_gamma", "eps_floor", "h_max", "optimizer", "log_z_init", "seed", "jobs", "policy_lr",
                    "entropy_coef", "baseline_rate", "target_success", "eval_every", "eval_episodes", "eval_seed", "safety.d",
                    "safety.kappa", "safety.cost_cap", "safety.alpha_conf", "safety.lambda", "safety.B",
                    "safety.lambda_step", "safety.form", "safety.cost_tokens", "gae_lambda", "clip"});
  TrainConfig c;
  c.mode = parse_mode(kv.get_string("mode", mode_name(c.mode)));
  c.iterations = kv.get_int("N", c.iterations);
  c.max_frames = kv.get_int("max_frames", c.max_frames);
  c.m = static_cast<int>(kv.get_int("m", c.m));
  c.k = static_cast<int>(kv.get_int("K", c.k));
  c.alpha = kv.get_double("alpha", c.alpha);
  c.beta = kv.get_double("beta", c.beta);
  c.eta = kv.get_double("eta", c.eta);
  c.sigma = kv.get_double("sigma", c.sigma);
  c.noise_draws = static_cast<int>(kv.get_int("noise_draws", c.noise_draws));
  c.discount_gamma = kv.get_double("discount_gamma", c.discount_gamma);
  c.eps_floor = kv.get_double("eps_floor", c.eps_floor);
  c.h_max = kv.get_double("h_max", c.h_max);
  c.optimizer = kv.get_string("optimizer", c.optimizer);
  if (kv.has("log_z_init")) c.log_z_init = kv.get_double("log_z_init", 0.0);
  c.seed = kv.get_uint64("seed", c.seed);
  c.jobs = static_cast<int>(kv.get_int("jobs", c.jobs));
  c.policy.learning_rate = kv.get_double("policy_lr", c.policy.learning_rate);
  c.policy.entropy_coef = kv.get_double("entropy_coef", c.policy.entropy_coef);
  c.policy.baseline_rate = kv.get_double("baseline_rate", c.policy.baseline_rate);
  c.target_success = kv.get_double("target_success", c.target_success);
  c.eval_every = static_cast<int>(kv.get_int("eval_every", c.eval_every));
  c.eval_episodes = static_cast<int>(kv.get_int("eval_episodes", c.eval_episodes));
  c.eval_seed = kv.get_uint64("eval_seed", c.eval_seed);
  c.safety.d = kv.get_double("safety.d", c.safety.d);
  c.safety.kappa = kv.get_double("safety.kappa", c.safety.kappa);
  c.safety.cost_cap = kv.get_double("safety.cost_cap", c.safety.cost_cap);
  c.safety.alpha = kv.get_double("safety.alpha_conf", c.safety.alpha);
  c.safety.lambda = kv.get_double("safety.lambda", c.safety.lambda);
  c.safety_b = kv.get_double("safety.B", c.safety_b);
  c.lambda_step = kv.get_double("safety.lambda_step", c.lambda_step);
  c.safety_form = kv.get_string("safety.form", c.safety_form);
  if (kv.has("safety.cost_tokens")) {
    c.cost_tokens.clear();
    std::stringstream ss(kv.get_string("safety.cost_tokens", ""));
    for (std::string tok; std::getline(ss, tok, ',');) {
      tok.erase(0, tok.find_first_not_of(" \t"));
      tok.erase(tok.find_last_not_of(" \t") + 1);
      if (!tok.empty()) c.cost_tokens.push_back(tok);
    }
  }
  c.gae_lambda = kv.get_double("gae_lambda", c.gae_lambda);
  c.clip = kv.get_double("clip", c.clip);
  c.policy.discount = c.discount_gamma;
  c.validate();
  return c;
}

std::string TrainConfig::to_config_text() const {
  std::string tokens;
  for (const auto& t : cost_tokens) tokens += (tokens.empty() ? "" : ",") + t;
  std::string out;
  const auto line = [&](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
  line("mode", mode_name(mode));
  line("N", iterations);
  line("max_frames", max_frames);
  line("m", m);
  line("K", k);
  line("alpha", alpha);
  line("beta", beta);
  line("eta", eta);
  line("sigma", sigma);
  line("noise_draws", noise_draws);
  line("discount_gamma", discount_gamma);
  line("eps_floor", eps_floor);
  line("h_max", h_max);
  line("optimizer", optimizer);
  if (log_z_init) line("log_z_init", *log_z_init);
  line("seed", seed);
  line("jobs", jobs);
  line("policy_lr", policy.learning_rate);
  line("entropy_coef", policy.entropy_coef);
  line("baseline_rate", policy.baseline_rate);
  line("target_success", target_success);
  line("eval_every", eval_every);
  line("eval_episodes", eval_episodes);
  line("eval_seed", eval_seed);
  line("safety.d", safety.d);
  line("safety.kappa", safety.kappa);
  line("safety.cost_cap", safety.cost_cap);
  line("safety.alpha_conf", safety.alpha);
  line("safety.lambda", safety.lambda);
  line("safety.B", safety_b);
  line("safety.lambda_step", lambda_step);
  line("safety.form", safety_form);
  if (!tokens.empty()) line("safety.cost_tokens", tokens);
  line("gae_lambda", gae_lambda);
  line("clip", clip);
  return out;
}

std::string format_metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = "iter,elbo,H,J_c,J_gen,j_adv,constraint_margin,eval_success,frames\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.iter, r.elbo, r.entropy, r.j_c, r.j_gen, r.j_adv,
                       r.constraint_margin, r.eval_success ? fmt::format("{}", *r.eval_success) : std::string(),
                       r.frames);
  return out;
}

double greedy_success(const PolicyTable& policy, const env::Environment& env, int episodes, std::uint64_t seed,
                      const std::string& goal_token) {
  const Token goal = env.vocabulary()->at(goal_token);
  const GreedyPolicy greedy(policy);
  int wins = 0;
  for (int e = 0; e < episodes; ++e) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(e));
    const Trajectory tau = env::rollout(greedy, env, rng);
    if (!tau.tokens.empty() && tau.tokens.back() == goal) ++wins;
  }
  return static_cast<double>(wins) / static_cast<double>(episodes);
}

namespace {

void check_finite(double x, const char* what, long long iter) {
  if (!std::isfinite(x)) throw NumericalError(fmt::format("{} became non-finite at iteration {}", what, iter));
}

void check_demos(const std::vector<Trajectory>& demos, const env::Environment& env) {
  if (demos.empty()) throw InputError("training needs at least one demonstration");
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const auto& tau = demos[i];
    if (tau.size() == 0) throw InputError(fmt::format("demonstration {} is empty", i));
    for (const Step& s : tau.steps)
      if (s.state < 0 || s.state >= env.n_states() || s.action < 0 || s.action >= env.n_actions())
        throw InputError(fmt::format("demonstration {} leaves the environment's state/action space", i));
  }
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainInputs& in, const ProgressFn& progress) {
  cfg.validate();
  if (!in.sketch || !in.constraint || !in.demos || !in.env) throw ContractError("train inputs are incomplete");
  const dsl::Sketch& sketch = *in.sketch;
  const env::Environment& env = *in.env;
  check_demos(*in.demos, env);
  for (const auto& a : constraints::conjunctive_atoms(*in.constraint))
    if (a.coeffs.size() != sketch.hole_count())
      throw InputError("constraint and sketch disagree on the number of holes");

  const std::size_t n_holes = sketch.hole_count();
  const int n_actions = env.n_actions();
  TrainResult res{HoleSampler(n_holes), PolicyTable(env.n_states(), n_actions, cfg.eps_floor),
                  RewardModel(env.n_states(), n_actions), {}, 0, cfg.safety.lambda};
  HoleSampler& q = res.sampler;
  PolicyTable& policy = res.policy;
  RewardModel& model = res.reward_model;
  ValueBaseline baseline(env.n_states());
  q.log_z_hat = cfg.log_z_init.value_or(std::log(static_cast<double>(n_actions)));

  const auto opt_kind = parse_optimizer(cfg.optimizer);
  Optimizer q_opt(opt_kind, cfg.beta, 2 * n_holes + 1);
  Optimizer c_opt(opt_kind, cfg.beta, n_holes);
  Optimizer f_opt(opt_kind, cfg.alpha, model.raw_scores().size());

  est::TrajectoryFn cost = in.cost;
  if (!cost) {
    std::vector<Token> costly;
    for (const auto& name : cfg.cost_tokens) costly.push_back(env.vocabulary()->at(name));
    cost = [costly](const Trajectory& t) {
      double c = 0.0;
      for (Token tok : t.tokens) c += static_cast<double>(std::count(costly.begin(), costly.end(), tok));
      return c;
    };
  }

  PreparedBatch demo = prepare_batch(sketch, *in.demos, model, policy);
  Rng rng = make_stream(cfg.seed, 0);
  const std::uint64_t rollout_seed = cfg.seed ^ 0x5DEECE66DULL;

  for (long long iter = 0; iter < cfg.iterations; ++iter) {
    if (cfg.max_frames > 0 && res.frames >= cfg.max_frames) break;

    std::vector<Trajectory> rollouts(static_cast<std::size_t>(cfg.m));
    parallel_for(rollouts.size(), cfg.jobs, [&](std::size_t i) {
      Rng r = make_stream(rollout_seed + static_cast<std::uint64_t>(iter), i);
      rollouts[i] = env::rollout(policy, env, r);
    });
    for (const auto& t : rollouts) res.frames += static_cast<long long>(t.size());

    PreparedBatch agent = prepare_batch(sketch, std::move(rollouts), model, policy);
    demo.refresh_policy(policy);

    const auto star = shifted_rewards(agent, q.mean, 0.0);
    policy_update(policy, baseline, agent.trajectories, star, cfg.policy);

    std::vector<std::vector<double>> programs(static_cast<std::size_t>(cfg.k));
    for (auto& h : programs) h = q.sample(rng);

    std::vector<std::vector<double>> f_grads(programs.size());
    std::vector<double> adv_values(programs.size(), 0.0);
    std::vector<Rng> noise_rngs;
    for (std::size_t k = 0; k < programs.size(); ++k) noise_rngs.push_back(make_stream(rng(), k));
    parallel_for(programs.size(), cfg.jobs, [&](std::size_t k) {
      if (cfg.mode == Mode::Standard) {
        adv_values[k] = j_adv(agent, demo, programs[k], q.log_z_hat, model, &f_grads[k]);
      } else {
        StochasticGrad g;
        if (cfg.mode == Mode::Hard)
          g.hard_scores = &f_grads[k];
        else
          g.soft_scores = &f_grads[k];
        const auto terms = stochastic_objectives(agent, demo, programs[k], q.log_z_hat, model, cfg.sigma,
                                                 cfg.noise_draws, noise_rngs[k], g);
        adv_values[k] = cfg.mode == Mode::Hard ? terms.hard() : terms.l_f();
      }
    });
    std::vector<double> f_grad(model.raw_scores().size(), 0.0);
    double adv_mean = 0.0;
    for (std::size_t k = 0; k < programs.size(); ++k) {
      for (std::size_t j = 0; j < f_grad.size(); ++j) f_grad[j] += f_grads[k][j] / cfg.k;
      adv_mean += adv_values[k] / cfg.k;
    }
    f_opt.ascend(model.raw_scores(), f_grad);
    agent.refresh_f(model);
    demo.refresh_f(model);

    std::vector<double> values(programs.size(), 0.0), d_log_z(programs.size(), 0.0);
    parallel_for(programs.size(), cfg.jobs, [&](std::size_t k) {
      if (cfg.mode == Mode::Standard) {
        const auto g = gen_terms(agent, demo, programs[k], q.log_z_hat, n_actions);
        values[k] = g.value();
        d_log_z[k] = g.d_log_z;
      } else {
        double d_kl = 0.0;
        StochasticGrad g;
        g.d_kl_log_z = &d_kl;
        Rng unused(0);
        const auto terms = stochastic_objectives(agent, demo, programs[k], q.log_z_hat, model, cfg.sigma, 1,
                                                 unused, g);
        values[k] = cfg.mode == Mode::Hard ? terms.log_lik : -terms.kl;
        d_log_z[k] = -d_kl;
      }
    });

    if (cfg.mode == Mode::Safety) {
      const std::size_t half = agent.size() / 2;
      const std::span<const Trajectory> all(agent.trajectories);
      const auto bi = all.subspan(0, half);
      const auto bj = all.subspan(half, half);
      std::vector<double> ratios(programs.size());
      for (std::size_t k = 0; k < programs.size(); ++k) {
        const auto& h = programs[k];
        const est::TrajectoryFn l = [&](const Trajectory& t) { return dsl::total_reward(sketch, dsl::HoleAssignment(h), t); };
        ratios[k] = est::two_batch_parts(bi, bj, l, cost, n_actions).ratio;
      }
      const auto step = safety_train_step(ratios, cfg.safety, cfg.safety_b, res.lambda, cfg.lambda_step,
                                          cfg.safety_form == "direct");
      for (std::size_t k = 0; k < programs.size(); ++k) values[k] += step.adjustments[k];
      res.lambda = step.lambda;
    }

    auto grad = grad_q_logtrick(q, programs, values);
    for (std::size_t j = 0; j < n_holes; ++j) grad[n_holes + j] += 0.5;
    std::vector<double> grad_c = constraints::grad_soft_penalty(*in.constraint, q.mean);
    for (double& g : grad_c) g *= -cfg.eta;
    if (cfg.mode != Mode::Standard) {
      const auto box = grad_box_penalty(q.mean, cfg.h_max);
      for (std::size_t j = 0; j < n_holes; ++j) grad_c[j] -= cfg.eta * box[j];
    }
    double dz = 0.0;
    for (double d : d_log_z) dz += d / cfg.k;
    grad.push_back(dz);

    double jgen = 0.0;
    for (double v : values) jgen += v / cfg.k;
    MetricsRow row;
    row.iter = iter;
    const ElboTerms e = elbo(q, *in.constraint, cfg.eta, jgen);
    row.elbo = cfg.mode == Mode::Standard ? e.total : e.total - cfg.eta * box_penalty(q.mean, cfg.h_max);
    row.entropy = e.entropy;
    row.j_c = e.j_c;
    row.j_gen = e.j_gen;
    row.j_adv = adv_mean;
    row.constraint_margin = constraints::constraint_margin(*in.constraint, q.mean);
    check_finite(row.elbo, "ELBO", iter);
    check_finite(row.j_adv, "discriminator objective", iter);
    for (double g : grad) check_finite(g, "sampler gradient", iter);
    for (double g : grad_c) check_finite(g, "constraint gradient", iter);

    std::vector<double> params(q.mean);
    params.insert(params.end(), q.log_var.begin(), q.log_var.end());
    params.push_back(q.log_z_hat);
    q_opt.ascend(params, grad);
    c_opt.ascend(std::span<double>(params).first(n_holes), grad_c);
    std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n_holes), q.mean.begin());
    std::copy(params.begin() + static_cast<std::ptrdiff_t>(n_holes),
              params.begin() + static_cast<std::ptrdiff_t>(2 * n_holes), q.log_var.begin());
    q.log_z_hat = params.back();
    q.validate();

    row.frames = res.frames;
    if ((iter + 1) % cfg.eval_every == 0)
      row.eval_success = greedy_success(policy, env, cfg.eval_episodes, cfg.eval_seed);
    res.metrics.push_back(row);
    if (progress) progress(row);
    if (cfg.target_success > 0.0 && row.eval_success && *row.eval_success >= cfg.target_success &&
        constraints::is_satisfied(*in.constraint, q.mean)) {
      res.reached_target = true;
      break;
    }
  }
  return res;
}

}  // namespace sketchreward::learn
