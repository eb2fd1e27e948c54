#include "sketchreward/studies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "sketchreward/error.hpp"
#include "sketchreward/parallel.hpp"

namespace sketchreward::est {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string num(double x) {
  if (std::isnan(x)) return "";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

}  // namespace

std::string format_study_csv(const std::vector<StudyRow>& rows) {
  std::string out = "estimator,m,seed,estimate,exact,abs_err,interval_lo,interval_hi,confidence\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.estimator, r.m, r.seed, num(r.estimate), num(r.exact),
                       num(r.abs_err), num(r.interval_lo), num(r.interval_hi), num(r.confidence));
  return out;
}

std::vector<Trajectory> sample_batch(const env::TabularMdp& mdp, const Policy& policy, std::size_t m, Rng& rng) {
  const env::TabularEnv env(mdp);
  std::vector<Trajectory> batch;
  batch.reserve(m);
  for (std::size_t i = 0; i < m; ++i) batch.push_back(env::rollout(policy, env, rng));
  return batch;
}

double median_abs_err(const std::vector<StudyRow>& rows, std::size_t m) {
  std::vector<double> errs;
  for (const auto& r : rows)
    if (r.m == m) errs.push_back(r.abs_err);
  if (errs.empty()) throw ContractError(fmt::format("no rows with m = {}", m));
  std::sort(errs.begin(), errs.end());
  const std::size_t n = errs.size();
  return n % 2 ? errs[n / 2] : 0.5 * (errs[n / 2 - 1] + errs[n / 2]);
}

std::vector<StudyRow> snis_study(const env::TabularMdp& mdp, const TrajectoryFn& l, const TrajectoryFn& v,
                                 const Policy& policy, const SnisStudyConfig& cfg) {
  if (cfg.seeds < 1 || cfg.ms.empty()) throw ContractError("snis study needs seeds >= 1 and at least one m");
  const double exact = exact_expectation(mdp, l, v);
  const std::size_t per_m = static_cast<std::size_t>(cfg.seeds);
  std::vector<StudyRow> rows(cfg.ms.size() * per_m);
  parallel_for(rows.size(), cfg.jobs, [&](std::size_t i) {
    const std::size_t m = cfg.ms[i / per_m];
    const std::uint64_t seed = i % per_m;
    Rng rng = make_stream(cfg.base_seed + seed, m);
    const auto batch = sample_batch(mdp, policy, m, rng);
    const auto rep = snis_expectation(batch, l, v, mdp.n_actions);
    rows[i] = StudyRow{"snis", m, seed, rep.estimate, exact, std::fabs(rep.estimate - exact), kNaN, kNaN, kNaN};
  });
  return rows;
}

Theorem1StudyResult theorem1_study(const env::TabularMdp& mdp, const TrajectoryFn& l, const Policy& policy,
                                   const Theorem1StudyConfig& cfg) {
  if (cfg.replications < 1) throw ContractError("theorem1 study needs replications >= 1");
  Theorem1StudyResult res;
  const TrajectoryFn cost = [&](const Trajectory& t) { return mdp.cost(t); };
  res.v_bar = mdp.max_cost();
  if (!(res.v_bar > 0.0)) throw InputError("theorem1 study needs an MDP with positive step costs");
  res.z = exact_zl(mdp, l);
  res.j = exact_expectation(mdp, l, cost);
  res.l_max = exact_l_max(mdp, l);
  res.ratio_floor = exact_ratio_floor(mdp, policy);
  res.m = cfg.m ? cfg.m
                : theorem1_min_samples(cfg.target_confidence, cfg.gamma, res.v_bar, res.ratio_floor, res.l_max);
  res.bound = theorem1_interval({res.m, cfg.gamma, res.v_bar, res.ratio_floor, res.l_max, res.z, res.j});

  res.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(res.rows.size(), cfg.jobs, [&](std::size_t i) {
    Rng rng = make_stream(cfg.base_seed, i);
    const auto bi = sample_batch(mdp, policy, res.m, rng);
    const auto bj = sample_batch(mdp, policy, res.m, rng);
    const double est = two_batch_parts(bi, bj, l, cost, mdp.n_actions).ratio;
    res.rows[i] = StudyRow{"two_batch", res.m, i, est, res.j, std::fabs(est - res.j),
                           res.bound.lo, res.bound.hi, res.bound.confidence};
  });
  std::size_t covered = 0;
  for (const auto& r : res.rows)
    if (r.estimate >= r.interval_lo && r.estimate <= r.interval_hi) ++covered;
  res.coverage = static_cast<double>(covered) / static_cast<double>(res.rows.size());
  return res;
}

SafetyStudyResult safety_study(const env::TabularMdp& mdp, const Policy& policy, const SafetyStudyConfig& cfg) {
  if (cfg.replications < 1 || cfg.program_samples < 1 || cfg.m < 1)
    throw ContractError("safety study needs replications, program_samples and m >= 1");
  SafetyStudyResult res;
  res.exact_lc = exact_safety_lc(mdp, cfg.programs, cfg.q, cfg.spec);
  res.ratio_floor = exact_ratio_floor(mdp, policy);
  const TrajectoryFn cost = [&](const Trajectory& t) { return mdp.cost(t); };

  res.rows.resize(static_cast<std::size_t>(cfg.replications));
  parallel_for(res.rows.size(), cfg.jobs, [&](std::size_t i) {
    Rng rng = make_stream(cfg.base_seed, i);
    std::discrete_distribution<std::size_t> pick(cfg.q.begin(), cfg.q.end());
    std::vector<TrajectoryFn> samples;
    for (int k = 0; k < cfg.program_samples; ++k) samples.push_back(cfg.programs[pick(rng)]);
    const auto bi = sample_batch(mdp, policy, cfg.m, rng);
    const auto bj = sample_batch(mdp, policy, cfg.m, rng);
    const double lhat = empirical_safety_lhat(bi, bj, samples, cost, cfg.spec, mdp.n_actions);
    res.rows[i] = StudyRow{"lhat", cfg.m, i, lhat, res.exact_lc, std::fabs(lhat - res.exact_lc), kNaN, kNaN, kNaN};
  });

  for (double delta : cfg.deltas) {
    SafetyDeltaSummary s;
    s.delta = delta;
    s.bound = proposition1_bound(cfg.m, cfg.spec, res.ratio_floor, res.exact_lc, delta);
    std::size_t hits = 0;
    for (const auto& r : res.rows)
      if (res.exact_lc <= 1.0 - r.estimate + delta) ++hits;
    s.frequency = static_cast<double>(hits) / static_cast<double>(res.rows.size());
    s.holds = s.bound >= 1.0 || s.frequency <= s.bound;
    res.summary.push_back(s);
  }
  return res;
}

std::string format_safety_summary_csv(const SafetyStudyResult& r) {
  std::string out = "delta,bound,frequency,holds,exact_lc\n";
  for (const auto& s : r.summary)
    out += fmt::format("{},{},{},{},{}\n", num(s.delta), num(s.bound), num(s.frequency), s.holds ? 1 : 0,
                       num(r.exact_lc));
  return out;
}

}  // namespace sketchreward::est
