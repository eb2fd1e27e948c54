// Acceptance checks, one per criterion. Each run prints a single PASS/FAIL line.
#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../support/dsl_oracle.hpp"
#include "../support/mdp_oracle.hpp"
#include "sketchreward/cli.hpp"
#include "sketchreward/config.hpp"
#include "sketchreward/constraint.hpp"
#include "sketchreward/demos.hpp"
#include "sketchreward/estimators.hpp"
#include "sketchreward/eval.hpp"
#include "sketchreward/gridworld.hpp"
#include "sketchreward/learner.hpp"
#include "sketchreward/studies.hpp"
#include "sketchreward/tabular_mdp.hpp"
#include "sketchreward/train.hpp"

using namespace sketchreward;
namespace fs = std::filesystem;

namespace {

const std::string kData = SKETCHREWARD_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

env::TabularMdp mdp3() { return env::load_mdp(kData + "/mdp3.json"); }
dsl::Sketch mdp3_sketch() { return dsl::parse_sketch(read_text_file(kData + "/mdp3.rsk")); }
const dsl::HoleAssignment kMdp3Holes{0.8, 0.5, -0.4};

est::TrajectoryFn program(const dsl::Sketch& sk, const dsl::HoleAssignment& h) {
  return [sk, h](const Trajectory& t) { return dsl::total_reward(sk, h, t); };
}

est::TrajectoryFn cost_of(const env::TabularMdp& mdp) {
  return [mdp](const Trajectory& t) { return mdp.cost(t); };
}

PolicyTable skewed_policy(int n_states, int n_actions) {
  PolicyTable p(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) p.logits(s)[static_cast<std::size_t>((s + 1) % n_actions)] = 1.5;
  return p;
}

std::vector<Trajectory> rollouts(const env::Environment& env, const Policy& pi, int n, std::uint64_t seed) {
  std::vector<Trajectory> out;
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(i));
    out.push_back(env::rollout(pi, env, rng));
  }
  return out;
}

constraints::ConstraintSet doorkey_constraints() {
  return constraints::parse_constraints(read_text_file(kData + "/doorkey.rsc"), 5);
}

/// DoorKey predicates c1..c5 written directly against h.
std::array<bool, 5> doorkey_predicates(std::span<const double> v) {
  const auto h = [&](int i) { return v[static_cast<std::size_t>(i - 1)]; };
  bool c1 = true, c3 = true;
  for (int id = 1; id <= 5; ++id) c1 = c1 && h(id) <= h(1);
  for (int id = 2; id <= 5; ++id) c3 = c3 && h(id) <= h(2);
  return {c1, h(5) + h(4) <= 0, c3, h(3) <= 0, h(3) + h(2) <= 0};
}

Outcome dsl_soundness() {
  Rng rng(2024);
  const auto vocab = Vocabulary::standard();
  testsupport::SketchGenerator gen(rng, vocab);
  int length = 0, oracle = 0, residual = 0, causal = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const dsl::Sketch s = gen.sketch();
    const Trajectory tau = gen.trajectory();
    const dsl::HoleAssignment h = gen.holes(s.hole_count());
    const auto out = dsl::eval_program(s, h, tau);
    length += out.size() == tau.size();
    oracle += testsupport::bit_equal(out, testsupport::oracle_eval(s, h, tau));
    residual += testsupport::bit_equal(dsl::apply_residual(dsl::partial_eval(s, tau), h), out);
    bool prefixes = true;
    for (std::size_t cut = 1; cut <= tau.size(); ++cut) {
      Trajectory prefix;
      prefix.steps.assign(tau.steps.begin(), tau.steps.begin() + static_cast<std::ptrdiff_t>(cut));
      prefix.tokens.assign(tau.tokens.begin(), tau.tokens.begin() + static_cast<std::ptrdiff_t>(cut));
      const auto part = dsl::eval_program(s, h, prefix);
      prefixes = prefixes && testsupport::bit_equal(part, std::vector<double>(out.begin(), out.begin() + part.size()));
    }
    causal += prefixes;
  }
  return {length == n && oracle == n && residual == n && causal == n,
          fmt::format("{} triples: length {}/{}, oracle {}/{}, partial eval {}/{}, prefix causality {}/{}", n, length,
                      n, oracle, n, residual, n, causal, n)};
}

Outcome constraint_semantics() {
  using constraints::Constraint;
  Rng rng(99);
  std::uniform_real_distribution<double> u(-2, 2);
  const auto atom = [&] {
    constraints::AtomicPredicate a;
    for (int j = 0; j < 3; ++j) a.coeffs.push_back(u(rng));
    a.offset = u(rng);
    return Constraint::atom(a);
  };
  int boolean_ok = 0, range_ok = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Constraint a = atom(), b = atom(), c = atom();
    const std::vector<double> h{u(rng), u(rng), u(rng)};
    const bool sa = constraints::is_satisfied(a, h), sb = constraints::is_satisfied(b, h),
               sc = constraints::is_satisfied(c, h);
    boolean_ok += constraints::is_satisfied(Constraint::all_of({a, b}), h) == (sa && sb) &&
                  constraints::is_satisfied(Constraint::any_of({a, b}), h) == (sa || sb) &&
                  constraints::is_satisfied(Constraint::negation(a), h) == !sa &&
                  constraints::is_satisfied(Constraint::any_of({Constraint::negation(a), Constraint::all_of({b, c})}),
                                            h) == (!sa || (sb && sc));
    bool in_range = true;
    for (const Constraint& e : {a, Constraint::negation(b), Constraint::all_of({a, b, c}),
                                Constraint::any_of({Constraint::negation(a), Constraint::all_of({b, c})})}) {
      const double v = constraints::eval_constraint(e, h);
      in_range = in_range && (v == 1.0 || v == -1.0);
    }
    range_ok += in_range;
  }

  const auto set = doorkey_constraints();
  int table_ok = 0, table_n = 0;
  const auto classify = [&](const std::vector<double>& h, const std::array<bool, 5>& expect) {
    bool all = true, ok = true;
    for (std::size_t k = 0; k < 5; ++k) {
      ok = ok && constraints::is_satisfied(constraints::ConstraintSet{{set.predicates[k]}, 5}.conjunction(), h) ==
                     expect[k];
      all = all && expect[k];
    }
    ok = ok && constraints::is_satisfied(set.conjunction(), h) == all;
    table_ok += ok;
    ++table_n;
  };
  classify({1, 0.1, -0.2, 0.05, -0.05}, {true, true, true, true, true});
  classify({1, 0.5, -0.1, 0.3, -0.3}, {true, true, true, true, false});
  classify({0.2, 0.5, -0.6, 0.1, 0.3}, {false, false, true, true, true});
  classify({1, 0.2, 0.1, 0.4, 0.0}, {true, false, false, false, false});
  std::uniform_real_distribution<double> w(-1, 1);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> h(5);
    for (double& x : h) x = w(rng);
    classify(h, doorkey_predicates(h));
  }
  return {boolean_ok == n && range_ok == n && table_ok == table_n,
          fmt::format("boolean {}/{}, range {}/{}, DoorKey c1-c5 classification {}/{}", boolean_ok, n, range_ok, n,
                      table_ok, table_n)};
}

Outcome snis_consistency() {
  const auto mdp = mdp3();
  const auto sk = mdp3_sketch();
  const auto l = program(sk, kMdp3Holes);
  const auto v = cost_of(mdp);
  const double exact = testsupport::OdometerEnumeration{mdp}.expectation(l, v);
  const UniformPolicy uniform(mdp.n_actions);

  est::SnisStudyConfig big;
  big.ms = {20000};
  big.seeds = 100;
  big.jobs = 4;
  int within = 0;
  for (const auto& row : est::snis_study(mdp, l, v, uniform, big))
    within += std::fabs(row.estimate - exact) <= 0.05 * std::fabs(exact);

  est::SnisStudyConfig sweep;
  sweep.seeds = 100;
  sweep.base_seed = 1;
  sweep.jobs = 4;
  const auto rows = est::snis_study(mdp, l, v, uniform, sweep);
  const double m2 = est::median_abs_err(rows, 100), m3 = est::median_abs_err(rows, 1000),
               m4 = est::median_abs_err(rows, 10000);
  return {within >= 95 && m2 > m3 && m3 > m4,
          fmt::format("exact J {:.6f}; m=20000 within 5%: {}/100 seeds (need 95); median |err| {:.4g} > {:.4g} > {:.4g}",
                      exact, within, m2, m3, m4)};
}

Outcome unbiasedness() {
  const auto mdp = mdp3();
  const auto l = program(mdp3_sketch(), kMdp3Holes);
  const auto v = cost_of(mdp);
  const testsupport::OdometerEnumeration oracle{mdp};
  const double z = oracle.z(l), zj = z * oracle.expectation(l, v);
  const PolicyTable policy = skewed_policy(mdp.n_states, mdp.n_actions);
  const int reps = 10000;
  const std::size_t m = 20;
  double num = 0, num2 = 0, den = 0, den2 = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = make_stream(404, static_cast<std::uint64_t>(r));
    const auto bi = est::sample_batch(mdp, policy, m, rng);
    const auto bj = est::sample_batch(mdp, policy, m, rng);
    const auto parts = est::two_batch_parts(bi, bj, l, v, mdp.n_actions);
    num += parts.numerator;
    num2 += parts.numerator * parts.numerator;
    den += parts.denominator;
    den2 += parts.denominator * parts.denominator;
  }
  const auto se = [&](double s, double s2) { return std::sqrt((s2 / reps - (s / reps) * (s / reps)) / (reps - 1)); };
  const double num_se = se(num, num2), den_se = se(den, den2);
  const double num_z = (num / reps - zj) / num_se, den_z = (den / reps - z) / den_se;
  return {std::fabs(num_z) <= 3.0 && std::fabs(den_z) <= 3.0,
          fmt::format("numerator mean {:.5f} vs Z*J {:.5f} ({:+.2f} SE); denominator mean {:.5f} vs Z {:.5f} ({:+.2f} SE)",
                      num / reps, zj, num_z, den / reps, z, den_z)};
}

Outcome theorem1_coverage() {
  const auto mdp = mdp3();
  const auto l = program(mdp3_sketch(), kMdp3Holes);
  est::Theorem1StudyConfig cfg;
  cfg.jobs = 4;
  const auto r = est::theorem1_study(mdp, l, UniformPolicy(mdp.n_actions), cfg);
  return {r.bound.confidence >= 0.6 && r.coverage >= r.bound.confidence,
          fmt::format("m {}, gamma {}: confidence bound {:.4f}, coverage {:.4f} over {} replications", r.m, cfg.gamma,
                      r.bound.confidence, r.coverage, r.rows.size())};
}

Outcome proposition1_check() {
  const auto mdp = mdp3();
  const auto sk = mdp3_sketch();
  est::SafetyStudyConfig cfg;
  cfg.spec.d = 1.2;
  cfg.spec.kappa = 0.3;
  cfg.spec.cost_cap = mdp.max_cost();
  for (const dsl::HoleAssignment& h :
       {dsl::HoleAssignment{0.8, 0.5, -0.4}, dsl::HoleAssignment{0.3, -0.2, 0.1}, dsl::HoleAssignment{-1, 1, 0.5}})
    cfg.programs.push_back(program(sk, h));
  cfg.q = {0.5, 0.3, 0.2};
  cfg.jobs = 4;
  const auto r = est::safety_study(mdp, UniformPolicy(mdp.n_actions), cfg);
  std::string failed;
  int checked = 0;
  for (const auto& s : r.summary) {
    if (s.bound >= 1.0) continue;
    ++checked;
    if (!s.holds) failed += fmt::format(" d={:.1f}: {:.3f}>{:.3f}", s.delta, s.frequency, s.bound);
  }
  return {failed.empty(), fmt::format("exact L_c {:.3f}; {} deltas with bound < 1; violations:{}", r.exact_lc, checked,
                                      failed.empty() ? " none" : failed)};
}

Outcome gradient_oracles() {
  using namespace sketchreward::learn;
  const auto mdp = mdp3();
  const env::TabularEnv env(mdp);
  const dsl::Sketch two = dsl::parse_sketch("fn(traj) { match token { reach_goal => ?1, unlock_door => ?2, _ => 0 } }");
  RewardModel model(3, 2);
  Rng init(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& s : model.raw_scores()) s = normal(init);
  const UniformPolicy uniform(2);
  const PolicyTable expert = skewed_policy(3, 2);
  const auto agent = prepare_batch(two, rollouts(env, uniform, 60, 5), model, uniform);
  const auto demo = prepare_batch(two, rollouts(env, expert, 8, 6), model, uniform);

  HoleSampler q(2);
  q.mean = {0.3, -0.2};
  q.log_var = {std::log(0.25), std::log(0.5)};
  const int k = 10000;
  std::vector<std::array<double, 2>> z(k);
  Rng rng(17);
  for (auto& zi : z) zi = {normal(rng), normal(rng)};
  const auto draw = [&](const HoleSampler& s, const std::array<double, 2>& zi) {
    return std::vector<double>{s.mean[0] + std::exp(0.5 * s.log_var[0]) * zi[0],
                               s.mean[1] + std::exp(0.5 * s.log_var[1]) * zi[1]};
  };
  const auto value = [&](std::span<const double> h) { return gen_terms(agent, demo, h, 0.0, 2).value(); };
  const auto expectation = [&](const HoleSampler& s) {
    double acc = 0.0;
    for (const auto& zi : z) acc += value(draw(s, zi));
    return acc / k;
  };
  std::vector<std::vector<double>> samples;
  std::vector<double> values;
  for (const auto& zi : z) {
    samples.push_back(draw(q, zi));
    values.push_back(value(samples.back()));
  }
  const auto est = grad_q_logtrick(q, samples, values);
  double diff = 0.0, norm = 0.0;
  for (std::size_t j = 0; j < 4; ++j) {
    HoleSampler hi = q, lo = q;
    (j < 2 ? hi.mean[j] : hi.log_var[j - 2]) += 1e-4;
    (j < 2 ? lo.mean[j] : lo.log_var[j - 2]) -= 1e-4;
    const double fd = (expectation(hi) - expectation(lo)) / 2e-4;
    diff += (est[j] - fd) * (est[j] - fd);
    norm += fd * fd;
  }
  const double q_rel = std::sqrt(diff / norm);

  const std::vector<double> h{0.7, -0.4};
  std::vector<double> grad;
  j_adv(agent, demo, h, 0.3, model, &grad);
  double f_err = 0.0;
  for (std::size_t j = 0; j < grad.size(); ++j) {
    RewardModel hi = model, lo = model;
    hi.raw_scores()[j] += 1e-5;
    lo.raw_scores()[j] -= 1e-5;
    PreparedBatch ah = agent, dh = demo, al = agent, dl = demo;
    ah.refresh_f(hi);
    dh.refresh_f(hi);
    al.refresh_f(lo);
    dl.refresh_f(lo);
    const double fd = (j_adv(ah, dh, h, 0.3, hi) - j_adv(al, dl, h, 0.3, lo)) / 2e-5;
    f_err = std::max(f_err, std::fabs(grad[j] - fd));
  }

  const auto c = doorkey_constraints().conjunction();
  HoleSampler sampler(5);
  double jc_err = 0.0;
  for (const auto& mean : {std::vector<double>{0.2, 0.5, 0.3, 0.1, 0.4}, std::vector<double>{-1.0, 0.8, -0.2, 1.5, 0.3},
                           std::vector<double>{0.5, 0.4, 0.3, 0.2, 0.1}}) {
    sampler.mean = mean;
    const auto g = constraints::grad_soft_penalty(c, mean);
    for (std::size_t j = 0; j < 5; ++j) {
      HoleSampler hi = sampler, lo = sampler;
      hi.mean[j] += 1e-5;
      lo.mean[j] -= 1e-5;
      const double fd = (elbo(hi, c, 1.0, 0.0).j_c - elbo(lo, c, 1.0, 0.0).j_c) / 2e-5;
      jc_err = std::max(jc_err, std::fabs(-g[j] - fd));
    }
  }
  return {q_rel <= 0.1 && f_err <= 1e-5 && jc_err <= 1e-5,
          fmt::format("log-trick relative error {:.4f} (K={}); f-gradient max error {:.2e}; J_c-gradient max error {:.2e}",
                      q_rel, k, f_err, jc_err)};
}

Outcome closed_forms() {
  learn::HoleSampler q(3);
  q.mean = {0.4, -1.0, 2.0};
  q.log_var = {-1.2, 0.3, 0.9};
  Rng rng(5);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc -= q.log_density(q.sample(rng));
  const double entropy_rel = std::fabs(acc / n - q.entropy()) / std::fabs(q.entropy());

  double kl_err = 0.0;
  for (const auto& [f, l, sigma] : {std::array<double, 3>{0.3, -0.5, 1.0}, std::array<double, 3>{2.0, 1.5, 0.4},
                                    std::array<double, 3>{-1.0, 1.0, 2.5}}) {
    const auto logpdf = [](double x, double mu, double s) {
      return -0.5 * ((x - mu) / s) * ((x - mu) / s) - std::log(s) - 0.5 * std::log(2.0 * M_PI);
    };
    const auto integrand = [&](double x) { return std::exp(logpdf(x, f, sigma)) * (logpdf(x, f, sigma) - logpdf(x, l, sigma)); };
    const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, f - 12 * sigma, f + 12 * sigma, 15, 1e-12);
    kl_err = std::max(kl_err, std::fabs(quad - learn::step_kl(f, l, sigma)));
  }

  const auto mdp = mdp3();
  const auto l = program(mdp3_sketch(), kMdp3Holes);
  PolicyTable pt(3, 2);
  pt.logits(0)[0] = 1.0;
  pt.logits(2)[1] = -0.5;
  Rng brng(5);
  const auto batch = est::sample_batch(mdp, pt, 500, brng);
  const double base = est::snis_expectation(batch, l, cost_of(mdp), 2).estimate;
  double shift_err = 0.0;
  for (double c : {-650.0, -3.0, 0.25, 10.0, 690.0}) {
    const est::TrajectoryFn shifted = [&](const Trajectory& t) { return l(t) + c; };
    shift_err = std::max(shift_err, std::fabs(est::snis_expectation(batch, shifted, cost_of(mdp), 2).estimate - base));
  }
  return {entropy_rel <= 0.01 && kl_err <= 1e-6 && shift_err <= 1e-12,
          fmt::format("entropy MC relative error {:.2e}; KL vs quadrature {:.2e}; SNIS shift {:.2e}", entropy_rel, kl_err,
                      shift_err)};
}

Outcome doorkey_end_to_end() {
  const auto grid = env::load_grid_config(kData + "/doorkey6x6_fixed.env");
  const env::DoorKeyEnv env(grid);
  const env::ScriptedExpert expert(env);
  const auto sk = dsl::parse_sketch(read_text_file(kData + "/doorkey.rsk"));
  const auto c = doorkey_constraints().conjunction();
  const auto cfg = learn::TrainConfig::from_config(KeyValueConfig::load(kData + "/train.cfg"));
  bool pass = true;
  std::string detail;
  for (int n_demos : {10, 1}) {
    const auto demos = env::generate_demos(env, expert, n_demos, grid.seed, "scripted");
    const auto res = learn::train(cfg, {&sk, &c, &demos.trajectories, &env, {}});
    const auto& h = res.sampler.mean;
    bool ordering = h[4] + h[3] <= 0.0;
    for (double x : h) ordering = ordering && x <= h[0];
    const bool feasible = constraints::is_satisfied(c, h);
    const double success = learn::greedy_success(res.policy, env, 100, cfg.eval_seed);
    const bool ok = feasible && ordering && success >= 0.8 && res.frames <= 200000;
    pass = pass && ok;
    detail += fmt::format("{}{} demo(s): l* feasible {}, ordering {}, greedy success {:.2f} at {} frames",
                          detail.empty() ? "" : "; ", n_demos, feasible ? "yes" : "no", ordering ? "yes" : "no",
                          success, res.frames);
  }
  return {pass, detail};
}

Outcome reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "sketchreward_acceptance_repro";
  fs::remove_all(dir);
  std::ostringstream sink;
  const auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "sketchreward");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data(), sink, sink);
  };
  const std::string demos = (dir / "demos.jsonl").string();
  fs::create_directories(dir);
  if (run({"demo", "--env", kData + "/doorkey6x6_fixed.env", "--out", demos}) != 0) return {false, "demo failed"};
  std::vector<std::string> csv;
  for (const char* name : {"a", "b"}) {
    if (run({"train", "--config", kData + "/train.cfg", "--sketch", kData + "/doorkey.rsk", "--constraint",
             kData + "/doorkey.rsc", "--demos", demos, "--env", kData + "/doorkey6x6_fixed.env", "--out",
             (dir / name).string(), "--seed", "7"}) != 0)
      return {false, "train failed: " + sink.str()};
    csv.push_back(read_text_file((dir / name / "metrics.csv").string()));
  }
  return {csv[0] == csv[1] && !csv[0].empty(),
          fmt::format("two seed-7 runs: metrics.csv {} ({} bytes)", csv[0] == csv[1] ? "byte-identical" : "differ",
                      csv[0].size())};
}

struct Criterion {
  std::string name;
  std::function<Outcome()> check;
  double budget_s;
};

const std::map<int, Criterion>& criteria() {
  static const std::map<int, Criterion> all{
      {1, {"DSL soundness", dsl_soundness, 30}},
      {2, {"constraint semantics", constraint_semantics, 10}},
      {3, {"SNIS consistency", snis_consistency, 120}},
      {4, {"two-batch unbiasedness", unbiasedness, 120}},
      {5, {"interval coverage", theorem1_coverage, 120}},
      {6, {"safety tail bound", proposition1_check, 120}},
      {7, {"gradient oracles", gradient_oracles, 60}},
      {8, {"closed forms", closed_forms, 60}},
      {9, {"DoorKey end to end", doorkey_end_to_end, 600}},
      {10, {"reproducibility", reproducibility, 60}},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<int> which;
  app.add_option("--criterion", which, "criterion numbers (default: all)")->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (which.empty())
    for (const auto& [id, c] : criteria()) which.push_back(id);

  bool all = true;
  for (int id : which) {
    const auto& c = criteria().at(id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_s;
    const bool pass = o.pass && in_time;
    all = all && pass;
    std::cout << fmt::format("{} criterion {:>2} {}: {} [{:.1f}s of {:.0f}s]\n", pass ? "PASS" : "FAIL", id, c.name,
                             o.detail, secs, c.budget_s)
              << std::flush;
  }
  return all ? 0 : 1;
}
