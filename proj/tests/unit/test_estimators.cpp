#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "../support/mdp_oracle.hpp"
#include "sketchreward/config.hpp"
#include "sketchreward/error.hpp"
#include "sketchreward/estimators.hpp"
#include "sketchreward/eval.hpp"
#include "sketchreward/studies.hpp"

using namespace sketchreward;
using namespace sketchreward::est;

namespace {

env::TabularMdp mdp3() { return env::load_mdp(SKETCHREWARD_DATA_DIR "/mdp3.json"); }

dsl::Sketch mdp3_sketch() { return dsl::parse_sketch(read_text_file(SKETCHREWARD_DATA_DIR "/mdp3.rsk")); }

TrajectoryFn program(const dsl::Sketch& sk, dsl::HoleAssignment h) {
  return [sk, h](const Trajectory& t) { return dsl::total_reward(sk, h, t); };
}

TrajectoryFn constant(double c) {
  return [c](const Trajectory&) { return c; };
}

TrajectoryFn cost_of(const env::TabularMdp& mdp) {
  return [&mdp](const Trajectory& t) { return mdp.cost(t); };
}

TrajectoryFn reaches_goal(const env::TabularMdp& mdp) {
  const Token goal = mdp.vocab->at("reach_goal");
  return [goal](const Trajectory& t) {
    return std::find(t.tokens.begin(), t.tokens.end(), goal) != t.tokens.end() ? 1.0 : 0.0;
  };
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("exact_zl trivial programs") {
    const auto mdp = mdp3();
    CHECK(exact_zl(mdp, constant(0.0)) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(exact_zl(mdp, constant(0.7)) == doctest::Approx(std::exp(0.7)).epsilon(1e-9));
    CHECK(exact_zl(mdp, constant(-3.0)) > 0.0);
  }

  TEST_CASE("exact oracles agree with an independent enumeration order") {
    const auto mdp = mdp3();
    const auto sk = mdp3_sketch();
    const testsupport::OdometerEnumeration odo{mdp};
    struct Row {
      dsl::HoleAssignment h;
      double z, j_cost, p_goal;
    };
    const Row rows[] = {
        {{0.8, 0.5, -0.4}, 2.7236272713853307, 1.0467855825848189, 0.82926647958815503},
        {{0.3, -0.2, 0.1}, 1.2749681922584211, 0.93710885601900584, 0.67363956723751073},
        {{-1.0, 1.0, 0.5}, 1.6809280538658453, 1.498621161176888, 0.25583876216850093},
    };
    for (const auto& r : rows) {
      const auto l = program(sk, r.h);
      CHECK(odo.z(l) == doctest::Approx(r.z).epsilon(1e-12));
      CHECK(exact_zl(mdp, l) == doctest::Approx(r.z).epsilon(1e-12));
      CHECK(exact_expectation(mdp, l, cost_of(mdp)) == doctest::Approx(r.j_cost).epsilon(1e-12));
      CHECK(exact_expectation(mdp, l, reaches_goal(mdp)) == doctest::Approx(r.p_goal).epsilon(1e-12));
      CHECK(exact_expectation(mdp, l, constant(1.0)) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(exact_expectation(mdp, constant(0.0), cost_of(mdp)) ==
          doctest::Approx(odo.expectation(constant(0.0), cost_of(mdp))).epsilon(1e-12));
    CHECK(exact_expectation(mdp, constant(0.0), cost_of(mdp)) == doctest::Approx(1.01085).epsilon(1e-12));
  }

  TEST_CASE("l_max and ratio floor") {
    const auto mdp = mdp3();
    const auto sk = mdp3_sketch();
    CHECK(exact_l_max(mdp, constant(2.5)) == 2.5);
    CHECK(exact_ratio_floor(mdp, UniformPolicy(2)) == doctest::Approx(1.0).epsilon(1e-12));
    PolicyTable pt(mdp.n_states, mdp.n_actions);
    pt.logits(0)[1] = 50.0;
    pt.logits(1)[1] = 50.0;
    pt.logits(2)[1] = 50.0;
    const double eps = pt.eps_floor();
    CHECK(exact_ratio_floor(mdp, pt) == doctest::Approx(std::pow(eps * 2.0, 3)).epsilon(1e-9));
    const double lmax = exact_l_max(mdp, program(sk, {0.8, 0.5, -0.4}));
    CHECK(lmax == doctest::Approx(2.4));
  }

  TEST_CASE("snis trivial cases") {
    const auto mdp = mdp3();
    Rng rng(11);
    const auto batch = sample_batch(mdp, UniformPolicy(2), 200, rng);
    double mean = 0.0;
    for (const auto& t : batch) mean += mdp.cost(t);
    mean /= batch.size();
    CHECK(snis_expectation(batch, constant(0.0), cost_of(mdp), 2).estimate == doctest::Approx(mean).epsilon(1e-12));
    CHECK(snis_expectation(batch, constant(0.0), cost_of(mdp), 2).m == 200);
    CHECK_THROWS_AS(snis_expectation({}, constant(0.0), cost_of(mdp), 2), ContractError);
    auto bad = batch;
    bad[3].log_pi = -std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(snis_expectation(bad, constant(0.0), cost_of(mdp), 2), ContractError);
  }

  TEST_CASE("snis shift invariance and large rewards") {
    const auto mdp = mdp3();
    const auto sk = mdp3_sketch();
    Rng rng(5);
    PolicyTable pt(3, 2);
    pt.logits(0)[0] = 1.0;
    pt.logits(2)[1] = -0.5;
    const auto batch = sample_batch(mdp, pt, 500, rng);
    const auto l = program(sk, {0.8, 0.5, -0.4});
    const double base = snis_expectation(batch, l, cost_of(mdp), 2).estimate;
    for (double c : {-650.0, -3.0, 0.25, 10.0, 690.0}) {
      const TrajectoryFn shifted = [&](const Trajectory& t) { return l(t) + c; };
      CHECK(std::fabs(snis_expectation(batch, shifted, cost_of(mdp), 2).estimate - base) <= 1e-12);
    }
  }

  TEST_CASE("two-batch trivial cases and errors") {
    const auto mdp = mdp3();
    Rng rng(3);
    const auto batch = sample_batch(mdp, UniformPolicy(2), 100, rng);
    double mean = 0.0;
    for (const auto& t : batch) mean += mdp.cost(t);
    mean /= batch.size();
    const auto parts = two_batch_parts(batch, batch, constant(0.0), cost_of(mdp), 2);
    CHECK(parts.ratio == doctest::Approx(mean).epsilon(1e-12));
    CHECK(parts.denominator == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(parts.numerator == doctest::Approx(mean).epsilon(1e-12));
    const std::vector<Trajectory> shorter(batch.begin(), batch.begin() + 50);
    CHECK_THROWS_AS(two_batch_estimate(batch, shorter, constant(0.0), cost_of(mdp), 2), ContractError);
    CHECK_THROWS_AS(two_batch_estimate({}, {}, constant(0.0), cost_of(mdp), 2), ContractError);
  }

  TEST_CASE("two-batch converges to the exact expectation") {
    const auto mdp = mdp3();
    const auto l = program(mdp3_sketch(), {0.8, 0.5, -0.4});
    Rng rng(17);
    const auto bi = sample_batch(mdp, UniformPolicy(2), 50000, rng);
    const auto bj = sample_batch(mdp, UniformPolicy(2), 50000, rng);
    const auto parts = two_batch_parts(bi, bj, l, cost_of(mdp), 2);
    CHECK(parts.ratio == doctest::Approx(1.0467855825848189).epsilon(0.03));
    CHECK(parts.denominator == doctest::Approx(2.7236272713853307).epsilon(0.03));
  }

  TEST_CASE("snis error shrinks with m") {
    const auto mdp = mdp3();
    const auto l = program(mdp3_sketch(), {0.8, 0.5, -0.4});
    SnisStudyConfig cfg;
    cfg.seeds = 21;
    cfg.base_seed = 9;
    const auto rows = snis_study(mdp, l, cost_of(mdp), UniformPolicy(2), cfg);
    CHECK(rows.size() == 63);
    CHECK(median_abs_err(rows, 100) > median_abs_err(rows, 1000));
    CHECK(median_abs_err(rows, 1000) > median_abs_err(rows, 10000));
    cfg.jobs = 3;
    const auto again = snis_study(mdp, l, cost_of(mdp), UniformPolicy(2), cfg);
    CHECK(format_study_csv(rows) == format_study_csv(again));
  }

  TEST_CASE("theorem1 confidence limits and monotonicity") {
    CHECK(theorem1_confidence(0, 0.1, 3.0, 1.0, 2.0) == 0.0);
    CHECK(theorem1_confidence(100000000, 0.1, 3.0, 1.0, 2.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(theorem1_confidence(10, 0.0, 3.0, 1.0, 2.0), ContractError);
    CHECK_THROWS_AS(theorem1_confidence(10, -1.0, 3.0, 1.0, 2.0), ContractError);
    double prev = 0.0;
    for (std::size_t m = 0; m < 200000; m += 997) {
      const double c = theorem1_confidence(m, 0.05, 3.0, 0.5, 1.0);
      CHECK(c >= prev);
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
      prev = c;
    }
    const std::size_t m = theorem1_min_samples(0.6, 0.05, 3.0, 1.0, 2.4);
    CHECK(theorem1_confidence(m, 0.05, 3.0, 1.0, 2.4) >= 0.6);
    CHECK(theorem1_confidence(m - 1, 0.05, 3.0, 1.0, 2.4) < 0.6);
  }

  TEST_CASE("theorem1 interval shape") {
    Theorem1Input in;
    in.m = 1000;
    in.hoeffding_gamma = 0.1;
    in.v_bar = 2.0;
    in.z = 1.5;
    in.j = 0.7;
    const auto b = theorem1_interval(in);
    CHECK(b.lo == doctest::Approx((1.5 * 0.7 - 0.1) / (1.5 + 0.05)));
    CHECK(b.hi == doctest::Approx((1.5 * 0.7 + 0.1) / (1.5 - 0.05)));
    CHECK(b.lo <= in.j);
    CHECK(b.hi >= in.j);
    in.z = 0.04;
    CHECK(std::isinf(theorem1_interval(in).hi));
  }

  TEST_CASE("safety spec validation") {
    SafetySpec s;
    CHECK_NOTHROW(s.validate());
    s.kappa = 0.0;
    CHECK_THROWS_AS(s.validate(), ContractError);
    s.kappa = 1.0;
    CHECK_THROWS_AS(s.validate(), ContractError);
    s.kappa = 0.5;
    s.lambda = 0.1;
    CHECK_THROWS_AS(s.validate(), ContractError);
  }

  TEST_CASE("exact_safety_lc") {
    const auto mdp = mdp3();
    const auto sk = mdp3_sketch();
    const std::vector<TrajectoryFn> programs{program(sk, {0.8, 0.5, -0.4}), program(sk, {0.3, -0.2, 0.1}),
                                             program(sk, {-1.0, 1.0, 0.5})};
    SafetySpec spec;
    spec.d = 1.2;
    spec.kappa = 0.3;
    spec.cost_cap = 3.0;
    const std::vector<double> q{0.5, 0.3, 0.2};
    CHECK(exact_safety_lc(mdp, programs, q, spec) == doctest::Approx(0.8));
    spec.d = 2.0;
    CHECK(exact_safety_lc(mdp, programs, q, spec) == doctest::Approx(1.0));
    spec.d = 1.2;
    const std::vector<double> point{0.0, 0.0, 1.0};
    CHECK(exact_safety_lc(mdp, programs, point, spec) == 0.0);
    const std::vector<double> unnormalized{0.5, 0.3, 0.3};
    CHECK_THROWS_AS(exact_safety_lc(mdp, programs, unnormalized, spec), ContractError);
  }

  TEST_CASE("empirical_safety_lhat trivial cases") {
    auto mdp = mdp3();
    Rng rng(2);
    const auto bi = sample_batch(mdp, UniformPolicy(2), 40, rng);
    const auto bj = sample_batch(mdp, UniformPolicy(2), 40, rng);
    const std::vector<TrajectoryFn> programs{constant(0.0), constant(1.0), program(mdp3_sketch(), {0.8, 0.5, -0.4})};
    SafetySpec spec;
    spec.d = 1.0;
    spec.kappa = 0.5;
    CHECK(empirical_safety_lhat(bi, bj, programs, constant(0.0), spec, 2) == 0.0);
    CHECK(empirical_safety_lhat(bi, bj, programs, constant(1.5), spec, 2) == doctest::Approx(1.0));
    spec.kappa = 1.5;
    CHECK_THROWS_AS(empirical_safety_lhat(bi, bj, programs, constant(0.0), spec, 2), ContractError);
  }

  TEST_CASE("proposition1 bound") {
    SafetySpec spec;
    spec.d = 1.0;
    spec.kappa = 0.4;
    spec.cost_cap = 3.0;
    CHECK(proposition1_bound(0, spec, 1.0, 0.7, 0.0) == doctest::Approx(std::exp(-2.0 * 0.3 * 0.3)));
    CHECK(proposition1_bound(50, spec, 1.0, 1.0, 0.4) == doctest::Approx(std::exp(-2.0 * 0.16)));
    CHECK_THROWS_AS(proposition1_bound(10, spec, 1.0, 0.5, -0.1), ContractError);
    CHECK_THROWS_AS(proposition1_bound(10, spec, 1.0, 1.5, 0.1), ContractError);
    for (double lc : {0.0, 0.3, 0.9}) {
      double prev_m = 0.0;
      for (std::size_t m = 0; m < 2000; m += 37) {
        const double b = proposition1_bound(m, spec, 0.8, lc, 0.1);
        CHECK(b >= prev_m);
        CHECK(b <= 1.0);
        prev_m = b;
      }
      double prev_d = 1.0;
      for (double delta = 0.0; delta < 3.0; delta += 0.1) {
        const double b = proposition1_bound(40, spec, 0.8, lc, delta);
        CHECK(b <= prev_d);
        CHECK(b >= 0.0);
        prev_d = b;
      }
    }
  }

  TEST_CASE("study csv format") {
    std::vector<StudyRow> rows{{"snis", 100, 3, 0.5, 0.25, 0.25, std::nan(""), std::nan(""), std::nan("")}};
    CHECK(format_study_csv(rows) ==
          "estimator,m,seed,estimate,exact,abs_err,interval_lo,interval_hi,confidence\nsnis,100,3,0.5,0.25,0.25,,,\n");
  }
}
