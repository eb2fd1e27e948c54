#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchreward/estimators.hpp"

namespace sketchreward::est {

/// One CSV row of a replication sweep. Absent fields are NaN and print empty.
struct StudyRow {
  std::string estimator;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  double estimate = 0.0;
  double exact = 0.0;
  double abs_err = 0.0;
  double interval_lo = 0.0;
  double interval_hi = 0.0;
  double confidence = 0.0;
};

std::string format_study_csv(const std::vector<StudyRow>& rows);

/// i.i.d. trajectories from `policy` on the MDP.
std::vector<Trajectory> sample_batch(const env::TabularMdp& mdp, const Policy& policy, std::size_t m, Rng& rng);

/// Median of abs_err over the rows with the given m.
double median_abs_err(const std::vector<StudyRow>& rows, std::size_t m);

struct SnisStudyConfig {
  std::vector<std::size_t> ms{100, 1000, 10000};
  int seeds = 50;
  std::uint64_t base_seed = 0;
  int jobs = 1;
};

/// SNIS estimate of J_v for every (m, seed); exact value by enumeration.
std::vector<StudyRow> snis_study(const env::TabularMdp& mdp, const TrajectoryFn& l, const TrajectoryFn& v,
                                 const Policy& policy, const SnisStudyConfig& cfg);

struct Theorem1StudyConfig {
  double gamma = 0.25;
  /// Target confidence used to choose m when m == 0.
  double target_confidence = 0.6;
  std::size_t m = 0;
  int replications = 500;
  std::uint64_t base_seed = 0;
  int jobs = 1;
};

struct Theorem1StudyResult {
  std::vector<StudyRow> rows;
  Theorem1Bound bound;
  std::size_t m = 0;
  double z = 0.0;
  double j = 0.0;
  double v_bar = 0.0;
  double l_max = 0.0;
  double ratio_floor = 0.0;
  double coverage = 0.0;
};

/// Two-batch estimates of J_c (integrand: trajectory cost, v_bar: max cost) against
/// the interval and confidence of theorem1_interval.
Theorem1StudyResult theorem1_study(const env::TabularMdp& mdp, const TrajectoryFn& l, const Policy& policy,
                                   const Theorem1StudyConfig& cfg);

struct SafetyStudyConfig {
  SafetySpec spec;
  std::vector<TrajectoryFn> programs;
  std::vector<double> q;
  std::size_t m = 50;
  int program_samples = 20;
  int replications = 500;
  std::vector<double> deltas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t base_seed = 0;
  int jobs = 1;
};

struct SafetyDeltaSummary {
  double delta = 0.0;
  double bound = 0.0;
  /// Fraction of replications with L_c <= 1 - L_hat_c + delta.
  double frequency = 0.0;
  /// True when the bound is >= 1 or the frequency does not exceed it.
  bool holds = true;
};

struct SafetyStudyResult {
  std::vector<StudyRow> rows;
  std::vector<SafetyDeltaSummary> summary;
  double exact_lc = 0.0;
  double ratio_floor = 0.0;
};

/// Replicates L_hat_c with programs drawn from q and fresh batch pairs per
/// replication; compares the event frequency with proposition1_bound.
SafetyStudyResult safety_study(const env::TabularMdp& mdp, const Policy& policy, const SafetyStudyConfig& cfg);

std::string format_safety_summary_csv(const SafetyStudyResult& r);

}  // namespace sketchreward::est
