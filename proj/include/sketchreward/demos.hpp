#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sketchreward/environment.hpp"

namespace sketchreward::env {

struct DemoSet {
  std::vector<Trajectory> trajectories;
  std::string env_id;
  std::uint64_t seed = 0;
  std::string expert_id;
  int horizon = 0;

  /// Every trajectory valid and ending in reach_goal or at the horizon.
  void validate(const Vocabulary& vocab) const;
  friend bool operator==(const DemoSet&, const DemoSet&) = default;
};

inline constexpr int kDemoFormatVersion = 1;

/// Collects n expert rollouts; rng streams derive from `seed`.
DemoSet generate_demos(const Environment& env, const Policy& expert, int n, std::uint64_t seed,
                       const std::string& expert_id);

/// JSON lines: a header object, then one {"steps","tokens","log_pi"} object per trajectory.
std::string format_demos(const DemoSet& set, const Vocabulary& vocab);
DemoSet parse_demos(std::string_view text, const Vocabulary& vocab);
void save_demos(const DemoSet& set, const Vocabulary& vocab, const std::string& path);
DemoSet load_demos(const std::string& path, const Vocabulary& vocab);

}  // namespace sketchreward::env
