#pragma once

#include <vector>

#include "sketchreward/vocabulary.hpp"

namespace sketchreward {

struct Step {
  int state = 0;
  int action = 0;
  friend bool operator==(const Step&, const Step&) = default;
};

/// A finite run of a policy: steps, one token per step, and log pi_A(tau).
struct Trajectory {
  std::vector<Step> steps;
  std::vector<Token> tokens;
  double log_pi = 0.0;

  std::size_t size() const noexcept { return steps.size(); }
  /// Throws ContractError unless non-empty, |tokens| == |steps| and log_pi finite.
  void validate() const;

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace sketchreward
