#pragma once

#include <memory>
#include <span>
#include <string>

#include "sketchreward/policy.hpp"
#include "sketchreward/random.hpp"
#include "sketchreward/trajectory.hpp"

namespace sketchreward::env {

struct Transition {
  int next_state = 0;
  Token token;
  bool done = false;
};

/// Episodic environment over integer states. Implementations are immutable;
/// all randomness comes from the caller's Rng.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual std::string id() const = 0;
  virtual int n_states() const = 0;
  virtual int n_actions() const = 0;
  /// Maximum number of steps per episode (T + 1).
  virtual int horizon() const = 0;
  virtual const std::shared_ptr<const Vocabulary>& vocabulary() const = 0;
  virtual int reset(Rng& rng) const = 0;
  virtual Transition step(int state, int action, Rng& rng) const = 0;
  /// Token of the last step of a non-empty prefix.
  virtual Token pred(std::span<const Step> prefix) const = 0;
};

/// Runs `policy` from a fresh reset until `done` or the horizon.
Trajectory rollout(const Policy& policy, const Environment& env, Rng& rng);

}  // namespace sketchreward::env
