#include "sketchreward/environment.hpp"

#include <cmath>

#include "sketchreward/error.hpp"

namespace sketchreward::env {

Trajectory rollout(const Policy& policy, const Environment& env, Rng& rng) {
  if (policy.n_actions() != env.n_actions()) throw ContractError("policy and environment disagree on action count");
  Trajectory tau;
  tau.steps.reserve(static_cast<std::size_t>(env.horizon()));
  tau.tokens.reserve(static_cast<std::size_t>(env.horizon()));
  int s = env.reset(rng);
  for (int t = 0; t < env.horizon(); ++t) {
    const int a = policy.sample(s, rng);
    tau.log_pi += std::log(policy.probability(s, a));
    const Transition tr = env.step(s, a, rng);
    tau.steps.push_back({s, a});
    tau.tokens.push_back(tr.token);
    if (tr.done) break;
    s = tr.next_state;
  }
  return tau;
}

}  // namespace sketchreward::env
