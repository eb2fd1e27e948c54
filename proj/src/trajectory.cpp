#include "sketchreward/trajectory.hpp"

#include <cmath>

#include "sketchreward/error.hpp"

namespace sketchreward {

void Trajectory::validate() const {
  if (steps.empty()) throw ContractError("trajectory is empty");
  if (tokens.size() != steps.size()) throw ContractError("trajectory has a token count different from its length");
  if (!std::isfinite(log_pi)) throw ContractError("trajectory log_pi is not finite");
}

}  // namespace sketchreward
