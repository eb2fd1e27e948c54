#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "sketchreward/config.hpp"
#include "sketchreward/environment.hpp"

namespace sketchreward::env {

enum Action : int { kLeft = 0, kRight = 1, kForward = 2, kPickup = 3, kDrop = 4, kToggle = 5, kDone = 6 };
inline constexpr int kNumActions = 7;

enum class DoorState : int { Locked = 0, Closed = 1, Open = 2 };

struct Cell {
  int x = 0;
  int y = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Two-room DoorKey layout: border walls, a wall column with one locked door,
/// key in the left room, goal in the right room.
struct GridConfig {
  int width = 6;
  int height = 6;
  int wall_x = 3;
  int door_y = 2;
  Cell key{1, 3};
  Cell goal{4, 4};
  Cell start{1, 1};
  /// 0 east, 1 south, 2 west, 3 north.
  int start_dir = 0;
  /// Draw the start pose uniformly over the left room each episode.
  bool random_start = false;
  int horizon = 100;
  std::uint64_t seed = 0;

  /// Bounds, distinctness, and that the scripted expert solves every start pose.
  void validate() const;
  static GridConfig from_config(const KeyValueConfig& kv);
};

GridConfig load_grid_config(const std::string& path);

struct GridState {
  int x = 0;
  int y = 0;
  int dir = 0;
  /// Cell index y * width + x of the key on the floor, or width * height when carried.
  int key = 0;
  DoorState door = DoorState::Locked;
  friend bool operator==(const GridState&, const GridState&) = default;
};

class DoorKeyEnv final : public Environment {
 public:
  explicit DoorKeyEnv(GridConfig config, std::shared_ptr<const Vocabulary> vocab = Vocabulary::standard());

  std::string id() const override;
  int n_states() const override;
  int n_actions() const override { return kNumActions; }
  int horizon() const override { return config_.horizon; }
  const std::shared_ptr<const Vocabulary>& vocabulary() const override { return vocab_; }
  int reset(Rng& rng) const override;
  Transition step(int state, int action, Rng& rng) const override;
  Token pred(std::span<const Step> prefix) const override;

  int encode(const GridState& s) const;
  GridState decode(int state) const;
  /// Deterministic successor and token.
  std::pair<GridState, Token> transition(const GridState& s, int action, bool* done = nullptr) const;

  const GridConfig& config() const noexcept { return config_; }
  bool is_wall(int x, int y) const;
  Cell front(const GridState& s) const;
  int carried_index() const noexcept { return config_.width * config_.height; }
  /// Start poses drawn by reset when random_start is set.
  std::vector<GridState> start_states() const;

 private:
  bool passable(int x, int y, const GridState& s) const;

  GridConfig config_;
  std::shared_ptr<const Vocabulary> vocab_;
  Token tok_other_, tok_goal_, tok_pickup_, tok_drop_, tok_unlock_, tok_open_, tok_close_;
};

/// Scripted shortest-path expert: fetch key, unlock door, walk to goal.
class ScriptedExpert final : public Policy {
 public:
  explicit ScriptedExpert(const DoorKeyEnv& env) : env_(env) {}
  int n_actions() const override { return kNumActions; }
  double probability(int state, int action) const override { return action == plan(state) ? 1.0 : 0.0; }
  int sample(int state, Rng&) const override { return plan(state); }
  /// Next action of a shortest plan; throws InputError when no plan exists.
  int plan(int state) const;

 private:
  const DoorKeyEnv& env_;
};

}  // namespace sketchreward::env
