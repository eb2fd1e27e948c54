#include "sketchreward/gridworld.hpp"

#include <array>
#include <deque>
#include <vector>

#include "sketchreward/error.hpp"

namespace sketchreward::env {

namespace {

constexpr std::array<int, 4> kDx{1, 0, -1, 0};
constexpr std::array<int, 4> kDy{0, 1, 0, -1};

Cell parse_cell(const KeyValueConfig& kv, const std::string& key, Cell fallback) {
  const auto v = kv.get_doubles(key, {static_cast<double>(fallback.x), static_cast<double>(fallback.y)});
  if (v.size() != 2 || v[0] != static_cast<int>(v[0]) || v[1] != static_cast<int>(v[1]))
    throw InputError("env config: '" + key + "' must be two integers 'x, y'");
  return {static_cast<int>(v[0]), static_cast<int>(v[1])};
}

void check_bounds(const GridConfig& c) {
  const auto fail = [](const std::string& m) { throw InputError("env config: " + m); };
  if (c.width < 5 || c.height < 4) fail("grid must be at least 5x4");
  if (c.wall_x < 2 || c.wall_x > c.width - 3) fail("wall column must leave room on both sides");
  if (c.door_y < 1 || c.door_y > c.height - 2) fail("door must be inside the wall column");
  const auto left = [&](Cell p) { return p.x >= 1 && p.x < c.wall_x && p.y >= 1 && p.y <= c.height - 2; };
  const auto right = [&](Cell p) { return p.x > c.wall_x && p.x <= c.width - 2 && p.y >= 1 && p.y <= c.height - 2; };
  if (!left(c.key)) fail("key must be inside the left room");
  if (!left(c.start)) fail("start must be inside the left room");
  if (!right(c.goal)) fail("goal must be inside the right room");
  if (c.key == c.start) fail("key and start cells must differ");
  if (c.start_dir < 0 || c.start_dir > 3) fail("start_dir must be 0..3");
  if (c.horizon < 1) fail("horizon must be at least 1");
}

}  // namespace

GridConfig GridConfig::from_config(const KeyValueConfig& kv) {
  kv.require_known({"width", "height", "wall_x", "door_y", "key", "goal", "start", "start_dir", "random_start",
                    "horizon", "seed"});
  GridConfig c;
  c.width = static_cast<int>(kv.get_int("width", c.width));
  c.height = static_cast<int>(kv.get_int("height", c.height));
  c.wall_x = static_cast<int>(kv.get_int("wall_x", c.wall_x));
  c.door_y = static_cast<int>(kv.get_int("door_y", c.door_y));
  c.key = parse_cell(kv, "key", c.key);
  c.goal = parse_cell(kv, "goal", c.goal);
  c.start = parse_cell(kv, "start", c.start);
  c.start_dir = static_cast<int>(kv.get_int("start_dir", c.start_dir));
  c.random_start = kv.get_bool("random_start", c.random_start);
  c.horizon = static_cast<int>(kv.get_int("horizon", c.horizon));
  c.seed = kv.get_uint64("seed", c.seed);
  c.validate();
  return c;
}

void GridConfig::validate() const { DoorKeyEnv env(*this); }

GridConfig load_grid_config(const std::string& path) { return GridConfig::from_config(KeyValueConfig::load(path)); }

DoorKeyEnv::DoorKeyEnv(GridConfig config, std::shared_ptr<const Vocabulary> vocab)
    : config_(config), vocab_(std::move(vocab)) {
  check_bounds(config_);
  if (!vocab_) throw ContractError("environment needs a vocabulary");
  tok_other_ = vocab_->at("other");
  tok_goal_ = vocab_->at("reach_goal");
  tok_pickup_ = vocab_->at("pickup_key");
  tok_drop_ = vocab_->at("drop_key");
  tok_unlock_ = vocab_->at("unlock_door");
  tok_open_ = vocab_->at("open_door");
  tok_close_ = vocab_->at("close_door");
  const ScriptedExpert expert(*this);
  Rng unused(0);
  for (const GridState& s0 : start_states()) {
    int s = encode(s0);
    bool solved = false;
    for (int t = 0; t < config_.horizon && !solved; ++t) {
      const Transition tr = step(s, expert.plan(s), unused);
      solved = tr.done;
      s = tr.next_state;
    }
    if (!solved) throw InputError("env config: layout is not solvable within the horizon");
  }
}

std::string DoorKeyEnv::id() const {
  return "DoorKey-" + std::to_string(config_.width) + "x" + std::to_string(config_.height);
}

int DoorKeyEnv::n_states() const {
  const int cells = config_.width * config_.height;
  return cells * 4 * (cells + 1) * 3;
}

int DoorKeyEnv::encode(const GridState& s) const {
  const int cells = config_.width * config_.height;
  return ((((s.y * config_.width + s.x) * 4 + s.dir) * (cells + 1) + s.key) * 3) + static_cast<int>(s.door);
}

GridState DoorKeyEnv::decode(int state) const {
  if (state < 0 || state >= n_states()) throw ContractError("grid state index out of range");
  const int cells = config_.width * config_.height;
  GridState s;
  s.door = static_cast<DoorState>(state % 3);
  state /= 3;
  s.key = state % (cells + 1);
  state /= cells + 1;
  s.dir = state % 4;
  state /= 4;
  s.x = state % config_.width;
  s.y = state / config_.width;
  return s;
}

bool DoorKeyEnv::is_wall(int x, int y) const {
  if (x <= 0 || y <= 0 || x >= config_.width - 1 || y >= config_.height - 1) return true;
  return x == config_.wall_x && y != config_.door_y;
}

Cell DoorKeyEnv::front(const GridState& s) const { return {s.x + kDx[s.dir], s.y + kDy[s.dir]}; }

bool DoorKeyEnv::passable(int x, int y, const GridState& s) const {
  if (is_wall(x, y)) return false;
  if (s.key == y * config_.width + x) return false;
  if (x == config_.wall_x && y == config_.door_y) return s.door == DoorState::Open;
  return true;
}

std::pair<GridState, Token> DoorKeyEnv::transition(const GridState& s, int action, bool* done) const {
  GridState n = s;
  Token tok = tok_other_;
  bool finished = false;
  const Cell f = front(s);
  const bool is_door = f.x == config_.wall_x && f.y == config_.door_y;
  const int f_index = f.y * config_.width + f.x;
  switch (action) {
    case kLeft: n.dir = (s.dir + 3) % 4; break;
    case kRight: n.dir = (s.dir + 1) % 4; break;
    case kForward:
      if (f == config_.goal) {
        n.x = f.x;
        n.y = f.y;
        tok = tok_goal_;
        finished = true;
      } else if (passable(f.x, f.y, s)) {
        n.x = f.x;
        n.y = f.y;
      }
      break;
    case kPickup:
      if (s.key == f_index) {
        n.key = carried_index();
        tok = tok_pickup_;
      }
      break;
    case kDrop:
      if (s.key == carried_index() && !is_wall(f.x, f.y) && !is_door && !(f == config_.goal)) {
        n.key = f_index;
        tok = tok_drop_;
      }
      break;
    case kToggle:
      if (is_door) {
        if (s.door == DoorState::Locked) {
          if (s.key == carried_index()) {
            n.door = DoorState::Open;
            tok = tok_unlock_;
          }
        } else if (s.door == DoorState::Closed) {
          n.door = DoorState::Open;
          tok = tok_open_;
        } else {
          n.door = DoorState::Closed;
          tok = tok_close_;
        }
      }
      break;
    case kDone: break;
    default: throw ContractError("action index out of range");
  }
  if (done) *done = finished;
  return {n, tok};
}

std::vector<GridState> DoorKeyEnv::start_states() const {
  const int key_index = config_.key.y * config_.width + config_.key.x;
  if (!config_.random_start)
    return {GridState{config_.start.x, config_.start.y, config_.start_dir, key_index, DoorState::Locked}};
  std::vector<GridState> out;
  for (int y = 1; y <= config_.height - 2; ++y)
    for (int x = 1; x < config_.wall_x; ++x) {
      if (Cell{x, y} == config_.key) continue;
      for (int d = 0; d < 4; ++d) out.push_back({x, y, d, key_index, DoorState::Locked});
    }
  return out;
}

int DoorKeyEnv::reset(Rng& rng) const {
  const auto starts = start_states();
  if (starts.size() == 1) return encode(starts.front());
  std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
  return encode(starts[pick(rng)]);
}

Transition DoorKeyEnv::step(int state, int action, Rng&) const {
  bool done = false;
  const auto [next, tok] = transition(decode(state), action, &done);
  return {encode(next), tok, done};
}

Token DoorKeyEnv::pred(std::span<const Step> prefix) const {
  if (prefix.empty()) throw ContractError("pred needs a non-empty prefix");
  return transition(decode(prefix.back().state), prefix.back().action).second;
}

int ScriptedExpert::plan(int state) const {
  const GridConfig& cfg = env_.config();
  const GridState s = env_.decode(state);
  const Cell door{cfg.wall_x, cfg.door_y};
  Cell target;
  int finish;
  if (s.door == DoorState::Open) {
    target = cfg.goal;
    finish = kForward;
  } else if (s.door == DoorState::Closed || s.key == env_.carried_index()) {
    target = door;
    finish = kToggle;
  } else {
    target = {s.key % cfg.width, s.key / cfg.width};
    finish = kPickup;
  }
  const auto facing = [&](int x, int y, int d) { return Cell{x + kDx[d], y + kDy[d]} == target; };
  if (facing(s.x, s.y, s.dir)) return finish;

  const int cells = cfg.width * cfg.height;
  std::vector<int> first(static_cast<std::size_t>(cells) * 4, -1);
  std::deque<int> queue;
  const int origin = (s.y * cfg.width + s.x) * 4 + s.dir;
  first[origin] = kDone;
  queue.push_back(origin);
  while (!queue.empty()) {
    const int pose = queue.front();
    queue.pop_front();
    const int d = pose % 4;
    const int x = (pose / 4) % cfg.width;
    const int y = (pose / 4) / cfg.width;
    for (int a : {kLeft, kRight, kForward}) {
      int nx = x, ny = y, nd = d;
      if (a == kLeft) nd = (d + 3) % 4;
      else if (a == kRight) nd = (d + 1) % 4;
      else {
        nx += kDx[d];
        ny += kDy[d];
        if (Cell{nx, ny} == cfg.goal || env_.is_wall(nx, ny)) continue;
        if (s.key == ny * cfg.width + nx) continue;
        if (Cell{nx, ny} == door && s.door != DoorState::Open) continue;
      }
      const int next = (ny * cfg.width + nx) * 4 + nd;
      if (first[next] != -1) continue;
      first[next] = pose == origin ? a : first[pose];
      if (facing(nx, ny, nd)) return first[next];
      queue.push_back(next);
    }
  }
  throw InputError("scripted expert found no plan from state " + std::to_string(state));
}

}  // namespace sketchreward::env
