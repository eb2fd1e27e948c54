#include "sketchreward/demos.hpp"

#include <fstream>

#include <json.hpp>

#include "sketchreward/config.hpp"
#include "sketchreward/error.hpp"

namespace sketchreward::env {

namespace {

constexpr const char* kFormat = "sketchreward-demos";

}  // namespace

void DemoSet::validate(const Vocabulary& vocab) const {
  const auto goal = vocab.find("reach_goal");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    const Trajectory& tau = trajectories[i];
    try {
      tau.validate();
    } catch (const ContractError& e) {
      throw InputError("demo " + std::to_string(i) + ": " + e.what());
    }
    for (Token t : tau.tokens)
      if (t.id >= vocab.size()) throw InputError("demo " + std::to_string(i) + ": token outside vocabulary");
    const bool at_goal = goal && tau.tokens.back() == *goal;
    const bool at_horizon = horizon > 0 && static_cast<int>(tau.size()) == horizon;
    if (!at_goal && !at_horizon)
      throw InputError("demo " + std::to_string(i) + " ends neither at the goal nor at the horizon");
  }
}

DemoSet generate_demos(const Environment& env, const Policy& expert, int n, std::uint64_t seed,
                       const std::string& expert_id) {
  if (n < 0) throw ContractError("demo count must be nonnegative");
  DemoSet set;
  set.env_id = env.id();
  set.seed = seed;
  set.expert_id = expert_id;
  set.horizon = env.horizon();
  for (int i = 0; i < n; ++i) {
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(i));
    set.trajectories.push_back(rollout(expert, env, rng));
  }
  return set;
}

std::string format_demos(const DemoSet& set, const Vocabulary& vocab) {
  nlohmann::json header = {{"format", kFormat},        {"version", kDemoFormatVersion},
                           {"env", set.env_id},        {"seed", set.seed},
                           {"expert", set.expert_id},  {"horizon", set.horizon},
                           {"count", set.trajectories.size()}};
  std::string out = header.dump() + "\n";
  for (const Trajectory& tau : set.trajectories) {
    nlohmann::json steps = nlohmann::json::array();
    for (const Step& st : tau.steps) steps.push_back({st.state, st.action});
    nlohmann::json tokens = nlohmann::json::array();
    for (Token t : tau.tokens) tokens.push_back(vocab.name(t));
    nlohmann::json line = {{"steps", steps}, {"tokens", tokens}, {"log_pi", tau.log_pi}};
    out += line.dump() + "\n";
  }
  return out;
}

DemoSet parse_demos(std::string_view text, const Vocabulary& vocab) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    const auto nl = text.find('\n', start);
    const auto line = text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.push_back(line);
    start = nl == std::string_view::npos ? text.size() : nl + 1;
  }
  if (lines.empty()) throw ParseError({1, 1}, "demo file is empty (missing header)");
  const auto parse_line = [&](std::size_t i) {
    try {
      return nlohmann::json::parse(lines[i]);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError({static_cast<int>(i) + 1, 1}, std::string("invalid JSON: ") + e.what());
    }
  };
  DemoSet set;
  std::size_t count = 0;
  try {
    const auto header = parse_line(0);
    if (header.value("format", std::string()) != kFormat) throw ParseError({1, 1}, "not a demo file header");
    const int version = header.at("version").get<int>();
    if (version != kDemoFormatVersion)
      throw InputError("demo file version " + std::to_string(version) + " is not supported (expected " +
                       std::to_string(kDemoFormatVersion) + ")");
    set.env_id = header.at("env").get<std::string>();
    set.seed = header.at("seed").get<std::uint64_t>();
    set.expert_id = header.at("expert").get<std::string>();
    set.horizon = header.at("horizon").get<int>();
    count = header.at("count").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError({1, 1}, std::string("malformed demo header: ") + e.what());
  }
  if (lines.size() - 1 != count)
    throw ParseError({static_cast<int>(lines.size()), 1},
                     "demo file is truncated: header announces " + std::to_string(count) + " trajectories, found " +
                         std::to_string(lines.size() - 1));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto j = parse_line(i);
    Trajectory tau;
    try {
      for (const auto& st : j.at("steps")) {
        if (!st.is_array() || st.size() != 2) throw ParseError({static_cast<int>(i) + 1, 1}, "step must be [s, a]");
        tau.steps.push_back({st[0].get<int>(), st[1].get<int>()});
      }
      for (const auto& t : j.at("tokens")) {
        const auto name = t.get<std::string>();
        const auto tok = vocab.find(name);
        if (!tok) throw ParseError({static_cast<int>(i) + 1, 1}, "unknown token '" + name + "'");
        tau.tokens.push_back(*tok);
      }
      tau.log_pi = j.at("log_pi").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ParseError({static_cast<int>(i) + 1, 1}, std::string("malformed trajectory: ") + e.what());
    }
    set.trajectories.push_back(std::move(tau));
  }
  set.validate(vocab);
  return set;
}

void save_demos(const DemoSet& set, const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << format_demos(set, vocab);
  if (!out) throw InputError("failed writing '" + path + "'");
}

DemoSet load_demos(const std::string& path, const Vocabulary& vocab) {
  return parse_demos(read_text_file(path), vocab);
}

}  // namespace sketchreward::env
