#include "sketchreward/tabular_mdp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <json.hpp>

#include "sketchreward/config.hpp"
#include "sketchreward/error.hpp"

namespace sketchreward::env {

double TabularMdp::cost(const Trajectory& tau) const {
  double c = 0.0;
  for (const Step& st : tau.steps) c += cost(st.state, st.action);
  return c;
}

double TabularMdp::max_cost() const {
  std::vector<double> next(n_states, 0.0);
  std::vector<double> cur(n_states, 0.0);
  for (int t = horizon - 1; t >= 0; --t) {
    for (int s = 0; s < n_states; ++s) {
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < n_actions; ++a) {
        double tail = 0.0;
        if (t + 1 < horizon) {
          tail = -std::numeric_limits<double>::infinity();
          for (int s2 = 0; s2 < n_states; ++s2)
            if (p(s, a, s2) > 0.0) tail = std::max(tail, next[s2]);
        }
        best = std::max(best, cost(s, a) + tail);
      }
      cur[s] = best;
    }
    std::swap(cur, next);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_states; ++s)
    if (init[s] > 0.0) best = std::max(best, next[s]);
  return best;
}

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw InputError("MDP needs positive state and action counts");
  if (horizon < 1) throw InputError("MDP horizon must be at least 1");
  if (!vocab) throw InputError("MDP has no vocabulary");
  const auto ns = static_cast<std::size_t>(n_states);
  const auto na = static_cast<std::size_t>(n_actions);
  if (init.size() != ns) throw InputError("MDP init has wrong length");
  if (transition.size() != ns * na * ns) throw InputError("MDP transition tensor has wrong shape");
  if (tokens.size() != ns * na) throw InputError("MDP token table has wrong shape");
  if (!step_cost.empty() && step_cost.size() != ns * na) throw InputError("MDP cost table has wrong shape");
  const auto check_row = [](const double* row, std::size_t n, const std::string& what) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(row[i] >= 0.0) || !std::isfinite(row[i])) throw InputError(what + " has an invalid probability");
      sum += row[i];
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw InputError(what + " does not sum to 1");
  };
  check_row(init.data(), ns, "MDP init");
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t a = 0; a < na; ++a)
      check_row(transition.data() + (s * na + a) * ns, ns,
                "MDP transition row (" + std::to_string(s) + ", " + std::to_string(a) + ")");
  for (Token t : tokens)
    if (t.id >= vocab->size()) throw InputError("MDP token outside vocabulary");
  for (double c : step_cost)
    if (!std::isfinite(c)) throw InputError("MDP cost is not finite");
}

TabularMdp parse_mdp_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("MDP file is not valid JSON: ") + e.what());
  }
  try {
    TabularMdp m;
    m.n_states = j.at("n_states").get<int>();
    m.n_actions = j.at("n_actions").get<int>();
    m.horizon = j.at("horizon").get<int>();
    if (j.contains("vocabulary"))
      m.vocab = std::make_shared<const Vocabulary>(j.at("vocabulary").get<std::vector<std::string>>());
    m.init = j.at("init").get<std::vector<double>>();
    for (const auto& row_s : j.at("transition"))
      for (const auto& row_a : row_s)
        for (const auto& p : row_a) m.transition.push_back(p.get<double>());
    for (const auto& row_s : j.at("tokens"))
      for (const auto& name : row_s) m.tokens.push_back(m.vocab->at(name.get<std::string>()));
    if (j.contains("step_cost"))
      for (const auto& row_s : j.at("step_cost"))
        for (const auto& c : row_s) m.step_cost.push_back(c.get<double>());
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed MDP file: ") + e.what());
  }
}

TabularMdp load_mdp(const std::string& path) { return parse_mdp_json(read_text_file(path)); }

TabularEnv::TabularEnv(TabularMdp mdp, std::string name) : mdp_(std::move(mdp)), name_(std::move(name)) {
  mdp_.validate();
}

namespace {

int sample_row(const double* row, int n, Rng& rng) {
  double u = uniform01(rng);
  int last = 0;
  for (int i = 0; i < n; ++i) {
    if (row[i] <= 0.0) continue;
    last = i;
    u -= row[i];
    if (u < 0) return i;
  }
  return last;
}

}  // namespace

int TabularEnv::reset(Rng& rng) const { return sample_row(mdp_.init.data(), mdp_.n_states, rng); }

Transition TabularEnv::step(int state, int action, Rng& rng) const {
  const double* row = mdp_.transition.data() + (static_cast<std::size_t>(state) * mdp_.n_actions + action) * mdp_.n_states;
  return {sample_row(row, mdp_.n_states, rng), mdp_.token(state, action), false};
}

Token TabularEnv::pred(std::span<const Step> prefix) const {
  if (prefix.empty()) throw ContractError("pred needs a non-empty prefix");
  return mdp_.token(prefix.back().state, prefix.back().action);
}

std::vector<EnumeratedTrajectory> enumerate_trajectories(const TabularMdp& mdp, const Policy* policy, double cap) {
  mdp.validate();
  if (std::pow(static_cast<double>(mdp.n_states) * mdp.n_actions, mdp.horizon) > cap)
    throw ContractError("trajectory space exceeds the enumeration cap");
  if (policy && policy->n_actions() != mdp.n_actions) throw ContractError("policy action count mismatch");
  std::vector<EnumeratedTrajectory> out;
  const double log_uniform = -std::log(static_cast<double>(mdp.n_actions));
  Trajectory cur;
  const std::function<void(int, double)> dfs = [&](int s, double passive) {
    for (int a = 0; a < mdp.n_actions; ++a) {
      cur.steps.push_back({s, a});
      cur.tokens.push_back(mdp.token(s, a));
      if (static_cast<int>(cur.steps.size()) == mdp.horizon) {
        EnumeratedTrajectory e;
        e.tau = cur;
        for (const Step& st : cur.steps)
          e.tau.log_pi += policy ? std::log(policy->probability(st.state, st.action)) : log_uniform;
        e.passive_prob = passive;
        e.prob = passive * std::pow(1.0 / mdp.n_actions, mdp.horizon);
        out.push_back(std::move(e));
      } else {
        for (int s2 = 0; s2 < mdp.n_states; ++s2) {
          const double p = mdp.p(s, a, s2);
          if (p > 0.0) dfs(s2, passive * p);
        }
      }
      cur.steps.pop_back();
      cur.tokens.pop_back();
    }
  };
  for (int s0 = 0; s0 < mdp.n_states; ++s0)
    if (mdp.init[s0] > 0.0) {
      cur = Trajectory{};
      dfs(s0, mdp.init[s0]);
    }
  return out;
}

}  // namespace sketchreward::env
