#include "sketchreward/cli.hpp"

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include "sketchreward/config.hpp"
#include "sketchreward/constraint.hpp"
#include "sketchreward/demos.hpp"
#include "sketchreward/error.hpp"
#include "sketchreward/estimators.hpp"
#include "sketchreward/eval.hpp"
#include "sketchreward/gridworld.hpp"
#include "sketchreward/studies.hpp"
#include "sketchreward/tabular_mdp.hpp"
#include "sketchreward/train.hpp"

#ifndef SKETCHREWARD_VERSION
#define SKETCHREWARD_VERSION "0.0.0"
#endif
#ifndef SKETCHREWARD_GIT_DESCRIBE
#define SKETCHREWARD_GIT_DESCRIBE "unknown"
#endif

namespace sketchreward::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string version_string() { return fmt::format("{}-{}", SKETCHREWARD_VERSION, SKETCHREWARD_GIT_DESCRIBE); }

std::uint64_t resolve_seed(std::uint64_t config_seed, std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SKETCHREWARD_SEED"); env && *env) {
    try {
      std::size_t used = 0;
      const unsigned long long v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw InputError(fmt::format("SKETCHREWARD_SEED is not an unsigned integer: '{}'", env));
    }
  }
  return config_seed;
}

std::vector<double> parse_holes_arg(const std::string& arg) {
  std::vector<double> out;
  if (fs::is_regular_file(arg)) {
    json j;
    try {
      j = json::parse(read_text_file(arg));
    } catch (const json::exception& e) {
      throw InputError(fmt::format("{}: {}", arg, e.what()));
    }
    const json& arr = j.is_object() ? (j.contains("holes") ? j["holes"] : j.value("mean", json())) : j;
    if (!arr.is_array()) throw InputError(fmt::format("{}: expected a hole array or an object with \"holes\"", arg));
    for (const auto& v : arr) {
      if (!v.is_number()) throw InputError(fmt::format("{}: hole values must be numbers", arg));
      out.push_back(v.get<double>());
    }
    return out;
  }
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw InputError(fmt::format("--holes: '{}' is neither a file nor a number list", arg));
    }
  }
  if (out.empty()) throw InputError("--holes: no values given");
  return out;
}

namespace {

struct LoadedEnv {
  std::unique_ptr<env::Environment> env;
  std::optional<env::TabularMdp> mdp;
};

LoadedEnv load_environment(const std::string& path) {
  LoadedEnv out;
  if (fs::path(path).extension() == ".json") {
    out.mdp = env::load_mdp(path);
    out.env = std::make_unique<env::TabularEnv>(*out.mdp, fs::path(path).stem().string());
  } else {
    out.env = std::make_unique<env::DoorKeyEnv>(env::load_grid_config(path));
  }
  return out;
}

void collect_tokens(const dsl::Expr& e, std::set<std::uint16_t>& ids) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dsl::TokenMatch>) {
          for (const auto& arm : n.arms) {
            ids.insert(arm.token.id);
            collect_tokens(*arm.body, ids);
          }
          if (n.fallback) collect_tokens(*n.fallback, ids);
        } else if constexpr (std::is_same_v<T, dsl::If>) {
          collect_tokens(*n.guard.lhs, ids);
          collect_tokens(*n.guard.rhs, ids);
          collect_tokens(*n.then_branch, ids);
          collect_tokens(*n.else_branch, ids);
        } else if constexpr (std::is_same_v<T, dsl::Arith>) {
          collect_tokens(*n.lhs, ids);
          if (n.rhs) collect_tokens(*n.rhs, ids);
        } else if constexpr (std::is_same_v<T, dsl::Count>) {
          ids.insert(n.token.id);
        }
      },
      e.node);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError(fmt::format("cannot write {}", path.string()));
  f << text;
  if (!f) throw InputError(fmt::format("failed writing {}", path.string()));
}

std::string utc_now() { return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::time(nullptr))); }

struct Manifest {
  json doc;
  fs::path dir;
  Manifest(const std::string& command, int argc, const char* const* argv, fs::path out_dir) : dir(std::move(out_dir)) {
    std::vector<std::string> args(argv, argv + argc);
    doc["command"] = command;
    doc["argv"] = args;
    doc["version"] = version_string();
    doc["started_at"] = utc_now();
    doc["artifacts"] = json::array();
  }
  void artifact(const fs::path& p, const std::string& text) {
    write_file(p, text);
    doc["artifacts"].push_back(p.filename().string());
  }
  void finish() {
    doc["finished_at"] = utc_now();
    doc["artifacts"].push_back("manifest.json");
    write_file(dir / "manifest.json", doc.dump(2) + "\n");
  }
};

KeyValueConfig load_config(const std::string& path) {
  return path.empty() ? KeyValueConfig::parse("") : KeyValueConfig::load(path);
}

struct CheckOptions {
  std::string sketch, constraint, holes;
};

int cmd_check(const CheckOptions& o, std::ostream& out) {
  const auto sk = dsl::parse_sketch(read_text_file(o.sketch));
  const auto ids = dsl::holes_of(sk);
  std::vector<std::string> hole_names;
  for (int id : ids) hole_names.push_back(fmt::format("?{}", id));
  std::set<std::uint16_t> token_ids;
  collect_tokens(sk.root(), token_ids);
  std::vector<std::string> tokens;
  for (auto id : token_ids) tokens.push_back(sk.vocabulary().name(Token{id}));
  out << fmt::format("holes: {}\n", hole_names.empty() ? "(none)" : fmt::format("{}", fmt::join(hole_names, " ")));
  out << fmt::format("tokens: {}\n", fmt::join(tokens, " "));

  std::optional<constraints::ConstraintSet> cs;
  if (!o.constraint.empty()) {
    cs = constraints::parse_constraints(read_text_file(o.constraint), sk.hole_count());
    for (const auto& p : cs->predicates) {
      std::vector<std::string> atoms;
      for (const auto& a : p.atoms) atoms.push_back(constraints::format_atom(a));
      out << fmt::format("{}: {}\n", p.label.empty() ? fmt::format("line {}", p.line) : p.label,
                         fmt::join(atoms, " && "));
    }
  }
  bool ok = true;
  if (!o.holes.empty()) {
    const auto h = parse_holes_arg(o.holes);
    if (h.size() != sk.hole_count())
      throw LinkError(fmt::format("--holes gives {} values for a sketch with {} holes", h.size(), sk.hole_count()));
    out << fmt::format("assignment: {}\n", fmt::join(h, " "));
    if (cs) {
      const auto c = cs->conjunction();
      for (const auto& p : cs->predicates) {
        constraints::ConstraintSet one{{p}, cs->hole_count};
        if (!constraints::is_satisfied(one.conjunction(), h)) {
          out << fmt::format("violated: {}\n", p.label.empty() ? fmt::format("line {}", p.line) : p.label);
          ok = false;
        }
      }
      out << fmt::format("constraint margin: {}\n", constraints::constraint_margin(c, h));
    }
  }
  out << fmt::format("{} holes, {} predicates, {}\n", sk.hole_count(), cs ? cs->predicates.size() : 0,
                     ok ? "OK" : "VIOLATED");
  return ok ? 0 : 1;
}

struct DemoOptions {
  std::string env, out;
  int n = 10;
  std::optional<std::uint64_t> seed;
};

int cmd_demo(const DemoOptions& o, std::ostream& out) {
  if (o.n < 0) throw InputError("--n must be >= 0");
  const auto cfg = env::load_grid_config(o.env);
  const env::DoorKeyEnv grid(cfg);
  const env::ScriptedExpert expert(grid);
  const auto set = env::generate_demos(grid, expert, o.n, resolve_seed(cfg.seed, o.seed), "scripted");
  env::save_demos(set, *grid.vocabulary(), o.out);
  out << fmt::format("wrote {} demonstrations to {}\n", set.trajectories.size(), o.out);
  return 0;
}

struct CommonOptions {
  std::string config, sketch, constraint, demos, env, out = "out", mode;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

json holes_json(const learn::HoleSampler& q) {
  return json{{"holes", q.mean}, {"mean", q.mean}, {"log_var", q.log_var}, {"log_z_hat", q.log_z_hat}};
}

json policy_json(const PolicyTable& p) {
  json logits = json::array();
  for (int s = 0; s < p.n_states(); ++s) {
    const auto row = p.logits(s);
    logits.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return json{{"n_states", p.n_states()}, {"n_actions", p.n_actions()}, {"eps_floor", p.eps_floor()}, {"logits", logits}};
}

int cmd_train(const CommonOptions& o, int argc, const char* const* argv, std::ostream& out) {
  auto kv = load_config(o.config);
  if (!o.mode.empty()) kv.set("mode", o.mode);
  if (o.jobs) kv.set("jobs", std::to_string(*o.jobs));
  auto cfg = learn::TrainConfig::from_config(kv);
  cfg.seed = resolve_seed(cfg.seed, o.seed);
  cfg.validate();

  const LoadedEnv loaded = load_environment(o.env);
  const auto& environment = *loaded.env;
  const auto sk = dsl::parse_sketch(read_text_file(o.sketch), environment.vocabulary());
  const auto cs = constraints::parse_constraints(read_text_file(o.constraint), sk.hole_count());
  const auto constraint = cs.conjunction();
  if (!fs::exists(o.demos)) throw InputError(fmt::format("demonstration file not found: {}", o.demos));
  const auto demos = env::load_demos(o.demos, *environment.vocabulary());

  learn::TrainInputs in{&sk, &constraint, &demos.trajectories, &environment, {}};
  if (loaded.mdp) in.cost = [mdp = &*loaded.mdp](const Trajectory& t) { return mdp->cost(t); };

  const fs::path dir(o.out);
  fs::create_directories(dir);
  Manifest manifest("train", argc, argv, dir);
  manifest.doc["seed"] = cfg.seed;
  manifest.doc["config"] = cfg.to_config_text();
  manifest.doc["inputs"] = {{"sketch", o.sketch}, {"constraint", o.constraint}, {"demos", o.demos}, {"env", o.env}};

  const auto res = learn::train(cfg, in, [&](const learn::MetricsRow& r) {
    if (r.eval_success)
      out << fmt::format("iter {:>6}  frames {:>8}  success {:.2f}  margin {:+.3g}  elbo {:.4g}\n", r.iter, r.frames,
                         *r.eval_success, r.constraint_margin, r.elbo);
  });

  const auto program = res.program(sk);
  const bool satisfied = constraints::is_satisfied(constraint, program.holes.values);
  manifest.artifact(dir / "program.rsk", dsl::print_sketch(dsl::substitute(sk, program.holes)));
  manifest.artifact(dir / "holes.json", holes_json(res.sampler).dump(2) + "\n");
  manifest.artifact(dir / "policy.json", policy_json(res.policy).dump() + "\n");
  manifest.artifact(dir / "metrics.csv", learn::format_metrics_csv(res.metrics));
  Series curve{"greedy success", {}, {}};
  for (const auto& r : res.metrics)
    if (r.eval_success) {
      curve.x.push_back(static_cast<double>(r.frames));
      curve.y.push_back(*r.eval_success);
    }
  manifest.artifact(dir / "learning_curve.svg",
                    svg_line_plot({"Learning curve", "environment frames", "greedy success rate", false, 0.0, 1.0},
                                  {curve}));
  const double final_success =
      learn::greedy_success(res.policy, environment, cfg.eval_episodes, cfg.eval_seed);
  manifest.doc["result"] = {{"iterations", res.metrics.size()},     {"frames", res.frames},
                            {"reached_target", res.reached_target}, {"final_success", final_success},
                            {"constraint_satisfied", satisfied},    {"lambda", res.lambda}};
  manifest.finish();

  out << fmt::format("holes: {}\n", fmt::join(program.holes.values, " "));
  out << fmt::format("frames {}  final greedy success {:.2f}  constraint {}\n", res.frames, final_success,
                     satisfied ? "satisfied" : "violated");
  out << fmt::format("artifacts written to {}\n", dir.string());
  return 0;
}

std::vector<std::vector<double>> parse_programs(const std::string& text) {
  std::vector<std::vector<double>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) out.push_back(parse_holes_arg(item));
  return out;
}

int cmd_study(const std::string& kind, const CommonOptions& o, int argc, const char* const* argv, std::ostream& out) {
  const auto kv = load_config(o.config);
  const std::set<std::string> common{"seed", "jobs", "holes"};
  std::set<std::string> known = common;
  if (kind == "snis") known.insert({"ms", "seeds"});
  if (kind == "theorem1") known.insert({"gamma", "target_confidence", "m", "replications"});
  if (kind == "safety")
    known.insert({"programs", "q", "m", "program_samples", "replications", "deltas", "safety.d", "safety.kappa",
                  "safety.cost_cap", "safety.alpha_conf"});
  kv.require_known(known);

  const auto mdp = env::load_mdp(o.env);
  const auto sk = dsl::parse_sketch(read_text_file(o.sketch), mdp.vocab);
  const std::uint64_t seed = resolve_seed(kv.get_uint64("seed", 0), o.seed);
  const int jobs = o.jobs.value_or(static_cast<int>(kv.get_int("jobs", 1)));
  if (jobs < 1) throw InputError("jobs must be >= 1");
  const auto as_program = [&](std::vector<double> h) -> est::TrajectoryFn {
    if (h.size() != sk.hole_count())
      throw LinkError(fmt::format("{} hole values for a sketch with {} holes", h.size(), sk.hole_count()));
    return [&sk, a = dsl::HoleAssignment(std::move(h))](const Trajectory& t) { return dsl::total_reward(sk, a, t); };
  };
  const UniformPolicy uniform(mdp.n_actions);
  const est::TrajectoryFn cost = [&mdp](const Trajectory& t) { return mdp.cost(t); };

  const fs::path dir(o.out);
  fs::create_directories(dir);
  Manifest manifest("study " + kind, argc, argv, dir);
  manifest.doc["seed"] = seed;
  manifest.doc["inputs"] = {{"sketch", o.sketch}, {"env", o.env}, {"config", o.config}};
  json cfg_doc = kv.entries();
  cfg_doc["seed"] = std::to_string(seed);
  manifest.doc["config"] = cfg_doc;

  if (kind == "snis") {
    est::SnisStudyConfig c;
    c.base_seed = seed;
    c.jobs = jobs;
    c.seeds = static_cast<int>(kv.get_int("seeds", c.seeds));
    if (kv.has("ms")) {
      c.ms.clear();
      for (double m : kv.get_doubles("ms", {})) {
        if (!(m >= 1.0)) throw InputError("ms entries must be >= 1");
        c.ms.push_back(static_cast<std::size_t>(m));
      }
    }
    const auto l = as_program(kv.get_doubles("holes", {0.8, 0.5, -0.4}));
    const auto rows = est::snis_study(mdp, l, cost, uniform, c);
    manifest.artifact(dir / "snis.csv", est::format_study_csv(rows));
    Series med{"median |error|", {}, {}};
    for (std::size_t m : c.ms) {
      med.x.push_back(static_cast<double>(m));
      med.y.push_back(est::median_abs_err(rows, m));
      out << fmt::format("m {:>7}  median abs_err {:.6g}\n", m, med.y.back());
    }
    manifest.artifact(dir / "snis.svg", svg_line_plot({"SNIS error vs batch size", "m", "median absolute error", true, std::nullopt, std::nullopt},
                                                      {med}));
  } else if (kind == "theorem1") {
    est::Theorem1StudyConfig c;
    c.base_seed = seed;
    c.jobs = jobs;
    c.gamma = kv.get_double("gamma", c.gamma);
    c.target_confidence = kv.get_double("target_confidence", c.target_confidence);
    c.m = static_cast<std::size_t>(kv.get_int("m", 0));
    c.replications = static_cast<int>(kv.get_int("replications", c.replications));
    const auto l = as_program(kv.get_doubles("holes", {0.8, 0.5, -0.4}));
    const auto r = est::theorem1_study(mdp, l, uniform, c);
    manifest.artifact(dir / "theorem1.csv", est::format_study_csv(r.rows));
    Series est_s{"estimate", {}, {}}, lo{"interval lo", {}, {}}, hi{"interval hi", {}, {}}, ex{"exact", {}, {}};
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      const double x = static_cast<double>(i);
      est_s.x.push_back(x);
      est_s.y.push_back(r.rows[i].estimate);
    }
    for (double x : {0.0, static_cast<double>(r.rows.size())}) {
      lo.x.push_back(x);
      lo.y.push_back(r.bound.lo);
      hi.x.push_back(x);
      hi.y.push_back(r.bound.hi);
      ex.x.push_back(x);
      ex.y.push_back(r.j);
    }
    manifest.artifact(dir / "theorem1.svg",
                      svg_line_plot({fmt::format("Two-batch estimates, m = {}", r.m), "replication", "estimate", false, std::nullopt, std::nullopt},
                                    {est_s, lo, hi, ex}));
    out << fmt::format("m {}  J {:.6g}  interval [{:.6g}, {:.6g}]  confidence {:.4f}  coverage {:.4f}  {}\n", r.m, r.j,
                       r.bound.lo, r.bound.hi, r.bound.confidence, r.coverage,
                       r.coverage >= r.bound.confidence ? "PASS" : "FAIL");
  } else {
    est::SafetyStudyConfig c;
    c.base_seed = seed;
    c.jobs = jobs;
    c.spec.d = kv.get_double("safety.d", 1.2);
    c.spec.kappa = kv.get_double("safety.kappa", 0.3);
    c.spec.cost_cap = kv.get_double("safety.cost_cap", mdp.max_cost());
    c.spec.alpha = kv.get_double("safety.alpha_conf", c.spec.alpha);
    for (auto& h : parse_programs(kv.get_string("programs", "0.8,0.5,-0.4; 0.3,-0.2,0.1; -1,1,0.5")))
      c.programs.push_back(as_program(std::move(h)));
    c.q = kv.get_doubles("q", {0.5, 0.3, 0.2});
    c.m = static_cast<std::size_t>(kv.get_int("m", static_cast<long long>(c.m)));
    c.program_samples = static_cast<int>(kv.get_int("program_samples", c.program_samples));
    c.replications = static_cast<int>(kv.get_int("replications", c.replications));
    c.deltas = kv.get_doubles("deltas", c.deltas);
    const auto r = est::safety_study(mdp, uniform, c);
    manifest.artifact(dir / "safety.csv", est::format_study_csv(r.rows));
    manifest.artifact(dir / "safety_summary.csv", est::format_safety_summary_csv(r));
    Series freq{"event frequency", {}, {}}, bound{"bound (clamped)", {}, {}};
    bool all = true;
    for (const auto& s : r.summary) {
      freq.x.push_back(s.delta);
      freq.y.push_back(s.frequency);
      bound.x.push_back(s.delta);
      bound.y.push_back(std::min(s.bound, 1.0));
      all = all && s.holds;
      out << fmt::format("delta {:.2f}  bound {:.4f}  frequency {:.4f}  {}\n", s.delta, s.bound, s.frequency,
                         s.bound >= 1.0 ? "vacuous" : (s.holds ? "holds" : "VIOLATED"));
    }
    out << fmt::format("exact L_c {:.4f}  bound {}\n", r.exact_lc, all ? "holds" : "violated");
    manifest.artifact(dir / "safety.svg",
                      svg_line_plot({"Safety-confidence bound check", "delta", "probability", false, 0.0, 1.0},
                                    {freq, bound}));
  }
  manifest.finish();
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reward-program learning from demonstrations with sketches and symbolic constraints", "sketchreward"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  CheckOptions check_o;
  auto* check = app.add_subcommand("check", "Parse a sketch (and constraint); optionally test a hole assignment");
  check->add_option("--sketch", check_o.sketch, "Reward sketch (.rsk)")->required();
  check->add_option("--constraint", check_o.constraint, "Symbolic constraint (.rsc)");
  check->add_option("--holes", check_o.holes, "holes.json or comma-separated hole values");

  DemoOptions demo_o;
  auto* demo = app.add_subcommand("demo", "Generate scripted expert demonstrations");
  demo->add_option("--env", demo_o.env, "Grid environment config")->required();
  demo->add_option("-n,--n", demo_o.n, "Number of demonstrations")->capture_default_str();
  demo->add_option("--out", demo_o.out, "Output demo file")->required();
  demo->add_option("--seed", demo_o.seed, "Seed");

  CommonOptions train_o;
  auto* train = app.add_subcommand("train", "Learn hole values and a policy from demonstrations");
  train->add_option("--config", train_o.config, "Key-value training config");
  train->add_option("--sketch", train_o.sketch, "Reward sketch (.rsk)")->required();
  train->add_option("--constraint", train_o.constraint, "Symbolic constraint (.rsc)")->required();
  train->add_option("--demos", train_o.demos, "Demonstration file")->required();
  train->add_option("--env", train_o.env, "Grid config or tabular MDP (.json)")->required();
  train->add_option("--out", train_o.out, "Output directory")->capture_default_str();
  train->add_option("--seed", train_o.seed, "Seed (overrides config and SKETCHREWARD_SEED)");
  train->add_option("--mode", train_o.mode, "standard, soft, hard or safety");
  train->add_option("--jobs", train_o.jobs, "Worker threads");

  CommonOptions study_o;
  std::string kind;
  auto* study = app.add_subcommand("study", "Estimator and bound studies on a tabular MDP");
  study->add_option("kind", kind, "snis, theorem1 or safety")->required()->check(CLI::IsMember({"snis", "theorem1", "safety"}));
  study->add_option("--config", study_o.config, "Key-value study config");
  study->add_option("--sketch", study_o.sketch, "Reward sketch (.rsk)")->required();
  study->add_option("--env", study_o.env, "Tabular MDP (.json)")->required();
  study->add_option("--out", study_o.out, "Output directory")->capture_default_str();
  study->add_option("--seed", study_o.seed, "Seed (overrides config and SKETCHREWARD_SEED)");
  study->add_option("--jobs", study_o.jobs, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*check) return cmd_check(check_o, out);
    if (*demo) return cmd_demo(demo_o, out);
    if (*train) return cmd_train(train_o, argc, argv, out);
    return cmd_study(kind, study_o, argc, argv, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return 1;
  } catch (const LinkError& e) {
    err << "link error: " << e.what() << "\n";
    return 1;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace sketchreward::cli
