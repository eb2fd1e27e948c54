#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sketchreward/cli.hpp"
#include "sketchreward/config.hpp"
#include "sketchreward/error.hpp"

using namespace sketchreward;
namespace fs = std::filesystem;

namespace {

const std::string kData = SKETCHREWARD_DATA_DIR;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sketchreward");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sketchreward_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(f, line)) ++n;
  return n;
}

struct SeedEnv {
  explicit SeedEnv(const char* v) { setenv("SKETCHREWARD_SEED", v, 1); }
  ~SeedEnv() { unsetenv("SKETCHREWARD_SEED"); }
};

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("check reports holes, tokens and predicates") {
    const auto r = run_cli({"check", "--sketch", kData + "/doorkey.rsk", "--constraint", kData + "/doorkey.rsc"});
    CHECK(r.code == 0);
    CHECK(r.out.find("5 holes, 5 predicates, OK") != std::string::npos);
    CHECK(r.out.find("holes: ?1 ?2 ?3 ?4 ?5") != std::string::npos);
    CHECK(r.out.find("pickup_key") != std::string::npos);
  }

  TEST_CASE("check exit codes for malformed and mislinked inputs") {
    const auto dir = scratch("check");
    write(dir / "bad.rsk", "fn(traj) {\n  match token {\n    reach_goal => if ?1 <=> 0 then 1 else 0,\n    _ => 0\n  }\n}\n");
    const auto bad = run_cli({"check", "--sketch", (dir / "bad.rsk").string()});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("parse error") != std::string::npos);

    write(dir / "far.rsc", "c: ?9 <= ?1\n");
    const auto far = run_cli({"check", "--sketch", kData + "/doorkey.rsk", "--constraint", (dir / "far.rsc").string()});
    CHECK(far.code == 1);
    CHECK(far.err.find("link error") != std::string::npos);

    const auto missing = run_cli({"check", "--sketch", (dir / "nope.rsk").string()});
    CHECK(missing.code == 1);
  }

  TEST_CASE("check with hole values") {
    const std::vector<std::string> base{"check", "--sketch", kData + "/doorkey.rsk", "--constraint",
                                        kData + "/doorkey.rsc", "--holes"};
    auto args = base;
    args.push_back("1,0.5,-0.6,0.3,-0.4");
    CHECK(run_cli(args).code == 0);
    args.back() = "1,0.5,-0.2,0.3,-0.4";
    const auto viol = run_cli(args);
    CHECK(viol.code == 1);
    CHECK(viol.out.find("violated: c5") != std::string::npos);
    args.back() = "1,2";
    CHECK(run_cli(args).code == 1);
  }

  TEST_CASE("hole argument parsing") {
    CHECK(cli::parse_holes_arg("1, -2.5,3e-1") == std::vector<double>{1.0, -2.5, 0.3});
    const auto dir = scratch("holes");
    write(dir / "h.json", R"({"holes": [0.5, -1.0], "log_var": [0, 0]})");
    CHECK(cli::parse_holes_arg((dir / "h.json").string()) == std::vector<double>{0.5, -1.0});
    write(dir / "a.json", "[2, 3]");
    CHECK(cli::parse_holes_arg((dir / "a.json").string()) == std::vector<double>{2.0, 3.0});
    CHECK_THROWS_AS(cli::parse_holes_arg("1,x"), InputError);
    CHECK_THROWS_AS(cli::parse_holes_arg(""), InputError);
  }

  TEST_CASE("seed precedence") {
    unsetenv("SKETCHREWARD_SEED");
    CHECK(cli::resolve_seed(4, std::nullopt) == 4);
    SeedEnv env("17");
    CHECK(cli::resolve_seed(4, std::nullopt) == 17);
    CHECK(cli::resolve_seed(4, 9) == 9);
    setenv("SKETCHREWARD_SEED", "abc", 1);
    CHECK_THROWS_AS(cli::resolve_seed(4, std::nullopt), InputError);
  }

  TEST_CASE("demo writes one line per trajectory after the header") {
    const auto dir = scratch("demo");
    for (int n : {10, 1, 0}) {
      const auto path = dir / ("d" + std::to_string(n) + ".jsonl");
      const auto r = run_cli({"demo", "--env", kData + "/doorkey6x6.env", "--n", std::to_string(n), "--out",
                              path.string()});
      CHECK(r.code == 0);
      CHECK(line_count(path) == static_cast<std::size_t>(n) + 1);
    }
    CHECK(run_cli({"demo", "--env", kData + "/doorkey6x6.env", "--n", "-1", "--out", (dir / "x").string()}).code == 1);
  }

  TEST_CASE("train artifacts, reproducibility and error paths") {
    const auto dir = scratch("train");
    const auto demos = (dir / "demos.jsonl").string();
    REQUIRE(run_cli({"demo", "--env", kData + "/doorkey6x6_fixed.env", "--out", demos}).code == 0);
    write(dir / "short.cfg", "N = 12\nm = 4\nK = 4\n");
    const auto train_args = [&](const std::string& out, const std::string& cfg) {
      return std::vector<std::string>{"train", "--config", cfg, "--sketch", kData + "/doorkey.rsk", "--constraint",
                                      kData + "/doorkey.rsc", "--demos", demos, "--env",
                                      kData + "/doorkey6x6_fixed.env", "--out", out};
    };

    const auto a = run_cli(train_args((dir / "a").string(), (dir / "short.cfg").string()));
    REQUIRE(a.code == 0);
    for (const char* f : {"program.rsk", "holes.json", "policy.json", "metrics.csv", "learning_curve.svg",
                          "manifest.json"})
      CHECK(fs::exists(dir / "a" / f));
    CHECK(line_count(dir / "a" / "metrics.csv") == 13);
    const auto manifest = nlohmann::json::parse(read_text_file((dir / "a" / "manifest.json").string()));
    CHECK(manifest["command"] == "train");
    CHECK(manifest["seed"] == 0);
    CHECK(manifest.contains("started_at"));
    CHECK(manifest["config"].get<std::string>().find("K = 4") != std::string::npos);
    const auto program = run_cli({"check", "--sketch", (dir / "a" / "program.rsk").string()});
    CHECK(program.code == 0);
    CHECK(program.out.find("0 holes") != std::string::npos);

    const auto b = run_cli(train_args((dir / "b").string(), (dir / "short.cfg").string()));
    REQUIRE(b.code == 0);
    CHECK(read_text_file((dir / "a" / "metrics.csv").string()) == read_text_file((dir / "b" / "metrics.csv").string()));

    auto seeded = train_args((dir / "c").string(), (dir / "short.cfg").string());
    seeded.insert(seeded.end(), {"--seed", "5", "--jobs", "2"});
    REQUIRE(run_cli(seeded).code == 0);
    CHECK(read_text_file((dir / "a" / "metrics.csv").string()) != read_text_file((dir / "c" / "metrics.csv").string()));
    {
      SeedEnv env("5");
      REQUIRE(run_cli(train_args((dir / "d").string(), (dir / "short.cfg").string())).code == 0);
    }
    CHECK(read_text_file((dir / "c" / "metrics.csv").string()) == read_text_file((dir / "d" / "metrics.csv").string()));

    write(dir / "zero.cfg", "N = 0\n");
    REQUIRE(run_cli(train_args((dir / "z").string(), (dir / "zero.cfg").string())).code == 0);
    CHECK(cli::parse_holes_arg((dir / "z" / "holes.json").string()) == std::vector<double>(5, 0.0));
    CHECK(line_count(dir / "z" / "metrics.csv") == 1);

    auto no_demos = train_args((dir / "e").string(), (dir / "zero.cfg").string());
    no_demos[8] = (dir / "missing.jsonl").string();
    const auto e = run_cli(no_demos);
    CHECK(e.code == 1);
    CHECK(e.err.find("missing.jsonl") != std::string::npos);

    write(dir / "bogus.cfg", "N = 1\nbogus = 2\n");
    CHECK(run_cli(train_args((dir / "f").string(), (dir / "bogus.cfg").string())).code == 1);

    write(dir / "inf.cfg", "N = 2\nm = 2\nK = 2\neta = inf\n");
    const auto blow = run_cli(train_args((dir / "g").string(), (dir / "inf.cfg").string()));
    CHECK(blow.code == 2);
    CHECK(blow.err.find("numerical") != std::string::npos);
  }

  TEST_CASE("default DoorKey training yields a constraint-satisfying program") {
    const auto dir = scratch("train_default");
    const auto demos = (dir / "demos.jsonl").string();
    REQUIRE(run_cli({"demo", "--env", kData + "/doorkey6x6_fixed.env", "--out", demos}).code == 0);
    REQUIRE(run_cli({"train", "--config", kData + "/train.cfg", "--sketch", kData + "/doorkey.rsk", "--constraint",
                     kData + "/doorkey.rsc", "--demos", demos, "--env", kData + "/doorkey6x6_fixed.env", "--out",
                     (dir / "run").string()})
                .code == 0);
    const auto check = run_cli({"check", "--sketch", kData + "/doorkey.rsk", "--constraint", kData + "/doorkey.rsc",
                                "--holes", (dir / "run" / "holes.json").string()});
    CHECK(check.code == 0);
    CHECK(check.out.find("OK") != std::string::npos);
  }

  TEST_CASE("studies write CSV, plot and manifest") {
    const auto dir = scratch("study");
    write(dir / "snis.cfg", "ms = 50, 500\nseeds = 4\n");
    const auto snis = run_cli({"study", "snis", "--env", kData + "/mdp3.json", "--sketch", kData + "/mdp3.rsk",
                               "--config", (dir / "snis.cfg").string(), "--out", dir.string()});
    REQUIRE(snis.code == 0);
    CHECK(line_count(dir / "snis.csv") == 9);
    CHECK(fs::exists(dir / "snis.svg"));
    CHECK(fs::exists(dir / "manifest.json"));

    write(dir / "t1.cfg", "gamma = 0.5\nreplications = 20\n");
    const auto t1 = run_cli({"study", "theorem1", "--env", kData + "/mdp3.json", "--sketch", kData + "/mdp3.rsk",
                             "--config", (dir / "t1.cfg").string(), "--out", dir.string()});
    REQUIRE(t1.code == 0);
    CHECK(t1.out.find("confidence 0.6") != std::string::npos);
    CHECK(line_count(dir / "theorem1.csv") == 21);

    write(dir / "s.cfg", "replications = 10\ndeltas = 0, 0.5\n");
    const auto s = run_cli({"study", "safety", "--env", kData + "/mdp3.json", "--sketch", kData + "/mdp3.rsk",
                            "--config", (dir / "s.cfg").string(), "--out", dir.string()});
    REQUIRE(s.code == 0);
    CHECK(line_count(dir / "safety_summary.csv") == 3);
    CHECK(fs::exists(dir / "safety.svg"));

    write(dir / "bad.cfg", "gamma = 0.5\n");
    CHECK(run_cli({"study", "snis", "--env", kData + "/mdp3.json", "--sketch", kData + "/mdp3.rsk", "--config",
                   (dir / "bad.cfg").string(), "--out", dir.string()})
              .code == 1);
    CHECK(run_cli({"study", "bogus", "--env", kData + "/mdp3.json", "--sketch", kData + "/mdp3.rsk"}).code == 1);
  }

  TEST_CASE("argument errors and help") {
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({"train", "--sketch", "x"}).code == 1);
    CHECK(run_cli({"frobnicate"}).code == 1);
  }

  TEST_CASE("svg line plot") {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const auto svg = cli::svg_line_plot({"t <1>", "x", "y", true, std::nullopt, std::nullopt},
                                        {{"a", {1.0, 10.0, 100.0, -1.0}, {0.5, nan, 0.1, 0.2}}, {"b & c", {}, {}}});
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("t &lt;1&gt;") != std::string::npos);
    CHECK(svg.find("b &amp; c") != std::string::npos);
    CHECK(svg.find("nan") == std::string::npos);
    std::size_t circles = 0;
    for (std::size_t p = svg.find("<circle"); p != std::string::npos; p = svg.find("<circle", p + 1)) ++circles;
    CHECK(circles == 2);
  }
}
