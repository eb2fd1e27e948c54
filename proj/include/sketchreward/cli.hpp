#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sketchreward::cli {

/// Runs `sketchreward {check|demo|train|study} ...`. Returns the exit code:
/// 0 success, 1 user or input error, 2 internal or numerical abort.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Hole values from a holes.json file ({"holes": [...]} or a bare array) or a
/// comma-separated list.
std::vector<double> parse_holes_arg(const std::string& arg);

/// Seed precedence: --seed flag, then SKETCHREWARD_SEED, then the config value.
std::uint64_t resolve_seed(std::uint64_t config_seed, std::optional<std::uint64_t> flag);

std::string version_string();

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  /// Fixed y range; derived from the data when unset.
  std::optional<double> y_min;
  std::optional<double> y_max;
};

/// Self-contained SVG line chart. Non-finite points are skipped.
std::string svg_line_plot(const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace sketchreward::cli
