#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "risa/dataops.hpp"
#include "risa/evfl.hpp"

namespace risa::report {

// One finished run; every metric is traceable to its metrics JSON-lines file.
struct ReportRow {
  std::string method;
  double accuracy = 0.0;
  std::optional<double> auc;
  std::uint64_t seed = 0;
  double overlap_fraction = 0.0;
  int train_samples = 0;
  int overlap_samples = 0;
  double wall_seconds = 0.0;
  std::string metrics_path;
};

struct ExperimentReport {
  nlohmann::json config_snapshot;
  std::vector<ReportRow> rows;
};

nlohmann::json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const nlohmann::json& j);

ExperimentReport load_report(const std::string& path);  // empty report if absent
void save_report(const ExperimentReport& report, const std::string& path);

// Markdown table: one row per method, one column per overlap fraction,
// cell = median accuracy (seed-aggregated).
std::string report_to_markdown(const ExperimentReport& report);

struct SweepSpec {
  data::SyntheticSpec synthetic;
  evfl::VflConfig config;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  std::vector<evfl::Method> methods;
};

// Runs every (method, fraction, seed) cell on freshly generated bundles and
// aggregates the per-cell metrics with the seed median.
nlohmann::json run_sweep(const SweepSpec& spec);

nlohmann::json sweep_to_json_roundtrip(const std::string& text);
std::string sweep_to_markdown(const nlohmann::json& sweep);

}  // namespace risa::report
