#include "risa/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "risa/error.hpp"
#include "risa/metrics.hpp"

namespace risa::report {

using nlohmann::json;

json report_to_json(const ExperimentReport& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    json row;
    row["method"] = r.method;
    row["accuracy"] = r.accuracy;
    row["auc"] = r.auc ? json(*r.auc) : json(nullptr);
    row["seed"] = r.seed;
    row["overlap_fraction"] = r.overlap_fraction;
    row["train_samples"] = r.train_samples;
    row["overlap_samples"] = r.overlap_samples;
    row["wall_seconds"] = r.wall_seconds;
    row["metrics_path"] = r.metrics_path;
    rows.push_back(std::move(row));
  }
  return json{{"config", report.config_snapshot}, {"rows", rows}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport report;
  report.config_snapshot = j.value("config", json::object());
  for (const auto& row : j.at("rows")) {
    ReportRow r;
    r.method = row.at("method").get<std::string>();
    r.accuracy = row.at("accuracy").get<double>();
    if (!row.at("auc").is_null()) r.auc = row.at("auc").get<double>();
    r.seed = row.at("seed").get<std::uint64_t>();
    r.overlap_fraction = row.at("overlap_fraction").get<double>();
    r.train_samples = row.at("train_samples").get<int>();
    r.overlap_samples = row.at("overlap_samples").get<int>();
    r.wall_seconds = row.at("wall_seconds").get<double>();
    r.metrics_path = row.at("metrics_path").get<std::string>();
    report.rows.push_back(std::move(r));
  }
  return report;
}

ExperimentReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) return {};
  try {
    return report_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw DataError("malformed report " + path + ": " + e.what());
  }
}

void save_report(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write report: " + path);
  out << report_to_json(report).dump(2) << '\n';
}

namespace {

std::string format_pct(double value) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << value * 100.0;
  return os.str();
}

}  // namespace

std::string report_to_markdown(const ExperimentReport& report) {
  std::set<double> fractions;
  std::vector<std::string> methods;  // first-seen order
  std::map<std::pair<std::string, double>, std::vector<double>> cells;
  for (const auto& r : report.rows) {
    fractions.insert(r.overlap_fraction);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    cells[{r.method, r.overlap_fraction}].push_back(r.accuracy);
  }
  std::ostringstream os;
  os << "| Method |";
  for (double f : fractions) os << ' ' << format_pct(f) << "% |";
  os << "\n|---|";
  for (std::size_t i = 0; i < fractions.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& method : methods) {
    os << "| " << method << " |";
    for (double f : fractions) {
      auto it = cells.find({method, f});
      if (it == cells.end())
        os << " - |";
      else
        os << ' ' << format_pct(metrics::median(it->second)) << " |";
    }
    os << '\n';
  }
  return os.str();
}

json run_sweep(const SweepSpec& spec) {
  if (spec.fractions.empty() || spec.seeds.empty() || spec.methods.empty())
    throw ConfigError("sweep: need at least one fraction, seed and method");
  for (double f : spec.fractions)
    if (!(f > 0.0) || f > 1.0) throw ConfigError("sweep: fractions must be in (0, 1]");

  json cells = json::array();
  for (const auto method : spec.methods) {
    for (double fraction : spec.fractions) {
      std::vector<double> accs;
      std::vector<double> aucs;
      for (std::uint64_t seed : spec.seeds) {
        data::SyntheticSpec synthetic = spec.synthetic;
        synthetic.seed = seed;
        const data::LabeledTable table = data::gen_synthetic(synthetic);

        data::SplitOptions opt;
        opt.num_parties = spec.config.num_parties;
        opt.overlap_fraction = fraction;
        opt.seed = seed;
        opt.min_overlap = spec.config.num_classes;
        opt.active_nonoverlap_labeled = spec.config.active_nonoverlap_labeled;
        const data::SplitBundle bundle = data::make_bundle(table, opt);

        evfl::VflConfig cfg = spec.config;
        cfg.seed = seed;
        const evfl::RunResult result = evfl::run_method(bundle, cfg, method);
        accs.push_back(result.final_accuracy);
        if (result.final_auc) aucs.push_back(*result.final_auc);
      }
      json cell;
      cell["method"] = evfl::to_string(method);
      cell["fraction"] = fraction;
      cell["accuracies"] = accs;
      cell["acc_median"] = metrics::median(accs);
      cell["aucs"] = aucs;
      cell["auc_median"] = aucs.empty() ? json(nullptr) : json(metrics::median(aucs));
      cells.push_back(std::move(cell));
    }
  }

  json methods = json::array();
  for (const auto m : spec.methods) methods.push_back(evfl::to_string(m));
  json sweep;
  sweep["fractions"] = spec.fractions;
  sweep["seeds"] = spec.seeds;
  sweep["methods"] = methods;
  sweep["config"] = json::parse(evfl::config_to_json_text(spec.config));
  sweep["cells"] = cells;
  return sweep;
}

json sweep_to_json_roundtrip(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed sweep artifact: ") + e.what());
  }
}

std::string sweep_to_markdown(const json& sweep) {
  const auto fractions = sweep.at("fractions").get<std::vector<double>>();
  const auto methods = sweep.at("methods").get<std::vector<std::string>>();
  std::map<std::pair<std::string, double>, double> medians;
  for (const auto& cell : sweep.at("cells"))
    medians[{cell.at("method").get<std::string>(), cell.at("fraction").get<double>()}] =
        cell.at("acc_median").get<double>();

  std::ostringstream os;
  os << "| Method |";
  for (double f : fractions) os << ' ' << format_pct(f) << "% |";
  os << "\n|---|";
  for (std::size_t i = 0; i < fractions.size(); ++i) os << "---|";
  os << '\n';
  for (const auto& method : methods) {
    os << "| " << method << " |";
    for (double f : fractions) {
      auto it = medians.find({method, f});
      if (it == medians.end())
        os << " - |";
      else
        os << ' ' << format_pct(it->second) << " |";
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace risa::report
