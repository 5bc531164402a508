#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "risa/csv.hpp"
#include "risa/dataops.hpp"
#include "risa/error.hpp"
#include "risa/evfl.hpp"
#include "risa/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw risa::DataError("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// accepts either inline JSON or a path to a JSON file
json parse_json_arg(const std::string& arg) {
  std::string text = arg;
  if (!arg.empty() && arg[0] != '{') text = read_file(arg);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw risa::ConfigError(std::string("invalid JSON argument: ") + e.what());
  }
}

risa::data::SyntheticSpec parse_synthetic_spec(const json& j) {
  risa::data::SyntheticSpec spec;
  spec.n = j.value("n", spec.n);
  spec.num_classes = j.value("num_classes", spec.num_classes);
  spec.num_parties = j.value("num_parties", spec.num_parties);
  spec.separation = j.value("separation", spec.separation);
  spec.sigma = j.value("sigma", spec.sigma);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("dims")) spec.dims = j.at("dims").get<std::vector<int>>();
  if (j.contains("informative")) spec.informative = j.at("informative").get<std::vector<int>>();
  if (spec.dims.empty()) spec.dims.assign(static_cast<std::size_t>(spec.num_parties), 4);
  if (spec.informative.empty())
    spec.informative.assign(static_cast<std::size_t>(spec.num_parties), 3);
  return spec;
}

template <typename T>
std::vector<T> parse_list(const std::string& arg) {
  std::vector<T> out;
  std::stringstream ss(arg);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    if constexpr (std::is_same_v<T, double>)
      out.push_back(std::stod(item));
    else if constexpr (std::is_same_v<T, std::uint64_t>)
      out.push_back(static_cast<std::uint64_t>(std::stoull(item)));
    else
      out.push_back(item);
  }
  return out;
}

int cmd_prepare(const std::string& synthetic_arg, const std::string& input_csv,
                const std::string& label_col, const std::string& out_dir, double overlap,
                std::uint64_t seed, int parties, double test_fraction,
                const std::string& fractions_arg, bool active_unlabeled) {
  risa::data::LabeledTable table;
  if (!synthetic_arg.empty()) {
    risa::data::SyntheticSpec spec = parse_synthetic_spec(parse_json_arg(synthetic_arg));
    spec.seed = seed;
    spec.num_parties = parties;
    if (spec.dims.size() != static_cast<std::size_t>(parties))
      spec.dims.assign(static_cast<std::size_t>(parties), spec.dims.front());
    if (spec.informative.size() != static_cast<std::size_t>(parties))
      spec.informative.assign(static_cast<std::size_t>(parties), spec.informative.front());
    table = risa::data::gen_synthetic(spec);
  } else if (!input_csv.empty()) {
    const risa::io::CsvTable csv = risa::io::read_csv(input_csv);
    std::size_t label_idx = csv.header.size();
    std::vector<std::size_t> feature_cols;
    for (std::size_t c = 0; c < csv.header.size(); ++c) {
      if (csv.header[c] == label_col)
        label_idx = c;
      else
        feature_cols.push_back(c);
    }
    if (label_idx == csv.header.size())
      throw risa::DataError("label column '" + label_col + "' not found in " + input_csv);
    table.x = risa::io::to_matrix(csv, feature_cols);
    const risa::Matrix labels = risa::io::to_matrix(csv, {label_idx});
    table.y.reserve(labels.rows);
    for (std::size_t r = 0; r < labels.rows; ++r) {
      const double v = labels(r, 0);
      if (v != std::floor(v) || v < 0)
        throw risa::DataError("CSV line " + std::to_string(r + 2) +
                              ": label must be a non-negative integer");
      table.y.push_back(static_cast<int>(v));
    }
  } else {
    throw risa::ConfigError("prepare: give either --synthetic or --input");
  }

  int num_classes = 0;
  for (int y : table.y) num_classes = std::max(num_classes, y + 1);

  risa::data::SplitOptions opt;
  opt.num_parties = parties;
  opt.overlap_fraction = overlap;
  opt.test_fraction = test_fraction;
  opt.seed = seed;
  opt.active_nonoverlap_labeled = !active_unlabeled;
  opt.min_overlap = num_classes;
  if (!fractions_arg.empty())
    opt.col_ranges =
        risa::data::ranges_from_fractions(table.x.cols, parse_list<double>(fractions_arg));

  const risa::data::SplitBundle bundle = risa::data::make_bundle(table, opt);
  risa::data::save_bundle(bundle, out_dir);
  std::cout << "bundle written to " << out_dir << " (" << bundle.manifest.train_ids.size()
            << " train rows, " << bundle.manifest.overlap_ids.size() << " overlapping, "
            << bundle.manifest.test_ids.size() << " test rows)\n";
  return 0;
}

int cmd_run(const std::string& bundle_dir, const std::string& config_path,
            const std::string& method_arg, std::int64_t seed_arg, const std::string& out_dir,
            bool dump_opinions, bool trace_messages) {
  risa::evfl::VflConfig cfg = risa::evfl::load_config(config_path);
  if (!method_arg.empty()) cfg.method = risa::evfl::method_from_string(method_arg);
  if (seed_arg >= 0) cfg.seed = static_cast<std::uint64_t>(seed_arg);

  const risa::data::SplitBundle bundle = risa::data::load_bundle(bundle_dir);
  fs::create_directories(out_dir);

  std::ofstream opinions_file;
  risa::evfl::RunHooks hooks;
  if (dump_opinions) {
    opinions_file.open(fs::path(out_dir) / "opinions.jsonl");
    hooks.opinions_out = &opinions_file;
  }
  hooks.trace_messages = trace_messages;

  const risa::evfl::RunResult result =
      risa::evfl::run_method(bundle, cfg, cfg.method, &hooks);

  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';

  const std::string tag = std::string(risa::evfl::to_string(result.method)) + "_seed" +
                          std::to_string(cfg.seed);
  const fs::path metrics_path = fs::path(out_dir) / ("metrics_" + tag + ".jsonl");
  {
    std::ofstream metrics(metrics_path);
    for (const auto& m : result.epochs) metrics << risa::evfl::metrics_to_json_line(m) << '\n';
  }

  if (!result.pseudo_labels.empty()) {
    std::ofstream pl(fs::path(out_dir) / ("pseudo_labels_" + tag + ".jsonl"));
    for (const auto& p : result.pseudo_labels) {
      json j;
      j["sample_id"] = p.sample_id;
      j["class"] = p.class_id;
      j["confidence"] = p.confidence;
      pl << j.dump() << '\n';
    }
  }

  if (trace_messages) {
    std::ofstream tr(fs::path(out_dir) / ("trace_" + tag + ".jsonl"));
    for (const auto& msg : result.trace.messages) {
      json j;
      j["direction"] = risa::evfl::to_string(msg.direction);
      j["epoch"] = msg.epoch;
      j["party_id"] = msg.party_id;
      j["samples"] = msg.sample_ids.size();
      tr << j.dump() << '\n';
    }
  }

  for (const auto& [name, net] : result.models)
    risa::nn::save_checkpoint(net, (fs::path(out_dir) / (name + "_" + tag + ".net")).string());

  const fs::path report_path = fs::path(out_dir) / "report.json";
  risa::report::ExperimentReport report = risa::report::load_report(report_path.string());
  report.config_snapshot = json::parse(risa::evfl::config_to_json_text(cfg));
  risa::report::ReportRow row;
  row.method = risa::evfl::to_string(result.method);
  row.accuracy = result.final_accuracy;
  row.auc = result.final_auc;
  row.seed = cfg.seed;
  row.overlap_fraction = bundle.manifest.overlap_fraction;
  row.train_samples = result.train_samples;
  row.overlap_samples = result.overlap_samples;
  row.wall_seconds = result.wall_seconds;
  row.metrics_path = metrics_path.string();
  report.rows.push_back(row);
  risa::report::save_report(report, report_path.string());

  std::cout << "method=" << risa::evfl::to_string(result.method)
            << " accuracy=" << result.final_accuracy;
  if (result.final_auc) std::cout << " auc=" << *result.final_auc;
  std::cout << " train_samples=" << result.train_samples
            << " overlap_samples=" << result.overlap_samples << " wall_s=" << result.wall_seconds
            << '\n';
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& synthetic_arg,
              const std::string& fractions_arg, const std::string& seeds_arg,
              const std::string& methods_arg, const std::string& out_dir) {
  risa::report::SweepSpec spec;
  spec.config = risa::evfl::load_config(config_path);
  spec.synthetic = parse_synthetic_spec(parse_json_arg(synthetic_arg));
  spec.fractions = parse_list<double>(fractions_arg);
  spec.seeds = parse_list<std::uint64_t>(seeds_arg);
  for (const auto& name : parse_list<std::string>(methods_arg))
    spec.methods.push_back(risa::evfl::method_from_string(name));

  const json sweep = risa::report::run_sweep(spec);
  fs::create_directories(out_dir);
  {
    std::ofstream out(fs::path(out_dir) / "sweep.json");
    out << sweep.dump(2) << '\n';
  }
  const std::string markdown = risa::report::sweep_to_markdown(sweep);
  {
    std::ofstream out(fs::path(out_dir) / "sweep.md");
    out << markdown;
  }
  std::cout << markdown;
  return 0;
}

int cmd_report(const std::string& out_dir) {
  const fs::path sweep_path = fs::path(out_dir) / "sweep.json";
  if (fs::exists(sweep_path)) {
    std::cout << risa::report::sweep_to_markdown(
        risa::report::sweep_to_json_roundtrip(read_file(sweep_path.string())));
    return 0;
  }
  const fs::path report_path = fs::path(out_dir) / "report.json";
  if (fs::exists(report_path)) {
    std::cout << risa::report::report_to_markdown(
        risa::report::load_report(report_path.string()));
    return 0;
  }
  throw risa::DataError("no sweep.json or report.json in " + out_dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RISA: evidential vertical federated learning simulator"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "generate or split a dataset into a party bundle");
  std::string synthetic_arg, input_csv, label_col = "label", out_dir, fractions_arg;
  double overlap = 0.1, test_fraction = 0.2;
  std::int64_t seed = 1;
  int parties = 2;
  bool active_unlabeled = false;
  prepare->add_option("--synthetic", synthetic_arg, "synthetic spec (JSON text or path)");
  prepare->add_option("--input", input_csv, "input CSV with a label column");
  prepare->add_option("--label-col", label_col, "label column name (default: label)");
  prepare->add_option("--out-dir", out_dir, "bundle output directory")->required();
  prepare->add_option("--overlap", overlap, "overlapping-sample fraction");
  prepare->add_option("--seed", seed, "split seed");
  prepare->add_option("--parties", parties, "party count");
  prepare->add_option("--test-fraction", test_fraction, "held-out test fraction");
  prepare->add_option("--fractions", fractions_arg, "column fractions per party, e.g. 0.5,0.5");
  prepare->add_flag("--active-unlabeled", active_unlabeled,
                    "active party's non-overlapping rows carry no labels");

  // run
  auto* run = app.add_subcommand("run", "train one method on a prepared bundle");
  std::string bundle_dir, config_path, method_arg, run_out_dir;
  std::int64_t run_seed = -1;
  bool dump_opinions = false, trace_messages = false;
  run->add_option("--bundle", bundle_dir, "bundle directory from prepare")->required();
  run->add_option("--config", config_path, "JSON config path")->required();
  run->add_option("--method", method_arg,
                  "local|vfl|local_vfl|random_match|imp|imp_st|imp_evfl|risa");
  run->add_option("--seed", run_seed, "override the config seed");
  run->add_option("--out-dir", run_out_dir, "results directory")->required();
  run->add_flag("--dump-opinions", dump_opinions, "write per-sample opinion dumps");
  run->add_flag("--trace-messages", trace_messages, "write party message headers");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "run methods across overlap fractions and seeds");
  std::string sweep_config, sweep_synthetic, sweep_fractions = "0.01,0.1,0.5";
  std::string sweep_seeds = "1,2,3,4,5", sweep_methods = "risa,vfl", sweep_out;
  sweep->add_option("--config", sweep_config, "JSON config path")->required();
  sweep->add_option("--synthetic", sweep_synthetic, "synthetic spec (JSON text or path)")
      ->required();
  sweep->add_option("--overlap", sweep_fractions, "comma-separated overlap fractions");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep->add_option("--methods", sweep_methods, "comma-separated methods");
  sweep->add_option("--out-dir", sweep_out, "results directory")->required();

  // report
  auto* report = app.add_subcommand("report", "render the markdown table for a results directory");
  std::string report_dir;
  report->add_option("--out-dir", report_dir, "results directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (prepare->parsed())
      return cmd_prepare(synthetic_arg, input_csv, label_col, out_dir, overlap,
                         static_cast<std::uint64_t>(seed), parties, test_fraction, fractions_arg,
                         active_unlabeled);
    if (run->parsed())
      return cmd_run(bundle_dir, config_path, method_arg, run_seed, run_out_dir, dump_opinions,
                     trace_messages);
    if (sweep->parsed())
      return cmd_sweep(sweep_config, sweep_synthetic, sweep_fractions, sweep_seeds, sweep_methods,
                       sweep_out);
    if (report->parsed()) return cmd_report(report_dir);
  } catch (const risa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const risa::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const risa::DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
