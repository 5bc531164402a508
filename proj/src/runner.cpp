#include <algorithm>
#include <chrono>
#include <numeric>
#include <unordered_map>

#include <json.hpp>

#include "risa/error.hpp"
#include "risa/evfl.hpp"
#include "risa/metrics.hpp"
#include "risa/rng.hpp"

namespace risa::evfl {

namespace {

using data::PartyDataset;
using data::SplitBundle;
using nlohmann::json;
using selftrain::PseudoLabel;

selftrain::CeTrainConfig stage1_config(const VflConfig& cfg) {
  selftrain::CeTrainConfig ce;
  ce.epochs = cfg.stage1_epochs;
  ce.lr = cfg.stage1_lr;
  ce.momentum = cfg.momentum;
  ce.batch_size = cfg.batch_size;
  ce.seed = cfg.seed;
  ce.hidden = cfg.hidden;
  ce.encoder_layers = cfg.encoder_layers;
  return ce;
}

selftrain::CeTrainConfig stage2_ce_config(const VflConfig& cfg) {
  selftrain::CeTrainConfig ce = stage1_config(cfg);
  ce.epochs = cfg.epochs;
  ce.lr = cfg.lr;
  return ce;
}

void check_bundle(const SplitBundle& bundle, const VflConfig& cfg) {
  if (bundle.num_parties() != cfg.num_parties)
    throw ConfigError("config num_parties does not match the bundle");
  if (bundle.num_classes() != cfg.num_classes)
    throw ConfigError("config num_classes does not match the bundle");
}

std::vector<int> overlap_labels(const SplitBundle& bundle) {
  const PartyDataset& active = bundle.parties.front();
  std::vector<int> labels;
  labels.reserve(active.overlap_ids.size());
  for (int id : active.overlap_ids) {
    auto it = active.labels.find(id);
    if (it == active.labels.end())
      throw DataError("overlap sample " + std::to_string(id) + " has no label");
    labels.push_back(it->second);
  }
  return labels;
}

struct ImputedPool {
  std::vector<int> ids;
  std::vector<Matrix> blocks;  // per party, aligned with ids
  std::unordered_map<int, std::size_t> row_of;
};

ImputedPool build_imputed_pool(const std::vector<PartyDataset>& parties,
                               const data::MeansSnapshot& means,
                               const std::vector<std::pair<int, int>>& owner_and_id) {
  ImputedPool pool;
  pool.blocks.reserve(parties.size());
  for (const auto& ds : parties) pool.blocks.emplace_back(owner_and_id.size(), ds.dim());
  pool.ids.reserve(owner_and_id.size());
  for (std::size_t r = 0; r < owner_and_id.size(); ++r) {
    const auto [owner, id] = owner_and_id[r];
    const data::ImputedSample sample = data::impute_mean(parties, means, owner, id);
    std::size_t offset = 0;
    for (std::size_t m = 0; m < parties.size(); ++m) {
      for (std::size_t c = 0; c < parties[m].dim(); ++c)
        pool.blocks[m](r, c) = sample.x[offset + c];
      offset += parties[m].dim();
    }
    pool.ids.push_back(id);
    pool.row_of[id] = r;
  }
  return pool;
}

void append_rows(TrainingSet& set, const std::vector<Matrix>& blocks,
                 const std::vector<int>& ids, const std::vector<int>& labels, bool filterable) {
  for (std::size_t m = 0; m < blocks.size(); ++m) {
    Matrix& dst = set.party_blocks[m];
    Matrix merged(dst.rows + blocks[m].rows, blocks[m].cols);
    std::copy(dst.data.begin(), dst.data.end(), merged.data.begin());
    std::copy(blocks[m].data.begin(), blocks[m].data.end(),
              merged.data.begin() + static_cast<std::ptrdiff_t>(dst.data.size()));
    dst = std::move(merged);
  }
  set.ids.insert(set.ids.end(), ids.begin(), ids.end());
  set.labels.insert(set.labels.end(), labels.begin(), labels.end());
  set.filterable.insert(set.filterable.end(), ids.size(), filterable);
}

TrainingSet empty_set(const std::vector<PartyDataset>& parties) {
  TrainingSet set;
  set.party_blocks.reserve(parties.size());
  for (const auto& ds : parties) set.party_blocks.emplace_back(0, ds.dim());
  return set;
}

std::pair<double, std::optional<double>> evaluate_ce(const selftrain::VerticalCeModel& model,
                                                     const std::vector<Matrix>& blocks,
                                                     const std::vector<int>& labels) {
  std::vector<int> predicted;
  Vector scores;
  predicted.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::vector<Vector> row_blocks;
    row_blocks.reserve(blocks.size());
    for (const auto& block : blocks) row_blocks.push_back(block.row(r));
    const Vector p = model.probabilities(row_blocks);
    predicted.push_back(static_cast<int>(argmax(p)));
    if (p.size() == 2) scores.push_back(p[1]);
  }
  const double acc = metrics::accuracy(predicted, labels);
  std::optional<double> auc;
  if (!scores.empty()) {
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (has_pos && has_neg) auc = metrics::compute_auc(scores, labels);
  }
  return {acc, auc};
}

// Plain supervised stage 2 (softmax head over concatenated features).
void run_ce_stage(RunResult& result, const TrainingSet& set, const VflConfig& cfg,
                  const std::vector<Matrix>& test_blocks, const std::vector<int>& test_labels) {
  selftrain::CeTrainer trainer(set.party_blocks, set.labels, static_cast<std::size_t>(cfg.num_classes),
                               stage2_ce_config(cfg));
  for (int t = 1; t <= cfg.epochs; ++t) {
    const double loss = trainer.train_epoch();
    const auto [acc, auc] = evaluate_ce(trainer.model(), test_blocks, test_labels);
    EpochMetrics m;
    m.epoch = t;
    m.train_loss = loss;
    m.test_acc = acc;
    m.test_auc = auc;
    m.active_samples = static_cast<int>(set.ids.size());
    result.epochs.push_back(m);
    result.final_accuracy = acc;
    result.final_auc = auc;
  }
  for (const auto& w : trainer.log().warnings) result.warnings.push_back(w);
  for (std::size_t m = 0; m < trainer.model().num_parties(); ++m)
    result.models.emplace_back("encoder_" + std::to_string(m + 1),
                               trainer.model().encoders()[m]);
  result.models.emplace_back("head", trainer.model().head());
}

void dump_opinions(const EvflTrainer& trainer, const SplitBundle& bundle, std::ostream& out) {
  const auto k = static_cast<std::size_t>(bundle.num_classes());
  const auto& nets = trainer.party_nets();
  for (std::size_t r = 0; r < bundle.test_labels.size(); ++r) {
    std::vector<evidence::Opinion> opinions;
    opinions.reserve(nets.size());
    for (std::size_t m = 0; m < nets.size(); ++m)
      opinions.push_back(
          evidence::evidence_to_opinion(nets[m].evaluate(bundle.test_blocks[m].row(r)), k).second);
    const evidence::Opinion fused = evidence::fuse_all(opinions).fused;
    const evidence::DirichletParams params = evidence::opinion_to_dirichlet(fused);
    json j;
    j["sample_id"] = bundle.manifest.test_ids[r];
    json parties = json::array();
    for (const auto& op : opinions) parties.push_back({{"b", op.b}, {"u", op.u}});
    j["party_opinions"] = parties;
    j["fused"] = {{"b", fused.b}, {"u", fused.u}};
    j["alpha"] = params.alpha;
    j["prediction"] = argmax(evidence::predict(params).first);
    out << j.dump() << '\n';
  }
}

// Evidential stage 2 with scheduled uncertainty filtering.
void run_evfl_stage(RunResult& result, TrainingSet set, const VflConfig& cfg,
                    const SplitBundle& bundle, const RunHooks* hooks) {
  EvflTrainer trainer(std::move(set), cfg);
  if (hooks && hooks->trace_messages) trainer.enable_trace(hooks->keep_payloads);
  for (int t = 1; t <= cfg.epochs; ++t) {
    const double loss = trainer.train_epoch();
    const int removed = trainer.apply_scheduled_filter();
    const auto [acc, auc] = trainer.evaluate(bundle.test_blocks, bundle.test_labels);
    EpochMetrics m;
    m.epoch = t;
    m.train_loss = loss;
    m.test_acc = acc;
    m.test_auc = auc;
    m.active_samples = static_cast<int>(trainer.state().active_count());
    m.tau_t = uncertainty_threshold(t, cfg.epochs, cfg.tau0);
    m.filtered_count = removed;
    result.epochs.push_back(m);
    result.final_accuracy = acc;
    result.final_auc = auc;
  }
  result.filtered_ids = trainer.state().removed_ids;
  for (std::size_t m = 0; m < trainer.party_nets().size(); ++m)
    result.models.emplace_back("party_" + std::to_string(m + 1), trainer.party_nets()[m]);
  if (hooks && hooks->opinions_out) dump_opinions(trainer, bundle, *hooks->opinions_out);
  if (hooks && hooks->trace_messages) result.trace = trainer.take_trace();
}

}  // namespace

RunResult run_risa(const SplitBundle& bundle, const VflConfig& cfg, const RunHooks* hooks) {
  if (is_baseline(cfg.method))
    throw ContractViolation("run_risa: baseline method routed to the wrong runner");
  check_bundle(bundle, cfg);
  const auto start_time = std::chrono::steady_clock::now();

  const bool use_st = cfg.method == Method::imp_st || cfg.method == Method::risa;
  const bool use_evfl = cfg.method == Method::imp_evfl || cfg.method == Method::risa;

  RunResult result;
  result.method = cfg.method;

  const auto& parties = bundle.parties;
  const PartyDataset& active = parties.front();
  const std::vector<int>& overlap_ids = active.overlap_ids;
  result.overlap_samples = static_cast<int>(overlap_ids.size());

  TrainingSet set = empty_set(parties);
  append_rows(set, data::gather_blocks(parties, overlap_ids), overlap_ids,
              overlap_labels(bundle), false);

  // imputed rows: the active party's own rows keep their labels when
  // available; everything unlabeled goes to the pseudo-label pool
  std::vector<std::pair<int, int>> labeled_rows;
  std::vector<std::pair<int, int>> pool_rows;
  for (std::size_t m = 0; m < parties.size(); ++m) {
    for (int id : parties[m].nonoverlap_ids) {
      const int owner = parties[m].party_id;
      if (owner == 1 && active.labels.count(id))
        labeled_rows.emplace_back(owner, id);
      else
        pool_rows.emplace_back(owner, id);
    }
  }

  if (!labeled_rows.empty() || !pool_rows.empty()) {
    const data::MeansSnapshot means = data::compute_means(parties);

    if (!labeled_rows.empty()) {
      ImputedPool pool = build_imputed_pool(parties, means, labeled_rows);
      std::vector<int> labels;
      labels.reserve(pool.ids.size());
      for (int id : pool.ids) labels.push_back(active.labels.at(id));
      append_rows(set, pool.blocks, pool.ids, labels, true);
      result.imputed_train_ids.insert(result.imputed_train_ids.end(), pool.ids.begin(),
                                      pool.ids.end());
    }

    if (use_st && !pool_rows.empty()) {
      selftrain::TrainLog log;
      const selftrain::VerticalCeModel fst =
          selftrain::train_fst(data::gather_blocks(parties, overlap_ids), overlap_labels(bundle),
                               static_cast<std::size_t>(cfg.num_classes), stage1_config(cfg), &log);
      for (const auto& w : log.warnings) result.warnings.push_back(w);

      ImputedPool pool = build_imputed_pool(parties, means, pool_rows);
      std::vector<PseudoLabel> pseudo =
          selftrain::assign_pseudo_labels(fst, pool.blocks, pool.ids, cfg.tau_p);
      if (hooks && hooks->mutate_pseudo_labels) hooks->mutate_pseudo_labels(pseudo);
      result.pseudo_labels = pseudo;

      if (!pseudo.empty()) {
        std::vector<Matrix> blocks;
        blocks.reserve(parties.size());
        for (const auto& ds : parties) blocks.emplace_back(pseudo.size(), ds.dim());
        std::vector<int> ids, labels;
        for (std::size_t r = 0; r < pseudo.size(); ++r) {
          const std::size_t src = pool.row_of.at(pseudo[r].sample_id);
          for (std::size_t m = 0; m < parties.size(); ++m)
            blocks[m].set_row(r, pool.blocks[m].row(src));
          ids.push_back(pseudo[r].sample_id);
          labels.push_back(pseudo[r].class_id);
        }
        append_rows(set, blocks, ids, labels, true);
        result.imputed_train_ids.insert(result.imputed_train_ids.end(), ids.begin(), ids.end());
      }
    }
  }

  result.train_samples = static_cast<int>(set.ids.size());
  result.train_ids = set.ids;
  if (use_evfl)
    run_evfl_stage(result, std::move(set), cfg, bundle, hooks);
  else
    run_ce_stage(result, set, cfg, bundle.test_blocks, bundle.test_labels);

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

RunResult run_baseline(const SplitBundle& bundle, const VflConfig& cfg, Method mode) {
  if (!is_baseline(mode))
    throw ConfigError("run_baseline: unknown baseline mode: " + std::string(to_string(mode)));
  check_bundle(bundle, cfg);
  const auto start_time = std::chrono::steady_clock::now();

  RunResult result;
  result.method = mode;
  const auto& parties = bundle.parties;
  const PartyDataset& active = parties.front();
  result.overlap_samples = static_cast<int>(active.overlap_ids.size());

  if (mode == Method::local) {
    // party 1 features only, over every row party 1 holds a label for
    std::vector<int> ids;
    for (int id : active.sample_ids)
      if (active.labels.count(id)) ids.push_back(id);
    std::vector<int> labels;
    labels.reserve(ids.size());
    for (int id : ids) labels.push_back(active.labels.at(id));
    Matrix block(ids.size(), active.dim());
    for (std::size_t r = 0; r < ids.size(); ++r) block.set_row(r, active.row_of(ids[r]));

    TrainingSet set;
    set.ids = ids;
    set.labels = labels;
    set.party_blocks = {std::move(block)};
    set.filterable.assign(ids.size(), false);
    result.train_samples = static_cast<int>(set.ids.size());
    result.train_ids = set.ids;
    run_ce_stage(result, set, cfg, {bundle.test_blocks.front()}, bundle.test_labels);
  } else {
    TrainingSet set = empty_set(parties);
    append_rows(set, data::gather_blocks(parties, active.overlap_ids), active.overlap_ids,
                overlap_labels(bundle), false);

    if (mode == Method::local_vfl) {
      // party 1's own rows, the other blocks imputed with zeros
      std::vector<int> ids;
      for (int id : active.nonoverlap_ids)
        if (active.labels.count(id)) ids.push_back(id);
      if (ids.empty() && !active.nonoverlap_ids.empty())
        throw ConfigError("local_vfl needs labels on the active party's non-overlapping rows");
      std::vector<Matrix> blocks;
      blocks.reserve(parties.size());
      for (const auto& ds : parties) blocks.emplace_back(ids.size(), ds.dim());
      std::vector<int> labels;
      for (std::size_t r = 0; r < ids.size(); ++r) {
        blocks[0].set_row(r, active.row_of(ids[r]));
        labels.push_back(active.labels.at(ids[r]));
      }
      append_rows(set, blocks, ids, labels, false);
    } else if (mode == Method::random_match) {
      // random pairing across the parties' non-overlapping pools
      std::size_t pairs = active.nonoverlap_ids.size();
      for (const auto& ds : parties) pairs = std::min(pairs, ds.nonoverlap_ids.size());
      if (pairs > 0) {
        std::vector<std::vector<int>> picks(parties.size());
        for (std::size_t m = 0; m < parties.size(); ++m) {
          picks[m] = parties[m].nonoverlap_ids;
          auto rng = make_rng(cfg.seed, "random-match-" + std::to_string(m + 1));
          std::shuffle(picks[m].begin(), picks[m].end(), rng);
          picks[m].resize(pairs);
        }
        std::vector<Matrix> blocks;
        blocks.reserve(parties.size());
        for (const auto& ds : parties) blocks.emplace_back(pairs, ds.dim());
        std::vector<int> ids, labels;
        for (std::size_t r = 0; r < pairs; ++r) {
          const int active_id = picks[0][r];
          if (!active.labels.count(active_id))
            throw ConfigError("random_match needs labels on the active party's rows");
          for (std::size_t m = 0; m < parties.size(); ++m)
            blocks[m].set_row(r, parties[m].row_of(picks[m][r]));
          ids.push_back(active_id);
          labels.push_back(active.labels.at(active_id));
        }
        append_rows(set, blocks, ids, labels, false);
      }
    }

    result.train_samples = static_cast<int>(set.ids.size());
    result.train_ids = set.ids;
    run_ce_stage(result, set, cfg, bundle.test_blocks, bundle.test_labels);
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return result;
}

RunResult run_method(const SplitBundle& bundle, const VflConfig& cfg, Method method,
                     const RunHooks* hooks) {
  if (is_baseline(method)) return run_baseline(bundle, cfg, method);
  VflConfig run_cfg = cfg;
  run_cfg.method = method;
  return run_risa(bundle, run_cfg, hooks);
}

}  // namespace risa::evfl
