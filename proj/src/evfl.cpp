#include "risa/evfl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "risa/error.hpp"
#include "risa/metrics.hpp"
#include "risa/rng.hpp"

namespace risa::evfl {

using nlohmann::json;

Method method_from_string(const std::string& name) {
  if (name == "local") return Method::local;
  if (name == "vfl") return Method::vfl;
  if (name == "local_vfl") return Method::local_vfl;
  if (name == "random_match") return Method::random_match;
  if (name == "imp") return Method::imp;
  if (name == "imp_st") return Method::imp_st;
  if (name == "imp_evfl") return Method::imp_evfl;
  if (name == "risa") return Method::risa;
  throw ConfigError("unknown method: " + name);
}

const char* to_string(Method method) {
  switch (method) {
    case Method::local: return "local";
    case Method::vfl: return "vfl";
    case Method::local_vfl: return "local_vfl";
    case Method::random_match: return "random_match";
    case Method::imp: return "imp";
    case Method::imp_st: return "imp_st";
    case Method::imp_evfl: return "imp_evfl";
    case Method::risa: return "risa";
  }
  return "?";
}

bool is_baseline(Method method) {
  return method == Method::local || method == Method::vfl || method == Method::local_vfl ||
         method == Method::random_match;
}

void VflConfig::validate() const {
  if (num_parties < 2) throw ConfigError("config: num_parties must be >= 2");
  if (num_classes < 2) throw ConfigError("config: num_classes must be >= 2");
  if (epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (filter_interval < 1 || filter_interval > epochs)
    throw ConfigError("config: filter_interval must be in [1, epochs]");
  if (!(tau0 > 0.0) || !(tau0 < 1.0)) throw ConfigError("config: tau0 must be in (0, 1)");
  if (tau_p < 0.0 || tau_p > 1.0) throw ConfigError("config: tau_p must be in [0, 1]");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("config: momentum must be in [0, 1)");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (hidden < 1) throw ConfigError("config: hidden must be >= 1");
  if (encoder_layers < 1) throw ConfigError("config: encoder_layers must be >= 1");
  if (stage1_epochs < 1) throw ConfigError("config: stage1_epochs must be >= 1");
  if (!(stage1_lr > 0.0)) throw ConfigError("config: stage1_lr must be positive");
  if (evidence_activation != "softplus" && evidence_activation != "relu" &&
      evidence_activation != "exp")
    throw ConfigError("config: evidence_activation must be softplus, relu or exp");
}

VflConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  VflConfig cfg;
  std::set<std::string> known;
  auto get = [&](const char* key, auto& field) {
    known.insert(key);
    if (j.contains(key)) {
      try {
        field = j.at(key).get<std::decay_t<decltype(field)>>();
      } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for ") + key + ": " + e.what());
      }
    }
  };
  get("num_parties", cfg.num_parties);
  get("num_classes", cfg.num_classes);
  get("epochs", cfg.epochs);
  get("filter_interval", cfg.filter_interval);
  get("tau0", cfg.tau0);
  get("tau_p", cfg.tau_p);
  get("lr", cfg.lr);
  get("momentum", cfg.momentum);
  get("batch_size", cfg.batch_size);
  get("seed", cfg.seed);
  get("evidence_activation", cfg.evidence_activation);
  get("hidden", cfg.hidden);
  get("encoder_layers", cfg.encoder_layers);
  get("stage1_epochs", cfg.stage1_epochs);
  get("stage1_lr", cfg.stage1_lr);
  get("filter_overlap", cfg.filter_overlap);
  get("active_nonoverlap_labeled", cfg.active_nonoverlap_labeled);
  known.insert("method");
  if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
  for (const auto& [key, _] : j.items())
    if (!known.count(key)) throw ConfigError("config: unknown key: " + key);
  cfg.validate();
  return cfg;
}

std::string config_to_json_text(const VflConfig& cfg) {
  json j;
  j["num_parties"] = cfg.num_parties;
  j["num_classes"] = cfg.num_classes;
  j["epochs"] = cfg.epochs;
  j["filter_interval"] = cfg.filter_interval;
  j["tau0"] = cfg.tau0;
  j["tau_p"] = cfg.tau_p;
  j["lr"] = cfg.lr;
  j["momentum"] = cfg.momentum;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["evidence_activation"] = cfg.evidence_activation;
  j["method"] = to_string(cfg.method);
  j["hidden"] = cfg.hidden;
  j["encoder_layers"] = cfg.encoder_layers;
  j["stage1_epochs"] = cfg.stage1_epochs;
  j["stage1_lr"] = cfg.stage1_lr;
  j["filter_overlap"] = cfg.filter_overlap;
  j["active_nonoverlap_labeled"] = cfg.active_nonoverlap_labeled;
  return j.dump(2);
}

VflConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return config_from_json_text(text);
}

double uncertainty_threshold(int t, int total_epochs, double tau0) {
  if (total_epochs < 1) throw ContractViolation("uncertainty_threshold: bad total epoch count");
  if (t < 0 || t > total_epochs)
    throw ContractViolation("uncertainty_threshold: epoch out of range");
  if (!(tau0 > 0.0) || !(tau0 < 1.0))
    throw ContractViolation("uncertainty_threshold: tau0 must be in (0, 1)");
  return std::pow(tau0, static_cast<double>(t) / static_cast<double>(total_epochs));
}

const char* to_string(PartyMessage::Direction dir) {
  return dir == PartyMessage::Direction::forward ? "forward" : "backward";
}

std::size_t TrainState::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

std::string metrics_to_json_line(const EpochMetrics& m) {
  json j;
  j["epoch"] = m.epoch;
  j["train_loss"] = m.train_loss;
  j["test_acc"] = m.test_acc;
  j["test_auc"] = m.test_auc ? json(*m.test_auc) : json(nullptr);
  j["active_samples"] = m.active_samples;
  j["tau_t"] = m.tau_t ? json(*m.tau_t) : json(nullptr);
  j["filtered_count"] = m.filtered_count;
  return j.dump();
}

EvflTrainer::EvflTrainer(TrainingSet set, const VflConfig& cfg)
    : set_(std::move(set)), cfg_(cfg), shuffle_rng_(make_rng(cfg.seed, "stage2-shuffle")) {
  if (set_.party_blocks.empty()) throw ContractViolation("EvflTrainer: no parties");
  const std::size_t n = set_.ids.size();
  if (n == 0) throw ContractViolation("EvflTrainer: empty training set");
  for (const auto& block : set_.party_blocks)
    if (block.rows != n) throw ContractViolation("EvflTrainer: misaligned party block");
  if (set_.labels.size() != n || set_.filterable.size() != n)
    throw ContractViolation("EvflTrainer: labels/filterable misaligned");

  const auto k = static_cast<std::size_t>(cfg_.num_classes);
  const nn::Activation evidence_act = nn::activation_from_string(cfg_.evidence_activation);
  std::vector<std::size_t> widths(static_cast<std::size_t>(cfg_.encoder_layers), cfg_.hidden);
  std::vector<nn::Activation> acts(static_cast<std::size_t>(cfg_.encoder_layers),
                                   nn::Activation::relu);
  widths.push_back(k);
  acts.push_back(evidence_act);
  for (std::size_t m = 0; m < set_.party_blocks.size(); ++m) {
    nets_.push_back(nn::DenseNet::make(set_.party_blocks[m].cols, widths, acts,
                                       derive_seed(cfg_.seed, "evfl-party-" + std::to_string(m + 1))));
    opts_.emplace_back(cfg_.lr, cfg_.momentum);
  }

  state_.u_sum.assign(n, 0.0);
  state_.u_count.assign(n, 0);
  state_.active.assign(n, true);
}

void EvflTrainer::enable_trace(bool keep_payloads) {
  trace_.enabled = true;
  trace_.keep_payloads = keep_payloads;
}

double EvflTrainer::train_epoch() {
  const std::size_t num_parties = set_.party_blocks.size();
  const auto k = static_cast<std::size_t>(cfg_.num_classes);
  const auto prior_sum = static_cast<double>(k);

  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < state_.active.size(); ++r)
    if (state_.active[r]) order.push_back(r);
  if (order.empty()) throw ContractViolation("EvflTrainer: no active samples");
  std::shuffle(order.begin(), order.end(), shuffle_rng_);

  ++state_.epoch;
  last_epoch_ids_.clear();

  auto record = [&](PartyMessage::Direction dir, int party_id, const std::vector<int>& ids,
                    const Matrix& payload) {
    if (dir == PartyMessage::Direction::forward)
      ++trace_.forward_count;
    else
      ++trace_.backward_count;
    if (!trace_.enabled) return;
    PartyMessage msg;
    msg.direction = dir;
    msg.epoch = state_.epoch;
    msg.party_id = party_id;
    msg.sample_ids = ids;
    if (trace_.keep_payloads) msg.payload = payload;
    trace_.messages.push_back(std::move(msg));
  };

  double loss_sum = 0.0;
  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t stop = std::min(start + batch, order.size());
    const std::size_t bn = stop - start;
    std::vector<int> batch_ids;
    batch_ids.reserve(bn);
    for (std::size_t bi = start; bi < stop; ++bi)
      batch_ids.push_back(set_.ids[order[bi]]);

    // each party encodes its block and emits per-class evidence
    std::vector<Matrix> evidence(num_parties, Matrix(bn, k));
    std::vector<std::vector<nn::Trace>> traces(num_parties, std::vector<nn::Trace>(bn));
    for (std::size_t m = 0; m < num_parties; ++m) {
      for (std::size_t bi = 0; bi < bn; ++bi) {
        const std::size_t r = order[start + bi];
        auto [e, trace] = nets_[m].forward_traced(set_.party_blocks[m].row(r));
        if (!all_finite(e))
          throw DivergenceError("evidential training diverged at epoch " +
                                std::to_string(state_.epoch) + ": non-finite evidence from party " +
                                std::to_string(m + 1));
        evidence[m].set_row(bi, e);
        traces[m][bi] = std::move(trace);
      }
      if (m > 0)
        record(PartyMessage::Direction::forward, static_cast<int>(m + 1), batch_ids, evidence[m]);
    }

    // active party: fuse opinions, evidential loss, gradients per party
    std::vector<Matrix> evidence_grads(num_parties, Matrix(bn, k));
    for (std::size_t bi = 0; bi < bn; ++bi) {
      const std::size_t r = order[start + bi];
      std::vector<evidence::Opinion> opinions;
      opinions.reserve(num_parties);
      for (std::size_t m = 0; m < num_parties; ++m)
        opinions.push_back(evidence::evidence_to_opinion(evidence[m].row(bi), k).second);
      evidence::FusionResult fusion = evidence::fuse_all(opinions);
      evidence::DirichletParams params = evidence::opinion_to_dirichlet(fusion.fused);
      const auto y = static_cast<std::size_t>(set_.labels[r]);
      auto [loss, dl_dalpha] = evidence::evidential_loss(params, y);
      if (!std::isfinite(loss))
        throw DivergenceError("evidential training diverged at epoch " +
                              std::to_string(state_.epoch) + ", sample " +
                              std::to_string(set_.ids[r]));
      loss_sum += loss;
      const evidence::OpinionGrad og = evidence::loss_grad_to_opinion(fusion.fused, dl_dalpha);
      const std::vector<Vector> egrads = evidence::backprop_fusion(fusion, og, prior_sum);
      for (std::size_t m = 0; m < num_parties; ++m) evidence_grads[m].set_row(bi, egrads[m]);

      state_.u_sum[r] += fusion.fused.u;
      state_.u_count[r] += 1;
      last_epoch_ids_.push_back(set_.ids[r]);
    }
    for (std::size_t m = 1; m < num_parties; ++m)
      record(PartyMessage::Direction::backward, static_cast<int>(m + 1), batch_ids,
             evidence_grads[m]);

    // every party takes one SGD step on the batch-mean gradient
    const double inv = 1.0 / static_cast<double>(bn);
    for (std::size_t m = 0; m < num_parties; ++m) {
      nn::GradientTape tape = nets_[m].zero_tape();
      for (std::size_t bi = 0; bi < bn; ++bi)
        tape.add(nets_[m].backward_at(traces[m][bi], evidence_grads[m].row(bi)));
      tape.scale(inv);
      opts_[m].step(nets_[m], tape);
    }
  }
  return loss_sum / static_cast<double>(order.size());
}

int EvflTrainer::apply_scheduled_filter() {
  if (state_.epoch == 0 || state_.epoch % cfg_.filter_interval != 0) return 0;
  return filter_samples(uncertainty_threshold(state_.epoch, cfg_.epochs, cfg_.tau0));
}

int EvflTrainer::filter_samples(double tau) {
  int removed = 0;
  for (std::size_t r = 0; r < state_.active.size(); ++r) {
    if (!state_.active[r] || state_.u_count[r] == 0) continue;
    if (!set_.filterable[r] && !cfg_.filter_overlap) continue;
    const double avg = state_.u_sum[r] / static_cast<double>(state_.u_count[r]);
    if (avg > tau) {
      state_.active[r] = false;
      state_.removed_ids.push_back(set_.ids[r]);
      ++removed;
    }
  }
  std::fill(state_.u_sum.begin(), state_.u_sum.end(), 0.0);
  std::fill(state_.u_count.begin(), state_.u_count.end(), 0);
  if (state_.active_count() == 0)
    throw ConfigError("uncertainty filtering removed every training sample (tau=" +
                      std::to_string(tau) + "); relax tau0 or the filter interval");
  return removed;
}

std::pair<Vector, double> EvflTrainer::predict_row(const std::vector<Vector>& blocks) const {
  if (blocks.size() != nets_.size())
    throw ContractViolation("EvflTrainer::predict_row: block count mismatch");
  const auto k = static_cast<std::size_t>(cfg_.num_classes);
  std::vector<evidence::Opinion> opinions;
  opinions.reserve(nets_.size());
  for (std::size_t m = 0; m < nets_.size(); ++m)
    opinions.push_back(evidence::evidence_to_opinion(nets_[m].evaluate(blocks[m]), k).second);
  const evidence::DirichletParams params =
      evidence::opinion_to_dirichlet(evidence::fuse_all(opinions).fused);
  return evidence::predict(params);
}

std::pair<double, std::optional<double>> EvflTrainer::evaluate(
    const std::vector<Matrix>& blocks, const std::vector<int>& labels) const {
  if (labels.empty()) throw ContractViolation("EvflTrainer::evaluate: empty test set");
  std::vector<int> predicted;
  Vector scores;
  predicted.reserve(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    std::vector<Vector> row_blocks;
    row_blocks.reserve(blocks.size());
    for (const auto& block : blocks) row_blocks.push_back(block.row(r));
    const auto [p, u] = predict_row(row_blocks);
    predicted.push_back(static_cast<int>(argmax(p)));
    if (cfg_.num_classes == 2) scores.push_back(p[1]);
  }
  const double acc = metrics::accuracy(predicted, labels);
  std::optional<double> auc;
  if (cfg_.num_classes == 2) {
    const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (has_pos && has_neg) auc = metrics::compute_auc(scores, labels);
  }
  return {acc, auc};
}

}  // namespace risa::evfl
