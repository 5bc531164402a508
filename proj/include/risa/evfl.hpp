#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "risa/dataops.hpp"
#include "risa/evidence.hpp"
#include "risa/linalg.hpp"
#include "risa/nn.hpp"
#include "risa/selftrain.hpp"

namespace risa::evfl {

// Training methods: four supervised baselines, the ablations, and the full
// evidential pipeline (imputation + self-training + evidential filtering).
enum class Method { local, vfl, local_vfl, random_match, imp, imp_st, imp_evfl, risa };

Method method_from_string(const std::string& name);
const char* to_string(Method method);
bool is_baseline(Method method);

struct VflConfig {
  int num_parties = 2;       // M
  int num_classes = 2;       // K
  int epochs = 40;           // T, stage-2 epochs
  int filter_interval = 5;   // E, epochs between uncertainty filter events
  double tau0 = 0.5;         // final uncertainty threshold
  double tau_p = 0.7;        // pseudo-label confidence threshold
  double lr = 0.05;
  double momentum = 0.0;
  int batch_size = 64;
  std::uint64_t seed = 1;
  std::string evidence_activation = "softplus";  // softplus | relu | exp
  Method method = Method::risa;
  std::size_t hidden = 64;
  int encoder_layers = 2;
  int stage1_epochs = 120;
  double stage1_lr = 0.05;
  bool filter_overlap = false;             // overlap rows are never filtered unless set
  bool active_nonoverlap_labeled = true;   // party 1 keeps labels on its own rows

  void validate() const;  // throws ConfigError
};

VflConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const VflConfig& cfg);
VflConfig load_config(const std::string& path);

// tau_t = tau0^(t/T): decays from 1 at t=0 to tau0 at t=T.
double uncertainty_threshold(int t, int total_epochs, double tau0);

// The only payloads that cross a party boundary in stage 2: evidence vectors
// toward the active party, evidence gradients back.
struct PartyMessage {
  enum class Direction { forward, backward };
  Direction direction = Direction::forward;
  int epoch = 0;
  int party_id = 0;  // the passive endpoint of the transfer
  std::vector<int> sample_ids;
  Matrix payload;  // one row per sample, num_classes columns
};

const char* to_string(PartyMessage::Direction dir);

struct MessageTrace {
  bool enabled = false;
  bool keep_payloads = false;
  std::vector<PartyMessage> messages;
  std::size_t forward_count = 0;
  std::size_t backward_count = 0;
};

// Per-sample uncertainty bookkeeping between filter events.
struct TrainState {
  int epoch = 0;
  std::vector<double> u_sum;
  std::vector<int> u_count;
  std::vector<bool> active;
  std::vector<int> removed_ids;  // global ids in removal order

  std::size_t active_count() const;
};

// Aligned training view: one row per sample, one feature block per party.
struct TrainingSet {
  std::vector<int> ids;
  std::vector<Matrix> party_blocks;
  std::vector<int> labels;
  std::vector<bool> filterable;  // imputed / pseudo-labeled rows
};

struct EpochMetrics {
  int epoch = 0;
  double train_loss = 0.0;
  double test_acc = 0.0;
  std::optional<double> test_auc;
  int active_samples = 0;
  std::optional<double> tau_t;
  int filtered_count = 0;
};

std::string metrics_to_json_line(const EpochMetrics& m);

// Single-threaded deterministic reference trainer for the evidential VFL
// stage. Each party encodes its block into per-class evidence; the active
// party fuses the resulting opinions, computes the evidential loss, and
// returns evidence gradients. Only PartyMessage payloads cross parties.
class EvflTrainer {
 public:
  EvflTrainer(TrainingSet set, const VflConfig& cfg);

  // One pass over the active samples; returns the mean evidential loss.
  double train_epoch();

  // Applies the scheduled filter when epoch % filter_interval == 0.
  // Returns the number of samples removed (0 when not due).
  int apply_scheduled_filter();

  // Removes active samples whose mean fused uncertainty since the last filter
  // event exceeds tau; resets the accumulators.
  int filter_samples(double tau);

  // Fused prediction for one fully observed sample.
  std::pair<Vector, double> predict_row(const std::vector<Vector>& blocks) const;

  // Accuracy and (for binary tasks) AUC over a fully observed set.
  std::pair<double, std::optional<double>> evaluate(const std::vector<Matrix>& blocks,
                                                    const std::vector<int>& labels) const;

  const TrainState& state() const { return state_; }
  const TrainingSet& training_set() const { return set_; }
  const std::vector<nn::DenseNet>& party_nets() const { return nets_; }
  std::vector<nn::DenseNet>& party_nets() { return nets_; }
  int epoch() const { return state_.epoch; }

  void enable_trace(bool keep_payloads);
  const MessageTrace& trace() const { return trace_; }
  MessageTrace take_trace() { return std::move(trace_); }

  // Global ids that contributed gradients in the last epoch.
  const std::vector<int>& last_epoch_ids() const { return last_epoch_ids_; }

 private:
  TrainingSet set_;
  VflConfig cfg_;
  std::vector<nn::DenseNet> nets_;
  std::vector<nn::SgdOptimizer> opts_;
  std::mt19937_64 shuffle_rng_;
  TrainState state_;
  MessageTrace trace_;
  std::vector<int> last_epoch_ids_;
};

struct RunHooks {
  std::function<void(std::vector<selftrain::PseudoLabel>&)> mutate_pseudo_labels;
  bool trace_messages = false;
  bool keep_payloads = false;
  std::ostream* opinions_out = nullptr;
};

struct RunResult {
  Method method = Method::risa;
  std::vector<EpochMetrics> epochs;
  double final_accuracy = 0.0;
  std::optional<double> final_auc;
  std::vector<selftrain::PseudoLabel> pseudo_labels;
  std::vector<std::string> warnings;
  std::vector<int> train_ids;          // stage-2 population, in training order
  std::vector<int> filtered_ids;       // removed by uncertainty filtering
  std::vector<int> imputed_train_ids;  // imputed rows that entered stage 2
  int overlap_samples = 0;
  int train_samples = 0;  // stage-2 population size
  MessageTrace trace;
  std::vector<std::pair<std::string, nn::DenseNet>> models;  // for checkpointing
  double wall_seconds = 0.0;
};

// Stage 1 (impute, self-train, pseudo-label) followed by stage 2 (evidential
// or plain supervised training per the configured method).
RunResult run_risa(const data::SplitBundle& bundle, const VflConfig& cfg,
                   const RunHooks* hooks = nullptr);

// The four supervised baselines under identical splits and seeds.
RunResult run_baseline(const data::SplitBundle& bundle, const VflConfig& cfg, Method mode);

// Dispatches to run_risa or run_baseline on the method.
RunResult run_method(const data::SplitBundle& bundle, const VflConfig& cfg, Method method,
                     const RunHooks* hooks = nullptr);

}  // namespace risa::evfl
