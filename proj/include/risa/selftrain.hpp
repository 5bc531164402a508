#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "risa/linalg.hpp"
#include "risa/nn.hpp"

namespace risa::selftrain {

struct CeTrainConfig {
  int epochs = 100;
  double lr = 0.05;
  double momentum = 0.0;
  int batch_size = 64;
  std::uint64_t seed = 1;
  std::size_t hidden = 64;
  int encoder_layers = 2;
};

// Per-party encoders feeding one softmax head over the concatenated features.
class VerticalCeModel {
 public:
  VerticalCeModel() = default;

  static VerticalCeModel make(const std::vector<std::size_t>& block_dims, std::size_t num_classes,
                              std::size_t hidden, int encoder_layers, std::uint64_t seed);

  std::size_t num_parties() const { return encoders_.size(); }
  std::size_t num_classes() const { return num_classes_; }

  Vector logits(const std::vector<Vector>& blocks) const;
  Vector probabilities(const std::vector<Vector>& blocks) const;

  const std::vector<nn::DenseNet>& encoders() const { return encoders_; }
  std::vector<nn::DenseNet>& encoders() { return encoders_; }
  const nn::DenseNet& head() const { return head_; }
  nn::DenseNet& head() { return head_; }

 private:
  std::vector<nn::DenseNet> encoders_;
  nn::DenseNet head_;
  std::size_t num_classes_ = 0;
};

Vector softmax(const Vector& logits);

struct TrainLog {
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

// Cross-entropy trainer over aligned per-party feature blocks; backs both the
// pseudo-labeling stage and the supervised VFL baselines.
class CeTrainer {
 public:
  CeTrainer(std::vector<Matrix> blocks, std::vector<int> labels, std::size_t num_classes,
            const CeTrainConfig& cfg);

  // One pass over the data; returns the mean cross-entropy.
  double train_epoch();

  const VerticalCeModel& model() const { return model_; }
  const TrainLog& log() const { return log_; }

 private:
  std::vector<Matrix> blocks_;
  std::vector<int> labels_;
  CeTrainConfig cfg_;
  VerticalCeModel model_;
  std::vector<nn::SgdOptimizer> encoder_opts_;
  nn::SgdOptimizer head_opt_;
  std::mt19937_64 shuffle_rng_;
  TrainLog log_;
};

// Trains the pseudo-labeling model on the overlapping samples.
VerticalCeModel train_fst(const std::vector<Matrix>& overlap_blocks,
                          const std::vector<int>& labels, std::size_t num_classes,
                          const CeTrainConfig& cfg, TrainLog* log = nullptr);

struct PseudoLabel {
  int sample_id = 0;
  int class_id = 0;
  double confidence = 0.0;
};

// Labels row j with argmax_k p_jk whenever max_k p_jk >= tau_p.
std::vector<PseudoLabel> assign_pseudo_labels(const VerticalCeModel& model,
                                              const std::vector<Matrix>& blocks,
                                              const std::vector<int>& sample_ids, double tau_p);

}  // namespace risa::selftrain
