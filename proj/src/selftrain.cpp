#include "risa/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "risa/error.hpp"
#include "risa/rng.hpp"

namespace risa::selftrain {

Vector softmax(const Vector& logits) {
  double hi = logits[0];
  for (double z : logits) hi = std::max(hi, z);
  double sum = 0.0;
  Vector p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - hi);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

VerticalCeModel VerticalCeModel::make(const std::vector<std::size_t>& block_dims,
                                      std::size_t num_classes, std::size_t hidden,
                                      int encoder_layers, std::uint64_t seed) {
  if (block_dims.empty()) throw ContractViolation("VerticalCeModel: no parties");
  if (num_classes < 2) throw ContractViolation("VerticalCeModel: need at least two classes");
  if (encoder_layers < 1 || hidden == 0)
    throw ContractViolation("VerticalCeModel: bad encoder shape");
  VerticalCeModel model;
  model.num_classes_ = num_classes;
  const std::vector<std::size_t> widths(static_cast<std::size_t>(encoder_layers), hidden);
  const std::vector<nn::Activation> acts(static_cast<std::size_t>(encoder_layers),
                                         nn::Activation::relu);
  for (std::size_t m = 0; m < block_dims.size(); ++m)
    model.encoders_.push_back(nn::DenseNet::make(
        block_dims[m], widths, acts, derive_seed(seed, "ce-encoder-" + std::to_string(m + 1))));
  model.head_ = nn::DenseNet::make(hidden * block_dims.size(), {num_classes},
                                   {nn::Activation::linear}, derive_seed(seed, "ce-head"));
  return model;
}

Vector VerticalCeModel::logits(const std::vector<Vector>& blocks) const {
  if (blocks.size() != encoders_.size())
    throw ContractViolation("VerticalCeModel: block count mismatch");
  Vector features;
  features.reserve(head_.input_dim());
  for (std::size_t m = 0; m < encoders_.size(); ++m) {
    const Vector f = encoders_[m].evaluate(blocks[m]);
    features.insert(features.end(), f.begin(), f.end());
  }
  return head_.evaluate(features);
}

Vector VerticalCeModel::probabilities(const std::vector<Vector>& blocks) const {
  return softmax(logits(blocks));
}

CeTrainer::CeTrainer(std::vector<Matrix> blocks, std::vector<int> labels,
                     std::size_t num_classes, const CeTrainConfig& cfg)
    : blocks_(std::move(blocks)),
      labels_(std::move(labels)),
      cfg_(cfg),
      head_opt_(cfg.lr, cfg.momentum),
      shuffle_rng_(make_rng(cfg.seed, "ce-shuffle")) {
  if (blocks_.empty()) throw ContractViolation("CeTrainer: no parties");
  for (const auto& b : blocks_)
    if (b.rows != labels_.size()) throw ContractViolation("CeTrainer: rows/labels mismatch");
  if (labels_.empty()) throw ContractViolation("CeTrainer: empty training set");
  if (cfg_.batch_size < 1) throw ContractViolation("CeTrainer: bad batch size");

  std::set<int> seen;
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw ContractViolation("CeTrainer: label out of range");
    seen.insert(y);
  }
  for (std::size_t k = 0; k < num_classes; ++k)
    if (!seen.count(static_cast<int>(k)))
      log_.warnings.push_back("class " + std::to_string(k) +
                              " absent from the training set; it will receive no pseudo-labels");

  std::vector<std::size_t> dims;
  dims.reserve(blocks_.size());
  for (const auto& b : blocks_) dims.push_back(b.cols);
  model_ = VerticalCeModel::make(dims, num_classes, cfg_.hidden, cfg_.encoder_layers, cfg_.seed);
  for (std::size_t m = 0; m < blocks_.size(); ++m)
    encoder_opts_.emplace_back(cfg_.lr, cfg_.momentum);
}

double CeTrainer::train_epoch() {
  const std::size_t n = labels_.size();
  const std::size_t num_parties = blocks_.size();
  const std::size_t hidden_out = model_.encoders()[0].output_dim();

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), shuffle_rng_);

  double loss_sum = 0.0;
  const auto batch = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t stop = std::min(start + batch, n);
    const double inv = 1.0 / static_cast<double>(stop - start);
    std::vector<nn::GradientTape> enc_tapes;
    for (auto& enc : model_.encoders()) enc_tapes.push_back(enc.zero_tape());
    nn::GradientTape head_tape = model_.head().zero_tape();

    for (std::size_t bi = start; bi < stop; ++bi) {
      const std::size_t r = order[bi];
      Vector features;
      features.reserve(model_.head().input_dim());
      std::vector<nn::Trace> enc_traces(num_parties);
      for (std::size_t m = 0; m < num_parties; ++m) {
        auto [f, trace] = model_.encoders()[m].forward_traced(blocks_[m].row(r));
        features.insert(features.end(), f.begin(), f.end());
        enc_traces[m] = std::move(trace);
      }
      auto [z, head_trace] = model_.head().forward_traced(features);

      // stable cross-entropy: loss = logsumexp(z) - z_y, dL/dz = p - y
      double hi = z[0];
      for (double v : z) hi = std::max(hi, v);
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - hi);
      const auto y = static_cast<std::size_t>(labels_[r]);
      loss_sum += hi + std::log(sum) - z[y];
      Vector dz(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) dz[k] = std::exp(z[k] - hi) / sum;
      dz[y] -= 1.0;

      nn::GradientTape ht = model_.head().backward_at(head_trace, dz);
      for (std::size_t m = 0; m < num_parties; ++m) {
        const Vector upstream(ht.dinput.begin() + static_cast<std::ptrdiff_t>(m * hidden_out),
                              ht.dinput.begin() + static_cast<std::ptrdiff_t>((m + 1) * hidden_out));
        enc_tapes[m].add(model_.encoders()[m].backward_at(enc_traces[m], upstream));
      }
      head_tape.add(ht);
    }

    head_tape.scale(inv);
    head_opt_.step(model_.head(), head_tape);
    for (std::size_t m = 0; m < num_parties; ++m) {
      enc_tapes[m].scale(inv);
      encoder_opts_[m].step(model_.encoders()[m], enc_tapes[m]);
    }
  }
  const double mean_loss = loss_sum / static_cast<double>(n);
  if (!std::isfinite(mean_loss))
    throw DivergenceError("cross-entropy training diverged (non-finite loss)");
  log_.epoch_loss.push_back(mean_loss);
  return mean_loss;
}

VerticalCeModel train_fst(const std::vector<Matrix>& overlap_blocks,
                          const std::vector<int>& labels, std::size_t num_classes,
                          const CeTrainConfig& cfg, TrainLog* log) {
  CeTrainer trainer(overlap_blocks, labels, num_classes, cfg);
  for (int e = 0; e < cfg.epochs; ++e) trainer.train_epoch();
  if (log) *log = trainer.log();
  return trainer.model();
}

std::vector<PseudoLabel> assign_pseudo_labels(const VerticalCeModel& model,
                                              const std::vector<Matrix>& blocks,
                                              const std::vector<int>& sample_ids, double tau_p) {
  if (tau_p < 0.0 || tau_p > 1.0)
    throw ContractViolation("assign_pseudo_labels: tau_p must be in [0, 1]");
  if (blocks.size() != model.num_parties())
    throw ContractViolation("assign_pseudo_labels: block count mismatch");
  const std::size_t n = sample_ids.size();
  for (const auto& b : blocks)
    if (b.rows != n) throw ContractViolation("assign_pseudo_labels: rows/ids mismatch");

  std::vector<PseudoLabel> out;
  for (std::size_t r = 0; r < n; ++r) {
    std::vector<Vector> row_blocks;
    row_blocks.reserve(blocks.size());
    for (const auto& b : blocks) row_blocks.push_back(b.row(r));
    const Vector p = model.probabilities(row_blocks);
    const std::size_t k = argmax(p);
    if (p[k] >= tau_p)
      out.push_back(PseudoLabel{sample_ids[r], static_cast<int>(k), p[k]});
  }
  return out;
}

}  // namespace risa::selftrain
