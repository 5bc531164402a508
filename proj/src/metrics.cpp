#include "risa/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "risa/error.hpp"

namespace risa::metrics {

double compute_auc(const Vector& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw ContractViolation("compute_auc: scores/labels size mismatch");
  if (scores.empty()) throw DataError("compute_auc: empty input");
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractViolation("compute_auc: labels must be 0/1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw DataError("compute_auc: undefined metric, only one class present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // midranks: tied scores share the average of their 1-based rank range
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += midrank;
    i = j + 1;
  }
  const double u = pos_rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels) {
  if (predicted.size() != labels.size())
    throw ContractViolation("accuracy: size mismatch");
  if (predicted.empty()) throw DataError("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractViolation("median: empty input");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace risa::metrics
