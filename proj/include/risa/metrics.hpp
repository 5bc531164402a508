#pragma once

#include <vector>

#include "risa/linalg.hpp"

namespace risa::metrics {

// Area under the ROC curve, computed as the Mann-Whitney U statistic over
// positive/negative score pairs with ties counted 0.5. Requires both classes.
double compute_auc(const Vector& scores, const std::vector<int>& labels);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels);

double median(std::vector<double> values);

}  // namespace risa::metrics
