#pragma once

#include <cstdint>

#include "patchaudit/dataset.hpp"

namespace patchaudit {

// Counts for the positive class "cancer present".
struct ConfusionMatrix {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }
  int64_t correct() const { return tp + tn; }
};

struct MetricSet {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ChanceBaselines {
  double fixed = 0.5;
  double majority_rate = 0.5;
};

// accuracy, precision, recall, F1 as fractions in [0,1]. A 0/0 denominator
// yields 0 for that metric, keeping reports total-ordered.
MetricSet metric_set(const ConfusionMatrix& cm);

// One-sided exact binomial tail P[X >= k | X ~ Bin(n, p0)], accumulated in
// log space.
double binomial_exceedance(int64_t k, int64_t n, double p0);

ChanceBaselines chance_baselines(const LabeledDataset& dataset);

}  // namespace patchaudit
