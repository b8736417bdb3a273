#include "patchaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "patchaudit/errors.hpp"

namespace patchaudit {

MetricSet metric_set(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0)
    fail(ErrorCode::invalid_config, "confusion counts must be non-negative");
  if (cm.total() < 1) fail(ErrorCode::empty_matrix, "confusion matrix is empty");

  MetricSet m;
  m.accuracy = static_cast<double>(cm.correct()) / static_cast<double>(cm.total());
  m.precision = cm.tp + cm.fp > 0
                    ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp)
                    : 0.0;
  m.recall = cm.tp + cm.fn > 0
                 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn)
                 : 0.0;
  m.f1 = m.precision + m.recall > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

double binomial_exceedance(int64_t k, int64_t n, double p0) {
  if (n < 1) fail(ErrorCode::invalid_baseline, "n must be >= 1");
  if (k < 0 || k > n) fail(ErrorCode::invalid_baseline, "k must lie in [0, n]");
  if (!(p0 > 0.0 && p0 < 1.0))
    fail(ErrorCode::invalid_baseline, "baseline rate must lie in (0,1)");

  if (k == 0) return 1.0;

  const double log_p = std::log(p0);
  const double log_q = std::log1p(-p0);
  const double lg_n1 = std::lgamma(static_cast<double>(n) + 1.0);

  std::vector<double> log_terms;
  log_terms.reserve(static_cast<size_t>(n - k + 1));
  for (int64_t i = k; i <= n; ++i) {
    const double log_choose = lg_n1 - std::lgamma(static_cast<double>(i) + 1.0) -
                              std::lgamma(static_cast<double>(n - i) + 1.0);
    log_terms.push_back(log_choose + static_cast<double>(i) * log_p +
                        static_cast<double>(n - i) * log_q);
  }

  const double peak = *std::max_element(log_terms.begin(), log_terms.end());
  long double sum = 0.0L;
  for (double t : log_terms) sum += std::exp(static_cast<long double>(t - peak));
  const double p = static_cast<double>(std::exp(static_cast<long double>(peak)) * sum);
  return std::min(p, 1.0);
}

ChanceBaselines chance_baselines(const LabeledDataset& dataset) {
  const size_t n = dataset.size();
  if (n == 0) fail(ErrorCode::empty_dataset, "cannot compute baselines of an empty set");
  const size_t present = dataset.count(BinaryLabel::present);
  const size_t majority = std::max(present, n - present);

  ChanceBaselines b;
  b.fixed = 0.5;
  b.majority_rate = static_cast<double>(majority) / static_cast<double>(n);
  return b;
}

}  // namespace patchaudit
