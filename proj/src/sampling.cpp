#include "patchaudit/sampling.hpp"

#include <algorithm>
#include <cmath>

#include "patchaudit/errors.hpp"

namespace patchaudit {

void SplitSpec::validate() const {
  for (double f : {train_fraction, val_fraction, test_fraction})
    if (!(f > 0.0 && f < 1.0))
      fail(ErrorCode::invalid_config, "split fractions must lie in (0,1)");
  if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
    fail(ErrorCode::invalid_config, "split fractions must sum to 1");
}

namespace {

std::vector<int> class_indices(const LabeledDataset& dataset, BinaryLabel label) {
  std::vector<int> indices;
  for (size_t i = 0; i < dataset.items.size(); ++i)
    if (dataset.items[i].label == label) indices.push_back(static_cast<int>(i));
  return indices;
}

LabeledDataset subset(const LabeledDataset& dataset, std::vector<int> indices,
                      const std::string& suffix) {
  std::sort(indices.begin(), indices.end());
  LabeledDataset out;
  out.name = dataset.name + suffix;
  out.region_tag = dataset.region_tag;
  out.items.reserve(indices.size());
  for (int i : indices) out.items.push_back(dataset.items[i]);
  return out;
}

// floor with a nudge so that fractions like 0.1 never round an exact integer
// product downward.
int floor_count(size_t n, double fraction) {
  return static_cast<int>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

}  // namespace

DatasetSplit stratified_split(const LabeledDataset& dataset, const SplitSpec& spec,
                              SeededRng rng) {
  spec.validate();

  std::vector<int> val_set, test_set, train_set;
  for (BinaryLabel label : {BinaryLabel::absent, BinaryLabel::present}) {
    std::vector<int> indices = class_indices(dataset, label);
    if (indices.size() < 3)
      fail(ErrorCode::class_too_small, std::string("class '") + to_string(label) +
                                           "' has " + std::to_string(indices.size()) +
                                           " items; need at least 3");
    rng.shuffle(indices);
    const int n_val = floor_count(indices.size(), spec.val_fraction);
    const int n_test = floor_count(indices.size(), spec.test_fraction);
    val_set.insert(val_set.end(), indices.begin(), indices.begin() + n_val);
    test_set.insert(test_set.end(), indices.begin() + n_val,
                    indices.begin() + n_val + n_test);
    train_set.insert(train_set.end(), indices.begin() + n_val + n_test, indices.end());
  }

  DatasetSplit split;
  split.train = subset(dataset, std::move(train_set), "/train");
  split.val = subset(dataset, std::move(val_set), "/val");
  split.test = subset(dataset, std::move(test_set), "/test");
  return split;
}

LabeledDataset balance_classes(const LabeledDataset& dataset, SeededRng rng) {
  std::vector<int> absent = class_indices(dataset, BinaryLabel::absent);
  std::vector<int> present = class_indices(dataset, BinaryLabel::present);
  if (absent.empty() || present.empty())
    fail(ErrorCode::degenerate_dataset,
         "'" + dataset.name + "' is missing one of the two classes");

  const size_t target = std::min(absent.size(), present.size());
  std::vector<int> keep;
  for (auto* indices : {&absent, &present}) {
    rng.shuffle(*indices);
    keep.insert(keep.end(), indices->begin(), indices->begin() + target);
  }
  return subset(dataset, std::move(keep), "");
}

std::vector<std::vector<int>> epoch_batches(size_t n_items, int batch_size,
                                            const SeededRng& rng, int epoch) {
  if (batch_size < 1) fail(ErrorCode::invalid_config, "batch size must be >= 1");

  std::vector<int> order(n_items);
  for (size_t i = 0; i < n_items; ++i) order[i] = static_cast<int>(i);
  SeededRng epoch_rng = rng.derive("epoch:" + std::to_string(epoch));
  epoch_rng.shuffle(order);

  std::vector<std::vector<int>> batches;
  for (size_t start = 0; start < n_items; start += batch_size) {
    const size_t end = std::min(n_items, start + batch_size);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

}  // namespace patchaudit
