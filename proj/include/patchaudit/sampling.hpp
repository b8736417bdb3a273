#pragma once

#include <vector>

#include "patchaudit/dataset.hpp"
#include "patchaudit/rng.hpp"

namespace patchaudit {

struct SplitSpec {
  double train_fraction = 0.8;
  double val_fraction = 0.1;
  double test_fraction = 0.1;

  void validate() const;  // fractions in (0,1), summing to 1 within 1e-9
};

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

// Per class: shuffle, floor(n_c * val_fraction) to val, floor(n_c *
// test_fraction) to test, remainder to train. Flooring remainders always land
// in train.
DatasetSplit stratified_split(const LabeledDataset& dataset, const SplitSpec& spec,
                              SeededRng rng);

// Subsamples every class without replacement down to the minority count.
// Output preserves the input item order.
LabeledDataset balance_classes(const LabeledDataset& dataset, SeededRng rng);

// Fresh permutation per epoch derived from (rng seed, epoch); the final
// partial batch is kept. Batches hold indices into dataset.items.
std::vector<std::vector<int>> epoch_batches(size_t n_items, int batch_size,
                                            const SeededRng& rng, int epoch);

}  // namespace patchaudit
