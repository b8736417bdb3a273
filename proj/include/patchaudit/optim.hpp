#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "patchaudit/metrics.hpp"
#include "patchaudit/probe.hpp"
#include "patchaudit/sampling.hpp"

namespace patchaudit {

template <typename T>
struct AdamState {
  std::vector<T> m;  // first moment estimate
  std::vector<T> v;  // second moment estimate, elementwise >= 0
  int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  AdamState() = default;
  explicit AdamState(size_t n) : m(n, T(0)), v(n, T(0)) {}
};

// One bias-corrected Adam update, in place. lr = 0 is allowed and leaves the
// parameters bit-identical while the moments still advance.
template <typename T>
void adam_step(std::vector<T>& params, std::span<const T> grad, AdamState<T>& state,
               double lr);

extern template void adam_step<float>(std::vector<float>&, std::span<const float>,
                                      AdamState<float>&, double);
extern template void adam_step<double>(std::vector<double>&, std::span<const double>,
                                       AdamState<double>&, double);

struct TrainConfig {
  double learning_rate = 0.0001;
  int batch_size = 32;
  int epochs = 30;  // 5 and 15 stay selectable for shorter schedules
  bool eval_each_epoch = true;
  uint64_t seed = 42;

  void validate() const;
};

struct EpochRecord {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

using LearningCurve = std::vector<EpochRecord>;

// Decode, resize to the probe input resolution when needed, and expand
// grayscale to three channels.
std::vector<ImageTensor> load_probe_inputs(const LabeledDataset& dataset, int height,
                                           int width);

// Constant-lr Adam over shuffled batches for a fixed epoch budget. Validation
// is observational only; the final-epoch parameters are always returned.
std::pair<ProbeParameters, LearningCurve> train(const TrainConfig& config,
                                                const ProbeConfig& probe_config,
                                                const DatasetSplit& split);

// Confusion counts with "present" as the positive class.
ConfusionMatrix evaluate(const ProbeParameters& params, const LabeledDataset& dataset);

}  // namespace patchaudit
