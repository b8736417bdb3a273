#include "patchaudit/optim.hpp"

#include <cmath>

#include "patchaudit/cropper.hpp"
#include "patchaudit/errors.hpp"
#include "patchaudit/image_io.hpp"

namespace patchaudit {

template <typename T>
void adam_step(std::vector<T>& params, std::span<const T> grad, AdamState<T>& state,
               double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    fail(ErrorCode::length_mismatch, "gradient/state length does not match parameters");
  if (lr < 0.0) fail(ErrorCode::invalid_config, "learning rate must be >= 0");
  for (T g : grad)
    if (!std::isfinite(g)) fail(ErrorCode::non_finite_gradient, "gradient blew up");

  state.t += 1;
  const T b1 = static_cast<T>(state.beta1);
  const T b2 = static_cast<T>(state.beta2);
  const T m_corr = static_cast<T>(1.0 / (1.0 - std::pow(state.beta1, state.t)));
  const T v_corr = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, state.t)));
  const T eps = static_cast<T>(state.epsilon);
  const T step = static_cast<T>(lr);

  for (size_t i = 0; i < params.size(); ++i) {
    const T g = grad[i];
    state.m[i] = b1 * state.m[i] + (T(1) - b1) * g;
    state.v[i] = b2 * state.v[i] + (T(1) - b2) * g * g;
    const T m_hat = state.m[i] * m_corr;
    const T v_hat = state.v[i] * v_corr;
    params[i] -= step * m_hat / (std::sqrt(v_hat) + eps);
  }
}

template void adam_step<float>(std::vector<float>&, std::span<const float>,
                               AdamState<float>&, double);
template void adam_step<double>(std::vector<double>&, std::span<const double>,
                                AdamState<double>&, double);

void TrainConfig::validate() const {
  if (learning_rate < 0.0) fail(ErrorCode::invalid_config, "learning rate must be >= 0");
  if (batch_size < 1) fail(ErrorCode::invalid_config, "batch size must be >= 1");
  if (epochs < 1) fail(ErrorCode::invalid_config, "epoch count must be >= 1");
}

std::vector<ImageTensor> load_probe_inputs(const LabeledDataset& dataset, int height,
                                           int width) {
  std::vector<ImageTensor> images;
  images.reserve(dataset.size());
  for (const auto& item : dataset.items) {
    ImageTensor image = decode_image(item.source);
    if (image.height != height || image.width != width)
      image = resize_bilinear(image, height, width);
    images.push_back(to_probe_input(image));
  }
  return images;
}

namespace {

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult eval_pass(const ProbeParameters& params, std::span<const ImageTensor> images,
                     std::span<const BinaryLabel> labels) {
  constexpr size_t kChunk = 256;
  double loss_sum = 0.0;
  size_t correct = 0;
  for (size_t start = 0; start < images.size(); start += kChunk) {
    const size_t len = std::min(kChunk, images.size() - start);
    const auto out = forward<float>(params, images.subspan(start, len));
    for (size_t i = 0; i < len; ++i) {
      const auto& probs = out.probabilities[i];
      const int truth = labels[start + i] == BinaryLabel::present ? 1 : 0;
      loss_sum -= std::log(std::max(static_cast<double>(probs[truth]), 1e-300));
      const BinaryLabel pred =
          probs[1] > probs[0] ? BinaryLabel::present : BinaryLabel::absent;
      correct += pred == labels[start + i];
    }
  }
  EvalResult result;
  result.loss = loss_sum / static_cast<double>(images.size());
  result.accuracy = static_cast<double>(correct) / static_cast<double>(images.size());
  return result;
}

}  // namespace

std::pair<ProbeParameters, LearningCurve> train(const TrainConfig& config,
                                                const ProbeConfig& probe_config,
                                                const DatasetSplit& split) {
  config.validate();
  probe_config.validate();
  if (split.train.count(BinaryLabel::present) == 0 ||
      split.train.count(BinaryLabel::absent) == 0)
    fail(ErrorCode::degenerate_dataset, "training split is missing a class");

  const SeededRng rng(config.seed);
  ProbeParameters params = init_params(probe_config, rng.derive("init"));
  const SeededRng batches_rng = rng.derive("batches");

  const std::vector<ImageTensor> train_images =
      load_probe_inputs(split.train, probe_config.input_height, probe_config.input_width);
  std::vector<BinaryLabel> train_labels;
  train_labels.reserve(split.train.size());
  for (const auto& item : split.train.items) train_labels.push_back(item.label);

  std::vector<ImageTensor> val_images;
  std::vector<BinaryLabel> val_labels;
  if (config.eval_each_epoch && split.val.size() > 0) {
    val_images = load_probe_inputs(split.val, probe_config.input_height,
                                   probe_config.input_width);
    for (const auto& item : split.val.items) val_labels.push_back(item.label);
  }

  AdamState<float> state(params.values.size());
  std::vector<ImageTensor> batch_images(config.batch_size);
  std::vector<BinaryLabel> batch_labels(config.batch_size);
  LearningCurve curve;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& batch : epoch_batches(train_images.size(), config.batch_size,
                                           batches_rng, epoch)) {
      batch_images.resize(batch.size());
      batch_labels.resize(batch.size());
      for (size_t i = 0; i < batch.size(); ++i) {
        batch_images[i] = train_images[batch[i]];
        batch_labels[i] = train_labels[batch[i]];
      }
      auto [loss, grad] = loss_and_grad<float>(params, batch_images, batch_labels);
      if (!std::isfinite(loss))
        fail(ErrorCode::non_finite_loss,
             "training diverged at epoch " + std::to_string(epoch));
      adam_step(params.values, std::span<const float>(grad), state, config.learning_rate);
      loss_sum += loss * static_cast<double>(batch.size());
    }

    EpochRecord record;
    record.train_loss = loss_sum / static_cast<double>(train_images.size());
    if (!val_images.empty()) {
      const EvalResult val = eval_pass(params, val_images, val_labels);
      record.val_loss = val.loss;
      record.val_accuracy = val.accuracy;
    }
    if (config.eval_each_epoch) curve.push_back(record);
  }

  return {std::move(params), std::move(curve)};
}

ConfusionMatrix evaluate(const ProbeParameters& params, const LabeledDataset& dataset) {
  if (dataset.size() == 0)
    fail(ErrorCode::empty_dataset, "cannot evaluate on an empty dataset");

  const std::vector<ImageTensor> images = load_probe_inputs(
      dataset, params.config.input_height, params.config.input_width);

  ConfusionMatrix cm;
  constexpr size_t kChunk = 256;
  for (size_t start = 0; start < images.size(); start += kChunk) {
    const size_t len = std::min(kChunk, images.size() - start);
    const auto preds =
        predict(params, std::span<const ImageTensor>(images).subspan(start, len));
    for (size_t i = 0; i < len; ++i) {
      const bool truth = dataset.items[start + i].label == BinaryLabel::present;
      const bool pred = preds[i] == BinaryLabel::present;
      if (truth && pred) ++cm.tp;
      else if (!truth && pred) ++cm.fp;
      else if (truth && !pred) ++cm.fn;
      else ++cm.tn;
    }
  }
  return cm;
}

}  // namespace patchaudit
