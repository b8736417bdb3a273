#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "patchaudit/dataset.hpp"
#include "patchaudit/image.hpp"
#include "patchaudit/rng.hpp"

namespace patchaudit {

enum class ProbeVariant { patch_cnn, linear };

const char* to_string(ProbeVariant variant);
ProbeVariant probe_variant_from_string(std::string_view name);

// patch_cnn runs [conv3x3 pad 1 -> ReLU -> maxpool 2x2] per conv width, then
// an adaptive average pool to pooled_grid^2, a hidden fully-connected layer
// and a two-logit head with softmax. The adaptive pool makes the parameter
// count independent of the input resolution, so one architecture serves both
// 20x20 patches and resized originals. The linear variant flattens the input
// straight into the two-logit head. Both variants center inputs around
// mid-gray (x - 0.5) before the first layer.
struct ProbeConfig {
  ProbeVariant variant = ProbeVariant::patch_cnn;
  int input_channels = 3;
  std::vector<int> conv_widths{16, 32};
  int fc_width = 64;
  int pooled_grid = 5;
  int input_height = 20;  // the linear variant's flatten size; patch_cnn
  int input_width = 20;   // accepts any input that survives the pool stack

  void validate() const;
};

struct LayerShape {
  std::string name;
  size_t offset = 0;
  size_t extent = 0;
};

std::vector<LayerShape> probe_layer_table(const ProbeConfig& config);
size_t probe_param_count(const ProbeConfig& config);

// Flat parameter vector plus the table that carves it into layers. float is
// the training precision; the double instantiation backs gradient checks.
template <typename T>
struct ProbeParams {
  ProbeConfig config;
  uint64_t init_seed = 0;
  std::vector<LayerShape> layers;
  std::vector<T> values;

  std::span<const T> layer(std::string_view name) const;

  template <typename U>
  ProbeParams<U> cast() const {
    ProbeParams<U> out;
    out.config = config;
    out.init_seed = init_seed;
    out.layers = layers;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

using ProbeParameters = ProbeParams<float>;

// Weights uniform in +/- sqrt(6 / fan_in), biases zero.
ProbeParameters init_params(const ProbeConfig& config, SeededRng rng);

template <typename T>
struct ProbeOutput {
  std::vector<std::array<T, 2>> logits;
  std::vector<std::array<T, 2>> probabilities;  // softmax(logits)
};

template <typename T>
ProbeOutput<T> forward(const ProbeParams<T>& params, std::span<const Tensor3<T>> batch);

// Mean softmax cross-entropy over the batch and its full analytic gradient.
template <typename T>
std::pair<double, std::vector<T>> loss_and_grad(const ProbeParams<T>& params,
                                                std::span<const Tensor3<T>> batch,
                                                std::span<const BinaryLabel> labels);

// argmax of the probabilities; exact ties resolve to "absent".
std::vector<BinaryLabel> predict(const ProbeParameters& params,
                                 std::span<const ImageTensor> batch);

// Flat little-endian float32 file plus a versioned JSON shape-table sidecar
// at <path>.json.
void save_params(const ProbeParameters& params, const std::filesystem::path& path);
ProbeParameters load_params(const std::filesystem::path& path);

extern template struct ProbeParams<float>;
extern template struct ProbeParams<double>;
extern template ProbeOutput<float> forward<float>(const ProbeParams<float>&,
                                                  std::span<const Tensor3<float>>);
extern template ProbeOutput<double> forward<double>(const ProbeParams<double>&,
                                                    std::span<const Tensor3<double>>);
extern template std::pair<double, std::vector<float>> loss_and_grad<float>(
    const ProbeParams<float>&, std::span<const Tensor3<float>>,
    std::span<const BinaryLabel>);
extern template std::pair<double, std::vector<double>> loss_and_grad<double>(
    const ProbeParams<double>&, std::span<const Tensor3<double>>,
    std::span<const BinaryLabel>);

}  // namespace patchaudit
