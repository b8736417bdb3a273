#include "patchaudit/probe.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "patchaudit/errors.hpp"

namespace patchaudit {

const char* to_string(ProbeVariant variant) {
  return variant == ProbeVariant::linear ? "linear" : "patch_cnn";
}

ProbeVariant probe_variant_from_string(std::string_view name) {
  if (name == "patch_cnn") return ProbeVariant::patch_cnn;
  if (name == "linear") return ProbeVariant::linear;
  fail(ErrorCode::invalid_config, "unknown probe variant '" + std::string(name) + "'");
}

void ProbeConfig::validate() const {
  if (input_channels != 3)
    fail(ErrorCode::invalid_config, "probe inputs are 3-channel");
  if (variant == ProbeVariant::patch_cnn) {
    if (conv_widths.empty())
      fail(ErrorCode::invalid_config, "patch_cnn needs at least one conv width");
    for (int w : conv_widths)
      if (w < 1) fail(ErrorCode::invalid_config, "conv widths must be >= 1");
    if (fc_width < 1) fail(ErrorCode::invalid_config, "fc_width must be >= 1");
    if (pooled_grid < 1) fail(ErrorCode::invalid_config, "pooled_grid must be >= 1");
  }
  if (input_height < 1 || input_width < 1)
    fail(ErrorCode::invalid_config, "input dimensions must be >= 1");
}

namespace {

struct LayerInfo {
  std::string name;
  size_t offset = 0;
  size_t extent = 0;
  size_t fan_in = 0;  // 0 for biases
};

std::vector<LayerInfo> make_layer_info(const ProbeConfig& cfg) {
  cfg.validate();
  std::vector<LayerInfo> info;
  size_t offset = 0;
  auto push = [&](std::string name, size_t extent, size_t fan_in) {
    info.push_back({std::move(name), offset, extent, fan_in});
    offset += extent;
  };

  if (cfg.variant == ProbeVariant::linear) {
    const size_t flat = static_cast<size_t>(cfg.input_channels) * cfg.input_height *
                        cfg.input_width;
    push("linear.weight", 2 * flat, flat);
    push("linear.bias", 2, 0);
    return info;
  }

  int c_in = cfg.input_channels;
  for (size_t i = 0; i < cfg.conv_widths.size(); ++i) {
    const int c_out = cfg.conv_widths[i];
    const std::string base = "conv" + std::to_string(i + 1);
    push(base + ".weight", static_cast<size_t>(c_out) * c_in * 9,
         static_cast<size_t>(c_in) * 9);
    push(base + ".bias", static_cast<size_t>(c_out), 0);
    c_in = c_out;
  }
  const size_t fc1_in =
      static_cast<size_t>(c_in) * cfg.pooled_grid * cfg.pooled_grid;
  push("fc1.weight", static_cast<size_t>(cfg.fc_width) * fc1_in, fc1_in);
  push("fc1.bias", static_cast<size_t>(cfg.fc_width), 0);
  push("fc2.weight", 2 * static_cast<size_t>(cfg.fc_width),
       static_cast<size_t>(cfg.fc_width));
  push("fc2.bias", 2, 0);
  return info;
}

// ---- kernels ---------------------------------------------------------------
// dst[x] += k0*src[x-1] + k1*src[x] + k2*src[x+1], out-of-range taps dropped.
template <typename T>
inline void accumulate_shifted_row(T* dst, const T* src, int width, T k0, T k1, T k2) {
  if (width == 1) {
    dst[0] += k1 * src[0];
    return;
  }
  dst[0] += k1 * src[0] + k2 * src[1];
  for (int x = 1; x < width - 1; ++x)
    dst[x] += k0 * src[x - 1] + k1 * src[x] + k2 * src[x + 1];
  dst[width - 1] += k0 * src[width - 2] + k1 * src[width - 1];
}

// (s0,s1,s2) += sum_x d[x] * (src[x-1], src[x], src[x+1])
template <typename T>
inline void shifted_row_dots(const T* d, const T* src, int width, T& s0, T& s1, T& s2) {
  if (width == 1) {
    s1 += d[0] * src[0];
    return;
  }
  s1 += d[0] * src[0];
  s2 += d[0] * src[1];
  T a0 = 0, a1 = 0, a2 = 0;
  for (int x = 1; x < width - 1; ++x) {
    const T dx = d[x];
    a0 += dx * src[x - 1];
    a1 += dx * src[x];
    a2 += dx * src[x + 1];
  }
  s0 += a0 + d[width - 1] * src[width - 2];
  s1 += a1 + d[width - 1] * src[width - 1];
  s2 += a2;
}

template <typename T>
void conv3x3_forward(const Tensor3<T>& in, const T* w, const T* b, Tensor3<T>& out) {
  const int h = in.height, wd = in.width;
  for (int oc = 0; oc < out.channels; ++oc) {
    T* out_plane = out.plane(oc);
    std::fill(out_plane, out_plane + static_cast<size_t>(h) * wd, b[oc]);
    for (int ic = 0; ic < in.channels; ++ic) {
      const T* in_plane = in.plane(ic);
      const T* k = w + (static_cast<size_t>(oc) * in.channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y_begin = std::max(0, -dy);
        const int y_end = h - std::max(0, dy);
        const T k0 = k[ky * 3 + 0], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
        for (int y = y_begin; y < y_end; ++y)
          accumulate_shifted_row(out_plane + static_cast<size_t>(y) * wd,
                                 in_plane + static_cast<size_t>(y + dy) * wd, wd, k0, k1,
                                 k2);
      }
    }
  }
}

// d_in += conv weights applied to d_out with the kernel flipped.
template <typename T>
void conv3x3_backward_data(const Tensor3<T>& d_out, const T* w, Tensor3<T>& d_in) {
  const int h = d_in.height, wd = d_in.width;
  std::fill(d_in.data.begin(), d_in.data.end(), T(0));
  for (int ic = 0; ic < d_in.channels; ++ic) {
    T* din_plane = d_in.plane(ic);
    for (int oc = 0; oc < d_out.channels; ++oc) {
      const T* dout_plane = d_out.plane(oc);
      const T* k = w + (static_cast<size_t>(oc) * d_in.channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = 1 - ky;
        const int y_begin = std::max(0, -dy);
        const int y_end = h - std::max(0, dy);
        const T k0 = k[ky * 3 + 2], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 0];
        for (int y = y_begin; y < y_end; ++y)
          accumulate_shifted_row(din_plane + static_cast<size_t>(y) * wd,
                                 dout_plane + static_cast<size_t>(y + dy) * wd, wd, k0,
                                 k1, k2);
      }
    }
  }
}

template <typename T>
void conv3x3_backward_weights(const Tensor3<T>& in, const Tensor3<T>& d_out, T* dw,
                              T* db) {
  const int h = in.height, wd = in.width;
  for (int oc = 0; oc < d_out.channels; ++oc) {
    const T* dout_plane = d_out.plane(oc);
    T bias_sum = 0;
    for (size_t i = 0; i < static_cast<size_t>(h) * wd; ++i) bias_sum += dout_plane[i];
    db[oc] += bias_sum;
    for (int ic = 0; ic < in.channels; ++ic) {
      const T* in_plane = in.plane(ic);
      T* k = dw + (static_cast<size_t>(oc) * in.channels + ic) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y_begin = std::max(0, -dy);
        const int y_end = h - std::max(0, dy);
        T s0 = 0, s1 = 0, s2 = 0;
        for (int y = y_begin; y < y_end; ++y)
          shifted_row_dots(dout_plane + static_cast<size_t>(y) * wd,
                           in_plane + static_cast<size_t>(y + dy) * wd, wd, s0, s1, s2);
        k[ky * 3 + 0] += s0;
        k[ky * 3 + 1] += s1;
        k[ky * 3 + 2] += s2;
      }
    }
  }
}

template <typename T>
void relu_forward(const Tensor3<T>& in, Tensor3<T>& out) {
  for (size_t i = 0; i < in.data.size(); ++i)
    out.data[i] = in.data[i] > T(0) ? in.data[i] : T(0);
}

template <typename T>
void maxpool2_forward(const Tensor3<T>& in, Tensor3<T>& out, std::vector<int32_t>& argmax) {
  const int oh = out.height, ow = out.width, w = in.width;
  argmax.resize(out.size());
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.plane(c);
    T* dst = out.plane(c);
    int32_t* amax = argmax.data() + static_cast<size_t>(c) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        const int base = (2 * oy) * w + 2 * ox;
        int best = base;
        T best_v = src[base];
        for (int idx : {base + 1, base + w, base + w + 1}) {
          if (src[idx] > best_v) {
            best_v = src[idx];
            best = idx;
          }
        }
        dst[oy * ow + ox] = best_v;
        amax[oy * ow + ox] = best;
      }
  }
}

// Partition windows [i*H/g, (i+1)*H/g): every input cell belongs to exactly
// one window, so the backward pass is a plain scaled scatter.
template <typename T>
void adaptive_avgpool_forward(const Tensor3<T>& in, int g, Tensor3<T>& out) {
  for (int c = 0; c < in.channels; ++c) {
    const T* src = in.plane(c);
    T* dst = out.plane(c);
    for (int i = 0; i < g; ++i) {
      const int y0 = i * in.height / g, y1 = (i + 1) * in.height / g;
      for (int j = 0; j < g; ++j) {
        const int x0 = j * in.width / g, x1 = (j + 1) * in.width / g;
        T sum = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) sum += src[y * in.width + x];
        dst[i * g + j] = sum / static_cast<T>((y1 - y0) * (x1 - x0));
      }
    }
  }
}

template <typename T>
void adaptive_avgpool_backward(const Tensor3<T>& d_pooled, int g, Tensor3<T>& d_in) {
  std::fill(d_in.data.begin(), d_in.data.end(), T(0));
  for (int c = 0; c < d_in.channels; ++c) {
    const T* src = d_pooled.plane(c);
    T* dst = d_in.plane(c);
    for (int i = 0; i < g; ++i) {
      const int y0 = i * d_in.height / g, y1 = (i + 1) * d_in.height / g;
      for (int j = 0; j < g; ++j) {
        const int x0 = j * d_in.width / g, x1 = (j + 1) * d_in.width / g;
        const T v = src[i * g + j] / static_cast<T>((y1 - y0) * (x1 - x0));
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) dst[y * d_in.width + x] += v;
      }
    }
  }
}

template <typename T>
void fc_forward(const T* in, size_t n_in, const T* w, const T* b, T* out, size_t n_out) {
  for (size_t o = 0; o < n_out; ++o) {
    const T* row = w + o * n_in;
    T sum = b[o];
    for (size_t i = 0; i < n_in; ++i) sum += row[i] * in[i];
    out[o] = sum;
  }
}

template <typename T>
std::array<T, 2> softmax2(const std::array<T, 2>& z) {
  const T m = std::max(z[0], z[1]);
  const T e0 = std::exp(z[0] - m), e1 = std::exp(z[1] - m);
  const T s = e0 + e1;
  return {e0 / s, e1 / s};
}

// ---- network glue ----------------------------------------------------------

template <typename T, typename P>
struct NetView {
  struct Conv {
    P* w;
    P* b;
    int c_in, c_out;
  };
  std::vector<Conv> convs;
  P* fc1_w = nullptr;
  P* fc1_b = nullptr;
  P* fc2_w = nullptr;
  P* fc2_b = nullptr;
  P* linear_w = nullptr;
  P* linear_b = nullptr;
  size_t fc1_in = 0;
  size_t flat_in = 0;
  int fc_width = 0;
  int pooled_grid = 0;
  bool linear = false;
};

template <typename P, typename T>
NetView<std::remove_const_t<P>, P> make_view(const ProbeConfig& cfg, P* values,
                                             const std::vector<LayerShape>& layers,
                                             T /*tag*/) {
  NetView<std::remove_const_t<P>, P> view;
  view.linear = cfg.variant == ProbeVariant::linear;
  view.fc_width = cfg.fc_width;
  view.pooled_grid = cfg.pooled_grid;
  size_t li = 0;
  auto next = [&]() -> P* { return values + layers[li++].offset; };
  if (view.linear) {
    view.flat_in = static_cast<size_t>(cfg.input_channels) * cfg.input_height *
                   cfg.input_width;
    view.linear_w = next();
    view.linear_b = next();
    return view;
  }
  int c_in = cfg.input_channels;
  for (int c_out : cfg.conv_widths) {
    typename NetView<std::remove_const_t<P>, P>::Conv conv;
    conv.w = next();
    conv.b = next();
    conv.c_in = c_in;
    conv.c_out = c_out;
    view.convs.push_back(conv);
    c_in = c_out;
  }
  view.fc1_in = static_cast<size_t>(c_in) * cfg.pooled_grid * cfg.pooled_grid;
  view.fc1_w = next();
  view.fc1_b = next();
  view.fc2_w = next();
  view.fc2_b = next();
  return view;
}

template <typename T>
struct Workspace {
  struct Block {
    Tensor3<T> conv_out, relu_out, pool_out, d_pool;
    std::vector<int32_t> argmax;
  };
  Tensor3<T> centered;
  std::vector<Block> blocks;
  Tensor3<T> pooled, d_pooled;
  std::vector<T> fc1_pre, fc1_act, d_hidden;
};

// Reuse workspace storage across the batch instead of reallocating per image.
template <typename T>
void ensure_shape(Tensor3<T>& t, int c, int h, int w) {
  if (t.channels == c && t.height == h && t.width == w) return;
  t.channels = c;
  t.height = h;
  t.width = w;
  t.data.assign(static_cast<size_t>(c) * h * w, T(0));
}

// Shared shape check: all images 3-channel with the dims of the first, and the
// conv/pool stack must leave at least pooled_grid per side.
template <typename T>
void validate_batch(const ProbeConfig& cfg, std::span<const Tensor3<T>> batch) {
  if (batch.empty()) fail(ErrorCode::shape_mismatch, "empty batch");
  const int h = batch.front().height, w = batch.front().width;
  for (const auto& image : batch) {
    if (image.channels != 3)
      fail(ErrorCode::shape_mismatch, "probe inputs must have 3 channels");
    if (image.height != h || image.width != w)
      fail(ErrorCode::shape_mismatch, "all batch images must share dimensions");
    if (image.data.size() != static_cast<size_t>(image.channels) * h * w)
      fail(ErrorCode::shape_mismatch, "tensor data length does not match dims");
  }
  if (cfg.variant == ProbeVariant::linear) {
    if (h != cfg.input_height || w != cfg.input_width)
      fail(ErrorCode::shape_mismatch, "linear probe expects " +
                                          std::to_string(cfg.input_height) + "x" +
                                          std::to_string(cfg.input_width) + " inputs");
    return;
  }
  int sh = h, sw = w;
  for (size_t i = 0; i < cfg.conv_widths.size(); ++i) {
    sh /= 2;
    sw /= 2;
    if (sh < 1 || sw < 1)
      fail(ErrorCode::shape_mismatch, "input too small for the conv/pool stack");
  }
  if (sh < cfg.pooled_grid || sw < cfg.pooled_grid)
    fail(ErrorCode::shape_mismatch, "input too small for the pooled grid");
}

// Inputs are centered around mid-gray before the first layer. Without this the
// shared component of the logits (driven by the ~0.5 mean image level) swamps
// the small class-differential signal at the audit's constant learning rate.
template <typename T>
const Tensor3<T>& center_input(const Tensor3<T>& image, Workspace<T>& ws) {
  ensure_shape(ws.centered, image.channels, image.height, image.width);
  for (size_t i = 0; i < image.data.size(); ++i)
    ws.centered.data[i] = image.data[i] - T(0.5);
  return ws.centered;
}

template <typename T, typename P>
std::array<T, 2> forward_one(const NetView<T, P>& net, const Tensor3<T>& raw,
                             Workspace<T>& ws) {
  const Tensor3<T>& image = center_input(raw, ws);
  if (net.linear) {
    std::array<T, 2> logits;
    fc_forward(image.data.data(), net.flat_in, net.linear_w, net.linear_b, logits.data(),
               2);
    return logits;
  }

  ws.blocks.resize(net.convs.size());
  const Tensor3<T>* cur = &image;
  for (size_t i = 0; i < net.convs.size(); ++i) {
    auto& blk = ws.blocks[i];
    const auto& conv = net.convs[i];
    ensure_shape(blk.conv_out, conv.c_out, cur->height, cur->width);
    ensure_shape(blk.relu_out, conv.c_out, cur->height, cur->width);
    ensure_shape(blk.pool_out, conv.c_out, cur->height / 2, cur->width / 2);
    conv3x3_forward(*cur, conv.w, conv.b, blk.conv_out);
    relu_forward(blk.conv_out, blk.relu_out);
    maxpool2_forward(blk.relu_out, blk.pool_out, blk.argmax);
    cur = &blk.pool_out;
  }

  const int g = net.pooled_grid;
  ensure_shape(ws.pooled, cur->channels, g, g);
  adaptive_avgpool_forward(*cur, g, ws.pooled);

  ws.fc1_pre.resize(net.fc_width);
  ws.fc1_act.resize(net.fc_width);
  fc_forward(ws.pooled.data.data(), net.fc1_in, net.fc1_w, net.fc1_b, ws.fc1_pre.data(),
             net.fc_width);
  for (int j = 0; j < net.fc_width; ++j)
    ws.fc1_act[j] = ws.fc1_pre[j] > T(0) ? ws.fc1_pre[j] : T(0);

  std::array<T, 2> logits;
  fc_forward(ws.fc1_act.data(), static_cast<size_t>(net.fc_width), net.fc2_w, net.fc2_b,
             logits.data(), 2);
  return logits;
}

// Relies on ws still holding the trace of forward_one for the same image; the
// centered input buffer doubles as the first layer's input.
template <typename T, typename P, typename G>
void backward_one(const NetView<T, P>& net, NetView<T, G>& grad, Workspace<T>& ws,
                  const std::array<T, 2>& d_logits) {
  const Tensor3<T>& image = ws.centered;
  if (net.linear) {
    for (int k = 0; k < 2; ++k) {
      grad.linear_b[k] += d_logits[k];
      T* row = grad.linear_w + static_cast<size_t>(k) * net.flat_in;
      const T dk = d_logits[k];
      const T* x = image.data.data();
      for (size_t i = 0; i < net.flat_in; ++i) row[i] += dk * x[i];
    }
    return;
  }

  // head
  ws.d_hidden.assign(net.fc_width, T(0));
  for (int k = 0; k < 2; ++k) {
    grad.fc2_b[k] += d_logits[k];
    T* row = grad.fc2_w + static_cast<size_t>(k) * net.fc_width;
    const T* w_row = net.fc2_w + static_cast<size_t>(k) * net.fc_width;
    const T dk = d_logits[k];
    for (int j = 0; j < net.fc_width; ++j) {
      row[j] += dk * ws.fc1_act[j];
      ws.d_hidden[j] += dk * w_row[j];
    }
  }
  for (int j = 0; j < net.fc_width; ++j)
    if (ws.fc1_pre[j] <= T(0)) ws.d_hidden[j] = T(0);

  ensure_shape(ws.d_pooled, ws.pooled.channels, ws.pooled.height, ws.pooled.width);
  std::fill(ws.d_pooled.data.begin(), ws.d_pooled.data.end(), T(0));
  for (int j = 0; j < net.fc_width; ++j) {
    const T dj = ws.d_hidden[j];
    grad.fc1_b[j] += dj;
    if (dj == T(0)) continue;
    T* gw_row = grad.fc1_w + static_cast<size_t>(j) * net.fc1_in;
    const T* w_row = net.fc1_w + static_cast<size_t>(j) * net.fc1_in;
    const T* pooled = ws.pooled.data.data();
    T* dp = ws.d_pooled.data.data();
    for (size_t i = 0; i < net.fc1_in; ++i) {
      gw_row[i] += dj * pooled[i];
      dp[i] += dj * w_row[i];
    }
  }

  auto& last = ws.blocks.back();
  ensure_shape(last.d_pool, last.pool_out.channels, last.pool_out.height,
               last.pool_out.width);
  adaptive_avgpool_backward(ws.d_pooled, net.pooled_grid, last.d_pool);

  for (size_t bi = ws.blocks.size(); bi-- > 0;) {
    auto& blk = ws.blocks[bi];
    const auto& conv = net.convs[bi];
    const Tensor3<T>& input = bi == 0 ? image : ws.blocks[bi - 1].pool_out;

    // unpool + relu mask, reusing relu_out as the conv-gradient buffer
    Tensor3<T>& d_conv = blk.relu_out;
    std::fill(d_conv.data.begin(), d_conv.data.end(), T(0));
    const size_t plane = static_cast<size_t>(d_conv.height) * d_conv.width;
    for (int c = 0; c < blk.pool_out.channels; ++c) {
      const T* dp = blk.d_pool.plane(c);
      const int32_t* amax =
          blk.argmax.data() +
          static_cast<size_t>(c) * blk.pool_out.height * blk.pool_out.width;
      T* dst = d_conv.data.data() + static_cast<size_t>(c) * plane;
      const size_t n = static_cast<size_t>(blk.pool_out.height) * blk.pool_out.width;
      for (size_t i = 0; i < n; ++i) dst[amax[i]] += dp[i];
    }
    for (size_t i = 0; i < d_conv.data.size(); ++i)
      if (blk.conv_out.data[i] <= T(0)) d_conv.data[i] = T(0);

    conv3x3_backward_weights(input, d_conv, grad.convs[bi].w, grad.convs[bi].b);
    if (bi > 0) {
      auto& prev = ws.blocks[bi - 1];
      ensure_shape(prev.d_pool, prev.pool_out.channels, prev.pool_out.height,
                   prev.pool_out.width);
      conv3x3_backward_data(d_conv, conv.w, prev.d_pool);
    }
  }
}

}  // namespace

std::vector<LayerShape> probe_layer_table(const ProbeConfig& config) {
  std::vector<LayerShape> table;
  for (const auto& info : make_layer_info(config))
    table.push_back({info.name, info.offset, info.extent});
  return table;
}

size_t probe_param_count(const ProbeConfig& config) {
  const auto info = make_layer_info(config);
  return info.empty() ? 0 : info.back().offset + info.back().extent;
}

template <typename T>
std::span<const T> ProbeParams<T>::layer(std::string_view name) const {
  for (const auto& shape : layers)
    if (shape.name == name)
      return std::span<const T>(values.data() + shape.offset, shape.extent);
  fail(ErrorCode::invalid_config, "no layer named '" + std::string(name) + "'");
}

ProbeParameters init_params(const ProbeConfig& config, SeededRng rng) {
  const auto info = make_layer_info(config);
  ProbeParameters params;
  params.config = config;
  params.init_seed = rng.seed();
  params.values.assign(probe_param_count(config), 0.0f);
  for (const auto& layer : info) {
    params.layers.push_back({layer.name, layer.offset, layer.extent});
    if (layer.fan_in == 0) continue;  // biases stay zero
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.fan_in));
    for (size_t i = 0; i < layer.extent; ++i)
      params.values[layer.offset + i] =
          static_cast<float>((2.0 * rng.next_real() - 1.0) * limit);
  }
  return params;
}

template <typename T>
ProbeOutput<T> forward(const ProbeParams<T>& params, std::span<const Tensor3<T>> batch) {
  ProbeOutput<T> out;
  if (batch.empty()) return out;
  validate_batch<T>(params.config, batch);
  const auto view = make_view(params.config, params.values.data(), params.layers, T{});
  Workspace<T> ws;
  out.logits.reserve(batch.size());
  out.probabilities.reserve(batch.size());
  for (const auto& image : batch) {
    const auto logits = forward_one(view, image, ws);
    out.logits.push_back(logits);
    out.probabilities.push_back(softmax2(logits));
  }
  return out;
}

template <typename T>
std::pair<double, std::vector<T>> loss_and_grad(const ProbeParams<T>& params,
                                                std::span<const Tensor3<T>> batch,
                                                std::span<const BinaryLabel> labels) {
  if (batch.size() != labels.size())
    fail(ErrorCode::shape_mismatch, "batch and label counts differ");
  validate_batch<T>(params.config, batch);

  const auto view = make_view(params.config, params.values.data(), params.layers, T{});
  std::vector<T> grad(params.values.size(), T(0));
  auto grad_view = make_view(params.config, grad.data(), params.layers, T{});

  Workspace<T> ws;
  const T inv_batch = T(1) / static_cast<T>(batch.size());
  double loss = 0.0;
  for (size_t i = 0; i < batch.size(); ++i) {
    const auto logits = forward_one(view, batch[i], ws);
    const int truth = labels[i] == BinaryLabel::present ? 1 : 0;
    const T peak = std::max(logits[0], logits[1]);
    const T log_sum =
        peak + std::log(std::exp(logits[0] - peak) + std::exp(logits[1] - peak));
    loss += static_cast<double>(log_sum - logits[truth]);

    const auto probs = softmax2(logits);
    std::array<T, 2> d_logits = {probs[0] * inv_batch, probs[1] * inv_batch};
    d_logits[truth] -= inv_batch;
    backward_one(view, grad_view, ws, d_logits);
  }
  return {loss / static_cast<double>(batch.size()), std::move(grad)};
}

std::vector<BinaryLabel> predict(const ProbeParameters& params,
                                 std::span<const ImageTensor> batch) {
  std::vector<BinaryLabel> out;
  if (batch.empty()) return out;
  const auto result = forward<float>(params, batch);
  out.reserve(batch.size());
  for (const auto& probs : result.probabilities)
    out.push_back(probs[1] > probs[0] ? BinaryLabel::present : BinaryLabel::absent);
  return out;
}

namespace {

nlohmann::json probe_config_json(const ProbeConfig& cfg) {
  return nlohmann::json{{"variant", to_string(cfg.variant)},
                        {"input_channels", cfg.input_channels},
                        {"conv_widths", cfg.conv_widths},
                        {"fc_width", cfg.fc_width},
                        {"pooled_grid", cfg.pooled_grid},
                        {"input_height", cfg.input_height},
                        {"input_width", cfg.input_width}};
}

ProbeConfig probe_config_from_json(const nlohmann::json& j) {
  ProbeConfig cfg;
  cfg.variant = probe_variant_from_string(j.at("variant").get<std::string>());
  cfg.input_channels = j.at("input_channels").get<int>();
  cfg.conv_widths = j.at("conv_widths").get<std::vector<int>>();
  cfg.fc_width = j.at("fc_width").get<int>();
  cfg.pooled_grid = j.at("pooled_grid").get<int>();
  cfg.input_height = j.at("input_height").get<int>();
  cfg.input_width = j.at("input_width").get<int>();
  return cfg;
}

}  // namespace

void save_params(const ProbeParameters& params, const std::filesystem::path& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) fail(ErrorCode::io_failure, "cannot write " + path.string());
  for (float v : params.values) {
    const uint32_t bits = std::bit_cast<uint32_t>(v);
    const unsigned char bytes[4] = {
        static_cast<unsigned char>(bits & 0xFF),
        static_cast<unsigned char>((bits >> 8) & 0xFF),
        static_cast<unsigned char>((bits >> 16) & 0xFF),
        static_cast<unsigned char>((bits >> 24) & 0xFF)};
    bin.write(reinterpret_cast<const char*>(bytes), 4);
  }
  if (!bin) fail(ErrorCode::io_failure, "write failed for " + path.string());

  nlohmann::json sidecar;
  sidecar["format_version"] = 1;
  sidecar["dtype"] = "float32";
  sidecar["byte_order"] = "little";
  sidecar["init_seed"] = params.init_seed;
  sidecar["config"] = probe_config_json(params.config);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : params.layers)
    layers.push_back({{"name", layer.name}, {"offset", layer.offset},
                      {"extent", layer.extent}});
  sidecar["layers"] = layers;

  std::ofstream meta(path.string() + ".json");
  if (!meta) fail(ErrorCode::io_failure, "cannot write " + path.string() + ".json");
  meta << sidecar.dump(2) << '\n';
}

ProbeParameters load_params(const std::filesystem::path& path) {
  std::ifstream meta(path.string() + ".json");
  if (!meta) fail(ErrorCode::missing_path, path.string() + ".json");
  nlohmann::json sidecar;
  try {
    meta >> sidecar;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::io_failure, std::string("bad parameter sidecar: ") + e.what());
  }
  if (sidecar.value("format_version", 0) != 1)
    fail(ErrorCode::unsupported_format, "unknown parameter file version");

  ProbeParameters params;
  params.config = probe_config_from_json(sidecar.at("config"));
  params.init_seed = sidecar.value("init_seed", uint64_t{0});
  params.layers = probe_layer_table(params.config);

  std::ifstream bin(path, std::ios::binary);
  if (!bin) fail(ErrorCode::missing_path, path.string());
  const size_t count = probe_param_count(params.config);
  params.values.resize(count);
  for (size_t i = 0; i < count; ++i) {
    unsigned char bytes[4];
    bin.read(reinterpret_cast<char*>(bytes), 4);
    if (!bin) fail(ErrorCode::corrupt_image, "parameter file truncated");
    const uint32_t bits = static_cast<uint32_t>(bytes[0]) |
                          (static_cast<uint32_t>(bytes[1]) << 8) |
                          (static_cast<uint32_t>(bytes[2]) << 16) |
                          (static_cast<uint32_t>(bytes[3]) << 24);
    params.values[i] = std::bit_cast<float>(bits);
  }
  return params;
}

template struct ProbeParams<float>;
template struct ProbeParams<double>;
template ProbeOutput<float> forward<float>(const ProbeParams<float>&,
                                           std::span<const Tensor3<float>>);
template ProbeOutput<double> forward<double>(const ProbeParams<double>&,
                                             std::span<const Tensor3<double>>);
template std::pair<double, std::vector<float>> loss_and_grad<float>(
    const ProbeParams<float>&, std::span<const Tensor3<float>>,
    std::span<const BinaryLabel>);
template std::pair<double, std::vector<double>> loss_and_grad<double>(
    const ProbeParams<double>&, std::span<const Tensor3<double>>,
    std::span<const BinaryLabel>);

}  // namespace patchaudit
