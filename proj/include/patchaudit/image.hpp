#pragma once

#include <cstddef>
#include <vector>

namespace patchaudit {

// Dense raster, channel-major then row-major. Pixel values live in [0, 1].
// float is the working precision; tests instantiate double for gradient
// checking.
template <typename T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w),
        data(static_cast<size_t>(c) * h * w, fill) {}

  size_t size() const { return data.size(); }

  size_t index(int c, int y, int x) const {
    return (static_cast<size_t>(c) * height + y) * width + x;
  }

  T& at(int c, int y, int x) { return data[index(c, y, x)]; }
  const T& at(int c, int y, int x) const { return data[index(c, y, x)]; }

  T* plane(int c) { return data.data() + static_cast<size_t>(c) * height * width; }
  const T* plane(int c) const {
    return data.data() + static_cast<size_t>(c) * height * width;
  }

  bool same_shape(const Tensor3& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }
};

using ImageTensor = Tensor3<float>;

inline Tensor3<double> to_double(const ImageTensor& image) {
  Tensor3<double> out(image.channels, image.height, image.width);
  for (size_t i = 0; i < image.data.size(); ++i)
    out.data[i] = static_cast<double>(image.data[i]);
  return out;
}

}  // namespace patchaudit
