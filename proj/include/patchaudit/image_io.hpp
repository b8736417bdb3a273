#pragma once

#include <filesystem>

#include "patchaudit/image.hpp"

namespace patchaudit {

// PNG or JPEG, sniffed by signature. 8-bit samples map to v/255; grayscale
// stays single-channel, alpha is dropped.
ImageTensor decode_image(const std::filesystem::path& path);

// 8-bit PNG, grayscale or RGB depending on channel count. round(v*255).
void save_png(const ImageTensor& image, const std::filesystem::path& path);

}  // namespace patchaudit
