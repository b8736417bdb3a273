#include "patchaudit/cropper.hpp"

#include <algorithm>
#include <cmath>

#include "patchaudit/errors.hpp"
#include "patchaudit/image_io.hpp"

namespace fs = std::filesystem;

namespace patchaudit {

Region region_of(CropRegion crop) {
  switch (crop) {
    case CropRegion::upper_left: return Region::upper_left;
    case CropRegion::upper_right: return Region::upper_right;
    case CropRegion::center: return Region::center;
    case CropRegion::bottom_left: return Region::bottom_left;
    case CropRegion::bottom_right: return Region::bottom_right;
  }
  return Region::center;
}

CropRegion crop_region_of(Region region) {
  switch (region) {
    case Region::upper_left: return CropRegion::upper_left;
    case Region::upper_right: return CropRegion::upper_right;
    case Region::center: return CropRegion::center;
    case Region::bottom_left: return CropRegion::bottom_left;
    case Region::bottom_right: return CropRegion::bottom_right;
    case Region::original: break;
  }
  fail(ErrorCode::invalid_config, "'original' is not a crop region");
}

Offset region_offset(CropRegion region, int image_h, int image_w, const CropSpec& spec) {
  if (spec.patch_height < 1 || spec.patch_width < 1)
    fail(ErrorCode::invalid_config, "patch dimensions must be >= 1");
  if (image_h < spec.patch_height || image_w < spec.patch_width)
    fail(ErrorCode::image_too_small,
         std::to_string(image_h) + "x" + std::to_string(image_w) +
             " image cannot hold a " + std::to_string(spec.patch_height) + "x" +
             std::to_string(spec.patch_width) + " patch");

  const int max_y = image_h - spec.patch_height;
  const int max_x = image_w - spec.patch_width;
  switch (region) {
    case CropRegion::upper_left: return {0, 0};
    case CropRegion::upper_right: return {0, max_x};
    case CropRegion::center: return {max_y / 2, max_x / 2};
    case CropRegion::bottom_left: return {max_y, 0};
    case CropRegion::bottom_right: return {max_y, max_x};
  }
  return {0, 0};
}

ImageTensor extract_patch(const ImageTensor& image, CropRegion region, const CropSpec& spec) {
  const Offset off = region_offset(region, image.height, image.width, spec);
  ImageTensor patch(image.channels, spec.patch_height, spec.patch_width);
  for (int c = 0; c < image.channels; ++c)
    for (int y = 0; y < spec.patch_height; ++y) {
      const float* src = image.plane(c) + static_cast<size_t>(off.y + y) * image.width + off.x;
      float* dst = patch.plane(c) + static_cast<size_t>(y) * spec.patch_width;
      std::copy(src, src + spec.patch_width, dst);
    }
  return patch;
}

namespace {

fs::path prepare_region_dir(const fs::path& out_dir, Region tag, bool overwrite) {
  const fs::path dir = out_dir / to_string(tag);
  if (fs::exists(dir) && !fs::is_empty(dir) && !overwrite)
    fail(ErrorCode::io_failure,
         dir.string() + " already contains files; pass overwrite to replace them");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_failure, "cannot create " + dir.string());
  return dir;
}

}  // namespace

LabeledDataset derive_crop_dataset(const LabeledDataset& dataset, CropRegion region,
                                   const CropSpec& spec, const fs::path& out_dir,
                                   bool overwrite) {
  if (dataset.region_tag != Region::original)
    fail(ErrorCode::invalid_config, "crops derive from the original dataset only");

  const Region tag = region_of(region);
  const fs::path dir = prepare_region_dir(out_dir, tag, overwrite);

  LabeledDataset derived;
  derived.name = dataset.name + "/" + to_string(tag);
  derived.region_tag = tag;
  derived.items.reserve(dataset.items.size());

  DatasetManifest manifest;
  manifest.root = dir;
  manifest.format = ManifestFormat::csv_manifest;

  for (const auto& item : dataset.items) {
    ImageTensor patch;
    try {
      patch = extract_patch(decode_image(item.source), region, spec);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::image_too_small)
        fail(ErrorCode::image_too_small, "image '" + item.image_id + "': " + e.what());
      throw;
    }
    const std::string file = item.image_id + ".png";
    save_png(patch, dir / file);
    manifest.rows.push_back({file, to_string(item.label)});
    derived.items.push_back({item.image_id, dir / file, item.label});
  }

  write_manifest_csv(manifest, dir / "manifest.csv");
  return derived;
}

DatasetManifest derive_crop_files(const DatasetManifest& manifest, CropRegion region,
                                  const CropSpec& spec, const fs::path& out_dir,
                                  bool overwrite) {
  const Region tag = region_of(region);
  const fs::path dir = prepare_region_dir(out_dir, tag, overwrite);

  DatasetManifest derived;
  derived.root = dir;
  derived.format = ManifestFormat::csv_manifest;

  char index_buf[16];
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    const ImageTensor patch = extract_patch(decode_image(manifest.root / row.path), region, spec);
    std::snprintf(index_buf, sizeof index_buf, "%06zu", i);
    const std::string file = std::string(index_buf) + ".png";
    save_png(patch, dir / file);
    derived.rows.push_back({file, row.class_name});
  }

  write_manifest_csv(derived, dir / "manifest.csv");
  return derived;
}

ImageTensor resize_bilinear(const ImageTensor& image, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    fail(ErrorCode::invalid_config, "target dimensions must be >= 1");

  ImageTensor out(image.channels, out_h, out_w);
  const double scale_y = static_cast<double>(image.height) / out_h;
  const double scale_x = static_cast<double>(image.width) / out_w;

  for (int y = 0; y < out_h; ++y) {
    double sy = (y + 0.5) * scale_y - 0.5;
    sy = std::clamp(sy, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      double sx = (x + 0.5) * scale_x - 0.5;
      sx = std::clamp(sx, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = (1.0 - fx) * image.at(c, y0, x0) + fx * image.at(c, y0, x1);
        const double bottom = (1.0 - fx) * image.at(c, y1, x0) + fx * image.at(c, y1, x1);
        out.at(c, y, x) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

ImageTensor to_probe_input(const ImageTensor& image) {
  if (image.channels == 3) return image;
  if (image.channels != 1)
    fail(ErrorCode::unsupported_channel_count,
         "expected 1 or 3 channels, got " + std::to_string(image.channels));

  ImageTensor out(3, image.height, image.width);
  const size_t plane = static_cast<size_t>(image.height) * image.width;
  for (int c = 0; c < 3; ++c)
    std::copy(image.data.begin(), image.data.end(), out.data.begin() + c * plane);
  return out;
}

}  // namespace patchaudit
