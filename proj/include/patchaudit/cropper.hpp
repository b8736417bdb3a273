#pragma once

#include <filesystem>

#include "patchaudit/dataset.hpp"
#include "patchaudit/image.hpp"

namespace patchaudit {

// The five fixed patch locations.
enum class CropRegion {
  upper_left,
  upper_right,
  center,
  bottom_left,
  bottom_right,
};

inline constexpr CropRegion kCropRegions[] = {
    CropRegion::upper_left,  CropRegion::upper_right, CropRegion::center,
    CropRegion::bottom_left, CropRegion::bottom_right,
};

Region region_of(CropRegion crop);
CropRegion crop_region_of(Region region);  // rejects Region::original

struct CropSpec {
  int patch_height = 20;
  int patch_width = 20;
};

struct Offset {
  int y = 0;
  int x = 0;
};

// Corners sit flush with the image borders; center uses floor division.
Offset region_offset(CropRegion region, int image_h, int image_w, const CropSpec& spec);

// Exact sub-array copy, same channel count.
ImageTensor extract_patch(const ImageTensor& image, CropRegion region, const CropSpec& spec);

// Writes one PNG patch per source image under <out_dir>/<region_tag>/ plus a
// manifest.csv, and returns the derived dataset with identical ids, labels
// and ordering. Refuses to write into a non-empty directory unless overwrite
// is set.
LabeledDataset derive_crop_dataset(const LabeledDataset& dataset, CropRegion region,
                                   const CropSpec& spec,
                                   const std::filesystem::path& out_dir,
                                   bool overwrite = false);

// Manifest-level variant used by the crop CLI; preserves source class names.
DatasetManifest derive_crop_files(const DatasetManifest& manifest, CropRegion region,
                                  const CropSpec& spec,
                                  const std::filesystem::path& out_dir,
                                  bool overwrite = false);

// Half-pixel-centered bilinear interpolation; output stays within the input
// value range.
ImageTensor resize_bilinear(const ImageTensor& image, int out_h, int out_w);

// Grayscale replicated to three channels; 3-channel input passes through.
ImageTensor to_probe_input(const ImageTensor& image);

}  // namespace patchaudit
