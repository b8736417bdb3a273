#pragma once

#include <filesystem>

#include <json.hpp>

#include "patchaudit/dataset.hpp"
#include "patchaudit/image.hpp"
#include "patchaudit/rng.hpp"

namespace patchaudit {

// Per-class acquisition artifacts, all additive and clamped to [0,1].
struct ClassBias {
  double background_brightness_delta = 0.0;
  double noise_sigma = 0.0;
  double vignette_strength = 0.0;
  double corner_marker_probability = 0.0;
};

struct BiasSpec {
  ClassBias absent;
  ClassBias present;

  const ClassBias& for_label(BinaryLabel label) const {
    return label == BinaryLabel::present ? present : absent;
  }
  void validate() const;
};

struct LesionSpec {
  double center_jitter = 2.0;  // uniform offset of the ellipse center, per axis
  double radius_min = 5.0;
  double radius_max = 8.0;
  double intensity_min = 0.2;
  double intensity_max = 0.35;
};

// The lesion is confined to the central zone so the four 20x20 corner patches
// stay pure background by construction.
struct SceneSpec {
  int image_size = 64;
  int n_per_class = 500;
  LesionSpec lesion_absent;
  LesionSpec lesion_present;

  const LesionSpec& for_label(BinaryLabel label) const {
    return label == BinaryLabel::present ? lesion_present : lesion_absent;
  }
  void validate() const;  // throws InfeasibleScene when a lesion cannot fit
};

nlohmann::json to_json(const SceneSpec& scene, const BiasSpec& bias);
void from_json(const nlohmann::json& j, SceneSpec& scene, BiasSpec& bias);

struct SynthImage {
  ImageTensor image;
  std::vector<uint8_t> lesion_mask;  // height x width
};

// One composed sample: mid-gray + class brightness delta + vignette + noise +
// optional corner marker, lesion pixels painted last.
SynthImage render_synth_image(const SceneSpec& scene, const BiasSpec& bias,
                              BinaryLabel label, SeededRng& rng);

// Writes PNGs in directory-per-class layout plus manifest.csv, deterministic
// for a given seed.
LabeledDataset generate(const SceneSpec& scene, const BiasSpec& bias, const SeededRng& rng,
                        const std::filesystem::path& out_dir, bool overwrite = false);

}  // namespace patchaudit
