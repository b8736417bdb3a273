#include "patchaudit/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "patchaudit/errors.hpp"
#include "patchaudit/image_io.hpp"

namespace fs = std::filesystem;

namespace patchaudit {

namespace {

constexpr int kCornerMargin = 20;  // the fixed 20x20 corner patch footprint

void validate_lesion(const LesionSpec& lesion, int image_size, const char* label) {
  if (lesion.radius_min < 1.0 || lesion.radius_max < lesion.radius_min)
    fail(ErrorCode::invalid_config, std::string(label) + ": bad radius range");
  if (lesion.center_jitter < 0.0)
    fail(ErrorCode::invalid_config, std::string(label) + ": negative jitter");
  // Bounding box must stay inside the central zone that no corner patch touches.
  const double reach = lesion.center_jitter + lesion.radius_max;
  if (image_size / 2.0 - reach < kCornerMargin)
    fail(ErrorCode::infeasible_scene,
         std::string(label) + ": lesion (jitter " + std::to_string(lesion.center_jitter) +
             " + radius " + std::to_string(lesion.radius_max) +
             ") can reach the corner patches of a " + std::to_string(image_size) +
             "px image");
}

}  // namespace

void BiasSpec::validate() const {
  for (const ClassBias* bias : {&absent, &present}) {
    if (bias->corner_marker_probability < 0.0 || bias->corner_marker_probability > 1.0)
      fail(ErrorCode::invalid_config, "corner_marker_probability must lie in [0,1]");
    if (bias->noise_sigma < 0.0)
      fail(ErrorCode::invalid_config, "noise_sigma must be >= 0");
  }
}

void SceneSpec::validate() const {
  if (image_size < 2 * kCornerMargin + 1)
    fail(ErrorCode::invalid_config,
         "image_size must be at least " + std::to_string(2 * kCornerMargin + 1));
  if (n_per_class < 1) fail(ErrorCode::invalid_config, "n_per_class must be >= 1");
  validate_lesion(lesion_absent, image_size, "absent lesion");
  validate_lesion(lesion_present, image_size, "present lesion");
}

namespace {

nlohmann::json lesion_json(const LesionSpec& l) {
  return {{"center_jitter", l.center_jitter},
          {"radius_min", l.radius_min},
          {"radius_max", l.radius_max},
          {"intensity_min", l.intensity_min},
          {"intensity_max", l.intensity_max}};
}

LesionSpec lesion_from_json(const nlohmann::json& j) {
  LesionSpec l;
  l.center_jitter = j.value("center_jitter", l.center_jitter);
  l.radius_min = j.value("radius_min", l.radius_min);
  l.radius_max = j.value("radius_max", l.radius_max);
  l.intensity_min = j.value("intensity_min", l.intensity_min);
  l.intensity_max = j.value("intensity_max", l.intensity_max);
  return l;
}

nlohmann::json class_bias_json(const ClassBias& b) {
  return {{"background_brightness_delta", b.background_brightness_delta},
          {"noise_sigma", b.noise_sigma},
          {"vignette_strength", b.vignette_strength},
          {"corner_marker_probability", b.corner_marker_probability}};
}

ClassBias class_bias_from_json(const nlohmann::json& j) {
  ClassBias b;
  b.background_brightness_delta =
      j.value("background_brightness_delta", b.background_brightness_delta);
  b.noise_sigma = j.value("noise_sigma", b.noise_sigma);
  b.vignette_strength = j.value("vignette_strength", b.vignette_strength);
  b.corner_marker_probability =
      j.value("corner_marker_probability", b.corner_marker_probability);
  return b;
}

}  // namespace

nlohmann::json to_json(const SceneSpec& scene, const BiasSpec& bias) {
  nlohmann::json j;
  j["scene"] = {{"image_size", scene.image_size},
                {"n_per_class", scene.n_per_class},
                {"lesion_absent", lesion_json(scene.lesion_absent)},
                {"lesion_present", lesion_json(scene.lesion_present)}};
  j["bias"] = {{"absent", class_bias_json(bias.absent)},
               {"present", class_bias_json(bias.present)}};
  return j;
}

void from_json(const nlohmann::json& j, SceneSpec& scene, BiasSpec& bias) {
  if (j.contains("scene")) {
    const auto& s = j.at("scene");
    scene.image_size = s.value("image_size", scene.image_size);
    scene.n_per_class = s.value("n_per_class", scene.n_per_class);
    if (s.contains("lesion_absent")) scene.lesion_absent = lesion_from_json(s.at("lesion_absent"));
    if (s.contains("lesion_present"))
      scene.lesion_present = lesion_from_json(s.at("lesion_present"));
  }
  if (j.contains("bias")) {
    const auto& b = j.at("bias");
    if (b.contains("absent")) bias.absent = class_bias_from_json(b.at("absent"));
    if (b.contains("present")) bias.present = class_bias_from_json(b.at("present"));
  }
}

SynthImage render_synth_image(const SceneSpec& scene, const BiasSpec& bias,
                              BinaryLabel label, SeededRng& rng) {
  const int n = scene.image_size;
  const ClassBias& class_bias = bias.for_label(label);
  const LesionSpec& lesion = scene.for_label(label);

  // Draw order is fixed; renders are reproducible from the stream alone.
  const double jitter_y = (2.0 * rng.next_real() - 1.0) * lesion.center_jitter;
  const double jitter_x = (2.0 * rng.next_real() - 1.0) * lesion.center_jitter;
  const double radius_y =
      lesion.radius_min + rng.next_real() * (lesion.radius_max - lesion.radius_min);
  const double radius_x =
      lesion.radius_min + rng.next_real() * (lesion.radius_max - lesion.radius_min);
  const double intensity =
      lesion.intensity_min + rng.next_real() * (lesion.intensity_max - lesion.intensity_min);
  const bool marker = rng.next_real() < class_bias.corner_marker_probability;

  SynthImage out;
  out.image = ImageTensor(3, n, n);
  out.lesion_mask.assign(static_cast<size_t>(n) * n, 0);

  const double center = (n - 1) / 2.0;
  const double cy = center + jitter_y;
  const double cx = center + jitter_x;
  const double max_dist2 = 2.0 * center * center;

  for (int c = 0; c < 3; ++c) {
    float* plane = out.image.plane(c);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        double v = 0.5 + class_bias.background_brightness_delta;
        if (class_bias.vignette_strength != 0.0) {
          const double d2 =
              (y - center) * (y - center) + (x - center) * (x - center);
          v -= class_bias.vignette_strength * d2 / max_dist2;
        }
        if (class_bias.noise_sigma != 0.0)
          v += class_bias.noise_sigma * rng.next_gaussian();
        plane[static_cast<size_t>(y) * n + x] = static_cast<float>(v);
      }
  }

  if (marker) {
    // 3x3 white stamp inside the upper-left patch footprint
    for (int y = 3; y < 6; ++y)
      for (int x = 3; x < 6; ++x)
        for (int c = 0; c < 3; ++c) out.image.at(c, y, x) = 1.0f;
  }

  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double ny = (y - cy) / radius_y;
      const double nx = (x - cx) / radius_x;
      if (ny * ny + nx * nx <= 1.0) {
        out.lesion_mask[static_cast<size_t>(y) * n + x] = 1;
        for (int c = 0; c < 3; ++c)
          out.image.at(c, y, x) = static_cast<float>(intensity);
      }
    }

  for (float& v : out.image.data) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

LabeledDataset generate(const SceneSpec& scene, const BiasSpec& bias, const SeededRng& rng,
                        const fs::path& out_dir, bool overwrite) {
  scene.validate();
  bias.validate();

  if (fs::exists(out_dir) && !fs::is_empty(out_dir) && !overwrite)
    fail(ErrorCode::io_failure,
         out_dir.string() + " already contains files; pass overwrite to replace them");

  LabeledDataset dataset;
  dataset.name = "synthetic";
  dataset.region_tag = Region::original;

  DatasetManifest manifest;
  manifest.root = out_dir;
  manifest.format = ManifestFormat::csv_manifest;

  char id_buf[32];
  for (BinaryLabel label : {BinaryLabel::absent, BinaryLabel::present}) {
    const fs::path class_dir = out_dir / to_string(label);
    std::error_code ec;
    fs::create_directories(class_dir, ec);
    if (ec) fail(ErrorCode::io_failure, "cannot create " + class_dir.string());

    for (int i = 0; i < scene.n_per_class; ++i) {
      std::snprintf(id_buf, sizeof id_buf, "%s_%06d", to_string(label), i);
      SeededRng image_rng = rng.derive(std::string("img:") + id_buf);
      const SynthImage sample = render_synth_image(scene, bias, label, image_rng);

      const std::string file = std::string(to_string(label)) + "/" + id_buf + ".png";
      save_png(sample.image, out_dir / file);
      manifest.rows.push_back({file, to_string(label)});
      dataset.items.push_back({id_buf, out_dir / file, label});
    }
  }

  write_manifest_csv(manifest, out_dir / "manifest.csv");
  return dataset;
}

}  // namespace patchaudit
