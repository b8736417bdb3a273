#include "patchaudit/audit.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "patchaudit/errors.hpp"

namespace fs = std::filesystem;

namespace patchaudit {

namespace {

const char* format_name(ManifestFormat format) {
  return format == ManifestFormat::csv_manifest ? "csv" : "dirs";
}

ManifestFormat format_from_name(const std::string& name) {
  if (name == "csv") return ManifestFormat::csv_manifest;
  if (name == "dirs") return ManifestFormat::directory_per_class;
  fail(ErrorCode::invalid_config, "unknown data format '" + name + "'");
}

nlohmann::json probe_json(const ProbeConfig& probe) {
  return {{"variant", to_string(probe.variant)},
          {"conv_widths", probe.conv_widths},
          {"fc_width", probe.fc_width},
          {"pooled_grid", probe.pooled_grid}};
}

ProbeConfig probe_from_json(const nlohmann::json& j) {
  ProbeConfig probe;
  probe.variant = probe_variant_from_string(j.value("variant", "patch_cnn"));
  probe.conv_widths = j.value("conv_widths", probe.conv_widths);
  probe.fc_width = j.value("fc_width", probe.fc_width);
  probe.pooled_grid = j.value("pooled_grid", probe.pooled_grid);
  return probe;
}

}  // namespace

void AuditConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorCode::invalid_config, "alpha must lie in (0,1)");
  if (seeds.empty()) fail(ErrorCode::invalid_config, "at least one seed is required");
  if (regions.empty()) fail(ErrorCode::invalid_config, "no regions selected");
  std::set<Region> unique(regions.begin(), regions.end());
  if (unique.size() != regions.size())
    fail(ErrorCode::invalid_config, "duplicate region in --regions");
  if (crop.patch_height < 1 || crop.patch_width < 1)
    fail(ErrorCode::invalid_config, "patch dimensions must be >= 1");
  if (original_input_size < 1)
    fail(ErrorCode::invalid_config, "original_input_size must be >= 1");
  split.validate();
  train.validate();
  probe.validate();
}

nlohmann::json AuditConfig::to_json() const {
  nlohmann::json j;
  j["data_path"] = data_path.generic_string();
  j["data_format"] = format_name(data_format);
  j["dataset_name"] = dataset_name;
  j["mapping"] = mapping.to_json();
  j["crop"] = {{"patch_height", crop.patch_height}, {"patch_width", crop.patch_width}};
  j["split"] = {{"train", split.train_fraction},
                {"val", split.val_fraction},
                {"test", split.test_fraction}};
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"epochs", train.epochs},
                {"eval_each_epoch", train.eval_each_epoch}};
  j["probe"] = probe_json(probe);
  j["balance"] = balance;
  j["balance_before_split"] = balance_before_split;
  j["alpha"] = alpha;
  j["bonferroni"] = bonferroni;
  j["seeds"] = seeds;
  nlohmann::json region_names = nlohmann::json::array();
  for (Region region : regions) region_names.push_back(to_string(region));
  j["regions"] = region_names;
  j["original_input_size"] = original_input_size;
  j["out_dir"] = out_dir.generic_string();
  return j;
}

AuditConfig AuditConfig::from_json(const nlohmann::json& j) {
  AuditConfig config;
  config.data_path = j.at("data_path").get<std::string>();
  config.data_format = format_from_name(j.value("data_format", "dirs"));
  config.dataset_name = j.value("dataset_name", "dataset");
  if (j.contains("mapping")) config.mapping = ClassMapping::from_json(j.at("mapping"));
  if (j.contains("crop")) {
    config.crop.patch_height = j.at("crop").value("patch_height", 20);
    config.crop.patch_width = j.at("crop").value("patch_width", 20);
  }
  if (j.contains("split")) {
    config.split.train_fraction = j.at("split").value("train", 0.8);
    config.split.val_fraction = j.at("split").value("val", 0.1);
    config.split.test_fraction = j.at("split").value("test", 0.1);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    config.train.learning_rate = t.value("learning_rate", 0.0001);
    config.train.batch_size = t.value("batch_size", 32);
    config.train.epochs = t.value("epochs", 30);
    config.train.eval_each_epoch = t.value("eval_each_epoch", true);
  }
  if (j.contains("probe")) config.probe = probe_from_json(j.at("probe"));
  config.balance = j.value("balance", false);
  config.balance_before_split = j.value("balance_before_split", true);
  config.alpha = j.value("alpha", 0.01);
  config.bonferroni = j.value("bonferroni", false);
  config.seeds = j.value("seeds", std::vector<uint64_t>{42});
  if (j.contains("regions")) {
    config.regions.clear();
    for (const auto& name : j.at("regions"))
      config.regions.push_back(region_from_string(name.get<std::string>()));
  }
  config.original_input_size = j.value("original_input_size", 64);
  config.out_dir = j.value("out_dir", std::string());
  return config;
}

namespace {

uint64_t crop_cache_key(const LabeledDataset& base, const CropSpec& spec) {
  uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001B3ULL;
    }
    h ^= 0xFF;
    h *= 0x100000001B3ULL;
  };
  mix("crop-cache-v1");
  mix(std::to_string(spec.patch_height));
  mix(std::to_string(spec.patch_width));
  for (const auto& item : base.items) {
    mix(item.image_id);
    mix(item.source.generic_string());
    mix(to_string(item.label));
  }
  return h;
}

std::optional<LabeledDataset> load_cached_crop(const fs::path& dir, Region region,
                                               const LabeledDataset& base,
                                               uint64_t key) {
  try {
    std::ifstream key_file(dir / "crop_key.json");
    if (!key_file) return std::nullopt;
    nlohmann::json j;
    key_file >> j;
    if (j.value("key", std::string()) != std::to_string(key)) return std::nullopt;

    const DatasetManifest manifest =
        load_manifest(dir / "manifest.csv", ManifestFormat::csv_manifest);
    if (manifest.rows.size() != base.items.size()) return std::nullopt;

    LabeledDataset dataset;
    dataset.name = base.name + "/" + to_string(region);
    dataset.region_tag = region;
    for (const auto& row : manifest.rows) {
      BinaryLabel label;
      if (row.class_name == "present") label = BinaryLabel::present;
      else if (row.class_name == "absent") label = BinaryLabel::absent;
      else return std::nullopt;
      dataset.items.push_back({fs::path(row.path).stem().string(),
                               manifest.root / row.path, label});
    }
    return dataset;
  } catch (const Error&) {
    return std::nullopt;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

LabeledDataset crop_arm_dataset(const LabeledDataset& base, Region region,
                                const AuditConfig& config) {
  const fs::path crop_root = config.out_dir.empty()
                                 ? fs::temp_directory_path() / "patchaudit_crop_cache"
                                 : config.out_dir / "crops";
  const fs::path dir = crop_root / to_string(region);
  const uint64_t key = crop_cache_key(base, config.crop);

  if (auto cached = load_cached_crop(dir, region, base, key)) return *cached;

  std::error_code ec;
  fs::remove_all(dir, ec);
  LabeledDataset derived = derive_crop_dataset(base, crop_region_of(region), config.crop,
                                               crop_root, /*overwrite=*/true);
  std::ofstream key_file(dir / "crop_key.json");
  key_file << nlohmann::json{{"key", std::to_string(key)}}.dump() << '\n';
  return derived;
}

SeedRunResult run_arm(const AuditConfig& config, Region region,
                      const LabeledDataset& dataset, uint64_t seed,
                      double effective_alpha) {
  const SeededRng arm_rng =
      SeededRng(seed).derive(std::string("region:") + to_string(region));

  LabeledDataset working = dataset;
  if (config.balance && config.balance_before_split)
    working = balance_classes(working, arm_rng.derive("balance"));

  DatasetSplit split = stratified_split(working, config.split, arm_rng.derive("split"));
  if (config.balance && !config.balance_before_split) {
    split.train = balance_classes(split.train, arm_rng.derive("balance:train"));
    split.val = balance_classes(split.val, arm_rng.derive("balance:val"));
    split.test = balance_classes(split.test, arm_rng.derive("balance:test"));
  }

  ProbeConfig probe = config.probe;
  if (region == Region::original) {
    probe.input_height = config.original_input_size;
    probe.input_width = config.original_input_size;
  } else {
    probe.input_height = config.crop.patch_height;
    probe.input_width = config.crop.patch_width;
  }

  TrainConfig train_config = config.train;
  train_config.seed = arm_rng.derive_seed("train");

  auto [params, curve] = train(train_config, probe, split);

  SeedRunResult run;
  run.seed = seed;
  run.train_size = static_cast<int>(split.train.size());
  run.val_size = static_cast<int>(split.val.size());
  run.test_size = static_cast<int>(split.test.size());
  run.val_metrics = metric_set(evaluate(params, split.val));
  const ConfusionMatrix cm_test = evaluate(params, split.test);
  run.test_metrics = metric_set(cm_test);
  run.baselines = chance_baselines(split.test);
  run.curve = std::move(curve);

  run.p_value_fixed = binomial_exceedance(cm_test.correct(), cm_test.total(), 0.5);
  if (run.baselines.majority_rate < 1.0) {
    run.p_value_majority = binomial_exceedance(cm_test.correct(), cm_test.total(),
                                               run.baselines.majority_rate);
  } else {
    run.p_value_majority = 1.0;  // single-class test sets never flag
  }
  run.flagged = run.test_metrics.accuracy > run.baselines.majority_rate &&
                run.p_value_majority < effective_alpha;

  if (!config.out_dir.empty()) {
    const fs::path params_dir = config.out_dir / "params";
    std::error_code ec;
    fs::create_directories(params_dir, ec);
    if (!ec) {
      const std::string file =
          std::string(to_string(region)) + "_seed" + std::to_string(seed) + ".bin";
      save_params(params, params_dir / file);
    }
  }
  return run;
}

}  // namespace

AuditReport run_audit(const AuditConfig& config) {
  config.validate();

  const DatasetManifest manifest = load_manifest(config.data_path, config.data_format);
  const LabeledDataset base = remap_labels(manifest, config.mapping, config.dataset_name);
  if (base.count(BinaryLabel::present) == 0 || base.count(BinaryLabel::absent) == 0)
    fail(ErrorCode::degenerate_dataset,
         "'" + config.dataset_name + "' must contain both classes after mapping");

  size_t crop_region_count = 0;
  for (Region region : config.regions) crop_region_count += region != Region::original;
  const double effective_alpha =
      config.bonferroni && crop_region_count > 0
          ? config.alpha / static_cast<double>(crop_region_count)
          : config.alpha;

  AuditReport report;
  report.toolkit_version = kToolkitVersion;
  report.rng_algorithm = std::string(SeededRng::kAlgorithm);
  report.config = config;
  report.total_items = base.size();
  report.present_items = base.count(BinaryLabel::present);
  report.absent_items = base.count(BinaryLabel::absent);

  for (Region region : config.regions) {
    try {
      const LabeledDataset arm_dataset =
          region == Region::original ? base : crop_arm_dataset(base, region, config);

      RegionResult result;
      result.region = region;
      size_t flag_votes = 0;
      double accuracy_sum = 0.0;
      for (uint64_t seed : config.seeds) {
        SeedRunResult run = run_arm(config, region, arm_dataset, seed, effective_alpha);
        flag_votes += run.flagged;
        accuracy_sum += run.test_metrics.accuracy;
        result.runs.push_back(std::move(run));
      }
      result.flagged = 2 * flag_votes > config.seeds.size();
      result.mean_test_accuracy = accuracy_sum / static_cast<double>(config.seeds.size());
      report.regions.push_back(std::move(result));
    } catch (const Error& e) {
      fail(e.code(), std::string("region '") + to_string(region) + "': " + e.what());
    }
  }

  const RegionResult* original = nullptr;
  for (const auto& result : report.regions)
    if (result.region == Region::original) original = &result;

  bool any_crop_flagged = false;
  for (const auto& result : report.regions) {
    if (result.region == Region::original) continue;
    any_crop_flagged = any_crop_flagged || result.flagged;
    if (original)
      report.deltas.push_back(
          {result.region, original->mean_test_accuracy - result.mean_test_accuracy});
  }
  report.verdict = any_crop_flagged ? "biased" : "not_flagged";
  return report;
}

}  // namespace patchaudit
