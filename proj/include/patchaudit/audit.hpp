#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "patchaudit/cropper.hpp"
#include "patchaudit/dataset.hpp"
#include "patchaudit/metrics.hpp"
#include "patchaudit/optim.hpp"
#include "patchaudit/probe.hpp"
#include "patchaudit/sampling.hpp"

namespace patchaudit {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

struct AuditConfig {
  std::filesystem::path data_path;
  ManifestFormat data_format = ManifestFormat::directory_per_class;
  std::string dataset_name = "dataset";
  ClassMapping mapping = ClassMapping::from_sets({"present"}, {"absent"});
  CropSpec crop;
  SplitSpec split;
  TrainConfig train;  // train.seed is ignored; per-arm streams come from seeds
  ProbeConfig probe;  // input dims are set per arm
  bool balance = false;
  bool balance_before_split = true;  // the alternative balances each part
  double alpha = 0.01;
  bool bonferroni = false;  // divide alpha by the number of crop regions audited
  std::vector<uint64_t> seeds{42};
  std::vector<Region> regions{kAllRegions, kAllRegions + 6};
  int original_input_size = 64;  // the original arm resizes to this square
  std::filesystem::path out_dir;  // params and crop cache land here; empty = temp cache

  void validate() const;
  nlohmann::json to_json() const;
  static AuditConfig from_json(const nlohmann::json& j);
};

// One training run of one region arm under one seed.
struct SeedRunResult {
  uint64_t seed = 0;
  int train_size = 0;
  int val_size = 0;
  int test_size = 0;
  MetricSet val_metrics;
  MetricSet test_metrics;
  ChanceBaselines baselines;  // of the test split
  double p_value_majority = 1.0;
  double p_value_fixed = 1.0;
  bool flagged = false;  // test accuracy > majority rate and p_majority < alpha
  LearningCurve curve;
};

struct RegionResult {
  Region region = Region::original;
  std::vector<SeedRunResult> runs;  // one per configured seed
  bool flagged = false;             // majority vote across runs
  double mean_test_accuracy = 0.0;
};

struct RegionDelta {
  Region region = Region::original;
  double accuracy_delta = 0.0;  // original minus this region, mean test accuracy
};

struct AuditReport {
  std::string toolkit_version;
  std::string rng_algorithm;
  AuditConfig config;
  size_t total_items = 0;
  size_t present_items = 0;
  size_t absent_items = 0;
  std::vector<RegionResult> regions;
  std::vector<RegionDelta> deltas;  // present when the original arm was audited
  std::string verdict;              // "biased" or "not_flagged"
};

// Runs every configured region arm under every seed with identical
// hyperparameters; each arm's RNG streams derive from (seed, region_tag), so
// results are independent of execution order.
AuditReport run_audit(const AuditConfig& config);

// Canonical JSON: sorted keys, floats at six significant digits, so
// byte-equality is meaningful across runs of the same build.
std::string render_report_json(const AuditReport& report);

std::string render_report_markdown(const AuditReport& report);

// The same canonical rendering for arbitrary JSON values.
std::string canonical_json(const nlohmann::json& value);

}  // namespace patchaudit
