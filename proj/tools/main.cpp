#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "patchaudit/audit.hpp"
#include "patchaudit/cropper.hpp"
#include "patchaudit/errors.hpp"
#include "patchaudit/metrics.hpp"
#include "patchaudit/synthgen.hpp"

namespace fs = std::filesystem;
using namespace patchaudit;

namespace {

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config:
    case ErrorCode::invalid_baseline:
      return 2;
    case ErrorCode::non_finite_loss:
    case ErrorCode::non_finite_gradient:
      return 4;
    default:
      return 3;
  }
}

nlohmann::json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_path, path.string());
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::invalid_config, path.string() + ": " + e.what());
  }
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::io_failure, "write failed for " + path.string());
}

std::vector<uint64_t> parse_seeds(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      seeds.push_back(std::stoull(part));
    } catch (const std::exception&) {
      fail(ErrorCode::invalid_config, "bad seed '" + part + "'");
    }
  }
  if (seeds.empty()) fail(ErrorCode::invalid_config, "no seeds given");
  return seeds;
}

std::vector<Region> parse_regions(const std::string& text) {
  if (text == "all") return {kAllRegions, kAllRegions + 6};
  std::vector<Region> regions;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    regions.push_back(region_from_string(part));
  }
  if (regions.empty()) fail(ErrorCode::invalid_config, "no regions given");
  return regions;
}

std::vector<BinaryLabel> read_label_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_path, path.string());
  std::vector<BinaryLabel> labels;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line == "present" || line == "1") labels.push_back(BinaryLabel::present);
    else if (line == "absent" || line == "0") labels.push_back(BinaryLabel::absent);
    else
      fail(ErrorCode::malformed_manifest_row,
           path.string() + ":" + std::to_string(line_no) + " expected present/absent or 1/0");
  }
  if (labels.empty()) fail(ErrorCode::empty_dataset, path.string() + " has no rows");
  return labels;
}

// ---- audit -----------------------------------------------------------------

struct AuditFlags {
  std::string data;
  std::string format = "dirs";
  std::string mapping_file;
  std::string name = "dataset";
  bool balance = false;
  bool balance_after_split = false;
  std::string seeds = "42";
  int epochs = 30;
  int batch_size = 32;
  double lr = 0.0001;
  double alpha = 0.01;
  bool bonferroni = false;
  std::string regions = "all";
  int patch = 20;
  std::string probe = "patch_cnn";
  int original_size = 64;
  std::string out;
};

int run_audit_command(const AuditFlags& flags) {
  AuditConfig config;
  config.data_path = flags.data;
  config.data_format = flags.format == "csv" ? ManifestFormat::csv_manifest
                                             : ManifestFormat::directory_per_class;
  config.dataset_name = flags.name;
  if (!flags.mapping_file.empty())
    config.mapping = ClassMapping::from_json(load_json_file(flags.mapping_file));
  config.crop.patch_height = flags.patch;
  config.crop.patch_width = flags.patch;
  config.train.epochs = flags.epochs;
  config.train.batch_size = flags.batch_size;
  config.train.learning_rate = flags.lr;
  config.probe.variant = probe_variant_from_string(flags.probe);
  config.balance = flags.balance || flags.balance_after_split;
  config.balance_before_split = !flags.balance_after_split;
  config.alpha = flags.alpha;
  config.bonferroni = flags.bonferroni;
  config.seeds = parse_seeds(flags.seeds);
  config.regions = parse_regions(flags.regions);
  config.original_input_size = flags.original_size;
  config.out_dir = flags.out;

  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) fail(ErrorCode::io_failure, "cannot create " + config.out_dir.string());

  const AuditReport report = run_audit(config);
  write_text_file(config.out_dir / "report.json", render_report_json(report));
  write_text_file(config.out_dir / "report.md", render_report_markdown(report));

  std::cout << "verdict: " << report.verdict << "\n";
  for (const auto& region : report.regions)
    std::cout << "  " << to_string(region.region) << ": mean test accuracy "
              << region.mean_test_accuracy << (region.flagged ? "  [flagged]" : "")
              << "\n";
  std::cout << "report: " << (config.out_dir / "report.json").string() << "\n";
  return 0;
}

// ---- crop ------------------------------------------------------------------

int run_crop_command(const std::string& data, const std::string& format,
                     const std::string& region, int patch, const std::string& out,
                     bool overwrite) {
  const ManifestFormat manifest_format = format == "csv"
                                             ? ManifestFormat::csv_manifest
                                             : ManifestFormat::directory_per_class;
  const DatasetManifest manifest = load_manifest(data, manifest_format);
  CropSpec spec{patch, patch};

  std::vector<CropRegion> targets;
  if (region == "all")
    targets.assign(kCropRegions, kCropRegions + 5);
  else
    targets.push_back(crop_region_of(region_from_string(region)));

  for (CropRegion target : targets) {
    const DatasetManifest derived = derive_crop_files(manifest, target, spec, out, overwrite);
    std::cout << to_string(region_of(target)) << ": " << derived.rows.size()
              << " patches -> " << derived.root.string() << "\n";
  }
  return 0;
}

// ---- synth -----------------------------------------------------------------

int run_synth_command(const std::string& config_file, uint64_t seed,
                      const std::string& out, bool overwrite) {
  SceneSpec scene;
  BiasSpec bias;
  if (!config_file.empty()) from_json(load_json_file(config_file), scene, bias);

  const LabeledDataset dataset = generate(scene, bias, SeededRng(seed), out, overwrite);

  nlohmann::json echo = to_json(scene, bias);
  echo["seed"] = seed;
  write_text_file(fs::path(out) / "synth_config.json", canonical_json(echo));

  std::cout << "wrote " << dataset.size() << " images ("
            << dataset.count(BinaryLabel::present) << " present / "
            << dataset.count(BinaryLabel::absent) << " absent) to " << out << "\n";
  return 0;
}

// ---- metrics ---------------------------------------------------------------

int run_metrics_command(const std::string& predictions_file, const std::string& labels_file) {
  const std::vector<BinaryLabel> predictions = read_label_file(predictions_file);
  const std::vector<BinaryLabel> labels = read_label_file(labels_file);
  if (predictions.size() != labels.size())
    fail(ErrorCode::invalid_config, "prediction and label counts differ");

  ConfusionMatrix cm;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == BinaryLabel::present;
    const bool pred = predictions[i] == BinaryLabel::present;
    if (truth && pred) ++cm.tp;
    else if (!truth && pred) ++cm.fp;
    else if (truth && !pred) ++cm.fn;
    else ++cm.tn;
  }
  const MetricSet m = metric_set(cm);

  nlohmann::json j;
  j["confusion"] = {{"tp", cm.tp}, {"fp", cm.fp}, {"fn", cm.fn}, {"tn", cm.tn}};
  j["metrics"] = {{"accuracy", m.accuracy},
                  {"precision", m.precision},
                  {"recall", m.recall},
                  {"f1", m.f1}};
  std::cout << canonical_json(j);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patchaudit: detects dataset bias by training probe classifiers on "
               "background patches"};
  app.require_subcommand(1);

  AuditFlags audit_flags;
  auto* audit_cmd = app.add_subcommand(
      "audit", "Run the full audit: original + five crop regions, probe training, "
               "metrics and significance");
  audit_cmd->add_option("--data", audit_flags.data, "Dataset root or manifest CSV")
      ->required();
  audit_cmd->add_option("--format", audit_flags.format, "Dataset layout")
      ->check(CLI::IsMember({"csv", "dirs"}));
  audit_cmd->add_option("--mapping", audit_flags.mapping_file,
                        "JSON file with present/absent class lists");
  audit_cmd->add_option("--name", audit_flags.name, "Dataset name for the report");
  audit_cmd->add_flag("--balance", audit_flags.balance,
                      "Subsample classes to the minority count");
  audit_cmd->add_flag("--balance-after-split", audit_flags.balance_after_split,
                      "Balance each split part instead of the whole dataset");
  audit_cmd->add_option("--seeds", audit_flags.seeds, "Comma-separated seed list");
  audit_cmd->add_option("--epochs", audit_flags.epochs, "Training epochs");
  audit_cmd->add_option("--batch-size", audit_flags.batch_size, "Batch size");
  audit_cmd->add_option("--lr", audit_flags.lr, "Constant learning rate");
  audit_cmd->add_option("--alpha", audit_flags.alpha, "Significance level");
  audit_cmd->add_flag("--bonferroni", audit_flags.bonferroni,
                      "Divide alpha by the number of crop regions");
  audit_cmd->add_option("--regions", audit_flags.regions,
                        "'all' or comma-separated region tags");
  audit_cmd->add_option("--patch", audit_flags.patch, "Square patch size in pixels");
  audit_cmd->add_option("--probe", audit_flags.probe, "Probe variant")
      ->check(CLI::IsMember({"patch_cnn", "linear"}));
  audit_cmd->add_option("--original-size", audit_flags.original_size,
                        "Resize target for the original-image arm");
  audit_cmd->add_option("--out", audit_flags.out, "Output directory")->required();

  std::string crop_data, crop_format = "dirs", crop_region = "all", crop_out;
  int crop_patch = 20;
  bool crop_overwrite = false;
  auto* crop_cmd = app.add_subcommand("crop", "Derive cropped patch datasets only");
  crop_cmd->add_option("--data", crop_data, "Dataset root or manifest CSV")->required();
  crop_cmd->add_option("--format", crop_format, "Dataset layout")
      ->check(CLI::IsMember({"csv", "dirs"}));
  crop_cmd->add_option("--region", crop_region, "Region tag or 'all'");
  crop_cmd->add_option("--patch", crop_patch, "Square patch size in pixels");
  crop_cmd->add_option("--out", crop_out, "Output directory")->required();
  crop_cmd->add_flag("--overwrite", crop_overwrite, "Replace existing output");

  std::string synth_config, synth_out;
  uint64_t synth_seed = 42;
  bool synth_overwrite = false;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-class dataset "
                                                "with controllable biases");
  synth_cmd->add_option("--config", synth_config, "Scene/bias JSON file");
  synth_cmd->add_option("--seed", synth_seed, "Generator seed");
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_flag("--overwrite", synth_overwrite, "Replace existing output");

  std::string metrics_predictions, metrics_labels;
  auto* metrics_cmd =
      app.add_subcommand("metrics", "Compute metrics from prediction/label files");
  metrics_cmd->add_option("--predictions", metrics_predictions, "One label per line")
      ->required();
  metrics_cmd->add_option("--labels", metrics_labels, "One label per line")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*audit_cmd) return run_audit_command(audit_flags);
    if (*crop_cmd)
      return run_crop_command(crop_data, crop_format, crop_region, crop_patch, crop_out,
                              crop_overwrite);
    if (*synth_cmd)
      return run_synth_command(synth_config, synth_seed, synth_out, synth_overwrite);
    if (*metrics_cmd) return run_metrics_command(metrics_predictions, metrics_labels);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
