#include <doctest.h>

#include <fstream>

#include "patchaudit/audit.hpp"
#include "patchaudit/errors.hpp"
#include "patchaudit/synthgen.hpp"

using namespace patchaudit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("patchaudit_report_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A fully pinned report with hand-set values; the golden files freeze the
// renderers' exact output.
AuditReport fixture_report() {
  AuditReport report;
  report.toolkit_version = "0.1.0";
  report.rng_algorithm = "xoshiro256ss-v1";

  AuditConfig config;
  config.data_path = "/data/fixture";
  config.dataset_name = "fixture";
  config.train.epochs = 2;
  config.seeds = {42};
  config.regions = {Region::original, Region::upper_left};
  config.out_dir = "/out/fixture";
  report.config = config;

  report.total_items = 40;
  report.present_items = 16;
  report.absent_items = 24;

  SeedRunResult original_run;
  original_run.seed = 42;
  original_run.train_size = 32;
  original_run.val_size = 4;
  original_run.test_size = 4;
  original_run.val_metrics = {0.75, 0.5, 1.0, 2.0 / 3.0};
  original_run.test_metrics = {1.0, 1.0, 1.0, 1.0};
  original_run.baselines = {0.5, 0.5};
  original_run.p_value_majority = 0.0625;
  original_run.p_value_fixed = 0.0625;
  original_run.flagged = false;
  original_run.curve = {{0.6931, 0.6930, 0.5}, {0.6923, 0.6921, 0.75}};

  SeedRunResult crop_run = original_run;
  crop_run.test_metrics = {0.25, 0.25, 0.25, 0.25};
  crop_run.p_value_majority = 0.9375;
  crop_run.p_value_fixed = 0.9375;

  RegionResult original_result;
  original_result.region = Region::original;
  original_result.runs = {original_run};
  original_result.flagged = false;
  original_result.mean_test_accuracy = 1.0;

  RegionResult crop_result;
  crop_result.region = Region::upper_left;
  crop_result.runs = {crop_run};
  crop_result.flagged = false;
  crop_result.mean_test_accuracy = 0.25;

  report.regions = {original_result, crop_result};
  report.deltas = {{Region::upper_left, 0.75}};
  report.verdict = "not_flagged";
  return report;
}

AuditConfig tiny_audit_config(const fs::path& data, const fs::path& out) {
  AuditConfig config;
  config.data_path = data;
  config.dataset_name = "tiny";
  config.probe.conv_widths = {4, 8};
  config.probe.fc_width = 16;
  config.probe.pooled_grid = 3;
  config.train.epochs = 2;
  config.original_input_size = 48;
  config.out_dir = out;
  return config;
}

// 48px images leave a 4px central reach next to the 20px corner margins, so
// the lesions here are deliberately tiny.
fs::path make_tiny_dataset(const fs::path& dir) {
  SceneSpec scene;
  scene.image_size = 48;
  scene.n_per_class = 15;
  scene.lesion_absent.radius_min = 2.0;
  scene.lesion_absent.radius_max = 3.0;
  scene.lesion_absent.center_jitter = 1.0;
  scene.lesion_present = scene.lesion_absent;
  BiasSpec bias;
  bias.present.background_brightness_delta = 0.1;
  return generate(scene, bias, SeededRng(7), dir).items.empty() ? dir : dir;
}

}  // namespace

TEST_CASE("canonical JSON rendering is stable and idempotent") {
  const AuditReport report = fixture_report();
  const std::string a = render_report_json(report);
  const std::string b = render_report_json(report);
  CHECK(a == b);

  // parse -> re-render is byte-identical
  const auto parsed = nlohmann::json::parse(a);
  CHECK(canonical_json(parsed) == a);

  // keys arrive sorted
  const auto config_pos = a.find("\"config\"");
  const auto verdict_pos = a.find("\"verdict\"");
  CHECK(config_pos < verdict_pos);
}

TEST_CASE("rendered report matches the golden files") {
  const AuditReport report = fixture_report();
  const fs::path golden_dir = PATCHAUDIT_GOLDEN_DIR;
  if (std::getenv("PATCHAUDIT_REGEN_GOLDEN")) {
    std::ofstream(golden_dir / "fixture_report.json", std::ios::binary)
        << render_report_json(report);
    std::ofstream(golden_dir / "fixture_report.md", std::ios::binary)
        << render_report_markdown(report);
  }
  CHECK(render_report_json(report) == read_file(golden_dir / "fixture_report.json"));
  CHECK(render_report_markdown(report) == read_file(golden_dir / "fixture_report.md"));
}

TEST_CASE("markdown shows one row per region and flags with a check mark") {
  AuditReport report = fixture_report();
  const std::string md = render_report_markdown(report);
  CHECK(md.find("| original |") != std::string::npos);
  CHECK(md.find("| upper_left |") != std::string::npos);
  CHECK(md.find("✔") == std::string::npos);  // nothing flagged

  report.regions[1].runs[0].flagged = true;
  report.regions[1].flagged = true;
  report.verdict = "biased";
  const std::string flagged_md = render_report_markdown(report);
  CHECK(flagged_md.find("✔") != std::string::npos);
  CHECK(flagged_md.find("**Verdict: biased**") != std::string::npos);

  // single-region report renders a single data row
  AuditReport single = fixture_report();
  single.regions.resize(1);
  single.deltas.clear();
  const std::string single_md = render_report_markdown(single);
  CHECK(single_md.find("| original |") != std::string::npos);
  CHECK(single_md.find("| upper_left |") == std::string::npos);
}

TEST_CASE("audit config round-trips through JSON") {
  AuditConfig config;
  config.data_path = "/some/where";
  config.data_format = ManifestFormat::csv_manifest;
  config.mapping = ClassMapping::from_sets({"mal"}, {"ben", "norm"});
  config.crop.patch_height = 24;
  config.crop.patch_width = 24;
  config.train.epochs = 7;
  config.train.learning_rate = 5e-4;
  config.balance = true;
  config.balance_before_split = false;
  config.alpha = 0.05;
  config.bonferroni = true;
  config.seeds = {1, 2, 3};
  config.regions = {Region::center, Region::original};
  config.original_input_size = 96;

  const AuditConfig back = AuditConfig::from_json(config.to_json());
  CHECK(back.data_path == config.data_path);
  CHECK(back.data_format == ManifestFormat::csv_manifest);
  CHECK(back.mapping.positive_set() == config.mapping.positive_set());
  CHECK(back.crop.patch_height == 24);
  CHECK(back.train.epochs == 7);
  CHECK(back.train.learning_rate == 5e-4);
  CHECK(back.balance);
  CHECK(back.balance_before_split == false);
  CHECK(back.alpha == 0.05);
  CHECK(back.bonferroni);
  CHECK(back.seeds == std::vector<uint64_t>{1, 2, 3});
  CHECK(back.regions == std::vector<Region>{Region::center, Region::original});
  CHECK(back.original_input_size == 96);
}

TEST_CASE("audit config validation") {
  AuditConfig config;
  config.alpha = 0.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config.alpha = 0.01;
  config.seeds.clear();
  CHECK_THROWS_AS(config.validate(), Error);
  config.seeds = {42};
  config.regions = {Region::center, Region::center};
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("original-only audits are vacuously not flagged") {
  TempDir dir("orig_only");
  make_tiny_dataset(dir.path / "data");
  AuditConfig config = tiny_audit_config(dir.path / "data", dir.path / "out");
  config.regions = {Region::original};

  const AuditReport report = run_audit(config);
  REQUIRE(report.regions.size() == 1);
  CHECK(report.regions[0].region == Region::original);
  CHECK(report.verdict == "not_flagged");
  CHECK(report.deltas.empty());
  CHECK(fs::exists(dir.path / "out" / "params" / "original_seed42.bin"));
}

TEST_CASE("region results are independent of execution order") {
  TempDir dir("permute");
  make_tiny_dataset(dir.path / "data");

  AuditConfig forward_config = tiny_audit_config(dir.path / "data", dir.path / "out_a");
  forward_config.regions = {Region::original, Region::upper_left, Region::center};
  AuditConfig reversed_config = tiny_audit_config(dir.path / "data", dir.path / "out_b");
  reversed_config.regions = {Region::center, Region::upper_left, Region::original};

  const AuditReport fwd = run_audit(forward_config);
  const AuditReport rev = run_audit(reversed_config);
  CHECK(fwd.verdict == rev.verdict);

  for (const auto& region_fwd : fwd.regions) {
    const RegionResult* match = nullptr;
    for (const auto& region_rev : rev.regions)
      if (region_rev.region == region_fwd.region) match = &region_rev;
    REQUIRE(match != nullptr);
    CHECK(match->flagged == region_fwd.flagged);
    REQUIRE(match->runs.size() == region_fwd.runs.size());
    for (size_t i = 0; i < match->runs.size(); ++i) {
      CHECK(match->runs[i].test_metrics.accuracy ==
            region_fwd.runs[i].test_metrics.accuracy);
      CHECK(match->runs[i].p_value_majority == region_fwd.runs[i].p_value_majority);
      CHECK(match->runs[i].val_metrics.f1 == region_fwd.runs[i].val_metrics.f1);
    }
  }

  // order of the output array follows the config order
  CHECK(fwd.regions[0].region == Region::original);
  CHECK(rev.regions[0].region == Region::center);
}

TEST_CASE("audits are deterministic byte-for-byte and reproduce from the echo") {
  TempDir dir("determinism");
  make_tiny_dataset(dir.path / "data");
  AuditConfig config = tiny_audit_config(dir.path / "data", dir.path / "out");
  config.regions = {Region::original, Region::bottom_right};

  const AuditReport first = run_audit(config);
  const AuditReport second = run_audit(config);  // crop cache hit on this pass
  const std::string json_a = render_report_json(first);
  const std::string json_b = render_report_json(second);
  CHECK(json_a == json_b);

  // config echo reproduces the run
  const AuditConfig echoed = AuditConfig::from_json(nlohmann::json::parse(json_a)["config"]);
  const AuditReport third = run_audit(echoed);
  CHECK(render_report_json(third) == json_a);

  // the verdict rule is reconstructible from the serialized report
  const auto parsed = nlohmann::json::parse(json_a);
  bool any_crop_flagged = false;
  for (const auto& region : parsed.at("regions"))
    if (region.at("region") != "original" && region.at("flagged").get<bool>())
      any_crop_flagged = true;
  CHECK(parsed.at("verdict") == (any_crop_flagged ? "biased" : "not_flagged"));

  // per-run flag rule: flagged == (acc > majority) && (p < alpha)
  for (const auto& region : parsed.at("regions"))
    for (const auto& run : region.at("runs")) {
      const bool expect =
          run.at("test_metrics").at("accuracy").get<double>() >
              run.at("baselines").at("majority_rate").get<double>() &&
          run.at("p_value_majority").get<double>() < parsed.at("config").at("alpha").get<double>();
      CHECK(run.at("flagged").get<bool>() == expect);
    }
}

TEST_CASE("audit rejects degenerate datasets") {
  TempDir dir("degenerate");
  fs::create_directories(dir.path / "data" / "absent");
  SceneSpec scene;
  scene.image_size = 48;
  scene.n_per_class = 3;
  scene.lesion_absent.radius_min = 2.0;
  scene.lesion_absent.radius_max = 3.0;
  scene.lesion_absent.center_jitter = 1.0;
  scene.lesion_present = scene.lesion_absent;
  // generate normally, then strip one class from the manifest directory
  generate(scene, BiasSpec{}, SeededRng(3), dir.path / "gen");
  fs::copy(dir.path / "gen" / "absent", dir.path / "data" / "absent",
           fs::copy_options::recursive);

  AuditConfig config = tiny_audit_config(dir.path / "data", dir.path / "out");
  CHECK_THROWS_WITH_AS((void)run_audit(config), doctest::Contains("DegenerateDataset"),
                       Error);
}
