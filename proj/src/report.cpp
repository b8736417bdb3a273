#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

#include "patchaudit/audit.hpp"
#include "patchaudit/errors.hpp"

namespace patchaudit {

namespace {

// Fixed float formatting: six significant digits, locale-independent, printed
// the same way every run so report bytes can be compared directly.
std::string format_float(double v) {
  if (!std::isfinite(v))
    fail(ErrorCode::invalid_config, "reports cannot contain non-finite numbers");
  if (v == 0.0) v = 0.0;  // normalize negative zero
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof buf, v,
                                    std::chars_format::general, 6);
  return std::string(buf, result.ptr);
}

void write_escaped(const std::string& s, std::string& out) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

// nlohmann objects iterate in key order already; this writer only pins number
// formatting and layout.
void write_canonical(const nlohmann::json& v, std::string& out, int depth) {
  const std::string pad(2 * depth, ' ');
  const std::string pad_in(2 * (depth + 1), ' ');
  switch (v.type()) {
    case nlohmann::json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      bool first = true;
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (!first) out += ",\n";
        first = false;
        out += pad_in;
        write_escaped(it.key(), out);
        out += ": ";
        write_canonical(it.value(), out, depth + 1);
      }
      out += "\n" + pad + "}";
      return;
    }
    case nlohmann::json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      bool first = true;
      for (const auto& item : v) {
        if (!first) out += ",\n";
        first = false;
        out += pad_in;
        write_canonical(item, out, depth + 1);
      }
      out += "\n" + pad + "]";
      return;
    }
    case nlohmann::json::value_t::string:
      write_escaped(v.get<std::string>(), out);
      return;
    case nlohmann::json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      return;
    case nlohmann::json::value_t::number_integer:
      out += std::to_string(v.get<int64_t>());
      return;
    case nlohmann::json::value_t::number_unsigned:
      out += std::to_string(v.get<uint64_t>());
      return;
    case nlohmann::json::value_t::number_float:
      out += format_float(v.get<double>());
      return;
    case nlohmann::json::value_t::null:
    default:
      out += "null";
      return;
  }
}

nlohmann::json metrics_json(const MetricSet& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1}};
}

nlohmann::json run_json(const SeedRunResult& run) {
  nlohmann::json j;
  j["seed"] = run.seed;
  j["sizes"] = {{"train", run.train_size}, {"val", run.val_size}, {"test", run.test_size}};
  j["val_metrics"] = metrics_json(run.val_metrics);
  j["test_metrics"] = metrics_json(run.test_metrics);
  j["baselines"] = {{"fixed", run.baselines.fixed},
                    {"majority_rate", run.baselines.majority_rate}};
  j["p_value_majority"] = run.p_value_majority;
  j["p_value_fixed"] = run.p_value_fixed;
  j["flagged"] = run.flagged;
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& record : run.curve)
    curve.push_back({{"train_loss", record.train_loss},
                     {"val_loss", record.val_loss},
                     {"val_accuracy", record.val_accuracy}});
  j["learning_curve"] = curve;
  return j;
}

}  // namespace

std::string canonical_json(const nlohmann::json& value) {
  std::string out;
  write_canonical(value, out, 0);
  out += '\n';
  return out;
}

std::string render_report_json(const AuditReport& report) {
  nlohmann::json j;
  j["toolkit_version"] = report.toolkit_version;
  j["rng_algorithm"] = report.rng_algorithm;
  j["config"] = report.config.to_json();
  j["dataset"] = {{"total", report.total_items},
                  {"present", report.present_items},
                  {"absent", report.absent_items}};
  j["metric_units"] = "fractions in [0,1]";
  j["verdict_source"] = "test";

  nlohmann::json regions = nlohmann::json::array();
  for (const auto& result : report.regions) {
    nlohmann::json r;
    r["region"] = to_string(result.region);
    r["flagged"] = result.flagged;
    r["mean_test_accuracy"] = result.mean_test_accuracy;
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : result.runs) runs.push_back(run_json(run));
    r["runs"] = runs;
    regions.push_back(r);
  }
  j["regions"] = regions;

  nlohmann::json deltas = nlohmann::json::object();
  for (const auto& delta : report.deltas)
    deltas[to_string(delta.region)] = delta.accuracy_delta;
  j["original_vs_crop_accuracy_delta"] = deltas;
  j["verdict"] = report.verdict;

  std::string out;
  write_canonical(j, out, 0);
  out += '\n';
  return out;
}

namespace {

std::string format_cell(double v) { return format_float(v); }

void append_region_table(std::string& md, const AuditReport& report, size_t seed_index,
                         bool mean_over_seeds) {
  md += "| Region | Accuracy | Precision | Recall | F1 | p-value | Flag |\n";
  md += "|---|---|---|---|---|---|---|\n";
  for (const auto& result : report.regions) {
    double acc = 0, prec = 0, rec = 0, f1 = 0, p = 0;
    bool flag;
    if (mean_over_seeds) {
      const double n = static_cast<double>(result.runs.size());
      std::vector<double> ps;
      for (const auto& run : result.runs) {
        acc += run.test_metrics.accuracy / n;
        prec += run.test_metrics.precision / n;
        rec += run.test_metrics.recall / n;
        f1 += run.test_metrics.f1 / n;
        ps.push_back(run.p_value_majority);
      }
      std::sort(ps.begin(), ps.end());
      p = ps[ps.size() / 2];
      flag = result.flagged;
    } else {
      const auto& run = result.runs[seed_index];
      acc = run.test_metrics.accuracy;
      prec = run.test_metrics.precision;
      rec = run.test_metrics.recall;
      f1 = run.test_metrics.f1;
      p = run.p_value_majority;
      flag = run.flagged;
    }
    md += "| " + std::string(to_string(result.region)) + " | " + format_cell(acc) +
          " | " + format_cell(prec) + " | " + format_cell(rec) + " | " +
          format_cell(f1) + " | " + format_cell(p) + " | " + (flag ? "✔" : "") +
          " |\n";
  }
}

}  // namespace

std::string render_report_markdown(const AuditReport& report) {
  const AuditConfig& config = report.config;
  std::string md;
  md += "# Patch bias audit: " + config.dataset_name + "\n\n";
  md += "- Toolkit: patchaudit " + report.toolkit_version + " (rng " +
        report.rng_algorithm + ")\n";
  md += "- Data: `" + config.data_path.generic_string() + "` (" +
        (config.data_format == ManifestFormat::csv_manifest ? "csv" : "dirs") + "), " +
        std::to_string(report.total_items) + " items (" +
        std::to_string(report.present_items) + " present / " +
        std::to_string(report.absent_items) + " absent)\n";
  std::string seeds;
  for (uint64_t s : config.seeds) seeds += (seeds.empty() ? "" : ", ") + std::to_string(s);
  md += "- Config: seeds [" + seeds + "]; epochs " + std::to_string(config.train.epochs) +
        "; batch " + std::to_string(config.train.batch_size) + "; lr " +
        format_float(config.train.learning_rate) + "; alpha " +
        format_float(config.alpha) + (config.bonferroni ? " (Bonferroni)" : "") +
        "; balance " + (config.balance ? (config.balance_before_split
                                              ? "on (before split)"
                                              : "on (after split)")
                                       : "off") +
        "; patch " + std::to_string(config.crop.patch_height) + "x" +
        std::to_string(config.crop.patch_width) + "; probe " +
        to_string(config.probe.variant) + "\n";
  const double majority =
      static_cast<double>(std::max(report.present_items, report.absent_items)) /
      static_cast<double>(std::max<size_t>(report.total_items, 1));
  md += "- Chance baselines: fixed 0.5; dataset majority rate " + format_float(majority) +
        " (per-split baselines in report.json)\n";
  md += "- Metrics are fractions in [0,1]; flags and the verdict key off the test "
        "split against the majority baseline.\n\n";

  const bool multi_seed = config.seeds.size() > 1;
  append_region_table(md, report, 0, multi_seed);

  md += "\n**Verdict: " + report.verdict + "**\n";

  if (multi_seed) {
    md += "\nPer-seed results (flags aggregate by majority vote):\n";
    for (size_t i = 0; i < config.seeds.size(); ++i) {
      md += "\n### Seed " + std::to_string(config.seeds[i]) + "\n\n";
      append_region_table(md, report, i, false);
    }
  }
  return md;
}

}  // namespace patchaudit
