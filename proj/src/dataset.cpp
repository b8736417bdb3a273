#include "patchaudit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "patchaudit/errors.hpp"

namespace fs = std::filesystem;

namespace patchaudit {

const char* to_string(Region region) {
  switch (region) {
    case Region::original: return "original";
    case Region::upper_left: return "upper_left";
    case Region::upper_right: return "upper_right";
    case Region::center: return "center";
    case Region::bottom_left: return "bottom_left";
    case Region::bottom_right: return "bottom_right";
  }
  return "original";
}

Region region_from_string(std::string_view name) {
  for (Region region : kAllRegions)
    if (name == to_string(region)) return region;
  fail(ErrorCode::invalid_config, "unknown region tag '" + std::string(name) + "'");
}

std::vector<std::string> DatasetManifest::class_names() const {
  std::set<std::string> names;
  for (const auto& row : rows) names.insert(row.class_name);
  return {names.begin(), names.end()};
}

ClassMapping ClassMapping::from_sets(std::vector<std::string> positive,
                                     std::vector<std::string> negative) {
  if (positive.empty() || negative.empty())
    fail(ErrorCode::invalid_config, "both mapping sets must be non-empty");
  std::set<std::string> pos(positive.begin(), positive.end());
  std::set<std::string> neg(negative.begin(), negative.end());
  for (const auto& name : pos)
    if (neg.count(name))
      fail(ErrorCode::invalid_config, "class '" + name + "' mapped to both labels");
  ClassMapping mapping;
  mapping.positive_ = std::move(positive);
  mapping.negative_ = std::move(negative);
  return mapping;
}

ClassMapping ClassMapping::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("present") || !j.contains("absent"))
    fail(ErrorCode::invalid_config, "mapping JSON needs 'present' and 'absent' arrays");
  return from_sets(j.at("present").get<std::vector<std::string>>(),
                   j.at("absent").get<std::vector<std::string>>());
}

nlohmann::json ClassMapping::to_json() const {
  return nlohmann::json{{"present", positive_}, {"absent", negative_}};
}

bool ClassMapping::contains(const std::string& class_name) const {
  return std::find(positive_.begin(), positive_.end(), class_name) != positive_.end() ||
         std::find(negative_.begin(), negative_.end(), class_name) != negative_.end();
}

BinaryLabel ClassMapping::label_of(const std::string& class_name) const {
  if (std::find(positive_.begin(), positive_.end(), class_name) != positive_.end())
    return BinaryLabel::present;
  if (std::find(negative_.begin(), negative_.end(), class_name) != negative_.end())
    return BinaryLabel::absent;
  fail(ErrorCode::unmapped_class, "class '" + class_name + "' is not in the mapping");
}

size_t LabeledDataset::count(BinaryLabel label) const {
  size_t n = 0;
  for (const auto& item : items) n += item.label == label;
  return n;
}

namespace {

bool has_image_extension(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

DatasetManifest load_directory_manifest(const fs::path& root) {
  DatasetManifest manifest;
  manifest.root = root;
  manifest.format = ManifestFormat::directory_per_class;

  std::vector<std::string> class_dirs;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
  std::sort(class_dirs.begin(), class_dirs.end());

  for (const auto& class_name : class_dirs) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(root / class_name))
      if (entry.is_regular_file() && has_image_extension(entry.path()))
        files.push_back(fs::relative(entry.path(), root).generic_string());
    std::sort(files.begin(), files.end());
    for (auto& file : files) manifest.rows.push_back({std::move(file), class_name});
  }
  return manifest;
}

DatasetManifest load_csv_manifest(const fs::path& csv_path) {
  DatasetManifest manifest;
  manifest.root = csv_path.parent_path();
  manifest.format = ManifestFormat::csv_manifest;

  std::ifstream in(csv_path);
  if (!in) fail(ErrorCode::io_failure, "cannot read " + csv_path.string());

  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const size_t comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      fail(ErrorCode::malformed_manifest_row,
           csv_path.string() + ":" + std::to_string(line_no) +
               " expected exactly two fields");
    std::string path = line.substr(0, comma);
    std::string class_name = line.substr(comma + 1);
    if (path.empty() || class_name.empty())
      fail(ErrorCode::malformed_manifest_row,
           csv_path.string() + ":" + std::to_string(line_no) + " empty field");
    manifest.rows.push_back({std::move(path), std::move(class_name)});
  }
  std::sort(manifest.rows.begin(), manifest.rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.path < b.path; });
  return manifest;
}

std::string sanitize_id(const std::string& rel_path) {
  fs::path p(rel_path);
  std::string stem = (p.parent_path() / p.stem()).generic_string();
  for (char& c : stem)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
  return stem;
}

}  // namespace

DatasetManifest load_manifest(const fs::path& path, ManifestFormat format) {
  if (!fs::exists(path)) fail(ErrorCode::missing_path, path.string());

  DatasetManifest manifest = format == ManifestFormat::directory_per_class
                                 ? load_directory_manifest(path)
                                 : load_csv_manifest(path);
  if (manifest.rows.empty())
    fail(ErrorCode::empty_dataset, "no images found under " + path.string());

  for (const auto& row : manifest.rows)
    if (!fs::exists(manifest.root / row.path))
      fail(ErrorCode::missing_path, (manifest.root / row.path).string());
  return manifest;
}

LabeledDataset remap_labels(const DatasetManifest& manifest, const ClassMapping& mapping,
                            const std::string& name) {
  LabeledDataset dataset;
  dataset.name = name;
  dataset.region_tag = Region::original;
  dataset.items.reserve(manifest.rows.size());

  char index_buf[16];
  for (size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& row = manifest.rows[i];
    std::snprintf(index_buf, sizeof index_buf, "%06zu", i);
    DatasetItem item;
    item.image_id = std::string(index_buf) + "_" + sanitize_id(row.path);
    item.source = manifest.root / row.path;
    item.label = mapping.label_of(row.class_name);
    dataset.items.push_back(std::move(item));
  }
  return dataset;
}

void write_manifest_csv(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, "cannot write " + path.string());
  for (const auto& row : manifest.rows) out << row.path << ',' << row.class_name << '\n';
  if (!out) fail(ErrorCode::io_failure, "write failed for " + path.string());
}

}  // namespace patchaudit
