#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace patchaudit {

enum class BinaryLabel : uint8_t { absent = 0, present = 1 };

inline const char* to_string(BinaryLabel label) {
  return label == BinaryLabel::present ? "present" : "absent";
}

// original plus the five fixed patch locations.
enum class Region {
  original,
  upper_left,
  upper_right,
  center,
  bottom_left,
  bottom_right,
};

inline constexpr Region kAllRegions[] = {
    Region::original,    Region::upper_left,  Region::upper_right,
    Region::center,      Region::bottom_left, Region::bottom_right,
};

const char* to_string(Region region);
Region region_from_string(std::string_view name);

enum class ManifestFormat { csv_manifest, directory_per_class };

struct ManifestRow {
  std::string path;  // relative to root
  std::string class_name;
};

struct DatasetManifest {
  std::filesystem::path root;
  ManifestFormat format = ManifestFormat::directory_per_class;
  std::vector<ManifestRow> rows;

  std::vector<std::string> class_names() const;
};

// Partition of the source class names into "cancer present" / "cancer absent".
class ClassMapping {
public:
  static ClassMapping from_sets(std::vector<std::string> positive,
                                std::vector<std::string> negative);
  static ClassMapping from_json(const nlohmann::json& j);

  nlohmann::json to_json() const;

  BinaryLabel label_of(const std::string& class_name) const;
  bool contains(const std::string& class_name) const;

  const std::vector<std::string>& positive_set() const { return positive_; }
  const std::vector<std::string>& negative_set() const { return negative_; }

private:
  ClassMapping() = default;
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
};

struct DatasetItem {
  std::string image_id;
  std::filesystem::path source;
  BinaryLabel label = BinaryLabel::absent;
};

// Immutable after construction; safe to share across threads.
struct LabeledDataset {
  std::string name;
  Region region_tag = Region::original;
  std::vector<DatasetItem> items;

  size_t size() const { return items.size(); }
  size_t count(BinaryLabel label) const;
};

// Enumerates image files in stable lexicographic order by relative path.
DatasetManifest load_manifest(const std::filesystem::path& path, ManifestFormat format);

LabeledDataset remap_labels(const DatasetManifest& manifest, const ClassMapping& mapping,
                            const std::string& name = "dataset");

// Manifest CSV: two columns `path,class`, no header.
void write_manifest_csv(const DatasetManifest& manifest, const std::filesystem::path& path);

}  // namespace patchaudit
