#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace nucleval {

struct Sample {
  std::string id;
  std::optional<std::filesystem::path> image_path;
  std::filesystem::path gt_path;
  std::string source;
};

/// Samples in file order. Relative paths are resolved against the manifest's
/// directory at load time.
struct DatasetManifest {
  std::vector<Sample> samples;

  const Sample* find(const std::string& id) const;
  // Distinct sources in first-appearance order.
  std::vector<std::string> sources() const;
};

/// Parses {"samples":[{"id","image_path"?,"gt_path","source"}]}. Throws
/// DataError on schema violations, duplicate ids or unresolvable gt files.
DatasetManifest load_manifest(const std::filesystem::path& path);

DatasetManifest parse_manifest(const std::string& text,
                               const std::filesystem::path& base_dir);

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct SplitSpec {
  std::string holdout_source;
};

struct Split {
  std::string holdout_source;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

/// Leave-one-source-out: every sample from the holdout source is test, the
/// rest train, both in manifest order. Throws DataError for an unknown source
/// or an empty side.
Split make_losso_split(const DatasetManifest& manifest, const SplitSpec& spec);

void save_split(const std::filesystem::path& path, const Split& split);
Split load_split(const std::filesystem::path& path);

}  // namespace nucleval
