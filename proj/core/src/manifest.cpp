#include "nucleval/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "json_codec.hpp"
#include "nucleval/error.hpp"

namespace nucleval {
namespace {

using json_codec::json;
using json_codec::required;

// Ids name prediction files, so they must be usable as a plain file stem.
void check_id(const std::string& id) {
  if (id.empty() || id == "." || id == ".." || id.find('/') != std::string::npos ||
      id.find('\\') != std::string::npos) {
    throw DataError("manifest: sample id '" + id + "' is not a valid file name");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::vector<std::string> string_list(const json& j, const char* key) {
  return required<std::vector<std::string>>(j, key, "split");
}

}  // namespace

const Sample* DatasetManifest::find(const std::string& id) const {
  for (const auto& s : samples) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

std::vector<std::string> DatasetManifest::sources() const {
  std::vector<std::string> out;
  for (const auto& s : samples) {
    if (std::find(out.begin(), out.end(), s.source) == out.end()) out.push_back(s.source);
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir) {
  const auto doc = json_codec::parse(text, "manifest");
  if (!doc.is_object() || !doc.contains("samples") || !doc.at("samples").is_array()) {
    throw DataError("manifest: expected an object with a 'samples' array");
  }

  DatasetManifest manifest;
  std::set<std::string> ids;
  std::size_t index = 0;
  for (const auto& entry : doc.at("samples")) {
    const std::string where = "manifest sample " + std::to_string(index++);
    Sample s;
    s.id = required<std::string>(entry, "id", where);
    check_id(s.id);
    if (!ids.insert(s.id).second) throw DataError("manifest: duplicate sample id '" + s.id + "'");
    s.gt_path = resolve(base_dir, required<std::string>(entry, "gt_path", where));
    s.source = required<std::string>(entry, "source", where);
    if (s.source.empty()) throw DataError(where + ": empty source");
    if (entry.contains("image_path") && !entry.at("image_path").is_null()) {
      s.image_path = resolve(base_dir, required<std::string>(entry, "image_path", where));
    }
    if (!std::filesystem::is_regular_file(s.gt_path)) {
      throw DataError("manifest: gt file not found: " + s.gt_path.string());
    }
    manifest.samples.push_back(std::move(s));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, path.parent_path());
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  json samples = json::array();
  for (const auto& s : manifest.samples) {
    json entry{{"id", s.id}, {"gt_path", s.gt_path.string()}, {"source", s.source}};
    if (s.image_path) entry["image_path"] = s.image_path->string();
    samples.push_back(std::move(entry));
  }
  write_text(path, json{{"samples", std::move(samples)}}.dump(2) + "\n");
}

Split make_losso_split(const DatasetManifest& manifest, const SplitSpec& spec) {
  Split split;
  split.holdout_source = spec.holdout_source;
  bool known = false;
  for (const auto& s : manifest.samples) {
    if (s.source == spec.holdout_source) {
      known = true;
      split.test_ids.push_back(s.id);
    } else {
      split.train_ids.push_back(s.id);
    }
  }
  if (!known) {
    throw DataError("holdout source '" + spec.holdout_source + "' does not occur in the manifest");
  }
  if (split.train_ids.empty()) {
    throw DataError("holdout source '" + spec.holdout_source +
                    "' leaves no training samples");
  }
  return split;
}

void save_split(const std::filesystem::path& path, const Split& split) {
  const json doc{{"holdout", split.holdout_source},
                 {"train", split.train_ids},
                 {"test", split.test_ids}};
  write_text(path, doc.dump(2) + "\n");
}

Split load_split(const std::filesystem::path& path) {
  const auto doc = json_codec::parse_file(path.string());
  Split split;
  split.holdout_source = required<std::string>(doc, "holdout", "split");
  split.train_ids = string_list(doc, "train");
  split.test_ids = string_list(doc, "test");
  return split;
}

}  // namespace nucleval
