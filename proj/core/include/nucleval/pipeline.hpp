#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nucleval/endpoint.hpp"
#include "nucleval/manifest.hpp"
#include "nucleval/metrics.hpp"
#include "nucleval/prompting.hpp"
#include "nucleval/report.hpp"

namespace nucleval {

enum class PromptMode { kGtPoints, kGtBoxes, kDetections };

PromptMode parse_prompt_mode(const std::string& name);  // throws UsageError
std::string to_string(PromptMode mode);

struct RunConfig {
  PromptMode prompt_mode = PromptMode::kGtPoints;
  std::string endpoint_cmd;
  // Holds <image_id>.json per test image; required for kDetections.
  std::optional<std::filesystem::path> detections_dir;
  double match_threshold = kDefaultMatchThreshold;
  AssemblyOptions assembly;
  int workers = 1;
  bool force = false;
  std::chrono::milliseconds timeout = kDefaultEndpointTimeout;

  void validate() const;  // throws UsageError
};

struct EvalConfig {
  double match_threshold = kDefaultMatchThreshold;
  // Prediction instances below this many pixels are removed before scoring.
  std::int64_t min_area = 0;
  int workers = 1;
};

/// NUCLEVAL_WORKERS, when set to a positive integer, wins over `requested`.
int resolve_workers(int requested);

std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       const std::string& image_id, int width, int height);

/// Prompts for one sample under the configured regime.
PromptSet build_prompts(const Sample& sample, const InstanceMap& gt, PromptMode mode,
                        const std::optional<std::filesystem::path>& detections_dir);

std::filesystem::path prediction_path(const std::filesystem::path& pred_dir,
                                      const std::string& image_id);

/// For each test image: prompts -> endpoint -> assembled instance map saved to
/// <out_dir>/pred/<id>.png -> scored against gt. Writes report.json and
/// report.csv into out_dir. Existing predictions are reused unless
/// config.force. An endpoint failure stops dispatching new images; finished
/// predictions stay on disk.
DatasetReport run_pipeline(const DatasetManifest& manifest, const Split& split,
                           const RunConfig& config, const std::filesystem::path& out_dir);

/// Scores saved predictions (<pred_dir>/<id>.png) for `ids`. A missing file is
/// scored as an empty map and flagged; a size mismatch is a failure.
DatasetReport evaluate_dirs(const DatasetManifest& manifest, std::span<const std::string> ids,
                            const std::filesystem::path& pred_dir, const EvalConfig& config);

}  // namespace nucleval
