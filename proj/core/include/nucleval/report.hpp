#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nucleval/error.hpp"
#include "nucleval/metrics.hpp"

namespace nucleval {

struct ImageFailure {
  std::string image_id;
  ErrorKind kind = ErrorKind::kData;
  std::string message;
};

/// Scores for a set of images. Failed images never enter the aggregates; they
/// are listed and drive the exit status instead.
struct DatasetReport {
  std::vector<MetricsReport> per_image;  // ascending image id
  std::optional<MetricsReport> aggregate_mean;
  std::optional<MetricsReport> aggregate_pooled;
  std::vector<ImageFailure> failures;    // ascending image id
  std::vector<std::string> not_run;      // skipped after an abort
  bool aborted = false;

  // 0 ok, 2 data failures, 3 endpoint failure or abort.
  int exit_code() const;
};

DatasetReport make_dataset_report(std::vector<MetricsReport> per_image,
                                  std::vector<ImageFailure> failures);

std::string report_json(const DatasetReport& report);

// Columns: id,dice,pq,dq,sq,n_tp,n_fp,n_fn,n_images,flags. Aggregates come
// last as rows named aggregate_mean / aggregate_pooled.
std::string report_csv(const DatasetReport& report);

void write_report(const DatasetReport& report, const std::filesystem::path& json_path,
                  const std::optional<std::filesystem::path>& csv_path);

}  // namespace nucleval
