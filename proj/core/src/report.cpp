#include "nucleval/report.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "json_codec.hpp"

namespace nucleval {
namespace {

using json_codec::json;

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string flags_of(const MetricsReport& r) {
  std::string flags;
  if (r.empty_gt) flags += "empty_gt";
  if (r.missing_prediction) flags += flags.empty() ? "missing_prediction" : ";missing_prediction";
  return flags;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

void csv_row(std::string& out, const std::string& id, const MetricsReport& r) {
  out += csv_field(id) + "," + format_double(r.dice) + "," + format_double(r.pq) + "," +
         format_double(r.dq) + "," + format_double(r.sq) + "," + std::to_string(r.n_tp) + "," +
         std::to_string(r.n_fp) + "," + std::to_string(r.n_fn) + "," +
         std::to_string(r.n_images) + "," + flags_of(r) + "\n";
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace

int DatasetReport::exit_code() const {
  if (aborted) return static_cast<int>(ErrorKind::kEndpoint);
  int code = 0;
  for (const auto& f : failures) code = std::max(code, static_cast<int>(f.kind));
  return code;
}

DatasetReport make_dataset_report(std::vector<MetricsReport> per_image,
                                  std::vector<ImageFailure> failures) {
  DatasetReport report;
  std::sort(per_image.begin(), per_image.end(),
            [](const MetricsReport& a, const MetricsReport& b) { return a.image_id < b.image_id; });
  std::sort(failures.begin(), failures.end(),
            [](const ImageFailure& a, const ImageFailure& b) { return a.image_id < b.image_id; });
  report.per_image = std::move(per_image);
  report.failures = std::move(failures);
  if (!report.per_image.empty()) {
    report.aggregate_mean = aggregate_reports(report.per_image);
    report.aggregate_pooled = aggregate_pooled(report.per_image);
  }
  return report;
}

std::string report_json(const DatasetReport& report) {
  json per_image = json::array();
  json empty_gt = json::array();
  json missing = json::array();
  for (const auto& r : report.per_image) {
    per_image.push_back(json_codec::report_to_json(r));
    if (r.empty_gt) empty_gt.push_back(r.image_id);
    if (r.missing_prediction) missing.push_back(r.image_id);
  }
  json failures = json::array();
  for (const auto& f : report.failures) {
    failures.push_back({{"id", f.image_id},
                        {"kind", f.kind == ErrorKind::kEndpoint ? "endpoint" : "data"},
                        {"error", f.message}});
  }
  json doc{{"per_image", std::move(per_image)},
           {"aggregate_mean", report.aggregate_mean
                                  ? json_codec::report_to_json(*report.aggregate_mean, true)
                                  : json(nullptr)},
           {"aggregate_pooled", report.aggregate_pooled
                                    ? json_codec::report_to_json(*report.aggregate_pooled, true)
                                    : json(nullptr)},
           {"flagged", {{"empty_gt", std::move(empty_gt)}, {"missing_prediction", std::move(missing)}}},
           {"failures", std::move(failures)},
           {"not_run", report.not_run},
           {"aborted", report.aborted}};
  return doc.dump(2) + "\n";
}

std::string report_csv(const DatasetReport& report) {
  std::string out = "id,dice,pq,dq,sq,n_tp,n_fp,n_fn,n_images,flags\n";
  for (const auto& r : report.per_image) csv_row(out, r.image_id, r);
  if (report.aggregate_mean) csv_row(out, "aggregate_mean", *report.aggregate_mean);
  if (report.aggregate_pooled) csv_row(out, "aggregate_pooled", *report.aggregate_pooled);
  return out;
}

void write_report(const DatasetReport& report, const std::filesystem::path& json_path,
                  const std::optional<std::filesystem::path>& csv_path) {
  write_file(json_path, report_json(report));
  if (csv_path) write_file(*csv_path, report_csv(report));
}

}  // namespace nucleval
