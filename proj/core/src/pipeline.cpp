#include "nucleval/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>

#include "json_codec.hpp"
#include "nucleval/error.hpp"
#include "nucleval/label_io.hpp"

namespace nucleval {
namespace {

// Runs task(worker, index) for index in [0, n) on `workers` threads. Indices
// are handed out in order; once `stop` is set no new index is started.
void for_each_index(std::size_t n, int workers, const std::atomic<bool>& stop,
                    const std::function<void(int, std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  auto loop = [&](int worker) {
    for (;;) {
      if (stop.load()) return;
      const auto i = next.fetch_add(1);
      if (i >= n) return;
      task(worker, i);
    }
  };
  const int count = std::max(1, std::min<int>(workers, static_cast<int>(std::max<std::size_t>(n, 1))));
  if (count == 1) {
    loop(0);
    return;
  }
  std::vector<std::jthread> threads;
  threads.reserve(count);
  for (int w = 0; w < count; ++w) threads.emplace_back(loop, w);
}

const Sample& sample_for(const DatasetManifest& manifest, const std::string& id) {
  const Sample* s = manifest.find(id);
  if (s == nullptr) throw DataError("image id '" + id + "' is not in the manifest");
  return *s;
}

void write_prediction(const std::filesystem::path& path, const InstanceMap& map, int worker) {
  std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp" + std::to_string(::getpid()) + "_" + std::to_string(worker);
  write_label_png(tmp, map);
  std::filesystem::rename(tmp, path);
}

InstanceMap drop_small(InstanceMap map, std::int64_t min_area) {
  if (min_area <= 1) return map;
  std::vector<InstanceId> small;
  for (const auto& s : instance_stats(map)) {
    if (s.area < min_area) small.push_back(s.id);
  }
  if (small.empty()) return map;
  for (auto& v : map.labels()) {
    if (v != 0 && std::binary_search(small.begin(), small.end(), v)) v = 0;
  }
  return map;
}

struct Collected {
  std::mutex mutex;
  std::vector<MetricsReport> reports;
  std::vector<ImageFailure> failures;

  void add(MetricsReport r) {
    std::lock_guard lock(mutex);
    reports.push_back(std::move(r));
  }
  void fail(const std::string& id, ErrorKind kind, const std::string& message) {
    std::lock_guard lock(mutex);
    failures.push_back({id, kind, message});
  }
};

}  // namespace

PromptMode parse_prompt_mode(const std::string& name) {
  if (name == "gt-points") return PromptMode::kGtPoints;
  if (name == "gt-boxes") return PromptMode::kGtBoxes;
  if (name == "detections") return PromptMode::kDetections;
  throw UsageError("unknown prompt mode '" + name + "' (expected gt-points, gt-boxes or detections)");
}

std::string to_string(PromptMode mode) {
  switch (mode) {
    case PromptMode::kGtPoints: return "gt-points";
    case PromptMode::kGtBoxes: return "gt-boxes";
    case PromptMode::kDetections: return "detections";
  }
  return "unknown";
}

void RunConfig::validate() const {
  if (prompt_mode == PromptMode::kDetections && !detections_dir) {
    throw UsageError("prompt mode 'detections' requires a detections directory");
  }
  if (endpoint_cmd.empty()) throw UsageError("an endpoint command is required");
  validate_threshold(match_threshold);
  if (assembly.min_area < 0) throw UsageError("min_area must be non-negative");
  if (!(assembly.score_floor >= 0.0 && assembly.score_floor <= 1.0)) {
    throw UsageError("score_floor must lie in [0, 1]");
  }
  if (timeout.count() <= 0) throw UsageError("endpoint timeout must be positive");
}

int resolve_workers(int requested) {
  if (const char* env = std::getenv("NUCLEVAL_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (*end == '\0' && v > 0) return static_cast<int>(v);
    throw UsageError(std::string("NUCLEVAL_WORKERS must be a positive integer, got '") + env + "'");
  }
  return std::max(1, requested);
}

std::vector<Detection> load_detections(const std::filesystem::path& path,
                                       const std::string& image_id, int width, int height) {
  if (!std::filesystem::is_regular_file(path)) {
    throw DataError("detections file not found: " + path.string());
  }
  const auto doc = json_codec::parse_file(path.string());
  if (doc.contains("image_id") && doc.at("image_id") != image_id) {
    throw DataError("detections file " + path.string() + " is for a different image");
  }
  auto dets = json_codec::detections_from_json(doc);
  for (const auto& d : dets) {
    if (!d.bbox.within(width, height)) {
      throw DataError("detection box outside the " + std::to_string(width) + "x" +
                      std::to_string(height) + " image in " + path.string());
    }
  }
  return dets;
}

PromptSet build_prompts(const Sample& sample, const InstanceMap& gt, PromptMode mode,
                        const std::optional<std::filesystem::path>& detections_dir) {
  switch (mode) {
    case PromptMode::kGtPoints: return gt_point_prompts(gt).prompts;
    case PromptMode::kGtBoxes: return gt_box_prompts(gt).prompts;
    case PromptMode::kDetections: {
      if (!detections_dir) throw UsageError("detections mode needs a detections directory");
      const auto dets = load_detections(*detections_dir / (sample.id + ".json"), sample.id,
                                        gt.width(), gt.height());
      return centers_from_detections(dets);
    }
  }
  throw UsageError("unknown prompt mode");
}

std::filesystem::path prediction_path(const std::filesystem::path& pred_dir,
                                      const std::string& image_id) {
  return pred_dir / (image_id + ".png");
}

DatasetReport run_pipeline(const DatasetManifest& manifest, const Split& split,
                           const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const auto& ids = split.test_ids;
  for (const auto& id : ids) sample_for(manifest, id);

  const auto pred_dir = out_dir / "pred";
  std::filesystem::create_directories(pred_dir);
  const int workers = std::max(1, config.workers);

  // One endpoint process per worker, spawned on first use.
  std::vector<std::unique_ptr<SegmenterProcess>> endpoints(static_cast<std::size_t>(workers));
  std::vector<char> done(ids.size(), 0);
  std::atomic<bool> stop{false};
  Collected collected;

  for_each_index(ids.size(), workers, stop, [&](int worker, std::size_t i) {
    const auto& sample = sample_for(manifest, ids[i]);
    const auto pred_path = prediction_path(pred_dir, sample.id);
    try {
      const auto gt = read_label_png(sample.gt_path);
      InstanceMap pred;
      if (!config.force && std::filesystem::exists(pred_path)) {
        pred = read_label_png(pred_path);
      } else {
        PromptRequest request{sample.id, sample.image_path, gt.width(), gt.height(),
                              build_prompts(sample, gt, config.prompt_mode, config.detections_dir)};
        request.prompts.validate(gt.width(), gt.height());
        auto& endpoint = endpoints[static_cast<std::size_t>(worker)];
        if (!endpoint) {
          endpoint = std::make_unique<SegmenterProcess>(config.endpoint_cmd, config.timeout);
        }
        const auto response = endpoint->query(request);
        pred = assemble_instance_map(response.candidates, gt.width(), gt.height(), config.assembly);
        write_prediction(pred_path, pred, worker);
      }
      auto report = evaluate_pair(gt, pred, {config.match_threshold});
      report.image_id = sample.id;
      collected.add(std::move(report));
    } catch (const EndpointError& e) {
      collected.fail(sample.id, ErrorKind::kEndpoint, e.what());
      stop.store(true);
    } catch (const Error& e) {
      collected.fail(sample.id, e.kind(), e.what());
    } catch (const std::exception& e) {
      collected.fail(sample.id, ErrorKind::kData, e.what());
    }
    done[i] = 1;
  });

  for (auto& endpoint : endpoints) {
    if (endpoint) endpoint->close();
  }

  auto report = make_dataset_report(std::move(collected.reports), std::move(collected.failures));
  report.aborted = stop.load();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!done[i]) report.not_run.push_back(ids[i]);
  }
  write_report(report, out_dir / "report.json", out_dir / "report.csv");
  return report;
}

DatasetReport evaluate_dirs(const DatasetManifest& manifest, std::span<const std::string> ids,
                            const std::filesystem::path& pred_dir, const EvalConfig& config) {
  validate_threshold(config.match_threshold);
  for (const auto& id : ids) sample_for(manifest, id);
  const std::atomic<bool> never{false};
  Collected collected;

  for_each_index(ids.size(), config.workers, never, [&](int, std::size_t i) {
    const auto& sample = sample_for(manifest, ids[i]);
    try {
      const auto gt = read_label_png(sample.gt_path);
      const auto path = prediction_path(pred_dir, sample.id);
      const bool missing = !std::filesystem::exists(path);
      InstanceMap pred = missing ? InstanceMap(gt.width(), gt.height()) : read_label_png(path);
      if (!pred.same_shape(gt)) {
        throw DataError("prediction " + path.string() + " is " + std::to_string(pred.width()) +
                        "x" + std::to_string(pred.height()) + ", gt is " +
                        std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
      }
      auto report = evaluate_pair(gt, drop_small(std::move(pred), config.min_area),
                                  {config.match_threshold});
      report.image_id = sample.id;
      report.missing_prediction = missing;
      collected.add(std::move(report));
    } catch (const Error& e) {
      collected.fail(sample.id, e.kind(), e.what());
    } catch (const std::exception& e) {
      collected.fail(sample.id, ErrorKind::kData, e.what());
    }
  });

  return make_dataset_report(std::move(collected.reports), std::move(collected.failures));
}

}  // namespace nucleval
