// nucleval: prompt-driven nuclear instance segmentation runs and scoring.
//
// Exit codes: 0 ok, 1 usage, 2 data error, 3 endpoint error.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "nucleval/endpoint.hpp"
#include "nucleval/error.hpp"
#include "nucleval/label_io.hpp"
#include "nucleval/manifest.hpp"
#include "nucleval/pipeline.hpp"
#include "nucleval/selftest.hpp"

namespace fs = std::filesystem;
using namespace nucleval;

namespace {

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

std::vector<std::string> test_ids(const DatasetManifest& manifest,
                                  const std::optional<std::string>& split_path) {
  if (split_path) return load_split(*split_path).test_ids;
  std::vector<std::string> ids;
  for (const auto& s : manifest.samples) ids.push_back(s.id);
  return ids;
}

void print_summary(const DatasetReport& report) {
  auto line = [](const char* name, const MetricsReport& r) {
    std::printf("%-8s dice %.4f  pq %.4f  dq %.4f  sq %.4f  (tp %lld fp %lld fn %lld, %lld images)\n",
                name, r.dice, r.pq, r.dq, r.sq, static_cast<long long>(r.n_tp),
                static_cast<long long>(r.n_fp), static_cast<long long>(r.n_fn),
                static_cast<long long>(r.n_images));
  };
  if (report.aggregate_mean) line("mean", *report.aggregate_mean);
  if (report.aggregate_pooled) line("pooled", *report.aggregate_pooled);
  for (const auto& f : report.failures) {
    std::fprintf(stderr, "failed %s: %s\n", f.image_id.c_str(), f.message.c_str());
  }
  if (report.aborted) {
    std::fprintf(stderr, "run aborted; %zu image(s) not run\n", report.not_run.size());
  }
}

struct Options {
  std::string manifest;
  std::optional<std::string> split;
  std::string out;
  std::string mode = "gt-points";
  std::optional<std::string> detections;
  std::string endpoint;
  std::string pred;
  std::optional<std::string> csv;
  std::string holdout;
  std::string convert_in;
  std::string adapter = "adapter";
  double threshold = kDefaultMatchThreshold;
  std::int64_t min_area = -1;
  double score_floor = 0.0;
  int workers = 1;
  bool force = false;
  double timeout_s = 120.0;
  int cases = 1000;
  std::uint64_t seed = 20230601;
};

int cmd_split(const Options& o) {
  const auto manifest = load_manifest(o.manifest);
  const auto split = make_losso_split(manifest, {o.holdout});
  save_split(o.out, split);
  std::printf("holdout %s: %zu train, %zu test\n", split.holdout_source.c_str(),
              split.train_ids.size(), split.test_ids.size());
  return 0;
}

int cmd_prompts(const Options& o) {
  const auto manifest = load_manifest(o.manifest);
  const auto mode = parse_prompt_mode(o.mode);
  if (mode == PromptMode::kDetections && !o.detections) {
    throw UsageError("--mode detections requires --detections DIR");
  }
  std::optional<fs::path> det_dir;
  if (o.detections) det_dir = *o.detections;
  fs::create_directories(o.out);
  for (const auto& id : test_ids(manifest, o.split)) {
    const Sample* sample = manifest.find(id);
    if (sample == nullptr) throw DataError("split id '" + id + "' is not in the manifest");
    const auto gt = read_label_png(sample->gt_path);
    PromptRequest request{id, sample->image_path, gt.width(), gt.height(),
                          build_prompts(*sample, gt, mode, det_dir)};
    const auto doc = nlohmann::json::parse(encode_request(request));
    std::ofstream out(fs::path(o.out) / (id + ".json"));
    out << doc.dump(2) << "\n";
    if (!out) throw DataError("cannot write prompts for " + id);
  }
  return 0;
}

int cmd_run(const Options& o) {
  const auto manifest = load_manifest(o.manifest);
  Split split;
  split.test_ids = test_ids(manifest, o.split);
  RunConfig config;
  config.prompt_mode = parse_prompt_mode(o.mode);
  config.endpoint_cmd = o.endpoint;
  if (o.detections) config.detections_dir = *o.detections;
  config.match_threshold = o.threshold;
  config.assembly.min_area = o.min_area < 0 ? AssemblyOptions{}.min_area : o.min_area;
  config.assembly.score_floor = o.score_floor;
  config.workers = resolve_workers(o.workers);
  config.force = o.force;
  config.timeout = std::chrono::milliseconds(static_cast<std::int64_t>(o.timeout_s * 1000.0));
  const auto report = run_pipeline(manifest, split, config, o.out);
  print_summary(report);
  return report.exit_code();
}

int cmd_eval(const Options& o) {
  const auto manifest = load_manifest(o.manifest);
  const auto ids = test_ids(manifest, o.split);
  EvalConfig config;
  config.match_threshold = o.threshold;
  config.min_area = std::max<std::int64_t>(0, o.min_area);
  config.workers = resolve_workers(o.workers);
  const auto report = evaluate_dirs(manifest, ids, o.pred, config);
  std::optional<fs::path> csv;
  if (o.csv) csv = *o.csv;
  write_report(report, o.out, csv);
  print_summary(report);
  return report.exit_code();
}

int cmd_selftest(const Options& o) {
  const auto start = std::chrono::steady_clock::now();
  const auto summary = run_oracle_selftest(o.cases, o.seed, o.threshold);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%d cases, %lld true positives, %d tp mismatches, %d decomposition failures "
              "(max |pq - dq*sq| = %.3g), %.2f s\n",
              summary.cases, static_cast<long long>(summary.total_tp), summary.tp_mismatches,
              summary.decomposition_failures, summary.max_decomposition_error, secs);
  if (!summary.passed()) {
    std::fprintf(stderr, "selftest FAILED: %s\n", summary.first_failure.c_str());
    return 2;
  }
  std::printf("selftest passed\n");
  return 0;
}

int cmd_convert(const Options& o) {
  const std::string command = o.adapter + " convert --in " + quote(o.convert_in) + " --out " + quote(o.out);
  const int status = std::system(command.c_str());
  if (status == -1) throw EndpointError("cannot run adapter: " + command);
  if (WIFEXITED(status) && WEXITSTATUS(status) == 0) return 0;
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
    throw EndpointError("adapter command not found: " + o.adapter);
  }
  std::fprintf(stderr, "adapter convert failed: %s\n", command.c_str());
  return 3;
}

int cmd_mock_endpoint(const Options& o) {
  const auto manifest = load_manifest(o.manifest);
  serve_identity_endpoint(std::cin, std::cout, manifest);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"nucleval: nuclear instance segmentation with promptable segmenters"};
  app.require_subcommand(1);
  Options o;

  auto* convert = app.add_subcommand("convert", "Convert a native dataset via the adapter");
  convert->add_option("--in", o.convert_in, "Native dataset root")->required();
  convert->add_option("--out", o.out, "Output directory")->required();
  convert->add_option("--adapter", o.adapter, "Adapter command");

  auto* split = app.add_subcommand("split", "Write a leave-one-source-out split");
  split->add_option("--manifest", o.manifest)->required();
  split->add_option("--holdout", o.holdout, "Source held out as the test domain")->required();
  split->add_option("--out", o.out, "Split JSON path")->required();

  auto* prompts = app.add_subcommand("prompts", "Write prompt JSON files for test images");
  prompts->add_option("--manifest", o.manifest)->required();
  prompts->add_option("--split", o.split, "Split JSON (default: every sample)");
  prompts->add_option("--mode", o.mode)->check(CLI::IsMember({"gt-points", "gt-boxes", "detections"}));
  prompts->add_option("--detections", o.detections, "Directory of <id>.json detections");
  prompts->add_option("--out", o.out, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Prompt the endpoint, assemble and score predictions");
  run->add_option("--manifest", o.manifest)->required();
  run->add_option("--split", o.split, "Split JSON (default: every sample)");
  run->add_option("--mode", o.mode)->check(CLI::IsMember({"gt-points", "gt-boxes", "detections"}));
  run->add_option("--endpoint", o.endpoint, "Segmenter command (run via /bin/sh -c)")->required();
  run->add_option("--detections", o.detections, "Directory of <id>.json detections");
  run->add_option("--out", o.out, "Run directory")->required();
  run->add_option("--threshold", o.threshold, "IoU match threshold");
  run->add_option("--min-area", o.min_area, "Minimum instance area in pixels (default 3)");
  run->add_option("--score-floor", o.score_floor, "Drop candidates scoring below this");
  run->add_option("--workers", o.workers, "Parallel workers (NUCLEVAL_WORKERS overrides)");
  run->add_option("--timeout", o.timeout_s, "Per-request endpoint timeout in seconds");
  run->add_flag("--force", o.force, "Recompute existing predictions");

  auto* eval = app.add_subcommand("eval", "Score saved predictions against ground truth");
  eval->add_option("--manifest", o.manifest)->required();
  eval->add_option("--split", o.split, "Split JSON (default: every sample)");
  eval->add_option("--pred", o.pred, "Prediction directory of <id>.png")->required();
  eval->add_option("--out", o.out, "Report JSON path")->required();
  eval->add_option("--csv", o.csv, "Report CSV path");
  eval->add_option("--threshold", o.threshold, "IoU match threshold");
  eval->add_option("--min-area", o.min_area, "Drop predicted instances below this area (default 0)");
  eval->add_option("--workers", o.workers, "Parallel workers (NUCLEVAL_WORKERS overrides)");

  auto* selftest = app.add_subcommand("selftest", "Check matching against the brute-force oracle");
  selftest->add_option("--cases", o.cases, "Random map pairs");
  selftest->add_option("--seed", o.seed);
  selftest->add_option("--threshold", o.threshold);

  auto* mock = app.add_subcommand("mock-endpoint", "Identity segmenter endpoint answering from ground truth");
  mock->group("");
  mock->add_option("--manifest", o.manifest)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*convert) return cmd_convert(o);
    if (*split) return cmd_split(o);
    if (*prompts) return cmd_prompts(o);
    if (*run) return cmd_run(o);
    if (*eval) return cmd_eval(o);
    if (*selftest) return cmd_selftest(o);
    if (*mock) return cmd_mock_endpoint(o);
  } catch (const Error& e) {
    std::fprintf(stderr, "nucleval: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "nucleval: %s\n", e.what());
    return 2;
  }
  return 1;
}
