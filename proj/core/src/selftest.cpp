#include "nucleval/selftest.hpp"

#include <algorithm>
#include <cmath>

namespace nucleval {
namespace {

struct Rect {
  int x0, y0, x1, y1;
};

Rect clip(Rect r, int w, int h) {
  r.x0 = std::clamp(r.x0, 0, w);
  r.x1 = std::clamp(r.x1, 0, w);
  r.y0 = std::clamp(r.y0, 0, h);
  r.y1 = std::clamp(r.y1, 0, h);
  return r;
}

void paint(InstanceMap& map, const Rect& r, InstanceId id) {
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) map.set(y, x, id);
  }
}

int uniform(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

std::vector<InstanceId> distinct_ids(std::mt19937_64& rng, int n) {
  std::vector<InstanceId> ids;
  while (static_cast<int>(ids.size()) < n) {
    const auto id = static_cast<InstanceId>(uniform(rng, 1, 5000));
    if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  return ids;
}

bool same_tp_pairs(const MatchSet& a, const MatchSet& b) {
  if (a.tp.size() != b.tp.size()) return false;
  for (std::size_t i = 0; i < a.tp.size(); ++i) {
    if (a.tp[i].gt != b.tp[i].gt || a.tp[i].pred != b.tp[i].pred) return false;
  }
  return a.fp == b.fp && a.fn == b.fn;
}

}  // namespace

std::pair<InstanceMap, InstanceMap> random_instance_pair(std::mt19937_64& rng,
                                                         const RandomPairOptions& options) {
  const int w = uniform(rng, 1, options.max_side);
  const int h = uniform(rng, 1, options.max_side);
  InstanceMap gt(w, h);
  InstanceMap pred(w, h);

  const int n_gt = uniform(rng, 0, options.max_instances);
  const int max_extent = std::max(2, std::max(w, h) / 3);
  std::vector<Rect> gt_rects;
  for (int i = 0; i < n_gt; ++i) {
    const int rw = uniform(rng, 1, max_extent);
    const int rh = uniform(rng, 1, max_extent);
    const int x = uniform(rng, 0, std::max(0, w - 1));
    const int y = uniform(rng, 0, std::max(0, h - 1));
    gt_rects.push_back(clip({x, y, x + rw, y + rh}, w, h));
  }

  std::vector<Rect> pred_rects;
  for (const auto& r : gt_rects) {
    if (pred_rects.size() >= static_cast<std::size_t>(options.max_instances)) break;
    if (uniform(rng, 0, 9) < 2) continue;
    const int jitter = uniform(rng, 0, 3);
    pred_rects.push_back(clip({r.x0 + uniform(rng, -jitter, jitter), r.y0 + uniform(rng, -jitter, jitter),
                               r.x1 + uniform(rng, -jitter, jitter), r.y1 + uniform(rng, -jitter, jitter)},
                              w, h));
  }
  const int extra = uniform(rng, 0, 2);
  for (int i = 0; i < extra && pred_rects.size() < static_cast<std::size_t>(options.max_instances); ++i) {
    const int x = uniform(rng, 0, std::max(0, w - 1));
    const int y = uniform(rng, 0, std::max(0, h - 1));
    pred_rects.push_back(clip({x, y, x + uniform(rng, 1, max_extent), y + uniform(rng, 1, max_extent)}, w, h));
  }

  const auto gt_ids = distinct_ids(rng, static_cast<int>(gt_rects.size()));
  const auto pred_ids = distinct_ids(rng, static_cast<int>(pred_rects.size()));
  for (std::size_t i = 0; i < gt_rects.size(); ++i) paint(gt, gt_rects[i], gt_ids[i]);
  for (std::size_t i = 0; i < pred_rects.size(); ++i) paint(pred, pred_rects[i], pred_ids[i]);
  return {std::move(gt), std::move(pred)};
}

SelftestSummary run_oracle_selftest(int cases, std::uint64_t seed, double threshold) {
  std::mt19937_64 rng(seed);
  SelftestSummary summary;
  for (int i = 0; i < cases; ++i) {
    const auto [gt, pred] = random_instance_pair(rng);
    const auto table = iou_table(gt, pred);
    const auto fast = match_instances(table, threshold);
    const auto oracle = match_instances_oracle(table, threshold);
    ++summary.cases;
    summary.total_tp += static_cast<std::int64_t>(fast.tp.size());
    if (!same_tp_pairs(fast, oracle)) {
      ++summary.tp_mismatches;
      if (summary.first_failure.empty()) {
        summary.first_failure = "case " + std::to_string(i) + ": tp sets differ";
      }
    }
    const auto q = panoptic_quality(fast);
    const double err = std::abs(q.pq - q.dq * q.sq);
    summary.max_decomposition_error = std::max(summary.max_decomposition_error, err);
    if (err > 1e-12) {
      ++summary.decomposition_failures;
      if (summary.first_failure.empty()) {
        summary.first_failure = "case " + std::to_string(i) + ": pq != dq * sq";
      }
    }
  }
  return summary;
}

}  // namespace nucleval
