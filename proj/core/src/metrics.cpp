#include "nucleval/metrics.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "nucleval/error.hpp"

namespace nucleval {
namespace {

std::uint64_t pair_key(InstanceId gt, InstanceId pred) {
  return (static_cast<std::uint64_t>(gt) << 32) | pred;
}

void require_same_shape(const InstanceMap& gt, const InstanceMap& pred) {
  if (!gt.same_shape(pred)) {
    throw DataError("dimension mismatch: gt " + std::to_string(gt.width()) + "x" +
                    std::to_string(gt.height()) + " vs pred " + std::to_string(pred.width()) +
                    "x" + std::to_string(pred.height()));
  }
}

std::vector<InstanceId> unmatched(const std::map<InstanceId, std::int64_t>& areas,
                                  const std::vector<InstanceId>& matched) {
  std::vector<InstanceId> out;
  for (const auto& [id, area] : areas) {
    if (!std::binary_search(matched.begin(), matched.end(), id)) out.push_back(id);
  }
  return out;
}

MatchSet finish_match(std::vector<TruePositive> tp, const IouTable& table) {
  std::sort(tp.begin(), tp.end(),
            [](const TruePositive& a, const TruePositive& b) { return a.gt < b.gt; });
  std::vector<InstanceId> gt_matched;
  std::vector<InstanceId> pred_matched;
  for (const auto& m : tp) {
    gt_matched.push_back(m.gt);
    pred_matched.push_back(m.pred);
  }
  std::sort(gt_matched.begin(), gt_matched.end());
  std::sort(pred_matched.begin(), pred_matched.end());
  MatchSet out;
  out.fp = unmatched(table.pred_areas, pred_matched);
  out.fn = unmatched(table.gt_areas, gt_matched);
  out.tp = std::move(tp);
  return out;
}

// Summed in ascending order so the total does not depend on instance ids or on
// which side is gt.
double tp_iou_sum(const std::vector<TruePositive>& tp) {
  std::vector<double> ious;
  ious.reserve(tp.size());
  for (const auto& m : tp) ious.push_back(m.iou);
  std::sort(ious.begin(), ious.end());
  double sum = 0.0;
  for (double v : ious) sum += v;
  return sum;
}

double mean_of(std::span<const MetricsReport> reports, double MetricsReport::*field) {
  double sum = 0.0;
  for (const auto& r : reports) sum += r.*field;
  return sum / static_cast<double>(reports.size());
}

std::vector<MetricsReport> sorted_per_image(std::span<const MetricsReport> reports) {
  if (reports.empty()) throw std::invalid_argument("cannot aggregate an empty report list");
  for (const auto& r : reports) {
    if (r.n_images != 1) {
      throw std::invalid_argument("aggregate input '" + r.image_id + "' is not a per-image report");
    }
  }
  std::vector<MetricsReport> sorted(reports.begin(), reports.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const MetricsReport& a, const MetricsReport& b) {
                     return a.image_id < b.image_id;
                   });
  return sorted;
}

void sum_counts(std::span<const MetricsReport> reports, MetricsReport& out) {
  for (const auto& r : reports) {
    out.n_tp += r.n_tp;
    out.n_fp += r.n_fp;
    out.n_fn += r.n_fn;
    out.tp_iou_sum += r.tp_iou_sum;
    out.fg_intersection += r.fg_intersection;
    out.gt_foreground += r.gt_foreground;
    out.pred_foreground += r.pred_foreground;
    out.empty_gt = out.empty_gt || r.empty_gt;
    out.missing_prediction = out.missing_prediction || r.missing_prediction;
  }
  out.n_images = static_cast<std::int64_t>(reports.size());
}

PanopticQuality pq_from_counts(std::int64_t tp, std::int64_t fp, std::int64_t fn,
                               double iou_sum) {
  if (tp == 0) {
    if (fp == 0 && fn == 0) return {1.0, 1.0, 1.0};
    return {0.0, 0.0, 0.0};
  }
  const double dq = static_cast<double>(tp) /
                    (static_cast<double>(tp) + 0.5 * static_cast<double>(fp) +
                     0.5 * static_cast<double>(fn));
  const double sq = iou_sum / static_cast<double>(tp);
  return {dq * sq, dq, sq};
}

double dice_from_counts(std::int64_t inter, std::int64_t gt_fg, std::int64_t pred_fg) {
  if (gt_fg + pred_fg == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(gt_fg + pred_fg);
}

}  // namespace

std::optional<double> IouTable::iou(InstanceId gt, InstanceId pred) const {
  const auto it = std::lower_bound(
      entries.begin(), entries.end(), std::pair{gt, pred},
      [](const PairOverlap& e, const std::pair<InstanceId, InstanceId>& key) {
        return std::pair{e.gt, e.pred} < key;
      });
  if (it == entries.end() || it->gt != gt || it->pred != pred) return std::nullopt;
  return it->iou;
}

void validate_threshold(double threshold) {
  if (!(threshold >= 0.5 && threshold < 1.0)) {
    throw UsageError("match threshold must lie in [0.5, 1), got " + std::to_string(threshold));
  }
}

IouTable iou_table(const InstanceMap& gt, const InstanceMap& pred) {
  require_same_shape(gt, pred);
  const auto g = gt.labels();
  const auto p = pred.labels();

  std::unordered_map<std::uint64_t, std::int64_t> overlaps;
  std::unordered_map<InstanceId, std::int64_t> gt_areas;
  std::unordered_map<InstanceId, std::int64_t> pred_areas;

  // Instances are spatially coherent, so consecutive pixels usually repeat the
  // same (gt, pred) pair; flush a run only when the pair changes.
  std::uint64_t run_key = 0;
  std::int64_t run_len = 0;
  InstanceId gt_run = 0, pred_run = 0;
  std::int64_t gt_len = 0, pred_len = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const InstanceId a = g[i];
    const InstanceId b = p[i];
    if (a != gt_run) {
      if (gt_run != 0) gt_areas[gt_run] += gt_len;
      gt_run = a;
      gt_len = 0;
    }
    ++gt_len;
    if (b != pred_run) {
      if (pred_run != 0) pred_areas[pred_run] += pred_len;
      pred_run = b;
      pred_len = 0;
    }
    ++pred_len;
    const std::uint64_t key = (a != 0 && b != 0) ? pair_key(a, b) : 0;
    if (key != run_key) {
      if (run_key != 0) overlaps[run_key] += run_len;
      run_key = key;
      run_len = 0;
    }
    ++run_len;
  }
  if (gt_run != 0) gt_areas[gt_run] += gt_len;
  if (pred_run != 0) pred_areas[pred_run] += pred_len;
  if (run_key != 0) overlaps[run_key] += run_len;

  IouTable table;
  table.gt_areas.insert(gt_areas.begin(), gt_areas.end());
  table.pred_areas.insert(pred_areas.begin(), pred_areas.end());
  table.entries.reserve(overlaps.size());
  for (const auto& [key, inter] : overlaps) {
    const auto gid = static_cast<InstanceId>(key >> 32);
    const auto pid = static_cast<InstanceId>(key & 0xFFFFFFFFu);
    const std::int64_t uni = table.gt_areas[gid] + table.pred_areas[pid] - inter;
    table.entries.push_back(
        {gid, pid, inter, static_cast<double>(inter) / static_cast<double>(uni)});
  }
  std::sort(table.entries.begin(), table.entries.end(),
            [](const PairOverlap& a, const PairOverlap& b) {
              return std::pair{a.gt, a.pred} < std::pair{b.gt, b.pred};
            });
  return table;
}

MatchSet match_instances(const IouTable& table, double threshold) {
  validate_threshold(threshold);
  std::vector<TruePositive> tp;
  std::unordered_map<InstanceId, InstanceId> gt_used, pred_used;
  for (const auto& e : table.entries) {
    if (!(e.iou > threshold)) continue;
    // IoU > 0.5 with two partners would need more than the instance's own area.
    if (!gt_used.emplace(e.gt, e.pred).second || !pred_used.emplace(e.pred, e.gt).second) {
      throw std::logic_error("IoU uniqueness violated for gt " + std::to_string(e.gt) +
                             " / pred " + std::to_string(e.pred));
    }
    tp.push_back({e.gt, e.pred, e.iou});
  }
  return finish_match(std::move(tp), table);
}

PanopticQuality panoptic_quality(const MatchSet& matches) {
  return pq_from_counts(static_cast<std::int64_t>(matches.tp.size()),
                        static_cast<std::int64_t>(matches.fp.size()),
                        static_cast<std::int64_t>(matches.fn.size()), tp_iou_sum(matches.tp));
}

double dice(const BinaryMask& gt, const BinaryMask& pred) {
  if (!gt.same_shape(pred)) {
    throw DataError("dimension mismatch: gt " + std::to_string(gt.width()) + "x" +
                    std::to_string(gt.height()) + " vs pred " + std::to_string(pred.width()) +
                    "x" + std::to_string(pred.height()));
  }
  std::int64_t inter = 0, a = 0, b = 0;
  const auto x = gt.bits();
  const auto y = pred.bits();
  for (std::size_t i = 0; i < x.size(); ++i) {
    a += x[i];
    b += y[i];
    inter += x[i] & y[i];
  }
  return dice_from_counts(inter, a, b);
}

MetricsReport evaluate_pair(const InstanceMap& gt, const InstanceMap& pred,
                            const EvalOptions& options) {
  require_same_shape(gt, pred);
  const auto gt_bits = binarize(gt);
  const auto pred_bits = binarize(pred);
  const auto table = iou_table(gt, pred);
  const auto matches = match_instances(table, options.match_threshold);
  const auto quality = panoptic_quality(matches);

  MetricsReport report;
  report.dice = dice(gt_bits, pred_bits);
  report.pq = quality.pq;
  report.dq = quality.dq;
  report.sq = quality.sq;
  report.n_tp = static_cast<std::int64_t>(matches.tp.size());
  report.n_fp = static_cast<std::int64_t>(matches.fp.size());
  report.n_fn = static_cast<std::int64_t>(matches.fn.size());
  report.n_images = 1;
  report.tp_iou_sum = tp_iou_sum(matches.tp);
  report.gt_foreground = gt_bits.popcount();
  report.pred_foreground = pred_bits.popcount();
  for (std::size_t i = 0; i < gt_bits.size(); ++i) {
    report.fg_intersection += gt_bits.bits()[i] & pred_bits.bits()[i];
  }
  report.empty_gt = table.gt_areas.empty();
  return report;
}

MetricsReport aggregate_reports(std::span<const MetricsReport> reports) {
  const auto sorted = sorted_per_image(reports);
  MetricsReport out;
  out.image_id = "mean";
  out.dice = mean_of(sorted, &MetricsReport::dice);
  out.pq = mean_of(sorted, &MetricsReport::pq);
  out.dq = mean_of(sorted, &MetricsReport::dq);
  out.sq = mean_of(sorted, &MetricsReport::sq);
  sum_counts(sorted, out);
  return out;
}

MetricsReport aggregate_pooled(std::span<const MetricsReport> reports) {
  const auto sorted = sorted_per_image(reports);
  MetricsReport out;
  out.image_id = "pooled";
  sum_counts(sorted, out);
  const auto quality = pq_from_counts(out.n_tp, out.n_fp, out.n_fn, out.tp_iou_sum);
  out.pq = quality.pq;
  out.dq = quality.dq;
  out.sq = quality.sq;
  out.dice = dice_from_counts(out.fg_intersection, out.gt_foreground, out.pred_foreground);
  return out;
}

}  // namespace nucleval
