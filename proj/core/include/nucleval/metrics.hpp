#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nucleval/mask.hpp"

namespace nucleval {

inline constexpr double kDefaultMatchThreshold = 0.5;

struct PairOverlap {
  InstanceId gt = 0;
  InstanceId pred = 0;
  std::int64_t intersection = 0;
  double iou = 0.0;

  friend bool operator==(const PairOverlap&, const PairOverlap&) = default;
};

/// Sparse IoU table: only pairs with a positive intersection are stored.
/// Entries are sorted by (gt, pred).
struct IouTable {
  std::vector<PairOverlap> entries;
  std::map<InstanceId, std::int64_t> gt_areas;
  std::map<InstanceId, std::int64_t> pred_areas;

  std::optional<double> iou(InstanceId gt, InstanceId pred) const;

  friend bool operator==(const IouTable&, const IouTable&) = default;
};

struct TruePositive {
  InstanceId gt = 0;
  InstanceId pred = 0;
  double iou = 0.0;

  friend bool operator==(const TruePositive&, const TruePositive&) = default;
};

/// tp sorted by gt id; fp and fn ascending.
struct MatchSet {
  std::vector<TruePositive> tp;
  std::vector<InstanceId> fp;
  std::vector<InstanceId> fn;

  friend bool operator==(const MatchSet&, const MatchSet&) = default;
};

struct PanopticQuality {
  double pq = 0.0;
  double dq = 0.0;
  double sq = 0.0;
};

/// Per-image or aggregate scores. The integer sums let a pooled aggregate be
/// recomputed from per-image reports.
struct MetricsReport {
  std::string image_id;
  double dice = 0.0;
  double pq = 0.0;
  double dq = 0.0;
  double sq = 0.0;
  std::int64_t n_tp = 0;
  std::int64_t n_fp = 0;
  std::int64_t n_fn = 0;
  std::int64_t n_images = 1;

  double tp_iou_sum = 0.0;
  std::int64_t fg_intersection = 0;
  std::int64_t gt_foreground = 0;
  std::int64_t pred_foreground = 0;

  bool empty_gt = false;
  bool missing_prediction = false;
};

// Throws DataError on a dimension mismatch.
IouTable iou_table(const InstanceMap& gt, const InstanceMap& pred);

/// Pairs with IoU strictly above `threshold`. For thresholds >= 0.5 this set is
/// one-to-one; a violation throws std::logic_error.
MatchSet match_instances(const IouTable& table, double threshold = kDefaultMatchThreshold);

inline constexpr std::size_t kOracleMaxInstances = 12;

/// Exhaustive optimal one-to-one assignment maximising (|tp|, sum of IoU) over
/// pairs with IoU above `threshold`. Reference for match_instances; throws
/// std::invalid_argument when either side has more than kOracleMaxInstances ids.
MatchSet match_instances_oracle(const IouTable& table, double threshold = kDefaultMatchThreshold);

PanopticQuality panoptic_quality(const MatchSet& matches);

// Both masks empty scores 1.0. Throws DataError on a dimension mismatch.
double dice(const BinaryMask& gt, const BinaryMask& pred);

struct EvalOptions {
  double match_threshold = kDefaultMatchThreshold;
};

MetricsReport evaluate_pair(const InstanceMap& gt, const InstanceMap& pred,
                            const EvalOptions& options = {});

/// Unweighted per-image mean; counts are summed. Reports are reduced in
/// image-id order. Throws std::invalid_argument on an empty list or a
/// non-per-image report.
MetricsReport aggregate_reports(std::span<const MetricsReport> reports);

/// Pooled variant: counts, TP IoUs and foreground pixels summed over the
/// dataset before computing the scores.
MetricsReport aggregate_pooled(std::span<const MetricsReport> reports);

void validate_threshold(double threshold);

}  // namespace nucleval
