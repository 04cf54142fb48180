#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "nucleval/metrics.hpp"

namespace nucleval {
namespace {

struct Best {
  int count = 0;
  double iou_sum = 0.0;
  int choice = -1;  // pred slot taken by this gt, -1 = unmatched
  bool known = false;
};

bool better(int count, double sum, const Best& than) {
  return count > than.count || (count == than.count && sum > than.iou_sum);
}

// Memoised search over (gt slot, used-pred bitmask); every one-to-one
// assignment restricted to eligible pairs is reachable.
class AssignmentSearch {
 public:
  AssignmentSearch(std::vector<std::vector<std::pair<int, double>>> options, int n_pred)
      : options_(std::move(options)),
        memo_(options_.size() * (std::size_t{1} << n_pred)),
        n_pred_(n_pred) {}

  const Best& solve(std::size_t gt_slot, std::uint32_t used) {
    if (gt_slot == options_.size()) return terminal_;
    auto& cell = memo_[(gt_slot << n_pred_) | used];
    if (cell.known) return cell;

    Best best;
    const auto& skip = solve(gt_slot + 1, used);
    best.count = skip.count;
    best.iou_sum = skip.iou_sum;
    best.choice = -1;
    for (const auto& [pred_slot, iou] : options_[gt_slot]) {
      const auto bit = std::uint32_t{1} << pred_slot;
      if (used & bit) continue;
      const auto& rest = solve(gt_slot + 1, used | bit);
      if (better(rest.count + 1, rest.iou_sum + iou, best)) {
        best.count = rest.count + 1;
        best.iou_sum = rest.iou_sum + iou;
        best.choice = pred_slot;
      }
    }
    best.known = true;
    cell = best;
    return cell;
  }

 private:
  std::vector<std::vector<std::pair<int, double>>> options_;
  std::vector<Best> memo_;
  int n_pred_;
  Best terminal_{0, 0.0, -1, true};
};

}  // namespace

MatchSet match_instances_oracle(const IouTable& table, double threshold) {
  if (!(threshold >= 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("oracle threshold must lie in [0, 1)");
  }
  if (table.gt_areas.size() > kOracleMaxInstances ||
      table.pred_areas.size() > kOracleMaxInstances) {
    throw std::invalid_argument(
        "oracle is limited to " + std::to_string(kOracleMaxInstances) +
        " instances per side, got " + std::to_string(table.gt_areas.size()) + " gt / " +
        std::to_string(table.pred_areas.size()) + " pred");
  }

  std::vector<InstanceId> gt_ids, pred_ids;
  for (const auto& [id, area] : table.gt_areas) gt_ids.push_back(id);
  for (const auto& [id, area] : table.pred_areas) pred_ids.push_back(id);
  auto slot_of = [](const std::vector<InstanceId>& ids, InstanceId id) {
    return static_cast<int>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };

  std::vector<std::vector<std::pair<int, double>>> options(gt_ids.size());
  for (const auto& e : table.entries) {
    if (e.iou > threshold) {
      options[slot_of(gt_ids, e.gt)].emplace_back(slot_of(pred_ids, e.pred), e.iou);
    }
  }

  AssignmentSearch search(options, static_cast<int>(pred_ids.size()));
  MatchSet out;
  std::vector<bool> pred_taken(pred_ids.size(), false);
  std::uint32_t used = 0;
  for (std::size_t g = 0; g < gt_ids.size(); ++g) {
    const auto& step = search.solve(g, used);
    if (step.choice < 0) {
      out.fn.push_back(gt_ids[g]);
      continue;
    }
    double iou = 0.0;
    for (const auto& [slot, value] : options[g]) {
      if (slot == step.choice) iou = value;
    }
    out.tp.push_back({gt_ids[g], pred_ids[step.choice], iou});
    pred_taken[step.choice] = true;
    used |= std::uint32_t{1} << step.choice;
  }
  for (std::size_t p = 0; p < pred_ids.size(); ++p) {
    if (!pred_taken[p]) out.fp.push_back(pred_ids[p]);
  }
  return out;
}

}  // namespace nucleval
