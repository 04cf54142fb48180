#include "nucleval/prompting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "nucleval/error.hpp"

namespace nucleval {

void PromptSet::validate(int width, int height) const {
  if (kind == PromptKind::kPoints && !boxes.empty()) {
    throw DataError("point prompt set carries boxes");
  }
  if (kind == PromptKind::kBoxes && !points.empty()) {
    throw DataError("box prompt set carries points");
  }
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!(p.x >= 0.0 && p.x < width && p.y >= 0.0 && p.y < height)) {
      throw DataError("point prompt " + std::to_string(i) + " lies outside the " +
                      std::to_string(width) + "x" + std::to_string(height) + " image");
    }
  }
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (!boxes[i].within(width, height)) {
      throw DataError("box prompt " + std::to_string(i) + " is invalid or outside the image");
    }
  }
}

std::pair<int, int> pixel_of(const Point& p, int width, int height) {
  const int col = std::clamp(static_cast<int>(std::floor(p.x)), 0, std::max(width - 1, 0));
  const int row = std::clamp(static_cast<int>(std::floor(p.y)), 0, std::max(height - 1, 0));
  return {row, col};
}

PromptSet centers_from_detections(std::span<const Detection> detections) {
  PromptSet out;
  out.kind = PromptKind::kPoints;
  out.points.reserve(detections.size());
  for (const auto& d : detections) out.points.push_back(d.bbox.center());
  return out;
}

GtPrompts gt_point_prompts(const InstanceMap& gt) {
  GtPrompts out;
  out.prompts.kind = PromptKind::kPoints;
  for (const auto& s : instance_stats(gt)) {
    const Point center = s.bbox.center();
    const auto [row, col] = pixel_of(center, gt.width(), gt.height());
    out.ids.push_back(s.id);
    if (gt.at(row, col) == s.id) {
      out.prompts.points.push_back(center);
      continue;
    }
    // Work in doubled coordinates so every distance is an exact integer.
    const std::int64_t px = static_cast<std::int64_t>(std::llround(center.x * 2.0));
    const std::int64_t py = static_cast<std::int64_t>(std::llround(center.y * 2.0));
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    int best_r = -1, best_c = -1;
    for (int r = s.bbox.y0; r < s.bbox.y1; ++r) {
      for (int c = s.bbox.x0; c < s.bbox.x1; ++c) {
        if (gt.at(r, c) != s.id) continue;
        const std::int64_t dx = 2 * c + 1 - px;
        const std::int64_t dy = 2 * r + 1 - py;
        const std::int64_t d2 = dx * dx + dy * dy;
        if (d2 < best) {
          best = d2;
          best_r = r;
          best_c = c;
        }
      }
    }
    out.prompts.points.push_back({best_c + 0.5, best_r + 0.5});
  }
  return out;
}

GtPrompts gt_box_prompts(const InstanceMap& gt) {
  GtPrompts out;
  out.prompts.kind = PromptKind::kBoxes;
  for (const auto& s : instance_stats(gt)) {
    out.ids.push_back(s.id);
    out.prompts.boxes.push_back(s.bbox);
  }
  return out;
}

InstanceMap assemble_instance_map(std::span<const CandidateMask> candidates, int width,
                                  int height, const AssemblyOptions& options) {
  std::set<std::size_t> seen;
  for (const auto& c : candidates) {
    if (c.rle.height != height || c.rle.width != width) {
      throw DataError("candidate " + std::to_string(c.prompt_index) + " has size " +
                      std::to_string(c.rle.height) + "x" + std::to_string(c.rle.width) +
                      ", expected " + std::to_string(height) + "x" + std::to_string(width));
    }
    if (!seen.insert(c.prompt_index).second) {
      throw DataError("duplicate candidate for prompt_index " + std::to_string(c.prompt_index));
    }
  }

  std::vector<const CandidateMask*> order;
  for (const auto& c : candidates) {
    if (c.score >= options.score_floor) order.push_back(&c);
  }
  std::sort(order.begin(), order.end(), [](const CandidateMask* a, const CandidateMask* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->prompt_index < b->prompt_index;
  });

  // Claim pixels with provisional slot numbers (1-based in claim order).
  InstanceMap claimed(width, height);
  std::vector<std::int64_t> areas(order.size() + 1, 0);
  for (std::size_t slot = 0; slot < order.size(); ++slot) {
    const auto& rle = order[slot]->rle;
    rle.validate();
    std::uint64_t pos = 0;
    bool on = false;
    for (auto run : rle.counts) {
      if (on) {
        for (std::uint64_t k = pos; k < pos + run; ++k) {
          const int c = static_cast<int>(k / static_cast<std::uint64_t>(height));
          const int r = static_cast<int>(k % static_cast<std::uint64_t>(height));
          if (claimed.at(r, c) == 0) {
            claimed.set(r, c, static_cast<InstanceId>(slot + 1));
            ++areas[slot + 1];
          }
        }
      }
      pos += run;
      on = !on;
    }
  }

  std::vector<InstanceId> final_id(areas.size(), 0);
  InstanceId next = 1;
  for (std::size_t slot = 1; slot < areas.size(); ++slot) {
    if (areas[slot] > 0 && areas[slot] >= options.min_area) final_id[slot] = next++;
  }
  for (auto& v : claimed.labels()) v = final_id[v];
  return claimed;
}

}  // namespace nucleval
