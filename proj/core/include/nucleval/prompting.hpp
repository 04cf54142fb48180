#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nucleval/mask.hpp"

namespace nucleval {

struct Detection {
  BoundingBox bbox;
  double score = 0.0;
};

enum class PromptKind { kPoints, kBoxes };

/// Ordered visual prompts for one image. Only the list matching `kind` is
/// populated; a prompt's index is its identity downstream.
struct PromptSet {
  PromptKind kind = PromptKind::kPoints;
  std::vector<Point> points;
  std::vector<BoundingBox> boxes;

  std::size_t size() const { return kind == PromptKind::kPoints ? points.size() : boxes.size(); }
  bool empty() const { return size() == 0; }

  // Throws DataError if the wrong list is populated or a prompt leaves the image.
  void validate(int width, int height) const;

  friend bool operator==(const PromptSet&, const PromptSet&) = default;
};

struct GtPrompts {
  PromptSet prompts;
  std::vector<InstanceId> ids;  // ids[i] is the instance prompt i was derived from
};

struct CandidateMask {
  std::size_t prompt_index = 0;
  RleMask rle;
  double score = 0.0;
};

struct AssemblyOptions {
  std::int64_t min_area = 3;
  double score_floor = 0.0;
};

PromptSet centers_from_detections(std::span<const Detection> detections);

/// One point per instance in ascending id order: the bounding-box center when
/// its pixel belongs to the instance, otherwise the center of the nearest
/// instance pixel (Euclidean, ties broken row-major).
GtPrompts gt_point_prompts(const InstanceMap& gt);

GtPrompts gt_box_prompts(const InstanceMap& gt);

/// Greedy score-priority assembly: survivors of the score floor claim pixels in
/// (score desc, prompt_index asc) order, instances smaller than min_area are
/// dropped, and the rest are numbered 1..K in claim order.
InstanceMap assemble_instance_map(std::span<const CandidateMask> candidates, int width,
                                  int height, const AssemblyOptions& options = {});

// Pixel containing a continuous point, clamped to the image.
std::pair<int, int> pixel_of(const Point& p, int width, int height);

}  // namespace nucleval
