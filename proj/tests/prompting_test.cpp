#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "nucleval/error.hpp"
#include "nucleval/prompting.hpp"
#include "test_support.hpp"

namespace nucleval {
namespace {

using testing::map_of;
using testing::mask_of;

CandidateMask candidate(std::size_t index, double score, const BinaryMask& mask) {
  return {index, rle_encode(mask), score};
}

TEST(CentersFromDetections, Midpoints) {
  const std::vector<Detection> dets{{{2, 4, 6, 8}, 0.9}, {{3, 3, 4, 4}, 0.1}};
  const auto p = centers_from_detections(dets);
  EXPECT_EQ(p.kind, PromptKind::kPoints);
  ASSERT_EQ(p.points.size(), 2u);
  EXPECT_EQ(p.points[0], (Point{4.0, 6.0}));
  EXPECT_EQ(p.points[1], (Point{3.5, 3.5}));
  EXPECT_TRUE(centers_from_detections({}).empty());
}

TEST(GtPointPrompts, CenterOnInstance) {
  const auto p = gt_point_prompts(map_of({{3, 3, 0}, {3, 3, 0}, {0, 0, 0}}));
  ASSERT_EQ(p.prompts.points.size(), 1u);
  EXPECT_EQ(p.prompts.points[0], (Point{1.0, 1.0}));
  EXPECT_EQ(p.ids, std::vector<InstanceId>{3});
}

TEST(GtPointPrompts, ConcaveShapeSnapsToNearestPixelRowMajor) {
  // L shape: bbox center (1.5, 1.5) sits on background pixel (1, 1). Pixel
  // centers (1.5, 0.5) and (0.5, 1.5) tie at distance 1; row 0 wins.
  const auto p = gt_point_prompts(map_of({{1, 1, 1}, {1, 0, 0}, {1, 0, 0}}));
  ASSERT_EQ(p.prompts.points.size(), 1u);
  EXPECT_EQ(p.prompts.points[0], (Point{1.5, 0.5}));
}

TEST(GtPointPrompts, EmptyMap) {
  const auto p = gt_point_prompts(InstanceMap(5, 5));
  EXPECT_TRUE(p.prompts.empty());
  EXPECT_TRUE(p.ids.empty());
}

TEST(GtPointPrompts, PointsHitTheirInstance) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    // Random 8-connected blobs give plenty of concave shapes.
    const auto gt = connected_components(testing::random_mask(rng, 30), Connectivity::kEight);
    const auto p = gt_point_prompts(gt);
    const auto stats = instance_stats(gt);
    ASSERT_EQ(p.ids.size(), stats.size());
    for (std::size_t i = 0; i < p.ids.size(); ++i) {
      EXPECT_EQ(p.ids[i], stats[i].id);
      const auto& pt = p.prompts.points[i];
      ASSERT_GT(pt.x, 0.0);
      ASSERT_LT(pt.x, gt.width());
      ASSERT_GT(pt.y, 0.0);
      ASSERT_LT(pt.y, gt.height());
      const auto [row, col] = pixel_of(pt, gt.width(), gt.height());
      ASSERT_EQ(gt.at(row, col), p.ids[i]);
    }
  }
}

TEST(GtBoxPrompts, TightHalfOpenBoxes) {
  InstanceMap gt(6, 4);
  testing::fill_rect(gt, 3, 1, 5, 3, 2);
  const auto p = gt_box_prompts(gt);
  ASSERT_EQ(p.prompts.boxes.size(), 1u);
  EXPECT_EQ(p.prompts.boxes[0], (BoundingBox{3, 1, 5, 3}));
  EXPECT_EQ(p.prompts.kind, PromptKind::kBoxes);

  const auto full = gt_box_prompts(map_of({{1, 1}, {1, 1}, {1, 1}}));
  EXPECT_EQ(full.prompts.boxes[0], (BoundingBox{0, 0, 2, 3}));
  EXPECT_TRUE(gt_box_prompts(InstanceMap(2, 2)).prompts.empty());
}

TEST(PromptSet, ValidateBounds) {
  PromptSet points;
  points.points = {{0.5, 0.5}, {3.9, 1.0}};
  EXPECT_NO_THROW(points.validate(4, 2));
  points.points.push_back({4.0, 1.0});
  EXPECT_THROW(points.validate(4, 2), DataError);

  PromptSet boxes;
  boxes.kind = PromptKind::kBoxes;
  boxes.boxes = {{0, 0, 4, 2}};
  EXPECT_NO_THROW(boxes.validate(4, 2));
  boxes.boxes.push_back({1, 1, 5, 2});
  EXPECT_THROW(boxes.validate(4, 2), DataError);
}

TEST(Assemble, HigherScoreClaimsOverlap) {
  const std::vector<CandidateMask> cands{candidate(0, 0.9, mask_of({{1, 1, 0}})),
                                         candidate(1, 0.8, mask_of({{0, 1, 1}}))};
  const auto map = assemble_instance_map(cands, 3, 1, {0, 0.0});
  EXPECT_EQ(map, map_of({{1, 1, 2}}));
}

TEST(Assemble, SingleCandidateIsItsMask) {
  const auto mask = mask_of({{0, 1, 1}, {0, 1, 0}});
  const std::vector<CandidateMask> cands{candidate(0, 0.3, mask)};
  const auto map = assemble_instance_map(cands, 3, 2, {0, 0.0});
  EXPECT_EQ(map, map_of({{0, 1, 1}, {0, 1, 0}}));
}

TEST(Assemble, FullyCoveredCandidateVanishes) {
  const std::vector<CandidateMask> cands{candidate(0, 0.5, mask_of({{0, 1, 0}})),
                                         candidate(1, 0.9, mask_of({{1, 1, 1}}))};
  const auto map = assemble_instance_map(cands, 3, 1, {1, 0.0});
  EXPECT_EQ(map, map_of({{1, 1, 1}}));
}

TEST(Assemble, ScoreFloorAndMinArea) {
  const std::vector<CandidateMask> cands{candidate(0, 0.2, mask_of({{1, 1, 1, 0, 0}})),
                                         candidate(1, 0.6, mask_of({{0, 0, 0, 1, 1}})),
                                         candidate(2, 0.7, mask_of({{1, 0, 0, 0, 0}}))};
  EXPECT_EQ(assemble_instance_map(cands, 5, 1, {0, 0.5}), map_of({{1, 0, 0, 2, 2}}));
  EXPECT_EQ(assemble_instance_map(cands, 5, 1, {2, 0.0}), map_of({{0, 2, 2, 1, 1}}));
  // Default min_area 3: candidate 0 keeps only 2 pixels once candidate 2 claims pixel 0.
  EXPECT_EQ(assemble_instance_map(cands, 5, 1), InstanceMap(5, 1));
}

TEST(Assemble, EqualScoresBreakTiesByPromptIndex) {
  const std::vector<CandidateMask> cands{candidate(3, 0.5, mask_of({{0, 1, 1}})),
                                         candidate(1, 0.5, mask_of({{1, 1, 0}}))};
  EXPECT_EQ(assemble_instance_map(cands, 3, 1, {0, 0.0}), map_of({{1, 1, 2}}));
}

TEST(Assemble, RejectsSizeMismatchAndDuplicates) {
  const std::vector<CandidateMask> wrong{candidate(0, 0.5, mask_of({{1, 1}}))};
  EXPECT_THROW(assemble_instance_map(wrong, 3, 1), DataError);
  const std::vector<CandidateMask> dup{candidate(0, 0.5, mask_of({{1, 0}})),
                                       candidate(0, 0.4, mask_of({{0, 1}}))};
  EXPECT_THROW(assemble_instance_map(dup, 2, 1), DataError);
}

TEST(Assemble, PropertiesOnRandomCandidates) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const int w = 12, h = 9;
    std::vector<CandidateMask> cands;
    std::vector<BinaryMask> masks;
    const int n = static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) {
      std::vector<std::uint8_t> bits(w * h);
      for (auto& b : bits) b = (rng() % 3 == 0) ? 1 : 0;
      masks.emplace_back(w, h, bits);
      // Quantised scores make ties likely.
      cands.push_back({static_cast<std::size_t>(i * 2), rle_encode(masks.back()),
                       std::round(score(rng) * 4) / 4});
    }
    const AssemblyOptions opts{2, 0.25};
    const auto map = assemble_instance_map(cands, w, h, opts);

    auto shuffled = cands;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(assemble_instance_map(shuffled, w, h, opts), map);

    // Every output instance lies inside exactly one candidate's mask; ids are 1..K.
    const auto stats = instance_stats(map);
    for (std::size_t k = 0; k < stats.size(); ++k) {
      EXPECT_EQ(stats[k].id, k + 1);
      EXPECT_GE(stats[k].area, opts.min_area);
      bool contained = false;
      for (const auto& m : masks) {
        bool all = true;
        for (int r = 0; r < h && all; ++r) {
          for (int c = 0; c < w && all; ++c) {
            if (map.at(r, c) == stats[k].id && !m.at(r, c)) all = false;
          }
        }
        contained = contained || all;
      }
      EXPECT_TRUE(contained);
    }
  }
}

TEST(Assemble, DisjointCandidatesReproduceInput) {
  std::mt19937_64 rng(12);
  const auto gt = testing::synthetic_nuclei(rng, 40, 30, 10);
  const auto relabeled = relabel_sequential(gt);
  std::vector<CandidateMask> cands;
  for (const auto& [old_id, new_id] : relabeled.mapping) {
    // Same score, so claim order is prompt order = ascending new id.
    cands.push_back(candidate(new_id, 1.0, instance_mask(relabeled.map, new_id)));
  }
  const auto out = assemble_instance_map(cands, gt.width(), gt.height(), {0, 0.0});
  EXPECT_EQ(out, relabeled.map);
}

}  // namespace
}  // namespace nucleval
