#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

#include "nucleval/error.hpp"
#include "nucleval/label_io.hpp"
#include "nucleval/mask.hpp"
#include "test_support.hpp"

namespace nucleval {
namespace {

using testing::map_of;
using testing::mask_of;

TEST(ConnectedComponents, DiagonalPixelsSplitUnderFourConnectivity) {
  const auto cc = connected_components(mask_of({{1, 0}, {0, 1}}), Connectivity::kFour);
  EXPECT_EQ(cc, map_of({{1, 0}, {0, 2}}));
}

TEST(ConnectedComponents, DiagonalPixelsJoinUnderEightConnectivity) {
  const auto cc = connected_components(mask_of({{1, 0}, {0, 1}}), Connectivity::kEight);
  EXPECT_EQ(cc, map_of({{1, 0}, {0, 1}}));
}

TEST(ConnectedComponents, EmptyMaskGivesEmptyMap) {
  const auto cc = connected_components(BinaryMask(3, 3), Connectivity::kEight);
  EXPECT_EQ(cc, InstanceMap(3, 3));
}

TEST(ConnectedComponents, IdsFollowFirstPixelOrderAcrossMerges) {
  // A U shape: the two arms get provisional labels first and merge at the
  // bottom; the separate blob on the right starts later in row-major order.
  const auto cc = connected_components(mask_of({{1, 0, 1, 0, 1},
                                                {1, 0, 1, 0, 1},
                                                {1, 1, 1, 0, 0}}),
                                       Connectivity::kFour);
  EXPECT_EQ(cc, map_of({{1, 0, 1, 0, 2}, {1, 0, 1, 0, 2}, {1, 1, 1, 0, 0}}));
}

// Reference labelling by flood fill.
InstanceMap flood_fill_reference(const BinaryMask& mask, bool eight) {
  InstanceMap out(mask.width(), mask.height());
  InstanceId next = 1;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.at(r, c) || out.at(r, c) != 0) continue;
      std::vector<std::pair<int, int>> stack{{r, c}};
      out.set(r, c, next);
      while (!stack.empty()) {
        const auto [y, x] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if ((dy == 0 && dx == 0) || (!eight && dy != 0 && dx != 0)) continue;
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= mask.height() || nx >= mask.width()) continue;
            if (!mask.at(ny, nx) || out.at(ny, nx) != 0) continue;
            out.set(ny, nx, next);
            stack.push_back({ny, nx});
          }
        }
      }
      ++next;
    }
  }
  return out;
}

TEST(ConnectedComponents, MatchesFloodFillOnRandomMasks) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    const auto mask = testing::random_mask(rng);
    const auto four = connected_components(mask, Connectivity::kFour);
    const auto eight = connected_components(mask, Connectivity::kEight);
    ASSERT_EQ(four, flood_fill_reference(mask, false));
    ASSERT_EQ(eight, flood_fill_reference(mask, true));
    // Partition of the foreground, and 8-connectivity never has more parts.
    ASSERT_EQ(binarize(four), mask);
    ASSERT_LE(instance_stats(eight).size(), instance_stats(four).size());
  }
}

TEST(InstanceStats, SolidBlock) {
  const auto stats = instance_stats(map_of({{7, 7, 0}, {7, 7, 0}, {0, 0, 0}}));
  ASSERT_EQ(stats.size(), 1u);
  EXPECT_EQ(stats[0].id, 7u);
  EXPECT_EQ(stats[0].area, 4);
  EXPECT_EQ(stats[0].bbox, (BoundingBox{0, 0, 2, 2}));
  EXPECT_DOUBLE_EQ(stats[0].centroid.x, 1.0);
  EXPECT_DOUBLE_EQ(stats[0].centroid.y, 1.0);
}

TEST(InstanceStats, EmptyMap) { EXPECT_TRUE(instance_stats(InstanceMap(4, 4)).empty()); }

TEST(InstanceStats, AscendingIds) {
  const auto stats = instance_stats(map_of({{9, 0, 2}}));
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats[0].id, 2u);
  EXPECT_EQ(stats[1].id, 9u);
}

TEST(InstanceStats, AreasSumToForegroundAndCentroidInsideBox) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const auto map = connected_components(testing::random_mask(rng), Connectivity::kFour);
    std::int64_t total = 0;
    for (const auto& s : instance_stats(map)) {
      total += s.area;
      EXPECT_GE(s.area, 1);
      EXPECT_GE(s.centroid.x, s.bbox.x0);
      EXPECT_LE(s.centroid.x, s.bbox.x1);
      EXPECT_GE(s.centroid.y, s.bbox.y0);
      EXPECT_LE(s.centroid.y, s.bbox.y1);
    }
    EXPECT_EQ(total, binarize(map).popcount());
  }
}

TEST(Rle, ColumnMajorBackgroundFirst) {
  EXPECT_EQ(rle_encode(mask_of({{1, 0}, {1, 1}})).counts, (std::vector<std::uint32_t>{0, 2, 1, 1}));
  EXPECT_EQ(rle_encode(BinaryMask(2, 2)).counts, (std::vector<std::uint32_t>{4}));
  EXPECT_EQ(rle_encode(mask_of({{1, 1}, {1, 1}})).counts, (std::vector<std::uint32_t>{0, 4}));
}

TEST(Rle, DecodeRejectsWrongTotal) {
  RleMask rle{2, 2, {1, 2}};
  EXPECT_THROW(rle_decode(rle), DataError);
}

TEST(Rle, DecodeRejectsInteriorZeroRun) {
  RleMask rle{2, 2, {1, 0, 3}};
  EXPECT_THROW(rle_decode(rle), DataError);
}

TEST(Rle, RoundTripRandomMasks) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto mask = testing::random_mask(rng);
    const auto rle = rle_encode(mask);
    ASSERT_NO_THROW(rle.validate());
    ASSERT_EQ(rle_decode(rle), mask);
  }
}

TEST(Binarize, Examples) {
  EXPECT_EQ(binarize(map_of({{1, 0}, {2, 2}})), mask_of({{1, 0}, {1, 1}}));
  EXPECT_EQ(binarize(InstanceMap(2, 3)), BinaryMask(2, 3));
  EXPECT_EQ(binarize(map_of({{4, 4}, {4, 4}})), mask_of({{1, 1}, {1, 1}}));
}

TEST(RelabelSequential, CompactsIdsInFirstAppearanceOrder) {
  const auto r = relabel_sequential(map_of({{9, 0, 5}, {5, 9, 0}}));
  EXPECT_EQ(r.map, map_of({{1, 0, 2}, {2, 1, 0}}));
  EXPECT_EQ(r.mapping, (std::map<InstanceId, InstanceId>{{9, 1}, {5, 2}}));
}

TEST(RelabelSequential, SequentialMapIsFixedPoint) {
  const auto map = map_of({{1, 1, 0}, {2, 0, 3}});
  const auto r = relabel_sequential(map);
  EXPECT_EQ(r.map, map);
  EXPECT_EQ(r.mapping, (std::map<InstanceId, InstanceId>{{1, 1}, {2, 2}, {3, 3}}));
}

TEST(RelabelSequential, EmptyMap) {
  const auto r = relabel_sequential(InstanceMap(3, 2));
  EXPECT_EQ(r.map, InstanceMap(3, 2));
  EXPECT_TRUE(r.mapping.empty());
}

TEST(RelabelSequential, PreservesPartition) {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<InstanceId> id(0, 6);
  for (int t = 0; t < 50; ++t) {
    InstanceMap map(9, 7);
    for (auto& v : map.labels()) v = id(rng) * 1000;
    const auto r = relabel_sequential(map);
    const auto a = map.labels();
    const auto b = r.map.labels();
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a[i] == 0, b[i] == 0);
      for (std::size_t j = i + 1; j < a.size(); ++j) ASSERT_EQ(a[i] == a[j], b[i] == b[j]);
    }
  }
}

TEST(InstanceMap, RejectsWrongLabelCount) {
  EXPECT_THROW(InstanceMap(2, 2, std::vector<InstanceId>(3)), DataError);
}

TEST(LabelPng, RoundTripSixteenBit) {
  testing::TempDir dir;
  InstanceMap map(5, 3);
  map.set(0, 0, 1);
  map.set(1, 2, 300);
  map.set(2, 4, 65535);
  write_label_png(dir / "m.png", map);
  EXPECT_EQ(read_label_png(dir / "m.png"), map);
}

TEST(LabelPng, WritesAreByteIdentical) {
  testing::TempDir dir;
  std::mt19937_64 rng(1);
  const auto map = testing::synthetic_nuclei(rng, 30, 20, 8);
  write_label_png(dir / "a.png", map);
  write_label_png(dir / "b.png", map);
  EXPECT_EQ(testing::read_text(dir / "a.png"), testing::read_text(dir / "b.png"));
}

TEST(LabelPng, RejectsIdOverflow) {
  testing::TempDir dir;
  InstanceMap map(2, 2);
  map.set(0, 0, 65536);
  EXPECT_THROW(write_label_png(dir / "m.png", map), DataError);
  EXPECT_FALSE(std::filesystem::exists(dir / "m.png"));
}

TEST(LabelPng, RejectsNonPngAndTruncatedFiles) {
  testing::TempDir dir;
  testing::write_text(dir / "bad.png", "not an image");
  EXPECT_THROW(read_label_png(dir / "bad.png"), DataError);

  InstanceMap map(16, 16);
  testing::fill_rect(map, 2, 2, 10, 10, 4);
  write_label_png(dir / "ok.png", map);
  auto bytes = testing::read_text(dir / "ok.png");
  testing::write_text(dir / "cut.png", bytes.substr(0, bytes.size() / 2));
  EXPECT_THROW(read_label_png(dir / "cut.png"), DataError);
  EXPECT_THROW(read_label_png(dir / "missing.png"), DataError);
}

}  // namespace
}  // namespace nucleval
