#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace nucleval {

using InstanceId = std::uint32_t;

// Coordinates: x = column, y = row. Pixel (r, c) has its center at
// (c + 0.5, r + 0.5). Boxes are half-open.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct BoundingBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid() const { return 0 <= x0 && x0 < x1 && 0 <= y0 && y0 < y1; }
  bool within(int image_width, int image_height) const {
    return valid() && x1 <= image_width && y1 <= image_height;
  }
  Point center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Row-major grid of instance ids; 0 is background. Each positive id is one
/// instance, ids need not be contiguous.
class InstanceMap {
 public:
  InstanceMap() = default;
  InstanceMap(int width, int height);
  InstanceMap(int width, int height, std::vector<InstanceId> labels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  InstanceId at(int row, int col) const {
    return labels_[static_cast<std::size_t>(row) * width_ + col];
  }
  void set(int row, int col, InstanceId id) {
    labels_[static_cast<std::size_t>(row) * width_ + col] = id;
  }

  std::span<const InstanceId> labels() const { return labels_; }
  std::span<InstanceId> labels() { return labels_; }

  bool same_shape(const InstanceMap& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const InstanceMap&, const InstanceMap&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<InstanceId> labels_;
};

/// Row-major {0,1} grid.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height);
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool at(int row, int col) const {
    return bits_[static_cast<std::size_t>(row) * width_ + col] != 0;
  }
  void set(int row, int col, bool on) {
    bits_[static_cast<std::size_t>(row) * width_ + col] = on ? 1 : 0;
  }

  std::span<const std::uint8_t> bits() const { return bits_; }
  std::int64_t popcount() const;

  bool same_shape(const BinaryMask& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Run lengths over the column-major flattening, alternating background and
/// foreground, starting with a (possibly empty) background run.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  // Throws DataError when the counts do not describe a height x width mask.
  void validate() const;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

struct InstanceStats {
  InstanceId id = 0;
  std::int64_t area = 0;
  BoundingBox bbox;
  Point centroid;
};

enum class Connectivity { kFour = 4, kEight = 8 };

InstanceMap connected_components(const BinaryMask& mask, Connectivity connectivity);

// Sorted by id; one entry per positive id present.
std::vector<InstanceStats> instance_stats(const InstanceMap& map);

RleMask rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const RleMask& rle);

BinaryMask binarize(const InstanceMap& map);

// Mask of the pixels carrying `id`.
BinaryMask instance_mask(const InstanceMap& map, InstanceId id);

struct Relabeling {
  InstanceMap map;
  std::map<InstanceId, InstanceId> mapping;  // old -> new
};

// New ids are 1..K in order of first row-major appearance.
Relabeling relabel_sequential(const InstanceMap& map);

}  // namespace nucleval
