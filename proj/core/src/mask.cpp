#include "nucleval/mask.hpp"

#include <algorithm>
#include <numeric>
#include <string>
#include <unordered_map>

#include "nucleval/error.hpp"

namespace nucleval {
namespace {

void check_dims(int width, int height) {
  if (width < 0 || height < 0) {
    throw DataError("negative image dimensions " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

// Union-find over provisional labels; the smaller label always becomes root
// so roots keep the row-major order of their first pixel.
class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }

  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

InstanceMap::InstanceMap(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  labels_.assign(static_cast<std::size_t>(width) * height, 0);
}

InstanceMap::InstanceMap(int width, int height, std::vector<InstanceId> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  check_dims(width, height);
  if (labels_.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("instance map has " + std::to_string(labels_.size()) +
                    " labels, expected " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
}

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  check_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  check_dims(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * height) {
    throw DataError("binary mask has " + std::to_string(bits_.size()) +
                    " bits, expected " + std::to_string(width) + "x" +
                    std::to_string(height));
  }
  for (auto& b : bits_) b = b != 0 ? 1 : 0;
}

std::int64_t BinaryMask::popcount() const {
  return std::count(bits_.begin(), bits_.end(), std::uint8_t{1});
}

void RleMask::validate() const {
  if (height < 0 || width < 0) throw DataError("RLE size must be non-negative");
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i > 0 && counts[i] == 0) {
      throw DataError("RLE has an interior zero run at position " + std::to_string(i));
    }
    total += counts[i];
  }
  const auto expected = static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
  if (total != expected) {
    throw DataError("RLE counts sum to " + std::to_string(total) + ", expected " +
                    std::to_string(expected));
  }
}

InstanceMap connected_components(const BinaryMask& mask, Connectivity connectivity) {
  const int w = mask.width();
  const int h = mask.height();
  const bool eight = connectivity == Connectivity::kEight;

  // First pass: provisional labels (1-based; 0 = background) with equivalences.
  std::vector<std::uint32_t> provisional(mask.size(), 0);
  DisjointSets sets;
  sets.make();  // slot 0 reserved for background

  auto label_at = [&](int r, int c) -> std::uint32_t {
    if (r < 0 || c < 0 || c >= w) return 0;
    return provisional[static_cast<std::size_t>(r) * w + c];
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask.at(r, c)) continue;
      std::uint32_t neighbours[4] = {label_at(r, c - 1), label_at(r - 1, c), 0, 0};
      if (eight) {
        neighbours[2] = label_at(r - 1, c - 1);
        neighbours[3] = label_at(r - 1, c + 1);
      }
      std::uint32_t chosen = 0;
      for (auto n : neighbours) {
        if (n == 0) continue;
        if (chosen == 0) {
          chosen = n;
        } else {
          sets.unite(chosen, n);
        }
      }
      if (chosen == 0) chosen = sets.make();
      provisional[static_cast<std::size_t>(r) * w + c] = chosen;
    }
  }

  // Second pass: final ids in row-major order of each component's first pixel.
  InstanceMap out(w, h);
  auto labels = out.labels();
  std::unordered_map<std::uint32_t, InstanceId> final_ids;
  InstanceId next = 1;
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] == 0) continue;
    const auto root = sets.find(provisional[i]);
    auto [it, inserted] = final_ids.try_emplace(root, next);
    if (inserted) ++next;
    labels[i] = it->second;
  }
  return out;
}

std::vector<InstanceStats> instance_stats(const InstanceMap& map) {
  struct Accumulator {
    std::int64_t area = 0;
    int min_c, min_r, max_c, max_r;
    double sum_x = 0.0;
    double sum_y = 0.0;
  };
  std::map<InstanceId, Accumulator> acc;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const auto id = map.at(r, c);
      if (id == 0) continue;
      auto [it, inserted] = acc.try_emplace(id, Accumulator{0, c, r, c, r});
      auto& a = it->second;
      ++a.area;
      a.min_c = std::min(a.min_c, c);
      a.max_c = std::max(a.max_c, c);
      a.min_r = std::min(a.min_r, r);
      a.max_r = std::max(a.max_r, r);
      a.sum_x += c + 0.5;
      a.sum_y += r + 0.5;
    }
  }

  std::vector<InstanceStats> stats;
  stats.reserve(acc.size());
  for (const auto& [id, a] : acc) {
    stats.push_back({id,
                     a.area,
                     {a.min_c, a.min_r, a.max_c + 1, a.max_r + 1},
                     {a.sum_x / static_cast<double>(a.area),
                      a.sum_y / static_cast<double>(a.area)}});
  }
  return stats;
}

RleMask rle_encode(const BinaryMask& mask) {
  RleMask rle;
  rle.height = mask.height();
  rle.width = mask.width();
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int c = 0; c < mask.width(); ++c) {
    for (int r = 0; r < mask.height(); ++r) {
      const std::uint8_t bit = mask.at(r, c) ? 1 : 0;
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  // An empty image still carries the single (zero) background run.
  return rle;
}

BinaryMask rle_decode(const RleMask& rle) {
  rle.validate();
  BinaryMask mask(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool on = false;
  for (auto run : rle.counts) {
    if (on) {
      for (std::uint64_t k = pos; k < pos + run; ++k) {
        const auto c = static_cast<int>(k / static_cast<std::uint64_t>(rle.height));
        const auto r = static_cast<int>(k % static_cast<std::uint64_t>(rle.height));
        mask.set(r, c, true);
      }
    }
    pos += run;
    on = !on;
  }
  return mask;
}

BinaryMask binarize(const InstanceMap& map) {
  std::vector<std::uint8_t> bits(map.size());
  std::transform(map.labels().begin(), map.labels().end(), bits.begin(),
                 [](InstanceId id) { return static_cast<std::uint8_t>(id > 0); });
  return BinaryMask(map.width(), map.height(), std::move(bits));
}

BinaryMask instance_mask(const InstanceMap& map, InstanceId id) {
  std::vector<std::uint8_t> bits(map.size());
  std::transform(map.labels().begin(), map.labels().end(), bits.begin(),
                 [id](InstanceId v) { return static_cast<std::uint8_t>(v == id); });
  return BinaryMask(map.width(), map.height(), std::move(bits));
}

Relabeling relabel_sequential(const InstanceMap& map) {
  Relabeling result{InstanceMap(map.width(), map.height()), {}};
  auto out = result.map.labels();
  std::unordered_map<InstanceId, InstanceId> lookup;
  InstanceId next = 1;
  const auto in = map.labels();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == 0) continue;
    auto [it, inserted] = lookup.try_emplace(in[i], next);
    if (inserted) {
      result.mapping.emplace(in[i], next);
      ++next;
    }
    out[i] = it->second;
  }
  return result;
}

}  // namespace nucleval
