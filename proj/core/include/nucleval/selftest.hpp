#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "nucleval/mask.hpp"
#include "nucleval/metrics.hpp"

namespace nucleval {

struct RandomPairOptions {
  int max_side = 64;
  int max_instances = 10;
};

/// A random (gt, pred) pair of equal size. Pred instances are jittered copies
/// of gt rectangles plus a few spurious ones, under unrelated random ids, so
/// IoUs spread around the match threshold.
std::pair<InstanceMap, InstanceMap> random_instance_pair(std::mt19937_64& rng,
                                                         const RandomPairOptions& options = {});

struct SelftestSummary {
  int cases = 0;
  int tp_mismatches = 0;
  int decomposition_failures = 0;
  double max_decomposition_error = 0.0;
  std::int64_t total_tp = 0;
  std::string first_failure;

  bool passed() const { return tp_mismatches == 0 && decomposition_failures == 0; }
};

/// Compares match_instances against match_instances_oracle on `cases` random
/// pairs and checks pq == dq * sq to 1e-12.
SelftestSummary run_oracle_selftest(int cases, std::uint64_t seed,
                                    double threshold = kDefaultMatchThreshold);

}  // namespace nucleval
