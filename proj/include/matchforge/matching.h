#pragma once

#include <optional>

#include "matchforge/types.h"

namespace matchforge {

struct MutualNNOptions {
  // Lowe ratio bound on first / second nearest distance, in (0, 1].
  std::optional<double> ratio_max;
  // Absolute bound on the descriptor distance.
  std::optional<double> dist_max;
};

// Mutual nearest-neighbour matching under Euclidean distance.
//
// (i, j) is a match iff j is the nearest neighbour of row i in B and i is
// the nearest neighbour of row j in A, with ties going to the smaller index.
// The ratio of a match is the larger of its two one-sided Lowe ratios; a
// side whose other set has a single descriptor contributes ratio 0, and
// equal first and second distances give ratio 1. Confidence is
// 1 - min(1, ratio). This keeps the result symmetric under swapping A and B.
//
// Output is sorted by idx_a. Throws std::invalid_argument for empty inputs
// or mismatched dimensions.
MatchSet MutualNNMatch(const LocalDescriptorSet& a, const LocalDescriptorSet& b,
                       const MutualNNOptions& options = {},
                       int num_threads = 1);

}  // namespace matchforge
