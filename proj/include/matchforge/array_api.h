#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "matchforge/adalam.h"

namespace matchforge {

// Read-only view of a contiguous row-major buffer. Nothing is copied until a
// call needs its own representation.
template <typename T>
struct ArrayView {
  const T* data = nullptr;
  std::vector<size_t> shape;

  size_t size() const {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
  }
};

// Array-level entry points for scripting bindings. Shape problems throw
// std::invalid_argument naming the argument.

// Applies the "key -> number" mapping on top of `base`. Keys are the
// adalam-related config keys (seed_radius, inlier_tol, ...).
AdalamConfig AdalamConfigFromMapping(const std::map<std::string, double>& mapping,
                                     const AdalamConfig& base);

// kpts_a (Ka x 2), kpts_b (Kb x 2) pixel positions; matches (m x 2) keypoint
// indices; optional confidence (m) ranks seeds, all equal when absent.
// Returns the retained rows of `matches`, ascending.
std::vector<size_t> ArrayAdalamFilter(const ArrayView<float>& kpts_a,
                                      const ArrayView<float>& kpts_b,
                                      const ArrayView<int64_t>& matches,
                                      const ArrayView<float>* confidence,
                                      const AdalamConfig& config,
                                      uint64_t seed);

// desc_a (Na x D), desc_b (Nb x D). Returns an m x 2 index array and the m
// confidences.
struct ArrayMatches {
  std::vector<int64_t> indices;
  std::vector<float> confidence;
};
ArrayMatches ArrayMutualNN(const ArrayView<float>& desc_a,
                           const ArrayView<float>& desc_b);

// anchors, positives (n x D).
double ArrayHardNetLoss(const ArrayView<float>& anchors,
                        const ArrayView<float>& positives);

// d_pos, d_neg (n).
double ArrayHardNegConstantLoss(const ArrayView<float>& d_pos,
                                const ArrayView<float>& d_neg);

// Each source is an (m_s x 2) index array in shared indices plus m_s
// confidences. Returns the merged m x 2 array, sorted, one row per pair.
ArrayMatches ArrayMergeMatches(
    const std::vector<ArrayView<int64_t>>& matches,
    const std::vector<ArrayView<float>>& confidence);

}  // namespace matchforge
