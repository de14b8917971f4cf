#include "matchforge/matching.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "matchforge/parallel.h"

namespace matchforge {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Nearest and second-nearest squared distance seen by one row or column.
struct NeighborStats {
  double best = kInf;
  uint32_t best_idx = std::numeric_limits<uint32_t>::max();
  double second = kInf;

  void Offer(double d, uint32_t idx) {
    if (d < best || (d == best && idx < best_idx)) {
      second = best;
      best = d;
      best_idx = idx;
    } else if (d < second) {
      second = d;
    }
  }

  void Merge(const NeighborStats& other) {
    if (other.best_idx == std::numeric_limits<uint32_t>::max()) return;
    Offer(other.best, other.best_idx);
    second = std::min(second, other.second);
  }
};

double SquaredDistance(const float* a, const float* b, int dim) {
  double sum = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double diff = static_cast<double>(a[k]) - b[k];
    sum += diff * diff;
  }
  return sum;
}

// One-sided Lowe ratio from squared distances.
double OneSidedRatio(const NeighborStats& s, size_t other_size) {
  if (other_size < 2) return 0.0;
  if (s.second == 0.0) return 1.0;
  return std::sqrt(s.best) / std::sqrt(s.second);
}

}  // namespace

MatchSet MutualNNMatch(const LocalDescriptorSet& a, const LocalDescriptorSet& b,
                       const MutualNNOptions& options, int num_threads) {
  if (a.empty() || b.empty()) {
    throw std::invalid_argument("mutual NN matching needs non-empty sets");
  }
  if (a.dim != b.dim) {
    throw std::invalid_argument("descriptor dimension mismatch: " +
                                std::to_string(a.dim) + " vs " +
                                std::to_string(b.dim));
  }
  const size_t na = a.size();
  const size_t nb = b.size();
  const int dim = a.dim;

  std::vector<NeighborStats> rows(na);
  const size_t chunks = std::clamp<size_t>(num_threads, 1, na);
  std::vector<std::vector<NeighborStats>> chunk_cols(
      chunks, std::vector<NeighborStats>(nb));
  ParallelFor(chunks, num_threads, [&](size_t chunk) {
    const size_t begin = na * chunk / chunks;
    const size_t end = na * (chunk + 1) / chunks;
    std::vector<NeighborStats>& cols = chunk_cols[chunk];
    for (size_t i = begin; i < end; ++i) {
      for (size_t j = 0; j < nb; ++j) {
        const double d = SquaredDistance(a.row(i), b.row(j), dim);
        rows[i].Offer(d, static_cast<uint32_t>(j));
        cols[j].Offer(d, static_cast<uint32_t>(i));
      }
    }
  });
  std::vector<NeighborStats> cols = std::move(chunk_cols[0]);
  for (size_t c = 1; c < chunks; ++c) {
    for (size_t j = 0; j < nb; ++j) cols[j].Merge(chunk_cols[c][j]);
  }

  MatchSet out;
  for (size_t i = 0; i < na; ++i) {
    const uint32_t j = rows[i].best_idx;
    if (cols[j].best_idx != i) continue;
    const double distance = std::sqrt(rows[i].best);
    const double ratio = std::max(OneSidedRatio(rows[i], nb),
                                  OneSidedRatio(cols[j], na));
    if (options.dist_max && distance > *options.dist_max) continue;
    if (options.ratio_max && ratio > *options.ratio_max) continue;
    Match m;
    m.idx_a = static_cast<uint32_t>(i);
    m.idx_b = j;
    m.distance = static_cast<float>(distance);
    m.confidence = static_cast<float>(1.0 - std::min(1.0, ratio));
    out.matches.push_back(m);
  }
  return out;
}

}  // namespace matchforge
