#include "matchforge/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace matchforge {
namespace {

constexpr double kMargin = 1.0;
constexpr double kTieTolerance = 1e-9;

double Distance(const double* x, const double* y, int dim) {
  double sum = 0.0;
  for (int k = 0; k < dim; ++k) {
    const double diff = x[k] - y[k];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

// Location of the hardest negative of sample i.
struct HardestNegative {
  double value = std::numeric_limits<double>::infinity();
  int row = -1;  // anchor index
  int col = -1;  // positive index
  double runner_up = std::numeric_limits<double>::infinity();
};

HardestNegative FindHardestNegative(const BatchDistanceMatrix& d, int i) {
  HardestNegative h;
  auto offer = [&](double v, int row, int col) {
    if (v < h.value) {
      h.runner_up = h.value;
      h.value = v;
      h.row = row;
      h.col = col;
    } else if (v < h.runner_up) {
      h.runner_up = v;
    }
  };
  for (int j = 0; j < d.n; ++j) {
    if (j != i) offer(d(i, j), i, j);
  }
  for (int k = 0; k < d.n; ++k) {
    if (k != i) offer(d(k, i), k, i);
  }
  return h;
}

}  // namespace

BatchDistanceMatrix ComputeBatchDistanceMatrix(const DescriptorBatch& batch) {
  if (batch.n < 2) throw std::invalid_argument("no negatives available");
  if (batch.dim < 1 ||
      batch.anchors.size() != static_cast<size_t>(batch.n) * batch.dim ||
      batch.positives.size() != batch.anchors.size()) {
    throw std::invalid_argument("malformed descriptor batch");
  }
  for (const auto* rows : {&batch.anchors, &batch.positives}) {
    for (double v : *rows) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite value in descriptor batch");
      }
    }
  }
  BatchDistanceMatrix d{batch.n,
                        std::vector<double>(static_cast<size_t>(batch.n) *
                                            batch.n)};
  for (int i = 0; i < batch.n; ++i) {
    for (int j = 0; j < batch.n; ++j) {
      d.values[i * batch.n + j] =
          Distance(batch.anchor(i), batch.positive(j), batch.dim);
    }
  }
  return d;
}

HardNetLoss ComputeHardNetLoss(const BatchDistanceMatrix& d) {
  if (d.n < 2) throw std::invalid_argument("no negatives available");
  if (d.values.size() != static_cast<size_t>(d.n) * d.n) {
    throw std::invalid_argument("malformed distance matrix");
  }
  HardNetLoss out;
  out.per_sample.resize(d.n);
  double sum = 0.0;
  for (int i = 0; i < d.n; ++i) {
    const double hardest = FindHardestNegative(d, i).value;
    out.per_sample[i] = std::max(0.0, kMargin + d(i, i) - hardest);
    sum += out.per_sample[i];
  }
  out.loss = sum / d.n;
  return out;
}

double ComputeHardNegConstantLoss(const HardNegPairs& pairs) {
  if (pairs.d_pos.size() != pairs.d_neg.size()) {
    throw std::invalid_argument("d_pos and d_neg lengths differ");
  }
  if (pairs.d_pos.empty()) {
    throw std::invalid_argument("hard-negative loss needs at least one pair");
  }
  double sum = 0.0;
  for (size_t i = 0; i < pairs.d_pos.size(); ++i) {
    sum += std::max(0.0, kMargin + pairs.d_pos[i] - pairs.d_neg[i]);
  }
  return sum;
}

HardNegPairs MineHardestNegatives(const BatchDistanceMatrix& d) {
  if (d.n < 2) throw std::invalid_argument("no negatives available");
  HardNegPairs out;
  out.d_pos.resize(d.n);
  out.d_neg.resize(d.n);
  for (int i = 0; i < d.n; ++i) {
    out.d_pos[i] = d(i, i);
    out.d_neg[i] = FindHardestNegative(d, i).value;
  }
  return out;
}

BatchGradient ComputeHardNetLossGradient(const DescriptorBatch& batch) {
  const BatchDistanceMatrix d = ComputeBatchDistanceMatrix(batch);
  const int n = batch.n;
  const int dim = batch.dim;
  BatchGradient grad;
  grad.anchors.assign(static_cast<size_t>(n) * dim, 0.0);
  grad.positives.assign(static_cast<size_t>(n) * dim, 0.0);

  // d/dx |x - y| = (x - y) / |x - y|; accumulates sign * that into anchor a
  // and its negation into positive p.
  auto accumulate = [&](int a, int p, double distance, double sign) {
    if (distance == 0.0) {
      throw std::domain_error("non-differentiable point: zero distance "
                              "between anchor " + std::to_string(a) +
                              " and positive " + std::to_string(p));
    }
    const double scale = sign / (n * distance);
    const double* x = batch.anchor(a);
    const double* y = batch.positive(p);
    for (int k = 0; k < dim; ++k) {
      const double g = scale * (x[k] - y[k]);
      grad.anchors[a * dim + k] += g;
      grad.positives[p * dim + k] -= g;
    }
  };

  for (int i = 0; i < n; ++i) {
    const HardestNegative h = FindHardestNegative(d, i);
    if (kMargin + d(i, i) - h.value <= 0.0) continue;
    if (h.runner_up - h.value <= kTieTolerance) {
      throw std::domain_error("non-differentiable point: tied hardest "
                              "negatives for sample " + std::to_string(i));
    }
    accumulate(i, i, d(i, i), +1.0);
    accumulate(h.row, h.col, h.value, -1.0);
  }
  return grad;
}

}  // namespace matchforge
