#pragma once

#include <vector>

namespace matchforge {

// n matching (anchor, positive) pairs of D-dimensional descriptors, stored
// row-major. Row i of anchors matches row i of positives.
struct DescriptorBatch {
  int n = 0;
  int dim = 0;
  std::vector<double> anchors;
  std::vector<double> positives;

  const double* anchor(int i) const { return anchors.data() + i * dim; }
  const double* positive(int i) const { return positives.data() + i * dim; }
};

// d(i, j) = Euclidean distance between anchor i and positive j.
struct BatchDistanceMatrix {
  int n = 0;
  std::vector<double> values;

  double operator()(int i, int j) const { return values[i * n + j]; }
};

// Positive and hardest-negative distances per sample.
struct HardNegPairs {
  std::vector<double> d_pos;
  std::vector<double> d_neg;
};

struct HardNetLoss {
  double loss = 0.0;
  std::vector<double> per_sample;
};

struct BatchGradient {
  std::vector<double> anchors;    // n * dim
  std::vector<double> positives;  // n * dim
};

// Throws std::invalid_argument if n < 2, shapes disagree or a value is not
// finite.
BatchDistanceMatrix ComputeBatchDistanceMatrix(const DescriptorBatch& batch);

// Hardest-in-batch triplet margin loss with unit margin:
//
//   per_sample[i] = max(0, 1 + d(i,i) - min(min_{j!=i} d(i,j),
//                                           min_{k!=i} d(k,i)))
//   loss = mean(per_sample)
//
// Throws std::invalid_argument("no negatives available") for n < 2.
HardNetLoss ComputeHardNetLoss(const BatchDistanceMatrix& d);

// Unit-margin hard-negative loss, summed (not averaged) over samples:
//   sum_i max(0, 1 + d_pos[i] - d_neg[i]).
// Throws std::invalid_argument on length mismatch or empty input.
double ComputeHardNegConstantLoss(const HardNegPairs& pairs);

// d_pos[i] = d(i,i); d_neg[i] = the smaller of the hardest off-diagonal
// entries in row i and column i.
HardNegPairs MineHardestNegatives(const BatchDistanceMatrix& d);

// Analytic gradient of ComputeHardNetLoss(ComputeBatchDistanceMatrix(batch))
// with respect to anchors and positives. Only samples with a positive hinge
// contribute. Throws std::domain_error("non-differentiable point") if, for an
// active sample, the two smallest negative candidates are within 1e-9 of
// each other, or a contributing distance is zero.
BatchGradient ComputeHardNetLossGradient(const DescriptorBatch& batch);

}  // namespace matchforge
