#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "matchforge/types.h"

namespace matchforge {

// Tunables of the spatially adaptive local-affine filter. Radii and the
// inlier tolerance are in pixels.
struct AdalamConfig {
  // Minimum distance between two seeds in image A.
  double seed_radius = 0.0;
  // A match joins a seed's neighbourhood when it lies within these radii of
  // the seed in both images.
  double neighborhood_radius_a = 0.0;
  double neighborhood_radius_b = 0.0;
  int ransac_iters = 128;
  // Maximum transfer residual of an inlier.
  double inlier_tol = 4.0;
  // Significance level of the binomial test against uniform clutter.
  double alpha = 0.01;
  int min_inliers = 6;
  // Least-squares affine refinement of promising similarity hypotheses.
  bool refine_affine = true;
  // Local-frame consistency with the seed, used only for keypoints that
  // carry orientation / scale estimates.
  double orientation_tol_deg = 30.0;
  double min_scale_ratio = 0.5;
  double max_scale_ratio = 2.0;
  // Accepted range of |det A| for local models.
  double min_det = 0.01;
  double max_det = 100.0;

  // Defaults scaled to an image of the given size (see README).
  static AdalamConfig ForImageSize(double width, double height);

  // Throws std::invalid_argument describing the first bad field.
  void Validate() const;
};

struct SeedPoint {
  size_t match_index = 0;
  double score = 0.0;
};

struct Neighborhood {
  SeedPoint seed;
  std::vector<size_t> members;  // match indices, ascending
};

// Maps seed-local A coordinates to seed-local B coordinates: q = A p + t.
struct AffineModel {
  std::array<double, 4> A = {1.0, 0.0, 0.0, 1.0};  // row-major
  std::array<double, 2> t = {0.0, 0.0};

  double Determinant() const { return A[0] * A[3] - A[1] * A[2]; }
};

struct NeighborhoodVerification {
  std::vector<size_t> inliers;  // match indices, ascending; empty unless
                                // significant
  bool significant = false;
  int best_consensus = 0;
  double p_value = 1.0;
  AffineModel model;
};

// Greedy non-maximum suppression over matches by descending confidence
// (ties by match index): a match becomes a seed unless it lies within
// seed_radius (Euclidean, image A) of an earlier seed.
std::vector<SeedPoint> SelectSeeds(const MatchSet& matches,
                                   const std::vector<Keypoint>& kps_a,
                                   const AdalamConfig& config);

// Every match within neighborhood_radius_a of the seed in A and within
// neighborhood_radius_b in B joins that seed's neighbourhood. When the
// keypoints carry orientation or scale estimates, the match's relative
// rotation and scale change must also agree with the seed's.
std::vector<Neighborhood> AssignNeighborhoods(
    const std::vector<SeedPoint>& seeds, const MatchSet& matches,
    const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
    const AdalamConfig& config);

// Upper tail P[X >= k] for X ~ Binomial(m, p).
double BinomialUpperTail(int m, int k, double p);

// Probability that a uniformly placed match falls within inlier_tol of its
// predicted position inside the B neighbourhood disc.
double BaselineInlierProbability(const AdalamConfig& config);

// Local RANSAC over the neighbourhood in seed-centred coordinates. Minimal
// samples of two matches define a similarity; hypotheses that improve the
// best consensus are refined to a full affine model by least squares. The
// best consensus is significant when its binomial tail probability under
// BaselineInlierProbability is <= alpha and it has at least min_inliers
// matches. Samples are enumerated exhaustively when there are no more
// distinct pairs than ransac_iters; otherwise they are drawn from a stream
// keyed by (rng_seed, seed match index).
NeighborhoodVerification VerifyNeighborhood(
    const Neighborhood& neighborhood, const MatchSet& matches,
    const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
    const AdalamConfig& config, uint64_t rng_seed);

// Indices into matches.matches of the retained matches, ascending.
std::vector<size_t> AdalamFilterIndices(const MatchSet& matches,
                                        const std::vector<Keypoint>& kps_a,
                                        const std::vector<Keypoint>& kps_b,
                                        const AdalamConfig& config,
                                        uint64_t rng_seed, int num_threads = 1);

// Union of the inliers of all significant neighbourhoods, sorted by
// (idx_a, idx_b). Always a subset of the input; identical for any
// num_threads.
MatchSet AdalamFilter(const MatchSet& matches,
                      const std::vector<Keypoint>& kps_a,
                      const std::vector<Keypoint>& kps_b,
                      const AdalamConfig& config, uint64_t rng_seed,
                      int num_threads = 1);

}  // namespace matchforge
