#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "matchforge/adalam.h"
#include "matchforge/matching.h"
#include "matchforge/types.h"

namespace matchforge {

struct SynthSceneParams {
  int num_inliers = 100;
  // Fraction of all correspondences that are outliers, in [0, 1).
  double outlier_fraction = 0.0;
  // Per-axis Gaussian noise on inlier B positions, truncated at 3 sigma.
  double noise_sigma = 0.5;
  // Square image side in pixels for both views.
  int image_size = 1024;
  int descriptor_dim = 32;
  uint64_t seed = 0;
  // Global A -> B pixel transform; drawn at random from the seed if unset.
  std::optional<AffineModel> transform;
};

// Two views related by a global affine transform. Correspondence i links
// kps_a[i] with kps_b[b_index[i]]; inliers follow the transform, outliers
// have a uniformly placed B keypoint. Descriptors of corresponding
// keypoints are near-identical unit vectors, so descriptor matching
// recovers every correspondence and only geometry separates outliers.
struct SynthScene {
  SynthSceneParams params;
  AffineModel transform;
  std::vector<Keypoint> kps_a;
  std::vector<Keypoint> kps_b;
  LocalDescriptorSet desc_a;
  LocalDescriptorSet desc_b;
  std::vector<uint32_t> b_index;
  std::vector<bool> is_inlier;

  int NumOutliers() const;
};

// Throws std::invalid_argument for outlier_fraction outside [0, 1),
// non-positive sizes or a transform with |det| < 1e-6.
SynthScene GenerateSynthScene(const SynthSceneParams& params);

struct SynthMetrics {
  size_t raw_matches = 0;
  size_t kept = 0;
  size_t kept_inliers = 0;
  size_t gt_inliers = 0;
  // kept_inliers / kept, 1 when nothing is kept.
  double precision = 1.0;
  // kept_inliers / gt_inliers, 1 when there are no inliers.
  double recall = 1.0;
};

// Mutual-NN matching followed by the local-affine filter, scored against
// the scene's ground truth.
SynthMetrics EvaluateSynthScene(const SynthScene& scene,
                                const AdalamConfig& config,
                                const MutualNNOptions& nn_options,
                                uint64_t rng_seed, int num_threads = 1);

// Scores an arbitrary filtered match set against the scene.
SynthMetrics ScoreMatches(const SynthScene& scene, const MatchSet& raw,
                          const MatchSet& kept);

}  // namespace matchforge
