#include "matchforge/synthetic.h"

#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "matchforge/random.h"

namespace matchforge {
namespace {

constexpr int kMaxPlacementAttempts = 10000;

AffineModel RandomTransform(Rng& rng, double size) {
  const double angle = rng.Uniform(-20.0, 20.0) * std::numbers::pi / 180.0;
  const double sx = rng.Uniform(0.8, 1.25);
  const double sy = rng.Uniform(0.8, 1.25);
  const double shear = rng.Uniform(-0.1, 0.1);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  // R * [sx shear; 0 sy]
  AffineModel model;
  model.A = {c * sx, c * shear - s * sy, s * sx, s * shear + c * sy};
  // Rotate about the image centre, then shift a little.
  const double centre = size / 2.0;
  const double tx = rng.Uniform(-50.0, 50.0);
  const double ty = rng.Uniform(-50.0, 50.0);
  model.t = {centre + tx - (model.A[0] * centre + model.A[1] * centre),
             centre + ty - (model.A[2] * centre + model.A[3] * centre)};
  return model;
}

std::vector<float> RandomUnitVector(Rng& rng, int dim) {
  std::vector<double> v(dim);
  double norm = 0.0;
  while (norm == 0.0) {
    norm = 0.0;
    for (double& x : v) {
      x = rng.Normal();
      norm += x * x;
    }
  }
  norm = std::sqrt(norm);
  std::vector<float> out(dim);
  for (int k = 0; k < dim; ++k) out[k] = static_cast<float>(v[k] / norm);
  return out;
}

std::vector<float> Perturb(Rng& rng, const std::vector<float>& v,
                           double sigma) {
  std::vector<double> w(v.size());
  double norm = 0.0;
  for (size_t k = 0; k < v.size(); ++k) {
    w[k] = v[k] + sigma * rng.Normal();
    norm += w[k] * w[k];
  }
  norm = std::sqrt(norm);
  std::vector<float> out(v.size());
  for (size_t k = 0; k < v.size(); ++k) {
    out[k] = static_cast<float>(w[k] / norm);
  }
  return out;
}

}  // namespace

int SynthScene::NumOutliers() const {
  return static_cast<int>(kps_a.size()) - params.num_inliers;
}

SynthScene GenerateSynthScene(const SynthSceneParams& params) {
  if (!(params.outlier_fraction >= 0.0 && params.outlier_fraction < 1.0)) {
    throw std::invalid_argument("outlier fraction must be in [0, 1)");
  }
  if (params.num_inliers < 0 || params.image_size <= 0 ||
      params.descriptor_dim <= 0 || !(params.noise_sigma >= 0.0)) {
    throw std::invalid_argument("invalid synthetic scene parameters");
  }
  Rng rng(params.seed);
  const double size = params.image_size;

  SynthScene scene;
  scene.params = params;
  scene.transform = params.transform ? *params.transform
                                     : RandomTransform(rng, size);
  if (std::abs(scene.transform.Determinant()) < 1e-6) {
    throw std::invalid_argument("degenerate transform: |det| < 1e-6");
  }
  const AffineModel& T = scene.transform;

  const int num_outliers = static_cast<int>(std::lround(
      params.num_inliers * params.outlier_fraction /
      (1.0 - params.outlier_fraction)));
  const int total = params.num_inliers + num_outliers;

  std::vector<Keypoint> b_in_order;
  for (int i = 0; i < total; ++i) {
    const bool inlier = i < params.num_inliers;
    Keypoint a, b;
    int attempts = 0;
    while (true) {
      if (++attempts > kMaxPlacementAttempts) {
        throw std::invalid_argument(
            "transform maps too little of image A into image B");
      }
      a.x = rng.Uniform(0.0, size);
      a.y = rng.Uniform(0.0, size);
      if (inlier) {
        double nx = 0.0, ny = 0.0;
        if (params.noise_sigma > 0.0) {
          do {
            nx = params.noise_sigma * rng.Normal();
            ny = params.noise_sigma * rng.Normal();
          } while (std::hypot(nx, ny) > 3.0 * params.noise_sigma);
        }
        b.x = T.A[0] * a.x + T.A[1] * a.y + T.t[0] + nx;
        b.y = T.A[2] * a.x + T.A[3] * a.y + T.t[1] + ny;
      } else {
        b.x = rng.Uniform(0.0, size);
        b.y = rng.Uniform(0.0, size);
      }
      if (b.x >= 0.0 && b.x < size && b.y >= 0.0 && b.y < size) break;
    }
    a.score = b.score = 1.0;
    scene.kps_a.push_back(a);
    b_in_order.push_back(b);
    scene.is_inlier.push_back(inlier);
  }

  // Store B keypoints in a shuffled order so indices carry no information.
  std::vector<uint32_t> perm(total);
  std::iota(perm.begin(), perm.end(), 0u);
  for (int i = total - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.UniformIndex(static_cast<uint64_t>(i) + 1)]);
  }
  scene.kps_b.resize(total);
  scene.b_index.resize(total);
  for (int i = 0; i < total; ++i) {
    scene.b_index[i] = perm[i];
    scene.kps_b[perm[i]] = b_in_order[i];
  }

  const int dim = params.descriptor_dim;
  scene.desc_a.dim = scene.desc_b.dim = dim;
  scene.desc_a.values.resize(static_cast<size_t>(total) * dim);
  scene.desc_b.values.resize(static_cast<size_t>(total) * dim);
  for (int i = 0; i < total; ++i) {
    const std::vector<float> va = RandomUnitVector(rng, dim);
    const std::vector<float> vb = Perturb(rng, va, 0.02);
    std::copy(va.begin(), va.end(),
              scene.desc_a.values.begin() + static_cast<size_t>(i) * dim);
    std::copy(vb.begin(), vb.end(),
              scene.desc_b.values.begin() +
                  static_cast<size_t>(scene.b_index[i]) * dim);
  }
  return scene;
}

SynthMetrics ScoreMatches(const SynthScene& scene, const MatchSet& raw,
                          const MatchSet& kept) {
  SynthMetrics metrics;
  metrics.raw_matches = raw.size();
  metrics.kept = kept.size();
  metrics.gt_inliers = static_cast<size_t>(scene.params.num_inliers);
  for (const Match& m : kept.matches) {
    if (m.idx_a < scene.is_inlier.size() && scene.is_inlier[m.idx_a] &&
        scene.b_index[m.idx_a] == m.idx_b) {
      ++metrics.kept_inliers;
    }
  }
  if (metrics.kept > 0) {
    metrics.precision =
        static_cast<double>(metrics.kept_inliers) / metrics.kept;
  }
  if (metrics.gt_inliers > 0) {
    metrics.recall =
        static_cast<double>(metrics.kept_inliers) / metrics.gt_inliers;
  }
  return metrics;
}

SynthMetrics EvaluateSynthScene(const SynthScene& scene,
                                const AdalamConfig& config,
                                const MutualNNOptions& nn_options,
                                uint64_t rng_seed, int num_threads) {
  const MatchSet raw =
      MutualNNMatch(scene.desc_a, scene.desc_b, nn_options, num_threads);
  const MatchSet kept = AdalamFilter(raw, scene.kps_a, scene.kps_b, config,
                                     rng_seed, num_threads);
  return ScoreMatches(scene, raw, kept);
}

}  // namespace matchforge
