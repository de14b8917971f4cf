#include "matchforge/adalam.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

#include "matchforge/parallel.h"
#include "matchforge/random.h"

namespace matchforge {
namespace {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double SquaredNorm(double dx, double dy) { return dx * dx + dy * dy; }

double WrapAngle(double a) {
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) a += 2.0 * std::numbers::pi;
  return a - std::numbers::pi;
}

void CheckMatchIndices(const MatchSet& matches,
                       const std::vector<Keypoint>& kps_a,
                       const std::vector<Keypoint>& kps_b) {
  for (const Match& m : matches.matches) {
    if (m.idx_a >= kps_a.size() || m.idx_b >= kps_b.size()) {
      throw std::invalid_argument("match index out of keypoint range");
    }
  }
}

bool FramesAgree(const Keypoint& sa, const Keypoint& sb, const Keypoint& ma,
                 const Keypoint& mb, const AdalamConfig& config) {
  if (sa.HasOrientation() || sb.HasOrientation() || ma.HasOrientation() ||
      mb.HasOrientation()) {
    const double seed_rotation = sb.orientation - sa.orientation;
    const double member_rotation = mb.orientation - ma.orientation;
    const double tol = config.orientation_tol_deg * std::numbers::pi / 180.0;
    if (std::abs(WrapAngle(member_rotation - seed_rotation)) > tol) {
      return false;
    }
  }
  if (sa.HasScale() || sb.HasScale() || ma.HasScale() || mb.HasScale()) {
    const double ratio = (mb.scale / ma.scale) / (sb.scale / sa.scale);
    if (!(ratio >= config.min_scale_ratio && ratio <= config.max_scale_ratio)) {
      return false;
    }
  }
  return true;
}

class LocalRansac {
 public:
  LocalRansac(std::vector<Vec2> src, std::vector<Vec2> dst,
              const AdalamConfig& config)
      : src_(std::move(src)),
        dst_(std::move(dst)),
        config_(config),
        tol2_(config.inlier_tol * config.inlier_tol) {}

  // Tries the similarity through samples i and j; keeps it (or its affine
  // refinement) if it beats the current best consensus.
  void Evaluate(size_t i, size_t j) {
    const double dpx = src_[j].x - src_[i].x;
    const double dpy = src_[j].y - src_[i].y;
    const double dp2 = SquaredNorm(dpx, dpy);
    if (dp2 < 1e-12) return;
    const double dqx = dst_[j].x - dst_[i].x;
    const double dqy = dst_[j].y - dst_[i].y;
    // Complex ratio dq / dp gives rotation + scale.
    const double a = (dqx * dpx + dqy * dpy) / dp2;
    const double b = (dqy * dpx - dqx * dpy) / dp2;
    AffineModel model;
    model.A = {a, -b, b, a};
    model.t = {dst_[i].x - (a * src_[i].x - b * src_[i].y),
               dst_[i].y - (b * src_[i].x + a * src_[i].y)};
    if (!DeterminantOk(model)) return;

    std::vector<size_t> consensus = Consensus(model);
    if (consensus.size() <= best_consensus_.size()) return;
    if (config_.refine_affine && consensus.size() >= 3) {
      AffineModel refined;
      if (FitAffine(consensus, &refined) && DeterminantOk(refined)) {
        std::vector<size_t> refined_consensus = Consensus(refined);
        if (refined_consensus.size() >= consensus.size()) {
          model = refined;
          consensus = std::move(refined_consensus);
        }
      }
    }
    best_model_ = model;
    best_consensus_ = std::move(consensus);
  }

  const std::vector<size_t>& best_consensus() const { return best_consensus_; }
  const AffineModel& best_model() const { return best_model_; }

 private:
  bool DeterminantOk(const AffineModel& model) const {
    const double det = std::abs(model.Determinant());
    return det >= config_.min_det && det <= config_.max_det;
  }

  std::vector<size_t> Consensus(const AffineModel& model) const {
    std::vector<size_t> inliers;
    for (size_t k = 0; k < src_.size(); ++k) {
      const double px = model.A[0] * src_[k].x + model.A[1] * src_[k].y +
                        model.t[0];
      const double py = model.A[2] * src_[k].x + model.A[3] * src_[k].y +
                        model.t[1];
      if (SquaredNorm(px - dst_[k].x, py - dst_[k].y) <= tol2_) {
        inliers.push_back(k);
      }
    }
    return inliers;
  }

  bool FitAffine(const std::vector<size_t>& subset, AffineModel* model) const {
    Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
    Eigen::Vector3d rhs_x = Eigen::Vector3d::Zero();
    Eigen::Vector3d rhs_y = Eigen::Vector3d::Zero();
    for (size_t k : subset) {
      const Eigen::Vector3d row(src_[k].x, src_[k].y, 1.0);
      normal += row * row.transpose();
      rhs_x += row * dst_[k].x;
      rhs_y += row * dst_[k].y;
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(normal);
    if (lu.rank() < 3) return false;
    const Eigen::Vector3d px = lu.solve(rhs_x);
    const Eigen::Vector3d py = lu.solve(rhs_y);
    if (!px.allFinite() || !py.allFinite()) return false;
    model->A = {px[0], px[1], py[0], py[1]};
    model->t = {px[2], py[2]};
    return true;
  }

  std::vector<Vec2> src_;
  std::vector<Vec2> dst_;
  const AdalamConfig& config_;
  double tol2_;
  AffineModel best_model_;
  std::vector<size_t> best_consensus_;
};

}  // namespace

AdalamConfig AdalamConfig::ForImageSize(double width, double height) {
  if (!(width > 0.0 && height > 0.0)) {
    throw std::invalid_argument("image size must be positive");
  }
  const double diagonal = std::hypot(width, height);
  AdalamConfig config;
  config.seed_radius = diagonal / 40.0;
  config.neighborhood_radius_a = diagonal / 4.0;
  config.neighborhood_radius_b = diagonal / 4.0;
  return config;
}

void AdalamConfig::Validate() const {
  auto fail = [](const std::string& what) {
    throw std::invalid_argument("invalid adalam config: " + what);
  };
  if (!(seed_radius > 0.0)) fail("seed_radius must be > 0");
  if (!(neighborhood_radius_a > 0.0)) fail("neighborhood_radius_a must be > 0");
  if (!(neighborhood_radius_b > 0.0)) fail("neighborhood_radius_b must be > 0");
  if (ransac_iters < 1) fail("ransac_iters must be >= 1");
  if (!(inlier_tol > 0.0)) fail("inlier_tol must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha must be in (0, 1)");
  if (min_inliers < 0) fail("min_inliers must be >= 0");
  if (!(orientation_tol_deg >= 0.0)) fail("orientation_tol_deg must be >= 0");
  if (!(min_scale_ratio > 0.0 && min_scale_ratio <= max_scale_ratio)) {
    fail("scale ratio bounds must satisfy 0 < min <= max");
  }
  if (!(min_det > 0.0 && min_det <= max_det)) {
    fail("determinant bounds must satisfy 0 < min <= max");
  }
}

std::vector<SeedPoint> SelectSeeds(const MatchSet& matches,
                                   const std::vector<Keypoint>& kps_a,
                                   const AdalamConfig& config) {
  std::vector<size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t l, size_t r) {
    return matches.matches[l].confidence > matches.matches[r].confidence;
  });

  const double r2 = config.seed_radius * config.seed_radius;
  std::vector<SeedPoint> seeds;
  for (size_t idx : order) {
    const Keypoint& p = kps_a.at(matches.matches[idx].idx_a);
    bool suppressed = false;
    for (const SeedPoint& s : seeds) {
      const Keypoint& q = kps_a[matches.matches[s.match_index].idx_a];
      if (SquaredNorm(p.x - q.x, p.y - q.y) <= r2) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) seeds.push_back({idx, matches.matches[idx].confidence});
  }
  return seeds;
}

std::vector<Neighborhood> AssignNeighborhoods(
    const std::vector<SeedPoint>& seeds, const MatchSet& matches,
    const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
    const AdalamConfig& config) {
  const double ra2 = config.neighborhood_radius_a * config.neighborhood_radius_a;
  const double rb2 = config.neighborhood_radius_b * config.neighborhood_radius_b;
  std::vector<Neighborhood> out;
  out.reserve(seeds.size());
  for (const SeedPoint& seed : seeds) {
    const Match& sm = matches.matches.at(seed.match_index);
    const Keypoint& sa = kps_a.at(sm.idx_a);
    const Keypoint& sb = kps_b.at(sm.idx_b);
    Neighborhood n{seed, {}};
    for (size_t k = 0; k < matches.size(); ++k) {
      const Match& m = matches.matches[k];
      const Keypoint& ma = kps_a.at(m.idx_a);
      const Keypoint& mb = kps_b.at(m.idx_b);
      if (SquaredNorm(ma.x - sa.x, ma.y - sa.y) > ra2) continue;
      if (SquaredNorm(mb.x - sb.x, mb.y - sb.y) > rb2) continue;
      if (k != seed.match_index && !FramesAgree(sa, sb, ma, mb, config)) {
        continue;
      }
      n.members.push_back(k);
    }
    out.push_back(std::move(n));
  }
  return out;
}

double BinomialUpperTail(int m, int k, double p) {
  if (k <= 0) return 1.0;
  if (k > m) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_m_fact = std::lgamma(m + 1.0);
  double tail = 0.0;
  for (int x = k; x <= m; ++x) {
    tail += std::exp(log_m_fact - std::lgamma(x + 1.0) -
                     std::lgamma(m - x + 1.0) + x * log_p + (m - x) * log_q);
  }
  return std::min(1.0, tail);
}

double BaselineInlierProbability(const AdalamConfig& config) {
  const double ratio = config.inlier_tol / config.neighborhood_radius_b;
  return std::min(1.0, ratio * ratio);
}

NeighborhoodVerification VerifyNeighborhood(
    const Neighborhood& neighborhood, const MatchSet& matches,
    const std::vector<Keypoint>& kps_a, const std::vector<Keypoint>& kps_b,
    const AdalamConfig& config, uint64_t rng_seed) {
  NeighborhoodVerification result;
  const size_t m = neighborhood.members.size();
  if (m < 2) return result;

  const Match& sm = matches.matches.at(neighborhood.seed.match_index);
  const Keypoint& sa = kps_a.at(sm.idx_a);
  const Keypoint& sb = kps_b.at(sm.idx_b);
  std::vector<Vec2> src(m), dst(m);
  for (size_t k = 0; k < m; ++k) {
    const Match& mm = matches.matches.at(neighborhood.members[k]);
    src[k] = {kps_a.at(mm.idx_a).x - sa.x, kps_a.at(mm.idx_a).y - sa.y};
    dst[k] = {kps_b.at(mm.idx_b).x - sb.x, kps_b.at(mm.idx_b).y - sb.y};
  }

  LocalRansac ransac(std::move(src), std::move(dst), config);
  const uint64_t num_pairs = static_cast<uint64_t>(m) * (m - 1) / 2;
  if (num_pairs <= static_cast<uint64_t>(config.ransac_iters)) {
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = i + 1; j < m; ++j) ransac.Evaluate(i, j);
    }
  } else {
    Rng rng = Rng::Substream(rng_seed, neighborhood.seed.match_index);
    for (int it = 0; it < config.ransac_iters; ++it) {
      const size_t i = rng.UniformIndex(m);
      size_t j = rng.UniformIndex(m - 1);
      if (j >= i) ++j;
      ransac.Evaluate(i, j);
    }
  }

  const std::vector<size_t>& consensus = ransac.best_consensus();
  result.best_consensus = static_cast<int>(consensus.size());
  result.model = ransac.best_model();
  result.p_value = BinomialUpperTail(static_cast<int>(m),
                                     result.best_consensus,
                                     BaselineInlierProbability(config));
  result.significant = result.best_consensus > 0 &&
                       result.p_value <= config.alpha &&
                       result.best_consensus >= config.min_inliers;
  if (result.significant) {
    result.inliers.reserve(consensus.size());
    for (size_t k : consensus) {
      result.inliers.push_back(neighborhood.members[k]);
    }
  }
  return result;
}

std::vector<size_t> AdalamFilterIndices(const MatchSet& matches,
                                        const std::vector<Keypoint>& kps_a,
                                        const std::vector<Keypoint>& kps_b,
                                        const AdalamConfig& config,
                                        uint64_t rng_seed, int num_threads) {
  config.Validate();
  if (matches.empty()) return {};
  CheckMatchIndices(matches, kps_a, kps_b);

  const std::vector<SeedPoint> seeds = SelectSeeds(matches, kps_a, config);
  const std::vector<Neighborhood> neighborhoods =
      AssignNeighborhoods(seeds, matches, kps_a, kps_b, config);

  std::vector<std::vector<size_t>> inliers(neighborhoods.size());
  ParallelFor(neighborhoods.size(), num_threads, [&](size_t n) {
    inliers[n] = VerifyNeighborhood(neighborhoods[n], matches, kps_a, kps_b,
                                    config, rng_seed)
                     .inliers;
  });

  std::vector<bool> keep(matches.size(), false);
  for (const auto& set : inliers) {
    for (size_t k : set) keep[k] = true;
  }
  std::vector<size_t> kept;
  for (size_t k = 0; k < keep.size(); ++k) {
    if (keep[k]) kept.push_back(k);
  }
  return kept;
}

MatchSet AdalamFilter(const MatchSet& matches,
                      const std::vector<Keypoint>& kps_a,
                      const std::vector<Keypoint>& kps_b,
                      const AdalamConfig& config, uint64_t rng_seed,
                      int num_threads) {
  MatchSet out{matches.id_a, matches.id_b, {}};
  for (size_t k : AdalamFilterIndices(matches, kps_a, kps_b, config, rng_seed,
                                      num_threads)) {
    out.matches.push_back(matches.matches[k]);
  }
  std::sort(out.matches.begin(), out.matches.end(),
            [](const Match& l, const Match& r) {
              return std::tie(l.idx_a, l.idx_b) < std::tie(r.idx_a, r.idx_b);
            });
  return out;
}

}  // namespace matchforge
