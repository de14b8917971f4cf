#include "matchforge/adalam.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "matchforge/synthetic.h"
#include "test_util.h"

namespace matchforge {
namespace {

struct Scene {
  MatchSet matches;
  std::vector<Keypoint> kps_a;
  std::vector<Keypoint> kps_b;
};

// Matches i -> i with B = sim(A) for the first `inliers`, uniform B after.
Scene SimilarityScene(Rng& rng, int inliers, int outliers, double size,
                      double angle, double scale, double tx, double ty) {
  Scene s;
  const double c = scale * std::cos(angle), sn = scale * std::sin(angle);
  for (int i = 0; i < inliers + outliers; ++i) {
    Keypoint a, b;
    a.x = rng.Uniform(0, size);
    a.y = rng.Uniform(0, size);
    if (i < inliers) {
      b.x = c * a.x - sn * a.y + tx;
      b.y = sn * a.x + c * a.y + ty;
    } else {
      b.x = rng.Uniform(0, size);
      b.y = rng.Uniform(0, size);
    }
    s.kps_a.push_back(a);
    s.kps_b.push_back(b);
    s.matches.matches.push_back({static_cast<uint32_t>(i),
                                 static_cast<uint32_t>(i), 0.0f,
                                 static_cast<float>(rng.Uniform())});
  }
  return s;
}

AdalamConfig Config(double size) {
  return AdalamConfig::ForImageSize(size, size);
}

TEST(AdalamConfig, DefaultsScaleWithImage) {
  const AdalamConfig c = AdalamConfig::ForImageSize(1024, 1024);
  const double diag = std::hypot(1024.0, 1024.0);
  EXPECT_DOUBLE_EQ(c.seed_radius, diag / 40);
  EXPECT_DOUBLE_EQ(c.neighborhood_radius_a, diag / 4);
  EXPECT_DOUBLE_EQ(c.neighborhood_radius_b, diag / 4);
  EXPECT_EQ(c.ransac_iters, 128);
  EXPECT_EQ(c.inlier_tol, 4.0);
  EXPECT_EQ(c.alpha, 0.01);
  EXPECT_EQ(c.min_inliers, 6);
  EXPECT_NO_THROW(c.Validate());
  EXPECT_THROW(AdalamConfig::ForImageSize(0, 10), std::invalid_argument);
}

TEST(AdalamConfig, ValidateRejectsBadFields) {
  AdalamConfig c = Config(100);
  c.alpha = 1.0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = Config(100);
  c.ransac_iters = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  c = Config(100);
  c.neighborhood_radius_b = 0;
  EXPECT_THROW(c.Validate(), std::invalid_argument);
  EXPECT_THROW(AdalamFilter(MatchSet{}, {}, {}, AdalamConfig{}, 0),
               std::invalid_argument);
}

TEST(BinomialUpperTail, MatchesExactSum) {
  for (int m = 1; m <= 25; ++m) {
    for (double p : {0.001, 0.1, 0.5, 0.9}) {
      for (int k = 0; k <= m + 1; ++k) {
        double exact = 0.0;
        for (int x = k; x <= m; ++x) {
          double comb = 1.0;
          for (int t = 1; t <= x; ++t) comb = comb * (m - x + t) / t;
          exact += comb * std::pow(p, x) * std::pow(1 - p, m - x);
        }
        EXPECT_NEAR(BinomialUpperTail(m, k, p), std::min(1.0, exact), 1e-12)
            << m << " " << k << " " << p;
      }
    }
  }
}

TEST(BaselineInlierProbability, AreaRatio) {
  AdalamConfig c = Config(100);
  c.inlier_tol = 4;
  c.neighborhood_radius_b = 40;
  EXPECT_DOUBLE_EQ(BaselineInlierProbability(c), 0.01);
  c.inlier_tol = 80;
  EXPECT_EQ(BaselineInlierProbability(c), 1.0);
}

TEST(SelectSeeds, Examples) {
  MatchSet one{"a", "b", {{0, 0, 0.f, 0.5f}}};
  std::vector<Keypoint> kps(2);
  AdalamConfig c = Config(100);
  c.seed_radius = 10;
  EXPECT_EQ(SelectSeeds(one, kps, c).size(), 1u);

  kps[1].x = 1.0;
  MatchSet two{"a", "b", {{0, 0, 0.f, 0.2f}, {1, 1, 0.f, 0.7f}}};
  const auto seeds = SelectSeeds(two, kps, c);
  ASSERT_EQ(seeds.size(), 1u);
  EXPECT_EQ(seeds[0].match_index, 1u);
}

TEST(SelectSeeds, MatchesGreedyOracle) {
  Rng rng(1);
  for (int trial = 0; trial < 30; ++trial) {
    Scene s = SimilarityScene(rng, 0, 200, 300, 0, 1, 0, 0);
    // Coarse confidences to exercise the index tie-break.
    for (Match& m : s.matches.matches) {
      m.confidence = static_cast<float>(rng.UniformIndex(4)) / 4.0f;
    }
    AdalamConfig c = Config(300);
    c.seed_radius = 25;
    std::vector<std::tuple<float, size_t>> order;
    for (size_t k = 0; k < 200; ++k) {
      order.emplace_back(-s.matches.matches[k].confidence, k);
    }
    std::sort(order.begin(), order.end());
    std::vector<size_t> expected;
    for (const auto& [neg, k] : order) {
      bool ok = true;
      for (size_t e : expected) {
        const Keypoint& p = s.kps_a[s.matches.matches[k].idx_a];
        const Keypoint& q = s.kps_a[s.matches.matches[e].idx_a];
        if (std::hypot(p.x - q.x, p.y - q.y) <= 25) ok = false;
      }
      if (ok) expected.push_back(k);
    }
    const auto seeds = SelectSeeds(s.matches, s.kps_a, c);
    ASSERT_EQ(seeds.size(), expected.size());
    for (size_t i = 0; i < seeds.size(); ++i) {
      EXPECT_EQ(seeds[i].match_index, expected[i]);
    }
  }
}

TEST(AssignNeighborhoods, MatchesDoubleLoopOracle) {
  Rng rng(2);
  Scene s;
  // Three clusters in A, mapped to clusters in B with a few cross-links.
  for (int i = 0; i < 150; ++i) {
    const int cluster = i % 3;
    Keypoint a, b;
    a.x = 100 + 300 * cluster + rng.Normal() * 30;
    a.y = 200 + rng.Normal() * 30;
    const int target = rng.Uniform() < 0.2 ? (cluster + 1) % 3 : cluster;
    b.x = 150 + 300 * target + rng.Normal() * 30;
    b.y = 400 + rng.Normal() * 30;
    s.kps_a.push_back(a);
    s.kps_b.push_back(b);
    s.matches.matches.push_back({uint32_t(i), uint32_t(i), 0.f,
                                 float(rng.Uniform())});
  }
  AdalamConfig c = Config(1000);
  c.seed_radius = 40;
  c.neighborhood_radius_a = 120;
  c.neighborhood_radius_b = 90;
  const auto seeds = SelectSeeds(s.matches, s.kps_a, c);
  const auto hoods = AssignNeighborhoods(seeds, s.matches, s.kps_a, s.kps_b, c);
  ASSERT_EQ(hoods.size(), seeds.size());
  for (size_t n = 0; n < hoods.size(); ++n) {
    const Match& sm = s.matches.matches[seeds[n].match_index];
    std::vector<size_t> expected;
    for (size_t k = 0; k < s.matches.size(); ++k) {
      const Match& m = s.matches.matches[k];
      const double da = std::hypot(s.kps_a[m.idx_a].x - s.kps_a[sm.idx_a].x,
                                   s.kps_a[m.idx_a].y - s.kps_a[sm.idx_a].y);
      const double db = std::hypot(s.kps_b[m.idx_b].x - s.kps_b[sm.idx_b].x,
                                   s.kps_b[m.idx_b].y - s.kps_b[sm.idx_b].y);
      if (da <= 120 && db <= 90) expected.push_back(k);
    }
    EXPECT_EQ(hoods[n].members, expected);
    EXPECT_TRUE(std::binary_search(hoods[n].members.begin(),
                                   hoods[n].members.end(),
                                   seeds[n].match_index));
  }
}

TEST(AssignNeighborhoods, RequiresProximityInBothImages) {
  std::vector<Keypoint> a(2), b(2);
  a[1].x = 1;
  b[1].x = 10 * 50;
  MatchSet ms{"a", "b", {{0, 0, 0.f, 1.f}, {1, 1, 0.f, 0.5f}}};
  AdalamConfig c = Config(1000);
  c.neighborhood_radius_a = 50;
  c.neighborhood_radius_b = 50;
  const auto hoods =
      AssignNeighborhoods({{0, 1.0}}, ms, a, b, c);
  EXPECT_EQ(hoods[0].members, (std::vector<size_t>{0}));
}

TEST(AssignNeighborhoods, LocalFramePrefilter) {
  std::vector<Keypoint> a(3), b(3);
  for (int i = 0; i < 3; ++i) {
    a[i].x = b[i].x = 5.0 * i;
    a[i].orientation = 0.1;
    b[i].orientation = 0.1;
  }
  b[1].orientation = 0.1 + std::numbers::pi / 2;  // rotated 90 deg
  b[2].scale = 3.0;                               // scale change 3x
  MatchSet ms{"a", "b", {{0, 0, 0.f, 1.f}, {1, 1, 0.f, 0.f}, {2, 2, 0.f, 0.f}}};
  AdalamConfig c = Config(1000);
  auto hoods = AssignNeighborhoods({{0, 1.0}}, ms, a, b, c);
  EXPECT_EQ(hoods[0].members, (std::vector<size_t>{0}));
  c.orientation_tol_deg = 100;
  c.max_scale_ratio = 4;
  hoods = AssignNeighborhoods({{0, 1.0}}, ms, a, b, c);
  EXPECT_EQ(hoods[0].members, (std::vector<size_t>{0, 1, 2}));
}

TEST(VerifyNeighborhood, ExactSimilarityKeepsAll) {
  Rng rng(3);
  Scene s = SimilarityScene(rng, 10, 0, 100, 0.3, 1.2, 15, -7);
  AdalamConfig c = Config(100);
  c.alpha = 0.05;
  c.min_inliers = 6;
  Neighborhood n{{0, 1.0}, {}};
  for (size_t k = 0; k < 10; ++k) n.members.push_back(k);
  const auto v = VerifyNeighborhood(n, s.matches, s.kps_a, s.kps_b, c, 1);
  EXPECT_TRUE(v.significant);
  EXPECT_EQ(v.inliers, n.members);
  EXPECT_EQ(v.best_consensus, 10);
  EXPECT_NEAR(v.model.A[0], 1.2 * std::cos(0.3), 1e-9);
  EXPECT_NEAR(v.model.A[2], 1.2 * std::sin(0.3), 1e-9);
}

TEST(VerifyNeighborhood, SingleMemberIsNotSignificant) {
  Rng rng(4);
  Scene s = SimilarityScene(rng, 3, 0, 100, 0, 1, 0, 0);
  const auto v = VerifyNeighborhood({{0, 1.0}, {0}}, s.matches, s.kps_a,
                                    s.kps_b, Config(100), 0);
  EXPECT_FALSE(v.significant);
  EXPECT_TRUE(v.inliers.empty());
}

// Members scattered uniformly over the B disc of the neighbourhood: the
// false-positive rate must stay within alpha.
TEST(VerifyNeighborhood, UniformClutterRarelySignificant) {
  const AdalamConfig c = Config(1024);
  const double ra = c.neighborhood_radius_a;
  const double rb = c.neighborhood_radius_b;
  int significant = 0;
  const int trials = 1000;
  for (int seed = 0; seed < trials; ++seed) {
    Rng rng(static_cast<uint64_t>(seed) + 1000);
    const int m = 30;
    Scene s;
    for (int i = 0; i < m; ++i) {
      Keypoint a, b;
      const double r1 = ra * std::sqrt(rng.Uniform()), t1 = rng.Uniform(0, 6.283);
      const double r2 = rb * std::sqrt(rng.Uniform()), t2 = rng.Uniform(0, 6.283);
      if (i > 0) {
        a.x = r1 * std::cos(t1);
        a.y = r1 * std::sin(t1);
        b.x = r2 * std::cos(t2);
        b.y = r2 * std::sin(t2);
      }
      s.kps_a.push_back(a);
      s.kps_b.push_back(b);
      s.matches.matches.push_back({uint32_t(i), uint32_t(i), 0.f, 0.f});
    }
    Neighborhood n{{0, 0.0}, {}};
    for (int i = 0; i < m; ++i) n.members.push_back(i);
    const auto v = VerifyNeighborhood(n, s.matches, s.kps_a, s.kps_b, c,
                                      static_cast<uint64_t>(seed));
    if (v.significant) ++significant;
  }
  EXPECT_LE(significant, static_cast<int>(c.alpha * trials));
}

TEST(VerifyNeighborhood, SignificantImpliesMinInliers) {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    Scene s = SimilarityScene(rng, 2 + rng.UniformIndex(8), rng.UniformIndex(5),
                              50, 0.1, 1.0, 3, 3);
    AdalamConfig c = Config(50);
    c.min_inliers = 2 + static_cast<int>(rng.UniformIndex(6));
    c.alpha = 0.5;
    Neighborhood n{{0, 1.0}, {}};
    for (size_t k = 0; k < s.matches.size(); ++k) n.members.push_back(k);
    const auto v = VerifyNeighborhood(n, s.matches, s.kps_a, s.kps_b, c, trial);
    if (v.significant) {
      EXPECT_GE(static_cast<int>(v.inliers.size()), c.min_inliers);
    } else {
      EXPECT_TRUE(v.inliers.empty());
    }
  }
}

TEST(AdalamFilter, GlobalSimilarityKeepsEverything) {
  Rng rng(6);
  Scene s = SimilarityScene(rng, 150, 0, 1024, -0.2, 0.9, 40, 60);
  const MatchSet out = AdalamFilter(s.matches, s.kps_a, s.kps_b, Config(1024), 3);
  EXPECT_EQ(out.size(), s.matches.size());
}

TEST(AdalamFilter, EmptyInput) {
  EXPECT_TRUE(AdalamFilter(MatchSet{}, {}, {}, Config(100), 0).empty());
}

TEST(AdalamFilter, SortedByIndexPair) {
  Rng rng(7);
  Scene s = SimilarityScene(rng, 60, 60, 512, 0.1, 1.1, 5, 5);
  std::reverse(s.matches.matches.begin(), s.matches.matches.end());
  const MatchSet out = AdalamFilter(s.matches, s.kps_a, s.kps_b, Config(512), 0);
  for (size_t k = 1; k < out.size(); ++k) {
    EXPECT_LT(std::tie(out.matches[k - 1].idx_a, out.matches[k - 1].idx_b),
              std::tie(out.matches[k].idx_a, out.matches[k].idx_b));
  }
}

TEST(AdalamFilter, SubsetAndThreadIndependent) {
  for (uint64_t seed = 0; seed < 25; ++seed) {
    SynthSceneParams p;
    p.num_inliers = 40 + static_cast<int>(seed * 7 % 90);
    p.outlier_fraction = 0.1 * static_cast<double>(seed % 9);
    p.noise_sigma = 0.5 * static_cast<double>(seed % 4);
    p.image_size = 512;
    p.seed = seed;
    const SynthScene scene = GenerateSynthScene(p);
    const MatchSet raw = MutualNNMatch(scene.desc_a, scene.desc_b);
    AdalamConfig c = Config(512);
    if (seed % 2) c.ransac_iters = 16;  // force random sampling
    const auto one = AdalamFilterIndices(raw, scene.kps_a, scene.kps_b, c, seed, 1);
    const auto eight = AdalamFilterIndices(raw, scene.kps_a, scene.kps_b, c, seed, 8);
    const auto again = AdalamFilterIndices(raw, scene.kps_a, scene.kps_b, c, seed, 1);
    EXPECT_EQ(one, eight);
    EXPECT_EQ(one, again);
    for (size_t k : one) EXPECT_LT(k, raw.size());
    EXPECT_TRUE(std::is_sorted(one.begin(), one.end()));
    EXPECT_EQ(std::adjacent_find(one.begin(), one.end()), one.end());
  }
}

TEST(AdalamFilter, TranslationEquivariant) {
  // Dyadic coordinates and offsets keep every difference exact.
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    Scene s = SimilarityScene(rng, 80, 40, 512, 0.25, 1.05, 10, -4);
    for (auto* kps : {&s.kps_a, &s.kps_b}) {
      for (Keypoint& kp : *kps) {
        kp.x = std::round(kp.x * 8) / 8;
        kp.y = std::round(kp.y * 8) / 8;
      }
    }
    AdalamConfig c = Config(512);
    c.ransac_iters = 32;
    const auto base = AdalamFilterIndices(s.matches, s.kps_a, s.kps_b, c, trial);
    Scene shifted = s;
    for (Keypoint& kp : shifted.kps_a) {
      kp.x += 256;
      kp.y -= 128;
    }
    for (Keypoint& kp : shifted.kps_b) {
      kp.x -= 64;
      kp.y += 512;
    }
    EXPECT_EQ(AdalamFilterIndices(shifted.matches, shifted.kps_a,
                                  shifted.kps_b, c, trial),
              base);
  }
}

// With a huge tolerance every member is an inlier of any model; keeping
// radius_b far larger leaves p0 small enough for the test to pass.
TEST(AdalamFilter, PermissiveSettingsKeepEveryGroupedMatch) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Scene s = SimilarityScene(rng, 0, 60, 400, 0, 1, 0, 0);
    AdalamConfig c = Config(400);
    c.seed_radius = 30;
    c.neighborhood_radius_a = 80;
    c.neighborhood_radius_b = 1e7;
    c.inlier_tol = 1e5;
    c.alpha = 0.9;
    c.min_inliers = 2;
    c.min_det = 1e-12;
    c.max_det = 1e12;
    const auto seeds = SelectSeeds(s.matches, s.kps_a, c);
    const auto hoods = AssignNeighborhoods(seeds, s.matches, s.kps_a, s.kps_b, c);
    std::vector<size_t> expected;
    for (const auto& h : hoods) {
      if (h.members.size() >= 2) {
        expected.insert(expected.end(), h.members.begin(), h.members.end());
      }
    }
    std::sort(expected.begin(), expected.end());
    expected.erase(std::unique(expected.begin(), expected.end()), expected.end());
    EXPECT_EQ(AdalamFilterIndices(s.matches, s.kps_a, s.kps_b, c, trial),
              expected);
  }
}

TEST(AdalamFilter, RejectsOutOfRangeIndices) {
  MatchSet ms{"a", "b", {{0, 5, 0.f, 1.f}}};
  EXPECT_THROW(AdalamFilter(ms, std::vector<Keypoint>(1),
                            std::vector<Keypoint>(1), Config(100), 0),
               std::invalid_argument);
}

}  // namespace
}  // namespace matchforge
