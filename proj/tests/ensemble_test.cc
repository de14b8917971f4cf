#include "matchforge/ensemble.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "test_util.h"

namespace matchforge {
namespace {

Keypoint At(double x, double y) {
  Keypoint kp;
  kp.x = x;
  kp.y = y;
  return kp;
}

std::vector<Keypoint> RandomKeypoints(Rng& rng, size_t n, double size,
                                      bool quantize) {
  std::vector<Keypoint> out;
  for (size_t i = 0; i < n; ++i) {
    double x = rng.Uniform(0, size), y = rng.Uniform(0, size);
    if (quantize) {
      x = std::round(x * 2) / 2;
      y = std::round(y * 2) / 2;
    }
    out.push_back(At(x, y));
  }
  return out;
}

// Pairwise scan over every retained keypoint.
UnifiedKeypointTable DedupOracle(const std::vector<KeypointSource>& sources,
                                 double radius) {
  std::vector<size_t> order(sources.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](size_t l, size_t r) {
    return sources[l].tag.priority < sources[r].tag.priority;
  });
  UnifiedKeypointTable t;
  t.remap.resize(sources.size());
  for (size_t s : order) {
    for (size_t i = 0; i < sources[s].keypoints.size(); ++i) {
      const Keypoint& kp = sources[s].keypoints[i];
      int64_t best = -1;
      double best_d = INFINITY;
      if (radius > 0) {
        for (size_t k = 0; k < t.keypoints.size(); ++k) {
          const double d = std::hypot(kp.x - t.keypoints[k].x,
                                      kp.y - t.keypoints[k].y);
          if (d <= radius && d < best_d) {
            best_d = d;
            best = static_cast<int64_t>(k);
          }
        }
      }
      if (best >= 0) {
        t.remap[s].push_back(static_cast<uint32_t>(best));
      } else {
        t.remap[s].push_back(static_cast<uint32_t>(t.keypoints.size()));
        t.keypoints.push_back(kp);
        t.origin.push_back({s, i});
      }
    }
  }
  return t;
}

TEST(MergeKeypoints, SingleSourceIdentity) {
  Rng rng(1);
  const auto kps = RandomKeypoints(rng, 20, 100, false);
  const auto t = MergeKeypoints({{{"sp", 0}, kps}}, 0.0);
  ASSERT_EQ(t.keypoints.size(), 20u);
  for (uint32_t i = 0; i < 20; ++i) {
    EXPECT_EQ(t.remap[0][i], i);
    EXPECT_EQ(t.origin[i].index, i);
  }
}

TEST(MergeKeypoints, ExactDuplicateCollapses) {
  const std::vector<KeypointSource> sources = {
      {{"low", 1}, {At(5, 5), At(50, 50)}},
      {{"high", 0}, {At(10, 10), At(50, 50)}}};
  const auto t = MergeKeypoints(sources, 1.0);
  ASSERT_EQ(t.keypoints.size(), 3u);
  // "high" merges first.
  EXPECT_EQ(t.remap[1], (std::vector<uint32_t>{0, 1}));
  EXPECT_EQ(t.remap[0], (std::vector<uint32_t>{2, 1}));
  EXPECT_EQ(t.origin[1].source, 1u);
}

TEST(MergeKeypoints, ZeroRadiusConcatenates) {
  const std::vector<KeypointSource> sources = {
      {{"a", 0}, {At(1, 1), At(2, 2)}}, {{"b", 0}, {At(1, 1)}}};
  const auto t = MergeKeypoints(sources, 0.0);
  EXPECT_EQ(t.keypoints.size(), 3u);
  EXPECT_EQ(t.remap[1], (std::vector<uint32_t>{2}));
}

TEST(MergeKeypoints, MatchesPairwiseOracle) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<KeypointSource> sources;
    const size_t n = 1 + rng.UniformIndex(4);
    for (size_t s = 0; s < n; ++s) {
      sources.push_back({{"s" + std::to_string(s),
                          static_cast<int>(rng.UniformIndex(3))},
                         RandomKeypoints(rng, rng.UniformIndex(60), 60,
                                         trial % 2 == 0)});
    }
    const double radius = trial % 5 == 0 ? 0.0 : rng.Uniform(0.3, 4.0);
    const auto got = MergeKeypoints(sources, radius);
    const auto want = DedupOracle(sources, radius);
    ASSERT_EQ(got.keypoints.size(), want.keypoints.size());
    EXPECT_EQ(got.remap, want.remap);
    for (size_t k = 0; k < got.keypoints.size(); ++k) {
      EXPECT_EQ(got.origin[k].source, want.origin[k].source);
      EXPECT_EQ(got.origin[k].index, want.origin[k].index);
    }
    // Invariants: remap total and within radius; retained set spaced out.
    for (size_t s = 0; s < n; ++s) {
      ASSERT_EQ(got.remap[s].size(), sources[s].keypoints.size());
      for (size_t i = 0; i < got.remap[s].size(); ++i) {
        const Keypoint& kp = sources[s].keypoints[i];
        const Keypoint& r = got.keypoints.at(got.remap[s][i]);
        EXPECT_LE(std::hypot(kp.x - r.x, kp.y - r.y), radius + 1e-12);
      }
    }
    if (radius > 0) {
      for (size_t i = 0; i < got.keypoints.size(); ++i) {
        for (size_t j = i + 1; j < got.keypoints.size(); ++j) {
          EXPECT_GT(std::hypot(got.keypoints[i].x - got.keypoints[j].x,
                               got.keypoints[i].y - got.keypoints[j].y),
                    radius);
        }
      }
    } else {
      size_t total = 0;
      for (const auto& s : sources) total += s.keypoints.size();
      EXPECT_EQ(got.keypoints.size(), total);
    }
  }
}

TEST(MergeKeypoints, Errors) {
  EXPECT_THROW(MergeKeypoints({}, 1.0), std::invalid_argument);
  EXPECT_THROW(MergeKeypoints({{{"a", 0}, {}}, {{"a", 1}, {}}}, 1.0),
               std::invalid_argument);
  EXPECT_THROW(MergeKeypoints({{{"a", 0}, {}}}, -1.0), std::invalid_argument);
}

MatchSet Set(std::vector<Match> m) { return MatchSet{"x", "y", std::move(m)}; }

TEST(MergeMatches, SingleIdentitySourceUnchanged) {
  const MatchSet in = Set({{0, 4, 0.1f, 0.5f}, {2, 1, 0.2f, 0.25f}});
  const MatchSet out = MergeMatches({{in, nullptr, nullptr}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.matches[0].idx_b, 4u);
  EXPECT_EQ(out.matches[1].confidence, 0.25f);
  // Idempotent.
  const MatchSet again = MergeMatches({{out, nullptr, nullptr}});
  EXPECT_EQ(again.size(), out.size());
}

TEST(MergeMatches, KeepsHighestConfidenceDuplicate) {
  const std::vector<uint32_t> remap_a = {7}, remap_b = {3};
  const MatchSet s1 = Set({{7, 3, 0.5f, 0.4f}});
  const MatchSet s2 = Set({{0, 0, 0.6f, 0.9f}});
  const MatchSet out =
      MergeMatches({{s1, nullptr, nullptr}, {s2, &remap_a, &remap_b}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.matches[0].confidence, 0.9f);
  EXPECT_EQ(out.matches[0].idx_a, 7u);
}

TEST(MergeMatches, DisjointSourcesConcatenate) {
  const MatchSet s1 = Set({{0, 0, 0.f, 1.f}, {1, 1, 0.f, 1.f}});
  const MatchSet s2 = Set({{5, 5, 0.f, 1.f}});
  const MatchSet out =
      MergeMatches({{s1, nullptr, nullptr}, {s2, nullptr, nullptr}});
  EXPECT_EQ(out.size(), 3u);
}

TEST(MergeMatches, ManyToOneAllowedUnlessStrict) {
  const MatchSet s1 = Set({{0, 0, 0.f, 0.9f}, {1, 1, 0.f, 0.6f}});
  const MatchSet s2 = Set({{0, 1, 0.f, 0.7f}, {2, 0, 0.f, 0.3f}});
  const std::vector<MatchSource> sources = {{s1, nullptr, nullptr},
                                            {s2, nullptr, nullptr}};
  EXPECT_EQ(MergeMatches(sources).size(), 4u);
  MergeMatchesOptions strict;
  strict.strict_one_to_one = true;
  const MatchSet out = MergeMatches(sources, strict);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out.matches[0].idx_a, 0u);
  EXPECT_EQ(out.matches[0].idx_b, 0u);
  EXPECT_EQ(out.matches[1].idx_a, 1u);
  EXPECT_EQ(out.matches[1].idx_b, 1u);
}

TEST(MergeMatches, RandomizedInvariants) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<uint32_t>> remaps_a, remaps_b;
    std::vector<MatchSet> sets;
    const size_t n = 1 + rng.UniformIndex(3);
    for (size_t s = 0; s < n; ++s) {
      std::vector<uint32_t> ra(10), rb(10);
      for (auto& v : ra) v = static_cast<uint32_t>(rng.UniformIndex(8));
      for (auto& v : rb) v = static_cast<uint32_t>(rng.UniformIndex(8));
      remaps_a.push_back(ra);
      remaps_b.push_back(rb);
      std::vector<Match> m;
      for (size_t k = rng.UniformIndex(12); k > 0; --k) {
        m.push_back({static_cast<uint32_t>(rng.UniformIndex(10)),
                     static_cast<uint32_t>(rng.UniformIndex(10)),
                     static_cast<float>(rng.Uniform()),
                     static_cast<float>(rng.UniformIndex(4)) / 4.0f});
      }
      sets.push_back(Set(m));
    }
    std::vector<MatchSource> sources;
    std::map<std::pair<uint32_t, uint32_t>, float> best;
    size_t total = 0;
    for (size_t s = 0; s < n; ++s) {
      sources.push_back({sets[s], &remaps_a[s], &remaps_b[s]});
      for (const Match& m : sets[s].matches) {
        const auto key = std::make_pair(remaps_a[s][m.idx_a], remaps_b[s][m.idx_b]);
        best[key] = std::max(best.count(key) ? best[key] : -1.0f, m.confidence);
        ++total;
      }
    }
    const MatchSet out = MergeMatches(sources);
    EXPECT_LE(out.size(), total);
    ASSERT_EQ(out.size(), best.size());
    size_t k = 0;
    for (const auto& [key, conf] : best) {
      EXPECT_EQ(out.matches[k].idx_a, key.first);
      EXPECT_EQ(out.matches[k].idx_b, key.second);
      EXPECT_EQ(out.matches[k].confidence, conf);
      ++k;
    }
  }
}

TEST(MergeMatches, Errors) {
  MatchSet other{"x", "z", {}};
  EXPECT_THROW(MergeMatches({{Set({}), nullptr, nullptr}, {other, nullptr, nullptr}}),
               std::invalid_argument);
  const std::vector<uint32_t> short_remap = {0};
  EXPECT_THROW(MergeMatches({{Set({{3, 0, 0.f, 1.f}}), &short_remap, nullptr}}),
               std::invalid_argument);
}

}  // namespace
}  // namespace matchforge
