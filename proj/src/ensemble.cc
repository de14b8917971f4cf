#include "matchforge/ensemble.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace matchforge {
namespace {

// Uniform grid over retained keypoints with cell side equal to the radius,
// so every candidate within the radius lives in the 3x3 block around a
// query point.
class RadiusGrid {
 public:
  explicit RadiusGrid(double radius) : radius_(radius) {}

  void Insert(double x, double y, uint32_t id) {
    cells_[Key(Cell(x), Cell(y))].push_back({x, y, id});
  }

  // Nearest inserted point within the radius (ties to the lower id), or -1.
  int64_t Nearest(double x, double y) const {
    const int64_t cx = Cell(x);
    const int64_t cy = Cell(y);
    const double r2 = radius_ * radius_;
    double best_d2 = INFINITY;
    int64_t best = -1;
    for (int64_t dy = -1; dy <= 1; ++dy) {
      for (int64_t dx = -1; dx <= 1; ++dx) {
        const auto it = cells_.find(Key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (const Entry& e : it->second) {
          const double d2 = (e.x - x) * (e.x - x) + (e.y - y) * (e.y - y);
          if (d2 > r2) continue;
          if (d2 < best_d2 || (d2 == best_d2 && e.id < best)) {
            best_d2 = d2;
            best = e.id;
          }
        }
      }
    }
    return best;
  }

 private:
  struct Entry {
    double x;
    double y;
    uint32_t id;
  };

  int64_t Cell(double v) const {
    return static_cast<int64_t>(std::floor(v / radius_));
  }
  static uint64_t Key(int64_t cx, int64_t cy) {
    return (static_cast<uint64_t>(cx) << 32) ^
           (static_cast<uint64_t>(cy) & 0xFFFFFFFFull);
  }

  double radius_;
  std::unordered_map<uint64_t, std::vector<Entry>> cells_;
};

}  // namespace

UnifiedKeypointTable MergeKeypoints(const std::vector<KeypointSource>& sources,
                                    double dedup_radius) {
  if (sources.empty()) {
    throw std::invalid_argument("merge needs at least one keypoint source");
  }
  if (!(dedup_radius >= 0.0)) {
    throw std::invalid_argument("dedup radius must be >= 0");
  }
  std::set<std::string> names;
  for (const KeypointSource& s : sources) {
    if (!names.insert(s.tag.name).second) {
      throw std::invalid_argument("duplicate source name " + s.tag.name);
    }
  }

  std::vector<size_t> order(sources.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](size_t l, size_t r) {
    return sources[l].tag.priority < sources[r].tag.priority;
  });

  UnifiedKeypointTable table;
  table.remap.resize(sources.size());
  const bool dedup = dedup_radius > 0.0;
  RadiusGrid grid(dedup ? dedup_radius : 1.0);
  for (size_t s : order) {
    const std::vector<Keypoint>& kps = sources[s].keypoints;
    std::vector<uint32_t>& remap = table.remap[s];
    remap.resize(kps.size());
    for (size_t i = 0; i < kps.size(); ++i) {
      if (dedup) {
        const int64_t hit = grid.Nearest(kps[i].x, kps[i].y);
        if (hit >= 0) {
          remap[i] = static_cast<uint32_t>(hit);
          continue;
        }
      }
      const auto id = static_cast<uint32_t>(table.keypoints.size());
      remap[i] = id;
      table.keypoints.push_back(kps[i]);
      table.origin.push_back({s, i});
      if (dedup) grid.Insert(kps[i].x, kps[i].y, id);
    }
  }
  return table;
}

MatchSet MergeMatches(const std::vector<MatchSource>& sources,
                      const MergeMatchesOptions& options) {
  MatchSet out;
  if (sources.empty()) return out;
  out.id_a = sources.front().matches.id_a;
  out.id_b = sources.front().matches.id_b;

  std::map<std::pair<uint32_t, uint32_t>, Match> merged;
  for (const MatchSource& source : sources) {
    if (source.matches.id_a != out.id_a || source.matches.id_b != out.id_b) {
      throw std::invalid_argument("mismatched pair ids: " +
                                  source.matches.id_a + " " +
                                  source.matches.id_b + " vs " + out.id_a +
                                  " " + out.id_b);
    }
    auto apply = [](const std::vector<uint32_t>* remap, uint32_t idx) {
      if (remap == nullptr) return idx;
      if (idx >= remap->size()) {
        throw std::invalid_argument("remap does not cover index " +
                                    std::to_string(idx));
      }
      return (*remap)[idx];
    };
    for (Match m : source.matches.matches) {
      m.idx_a = apply(source.remap_a, m.idx_a);
      m.idx_b = apply(source.remap_b, m.idx_b);
      auto [it, inserted] = merged.try_emplace({m.idx_a, m.idx_b}, m);
      if (inserted) continue;
      const Match& kept = it->second;
      if (m.confidence > kept.confidence ||
          (m.confidence == kept.confidence && m.distance < kept.distance)) {
        it->second = m;
      }
    }
  }

  out.matches.reserve(merged.size());
  for (const auto& [key, m] : merged) out.matches.push_back(m);
  if (!options.strict_one_to_one) return out;

  std::vector<Match> by_confidence = out.matches;
  std::stable_sort(by_confidence.begin(), by_confidence.end(),
                   [](const Match& l, const Match& r) {
                     return l.confidence > r.confidence;
                   });
  std::set<uint32_t> used_a, used_b;
  std::vector<Match> strict;
  for (const Match& m : by_confidence) {
    if (used_a.count(m.idx_a) || used_b.count(m.idx_b)) continue;
    used_a.insert(m.idx_a);
    used_b.insert(m.idx_b);
    strict.push_back(m);
  }
  std::sort(strict.begin(), strict.end(), [](const Match& l, const Match& r) {
    return std::tie(l.idx_a, l.idx_b) < std::tie(r.idx_a, r.idx_b);
  });
  out.matches = std::move(strict);
  return out;
}

}  // namespace matchforge
