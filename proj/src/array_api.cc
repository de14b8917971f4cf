#include "matchforge/array_api.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "matchforge/ensemble.h"
#include "matchforge/losses.h"
#include "matchforge/matching.h"

namespace matchforge {
namespace {

template <typename T>
void CheckShape(const ArrayView<T>& view, size_t rank, const char* name) {
  if (view.shape.size() != rank) {
    throw std::invalid_argument(std::string(name) + ": expected rank " +
                                std::to_string(rank) + ", got " +
                                std::to_string(view.shape.size()));
  }
  if (view.size() > 0 && view.data == nullptr) {
    throw std::invalid_argument(std::string(name) + ": null data");
  }
}

template <typename T>
void CheckColumns(const ArrayView<T>& view, size_t cols, const char* name) {
  CheckShape(view, 2, name);
  if (view.shape[1] != cols) {
    throw std::invalid_argument(std::string(name) + ": expected " +
                                std::to_string(cols) + " columns, got " +
                                std::to_string(view.shape[1]));
  }
}

std::vector<Keypoint> ToKeypoints(const ArrayView<float>& kpts) {
  std::vector<Keypoint> out(kpts.shape[0]);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].x = kpts.data[2 * i];
    out[i].y = kpts.data[2 * i + 1];
  }
  return out;
}

LocalDescriptorSet ToDescriptors(const ArrayView<float>& desc,
                                 const char* name) {
  CheckShape(desc, 2, name);
  LocalDescriptorSet out;
  out.dim = static_cast<int>(desc.shape[1]);
  out.values.assign(desc.data, desc.data + desc.size());
  return out;
}

DescriptorBatch ToBatch(const ArrayView<float>& anchors,
                        const ArrayView<float>& positives) {
  CheckShape(anchors, 2, "anchors");
  CheckShape(positives, 2, "positives");
  if (anchors.shape != positives.shape) {
    throw std::invalid_argument("anchors and positives differ in shape");
  }
  DescriptorBatch batch;
  batch.n = static_cast<int>(anchors.shape[0]);
  batch.dim = static_cast<int>(anchors.shape[1]);
  batch.anchors.assign(anchors.data, anchors.data + anchors.size());
  batch.positives.assign(positives.data, positives.data + positives.size());
  return batch;
}

uint32_t ToIndex(int64_t v, size_t bound, const char* name) {
  if (v < 0 || static_cast<uint64_t>(v) >= bound) {
    throw std::invalid_argument(std::string(name) + ": index " +
                                std::to_string(v) + " out of range");
  }
  return static_cast<uint32_t>(v);
}

}  // namespace

AdalamConfig AdalamConfigFromMapping(
    const std::map<std::string, double>& mapping, const AdalamConfig& base) {
  using Setter = std::function<void(AdalamConfig&, double)>;
  auto as_int = [](const std::string& key, double v) {
    if (v != std::floor(v)) {
      throw std::invalid_argument(key + " must be an integer");
    }
    return static_cast<int>(v);
  };
  const std::map<std::string, Setter> setters = {
      {"seed_radius", [](AdalamConfig& c, double v) { c.seed_radius = v; }},
      {"neighborhood_radius_a",
       [](AdalamConfig& c, double v) { c.neighborhood_radius_a = v; }},
      {"neighborhood_radius_b",
       [](AdalamConfig& c, double v) { c.neighborhood_radius_b = v; }},
      {"ransac_iters",
       [&](AdalamConfig& c, double v) {
         c.ransac_iters = as_int("ransac_iters", v);
       }},
      {"inlier_tol", [](AdalamConfig& c, double v) { c.inlier_tol = v; }},
      {"alpha", [](AdalamConfig& c, double v) { c.alpha = v; }},
      {"min_inliers",
       [&](AdalamConfig& c, double v) {
         c.min_inliers = as_int("min_inliers", v);
       }},
      {"refine_affine",
       [](AdalamConfig& c, double v) { c.refine_affine = v != 0.0; }},
      {"orientation_tol_deg",
       [](AdalamConfig& c, double v) { c.orientation_tol_deg = v; }},
      {"min_scale_ratio",
       [](AdalamConfig& c, double v) { c.min_scale_ratio = v; }},
      {"max_scale_ratio",
       [](AdalamConfig& c, double v) { c.max_scale_ratio = v; }},
      {"min_det", [](AdalamConfig& c, double v) { c.min_det = v; }},
      {"max_det", [](AdalamConfig& c, double v) { c.max_det = v; }},
  };
  AdalamConfig config = base;
  for (const auto& [key, value] : mapping) {
    const auto it = setters.find(key);
    if (it == setters.end()) {
      throw std::invalid_argument("unknown adalam setting '" + key + "'");
    }
    it->second(config, value);
  }
  config.Validate();
  return config;
}

std::vector<size_t> ArrayAdalamFilter(const ArrayView<float>& kpts_a,
                                      const ArrayView<float>& kpts_b,
                                      const ArrayView<int64_t>& matches,
                                      const ArrayView<float>* confidence,
                                      const AdalamConfig& config,
                                      uint64_t seed) {
  CheckColumns(kpts_a, 2, "kpts_a");
  CheckColumns(kpts_b, 2, "kpts_b");
  CheckColumns(matches, 2, "matches");
  const size_t m = matches.shape[0];
  if (confidence != nullptr) {
    CheckShape(*confidence, 1, "confidence");
    if (confidence->shape[0] != m) {
      throw std::invalid_argument("confidence: expected " + std::to_string(m) +
                                  " entries");
    }
  }
  MatchSet set;
  set.matches.resize(m);
  for (size_t i = 0; i < m; ++i) {
    set.matches[i].idx_a = ToIndex(matches.data[2 * i], kpts_a.shape[0],
                                   "matches");
    set.matches[i].idx_b = ToIndex(matches.data[2 * i + 1], kpts_b.shape[0],
                                   "matches");
    set.matches[i].confidence =
        confidence != nullptr ? confidence->data[i] : 1.0f;
  }
  return AdalamFilterIndices(set, ToKeypoints(kpts_a), ToKeypoints(kpts_b),
                             config, seed);
}

ArrayMatches ArrayMutualNN(const ArrayView<float>& desc_a,
                           const ArrayView<float>& desc_b) {
  const MatchSet set = MutualNNMatch(ToDescriptors(desc_a, "desc_a"),
                                     ToDescriptors(desc_b, "desc_b"));
  ArrayMatches out;
  for (const Match& m : set.matches) {
    out.indices.push_back(m.idx_a);
    out.indices.push_back(m.idx_b);
    out.confidence.push_back(m.confidence);
  }
  return out;
}

double ArrayHardNetLoss(const ArrayView<float>& anchors,
                        const ArrayView<float>& positives) {
  return ComputeHardNetLoss(
             ComputeBatchDistanceMatrix(ToBatch(anchors, positives)))
      .loss;
}

double ArrayHardNegConstantLoss(const ArrayView<float>& d_pos,
                                const ArrayView<float>& d_neg) {
  CheckShape(d_pos, 1, "d_pos");
  CheckShape(d_neg, 1, "d_neg");
  HardNegPairs pairs;
  pairs.d_pos.assign(d_pos.data, d_pos.data + d_pos.size());
  pairs.d_neg.assign(d_neg.data, d_neg.data + d_neg.size());
  return ComputeHardNegConstantLoss(pairs);
}

ArrayMatches ArrayMergeMatches(
    const std::vector<ArrayView<int64_t>>& matches,
    const std::vector<ArrayView<float>>& confidence) {
  if (matches.size() != confidence.size()) {
    throw std::invalid_argument("one confidence array per match array");
  }
  std::vector<MatchSource> sources(matches.size());
  for (size_t s = 0; s < matches.size(); ++s) {
    CheckColumns(matches[s], 2, "matches");
    CheckShape(confidence[s], 1, "confidence");
    const size_t m = matches[s].shape[0];
    if (confidence[s].shape[0] != m) {
      throw std::invalid_argument("confidence: expected " + std::to_string(m) +
                                  " entries");
    }
    sources[s].matches.id_a = "a";
    sources[s].matches.id_b = "b";
    for (size_t i = 0; i < m; ++i) {
      Match match;
      match.idx_a = ToIndex(matches[s].data[2 * i], UINT32_MAX, "matches");
      match.idx_b = ToIndex(matches[s].data[2 * i + 1], UINT32_MAX, "matches");
      match.confidence = confidence[s].data[i];
      sources[s].matches.matches.push_back(match);
    }
  }
  ArrayMatches out;
  if (sources.empty()) return out;
  for (const Match& m : MergeMatches(sources).matches) {
    out.indices.push_back(m.idx_a);
    out.indices.push_back(m.idx_b);
    out.confidence.push_back(m.confidence);
  }
  return out;
}

}  // namespace matchforge
