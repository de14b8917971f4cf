#pragma once

#include <string>
#include <vector>

#include "matchforge/types.h"

namespace matchforge {

// Identifies one extractor or matcher contributing to a merge. Lower
// priority values are merged first and win deduplication.
struct SourceTag {
  std::string name;
  int priority = 0;
};

struct KeypointSource {
  SourceTag tag;
  std::vector<Keypoint> keypoints;
};

struct UnifiedKeypointTable {
  struct Origin {
    size_t source = 0;  // index into the merge's source list
    size_t index = 0;   // index within that source
  };

  std::vector<Keypoint> keypoints;
  std::vector<Origin> origin;              // parallel to keypoints
  std::vector<std::vector<uint32_t>> remap;  // [source][old index] -> new
};

// Concatenates sources ordered by (priority, input position). With
// dedup_radius > 0, a keypoint within dedup_radius (Euclidean, inclusive)
// of an already retained keypoint is dropped and remapped onto the nearest
// such keypoint (ties to the lower unified index). Throws
// std::invalid_argument for no sources, duplicate names or a negative
// radius.
UnifiedKeypointTable MergeKeypoints(const std::vector<KeypointSource>& sources,
                                    double dedup_radius);

struct MatchSource {
  MatchSet matches;
  const std::vector<uint32_t>* remap_a = nullptr;  // null = identity
  const std::vector<uint32_t>* remap_b = nullptr;
};

struct MergeMatchesOptions {
  // Resolve conflicting correspondences greedily by confidence so every
  // unified index is used at most once.
  bool strict_one_to_one = false;
};

// Remaps every source's matches into unified indices and keeps one match per
// (idx_a, idx_b), the one with the highest confidence (ties: the smaller
// distance, then the earlier source). Output is sorted by (idx_a, idx_b).
// Without strict_one_to_one a unified index may appear in several matches.
// Throws std::invalid_argument when the sources disagree on the image pair
// or a remap does not cover an index.
MatchSet MergeMatches(const std::vector<MatchSource>& sources,
                      const MergeMatchesOptions& options = {});

}  // namespace matchforge
