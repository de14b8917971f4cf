#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchforge/config.h"
#include "matchforge/ensemble.h"
#include "matchforge/match_io.h"
#include "matchforge/types.h"

namespace matchforge {

// On-disk layout of extracted features:
//   <root>/<source>/<image_id>.kpts   keypoint tensor [K, 9]
//   <root>/<source>/<image_id>.desc   descriptor tensor [K, D]
// One subdirectory per extractor; sources are merged in the given order.
struct FeatureStore {
  std::string root;
  std::vector<std::string> sources;

  // Sources default to the sorted subdirectory names of root.
  static FeatureStore Open(const std::string& root,
                           std::vector<std::string> sources = {});

  std::string KeypointPath(const std::string& source,
                           const std::string& image_id) const;
  std::string DescriptorPath(const std::string& source,
                             const std::string& image_id) const;
};

struct ImageFeatures {
  std::vector<Keypoint> keypoints;
  LocalDescriptorSet descriptors;
};

// Features of one image from every source plus their unified table.
struct ImageEntry {
  std::vector<ImageFeatures> per_source;
  UnifiedKeypointTable unified;
};

// Throws DataError if any source lacks the image or the files disagree.
ImageEntry LoadImageEntry(const FeatureStore& store,
                          const std::string& image_id, double dedup_radius);

struct PairSummary {
  std::string id_a;
  std::string id_b;
  size_t raw = 0;       // mutual-NN matches summed over sources
  size_t filtered = 0;  // after local-affine filtering, summed over sources
  size_t merged = 0;    // after ensemble merge
};

struct PairOutcome {
  PairSummary summary;
  MatchSet matches;  // unified indices
};

// Per source: mutual-NN match, local-affine filter; then merge the sources
// into unified keypoint indices.
PairOutcome MatchImagePair(const std::string& id_a, const ImageEntry& a,
                           const std::string& id_b, const ImageEntry& b,
                           const PipelineSettings& settings, uint64_t seed);

// Reads a shortlist file ("<id_a> <id_b> [distance]" per line, '#'
// comments allowed). Pairs are returned canonical and de-duplicated.
std::vector<std::pair<std::string, std::string>> ReadShortlistFile(
    const std::string& path);

struct MatchRunResult {
  MatchArchive archive;
  std::vector<PairSummary> summaries;  // canonical pair order
  std::vector<std::string> warnings;
  // Unified keypoints of every image that made it into the archive.
  std::map<std::string, std::vector<Keypoint>> unified_keypoints;
  size_t skipped_pairs = 0;
};

// Runs the whole matching stage over the shortlisted pairs. Pairs whose
// features cannot be loaded are skipped with a warning. Output is identical
// for any num_threads.
MatchRunResult RunMatchPipeline(
    const FeatureStore& store,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const PipelineSettings& settings, uint64_t seed, int num_threads);

}  // namespace matchforge
