#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "matchforge/types.h"

namespace matchforge {

// Binary archive of verified matches for a set of image pairs.
//
// Layout (all integers little-endian, strings are u32 length + UTF-8 bytes):
//   magic        4 bytes "MFMA"
//   version      u32 (1)
//   image_count  u32
//   images       image_count x { string id, u32 num_keypoints }
//   pair_count   u32
//   pairs        pair_count x { string id_a, string id_b, u32 match_count,
//                               match_count x { u32 idx_a, u32 idx_b,
//                                               f32 confidence } }
//
// Images are sorted by id; pairs are canonical (id_a < id_b), sorted and
// unique; every index is below the declared keypoint count of its image.
struct MatchArchive {
  struct Image {
    std::string id;
    uint32_t num_keypoints = 0;
  };
  struct Entry {
    uint32_t idx_a = 0;
    uint32_t idx_b = 0;
    float confidence = 0.0f;
  };
  struct Pair {
    std::string id_a;
    std::string id_b;
    std::vector<Entry> matches;
  };

  std::vector<Image> images;
  std::vector<Pair> pairs;
};

// Builds an archive pair from a MatchSet, swapping orientation if needed so
// that id_a < id_b.
MatchArchive::Pair ToArchivePair(const MatchSet& matches);

// Throws DataError if the archive violates the ordering or bounds invariants.
void ValidateMatchArchive(const MatchArchive& archive);

std::string SerializeMatchArchive(const MatchArchive& archive);
MatchArchive ParseMatchArchive(std::string_view bytes);

void WriteMatchArchive(const std::string& path, const MatchArchive& archive);
MatchArchive ReadMatchArchive(const std::string& path);

// Text export in the raw pairwise format accepted by COLMAP's match importer:
//
//   <name_a> <name_b>
//   <idx_a> <idx_b>
//   ...
//   <blank line>
//
// Pairs are emitted in canonical order (name_a < name_b, then sorted), with
// matches sorted by (idx_a, idx_b). Throws std::invalid_argument for names
// that are empty or contain whitespace, and for duplicate pairs.
std::string FormatPairMatchesText(const std::vector<MatchSet>& pairs);
std::string FormatPairMatchesText(const MatchArchive& archive);
void ExportPairMatchesText(const std::vector<MatchSet>& pairs,
                           const std::string& path);

}  // namespace matchforge
