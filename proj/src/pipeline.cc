#include "matchforge/pipeline.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "matchforge/adalam.h"
#include "matchforge/matching.h"
#include "matchforge/parallel.h"
#include "matchforge/random.h"
#include "matchforge/tensor_io.h"

namespace matchforge {
namespace {

namespace fs = std::filesystem;

// FNV-1a; stable across platforms, unlike std::hash.
uint64_t HashKey(const std::vector<std::string>& parts) {
  uint64_t h = 0xCBF29CE484222325ull;
  for (const std::string& part : parts) {
    for (unsigned char c : part) {
      h ^= c;
      h *= 0x100000001B3ull;
    }
    h ^= 0xFF;
    h *= 0x100000001B3ull;
  }
  return h;
}

}  // namespace

FeatureStore FeatureStore::Open(const std::string& root,
                                std::vector<std::string> sources) {
  if (!fs::is_directory(root)) {
    throw DataError("features directory not found: " + root);
  }
  if (sources.empty()) {
    for (const auto& entry : fs::directory_iterator(root)) {
      if (entry.is_directory()) {
        sources.push_back(entry.path().filename().string());
      }
    }
    std::sort(sources.begin(), sources.end());
  }
  if (sources.empty()) {
    throw DataError("no feature sources under " + root);
  }
  return FeatureStore{root, std::move(sources)};
}

std::string FeatureStore::KeypointPath(const std::string& source,
                                       const std::string& image_id) const {
  return (fs::path(root) / source / (image_id + ".kpts")).string();
}

std::string FeatureStore::DescriptorPath(const std::string& source,
                                         const std::string& image_id) const {
  return (fs::path(root) / source / (image_id + ".desc")).string();
}

ImageEntry LoadImageEntry(const FeatureStore& store,
                          const std::string& image_id, double dedup_radius) {
  ImageEntry entry;
  std::vector<KeypointSource> sources;
  for (size_t s = 0; s < store.sources.size(); ++s) {
    const std::string& name = store.sources[s];
    ImageFeatures features;
    features.keypoints =
        KeypointsFromTensor(ReadTensor(store.KeypointPath(name, image_id)));
    features.descriptors =
        DescriptorsFromTensor(ReadTensor(store.DescriptorPath(name, image_id)));
    if (features.descriptors.size() != features.keypoints.size()) {
      throw DataError("source " + name + ", image " + image_id + ": " +
                      std::to_string(features.keypoints.size()) +
                      " keypoints but " +
                      std::to_string(features.descriptors.size()) +
                      " descriptors");
    }
    sources.push_back({SourceTag{name, static_cast<int>(s)},
                       features.keypoints});
    entry.per_source.push_back(std::move(features));
  }
  entry.unified = MergeKeypoints(sources, dedup_radius);
  return entry;
}

PairOutcome MatchImagePair(const std::string& id_a, const ImageEntry& a,
                           const std::string& id_b, const ImageEntry& b,
                           const PipelineSettings& settings, uint64_t seed) {
  if (a.per_source.size() != b.per_source.size()) {
    throw std::invalid_argument("images have different source counts");
  }
  PairOutcome outcome;
  outcome.summary.id_a = id_a;
  outcome.summary.id_b = id_b;
  std::vector<MatchSource> sources;
  for (size_t s = 0; s < a.per_source.size(); ++s) {
    const ImageFeatures& fa = a.per_source[s];
    const ImageFeatures& fb = b.per_source[s];
    MatchSet filtered{id_a, id_b, {}};
    if (!fa.keypoints.empty() && !fb.keypoints.empty()) {
      MatchSet raw = MutualNNMatch(fa.descriptors, fb.descriptors,
                                   settings.nn);
      raw.id_a = id_a;
      raw.id_b = id_b;
      outcome.summary.raw += raw.size();
      const uint64_t pair_seed =
          Rng::Mix(seed) ^ HashKey({id_a, id_b, std::to_string(s)});
      filtered = AdalamFilter(raw, fa.keypoints, fb.keypoints, settings.adalam,
                              pair_seed);
      outcome.summary.filtered += filtered.size();
    }
    sources.push_back(
        {std::move(filtered), &a.unified.remap[s], &b.unified.remap[s]});
  }
  outcome.matches = MergeMatches(sources, settings.merge);
  outcome.matches.id_a = id_a;
  outcome.matches.id_b = id_b;
  outcome.summary.merged = outcome.matches.size();
  return outcome;
}

std::vector<std::pair<std::string, std::string>> ReadShortlistFile(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open shortlist " + path);
  std::set<std::pair<std::string, std::string>> pairs;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string a, b;
    if (!(fields >> a >> b)) {
      throw DataError(path + ":" + std::to_string(line_number) +
                      ": expected '<id_a> <id_b> [distance]'");
    }
    if (a == b) {
      throw DataError(path + ":" + std::to_string(line_number) +
                      ": pair of an image with itself");
    }
    if (b < a) std::swap(a, b);
    pairs.emplace(std::move(a), std::move(b));
  }
  return {pairs.begin(), pairs.end()};
}

MatchRunResult RunMatchPipeline(
    const FeatureStore& store,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const PipelineSettings& settings, uint64_t seed, int num_threads) {
  std::set<std::pair<std::string, std::string>> canonical;
  for (auto [a, b] : pairs) {
    if (b < a) std::swap(a, b);
    canonical.emplace(std::move(a), std::move(b));
  }
  std::set<std::string> image_set;
  for (const auto& [a, b] : canonical) {
    image_set.insert(a);
    image_set.insert(b);
  }
  const std::vector<std::string> image_ids(image_set.begin(), image_set.end());
  const std::vector<std::pair<std::string, std::string>> ordered(
      canonical.begin(), canonical.end());

  std::vector<std::optional<ImageEntry>> entries(image_ids.size());
  std::vector<std::string> load_errors(image_ids.size());
  ParallelFor(image_ids.size(), num_threads, [&](size_t i) {
    try {
      entries[i] = LoadImageEntry(store, image_ids[i], settings.dedup_radius);
    } catch (const std::exception& e) {
      load_errors[i] = e.what();
    }
  });
  auto entry_index = [&](const std::string& id) {
    return static_cast<size_t>(
        std::lower_bound(image_ids.begin(), image_ids.end(), id) -
        image_ids.begin());
  };

  std::vector<std::optional<PairOutcome>> outcomes(ordered.size());
  std::vector<std::string> pair_errors(ordered.size());
  ParallelFor(ordered.size(), num_threads, [&](size_t p) {
    const auto& [id_a, id_b] = ordered[p];
    const size_t ia = entry_index(id_a);
    const size_t ib = entry_index(id_b);
    if (!entries[ia] || !entries[ib]) {
      pair_errors[p] = !entries[ia] ? load_errors[ia] : load_errors[ib];
      return;
    }
    try {
      outcomes[p] = MatchImagePair(id_a, *entries[ia], id_b, *entries[ib],
                                   settings, seed);
    } catch (const std::exception& e) {
      pair_errors[p] = e.what();
    }
  });

  MatchRunResult result;
  std::set<size_t> used_images;
  for (size_t p = 0; p < ordered.size(); ++p) {
    if (!outcomes[p]) {
      ++result.skipped_pairs;
      result.warnings.push_back("skipping pair " + ordered[p].first + " " +
                                ordered[p].second + ": " + pair_errors[p]);
      continue;
    }
    used_images.insert(entry_index(ordered[p].first));
    used_images.insert(entry_index(ordered[p].second));
    result.summaries.push_back(outcomes[p]->summary);
    result.archive.pairs.push_back(ToArchivePair(outcomes[p]->matches));
  }
  for (size_t i : used_images) {
    const UnifiedKeypointTable& table = entries[i]->unified;
    result.archive.images.push_back(
        {image_ids[i], static_cast<uint32_t>(table.keypoints.size())});
    result.unified_keypoints[image_ids[i]] = table.keypoints;
  }
  ValidateMatchArchive(result.archive);
  return result;
}

}  // namespace matchforge
