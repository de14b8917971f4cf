#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "matchforge/adalam.h"
#include "matchforge/ensemble.h"
#include "matchforge/feature_head.h"
#include "matchforge/matching.h"
#include "matchforge/retrieval.h"

namespace matchforge {

// Flat `key = value` settings. Blank lines and lines starting with '#' are
// ignored; later keys override earlier ones.
using KeyValues = std::map<std::string, std::string>;

// Throws std::invalid_argument naming the offending line.
KeyValues ParseKeyValueText(std::string_view text);
KeyValues ReadKeyValueFile(const std::string& path);

// Every tunable of the command-line pipeline in one place.
struct PipelineSettings {
  // Image size assumed for scale-dependent defaults.
  int image_width = 1024;
  int image_height = 1024;

  ShortlistOptions shortlist;
  DistanceMetric metric = DistanceMetric::kEuclidean;
  bool normalize_global = true;

  KeypointExtractionOptions extraction;
  MutualNNOptions nn;
  AdalamConfig adalam = AdalamConfig::ForImageSize(1024, 1024);
  double dedup_radius = 1.0;
  MergeMatchesOptions merge;
};

// Builds settings from key-values. Image size keys are applied first so the
// size-dependent adalam defaults are derived before explicit overrides.
// Unknown keys and unparsable values throw std::invalid_argument.
PipelineSettings SettingsFromKeyValues(const KeyValues& values);

// All keys with their current values, in a stable order, as parseable
// `key = value` text.
std::string FormatSettings(const PipelineSettings& settings);

}  // namespace matchforge
