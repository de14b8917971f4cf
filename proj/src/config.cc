#include "matchforge/config.h"

#include <charconv>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <vector>

#include "matchforge/tensor_io.h"

namespace matchforge {
namespace {

std::string_view Trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double ParseDouble(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("setting " + key + ": '" + value +
                                "' is not a number");
  }
  return out;
}

int ParseInt(const std::string& key, const std::string& value) {
  int out = 0;
  const auto [ptr, ec] =
      std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw std::invalid_argument("setting " + key + ": '" + value +
                                "' is not an integer");
  }
  return out;
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("setting " + key + ": '" + value +
                              "' is not a boolean");
}

std::optional<double> ParseOptionalDouble(const std::string& key,
                                          const std::string& value) {
  if (value == "none") return std::nullopt;
  return ParseDouble(key, value);
}

std::string FormatDouble(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

std::string FormatOptional(const std::optional<double>& v) {
  return v ? FormatDouble(*v) : "none";
}

struct Field {
  const char* key;
  std::function<void(PipelineSettings&, const std::string&)> set;
  std::function<std::string(const PipelineSettings&)> get;
};

#define MF_DOUBLE(KEY, MEMBER)                                               \
  Field {                                                                    \
    KEY,                                                                     \
        [](PipelineSettings& s, const std::string& v) {                      \
          s.MEMBER = ParseDouble(KEY, v);                                    \
        },                                                                   \
        [](const PipelineSettings& s) { return FormatDouble(s.MEMBER); }     \
  }
#define MF_INT(KEY, MEMBER)                                                  \
  Field {                                                                    \
    KEY,                                                                     \
        [](PipelineSettings& s, const std::string& v) {                      \
          s.MEMBER = ParseInt(KEY, v);                                       \
        },                                                                   \
        [](const PipelineSettings& s) { return std::to_string(s.MEMBER); }   \
  }
#define MF_BOOL(KEY, MEMBER)                                                 \
  Field {                                                                    \
    KEY,                                                                     \
        [](PipelineSettings& s, const std::string& v) {                      \
          s.MEMBER = ParseBool(KEY, v);                                      \
        },                                                                   \
        [](const PipelineSettings& s) {                                      \
          return std::string(s.MEMBER ? "true" : "false");                   \
        }                                                                    \
  }
#define MF_OPTIONAL(KEY, MEMBER)                                             \
  Field {                                                                    \
    KEY,                                                                     \
        [](PipelineSettings& s, const std::string& v) {                      \
          s.MEMBER = ParseOptionalDouble(KEY, v);                            \
        },                                                                   \
        [](const PipelineSettings& s) { return FormatOptional(s.MEMBER); }   \
  }

// Size keys come first: applying them resets the adalam radii.
const std::vector<Field>& Fields() {
  static const std::vector<Field> fields = {
      MF_INT("image_width", image_width),
      MF_INT("image_height", image_height),
      MF_INT("num_neighbors", shortlist.num_neighbors),
      MF_OPTIONAL("max_pair_distance", shortlist.max_distance),
      Field{"metric",
            [](PipelineSettings& s, const std::string& v) {
              s.metric = ParseDistanceMetric(v);
            },
            [](const PipelineSettings& s) {
              return std::string(DistanceMetricName(s.metric));
            }},
      MF_BOOL("normalize_global", normalize_global),
      MF_DOUBLE("detection_threshold", extraction.threshold),
      MF_INT("max_keypoints", extraction.max_keypoints),
      MF_INT("nms_radius", extraction.nms_radius),
      MF_OPTIONAL("ratio_max", nn.ratio_max),
      MF_OPTIONAL("dist_max", nn.dist_max),
      MF_DOUBLE("seed_radius", adalam.seed_radius),
      MF_DOUBLE("neighborhood_radius_a", adalam.neighborhood_radius_a),
      MF_DOUBLE("neighborhood_radius_b", adalam.neighborhood_radius_b),
      MF_INT("ransac_iters", adalam.ransac_iters),
      MF_DOUBLE("inlier_tol", adalam.inlier_tol),
      MF_DOUBLE("alpha", adalam.alpha),
      MF_INT("min_inliers", adalam.min_inliers),
      MF_BOOL("refine_affine", adalam.refine_affine),
      MF_DOUBLE("orientation_tol_deg", adalam.orientation_tol_deg),
      MF_DOUBLE("min_scale_ratio", adalam.min_scale_ratio),
      MF_DOUBLE("max_scale_ratio", adalam.max_scale_ratio),
      MF_DOUBLE("min_det", adalam.min_det),
      MF_DOUBLE("max_det", adalam.max_det),
      MF_DOUBLE("dedup_radius", dedup_radius),
      MF_BOOL("strict_one_to_one", merge.strict_one_to_one),
  };
  return fields;
}

#undef MF_DOUBLE
#undef MF_INT
#undef MF_BOOL
#undef MF_OPTIONAL

}  // namespace

KeyValues ParseKeyValueText(std::string_view text) {
  KeyValues out;
  int line_number = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{}
                                         : text.substr(eol + 1);
    ++line_number;
    line = Trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("config line " +
                                  std::to_string(line_number) +
                                  ": expected 'key = value'");
    }
    const std::string_view key = Trim(line.substr(0, eq));
    const std::string_view value = Trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw std::invalid_argument("config line " +
                                  std::to_string(line_number) +
                                  ": empty key or value");
    }
    out[std::string(key)] = std::string(value);
  }
  return out;
}

KeyValues ReadKeyValueFile(const std::string& path) {
  return ParseKeyValueText(ReadFileBytes(path));
}

PipelineSettings SettingsFromKeyValues(const KeyValues& values) {
  for (const auto& [key, value] : values) {
    bool known = false;
    for (const Field& f : Fields()) known = known || key == f.key;
    if (!known) throw std::invalid_argument("unknown setting '" + key + "'");
  }
  PipelineSettings settings;
  for (const Field& f : Fields()) {
    const auto it = values.find(f.key);
    if (it != values.end()) f.set(settings, it->second);
    if (std::string_view(f.key) == "image_height") {
      settings.adalam =
          AdalamConfig::ForImageSize(settings.image_width,
                                     settings.image_height);
    }
  }
  settings.adalam.Validate();
  return settings;
}

std::string FormatSettings(const PipelineSettings& settings) {
  std::string out;
  for (const Field& f : Fields()) {
    out += f.key;
    out += " = ";
    out += f.get(settings);
    out += '\n';
  }
  return out;
}

}  // namespace matchforge
