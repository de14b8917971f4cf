// matchforge command-line driver.

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "matchforge/config.h"
#include "matchforge/feature_head.h"
#include "matchforge/losses.h"
#include "matchforge/match_io.h"
#include "matchforge/pipeline.h"
#include "matchforge/retrieval.h"
#include "matchforge/synthetic.h"
#include "matchforge/tensor_io.h"

namespace {

using namespace matchforge;
using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInvariant = 3;

struct GlobalOptions {
  int threads = 1;
  uint64_t seed = 0;
  std::string config_path;
  std::vector<std::string> set;
  bool print_config = false;
};

// Defaults < --config file < --set < subcommand flags.
PipelineSettings BuildSettings(const GlobalOptions& global,
                               const KeyValues& overrides) {
  KeyValues values;
  if (!global.config_path.empty()) values = ReadKeyValueFile(global.config_path);
  for (const std::string& item : global.set) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("--set expects key=value, got '" + item + "'");
    }
    values[item.substr(0, eq)] = item.substr(eq + 1);
  }
  for (const auto& [key, value] : overrides) values[key] = value;
  return SettingsFromKeyValues(values);
}

std::string FormatFixed(const char* format, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), format, v);
  return buffer;
}

void WriteOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    WriteFileBytes(path, text);
  }
}

// Settings as JSON in FormatSettings order, with typed values.
Json SettingsJson(const PipelineSettings& settings) {
  Json out = Json::object();
  const std::string text = FormatSettings(settings);
  size_t pos = 0;
  while (pos < text.size()) {
    const size_t eol = text.find('\n', pos);
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const size_t sep = line.find(" = ");
    const std::string key = line.substr(0, sep);
    const std::string value = line.substr(sep + 3);
    const char* first = value.data();
    const char* last = value.data() + value.size();
    long long integer = 0;
    double number = 0.0;
    if (value == "none") {
      out[key] = nullptr;
    } else if (value == "true" || value == "false") {
      out[key] = value == "true";
    } else if (auto r = std::from_chars(first, last, integer);
               r.ec == std::errc() && r.ptr == last) {
      out[key] = integer;
    } else if (auto r = std::from_chars(first, last, number);
               r.ec == std::errc() && r.ptr == last) {
      out[key] = number;
    } else {
      out[key] = value;
    }
  }
  return out;
}

// retrieve ------------------------------------------------------------------

struct RetrieveOptions {
  std::string descriptors;
  std::string output;
  std::optional<int> num_neighbors;
  std::optional<std::string> metric;
  std::optional<double> max_distance;
  bool no_normalize = false;
};

int RunRetrieve(const GlobalOptions& global, const RetrieveOptions& opts) {
  KeyValues overrides;
  if (opts.num_neighbors) {
    overrides["num_neighbors"] = std::to_string(*opts.num_neighbors);
  }
  if (opts.metric) overrides["metric"] = *opts.metric;
  if (opts.max_distance) {
    overrides["max_pair_distance"] = FormatFixed("%.17g", *opts.max_distance);
  }
  if (opts.no_normalize) overrides["normalize_global"] = "false";
  const PipelineSettings settings = BuildSettings(global, overrides);

  std::vector<GlobalDescriptor> records = LoadGlobalDescriptors(opts.descriptors);
  if (settings.normalize_global) {
    records = NormalizeGlobalDescriptors(std::move(records));
  }
  const DistanceMatrix distances =
      PairwiseDistances(records, settings.metric, global.threads);
  std::vector<std::string> ids;
  for (const GlobalDescriptor& r : records) ids.push_back(r.image_id);
  const PairShortlist shortlist =
      ShortlistPairs(distances, ids, settings.shortlist);
  WriteOutput(opts.output, FormatShortlist(shortlist));
  return kExitOk;
}

// decode --------------------------------------------------------------------

struct DecodeOptions {
  std::string detection;
  std::string dense;
  std::string out_keypoints;
  std::string out_descriptors;
  std::optional<double> threshold;
  std::optional<int> max_keypoints;
  std::optional<int> nms_radius;
};

int RunDecode(const GlobalOptions& global, const DecodeOptions& opts) {
  KeyValues overrides;
  if (opts.threshold) {
    overrides["detection_threshold"] = FormatFixed("%.17g", *opts.threshold);
  }
  if (opts.max_keypoints) {
    overrides["max_keypoints"] = std::to_string(*opts.max_keypoints);
  }
  if (opts.nms_radius) overrides["nms_radius"] = std::to_string(*opts.nms_radius);
  const PipelineSettings settings = BuildSettings(global, overrides);

  const DetectionTensor detection =
      DetectionTensorFromTensor(ReadTensor(opts.detection));
  const Heatmap heatmap = DecodeHeatmap(detection);
  const std::vector<Keypoint> keypoints =
      ExtractKeypoints(heatmap, settings.extraction);
  WriteTensor(opts.out_keypoints, KeypointsToTensor(keypoints));
  if (!opts.dense.empty()) {
    if (opts.out_descriptors.empty()) {
      throw std::invalid_argument("--dense requires --out-descriptors");
    }
    const DenseDescriptorTensor dense =
        DenseDescriptorsFromTensor(ReadTensor(opts.dense));
    if (dense.rows != detection.rows || dense.cols != detection.cols) {
      throw DataError("descriptor grid does not match the detection grid");
    }
    WriteTensor(opts.out_descriptors,
                DescriptorsToTensor(SampleDescriptors(dense, keypoints)));
  }
  std::cout << "keypoints " << keypoints.size() << "\n";
  return kExitOk;
}

// match ---------------------------------------------------------------------

struct MatchOptions {
  std::string features;
  std::string pairs;
  std::string output;
  std::vector<std::string> sources;
};

int RunMatch(const GlobalOptions& global, const MatchOptions& opts) {
  const PipelineSettings settings = BuildSettings(global, {});
  const FeatureStore store = FeatureStore::Open(opts.features, opts.sources);
  const auto pairs = ReadShortlistFile(opts.pairs);
  const MatchRunResult result =
      RunMatchPipeline(store, pairs, settings, global.seed, global.threads);

  for (const std::string& warning : result.warnings) {
    std::cerr << "warning: " << warning << "\n";
  }
  fs::create_directories(fs::path(opts.output) / "keypoints");
  WriteMatchArchive((fs::path(opts.output) / "matches.mfa").string(),
                    result.archive);
  WriteFileBytes((fs::path(opts.output) / "matches.txt").string(),
                 FormatPairMatchesText(result.archive));
  for (const auto& [id, keypoints] : result.unified_keypoints) {
    WriteTensor((fs::path(opts.output) / "keypoints" / (id + ".kpts")).string(),
                KeypointsToTensor(keypoints));
  }
  for (const PairSummary& s : result.summaries) {
    std::cout << s.id_a << " " << s.id_b << " " << s.raw << " " << s.filtered
              << " " << s.merged << "\n";
  }
  if (!pairs.empty() && result.skipped_pairs == pairs.size()) {
    std::cerr << "error: every pair was skipped\n";
    return kExitData;
  }
  return kExitOk;
}

// synth-eval ----------------------------------------------------------------

struct SynthOptions {
  int inliers = 100;
  double outlier_fraction = 0.5;
  double noise = 0.5;
  std::optional<int> image_size;
  int descriptor_dim = 32;
  bool no_timing = false;
  std::string output;
};

int RunSynthEval(const GlobalOptions& global, const SynthOptions& opts) {
  KeyValues overrides;
  if (opts.image_size) {
    overrides["image_width"] = std::to_string(*opts.image_size);
    overrides["image_height"] = std::to_string(*opts.image_size);
  }
  const PipelineSettings settings = BuildSettings(global, overrides);
  if (settings.image_width != settings.image_height) {
    throw std::invalid_argument("synthetic scenes are square; image_width and "
                                "image_height must agree");
  }

  SynthSceneParams params;
  params.num_inliers = opts.inliers;
  params.outlier_fraction = opts.outlier_fraction;
  params.noise_sigma = opts.noise;
  params.image_size = settings.image_width;
  params.descriptor_dim = opts.descriptor_dim;
  params.seed = global.seed;

  const auto start = std::chrono::steady_clock::now();
  const SynthScene scene = GenerateSynthScene(params);
  const SynthMetrics metrics = EvaluateSynthScene(
      scene, settings.adalam, settings.nn, global.seed, global.threads);
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();

  Json report;
  report["scene"] = {
      {"num_inliers", params.num_inliers},
      {"num_outliers", scene.NumOutliers()},
      {"outlier_fraction", params.outlier_fraction},
      {"noise_sigma", params.noise_sigma},
      {"image_size", params.image_size},
      {"descriptor_dim", params.descriptor_dim},
      {"seed", params.seed},
      {"transform",
       {{"A", scene.transform.A}, {"t", scene.transform.t}}},
  };
  report["settings"] = SettingsJson(settings);
  report["metrics"] = {
      {"raw_matches", metrics.raw_matches},
      {"kept", metrics.kept},
      {"kept_inliers", metrics.kept_inliers},
      {"gt_inliers", metrics.gt_inliers},
      {"precision", metrics.precision},
      {"recall", metrics.recall},
  };
  if (!opts.no_timing) report["runtime_seconds"] = seconds;
  WriteOutput(opts.output, report.dump(2) + "\n");
  return kExitOk;
}

// loss-check ----------------------------------------------------------------

struct LossOptions {
  std::string batch;
  std::string pairs;
  double step = 1e-5;
};

// Largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-4) over all
// coordinates, using central differences.
double MaxGradientDeviation(const DescriptorBatch& batch, double step) {
  const BatchGradient grad = ComputeHardNetLossGradient(batch);
  auto loss = [](const DescriptorBatch& b) {
    return ComputeHardNetLoss(ComputeBatchDistanceMatrix(b)).loss;
  };
  double worst = 0.0;
  DescriptorBatch probe = batch;
  for (int side = 0; side < 2; ++side) {
    std::vector<double>& values = side == 0 ? probe.anchors : probe.positives;
    const std::vector<double>& analytic =
        side == 0 ? grad.anchors : grad.positives;
    for (size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      const double plus = loss(probe);
      values[k] = saved - step;
      const double minus = loss(probe);
      values[k] = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double scale =
          std::max({std::abs(analytic[k]), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic[k] - numeric) / scale);
    }
  }
  return worst;
}

int RunLossCheck(const GlobalOptions&, const LossOptions& opts) {
  const Tensor tensor = ReadTensor(opts.batch);
  if (tensor.dims.size() != 3 || tensor.dims[0] != 2) {
    throw DataError("batch tensor must have shape [2, n, D]");
  }
  DescriptorBatch batch;
  batch.n = static_cast<int>(tensor.dims[1]);
  batch.dim = static_cast<int>(tensor.dims[2]);
  const size_t half = tensor.values.size() / 2;
  batch.anchors.assign(tensor.values.begin(), tensor.values.begin() + half);
  batch.positives.assign(tensor.values.begin() + half, tensor.values.end());
  if (batch.n < 2) throw DataError("loss-check needs n >= 2 samples");

  Json report;
  report["n"] = batch.n;
  report["dim"] = batch.dim;
  report["hardnet_loss"] =
      ComputeHardNetLoss(ComputeBatchDistanceMatrix(batch)).loss;
  if (!opts.pairs.empty()) {
    const Tensor pairs = ReadTensor(opts.pairs);
    if (pairs.dims.size() != 2 || pairs.dims[0] != 2) {
      throw DataError("pair distance tensor must have shape [2, n]");
    }
    HardNegPairs p;
    p.d_pos.assign(pairs.values.begin(), pairs.values.begin() + pairs.dims[1]);
    p.d_neg.assign(pairs.values.begin() + pairs.dims[1], pairs.values.end());
    report["hardneg_loss"] = ComputeHardNegConstantLoss(p);
  }
  report["fd_step"] = opts.step;
  try {
    report["max_grad_deviation"] = MaxGradientDeviation(batch, opts.step);
  } catch (const std::domain_error& e) {
    report["max_grad_deviation"] = nullptr;
    report["gradient_note"] = e.what();
  }
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

// export --------------------------------------------------------------------

struct ExportOptions {
  std::string archive;
  std::string output;
};

int RunExport(const GlobalOptions&, const ExportOptions& opts) {
  WriteOutput(opts.output, FormatPairMatchesText(ReadMatchArchive(opts.archive)));
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matchforge: image-pair shortlisting, matching and filtering"};
  app.fallthrough();
  app.require_subcommand(0, 1);

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", global.seed, "Random seed");
  app.add_option("--config", global.config_path, "key = value settings file");
  app.add_option("--set", global.set, "Override one setting (key=value)");
  app.add_flag("--print-config", global.print_config,
               "Print the effective settings and exit");

  RetrieveOptions retrieve;
  CLI::App* retrieve_cmd =
      app.add_subcommand("retrieve", "Shortlist image pairs");
  retrieve_cmd->add_option("descriptors", retrieve.descriptors,
                           "Global descriptor tensor [M, D]")
      ->required();
  retrieve_cmd->add_option("-n,--num-neighbors", retrieve.num_neighbors);
  retrieve_cmd->add_option("--metric", retrieve.metric)
      ->check(CLI::IsMember({"euclidean", "cosine"}));
  retrieve_cmd->add_option("--max-distance", retrieve.max_distance);
  retrieve_cmd->add_flag("--no-normalize", retrieve.no_normalize);
  retrieve_cmd->add_option("-o,--output", retrieve.output);

  DecodeOptions decode;
  CLI::App* decode_cmd =
      app.add_subcommand("decode", "Decode detector output to keypoints");
  decode_cmd->add_option("detection", decode.detection,
                         "Detection logits [Hc, Wc, 65]")
      ->required();
  decode_cmd->add_option("--dense", decode.dense,
                         "Dense descriptors [Hc, Wc, D]");
  decode_cmd->add_option("--out-keypoints", decode.out_keypoints)->required();
  decode_cmd->add_option("--out-descriptors", decode.out_descriptors);
  decode_cmd->add_option("--threshold", decode.threshold);
  decode_cmd->add_option("--max-keypoints", decode.max_keypoints);
  decode_cmd->add_option("--nms-radius", decode.nms_radius);

  MatchOptions match;
  CLI::App* match_cmd =
      app.add_subcommand("match", "Match and filter shortlisted pairs");
  match_cmd->add_option("--features", match.features,
                        "Directory of <source>/<image>.kpts|.desc")
      ->required();
  match_cmd->add_option("--pairs", match.pairs, "Shortlist file")->required();
  match_cmd->add_option("-o,--output", match.output, "Output directory")
      ->required();
  match_cmd->add_option("--sources", match.sources,
                        "Feature sources in merge order")
      ->delimiter(',');

  SynthOptions synth;
  CLI::App* synth_cmd =
      app.add_subcommand("synth-eval", "Score the filter on a synthetic scene");
  synth_cmd->add_option("--inliers", synth.inliers);
  synth_cmd->add_option("--outlier-fraction", synth.outlier_fraction);
  synth_cmd->add_option("--noise", synth.noise);
  synth_cmd->add_option("--image-size", synth.image_size);
  synth_cmd->add_option("--descriptor-dim", synth.descriptor_dim);
  synth_cmd->add_flag("--no-timing", synth.no_timing,
                      "Omit the wall time so reports are reproducible");
  synth_cmd->add_option("-o,--output", synth.output);

  LossOptions loss;
  CLI::App* loss_cmd =
      app.add_subcommand("loss-check", "Evaluate and gradient-check the losses");
  loss_cmd->add_option("batch", loss.batch, "Batch tensor [2, n, D]")
      ->required();
  loss_cmd->add_option("--pairs", loss.pairs,
                       "Positive / negative distances [2, n]");
  loss_cmd->add_option("--step", loss.step, "Finite-difference step")
      ->check(CLI::PositiveNumber);

  ExportOptions export_opts;
  CLI::App* export_cmd =
      app.add_subcommand("export", "Write an archive as pairwise match text");
  export_cmd->add_option("archive", export_opts.archive)->required();
  export_cmd->add_option("-o,--output", export_opts.output);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (global.print_config) {
      std::cout << FormatSettings(BuildSettings(global, {}));
      return kExitOk;
    }
    if (*retrieve_cmd) return RunRetrieve(global, retrieve);
    if (*decode_cmd) return RunDecode(global, decode);
    if (*match_cmd) return RunMatch(global, match);
    if (*synth_cmd) return RunSynthEval(global, synth);
    if (*loss_cmd) return RunLossCheck(global, loss);
    if (*export_cmd) return RunExport(global, export_opts);
    std::cerr << app.help();
    return kExitUsage;
  } catch (const InvariantError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::logic_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
