#pragma once

#include <optional>
#include <string>
#include <vector>

namespace matchforge {

// Per-image global feature used to shortlist image pairs.
struct GlobalDescriptor {
  std::string image_id;
  std::vector<float> vector;
  bool normalized = false;
};

enum class DistanceMetric { kEuclidean, kCosine };

DistanceMetric ParseDistanceMetric(const std::string& name);
const char* DistanceMetricName(DistanceMetric metric);

// Dense symmetric M x M matrix, row-major.
struct DistanceMatrix {
  size_t size = 0;
  std::vector<double> values;

  double operator()(size_t i, size_t j) const { return values[i * size + j]; }
};

struct PairShortlist {
  struct Pair {
    std::string id_a;
    std::string id_b;
    double distance = 0.0;
  };
  std::vector<Pair> pairs;
  bool exhaustive = false;
};

// Checks that the records form a valid collection (non-empty, one shared
// dimension > 0, unit norm when flagged, unique ids). Throws DataError.
void ValidateGlobalDescriptors(const std::vector<GlobalDescriptor>& records);

// Reads a rank-2 [M, Dg] tensor file. Image ids come from the tensor's name
// block; without one, records are named by their decimal row index.
std::vector<GlobalDescriptor> LoadGlobalDescriptors(const std::string& path);

// Returns copies scaled to unit L2 norm. Throws DataError on a zero vector.
std::vector<GlobalDescriptor> NormalizeGlobalDescriptors(
    std::vector<GlobalDescriptor> descriptors);

// Euclidean distance or cosine distance (1 - cosine similarity). The
// diagonal is exactly zero and the result is exactly symmetric. Rows are
// computed independently, so num_threads never changes the output.
DistanceMatrix PairwiseDistances(
    const std::vector<GlobalDescriptor>& descriptors, DistanceMetric metric,
    int num_threads = 1);

struct ShortlistOptions {
  // Nearest neighbours kept per image. Scenes with at most this many images
  // are matched exhaustively.
  int num_neighbors = 45;
  // Optional maximum pair distance, applied to ranked shortlists only.
  std::optional<double> max_distance;
};

// Image ids define the identity of each row: pairs are oriented so that
// id_a < id_b (byte-wise string order), neighbour ties are broken by the
// smaller id, and the output is sorted by (distance, id_a, id_b). The result
// does not depend on the order of the rows.
PairShortlist ShortlistPairs(const DistanceMatrix& matrix,
                             const std::vector<std::string>& image_ids,
                             const ShortlistOptions& options);

// One line per pair: "<id_a> <id_b> <distance with 6 decimals>\n".
std::string FormatShortlist(const PairShortlist& shortlist);

}  // namespace matchforge
