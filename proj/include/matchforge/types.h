#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace matchforge {

// Input data violates a format or content contract (bad file, shape mismatch).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant did not hold. Indicates a bug, not bad input.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// A detected or imported interest point. Optional local-frame fields keep
// their defaults when the producing detector does not estimate them.
struct Keypoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;
  // Pixels. 1 means "no scale estimate".
  double scale = 1.0;
  // Radians in [-pi, pi). 0 means "no orientation estimate".
  double orientation = 0.0;
  // Row-major 2x2 local affine shape.
  std::array<double, 4> affine = {1.0, 0.0, 0.0, 1.0};

  bool HasScale() const { return scale != 1.0; }
  bool HasOrientation() const { return orientation != 0.0; }
};

// Row-aligned local descriptors: row i belongs to keypoint i.
struct LocalDescriptorSet {
  int dim = 0;
  std::vector<float> values;  // size() * dim, row-major

  size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  bool empty() const { return size() == 0; }
  const float* row(size_t i) const { return values.data() + i * dim; }
};

struct Match {
  uint32_t idx_a = 0;
  uint32_t idx_b = 0;
  float distance = 0.0f;
  float confidence = 0.0f;
};

// Correspondences of one image pair, sorted by idx_a.
struct MatchSet {
  std::string id_a;
  std::string id_b;
  std::vector<Match> matches;

  size_t size() const { return matches.size(); }
  bool empty() const { return matches.empty(); }
};

}  // namespace matchforge
