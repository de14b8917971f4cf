#include "matchforge/retrieval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <tuple>

#include "matchforge/parallel.h"
#include "matchforge/tensor_io.h"

namespace matchforge {
namespace {

constexpr double kUnitNormTolerance = 1e-5;

double Norm(const std::vector<float>& v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

}  // namespace

DistanceMetric ParseDistanceMetric(const std::string& name) {
  if (name == "euclidean") return DistanceMetric::kEuclidean;
  if (name == "cosine") return DistanceMetric::kCosine;
  throw std::invalid_argument("unknown metric '" + name +
                              "' (expected euclidean or cosine)");
}

const char* DistanceMetricName(DistanceMetric metric) {
  return metric == DistanceMetric::kEuclidean ? "euclidean" : "cosine";
}

void ValidateGlobalDescriptors(const std::vector<GlobalDescriptor>& records) {
  if (records.empty()) throw DataError("empty collection");
  const size_t dim = records.front().vector.size();
  if (dim == 0) throw DataError("descriptor dimension must be positive");
  std::set<std::string_view> ids;
  for (const GlobalDescriptor& d : records) {
    if (d.vector.size() != dim) {
      throw DataError("inconsistent dimension: " + d.image_id + " has " +
                      std::to_string(d.vector.size()) + ", expected " +
                      std::to_string(dim));
    }
    if (!ids.insert(d.image_id).second) {
      throw DataError("duplicate image id " + d.image_id);
    }
    if (d.normalized &&
        std::abs(Norm(d.vector) - 1.0) > kUnitNormTolerance) {
      throw DataError("descriptor " + d.image_id +
                      " is flagged normalized but is not unit norm");
    }
  }
}

std::vector<GlobalDescriptor> LoadGlobalDescriptors(const std::string& path) {
  const std::string bytes = ReadFileBytes(path);
  if (bytes.empty()) throw DataError(path + ": empty collection");
  Tensor t;
  try {
    t = ParseTensor(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  if (t.dims.size() != 2) {
    throw DataError(path + ": global descriptors must be a rank-2 tensor");
  }
  std::vector<GlobalDescriptor> out(t.dims[0]);
  const size_t dim = t.dims[1];
  for (size_t i = 0; i < out.size(); ++i) {
    out[i].image_id = t.names.empty() ? std::to_string(i) : t.names[i];
    out[i].vector.assign(t.values.begin() + i * dim,
                         t.values.begin() + (i + 1) * dim);
  }
  try {
    ValidateGlobalDescriptors(out);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
  return out;
}

std::vector<GlobalDescriptor> NormalizeGlobalDescriptors(
    std::vector<GlobalDescriptor> descriptors) {
  for (GlobalDescriptor& d : descriptors) {
    const double norm = Norm(d.vector);
    if (norm == 0.0) {
      throw DataError("cannot normalize zero-norm descriptor " + d.image_id);
    }
    for (float& x : d.vector) x = static_cast<float>(x / norm);
    d.normalized = true;
  }
  return descriptors;
}

DistanceMatrix PairwiseDistances(
    const std::vector<GlobalDescriptor>& descriptors, DistanceMetric metric,
    int num_threads) {
  ValidateGlobalDescriptors(descriptors);
  const size_t m = descriptors.size();
  const size_t dim = descriptors.front().vector.size();

  std::vector<double> norms(m);
  for (size_t i = 0; i < m; ++i) {
    norms[i] = Norm(descriptors[i].vector);
    if (metric == DistanceMetric::kCosine && norms[i] == 0.0) {
      throw DataError("zero-norm vector " + descriptors[i].image_id +
                      " under cosine metric");
    }
  }

  DistanceMatrix out{m, std::vector<double>(m * m, 0.0)};
  // Full rows rather than the upper triangle: every term below is symmetric
  // in (i, j) bit for bit, so out(i, j) == out(j, i) exactly.
  ParallelFor(m, num_threads, [&](size_t i) {
    const std::vector<float>& a = descriptors[i].vector;
    for (size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const std::vector<float>& b = descriptors[j].vector;
      double value = 0.0;
      if (metric == DistanceMetric::kEuclidean) {
        for (size_t k = 0; k < dim; ++k) {
          const double diff = static_cast<double>(a[k]) - b[k];
          value += diff * diff;
        }
        value = std::sqrt(value);
      } else {
        for (size_t k = 0; k < dim; ++k) {
          value += static_cast<double>(a[k]) * b[k];
        }
        value = std::max(0.0, 1.0 - value / (norms[i] * norms[j]));
      }
      out.values[i * m + j] = value;
    }
  });
  return out;
}

PairShortlist ShortlistPairs(const DistanceMatrix& matrix,
                             const std::vector<std::string>& image_ids,
                             const ShortlistOptions& options) {
  const size_t m = matrix.size;
  if (options.num_neighbors < 1) {
    throw std::invalid_argument("number of neighbours must be >= 1");
  }
  if (image_ids.size() != m || matrix.values.size() != m * m) {
    throw std::invalid_argument("distance matrix and id list sizes differ");
  }
  if (m < 2) throw std::invalid_argument("need at least two images");
  if (std::set<std::string>(image_ids.begin(), image_ids.end()).size() != m) {
    throw std::invalid_argument("image ids must be unique");
  }

  PairShortlist shortlist;
  shortlist.exhaustive = m <= static_cast<size_t>(options.num_neighbors);

  auto add = [&](size_t i, size_t j) {
    if (image_ids[j] < image_ids[i]) std::swap(i, j);
    shortlist.pairs.push_back({image_ids[i], image_ids[j], matrix(i, j)});
  };

  if (shortlist.exhaustive) {
    for (size_t i = 0; i < m; ++i) {
      for (size_t j = i + 1; j < m; ++j) add(i, j);
    }
  } else {
    std::set<std::pair<size_t, size_t>> seen;
    std::vector<size_t> order;
    const size_t k = static_cast<size_t>(options.num_neighbors);
    for (size_t i = 0; i < m; ++i) {
      order.clear();
      for (size_t j = 0; j < m; ++j) {
        if (j != i) order.push_back(j);
      }
      std::partial_sort(order.begin(), order.begin() + k, order.end(),
                        [&](size_t l, size_t r) {
                          return std::tie(matrix.values[i * m + l],
                                          image_ids[l]) <
                                 std::tie(matrix.values[i * m + r],
                                          image_ids[r]);
                        });
      for (size_t n = 0; n < k; ++n) {
        const size_t j = order[n];
        if (options.max_distance && matrix(i, j) > *options.max_distance) {
          continue;
        }
        if (seen.insert(std::minmax(i, j)).second) add(i, j);
      }
    }
  }

  std::sort(shortlist.pairs.begin(), shortlist.pairs.end(),
            [](const PairShortlist::Pair& l, const PairShortlist::Pair& r) {
              return std::tie(l.distance, l.id_a, l.id_b) <
                     std::tie(r.distance, r.id_a, r.id_b);
            });
  return shortlist;
}

std::string FormatShortlist(const PairShortlist& shortlist) {
  std::string out;
  char buffer[64];
  for (const auto& p : shortlist.pairs) {
    std::snprintf(buffer, sizeof(buffer), "%.6f", p.distance);
    out += p.id_a;
    out += ' ';
    out += p.id_b;
    out += ' ';
    out += buffer;
    out += '\n';
  }
  return out;
}

}  // namespace matchforge
