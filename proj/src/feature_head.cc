#include "matchforge/feature_head.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <tuple>

namespace matchforge {

DetectionTensor DetectionTensorFromTensor(const Tensor& tensor) {
  if (tensor.dims.size() != 3 || tensor.dims[2] != kDetectionChannels) {
    throw DataError("detection tensor must have shape [rows, cols, 65]");
  }
  return DetectionTensor{static_cast<int>(tensor.dims[0]),
                         static_cast<int>(tensor.dims[1]), tensor.values};
}

DenseDescriptorTensor DenseDescriptorsFromTensor(const Tensor& tensor) {
  if (tensor.dims.size() != 3 || tensor.dims[2] == 0) {
    throw DataError("descriptor tensor must have shape [rows, cols, dim>0]");
  }
  return DenseDescriptorTensor{static_cast<int>(tensor.dims[0]),
                               static_cast<int>(tensor.dims[1]),
                               static_cast<int>(tensor.dims[2]),
                               tensor.values};
}

int CellsForPixels(int pixels) {
  if (pixels <= 0 || pixels % kCellSize != 0) {
    throw std::invalid_argument("image side " + std::to_string(pixels) +
                                " is not a positive multiple of 8");
  }
  return pixels / kCellSize;
}

Heatmap DecodeHeatmap(const DetectionTensor& tensor) {
  if (tensor.rows <= 0 || tensor.cols <= 0 ||
      tensor.logits.size() != static_cast<size_t>(tensor.rows) * tensor.cols *
                                  kDetectionChannels) {
    throw std::invalid_argument("malformed detection tensor");
  }
  Heatmap heatmap;
  heatmap.height = tensor.rows * kCellSize;
  heatmap.width = tensor.cols * kCellSize;
  heatmap.values.resize(static_cast<size_t>(heatmap.height) * heatmap.width);
  heatmap.dustbin.resize(static_cast<size_t>(tensor.rows) * tensor.cols);

  double probs[kDetectionChannels];
  for (int r = 0; r < tensor.rows; ++r) {
    for (int c = 0; c < tensor.cols; ++c) {
      const float* logits = tensor.cell(r, c);
      double max_logit = -INFINITY;
      for (int k = 0; k < kDetectionChannels; ++k) {
        if (!std::isfinite(logits[k])) {
          throw DataError("non-finite logit at cell (" + std::to_string(r) +
                          ", " + std::to_string(c) + ")");
        }
        max_logit = std::max(max_logit, static_cast<double>(logits[k]));
      }
      double sum = 0.0;
      for (int k = 0; k < kDetectionChannels; ++k) {
        probs[k] = std::exp(logits[k] - max_logit);
        sum += probs[k];
      }
      for (int k = 0; k < kDustbinChannel; ++k) {
        const int y = r * kCellSize + k / kCellSize;
        const int x = c * kCellSize + k % kCellSize;
        heatmap.values[static_cast<size_t>(y) * heatmap.width + x] =
            static_cast<float>(probs[k] / sum);
      }
      heatmap.dustbin[static_cast<size_t>(r) * tensor.cols + c] =
          static_cast<float>(probs[kDustbinChannel] / sum);
    }
  }
  return heatmap;
}

std::vector<Keypoint> ExtractKeypoints(
    const Heatmap& heatmap, const KeypointExtractionOptions& options) {
  if (!(options.threshold >= 0.0)) {
    throw std::invalid_argument("detection threshold must be >= 0");
  }
  if (options.max_keypoints < 1 || options.nms_radius < 0) {
    throw std::invalid_argument("invalid keypoint extraction options");
  }

  struct Candidate {
    float score;
    int y;
    int x;
  };
  std::vector<Candidate> candidates;
  for (int y = 0; y < heatmap.height; ++y) {
    for (int x = 0; x < heatmap.width; ++x) {
      const float s = heatmap.at(y, x);
      if (s >= options.threshold) candidates.push_back({s, y, x});
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& l, const Candidate& r) {
              if (l.score != r.score) return l.score > r.score;
              return std::tie(l.y, l.x) < std::tie(r.y, r.x);
            });

  std::vector<Keypoint> keypoints;
  std::vector<bool> suppressed(
      static_cast<size_t>(heatmap.height) * heatmap.width, false);
  const int radius = options.nms_radius;
  for (const Candidate& cand : candidates) {
    if (static_cast<int>(keypoints.size()) == options.max_keypoints) break;
    if (suppressed[static_cast<size_t>(cand.y) * heatmap.width + cand.x]) {
      continue;
    }
    Keypoint kp;
    kp.x = cand.x;
    kp.y = cand.y;
    kp.score = cand.score;
    keypoints.push_back(kp);
    if (radius == 0) continue;
    const int y0 = std::max(0, cand.y - radius);
    const int y1 = std::min(heatmap.height - 1, cand.y + radius);
    const int x0 = std::max(0, cand.x - radius);
    const int x1 = std::min(heatmap.width - 1, cand.x + radius);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        suppressed[static_cast<size_t>(y) * heatmap.width + x] = true;
      }
    }
  }
  return keypoints;
}

double CatmullRomWeight(double t) {
  t = std::abs(t);
  if (t <= 1.0) return (1.5 * t - 2.5) * t * t + 1.0;
  if (t < 2.0) return ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0;
  return 0.0;
}

LocalDescriptorSet SampleDescriptors(const DenseDescriptorTensor& descriptors,
                                     const std::vector<Keypoint>& keypoints) {
  if (descriptors.rows <= 0 || descriptors.cols <= 0 || descriptors.dim <= 0 ||
      descriptors.values.size() != static_cast<size_t>(descriptors.rows) *
                                       descriptors.cols * descriptors.dim) {
    throw std::invalid_argument("malformed dense descriptor tensor");
  }
  const int dim = descriptors.dim;
  const double width = static_cast<double>(descriptors.cols) * kCellSize;
  const double height = static_cast<double>(descriptors.rows) * kCellSize;

  LocalDescriptorSet out;
  out.dim = dim;
  out.values.resize(keypoints.size() * dim);
  std::vector<double> acc(dim);
  for (size_t i = 0; i < keypoints.size(); ++i) {
    const Keypoint& kp = keypoints[i];
    if (!(kp.x >= 0.0 && kp.x < width && kp.y >= 0.0 && kp.y < height)) {
      throw std::invalid_argument("keypoint " + std::to_string(i) +
                                  " lies outside the descriptor frame");
    }
    const double gx = (kp.x + 0.5) / kCellSize - 0.5;
    const double gy = (kp.y + 0.5) / kCellSize - 0.5;
    const int ix = static_cast<int>(std::floor(gx));
    const int iy = static_cast<int>(std::floor(gy));
    const double tx = gx - ix;
    const double ty = gy - iy;
    double wx[4], wy[4];
    for (int k = 0; k < 4; ++k) {
      wx[k] = CatmullRomWeight(tx - (k - 1));
      wy[k] = CatmullRomWeight(ty - (k - 1));
    }

    std::fill(acc.begin(), acc.end(), 0.0);
    for (int ky = 0; ky < 4; ++ky) {
      const int r = std::clamp(iy - 1 + ky, 0, descriptors.rows - 1);
      for (int kx = 0; kx < 4; ++kx) {
        const int c = std::clamp(ix - 1 + kx, 0, descriptors.cols - 1);
        const double w = wy[ky] * wx[kx];
        if (w == 0.0) continue;
        const float* v = descriptors.cell(r, c);
        for (int d = 0; d < dim; ++d) acc[d] += w * v[d];
      }
    }
    double norm = 0.0;
    for (double v : acc) norm += v * v;
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) {
      throw DataError("degenerate descriptor at keypoint " +
                      std::to_string(i));
    }
    float* row = out.values.data() + i * dim;
    for (int d = 0; d < dim; ++d) row[d] = static_cast<float>(acc[d] / norm);
  }
  return out;
}

}  // namespace matchforge
