#pragma once

#include <vector>

#include "matchforge/tensor_io.h"
#include "matchforge/types.h"

namespace matchforge {

// Each detection cell covers an 8x8 pixel block.
inline constexpr int kCellSize = 8;
// 64 cell positions plus the "no interest point" dustbin.
inline constexpr int kDetectionChannels = kCellSize * kCellSize + 1;
inline constexpr int kDustbinChannel = kDetectionChannels - 1;

// Detector logits, [rows][cols][65] row-major.
struct DetectionTensor {
  int rows = 0;
  int cols = 0;
  std::vector<float> logits;

  const float* cell(int r, int c) const {
    return logits.data() + (static_cast<size_t>(r) * cols + c) *
                               kDetectionChannels;
  }
};

// Full-resolution keypoint probabilities. height = 8 * rows, width = 8 * cols.
// dustbin holds the dropped 65th probability of every cell.
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;
  std::vector<float> dustbin;

  float at(int y, int x) const {
    return values[static_cast<size_t>(y) * width + x];
  }
};

// Descriptor map on the cell grid, [rows][cols][dim] row-major.
struct DenseDescriptorTensor {
  int rows = 0;
  int cols = 0;
  int dim = 0;
  std::vector<float> values;

  const float* cell(int r, int c) const {
    return values.data() + (static_cast<size_t>(r) * cols + c) * dim;
  }
};

// Converts rank-3 tensors ([rows, cols, 65] and [rows, cols, dim]).
DetectionTensor DetectionTensorFromTensor(const Tensor& tensor);
DenseDescriptorTensor DenseDescriptorsFromTensor(const Tensor& tensor);

// Number of cells along an image side of `pixels`. Throws unless the side
// is a positive multiple of 8.
int CellsForPixels(int pixels);

// Per-cell softmax over the 65 logits. Channel k < 64 of cell (r, c) lands
// on pixel (8r + k / 8, 8c + k % 8); channel 64 is the dustbin and is kept
// only in Heatmap::dustbin. Throws DataError on non-finite logits.
Heatmap DecodeHeatmap(const DetectionTensor& tensor);

struct KeypointExtractionOptions {
  double threshold = 0.001023349;
  int max_keypoints = 8081;
  // Chebyshev radius of greedy non-maximum suppression; 0 disables it.
  int nms_radius = 4;
};

// Pixels scoring >= threshold, greedily suppressed in descending score order
// (ties by (y, x)), truncated to max_keypoints. Output keeps that order.
std::vector<Keypoint> ExtractKeypoints(const Heatmap& heatmap,
                                       const KeypointExtractionOptions& options);

// Bicubic (Catmull-Rom, clamped border) sampling of the descriptor grid at
// each keypoint, followed by L2 normalization. Pixel (x, y) samples grid
// coordinate ((x + 0.5) / 8 - 0.5, (y + 0.5) / 8 - 0.5). Throws
// std::invalid_argument for keypoints outside the 8*rows x 8*cols frame and
// DataError("degenerate descriptor") when a sample has zero norm.
LocalDescriptorSet SampleDescriptors(const DenseDescriptorTensor& descriptors,
                                     const std::vector<Keypoint>& keypoints);

// Catmull-Rom kernel weight for offset t.
double CatmullRomWeight(double t);

}  // namespace matchforge
