#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "matchforge/types.h"

namespace matchforge {

// Dense f32 tensor as stored in a "MFT1" file.
//
// Layout (all integers little-endian):
//   magic    4 bytes "MFT1"
//   dtype    u8, 0 = f32 little-endian (only value supported)
//   rank     u8 in [1, 4]
//   dims     u32[rank]
//   payload  product(dims) f32 values, row-major
//   names    optional trailing block naming the records along dims[0]:
//              u32 count (== dims[0])
//              u32 offsets[count + 1], offsets[0] == 0, non-decreasing
//              offsets[count] bytes of concatenated UTF-8
struct Tensor {
  std::vector<uint32_t> dims;
  std::vector<float> values;
  std::vector<std::string> names;

  size_t NumElements() const;
  // Product of all dims after the first: the length of one record.
  size_t RecordSize() const;
};

Tensor MakeTensor(std::vector<uint32_t> dims, std::vector<float> values,
                  std::vector<std::string> names = {});

std::string SerializeTensor(const Tensor& tensor);
// Throws DataError with "bad magic", "unsupported dtype", "malformed header"
// or "truncated" in the message.
Tensor ParseTensor(std::string_view bytes);

void WriteTensor(const std::string& path, const Tensor& tensor);
Tensor ReadTensor(const std::string& path);

// Keypoint tables are [K, 9] tensors with columns
//   x, y, score, scale, orientation, a00, a01, a10, a11.
// Readers also accept 2, 3, 4 or 5 leading columns; missing ones keep the
// Keypoint defaults.
Tensor KeypointsToTensor(const std::vector<Keypoint>& keypoints);
std::vector<Keypoint> KeypointsFromTensor(const Tensor& tensor);

Tensor DescriptorsToTensor(const LocalDescriptorSet& descriptors);
LocalDescriptorSet DescriptorsFromTensor(const Tensor& tensor);

std::string ReadFileBytes(const std::string& path);
void WriteFileBytes(const std::string& path, std::string_view bytes);

}  // namespace matchforge
