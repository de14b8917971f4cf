#include "matchforge/tensor_io.h"

#include <fstream>
#include <iterator>
#include <sstream>

#include "byte_io.h"

namespace matchforge {
namespace {

constexpr std::string_view kTensorMagic = "MFT1";
constexpr uint8_t kDtypeF32 = 0;
constexpr int kMaxRank = 4;
constexpr int kKeypointColumns = 9;

size_t Product(const std::vector<uint32_t>& dims, size_t begin) {
  size_t n = 1;
  for (size_t i = begin; i < dims.size(); ++i) n *= dims[i];
  return n;
}

}  // namespace

size_t Tensor::NumElements() const {
  return dims.empty() ? 0 : Product(dims, 0);
}

size_t Tensor::RecordSize() const {
  return dims.empty() ? 0 : Product(dims, 1);
}

static void Validate(const Tensor& t) {
  if (t.dims.empty() || t.dims.size() > kMaxRank) {
    throw std::invalid_argument("tensor rank must be in [1, 4]");
  }
  if (t.values.size() != t.NumElements()) {
    throw std::invalid_argument("tensor payload size does not match dims");
  }
  if (!t.names.empty() && t.names.size() != t.dims[0]) {
    throw std::invalid_argument("tensor name count must equal dims[0]");
  }
}

Tensor MakeTensor(std::vector<uint32_t> dims, std::vector<float> values,
                  std::vector<std::string> names) {
  Tensor t{std::move(dims), std::move(values), std::move(names)};
  Validate(t);
  return t;
}

std::string SerializeTensor(const Tensor& tensor) {
  Validate(tensor);

  internal::ByteWriter w;
  w.PutBytes(kTensorMagic);
  w.PutU8(kDtypeF32);
  w.PutU8(static_cast<uint8_t>(tensor.dims.size()));
  for (uint32_t d : tensor.dims) w.PutU32(d);
  for (float v : tensor.values) w.PutF32(v);
  if (!tensor.names.empty()) {
    w.PutU32(static_cast<uint32_t>(tensor.names.size()));
    uint32_t offset = 0;
    w.PutU32(offset);
    for (const std::string& name : tensor.names) {
      offset += static_cast<uint32_t>(name.size());
      w.PutU32(offset);
    }
    for (const std::string& name : tensor.names) w.PutBytes(name);
  }
  return w.Release();
}

Tensor ParseTensor(std::string_view bytes) {
  if (bytes.size() < kTensorMagic.size()) {
    throw DataError("truncated input: " + std::to_string(bytes.size()) +
                    " bytes");
  }
  if (bytes.substr(0, kTensorMagic.size()) != kTensorMagic) {
    throw DataError("bad magic: not an MFT1 tensor file");
  }
  internal::ByteReader r(bytes.substr(kTensorMagic.size()));
  Tensor t;
  if (r.remaining() < 2) throw DataError("truncated header");
  const uint8_t dtype = r.GetU8();
  if (dtype != kDtypeF32) {
    throw DataError("unsupported dtype " + std::to_string(dtype));
  }
  const uint8_t rank = r.GetU8();
  if (rank < 1 || rank > kMaxRank) {
    throw DataError("malformed header: rank " + std::to_string(rank));
  }
  if (r.remaining() < 4u * rank) throw DataError("truncated header");
  t.dims.resize(rank);
  for (auto& d : t.dims) d = r.GetU32();

  const size_t n = t.NumElements();
  if (r.remaining() / sizeof(float) < n) {
    throw DataError("truncated payload: expected " + std::to_string(n) +
                    " values");
  }
  t.values.resize(n);
  for (auto& v : t.values) v = r.GetF32();

  if (r.AtEnd()) return t;

  // Name block.
  if (r.remaining() < 4) throw DataError("malformed header: trailing bytes");
  const uint32_t count = r.GetU32();
  if (count != t.dims[0]) {
    throw DataError("malformed header: name count " + std::to_string(count) +
                    " != dims[0] " + std::to_string(t.dims[0]));
  }
  if (r.remaining() / 4 < static_cast<size_t>(count) + 1) {
    throw DataError("truncated name block");
  }
  std::vector<uint32_t> offsets(count + 1);
  for (auto& o : offsets) o = r.GetU32();
  if (offsets[0] != 0) throw DataError("malformed header: name offsets");
  for (uint32_t i = 0; i < count; ++i) {
    if (offsets[i + 1] < offsets[i]) {
      throw DataError("malformed header: name offsets");
    }
  }
  if (r.remaining() < offsets[count]) throw DataError("truncated name block");
  std::string_view blob = r.GetBytes(offsets[count]);
  if (!r.AtEnd()) throw DataError("malformed header: trailing bytes");
  t.names.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    t.names.emplace_back(blob.substr(offsets[i], offsets[i + 1] - offsets[i]));
  }
  return t;
}

std::string ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed: " + path);
}

void WriteTensor(const std::string& path, const Tensor& tensor) {
  WriteFileBytes(path, SerializeTensor(tensor));
}

Tensor ReadTensor(const std::string& path) {
  try {
    return ParseTensor(ReadFileBytes(path));
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Tensor KeypointsToTensor(const std::vector<Keypoint>& keypoints) {
  std::vector<float> values;
  values.reserve(keypoints.size() * kKeypointColumns);
  for (const Keypoint& kp : keypoints) {
    values.insert(values.end(),
                  {static_cast<float>(kp.x), static_cast<float>(kp.y),
                   static_cast<float>(kp.score), static_cast<float>(kp.scale),
                   static_cast<float>(kp.orientation),
                   static_cast<float>(kp.affine[0]),
                   static_cast<float>(kp.affine[1]),
                   static_cast<float>(kp.affine[2]),
                   static_cast<float>(kp.affine[3])});
  }
  return MakeTensor({static_cast<uint32_t>(keypoints.size()),
                     static_cast<uint32_t>(kKeypointColumns)},
                    std::move(values));
}

std::vector<Keypoint> KeypointsFromTensor(const Tensor& tensor) {
  if (tensor.dims.size() != 2) {
    throw DataError("keypoint tensor must be rank 2");
  }
  const uint32_t cols = tensor.dims[1];
  if (cols != 2 && cols != 3 && cols != 4 && cols != 5 &&
      cols != kKeypointColumns) {
    throw DataError("keypoint tensor has unsupported column count " +
                    std::to_string(cols));
  }
  std::vector<Keypoint> out(tensor.dims[0]);
  for (size_t i = 0; i < out.size(); ++i) {
    const float* row = tensor.values.data() + i * cols;
    Keypoint& kp = out[i];
    kp.x = row[0];
    kp.y = row[1];
    if (cols > 2) kp.score = row[2];
    if (cols > 3) kp.scale = row[3];
    if (cols > 4) kp.orientation = row[4];
    if (cols == kKeypointColumns) {
      for (int k = 0; k < 4; ++k) kp.affine[k] = row[5 + k];
    }
  }
  return out;
}

Tensor DescriptorsToTensor(const LocalDescriptorSet& descriptors) {
  return MakeTensor({static_cast<uint32_t>(descriptors.size()),
                     static_cast<uint32_t>(descriptors.dim)},
                    descriptors.values);
}

LocalDescriptorSet DescriptorsFromTensor(const Tensor& tensor) {
  if (tensor.dims.size() != 2) {
    throw DataError("descriptor tensor must be rank 2");
  }
  return LocalDescriptorSet{static_cast<int>(tensor.dims[1]), tensor.values};
}

}  // namespace matchforge
