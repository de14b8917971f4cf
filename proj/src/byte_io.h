#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "matchforge/types.h"

namespace matchforge::internal {

// Little-endian append-only encoder.
class ByteWriter {
 public:
  void PutU8(uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void PutU32(uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      out_.push_back(static_cast<char>((v >> shift) & 0xFFu));
    }
  }
  void PutF32(float v) { PutU32(std::bit_cast<uint32_t>(v)); }
  void PutBytes(std::string_view bytes) { out_.append(bytes); }
  void PutString(std::string_view s) {
    PutU32(static_cast<uint32_t>(s.size()));
    PutBytes(s);
  }

  std::string Release() { return std::move(out_); }

 private:
  std::string out_;
};

// Little-endian cursor over a byte buffer. Running past the end throws
// DataError("truncated ...").
class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  size_t remaining() const { return bytes_.size() - pos_; }
  bool AtEnd() const { return pos_ == bytes_.size(); }

  uint8_t GetU8() {
    Require(1);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  uint32_t GetU32() {
    Require(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<uint32_t>(static_cast<uint8_t>(bytes_[pos_ + i]))
           << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  float GetF32() { return std::bit_cast<float>(GetU32()); }
  std::string_view GetBytes(size_t n) {
    Require(n);
    std::string_view out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  std::string GetString() { return std::string(GetBytes(GetU32())); }

 private:
  void Require(size_t n) const {
    if (remaining() < n) {
      throw DataError("truncated input: need " + std::to_string(n) +
                      " bytes, " + std::to_string(remaining()) + " left");
    }
  }

  std::string_view bytes_;
  size_t pos_ = 0;
};

}  // namespace matchforge::internal
