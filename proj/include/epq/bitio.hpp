#pragma once

// MSB-first bit packing used for raw side channels and Golomb codes.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace epq {

class BitOverrun : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BitWriter {
 public:
  /// Appends the low `nbits` bits of `value`, most significant first; nbits <= 32.
  void put(std::uint32_t value, int nbits);
  void put_bit(bool bit) { put(bit ? 1u : 0u, 1); }
  std::size_t bit_count() const noexcept { return bytes_.size() * 8 + static_cast<std::size_t>(pending_); }
  /// Pads the last byte with zeros and returns the packed bytes.
  std::vector<std::uint8_t> finish();

 private:
  std::vector<std::uint8_t> bytes_;
  std::uint32_t acc_ = 0;
  int pending_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  /// Throws BitOverrun when reading past the end.
  std::uint32_t get(int nbits);
  bool get_bit() { return get(1) != 0; }
  std::size_t bits_consumed() const noexcept { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace epq
