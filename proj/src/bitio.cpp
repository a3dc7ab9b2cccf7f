#include "epq/bitio.hpp"

namespace epq {

void BitWriter::put(std::uint32_t value, int nbits) {
  if (nbits < 0 || nbits > 32) throw std::invalid_argument("BitWriter::put: nbits out of range");
  for (int i = nbits - 1; i >= 0; --i) {
    acc_ = (acc_ << 1) | ((value >> i) & 1u);
    if (++pending_ == 8) {
      bytes_.push_back(static_cast<std::uint8_t>(acc_));
      acc_ = 0;
      pending_ = 0;
    }
  }
}

std::vector<std::uint8_t> BitWriter::finish() {
  if (pending_ > 0) {
    bytes_.push_back(static_cast<std::uint8_t>(acc_ << (8 - pending_)));
    acc_ = 0;
    pending_ = 0;
  }
  return std::move(bytes_);
}

std::uint32_t BitReader::get(int nbits) {
  if (nbits < 0 || nbits > 32) throw std::invalid_argument("BitReader::get: nbits out of range");
  if (pos_ + static_cast<std::size_t>(nbits) > bytes_.size() * 8) throw BitOverrun("raw bit channel exhausted");
  std::uint32_t v = 0;
  for (int i = 0; i < nbits; ++i, ++pos_) v = (v << 1) | ((bytes_[pos_ >> 3] >> (7 - (pos_ & 7))) & 1u);
  return v;
}

}  // namespace epq
