#pragma once

// 8-bit binary PGM (P5) and PPM (P6) images.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epq/transform.hpp"

namespace epq {

struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;                 // 1 (gray) or 3 (RGB)
  std::vector<std::uint8_t> data;  // interleaved, row-major

  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  friend bool operator==(const Image&, const Image&) = default;
};

/// Malformed or unsupported file; offset is the byte where parsing stopped.
class ImageFormatError : public std::runtime_error {
 public:
  ImageFormatError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

Image read_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_pnm(const Image& image);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
Image read_pnm_file(const std::filesystem::path& path);
void write_pnm_file(const std::filesystem::path& path, const Image& image);

/// Channel c scaled to [0, 1].
Plane channel_plane(const Image& image, int c);
/// Sorted *.pgm / *.ppm files of a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace epq
