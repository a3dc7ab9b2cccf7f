#include "epq/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>

namespace epq {

namespace {

class HeaderParser {
 public:
  explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  int number(const char* what) {
    skip_space();
    if (pos_ >= bytes_.size()) throw ImageFormatError(std::string("unexpected end of header reading ") + what, pos_);
    if (!std::isdigit(bytes_[pos_])) throw ImageFormatError(std::string("expected ") + what, pos_);
    long long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > (1 << 24)) throw ImageFormatError(std::string(what) + " is too large", pos_);
      ++pos_;
    }
    return static_cast<int>(v);
  }

  std::size_t pos_ = 0;
  std::span<const std::uint8_t> bytes_;
};

}  // namespace

ImageFormatError::ImageFormatError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}

Image read_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ImageFormatError("not a binary PGM/PPM file (expected P5 or P6)", 0);
  Image img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  HeaderParser p(bytes);
  p.pos_ = 2;
  img.width = p.number("width");
  img.height = p.number("height");
  const std::size_t maxval_at = (p.skip_space(), p.pos_);
  const int maxval = p.number("maxval");
  if (img.width <= 0 || img.height <= 0) throw ImageFormatError("image has zero size", maxval_at);
  if (maxval < 1 || maxval > 255) throw ImageFormatError("unsupported bit depth (maxval " + std::to_string(maxval) + ")", maxval_at);
  if (p.pos_ >= bytes.size() || !std::isspace(bytes[p.pos_])) throw ImageFormatError("expected whitespace after maxval", p.pos_);
  ++p.pos_;
  const std::size_t need = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * static_cast<std::size_t>(img.channels);
  if (bytes.size() - p.pos_ < need) throw ImageFormatError("pixel data truncated", bytes.size());
  img.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(p.pos_), bytes.begin() + static_cast<std::ptrdiff_t>(p.pos_ + need));
  if (maxval != 255)
    for (auto& v : img.data) {
      if (v > maxval) throw ImageFormatError("sample exceeds maxval", p.pos_ + static_cast<std::size_t>(&v - img.data.data()));
      v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    }
  return img;
}

std::vector<std::uint8_t> write_pnm(const Image& image) {
  const std::string header = (image.channels == 1 ? "P5\n" : "P6\n") + std::to_string(image.width) + " " +
                             std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.data.begin(), image.data.end());
  return out;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

Image read_pnm_file(const std::filesystem::path& path) { return read_pnm(read_file(path)); }

void write_pnm_file(const std::filesystem::path& path, const Image& image) { write_file(path, write_pnm(image)); }

Plane channel_plane(const Image& image, int c) {
  Plane p(image.width, image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) p.at(x, y) = image.at(x, y, c) / 255.0;
  return p;
}

std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (e.is_regular_file() && (ext == ".pgm" || ext == ".ppm")) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace epq
