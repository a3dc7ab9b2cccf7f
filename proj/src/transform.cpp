#include "epq/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace epq {

const std::array<Vector8, kBlockSize>& dct_basis() {
  static const auto basis = [] {
    std::array<Vector8, kBlockSize> g{};
    for (int u = 0; u < kBlockSize; ++u) {
      const double c = u == 0 ? std::sqrt(1.0 / kBlockSize) : std::sqrt(2.0 / kBlockSize);
      for (int x = 0; x < kBlockSize; ++x)
        g[u][x] = c * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kBlockSize));
    }
    return g;
  }();
  return basis;
}

Vector8 dct1(const Vector8& v) {
  const auto& g = dct_basis();
  Vector8 out{};
  for (int u = 0; u < kBlockSize; ++u) {
    double acc = 0.0;
    for (int x = 0; x < kBlockSize; ++x) acc += g[u][x] * v[x];
    out[u] = acc;
  }
  return out;
}

Vector8 idct1(const Vector8& v) {
  const auto& g = dct_basis();
  Vector8 out{};
  for (int x = 0; x < kBlockSize; ++x) {
    double acc = 0.0;
    for (int u = 0; u < kBlockSize; ++u) acc += g[u][x] * v[u];
    out[x] = acc;
  }
  return out;
}

namespace {

// Applies `f` along rows, then along columns.
template <typename Out, typename In, typename F>
Out separable(const In& in, F f) {
  Out tmp{};
  for (int r = 0; r < kBlockSize; ++r) {
    Vector8 row{};
    for (int c = 0; c < kBlockSize; ++c) row[c] = in(r, c);
    const Vector8 t = f(row);
    for (int c = 0; c < kBlockSize; ++c) tmp(r, c) = t[c];
  }
  Out out{};
  for (int c = 0; c < kBlockSize; ++c) {
    Vector8 col{};
    for (int r = 0; r < kBlockSize; ++r) col[r] = tmp(r, c);
    const Vector8 t = f(col);
    for (int r = 0; r < kBlockSize; ++r) out(r, c) = t[r];
  }
  return out;
}

}  // namespace

DctBlock dct2_forward(const PixelBlock& b) { return separable<DctBlock>(b, dct1); }

PixelBlock dct2_inverse(const DctBlock& d) { return separable<PixelBlock>(d, idct1); }

const std::array<Position, kBlockArea>& zigzag_full() {
  static const auto order = [] {
    std::array<Position, kBlockArea> z{};
    std::size_t n = 0;
    for (int s = 0; s < 2 * kBlockSize - 1; ++s) {
      const int lo = std::max(0, s - (kBlockSize - 1));
      const int hi = std::min(s, kBlockSize - 1);
      if (s % 2 == 1) {
        for (int r = lo; r <= hi; ++r) z[n++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(s - r)};
      } else {
        for (int r = hi; r >= lo; --r) z[n++] = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(s - r)};
      }
    }
    return z;
  }();
  return order;
}

const std::array<Position, kBlockArea - 1>& zigzag() {
  static const auto order = [] {
    std::array<Position, kBlockArea - 1> z{};
    std::copy(zigzag_full().begin() + 1, zigzag_full().end(), z.begin());
    return z;
  }();
  return order;
}

namespace {
constexpr double kKr = 0.299;
constexpr double kKb = 0.114;
constexpr double kKg = 1.0 - kKr - kKb;
}  // namespace

YCbCr rgb_to_ycbcr(Rgb p) {
  const double y = kKr * p.r + kKg * p.g + kKb * p.b;
  return {y, 0.5 + (p.b - y) / (2.0 * (1.0 - kKb)), 0.5 + (p.r - y) / (2.0 * (1.0 - kKr))};
}

Rgb ycbcr_to_rgb(YCbCr p) {
  const double r = p.y + 2.0 * (1.0 - kKr) * (p.cr - 0.5);
  const double b = p.y + 2.0 * (1.0 - kKb) * (p.cb - 0.5);
  const double g = (p.y - kKr * r - kKb * b) / kKg;
  return {r, g, b};
}

Plane::Plane(int w, int h, double fill)
    : width(w), height(h), samples(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

BlockGrid partition_and_pad(const Plane& plane) {
  if (plane.width < 1 || plane.height < 1) throw std::invalid_argument("partition_and_pad: empty plane");
  BlockGrid grid;
  grid.width = plane.width;
  grid.height = plane.height;
  grid.cols = (plane.width + kBlockSize - 1) / kBlockSize;
  grid.rows = (plane.height + kBlockSize - 1) / kBlockSize;
  grid.blocks.resize(static_cast<std::size_t>(grid.cols * grid.rows));
  for (int by = 0; by < grid.rows; ++by)
    for (int bx = 0; bx < grid.cols; ++bx) {
      PixelBlock& b = grid.at(bx, by);
      for (int r = 0; r < kBlockSize; ++r)
        for (int c = 0; c < kBlockSize; ++c) {
          const int x = std::min(bx * kBlockSize + c, plane.width - 1);
          const int y = std::min(by * kBlockSize + r, plane.height - 1);
          b(r, c) = plane.at(x, y);
        }
    }
  return grid;
}

Plane unpartition(const BlockGrid& grid) {
  Plane plane(grid.width, grid.height);
  for (int y = 0; y < grid.height; ++y)
    for (int x = 0; x < grid.width; ++x)
      plane.at(x, y) = grid.at(x / kBlockSize, y / kBlockSize)(y % kBlockSize, x % kBlockSize);
  return plane;
}

}  // namespace epq
