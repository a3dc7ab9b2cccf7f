#pragma once

// 8x8 block partitioning, orthonormal DCT-II, zigzag scan and colour
// conversion.  Blocks are stored row-major with 0-based (row, col); the
// 1-based coefficient name DCT_jk is (row = j - 1, col = k - 1).

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace epq {

inline constexpr int kBlockSize = 8;
inline constexpr int kBlockArea = kBlockSize * kBlockSize;

struct Position {
  std::uint8_t row = 0;
  std::uint8_t col = 0;
  int index() const noexcept { return row * kBlockSize + col; }
  friend bool operator==(Position, Position) = default;
};

template <typename Tag>
struct Block {
  std::array<double, kBlockArea> values{};

  double& operator()(int row, int col) { return values[static_cast<std::size_t>(row * kBlockSize + col)]; }
  double operator()(int row, int col) const { return values[static_cast<std::size_t>(row * kBlockSize + col)]; }
  double& operator[](Position p) { return values[static_cast<std::size_t>(p.index())]; }
  double operator[](Position p) const { return values[static_cast<std::size_t>(p.index())]; }

  friend bool operator==(const Block&, const Block&) = default;
};

struct PixelTag {};
struct DctTag {};
using PixelBlock = Block<PixelTag>;  // sample values, nominally in [0, 1]
using DctBlock = Block<DctTag>;      // (0, 0) is the DC coefficient

using Vector8 = std::array<double, kBlockSize>;

/// Orthonormal DCT-II basis, basis[u][x] = c(u) cos((2x + 1) u pi / 16).
const std::array<Vector8, kBlockSize>& dct_basis();

Vector8 dct1(const Vector8& v);
Vector8 idct1(const Vector8& v);
DctBlock dct2_forward(const PixelBlock& b);
PixelBlock dct2_inverse(const DctBlock& d);

/// The 63 AC positions in JPEG zigzag order: (0,1), (1,0), (2,0), ... (7,7).
const std::array<Position, kBlockArea - 1>& zigzag();
/// All 64 positions in zigzag order, DC first.
const std::array<Position, kBlockArea>& zigzag_full();

struct Rgb {
  double r, g, b;
};
struct YCbCr {
  double y, cb, cr;
};
/// Full-range BT.601 on [0, 1] samples; chroma centred on 0.5.
YCbCr rgb_to_ycbcr(Rgb p);
Rgb ycbcr_to_rgb(YCbCr p);

/// A single image channel of real samples, row-major.
struct Plane {
  int width = 0;
  int height = 0;
  std::vector<double> samples;

  Plane() = default;
  Plane(int w, int h, double fill = 0.0);
  double& at(int x, int y) { return samples[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  double at(int x, int y) const { return samples[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
};

/// Raster-ordered grid of blocks covering a plane; the right and bottom edges
/// are padded by replicating the last column/row.
struct BlockGrid {
  int cols = 0;
  int rows = 0;
  int width = 0;   // true plane dimensions
  int height = 0;
  std::vector<PixelBlock> blocks;

  const PixelBlock& at(int bx, int by) const { return blocks[static_cast<std::size_t>(by * cols + bx)]; }
  PixelBlock& at(int bx, int by) { return blocks[static_cast<std::size_t>(by * cols + bx)]; }
};

/// Throws std::invalid_argument for an empty plane.
BlockGrid partition_and_pad(const Plane& plane);
/// Drops the padding again.
Plane unpartition(const BlockGrid& grid);

}  // namespace epq
