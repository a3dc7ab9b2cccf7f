#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "epq/transform.hpp"

using namespace epq;

namespace {

PixelBlock random_block(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PixelBlock b;
  for (double& v : b.values) v = u(rng);
  return b;
}

// Direct quadruple-sum definition of the orthonormal 2-D DCT-II.
DctBlock naive_dct2(const PixelBlock& b) {
  DctBlock d;
  const double pi = std::numbers::pi;
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5;
      const double cv = v == 0 ? std::sqrt(0.125) : 0.5;
      double acc = 0.0;
      for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y)
          acc += b(x, y) * std::cos((2 * x + 1) * u * pi / 16.0) * std::cos((2 * y + 1) * v * pi / 16.0);
      d(u, v) = cu * cv * acc;
    }
  return d;
}

double energy(const auto& block) {
  double s = 0.0;
  for (double v : block.values) s += v * v;
  return s;
}

}  // namespace

TEST_CASE("constant block puts everything in DC") {
  PixelBlock b;
  b.values.fill(0.37);
  const DctBlock d = dct2_forward(b);
  CHECK(d(0, 0) == doctest::Approx(8 * 0.37).epsilon(1e-14));
  for (int i = 1; i < kBlockArea; ++i) CHECK(std::abs(d.values[static_cast<std::size_t>(i)]) < 1e-14);
  const PixelBlock back = dct2_inverse(d);
  for (int i = 0; i < kBlockArea; ++i) CHECK(std::abs(back.values[static_cast<std::size_t>(i)] - 0.37) < 1e-12);
}

TEST_CASE("energy is preserved and the inverse round-trips") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 100; ++t) {
    const PixelBlock b = random_block(rng);
    const DctBlock d = dct2_forward(b);
    CHECK(std::abs(energy(d) - energy(b)) < 1e-9);
    const PixelBlock back = dct2_inverse(d);
    for (int i = 0; i < kBlockArea; ++i)
      CHECK(std::abs(back.values[static_cast<std::size_t>(i)] - b.values[static_cast<std::size_t>(i)]) < 1e-12);
  }
}

TEST_CASE("impulses match the direct definition") {
  for (int pos = 0; pos < kBlockArea; ++pos) {
    PixelBlock b;
    b.values[static_cast<std::size_t>(pos)] = 1.0;
    const DctBlock fast = dct2_forward(b);
    const DctBlock slow = naive_dct2(b);
    for (int i = 0; i < kBlockArea; ++i)
      CHECK(std::abs(fast.values[static_cast<std::size_t>(i)] - slow.values[static_cast<std::size_t>(i)]) < 1e-12);
    const PixelBlock back = dct2_inverse(fast);
    for (int i = 0; i < kBlockArea; ++i)
      CHECK(std::abs(back.values[static_cast<std::size_t>(i)] - b.values[static_cast<std::size_t>(i)]) < 1e-12);
  }
  std::mt19937_64 rng(5);
  const PixelBlock b = random_block(rng);
  const DctBlock fast = dct2_forward(b);
  const DctBlock slow = naive_dct2(b);
  for (int i = 0; i < kBlockArea; ++i)
    CHECK(std::abs(fast.values[static_cast<std::size_t>(i)] - slow.values[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("1-D transform") {
  Vector8 c;
  c.fill(0.25);
  const Vector8 d = dct1(c);
  CHECK(d[0] == doctest::Approx(std::sqrt(8.0) * 0.25).epsilon(1e-14));
  for (int u = 1; u < 8; ++u) CHECK(std::abs(d[static_cast<std::size_t>(u)]) < 1e-14);

  for (int k = 0; k < 8; ++k) {
    Vector8 e{};
    e[static_cast<std::size_t>(k)] = 1.0;
    const Vector8 t = dct1(e);
    for (int u = 0; u < 8; ++u) {
      const double cu = u == 0 ? std::sqrt(0.125) : 0.5;
      CHECK(std::abs(t[static_cast<std::size_t>(u)] - cu * std::cos((2 * k + 1) * u * std::numbers::pi / 16.0)) < 1e-12);
    }
    const Vector8 back = idct1(t);
    for (int x = 0; x < 8; ++x) CHECK(std::abs(back[static_cast<std::size_t>(x)] - e[static_cast<std::size_t>(x)]) < 1e-12);
  }
}

TEST_CASE("separable application equals the 2-D transform") {
  std::mt19937_64 rng(9);
  const PixelBlock b = random_block(rng);
  DctBlock rows;
  for (int r = 0; r < 8; ++r) {
    Vector8 v;
    for (int c = 0; c < 8; ++c) v[static_cast<std::size_t>(c)] = b(r, c);
    const Vector8 t = dct1(v);
    for (int c = 0; c < 8; ++c) rows(r, c) = t[static_cast<std::size_t>(c)];
  }
  DctBlock both;
  for (int c = 0; c < 8; ++c) {
    Vector8 v;
    for (int r = 0; r < 8; ++r) v[static_cast<std::size_t>(r)] = rows(r, c);
    const Vector8 t = dct1(v);
    for (int r = 0; r < 8; ++r) both(r, c) = t[static_cast<std::size_t>(r)];
  }
  const DctBlock d = dct2_forward(b);
  for (int i = 0; i < kBlockArea; ++i)
    CHECK(std::abs(both.values[static_cast<std::size_t>(i)] - d.values[static_cast<std::size_t>(i)]) < 1e-12);
}

TEST_CASE("basis is orthonormal") {
  const auto& g = dct_basis();
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double dot = 0.0;
      for (int x = 0; x < 8; ++x) dot += g[static_cast<std::size_t>(a)][static_cast<std::size_t>(x)] * g[static_cast<std::size_t>(b)][static_cast<std::size_t>(x)];
      CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) < 1e-12);
    }
}

TEST_CASE("linearity and DC equals eight times the mean") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const PixelBlock a = random_block(rng);
    const PixelBlock b = random_block(rng);
    const double alpha = 0.7, beta = -1.3;
    PixelBlock mix;
    double mean = 0.0;
    for (int i = 0; i < kBlockArea; ++i) {
      const auto k = static_cast<std::size_t>(i);
      mix.values[k] = alpha * a.values[k] + beta * b.values[k];
      mean += a.values[k] / kBlockArea;
    }
    const DctBlock da = dct2_forward(a), db = dct2_forward(b), dm = dct2_forward(mix);
    for (int i = 0; i < kBlockArea; ++i) {
      const auto k = static_cast<std::size_t>(i);
      CHECK(std::abs(dm.values[k] - (alpha * da.values[k] + beta * db.values[k])) < 1e-12);
    }
    CHECK(std::abs(da(0, 0) - 8.0 * mean) < 1e-12);
  }
}

TEST_CASE("zigzag order") {
  const auto& z = zigzag();
  REQUIRE(z.size() == 63);
  CHECK(z[0] == Position{0, 1});
  CHECK(z[1] == Position{1, 0});
  CHECK(z[2] == Position{2, 0});
  CHECK(z[3] == Position{1, 1});
  CHECK(z[4] == Position{0, 2});
  CHECK(z[62] == Position{7, 7});
  std::set<int> seen;
  for (const Position p : z) {
    CHECK(p.index() != 0);
    seen.insert(p.index());
  }
  CHECK(seen.size() == 63);
  // Neighbouring entries are king-move adjacent.
  for (std::size_t i = 1; i < z.size(); ++i) {
    CHECK(std::abs(z[i].row - z[i - 1].row) <= 1);
    CHECK(std::abs(z[i].col - z[i - 1].col) <= 1);
  }
  CHECK(zigzag_full()[0] == Position{0, 0});
  CHECK(zigzag_full()[1] == z[0]);
}

TEST_CASE("colour conversion") {
  auto check = [](YCbCr got, double y, double cb, double cr) {
    CHECK(std::abs(got.y - y) < 1e-15);
    CHECK(std::abs(got.cb - cb) < 1e-15);
    CHECK(std::abs(got.cr - cr) < 1e-15);
  };
  check(rgb_to_ycbcr({0, 0, 0}), 0, 0.5, 0.5);
  check(rgb_to_ycbcr({1, 1, 1}), 1, 0.5, 0.5);
  check(rgb_to_ycbcr({0.42, 0.42, 0.42}), 0.42, 0.5, 0.5);

  // Pure colours hit the corners of the chroma range.
  CHECK(rgb_to_ycbcr({0, 0, 1}).cb == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rgb_to_ycbcr({1, 0, 0}).cr == doctest::Approx(1.0).epsilon(1e-14));

  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const Rgb p{u(rng), u(rng), u(rng)};
    const Rgb q = ycbcr_to_rgb(rgb_to_ycbcr(p));
    CHECK(std::abs(q.r - p.r) < 1e-12);
    CHECK(std::abs(q.g - p.g) < 1e-12);
    CHECK(std::abs(q.b - p.b) < 1e-12);
  }
}

TEST_CASE("partition and pad") {
  CHECK_THROWS_AS(partition_and_pad(Plane{}), std::invalid_argument);
  CHECK_THROWS_AS(partition_and_pad(Plane(0, 5)), std::invalid_argument);

  const BlockGrid big = partition_and_pad(Plane(512, 512, 0.5));
  CHECK(big.cols == 64);
  CHECK(big.rows == 64);

  Plane p(9, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 9; ++x) p.at(x, y) = 0.01 * x + 0.1 * y;
  const BlockGrid g = partition_and_pad(p);
  CHECK(g.cols == 2);
  CHECK(g.rows == 1);
  CHECK(g.width == 9);
  CHECK(g.height == 8);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) CHECK(g.at(1, 0)(r, c) == p.at(8, r));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const auto& [w, h] : {std::pair{1, 1}, {7, 3}, {8, 8}, {17, 9}, {33, 64}}) {
    Plane img(w, h);
    for (double& v : img.samples) v = u(rng);
    const BlockGrid grid = partition_and_pad(img);
    const Plane back = unpartition(grid);
    CHECK(back.width == w);
    CHECK(back.height == h);
    CHECK(back.samples == img.samples);
    // Bottom padding replicates the last row.
    const PixelBlock& corner = grid.at(grid.cols - 1, grid.rows - 1);
    const int last_row = (h - 1) % 8;
    for (int r = last_row; r < 8; ++r) CHECK(corner(r, 0) == img.at((grid.cols - 1) * 8, h - 1));
  }
}
