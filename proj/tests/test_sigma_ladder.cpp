#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "doctest.h"
#include "epq/sigma_ladder.hpp"
#include "oracles.hpp"

using namespace epq;

namespace {

double brute_cross_entropy(double sp, double sq, long long range) {
  double h = 0.0;
  for (long long x = -range; x <= range; ++x) {
    const double p = oracle::laplace_cell_probability(sp, x);
    const double q = oracle::laplace_cell_probability(sq, x);
    if (p > 0.0) h -= p * std::log2(q);
  }
  return h;
}

template <typename F>
double golden_section(F f, double a, double b) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - r * (b - a), d = a + r * (b - a);
  while (b - a > 1e-10) {
    if (f(c) < f(d)) {
      b = d;
    } else {
      a = c;
    }
    c = b - r * (b - a);
    d = a + r * (b - a);
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("geometric table") {
  const GeometricTable half = geometric_probs(1.0 / (2.0 * std::numbers::ln2), 5);
  CHECK(half.probs[half.symbol_of(0)] == doctest::Approx(0.5).epsilon(1e-14));

  for (double s : {0.1, 0.7, 1.0, 3.0, 40.0, 256.0}) {
    for (int xm : {1, 3, 50}) {
      const GeometricTable t = geometric_probs(s, xm);
      REQUIRE(t.symbol_count() == static_cast<std::size_t>(2 * xm + 3));
      double sum = 0.0;
      for (double p : t.probs) sum += p;
      CHECK(std::abs(sum - 1.0) < 1e-12);
      CHECK(t.probs[t.symbol_of(0)] == doctest::Approx(1.0 - std::exp(-1.0 / (2.0 * s))).epsilon(1e-13));
      for (int x = -xm; x <= xm; ++x)
        CHECK(t.probs[t.symbol_of(x)] == doctest::Approx(oracle::laplace_cell_probability(s, x)).epsilon(1e-10));
    }
  }
  const GeometricTable one = geometric_probs(1.0, 4);
  CHECK(one.probs[one.symbol_of(2)] / one.probs[one.symbol_of(1)] == doctest::Approx(std::exp(-1.0)).epsilon(1e-13));
  CHECK(one.probs[one.symbol_of(-2)] == one.probs[one.symbol_of(2)]);

  CHECK_THROWS_AS(geometric_probs(0.0, 3), std::invalid_argument);
  CHECK_THROWS_AS(geometric_probs(1.0, 0), std::invalid_argument);
}

TEST_CASE("table range keeps a minimum frequency") {
  for (double s : {0.1, 0.5, 3.0, 20.0, 256.0}) {
    const int xm = table_x_max(s);
    CHECK(xm >= 1);
    if (xm > 1) CHECK(geometric_prob(s, xm) * 16384.0 >= 4.0);
    CHECK(geometric_prob(s, xm + 1) * 16384.0 < 4.0);
  }
  CHECK(table_x_max(0.1) == 1);
  CHECK(table_x_max(3.0) == 19);
  CHECK(table_x_max(256.0) == 532);
}

TEST_CASE("cross entropy closed form") {
  for (double s : {0.2, 1.0, 4.5, 30.0}) {
    CHECK(std::abs(geometric_entropy(s) - brute_cross_entropy(s, s, 20000)) < 1e-9);
    CHECK(cross_entropy(s, s) == geometric_entropy(s));
  }
  CHECK(std::abs(cross_entropy(1.0, 1.1) - brute_cross_entropy(1.0, 1.1, 10000)) < 1e-9);
  CHECK(std::abs(cross_entropy(7.0, 0.6) - brute_cross_entropy(7.0, 0.6, 300)) < 1e-9);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lg(-3.0, 8.0);
  for (int t = 0; t < 100; ++t) {
    const double p = std::exp2(lg(rng)), q = std::exp2(lg(rng));
    CHECK(cross_entropy(p, q) >= cross_entropy(p, p) - 1e-12);
  }
}

TEST_CASE("penalty coefficient") {
  CHECK(penalty_coeff(50.0) == doctest::Approx(std::numbers::log2e / (2.0 * 2500.0)).epsilon(0.01));
  for (double s : {0.5, 2.0, 10.0, 50.0}) {
    const double eps = 1e-3 * s;
    const double fd = mismatch_penalty(s, s + eps) / (eps * eps);
    CHECK(fd == doctest::Approx(penalty_coeff(s)).epsilon(0.01));
  }
  double prev = penalty_coeff(0.5);
  for (double s = 0.51; s <= 100.0; s += 0.01) {
    const double d = penalty_coeff(s);
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("cell width") {
  for (double s : {0.3, 5.0, 80.0}) CHECK(cell_width(s, 8.0 * 0.01) == doctest::Approx(2.0 * cell_width(s, 0.01)).epsilon(1e-13));
  const double e = kDefaultPenaltyBudget;
  CHECK(cell_width(100.0, e) / std::pow(100.0, 2.0 / 3.0) ==
        doctest::Approx(std::cbrt(48.0 * e / std::numbers::log2e)).epsilon(0.01));

  // The cell-averaged mismatch follows the quadratic law D w^2 / 12.
  std::mt19937_64 rng(2);
  for (double s : {5.0, 40.0}) {
    const double w = cell_width(s, e);
    std::uniform_real_distribution<double> u(s - w / 2, s + w / 2);
    double sum = 0.0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) sum += mismatch_penalty(u(rng), s);
    CHECK(sum / draws == doctest::Approx(penalty_coeff(s) * w * w / 12.0).epsilon(0.05));
  }
}

TEST_CASE("ladder construction") {
  const SigmaLadder l200 = build_ladder(0.1, 200.0, kDefaultPenaltyBudget);
  const SigmaLadder l25 = build_ladder(0.1, 25.0, kDefaultPenaltyBudget);
  const SigmaLadder l256 = build_ladder();
  CHECK(l25.size() == 18);
  CHECK(l200.size() == 37);
  CHECK(l256.size() == 40);
  CHECK(std::abs(static_cast<double>(l200.size()) - 2.0 * static_cast<double>(l25.size())) <= 1.0);

  const auto& n = l200.nodes();
  CHECK(n.front() == 0.1);
  CHECK(n[1] - n[0] < 0.2);
  CHECK(n.back() >= 200.0);
  CHECK(n[n.size() - 2] < 200.0);
  for (std::size_t i = 1; i < n.size(); ++i) {
    CHECK(n[i] > n[i - 1]);
    CHECK(std::isfinite(n[i]));
    CHECK(n[i] - n[i - 1] == doctest::Approx(cell_width(n[i - 1], kDefaultPenaltyBudget)).epsilon(0.1));
  }

  CHECK_THROWS_AS(build_ladder(1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(build_ladder(0.1, 10.0, 0.0), std::invalid_argument);
}

TEST_CASE("ladder lookup") {
  const SigmaLadder l = build_ladder(0.1, 200.0);
  const auto& n = l.nodes();
  for (std::size_t i = 0; i < n.size(); ++i) CHECK(ladder_lookup(l, n[i]) == i);
  const double mid = 0.5 * (n[4] + n[5]);
  CHECK(ladder_lookup(l, mid - 1e-9) == 4);
  CHECK(ladder_lookup(l, mid + 1e-9) == 5);
  CHECK(ladder_lookup(l, 10.0 * 200.0) == n.size() - 1);
  CHECK(ladder_lookup(l, 1e-6) == 0);
}

TEST_CASE("golomb parameter") {
  CHECK(golomb_optimal_M(100.0) == doctest::Approx(66.794).epsilon(1e-12));
  CHECK(golomb_optimal_M(2.0 * 37.0) == doctest::Approx(2.0 * golomb_optimal_M(37.0)).epsilon(1e-14));

  const double s = 50.0;
  const double m_star = golden_section([s](double M) { return -1.0 / std::expm1(-M / s) + std::log2(M); }, 1.0, 500.0);
  CHECK(m_star == doctest::Approx(golomb_optimal_M(s)).epsilon(0.001));
  CHECK(golomb_optimal_coefficient(s) == doctest::Approx(kGolombCoefficient).epsilon(0.001));
}

TEST_CASE("tail-code penalties") {
  CHECK(golomb_penalty(200.0, std::round(golomb_optimal_M(200.0))) == doctest::Approx(0.027).epsilon(0.005 / 0.027));

  double sum = 0.0;
  int count = 0;
  for (double l = 3.0; l <= 9.0; l += 0.001, ++count) sum += golomb_pow2_penalty(std::exp2(l));
  CHECK(std::abs(sum / count - 0.06) <= 0.02);

  for (double l = 3.0; l <= 9.0; l += 0.001) {
    const double sg = std::exp2(l);
    CHECK(lsb_flush_penalty(sg, lsb_flush_bits(sg)) <= kDefaultPenaltyBudget);
  }
  for (double sg : {0.3, 1.0, 9.0, 100.0, 700.0}) {
    CHECK(golomb_penalty(sg, std::max(1.0, std::round(golomb_optimal_M(sg)))) >= 0.0);
    for (int m = 0; m < 12; ++m) CHECK(lsb_flush_penalty(sg, m) >= -1e-12);
  }
  CHECK(lsb_flush_bits(8.0) == 0);
  CHECK(lsb_flush_bits(16.0) == 1);
  CHECK(lsb_flush_bits(3.0) == 0);
}

TEST_CASE("golomb bit code") {
  {
    BitWriter w;
    golomb_encode(w, 0, 2);
    CHECK(w.bit_count() == 3);
    const auto bytes = w.finish();
    CHECK(bytes[0] == 0b00000000);
  }
  {
    BitWriter w;
    golomb_encode(w, 9, 2);
    CHECK(w.bit_count() == 5);
    const auto bytes = w.finish();
    CHECK(bytes[0] == 0b11001000);
  }
  for (int m = 0; m <= 6; ++m) {
    BitWriter w;
    std::size_t expected_bits = 0;
    for (std::uint64_t x = 0; x <= 10000; ++x) {
      golomb_encode(w, x, m);
      expected_bits += 1 + (x >> m) + static_cast<std::size_t>(m);
    }
    CHECK(w.bit_count() == expected_bits);
    const auto bytes = w.finish();
    BitReader r(bytes);
    bool all = true;
    for (std::uint64_t x = 0; x <= 10000; ++x) all = all && golomb_decode(r, m) == x;
    CHECK(all);
  }
}
