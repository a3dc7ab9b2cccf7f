#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "epq/coder.hpp"

using namespace epq;

namespace {

std::vector<std::uint32_t> freqs(const CodingTable& t) { return t.freq; }

// Inverse-CDF draw of a symbol from `probs`.
std::uint32_t draw(const std::vector<double>& probs, double u) {
  double acc = 0.0;
  for (std::size_t s = 0; s < probs.size(); ++s) {
    acc += probs[s];
    if (u < acc) return static_cast<std::uint32_t>(s);
  }
  return static_cast<std::uint32_t>(probs.size() - 1);
}

}  // namespace

TEST_CASE("table quantization") {
  CHECK(freqs(table_from_probs(std::vector{0.5, 0.5}, 4)) == std::vector<std::uint32_t>{8, 8});
  CHECK(freqs(table_from_probs(std::vector{0.7, 0.3}, 4)) == std::vector<std::uint32_t>{11, 5});
  const double tiny = std::ldexp(1.0, -20);
  CHECK(freqs(table_from_probs(std::vector{1.0 - tiny, tiny}, 14)) == std::vector<std::uint32_t>{16383, 1});

  CHECK_THROWS_AS(table_from_probs(std::vector{0.5, 0.4}), std::invalid_argument);
  CHECK_THROWS_AS(table_from_probs(std::vector<double>(17, 1.0 / 17), 4), std::invalid_argument);

  // Many 1-minimum bumps force decrements elsewhere.
  std::vector<double> skew(200, 1e-9);
  skew[0] = 1.0 - 199e-9;
  const CodingTable t = table_from_probs(skew, 10);
  std::uint32_t sum = 0;
  for (auto f : t.freq) {
    CHECK(f >= 1);
    sum += f;
  }
  CHECK(sum == 1024);
  CHECK(t.freq[0] == 1024 - 199);
  CHECK(t.cum.back() == 1024);
  for (std::size_t s = 0; s < t.size(); ++s) CHECK(t.symbol[t.cum[s]] == s);
}

TEST_CASE("ladder tables stay close to their laws") {
  const SigmaLadder ladder = build_ladder();
  double worst = 0.0;
  for (double s : ladder.nodes()) {
    const ValueTable vt = make_value_table(s);
    const GeometricTable g = geometric_probs(s, vt.x_max);
    worst = std::max(worst, table_divergence(g.probs, vt.table));
  }
  CHECK(worst < 1e-3);
  // Intermediate widths too.
  for (double s = 0.1; s < 300.0; s *= 1.07) {
    const ValueTable vt = make_value_table(s);
    CHECK(table_divergence(geometric_probs(s, vt.x_max).probs, vt.table) < 1e-3);
  }
}

TEST_CASE("empty stream") {
  const std::vector<CodingTable> tables{table_from_probs(std::vector{0.5, 0.5})};
  const auto bytes = encode_stream({}, tables);
  CHECK(bytes.empty());
  CHECK(decode_stream(bytes, {}, tables).empty());
  RansDecoder dec(bytes);
  CHECK_THROWS_AS(dec.get(tables[0]), StreamError);
}

TEST_CASE("single table efficiency") {
  const ValueTable vt = make_value_table(3.0);
  const GeometricTable g = geometric_probs(3.0, vt.x_max);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 1000000;
  std::vector<CodedSymbol> syms(n);
  double ideal = 0.0;
  for (auto& cs : syms) {
    cs = {draw(g.probs, u(rng)), 0};
    ideal += symbol_cost(vt.table, cs.symbol);
  }
  const std::vector<CodingTable> tables{vt.table};
  const auto bytes = encode_stream(syms, tables);
  const double bits = 8.0 * static_cast<double>(bytes.size());
  CHECK(bits <= ideal + 64.0 + 32.0);

  double cross = 0.0;
  for (std::size_t s = 0; s < g.probs.size(); ++s) cross += g.probs[s] * symbol_cost(vt.table, static_cast<std::uint32_t>(s));
  CHECK(std::abs(bits / n - cross) < 0.01);

  const std::vector<std::uint32_t> ids(n, 0);
  const auto back = decode_stream(bytes, ids, tables);
  bool same = back.size() == n;
  for (std::size_t i = 0; same && i < n; ++i) same = back[i] == syms[i].symbol;
  CHECK(same);
}

TEST_CASE("table switching round trip") {
  std::vector<CodingTable> tables;
  tables.push_back(table_from_probs(std::vector{0.9, 0.05, 0.05}));
  tables.push_back(table_from_probs(std::vector{0.1, 0.2, 0.3, 0.4}));
  std::vector<CodedSymbol> syms;
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5000; ++i) {
    const std::uint32_t t = static_cast<std::uint32_t>(i % 2);
    syms.push_back({static_cast<std::uint32_t>(rng() % tables[t].size()), t});
  }
  std::vector<std::uint32_t> ids;
  for (const auto& cs : syms) ids.push_back(cs.table);
  const auto back = decode_stream(encode_stream(syms, tables), ids, tables);
  REQUIRE(back.size() == syms.size());
  for (std::size_t i = 0; i < syms.size(); ++i) CHECK(back[i] == syms[i].symbol);
}

TEST_CASE("encoding is deterministic") {
  const std::vector<CodingTable> tables{table_from_probs(std::vector{0.3, 0.3, 0.4})};
  std::vector<CodedSymbol> syms;
  for (std::uint32_t i = 0; i < 1000; ++i) syms.push_back({(i * 7) % 3, 0});
  CHECK(encode_stream(syms, tables) == encode_stream(syms, tables));
}

TEST_CASE("truncated stream reports an error") {
  const ValueTable vt = make_value_table(5.0);
  const std::vector<CodingTable> tables{vt.table};
  std::vector<CodedSymbol> syms;
  for (std::uint32_t i = 0; i < 2000; ++i) syms.push_back({(i * 13) % static_cast<std::uint32_t>(vt.table.size()), 0});
  auto bytes = encode_stream(syms, tables);
  bytes.resize(bytes.size() / 2);
  const std::vector<std::uint32_t> ids(syms.size(), 0);
  CHECK_THROWS_AS(decode_stream(bytes, ids, tables), StreamError);
  bytes.resize(5);
  CHECK_THROWS_AS(RansDecoder{bytes}, StreamError);
}

TEST_CASE("raw bits") {
  std::mt19937_64 rng(6);
  for (int m = 1; m <= 16; ++m) {
    BitWriter w;
    std::vector<std::uint32_t> words(10000);
    for (auto& v : words) {
      v = static_cast<std::uint32_t>(rng()) & ((1u << m) - 1);
      w.put(v, m);
    }
    CHECK(w.bit_count() == words.size() * static_cast<std::size_t>(m));
    const auto bytes = w.finish();
    BitReader r(bytes);
    bool ok = true;
    for (auto v : words) ok = ok && r.get(m) == v;
    CHECK(ok);
  }
  BitReader empty(std::span<const std::uint8_t>{});
  CHECK_THROWS_AS(empty.get(1), BitOverrun);
}

TEST_CASE("split values reassemble and the high part codes near its entropy") {
  // Wide geometric values: m low bits raw, the rest through a table for sigma / 2^m.
  const double sigma = 64.0;
  const int m = lsb_flush_bits(sigma);
  const ValueTable hi_table = make_value_table(sigma / std::ldexp(1.0, m));
  std::mt19937_64 rng(12);
  std::geometric_distribution<long long> geo(-std::expm1(-1.0 / sigma));
  std::bernoulli_distribution sign(0.5);

  RansEncoder enc;
  BitWriter raw;
  std::vector<long long> values(200000);
  double ideal = 0.0;
  for (auto& v : values) {
    const long long mag = geo(rng);
    v = sign(rng) ? -mag : mag;
    const long long shifted = v + (1LL << m) / 2;
    const long long hi = shifted >> m;  // arithmetic shift: floor division
    const auto lo = static_cast<std::uint32_t>(shifted - (hi << m));
    CHECK(((hi << m) | lo) - (1LL << m) / 2 == v);
    ideal += encode_value(enc, raw, hi_table, hi);
    raw.put(lo, m);
    ideal += m;
  }
  const std::size_t raw_bits = raw.bit_count();
  const auto bytes = enc.finish();
  const auto raw_bytes = raw.finish();
  CHECK(8.0 * static_cast<double>(bytes.size()) + static_cast<double>(raw_bits) <= ideal + 64.0 + 32.0);

  RansDecoder dec(bytes);
  BitReader rr(raw_bytes);
  bool ok = true;
  for (long long v : values) {
    const long long hi = decode_value(dec, rr, hi_table);
    const auto lo = static_cast<long long>(rr.get(m));
    ok = ok && ((hi << m) | lo) - (1LL << m) / 2 == v;
  }
  CHECK(ok);
}

TEST_CASE("escapes round trip") {
  const ValueTable vt = make_value_table(0.8);
  RansEncoder enc;
  BitWriter raw;
  std::vector<long long> values;
  for (long long x = -300; x <= 300; ++x) values.push_back(x);
  for (long long x : values) encode_value(enc, raw, vt, x);
  const auto bytes = enc.finish();
  const auto raw_bytes = raw.finish();
  RansDecoder dec(bytes);
  BitReader rr(raw_bytes);
  for (long long x : values) CHECK(decode_value(dec, rr, vt) == x);
}
