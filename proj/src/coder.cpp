#include "epq/coder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

namespace epq {

namespace {

constexpr std::uint64_t kRansLow = std::uint64_t{1} << 31;

void build_lookup(CodingTable& t) {
  t.cum.assign(t.freq.size() + 1, 0);
  for (std::size_t s = 0; s < t.freq.size(); ++s) t.cum[s + 1] = t.cum[s] + t.freq[s];
  t.symbol.assign(t.total(), 0);
  for (std::size_t s = 0; s < t.freq.size(); ++s)
    std::fill(t.symbol.begin() + t.cum[s], t.symbol.begin() + t.cum[s + 1], static_cast<std::uint32_t>(s));
}

}  // namespace

CodingTable table_from_probs(std::span<const double> probs, int precision) {
  if (precision < 1 || precision > 24) throw std::invalid_argument("table_from_probs: precision must be in [1, 24]");
  const std::uint64_t total = std::uint64_t{1} << precision;
  if (probs.empty() || probs.size() > total) throw std::invalid_argument("table_from_probs: symbol count exceeds 2^precision");
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw std::invalid_argument("table_from_probs: negative probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("table_from_probs: probabilities must sum to 1");

  const std::size_t n = probs.size();
  CodingTable t;
  t.precision = precision;
  t.freq.resize(n);
  std::vector<double> remainder(n);
  std::uint64_t assigned = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const double exact = probs[s] * static_cast<double>(total);
    const auto fl = static_cast<std::uint32_t>(std::floor(exact));
    t.freq[s] = std::max<std::uint32_t>(fl, 1);
    remainder[s] = exact - t.freq[s];
    assigned += t.freq[s];
  }

  if (assigned < total) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++t.freq[order[i % n]];
  } else if (assigned > total) {
    // Pay for the 1-minimum bumps where a decrement costs the least.
    auto cost = [&](std::size_t s) { return probs[s] * std::log(static_cast<double>(t.freq[s]) / (t.freq[s] - 1)); };
    auto cheaper = [&](std::size_t a, std::size_t b) {
      const double ca = cost(a), cb = cost(b);
      return ca != cb ? ca > cb : a > b;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(cheaper)> heap(cheaper);
    for (std::size_t s = 0; s < n; ++s)
      if (t.freq[s] > 1) heap.push(s);
    for (; assigned > total; --assigned) {
      const std::size_t s = heap.top();
      heap.pop();
      --t.freq[s];
      if (t.freq[s] > 1) heap.push(s);
    }
  }
  build_lookup(t);
  return t;
}

double table_divergence(std::span<const double> probs, const CodingTable& table) {
  double kl = 0.0;
  const double total = table.total();
  for (std::size_t s = 0; s < probs.size(); ++s)
    if (probs[s] > 0.0) kl += probs[s] * std::log2(probs[s] * total / table.freq[s]);
  return kl;
}

double symbol_cost(const CodingTable& table, std::uint32_t symbol) {
  return table.precision - std::log2(static_cast<double>(table.freq[symbol]));
}

void RansEncoder::put(const CodingTable& table, std::uint32_t symbol) {
  if (symbol >= table.size()) throw std::out_of_range("RansEncoder::put: symbol outside table");
  queue_.push_back({&table, symbol});
}

std::vector<std::uint8_t> RansEncoder::finish() {
  std::vector<std::uint8_t> out;
  if (queue_.empty()) return out;
  std::vector<std::uint32_t> words;
  std::uint64_t x = kRansLow;
  for (auto it = queue_.rbegin(); it != queue_.rend(); ++it) {
    const CodingTable& t = *it->table;
    const std::uint64_t f = t.freq[it->symbol];
    const std::uint64_t limit = ((kRansLow >> t.precision) << 32) * f;
    if (x >= limit) {
      words.push_back(static_cast<std::uint32_t>(x));
      x >>= 32;
    }
    x = ((x / f) << t.precision) + (x % f) + t.cum[it->symbol];
  }
  queue_.clear();
  words.push_back(static_cast<std::uint32_t>(x));
  words.push_back(static_cast<std::uint32_t>(x >> 32));
  out.reserve(words.size() * 4);
  for (auto it = words.rbegin(); it != words.rend(); ++it)
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(*it >> (8 * b)));
  return out;
}

RansDecoder::RansDecoder(std::span<const std::uint8_t> bytes) : bytes_(bytes) {
  if (bytes_.empty()) return;
  if (bytes_.size() % 4 != 0) throw StreamError("entropy stream length is not a multiple of 4");
  const std::uint64_t hi = read_word();
  const std::uint64_t lo = read_word();
  state_ = (hi << 32) | lo;
  if (state_ < kRansLow) throw StreamError("entropy stream has an invalid initial state");
}

std::uint32_t RansDecoder::read_word() {
  if (pos_ + 4 > bytes_.size()) throw StreamError("entropy stream truncated");
  std::uint32_t w = 0;
  for (int b = 0; b < 4; ++b) w |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(b)]) << (8 * b);
  pos_ += 4;
  return w;
}

std::uint32_t RansDecoder::get(const CodingTable& table) {
  if (state_ == 0) throw StreamError("entropy stream exhausted");
  const std::uint32_t mask = table.total() - 1;
  const auto slot = static_cast<std::uint32_t>(state_ & mask);
  const std::uint32_t s = table.symbol[slot];
  state_ = table.freq[s] * (state_ >> table.precision) + slot - table.cum[s];
  if (state_ < kRansLow) state_ = (state_ << 32) | read_word();
  return s;
}

std::vector<std::uint8_t> encode_stream(std::span<const CodedSymbol> symbols, std::span<const CodingTable> tables) {
  RansEncoder enc;
  for (const CodedSymbol& cs : symbols) {
    if (cs.table >= tables.size()) throw std::out_of_range("encode_stream: unknown table id");
    enc.put(tables[cs.table], cs.symbol);
  }
  return enc.finish();
}

std::vector<std::uint32_t> decode_stream(std::span<const std::uint8_t> bytes, std::span<const std::uint32_t> table_ids,
                                         std::span<const CodingTable> tables) {
  RansDecoder dec(bytes);
  std::vector<std::uint32_t> out;
  out.reserve(table_ids.size());
  for (std::uint32_t id : table_ids) {
    if (id >= tables.size()) throw std::out_of_range("decode_stream: unknown table id");
    out.push_back(dec.get(tables[id]));
  }
  return out;
}

ValueTable make_value_table(double sigma, int precision) {
  ValueTable vt;
  vt.sigma = sigma;
  vt.x_max = table_x_max(sigma, precision);
  vt.escape_bits = std::max(0, static_cast<int>(std::lround(std::log2(golomb_optimal_M(sigma)))));
  const GeometricTable g = geometric_probs(sigma, vt.x_max);
  vt.table = table_from_probs(g.probs, precision);
  return vt;
}

std::vector<ValueTable> make_value_tables(const SigmaLadder& ladder, int precision) {
  std::vector<ValueTable> out;
  out.reserve(ladder.size());
  for (double s : ladder.nodes()) out.push_back(make_value_table(s, precision));
  return out;
}

double encode_value(RansEncoder& enc, BitWriter& raw, const ValueTable& vt, long long x) {
  const long long mag = x < 0 ? -x : x;
  if (mag <= vt.x_max) {
    const auto sym = static_cast<std::uint32_t>(x + vt.x_max);
    enc.put(vt.table, sym);
    return symbol_cost(vt.table, sym);
  }
  const auto sym = static_cast<std::uint32_t>(x < 0 ? 2 * vt.x_max + 1 : 2 * vt.x_max + 2);
  enc.put(vt.table, sym);
  const std::size_t before = raw.bit_count();
  golomb_encode(raw, static_cast<std::uint64_t>(mag - vt.x_max - 1), vt.escape_bits);
  return symbol_cost(vt.table, sym) + static_cast<double>(raw.bit_count() - before);
}

long long decode_value(RansDecoder& dec, BitReader& raw, const ValueTable& vt) {
  const auto sym = static_cast<long long>(dec.get(vt.table));
  if (sym <= 2 * vt.x_max) return sym - vt.x_max;
  const auto excess = static_cast<long long>(golomb_decode(raw, vt.escape_bits));
  const long long mag = vt.x_max + 1 + excess;
  return sym == 2 * vt.x_max + 1 ? -mag : mag;
}

}  // namespace epq
