#pragma once

// Static-table rANS over small integer alphabets, with per-symbol table
// switching.  The state is 64 bits wide and renormalizes 32 bits at a time.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "epq/bitio.hpp"
#include "epq/sigma_ladder.hpp"

namespace epq {

inline constexpr int kDefaultPrecision = 14;

class StreamError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CodingTable {
  int precision = kDefaultPrecision;
  std::vector<std::uint32_t> freq;
  std::vector<std::uint32_t> cum;     // cum[s] = sum of freq[0..s)
  std::vector<std::uint32_t> symbol;  // slot -> symbol, 2^precision entries

  std::size_t size() const noexcept { return freq.size(); }
  std::uint32_t total() const noexcept { return std::uint32_t{1} << precision; }
};

/// Largest-remainder rounding of `probs` to integer frequencies summing to
/// 2^precision, each at least 1.  Throws std::invalid_argument when the
/// probabilities do not sum to 1 within 1e-9 or there are too many symbols.
CodingTable table_from_probs(std::span<const double> probs, int precision = kDefaultPrecision);

/// KL(probs || table) in bits.
double table_divergence(std::span<const double> probs, const CodingTable& table);

class RansEncoder {
 public:
  void put(const CodingTable& table, std::uint32_t symbol);
  std::size_t pending() const noexcept { return queue_.size(); }
  /// Encodes everything queued so far and resets the encoder.
  std::vector<std::uint8_t> finish();

 private:
  struct Item {
    const CodingTable* table;
    std::uint32_t symbol;
  };
  std::vector<Item> queue_;
};

class RansDecoder {
 public:
  /// An empty span decodes an empty stream.
  explicit RansDecoder(std::span<const std::uint8_t> bytes);
  std::uint32_t get(const CodingTable& table);

 private:
  std::uint32_t read_word();
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::uint64_t state_ = 0;
};

struct CodedSymbol {
  std::uint32_t symbol;
  std::uint32_t table;
};

std::vector<std::uint8_t> encode_stream(std::span<const CodedSymbol> symbols, std::span<const CodingTable> tables);
std::vector<std::uint32_t> decode_stream(std::span<const std::uint8_t> bytes, std::span<const std::uint32_t> table_ids,
                                         std::span<const CodingTable> tables);

/// Ideal cost of `symbol` under `table`, lg(2^precision / freq).
double symbol_cost(const CodingTable& table, std::uint32_t symbol);

/// Coding table for one ladder node: central values plus two escapes whose
/// excess |x| - x_max - 1 goes to the raw channel as a Rice code.
struct ValueTable {
  double sigma = 0.0;
  int x_max = 0;
  int escape_bits = 0;
  CodingTable table;
};

ValueTable make_value_table(double sigma, int precision = kDefaultPrecision);
std::vector<ValueTable> make_value_tables(const SigmaLadder& ladder, int precision = kDefaultPrecision);

/// Entropy-codes x with `vt` and returns the ideal cost in bits, including raw escape bits.
double encode_value(RansEncoder& enc, BitWriter& raw, const ValueTable& vt, long long x);
long long decode_value(RansDecoder& dec, BitReader& raw, const ValueTable& vt);

}  // namespace epq
