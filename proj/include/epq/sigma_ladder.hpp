#pragma once

// Width ladder for coding-table selection.  A quantized Laplace coefficient
// with normalized width S = sigma / step follows a two-sided geometric law;
// the ladder picks a finite set of S values so that coding with the nearest
// table costs little over the exact one.

#include <cstddef>
#include <cstdint>
#include <vector>

#include "epq/bitio.hpp"

namespace epq {

inline constexpr double kDefaultPenaltyBudget = 1.0 / 300.0;  // bits per value
inline constexpr double kDefaultSigmaStart = 0.1;
inline constexpr double kDefaultSigmaMax = 256.0;
inline constexpr double kGolombCoefficient = 0.66794;

/// Probabilities of x in [-x_max, x_max] followed by the two escape symbols
/// (below -x_max, above x_max).
struct GeometricTable {
  double sigma = 0.0;
  int x_max = 0;
  std::vector<double> probs;

  std::size_t symbol_count() const noexcept { return probs.size(); }
  std::size_t symbol_of(int x) const noexcept { return static_cast<std::size_t>(x + x_max); }
  std::size_t escape_low() const noexcept { return static_cast<std::size_t>(2 * x_max + 1); }
  std::size_t escape_high() const noexcept { return static_cast<std::size_t>(2 * x_max + 2); }
};

/// Probability of value x under the untruncated two-sided geometric law.
double geometric_prob(double sigma, long long x);
/// Mass of { x > x_max }, equal to that of { x < -x_max }.
double geometric_tail(double sigma, int x_max);
GeometricTable geometric_probs(double sigma, int x_max);

/// Largest x whose probability still gets at least `min_count` of the
/// 2^precision frequency budget (at least 1).
int table_x_max(double sigma, int precision = 14, double min_count = 4.0);

/// Expected code length in bits of the sigma_p law coded with sigma_q tables.
double cross_entropy(double sigma_p, double sigma_q);
double geometric_entropy(double sigma);
/// Mismatch cost h(p, q) - h(p, p).
double mismatch_penalty(double sigma_p, double sigma_q);

/// Second-order coefficient of the mismatch cost in the table width.
double penalty_coeff(double sigma);
/// Ladder spacing cbrt(24 E / D(sigma)).
double cell_width(double sigma, double budget);

class SigmaLadder {
 public:
  SigmaLadder(double budget, double sigma_start, double sigma_max);

  double budget() const noexcept { return budget_; }
  double sigma_start() const noexcept { return start_; }
  double sigma_max() const noexcept { return max_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Index of the nearest node; widths past the end map to the last node.
  std::size_t lookup(double sigma) const;

 private:
  double budget_;
  double start_;
  double max_;
  std::vector<double> nodes_;
};

/// Runs the spacing recurrence from sigma_start until a node reaches sigma_max.
SigmaLadder build_ladder(double sigma_start = kDefaultSigmaStart, double sigma_max = kDefaultSigmaMax,
                         double budget = kDefaultPenaltyBudget);
std::size_t ladder_lookup(const SigmaLadder& ladder, double sigma);

double golomb_optimal_M(double sigma);
/// Coefficient c minimising the Golomb cost at M = c * sigma, found numerically.
double golomb_optimal_coefficient(double sigma);
/// Golomb cost in bits for the one-sided geometric law a^x (a = e^{-1/sigma}).
double golomb_cost(double sigma, double M);
double golomb_penalty(double sigma, double M);
/// Best power-of-two Golomb parameter and its penalty.
double golomb_pow2_penalty(double sigma, int* best_m = nullptr);
/// Cost of writing the m low bits raw and entropy coding the rest.
double lsb_flush_penalty(double sigma, int m);
/// Flush width round(lg(sigma / 8)), clamped at 0.
int lsb_flush_bits(double sigma);
/// Entropy of the one-sided geometric law, the reference for the penalties.
double one_sided_geometric_entropy(double sigma);

/// Rice code: quotient x >> m in unary (ones closed by a zero), then m raw bits.
void golomb_encode(BitWriter& out, std::uint64_t x, int m);
std::uint64_t golomb_decode(BitReader& in, int m);

}  // namespace epq
