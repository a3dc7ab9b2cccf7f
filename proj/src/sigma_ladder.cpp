#include "epq/sigma_ladder.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

namespace epq {

namespace {

constexpr double kLgE = std::numbers::log2e;

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(what);
}

// ln sinh(c) for c > 0 without overflow.
double log_sinh(double c) {
  if (c > 20.0) return c + std::log1p(-std::exp(-2.0 * c)) - std::numbers::ln2;
  return std::log(std::sinh(c));
}

}  // namespace

double geometric_prob(double sigma, long long x) {
  require_positive(sigma, "geometric_prob: sigma must be positive");
  if (x == 0) return -std::expm1(-0.5 / sigma);
  const double ax = std::abs(static_cast<double>(x));
  return 0.5 * std::exp(-(ax - 0.5) / sigma) * -std::expm1(-1.0 / sigma);
}

double geometric_tail(double sigma, int x_max) {
  require_positive(sigma, "geometric_tail: sigma must be positive");
  return 0.5 * std::exp(-(x_max + 0.5) / sigma);
}

GeometricTable geometric_probs(double sigma, int x_max) {
  require_positive(sigma, "geometric_probs: sigma must be positive");
  if (x_max < 1) throw std::invalid_argument("geometric_probs: x_max must be >= 1");
  GeometricTable t;
  t.sigma = sigma;
  t.x_max = x_max;
  t.probs.resize(static_cast<std::size_t>(2 * x_max + 3));
  for (int x = -x_max; x <= x_max; ++x) t.probs[t.symbol_of(x)] = geometric_prob(sigma, x);
  const double tail = geometric_tail(sigma, x_max);
  t.probs[t.escape_low()] = tail;
  t.probs[t.escape_high()] = tail;
  return t;
}

int table_x_max(double sigma, int precision, double min_count) {
  require_positive(sigma, "table_x_max: sigma must be positive");
  // p_x = c e^{-x/sigma} with c = sinh(1/(2 sigma)); solve p_x * 2^precision >= min_count.
  const double log_c = std::log(0.5) + std::log(-std::expm1(-1.0 / sigma)) + 0.5 / sigma;
  const double limit = sigma * (log_c + precision * std::numbers::ln2 - std::log(min_count));
  int x = static_cast<int>(std::floor(std::max(limit, 1.0)));
  while (x > 1 && geometric_prob(sigma, x) * std::ldexp(1.0, precision) < min_count) --x;
  return std::max(x, 1);
}

double cross_entropy(double sigma_p, double sigma_q) {
  require_positive(sigma_p, "cross_entropy: sigma_p must be positive");
  require_positive(sigma_q, "cross_entropy: sigma_q must be positive");
  const double p0 = -std::expm1(-0.5 / sigma_p);
  const double off_zero = std::exp(-0.5 / sigma_p);
  const double mean_abs = 0.5 / std::sinh(0.5 / sigma_p);
  const double ln_q0 = std::log(-std::expm1(-0.5 / sigma_q));
  const double ln_c = log_sinh(0.5 / sigma_q);
  return kLgE * (-p0 * ln_q0 - off_zero * ln_c + mean_abs / sigma_q);
}

double geometric_entropy(double sigma) { return cross_entropy(sigma, sigma); }

double mismatch_penalty(double sigma_p, double sigma_q) {
  return cross_entropy(sigma_p, sigma_q) - cross_entropy(sigma_p, sigma_p);
}

double penalty_coeff(double sigma) {
  require_positive(sigma, "penalty_coeff: sigma must be positive");
  const double h = 0.5 / sigma;
  const double num = 3.0 * std::exp(h) + std::exp(2.0 * h) + std::exp(3.0 * h) - 1.0;
  const double den = std::expm1(2.0 * h);
  return num / (8.0 * den * den * std::pow(sigma, 4)) * kLgE;
}

double cell_width(double sigma, double budget) {
  require_positive(budget, "cell_width: budget must be positive");
  return std::cbrt(24.0 * budget / penalty_coeff(sigma));
}

SigmaLadder::SigmaLadder(double budget, double sigma_start, double sigma_max)
    : budget_(budget), start_(sigma_start), max_(sigma_max) {
  require_positive(budget, "build_ladder: budget must be positive");
  require_positive(sigma_start, "build_ladder: start must be positive");
  if (!(sigma_max > sigma_start)) throw std::invalid_argument("build_ladder: sigma_max must exceed start");
  nodes_.push_back(sigma_start);
  while (nodes_.back() < sigma_max) nodes_.push_back(nodes_.back() + cell_width(nodes_.back(), budget));
}

std::size_t SigmaLadder::lookup(double sigma) const {
  const auto it = std::lower_bound(nodes_.begin(), nodes_.end(), sigma);
  if (it == nodes_.end()) return nodes_.size() - 1;
  if (it == nodes_.begin()) return 0;
  const auto hi = static_cast<std::size_t>(it - nodes_.begin());
  return (sigma - nodes_[hi - 1] <= nodes_[hi] - sigma) ? hi - 1 : hi;
}

SigmaLadder build_ladder(double sigma_start, double sigma_max, double budget) {
  return SigmaLadder(budget, sigma_start, sigma_max);
}

std::size_t ladder_lookup(const SigmaLadder& ladder, double sigma) { return ladder.lookup(sigma); }

double golomb_optimal_M(double sigma) {
  require_positive(sigma, "golomb_optimal_M: sigma must be positive");
  return kGolombCoefficient * sigma;
}

double golomb_optimal_coefficient(double sigma) {
  require_positive(sigma, "golomb_optimal_coefficient: sigma must be positive");
  auto cost = [sigma](double c) { return golomb_cost(sigma, c * sigma); };
  return boost::math::tools::brent_find_minima(cost, 0.05, 5.0, 50).first;
}

double golomb_cost(double sigma, double M) {
  require_positive(sigma, "golomb_cost: sigma must be positive");
  if (!(M >= 1.0)) throw std::invalid_argument("golomb_cost: M must be >= 1");
  return -1.0 / std::expm1(-M / sigma) + std::log2(M);
}

double one_sided_geometric_entropy(double sigma) {
  require_positive(sigma, "one_sided_geometric_entropy: sigma must be positive");
  const double one_minus_a = -std::expm1(-1.0 / sigma);
  const double a = std::exp(-1.0 / sigma);
  return -std::log2(one_minus_a) + a / one_minus_a * kLgE / sigma;
}

double golomb_penalty(double sigma, double M) { return golomb_cost(sigma, M) - one_sided_geometric_entropy(sigma); }

double golomb_pow2_penalty(double sigma, int* best_m) {
  double best = golomb_penalty(sigma, 1.0);
  int arg = 0;
  for (int m = 1; m < 48; ++m) {
    const double p = golomb_penalty(sigma, std::ldexp(1.0, m));
    if (p < best) {
      best = p;
      arg = m;
    }
  }
  if (best_m) *best_m = arg;
  return best;
}

double lsb_flush_penalty(double sigma, int m) {
  require_positive(sigma, "lsb_flush_penalty: sigma must be positive");
  if (m < 0) throw std::invalid_argument("lsb_flush_penalty: m must be >= 0");
  const double M = std::ldexp(1.0, m);
  const double one_minus_aM = -std::expm1(-M / sigma);
  const double aM = std::exp(-M / sigma);
  const double h = m + aM / one_minus_aM * M * kLgE / sigma - std::log2(one_minus_aM);
  return h - one_sided_geometric_entropy(sigma);
}

int lsb_flush_bits(double sigma) {
  require_positive(sigma, "lsb_flush_bits: sigma must be positive");
  return std::max(0, static_cast<int>(std::lround(std::log2(sigma / 8.0))));
}

void golomb_encode(BitWriter& out, std::uint64_t x, int m) {
  if (m < 0 || m > 32) throw std::invalid_argument("golomb_encode: m out of range");
  for (std::uint64_t q = x >> m; q > 0; --q) out.put_bit(true);
  out.put_bit(false);
  if (m > 0) out.put(static_cast<std::uint32_t>(x & ((std::uint64_t{1} << m) - 1)), m);
}

std::uint64_t golomb_decode(BitReader& in, int m) {
  if (m < 0 || m > 32) throw std::invalid_argument("golomb_decode: m out of range");
  std::uint64_t q = 0;
  while (in.get_bit()) ++q;
  const std::uint64_t r = m > 0 ? in.get(m) : 0;
  return (q << m) | r;
}

}  // namespace epq
