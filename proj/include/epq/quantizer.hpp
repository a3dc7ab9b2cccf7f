#pragma once

// Scalar quantizers shaped by a quantization density q: the N nodes sit at
// Q^{-1}((i - 1/2) / N) where Q is the CDF of q.  Includes the
// distortion-optimal and rate-distortion-optimal densities for a source
// density rho and finite-N evaluation.

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "epq/epd.hpp"

namespace epq {

inline constexpr std::size_t kDensityGridPoints = 4097;
inline constexpr double kDensityDomainSigmas = 20.0;

/// Source density: an EPD, or a tabulated function with linear interpolation
/// (zero outside its table).
class SourceDensity {
 public:
  explicit SourceDensity(const EpdParams& p);
  /// Tabulates `f` on `points` equally spaced nodes of [lo, hi] and normalizes.
  static SourceDensity tabulate(const std::function<double(double)>& f, double lo, double hi,
                                std::size_t points = kDensityGridPoints);

  double pdf(double x) const;
  /// Mass in [a, b]; bounds may be infinite.
  double mass(double a, double b) const;
  /// Integral of (x - c)^2 rho over [a, b].
  double squared_error(double a, double b, double c) const;
  /// Bounds of the support (infinite for an EPD).
  double support_lo() const;
  double support_hi() const;
  /// Default finite working domain: mu +- 20 sigma for an EPD, the table range otherwise.
  double domain_lo() const;
  double domain_hi() const;
  const std::optional<EpdParams>& epd() const noexcept { return epd_; }

 private:
  SourceDensity() = default;
  // Integral of x^k rho over [a, b] for a tabulated density.
  double table_moment(int k, double a, double b) const;

  std::optional<EpdParams> epd_;
  std::vector<double> xs_;
  std::vector<double> rho_;
  std::vector<std::array<double, 3>> prefix_;  // running integrals of x^0, x^1, x^2
};

/// Quantization density on [lo, hi] with its CDF.  q is evaluated exactly;
/// Q is tabulated on a 4097-point grid and interpolated with a monotone
/// cubic, or evaluated in closed form for EPD-shaped densities.
class QuantDensity {
 public:
  /// Normalizes a nonnegative function on [lo, hi].  Throws std::domain_error
  /// if its integral is zero or not finite.  `cusp` marks a point where f has
  /// an unbounded slope; the grid cell around it is integrated adaptively.
  static QuantDensity from_function(std::function<double(double)> f, double lo, double hi,
                                    std::size_t points = kDensityGridPoints, std::optional<double> cusp = std::nullopt);
  /// EPD shape truncated to [lo, hi] and renormalized.
  static QuantDensity from_epd(const EpdParams& shape, double lo, double hi, std::size_t points = kDensityGridPoints);
  static QuantDensity uniform(double lo, double hi);

  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double pdf(double x) const;
  double cdf(double x) const;
  /// Inverse CDF for u in [0, 1].
  double icdf(double u) const;
  /// Integral of the unnormalized input over [lo, hi].
  double raw_integral() const noexcept { return raw_integral_; }
  const std::optional<EpdParams>& epd_shape() const noexcept { return shape_; }
  const std::vector<double>& grid() const noexcept { return xs_; }
  const std::vector<double>& grid_pdf() const noexcept { return qs_; }
  const std::vector<double>& grid_cdf() const noexcept { return cdfs_; }

 private:
  QuantDensity() = default;
  void tabulate(std::size_t points);

  double lo_ = 0.0;
  double hi_ = 1.0;
  double raw_integral_ = 1.0;
  std::function<double(double)> raw_;  // unnormalized
  std::optional<EpdParams> shape_;
  double shape_cdf_lo_ = 0.0;
  double shape_cdf_span_ = 1.0;
  std::vector<double> xs_, qs_, cdfs_;
  std::vector<double> slopes_;  // left and right Hermite slope per segment
};

class NormalizationError : public std::runtime_error {
 public:
  NormalizationError(const std::string& what, double achieved) : std::runtime_error(what), achieved_(achieved) {}
  double achieved_integral() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// rho^{1/(p+1)} normalized.  EPD sources map to an EPD with scale
/// sigma * (p + 1)^{1/kappa}; the domain defaults to the source's.
QuantDensity density_distortion_optimal(const SourceDensity& rho, double p);

struct RdDensity {
  QuantDensity density;
  double mu;  // normalization multiplier
};
/// Rate-distortion density for error power p in {1, 2} and rate weight lambda >= 0.
RdDensity density_rd(const SourceDensity& rho, double lambda, int p);
/// Positive root of q^3 + 2 lambda rho q^2 - mu rho = 0.
double rd_cubic_root(double rho, double lambda, double mu);

struct QuantizerN {
  std::vector<double> nodes;       // ascending
  std::vector<double> boundaries;  // N + 1 entries, first -inf, last +inf
  std::size_t size() const noexcept { return nodes.size(); }
};

/// Throws std::invalid_argument for N < 1.
QuantizerN nodes_from_density(const QuantDensity& q, std::size_t n);
/// N nodes evenly spread over [lo, hi] (cell centres), midpoint boundaries.
QuantizerN uniform_quantizer(double lo, double hi, std::size_t n);

/// 1-based index of the region containing x under the midpoint convention.
std::size_t quantize(const QuantizerN& quantizer, double x);
double dequantize(const QuantizerN& quantizer, std::size_t index);
/// Lattice index ceil(N Q(x)) clamped to [1, N].
std::size_t lattice_index(const QuantDensity& q, std::size_t n, double x);

RateDistortionPoint eval_rd(const SourceDensity& rho, const QuantizerN& quantizer);

/// Integral of rho / q^p over q's domain; divided by N^p it predicts the
/// distortion for large N.  Throws std::domain_error if q vanishes where rho does not.
double asymptotic_distortion(const SourceDensity& rho, const QuantDensity& q, double p);
/// Integral of rho lg(q / rho); plus lg N it predicts the rate for large N.
double asymptotic_entropy(const SourceDensity& rho, const QuantDensity& q);

}  // namespace epq
