#pragma once

// Exponential power distribution (generalized Gaussian)
//
//   rho(x) = C_k / sigma * exp(-(|x - mu| / sigma)^k / k),
//   C_k    = k^(-1/k) / (2 Gamma(1 + 1/k)).
//
// k = 1 is the Laplace distribution exp(-|x|/sigma) / (2 sigma), k = 2 the
// Gaussian with standard deviation sigma.  Everything here is a pure function
// of its arguments.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace epq {

class EpdParams {
 public:
  /// Throws std::invalid_argument unless kappa and sigma are finite and > 0
  /// and mu is finite.
  EpdParams(double kappa, double sigma, double mu = 0.0);

  double kappa() const noexcept { return kappa_; }
  double sigma() const noexcept { return sigma_; }
  double mu() const noexcept { return mu_; }

  EpdParams with_sigma(double sigma) const { return {kappa_, sigma, mu_}; }
  EpdParams with_mu(double mu) const { return {kappa_, sigma_, mu}; }

  friend bool operator==(const EpdParams&, const EpdParams&) = default;

 private:
  double kappa_;
  double sigma_;
  double mu_;
};

struct RateDistortionPoint {
  double rate = 0.0;        // bits per value
  double distortion = 0.0;  // mean squared error
};

/// Sample set with fewer than two distinct values.
class DegenerateSampleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double epd_normalization(double kappa);  // C_k
double epd_pdf(const EpdParams& p, double x);
double epd_log2_pdf(const EpdParams& p, double x);
double epd_cdf(const EpdParams& p, double x);
/// Probability mass in [a, b], computed without cancellation in the tails.
double epd_mass(const EpdParams& p, double a, double b);
/// Throws std::domain_error for u outside (0, 1).
double epd_icdf(const EpdParams& p, double u);
double epd_variance(const EpdParams& p);
/// Differential entropy in bits.
double epd_diff_entropy(const EpdParams& p);

/// Integral of (x - c)^2 rho(x) over [a, b]; a and b may be infinite.
double epd_squared_error(const EpdParams& p, double a, double b, double c);

enum class MuPolicy { Zero, Mean, Median };

struct EpdFit {
  EpdParams params;
  double mean_log2_likelihood;  // bits per value
};

/// sigma^k = mean |x - mu|^k.
double epd_sigma_estimate(std::span<const double> samples, double kappa, double mu);
double epd_mean_log2_likelihood(std::span<const double> samples, const EpdParams& p);

/// Maximum likelihood fit.  With fixed_kappa unset, kappa is chosen on the
/// grid 0.10, 0.15, ..., 3.00 and refined by golden-section search to 1e-3.
/// Throws DegenerateSampleError when all samples are equal.
EpdFit epd_mle(std::span<const double> samples, MuPolicy mu_policy = MuPolicy::Zero,
               std::optional<double> fixed_kappa = std::nullopt);

/// The coarse kappa grid used by epd_mle.
std::vector<double> epd_kappa_grid();

/// Maps 64 random bits to a uniform variate strictly inside (0, 1).
double uniform_from_bits(std::uint64_t bits) noexcept;

/// n i.i.d. draws by inverse CDF; mt19937_64 seeded with `seed`.
std::vector<double> epd_sample(const EpdParams& p, std::size_t n, std::uint64_t seed);

/// Entropy in bits of round(x / q) for a Laplace variable, delta = q / sigma.
double laplace_quant_entropy(double delta);

/// Mean squared error of step-q uniform quantization of a Laplace variable.
double laplace_quant_mse(double sigma, double q);

/// Rate and MSE of round(x / q) * q for an arbitrary EPD, summed cell by cell
/// until the residual tail probability drops below 1e-12.
RateDistortionPoint epd_quant_rd_numeric(const EpdParams& p, double q);

/// Smooth positive stand-in for max(0, H - lg q): lg(1 + 4^(H - lg q)) / 2.
double smooth_rate_approx(double entropy_bits, double q);

struct CdfDeviation {
  double quantile;   // i / (n + 1)
  double deviation;  // F(x_(i)) - i / (n + 1)
};

/// Probability-integral-transform diagnostic: sorted model CDF values minus
/// the ideal diagonal.  Requires at least 10 samples.
std::vector<CdfDeviation> cdf_diagnostic(std::span<const double> samples, const EpdParams& p);

}  // namespace epq
