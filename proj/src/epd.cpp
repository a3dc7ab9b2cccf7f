#include "epq/epd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include <boost/math/special_functions/gamma.hpp>

namespace epq {
namespace {

constexpr double kLog2e = std::numbers::log2e;

// z = t^k / k, the argument of the incomplete gamma functions.
double gamma_arg(double kappa, double t) { return std::pow(t, kappa) / kappa; }

// Integral of t^m exp(-t^k / k) over [t1, t2], 0 <= t1 <= t2 <= inf.
//   = k^((m+1)/k - 1) Gamma(s) [P(s, z2) - P(s, z1)],  s = (m + 1) / k.
// The difference is taken on the upper function once past the mode to keep
// tail cells accurate.
double half_moment(double kappa, int m, double t1, double t2) {
  if (!(t2 > t1)) return 0.0;
  const double s = (m + 1) / kappa;
  const double scale =
      std::exp(((m + 1) / kappa - 1.0) * std::log(kappa) + boost::math::lgamma(s));
  const double z1 = gamma_arg(kappa, t1);
  const double z2 = std::isinf(t2) ? std::numeric_limits<double>::infinity() : gamma_arg(kappa, t2);
  double diff;
  if (z1 > s) {
    const double q1 = boost::math::gamma_q(s, z1);
    const double q2 = std::isinf(z2) ? 0.0 : boost::math::gamma_q(s, z2);
    diff = q1 - q2;
  } else {
    const double p1 = z1 == 0.0 ? 0.0 : boost::math::gamma_p(s, z1);
    const double p2 = std::isinf(z2) ? 1.0 : boost::math::gamma_p(s, z2);
    diff = p2 - p1;
  }
  return scale * diff;
}

// Integral of (x - mu)^m rho(x) over [a, b].
double moment_about_mu(const EpdParams& p, int m, double a, double b) {
  if (!(b > a)) return 0.0;
  const double c = epd_normalization(p.kappa());
  const double sigma_m = std::pow(p.sigma(), m);
  double total = 0.0;
  if (b > p.mu()) {  // right half
    const double t1 = std::max(0.0, (a - p.mu()) / p.sigma());
    const double t2 = (b - p.mu()) / p.sigma();
    total += half_moment(p.kappa(), m, t1, t2);
  }
  if (a < p.mu()) {  // left half, mirrored
    const double t1 = std::max(0.0, (p.mu() - b) / p.sigma());
    const double t2 = (p.mu() - a) / p.sigma();
    total += (m % 2 == 0 ? 1.0 : -1.0) * half_moment(p.kappa(), m, t1, t2);
  }
  return c * sigma_m * total;
}

}  // namespace

EpdParams::EpdParams(double kappa, double sigma, double mu) : kappa_(kappa), sigma_(sigma), mu_(mu) {
  if (!std::isfinite(kappa) || kappa <= 0.0) throw std::invalid_argument("EPD kappa must be finite and positive");
  if (!std::isfinite(sigma) || sigma <= 0.0) throw std::invalid_argument("EPD sigma must be finite and positive");
  if (!std::isfinite(mu)) throw std::invalid_argument("EPD mu must be finite");
}

double epd_normalization(double kappa) {
  // k^(-1/k) / (2 Gamma(1 + 1/k)), in log space so small k does not overflow.
  return 0.5 * std::exp(-std::log(kappa) / kappa - boost::math::lgamma(1.0 + 1.0 / kappa));
}

double epd_pdf(const EpdParams& p, double x) {
  const double t = std::abs(x - p.mu()) / p.sigma();
  return epd_normalization(p.kappa()) / p.sigma() * std::exp(-gamma_arg(p.kappa(), t));
}

double epd_log2_pdf(const EpdParams& p, double x) {
  const double t = std::abs(x - p.mu()) / p.sigma();
  return std::log2(epd_normalization(p.kappa()) / p.sigma()) - gamma_arg(p.kappa(), t) * kLog2e;
}

double epd_cdf(const EpdParams& p, double x) {
  const double t = std::abs(x - p.mu()) / p.sigma();
  if (t == 0.0) return 0.5;
  const double upper = 0.5 * boost::math::gamma_q(1.0 / p.kappa(), gamma_arg(p.kappa(), t));
  return x < p.mu() ? upper : 1.0 - upper;
}

double epd_mass(const EpdParams& p, double a, double b) { return moment_about_mu(p, 0, a, b); }

double epd_icdf(const EpdParams& p, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("epd_icdf: probability must lie in (0, 1)");
  if (u == 0.5) return p.mu();
  const double a = 1.0 / p.kappa();
  // Upper-tail mass beyond |x - mu| is 2 min(u, 1 - u); invert on whichever
  // regularized gamma keeps full precision.
  double z;
  if (u < 0.5) {
    z = boost::math::gamma_q_inv(a, 2.0 * u);
  } else {
    z = boost::math::gamma_p_inv(a, 2.0 * u - 1.0);
  }
  const double t = std::pow(p.kappa() * z, 1.0 / p.kappa());
  return u < 0.5 ? p.mu() - p.sigma() * t : p.mu() + p.sigma() * t;
}

double epd_variance(const EpdParams& p) {
  const double k = p.kappa();
  const double c = std::exp(2.0 / k * std::log(k) + boost::math::lgamma(3.0 / k) - boost::math::lgamma(1.0 / k));
  return c * p.sigma() * p.sigma();
}

double epd_diff_entropy(const EpdParams& p) {
  const double k = p.kappa();
  const double lg_term = (1.0 - 1.0 / k) * std::log2(k) - 1.0 - boost::math::lgamma(1.0 / k) * kLog2e;
  return 1.0 / (k * std::numbers::ln2) - lg_term + std::log2(p.sigma());
}

double epd_squared_error(const EpdParams& p, double a, double b, double c) {
  const double d = c - p.mu();
  const double m0 = moment_about_mu(p, 0, a, b);
  const double m1 = moment_about_mu(p, 1, a, b);
  const double m2 = moment_about_mu(p, 2, a, b);
  return std::max(0.0, m2 - 2.0 * d * m1 + d * d * m0);
}

double epd_sigma_estimate(std::span<const double> samples, double kappa, double mu) {
  if (samples.empty()) throw std::invalid_argument("epd_sigma_estimate: empty sample");
  double acc = 0.0;
  for (double x : samples) acc += std::pow(std::abs(x - mu), kappa);
  return std::pow(acc / static_cast<double>(samples.size()), 1.0 / kappa);
}

double epd_mean_log2_likelihood(std::span<const double> samples, const EpdParams& p) {
  double acc = 0.0;
  for (double x : samples) acc += gamma_arg(p.kappa(), std::abs(x - p.mu()) / p.sigma());
  return std::log2(epd_normalization(p.kappa()) / p.sigma()) - kLog2e * acc / static_cast<double>(samples.size());
}

std::vector<double> epd_kappa_grid() {
  std::vector<double> grid;
  for (int i = 0; i <= 58; ++i) grid.push_back(0.10 + 0.05 * i);
  return grid;
}

EpdFit epd_mle(std::span<const double> samples, MuPolicy mu_policy, std::optional<double> fixed_kappa) {
  if (samples.size() < 2) throw DegenerateSampleError("epd_mle: need at least two samples");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw DegenerateSampleError("epd_mle: all samples are equal");

  double mu = 0.0;
  switch (mu_policy) {
    case MuPolicy::Zero:
      break;
    case MuPolicy::Mean:
      mu = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
      break;
    case MuPolicy::Median: {
      std::vector<double> copy(samples.begin(), samples.end());
      const auto mid = copy.begin() + static_cast<std::ptrdiff_t>(copy.size() / 2);
      std::nth_element(copy.begin(), mid, copy.end());
      mu = *mid;
      if (copy.size() % 2 == 0) mu = 0.5 * (mu + *std::max_element(copy.begin(), mid));
      break;
    }
  }

  auto fit_at = [&](double kappa) {
    const double sigma = epd_sigma_estimate(samples, kappa, mu);
    if (!(sigma > 0.0)) throw DegenerateSampleError("epd_mle: all samples coincide with the location");
    EpdParams params(kappa, sigma, mu);
    return EpdFit{params, epd_mean_log2_likelihood(samples, params)};
  };

  if (fixed_kappa) return fit_at(*fixed_kappa);

  const auto grid = epd_kappa_grid();
  EpdFit best = fit_at(grid.front());
  for (double k : grid) {
    EpdFit f = fit_at(k);
    if (f.mean_log2_likelihood > best.mean_log2_likelihood) best = f;
  }

  // Golden-section refinement around the best grid node.
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = std::max(grid.front(), best.params.kappa() - 0.05);
  double b = std::min(grid.back(), best.params.kappa() + 0.05);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  EpdFit fc = fit_at(c), fd = fit_at(d);
  while (b - a > 1e-3) {
    if (fc.mean_log2_likelihood > fd.mean_log2_likelihood) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = fit_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = fit_at(d);
    }
  }
  for (const EpdFit& f : {fc, fd})
    if (f.mean_log2_likelihood > best.mean_log2_likelihood) best = f;
  return best;
}

double uniform_from_bits(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

std::vector<double> epd_sample(const EpdParams& p, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<double> out(n);
  for (double& x : out) x = epd_icdf(p, uniform_from_bits(gen()));
  return out;
}

double laplace_quant_entropy(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("laplace_quant_entropy: delta must be positive");
  // p_0 = 1 - e^(-delta/2), p_i = e^(-|i| delta) sinh(delta/2); summed in
  // closed form as geometric series, written with e^(-delta) to stay finite.
  const double one_minus_a = -std::expm1(-delta);
  const double lg_sinh = 0.5 * delta * kLog2e + std::log2(0.5 * one_minus_a);
  const double sinh_a = 0.5 * std::exp(-0.5 * delta) * one_minus_a;  // sinh(delta/2) e^(-delta)
  double h = 2.0 * sinh_a * (delta * kLog2e / (one_minus_a * one_minus_a) - lg_sinh / one_minus_a);
  const double p0 = -std::expm1(-0.5 * delta);
  if (p0 < 1.0) h -= p0 * std::log2(p0);
  return std::max(0.0, h);
}

double laplace_quant_mse(double sigma, double q) {
  if (!(sigma > 0.0) || !(q > 0.0)) throw std::invalid_argument("laplace_quant_mse: sigma and q must be positive");
  const double r = q / (2.0 * sigma);
  if (r < 1e-2) {
    // 1 - r / sinh(r) by its series; the direct form cancels here.
    const double r2 = r * r;
    return 2.0 * sigma * sigma * r2 * (1.0 / 6.0 - r2 * (7.0 / 360.0 - r2 * 31.0 / 15120.0));
  }
  return sigma * (2.0 * sigma - q / std::sinh(r));
}

RateDistortionPoint epd_quant_rd_numeric(const EpdParams& p, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("epd_quant_rd_numeric: q must be positive");
  // Radius beyond which each tail holds < 5e-13.
  const double z = boost::math::gamma_q_inv(1.0 / p.kappa(), 1e-12);
  const double radius = p.sigma() * std::pow(p.kappa() * z, 1.0 / p.kappa());
  const auto first = static_cast<long long>(std::floor((p.mu() - radius) / q));
  const auto last = static_cast<long long>(std::ceil((p.mu() + radius) / q));
  const double inf = std::numeric_limits<double>::infinity();

  RateDistortionPoint rd;
  for (long long i = first; i <= last; ++i) {
    const double lo = i == first ? -inf : (static_cast<double>(i) - 0.5) * q;
    const double hi = i == last ? inf : (static_cast<double>(i) + 0.5) * q;
    const double node = static_cast<double>(i) * q;
    const double mass = epd_mass(p, lo, hi);
    if (mass > 0.0) rd.rate -= mass * std::log2(mass);
    rd.distortion += epd_squared_error(p, lo, hi, node);
  }
  rd.rate = std::max(0.0, rd.rate);
  return rd;
}

double smooth_rate_approx(double entropy_bits, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("smooth_rate_approx: q must be positive");
  const double y = entropy_bits - std::log2(q);
  if (y > 0.0) return y + 0.5 * std::log2(1.0 + std::exp2(-2.0 * y));
  return 0.5 * std::log2(1.0 + std::exp2(2.0 * y));
}

std::vector<CdfDeviation> cdf_diagnostic(std::span<const double> samples, const EpdParams& p) {
  if (samples.size() < 10) throw std::invalid_argument("cdf_diagnostic: need at least 10 samples");
  std::vector<double> u(samples.size());
  std::transform(samples.begin(), samples.end(), u.begin(), [&](double x) { return epd_cdf(p, x); });
  std::sort(u.begin(), u.end());
  const double denom = static_cast<double>(u.size() + 1);
  std::vector<CdfDeviation> out(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double ideal = static_cast<double>(i + 1) / denom;
    out[i] = {ideal, u[i] - ideal};
  }
  return out;
}

}  // namespace epq
