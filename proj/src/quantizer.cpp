#include "epq/quantizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include <boost/math/tools/roots.hpp>

namespace epq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 5-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 5> kGlNodes{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                         0.9061798459386640};
constexpr std::array<double, 5> kGlWeights{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                           0.2369268850561891, 0.2369268850561891};

template <typename F>
double gauss_legendre(const F& f, double a, double b) {
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  double acc = 0.0;
  for (std::size_t i = 0; i < kGlNodes.size(); ++i) acc += kGlWeights[i] * f(mid + half * kGlNodes[i]);
  return acc * half;
}

// Splits a cell until the halves agree with the whole to within `tol`.
template <typename F>
double cell_integral(const F& f, double a, double b, double tol, int depth = 40) {
  const double m = 0.5 * (a + b);
  const double whole = gauss_legendre(f, a, b), left = gauss_legendre(f, a, m), right = gauss_legendre(f, m, b);
  if (depth == 0 || std::abs(left + right - whole) <= tol) return left + right;
  return cell_integral(f, a, m, tol, depth - 1) + cell_integral(f, m, b, tol, depth - 1);
}

// Gauss-Legendre on a grid cell; the cell touching `cusp` (an EPD peak,
// where kappa < 1 makes the slope unbounded) is refined adaptively.
template <typename F>
double grid_cell(const F& f, double a, double b, std::optional<double> cusp) {
  if (cusp && a <= *cusp && *cusp <= b) {
    const double scale = gauss_legendre([&](double x) { return std::abs(f(x)); }, a, b);
    return cell_integral(f, a, b, 1e-15 * scale);
  }
  return gauss_legendre(f, a, b);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> xs(n);
  const double h = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) xs[i] = lo + h * static_cast<double>(i);
  xs.back() = hi;
  return xs;
}

// Integral over [a, b] of x^k times a linear function with end values ra, rb
// (Simpson is exact up to cubics).
std::array<double, 3> linear_moments(double a, double b, double ra, double rb) {
  const double m = 0.5 * (a + b), rm = 0.5 * (ra + rb), w = (b - a) / 6.0;
  return {w * (ra + 4 * rm + rb), w * (a * ra + 4 * m * rm + b * rb), w * (a * a * ra + 4 * m * m * rm + b * b * rb)};
}

void check_domain(double lo, double hi, std::size_t points) {
  if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw std::invalid_argument("density domain must be finite with lo < hi");
  if (points < 3) throw std::invalid_argument("density grid needs at least 3 points");
}

}  // namespace

// ---------------------------------------------------------------- source ---

SourceDensity::SourceDensity(const EpdParams& p) : epd_(p) {}

SourceDensity SourceDensity::tabulate(const std::function<double(double)>& f, double lo, double hi, std::size_t points) {
  check_domain(lo, hi, points);
  SourceDensity d;
  d.xs_ = linspace(lo, hi, points);
  d.rho_.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double v = f(d.xs_[i]);
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::domain_error("tabulated density must be finite and nonnegative");
    d.rho_[i] = v;
  }
  double total = 0.0;
  for (std::size_t i = 1; i < points; ++i) total += 0.5 * (d.rho_[i - 1] + d.rho_[i]) * (d.xs_[i] - d.xs_[i - 1]);
  if (!(total > 0.0)) throw std::domain_error("tabulated density has zero integral");
  for (double& v : d.rho_) v /= total;
  d.prefix_.assign(points, {0.0, 0.0, 0.0});
  for (std::size_t i = 1; i < points; ++i) {
    const auto seg = linear_moments(d.xs_[i - 1], d.xs_[i], d.rho_[i - 1], d.rho_[i]);
    for (int k = 0; k < 3; ++k) d.prefix_[i][static_cast<std::size_t>(k)] = d.prefix_[i - 1][static_cast<std::size_t>(k)] + seg[static_cast<std::size_t>(k)];
  }
  return d;
}

double SourceDensity::pdf(double x) const {
  if (epd_) return epd_pdf(*epd_, x);
  if (x < xs_.front() || x > xs_.back()) return 0.0;
  const double h = xs_[1] - xs_[0];
  const auto i = std::min(static_cast<std::size_t>((x - xs_.front()) / h), xs_.size() - 2);
  const double t = (x - xs_[i]) / h;
  return (1.0 - t) * rho_[i] + t * rho_[i + 1];
}

double SourceDensity::table_moment(int k, double a, double b) const {
  a = std::max(a, xs_.front());
  b = std::min(b, xs_.back());
  if (!(a < b)) return 0.0;
  const auto upto = [&](double t) {
    const double h = xs_[1] - xs_[0];
    const auto i = std::min(static_cast<std::size_t>((t - xs_.front()) / h), xs_.size() - 2);
    return prefix_[i][static_cast<std::size_t>(k)] + linear_moments(xs_[i], t, rho_[i], pdf(t))[static_cast<std::size_t>(k)];
  };
  return upto(b) - upto(a);
}

double SourceDensity::mass(double a, double b) const {
  if (epd_) return epd_mass(*epd_, a, b);
  return table_moment(0, a, b);
}

double SourceDensity::squared_error(double a, double b, double c) const {
  if (epd_) return epd_squared_error(*epd_, a, b, c);
  return std::max(0.0, table_moment(2, a, b) - 2.0 * c * table_moment(1, a, b) + c * c * table_moment(0, a, b));
}

double SourceDensity::support_lo() const { return epd_ ? -kInf : xs_.front(); }
double SourceDensity::support_hi() const { return epd_ ? kInf : xs_.back(); }
double SourceDensity::domain_lo() const { return epd_ ? epd_->mu() - kDensityDomainSigmas * epd_->sigma() : xs_.front(); }
double SourceDensity::domain_hi() const { return epd_ ? epd_->mu() + kDensityDomainSigmas * epd_->sigma() : xs_.back(); }

// --------------------------------------------------------------- density ---

QuantDensity QuantDensity::from_function(std::function<double(double)> f, double lo, double hi, std::size_t points,
                                         std::optional<double> cusp) {
  check_domain(lo, hi, points);
  QuantDensity q;
  q.lo_ = lo;
  q.hi_ = hi;
  q.raw_ = std::move(f);
  q.xs_ = linspace(lo, hi, points);
  std::vector<double> seg(points - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < points; ++i) {
    seg[i] = grid_cell(q.raw_, q.xs_[i], q.xs_[i + 1], cusp);
    total += seg[i];
  }
  if (!(total > 0.0) || !std::isfinite(total)) throw std::domain_error("quantization density is not normalizable");
  q.raw_integral_ = total;
  q.qs_.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double v = q.raw_(q.xs_[i]);
    if (!(v >= 0.0)) throw std::domain_error("quantization density must be nonnegative");
    q.qs_[i] = v / total;
  }
  q.cdfs_.assign(points, 0.0);
  for (std::size_t i = 1; i < points; ++i) q.cdfs_[i] = q.cdfs_[i - 1] + seg[i - 1] / total;
  q.cdfs_.back() = 1.0;
  q.tabulate(points);
  return q;
}

QuantDensity QuantDensity::from_epd(const EpdParams& shape, double lo, double hi, std::size_t points) {
  check_domain(lo, hi, points);
  QuantDensity q;
  q.lo_ = lo;
  q.hi_ = hi;
  q.shape_ = shape;
  q.raw_ = [shape](double x) { return epd_pdf(shape, x); };
  q.raw_integral_ = epd_mass(shape, lo, hi);
  q.shape_cdf_lo_ = epd_cdf(shape, lo);
  q.shape_cdf_span_ = q.raw_integral_;
  q.xs_ = linspace(lo, hi, points);
  q.qs_.resize(points);
  q.cdfs_.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    q.qs_[i] = epd_pdf(shape, q.xs_[i]) / q.raw_integral_;
    q.cdfs_[i] = epd_mass(shape, lo, q.xs_[i]) / q.raw_integral_;
  }
  q.cdfs_.back() = 1.0;
  q.tabulate(points);
  return q;
}

QuantDensity QuantDensity::uniform(double lo, double hi) {
  return from_function([](double) { return 1.0; }, lo, hi, 3);
}

void QuantDensity::tabulate(std::size_t points) {
  // Hermite slopes from q, limited so every segment stays monotone.
  slopes_.assign(2 * (points - 1), 0.0);
  for (std::size_t k = 0; k + 1 < points; ++k) {
    const double h = xs_[k + 1] - xs_[k];
    const double secant = (cdfs_[k + 1] - cdfs_[k]) / h;
    double dl = qs_[k], dr = qs_[k + 1];
    if (secant <= 0.0) {
      dl = dr = 0.0;
    } else {
      const double a = dl / secant, b = dr / secant, r = a * a + b * b;
      if (r > 9.0) {
        const double tau = 3.0 / std::sqrt(r);
        dl = tau * a * secant;
        dr = tau * b * secant;
      }
    }
    slopes_[2 * k] = dl;
    slopes_[2 * k + 1] = dr;
  }
}

namespace {

double hermite(double y0, double y1, double d0, double d1, double h, double t) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1;
}

}  // namespace

double QuantDensity::pdf(double x) const {
  if (x < lo_ || x > hi_) return 0.0;
  return raw_(x) / raw_integral_;
}

double QuantDensity::cdf(double x) const {
  if (x <= lo_) return 0.0;
  if (x >= hi_) return 1.0;
  if (shape_) return std::clamp(epd_mass(*shape_, lo_, x) / shape_cdf_span_, 0.0, 1.0);
  const double h = xs_[1] - xs_[0];
  const auto k = std::min(static_cast<std::size_t>((x - lo_) / h), xs_.size() - 2);
  const double t = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
  return std::clamp(hermite(cdfs_[k], cdfs_[k + 1], slopes_[2 * k], slopes_[2 * k + 1], xs_[k + 1] - xs_[k], t), 0.0, 1.0);
}

double QuantDensity::icdf(double u) const {
  if (!(u >= 0.0 && u <= 1.0)) throw std::domain_error("QuantDensity::icdf: u must lie in [0, 1]");
  if (u == 0.0) return lo_;
  if (u == 1.0) return hi_;
  if (shape_) {
    // Mirror the upper half through mu so symmetric shapes give symmetric nodes.
    if (u <= 0.5) return std::clamp(epd_icdf(*shape_, shape_cdf_lo_ + u * shape_cdf_span_), lo_, hi_);
    const double mu = shape_->mu();
    const double s = epd_cdf(*shape_, 2.0 * mu - hi_) + (1.0 - u) * shape_cdf_span_;
    if (!(s > 0.0)) return hi_;
    return std::clamp(2.0 * mu - epd_icdf(*shape_, s), lo_, hi_);
  }
  const auto it = std::upper_bound(cdfs_.begin(), cdfs_.end(), u);
  const std::size_t k = std::min(static_cast<std::size_t>(std::max<std::ptrdiff_t>(it - cdfs_.begin(), 1)) - 1, xs_.size() - 2);
  const double h = xs_[k + 1] - xs_[k];
  double a = 0.0, b = 1.0;
  for (int iter = 0; iter < 64; ++iter) {
    const double m = 0.5 * (a + b);
    if (hermite(cdfs_[k], cdfs_[k + 1], slopes_[2 * k], slopes_[2 * k + 1], h, m) < u) {
      a = m;
    } else {
      b = m;
    }
  }
  return xs_[k] + 0.5 * (a + b) * h;
}

// ------------------------------------------------------ optimal densities ---

namespace {

std::optional<double> peak_of(const SourceDensity& rho) {
  if (const auto& e = rho.epd()) return e->mu();
  return std::nullopt;
}

}  // namespace

QuantDensity density_distortion_optimal(const SourceDensity& rho, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("density_distortion_optimal: p must be >= 1");
  const double lo = rho.domain_lo(), hi = rho.domain_hi();
  if (const auto& e = rho.epd()) {
    const EpdParams shape(e->kappa(), e->sigma() * std::pow(p + 1.0, 1.0 / e->kappa()), e->mu());
    return QuantDensity::from_epd(shape, lo, hi);
  }
  const double power = 1.0 / (p + 1.0);
  return QuantDensity::from_function([rho, power](double x) { return std::pow(rho.pdf(x), power); }, lo, hi);
}

double rd_cubic_root(double rho, double lambda, double mu) {
  if (rho <= 0.0 || mu <= 0.0) return 0.0;
  const double b = 2.0 * lambda * rho, c = mu * rho;
  auto f = [b, c](double q) { return std::make_tuple(q * q * q + b * q * q - c, 3 * q * q + 2 * b * q); };
  // f(0) < 0 and f(cbrt(c)) >= 0 bracket the single positive root.
  const double hi = std::cbrt(c);
  const double guess = std::min(hi, std::sqrt(c / std::max(b, 1e-300)));
  return boost::math::tools::newton_raphson_iterate(f, guess, 0.0, hi, 52);
}

RdDensity density_rd(const SourceDensity& rho, double lambda, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("density_rd: p must be 1 or 2");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("density_rd: lambda must be >= 0");
  const double lo = rho.domain_lo(), hi = rho.domain_hi();
  const std::optional<double> cusp = peak_of(rho);

  auto shaped = [rho, lambda, p](double mu) {
    return [rho, lambda, p, mu](double x) {
      const double r = rho.pdf(x);
      if (r <= 0.0 || mu <= 0.0) return 0.0;
      if (p == 1) return mu * r / (std::sqrt(mu * r + lambda * lambda * r * r) + lambda * r);
      return rd_cubic_root(r, lambda, mu);
    };
  };
  const std::vector<double> xs = linspace(lo, hi, kDensityGridPoints);
  auto integral = [&](double mu) {
    const auto f = shaped(mu);
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) total += grid_cell(f, xs[i], xs[i + 1], cusp);
    return total;
  };

  double mu_lo = 0.0, mu_hi = 1.0;
  double got = integral(mu_hi);
  while (got < 1.0) {
    if (!std::isfinite(got) || mu_hi > 1e300)
      throw NormalizationError("density_rd: normalization failed, integral reached " + std::to_string(got), got);
    mu_lo = mu_hi;
    mu_hi *= 2.0;
    got = integral(mu_hi);
  }
  double mu = mu_hi;
  for (int iter = 0; iter < 200 && std::abs(got - 1.0) > 1e-10; ++iter) {
    mu = 0.5 * (mu_lo + mu_hi);
    got = integral(mu);
    if (got < 1.0) {
      mu_lo = mu;
    } else {
      mu_hi = mu;
    }
  }
  if (!std::isfinite(got) || std::abs(got - 1.0) > 1e-6)
    throw NormalizationError("density_rd: normalization failed, integral reached " + std::to_string(got), got);
  return {QuantDensity::from_function(shaped(mu), lo, hi, kDensityGridPoints, cusp), mu};
}

// ------------------------------------------------------------ quantizers ---

namespace {

void fill_midpoints(QuantizerN& qz) {
  const std::size_t n = qz.nodes.size();
  qz.boundaries.assign(n + 1, 0.0);
  qz.boundaries.front() = -kInf;
  qz.boundaries.back() = kInf;
  for (std::size_t i = 1; i < n; ++i) qz.boundaries[i] = 0.5 * (qz.nodes[i - 1] + qz.nodes[i]);
}

}  // namespace

QuantizerN nodes_from_density(const QuantDensity& q, std::size_t n) {
  if (n < 1) throw std::invalid_argument("nodes_from_density: N must be >= 1");
  QuantizerN qz;
  qz.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) qz.nodes[i] = q.icdf((static_cast<double>(i) + 0.5) / static_cast<double>(n));
  fill_midpoints(qz);
  return qz;
}

QuantizerN uniform_quantizer(double lo, double hi, std::size_t n) {
  if (n < 1) throw std::invalid_argument("uniform_quantizer: N must be >= 1");
  if (!(lo < hi)) throw std::invalid_argument("uniform_quantizer: lo must be < hi");
  QuantizerN qz;
  qz.nodes.resize(n);
  const double step = (hi - lo) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) qz.nodes[i] = lo + step * (static_cast<double>(i) + 0.5);
  fill_midpoints(qz);
  return qz;
}

std::size_t quantize(const QuantizerN& quantizer, double x) {
  // boundaries[i] < x <= boundaries[i + 1] selects region i + 1.
  const auto it = std::lower_bound(quantizer.boundaries.begin() + 1, quantizer.boundaries.end() - 1, x);
  return static_cast<std::size_t>(it - quantizer.boundaries.begin());
}

double dequantize(const QuantizerN& quantizer, std::size_t index) {
  if (index < 1 || index > quantizer.size()) throw std::out_of_range("dequantize: index outside 1..N");
  return quantizer.nodes[index - 1];
}

std::size_t lattice_index(const QuantDensity& q, std::size_t n, double x) {
  const double v = std::ceil(static_cast<double>(n) * q.cdf(x));
  return static_cast<std::size_t>(std::clamp(v, 1.0, static_cast<double>(n)));
}

RateDistortionPoint eval_rd(const SourceDensity& rho, const QuantizerN& quantizer) {
  RateDistortionPoint rd;
  for (std::size_t i = 0; i < quantizer.size(); ++i) {
    const double a = quantizer.boundaries[i], b = quantizer.boundaries[i + 1];
    const double m = rho.mass(a, b);
    if (m > 0.0) rd.rate -= m * std::log2(m);
    rd.distortion += rho.squared_error(a, b, quantizer.nodes[i]);
  }
  rd.rate = std::max(0.0, rd.rate);
  return rd;
}

// ----------------------------------------------------------- functionals ---

namespace {

template <typename F>
double integrate_on_grid(const QuantDensity& q, const F& f, std::optional<double> cusp) {
  const std::vector<double> pts = linspace(q.lo(), q.hi(), kDensityGridPoints);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) total += grid_cell(f, pts[i], pts[i + 1], cusp);
  return total;
}

}  // namespace

double asymptotic_distortion(const SourceDensity& rho, const QuantDensity& q, double p) {
  if (!(p > 0.0)) throw std::invalid_argument("asymptotic_distortion: p must be positive");
  return integrate_on_grid(q, [&](double x) {
    const double r = rho.pdf(x);
    if (r <= 0.0) return 0.0;
    const double d = q.pdf(x);
    if (!(d > 0.0)) throw std::domain_error("asymptotic_distortion: q vanishes on the support of rho");
    return r / std::pow(d, p);
  }, peak_of(rho));
}

double asymptotic_entropy(const SourceDensity& rho, const QuantDensity& q) {
  return integrate_on_grid(q, [&](double x) {
    const double r = rho.pdf(x);
    if (r <= 0.0) return 0.0;
    const double d = q.pdf(x);
    if (!(d > 0.0)) throw std::domain_error("asymptotic_entropy: q vanishes on the support of rho");
    return r * std::log2(d / r);
  }, peak_of(rho));
}

}  // namespace epq
