#include "epq/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "epq/epd.hpp"

namespace epq {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, std::span<const int> rows, std::span<const int> cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

Eigen::MatrixXd centred_cross(const Eigen::MatrixXd& a, const Eigen::VectorXd& mean_a, const Eigen::MatrixXd& b,
                              const Eigen::VectorXd& mean_b) {
  const double n = static_cast<double>(a.rows());
  return ((a.rowwise() - mean_a.transpose()).transpose() * (b.rowwise() - mean_b.transpose())) / n;
}

double ridge_for(const Eigen::MatrixXd& c) {
  if (c.rows() == 0) return 0.0;
  return kRidgeScale * c.trace() / static_cast<double>(c.rows());
}

// Zigzag rank of every AC position (DC gets -1).
const std::array<int, kBlockArea>& zigzag_rank() {
  static const std::array<int, kBlockArea> rank = [] {
    std::array<int, kBlockArea> r{};
    r.fill(-1);
    const auto& zz = zigzag();
    for (std::size_t t = 0; t < zz.size(); ++t) r[static_cast<std::size_t>(zz[t].index())] = static_cast<int>(t);
    return r;
  }();
  return rank;
}

Position position_of(int index) {
  return {static_cast<std::uint8_t>(index / kBlockSize), static_cast<std::uint8_t>(index % kBlockSize)};
}

LinearModel constant_model(double value, ModelTarget target, Position pos, std::size_t features = 0) {
  LinearModel m;
  m.weights.assign(features, 0.0);
  m.intercept = value;
  m.target = target;
  m.position = pos;
  return m;
}

bool shared_context(BoundaryFeatures set) { return set == BoundaryFeatures::Boundary1D || set == BoundaryFeatures::Full; }

struct Site {
  const DctPlane* plane;
  int bx, by;
};

bool interior(const DctPlane& plane, int bx, int by) { return bx > 0 && by > 0 && bx + 1 < plane.cols; }

std::vector<Site> collect_sites(std::span<const DctPlane> planes, BoundaryFeatures set, bool interior_only) {
  std::vector<Site> out;
  for (const DctPlane& plane : planes)
    for (int by = 0; by < plane.rows; ++by)
      for (int bx = 0; bx < plane.cols; ++bx)
        if (has_context(plane, bx, by, set) && (!interior_only || interior(plane, bx, by))) out.push_back({&plane, bx, by});
  return out;
}

Eigen::MatrixXd context_rows(const std::vector<Site>& sites, BoundaryFeatures set, Position pos) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(sites.size()), static_cast<Eigen::Index>(boundary_feature_count(set)));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const auto ctx = boundary_context(*sites[i].plane, sites[i].bx, sites[i].by, set, pos);
    for (std::size_t j = 0; j < ctx.size(); ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = ctx[j];
  }
  return x;
}

Eigen::MatrixXd coefficient_rows(const std::vector<Site>& sites) {
  Eigen::MatrixXd y(static_cast<Eigen::Index>(sites.size()), kBlockArea);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const DctBlock& b = sites[i].plane->coeff(sites[i].bx, sites[i].by);
    for (int p = 0; p < kBlockArea; ++p) y(static_cast<Eigen::Index>(i), p) = b.values[static_cast<std::size_t>(p)];
  }
  return y;
}

// Absolute residues in zigzag order (63 AC columns).
Eigen::MatrixXd zigzag_columns(const Eigen::MatrixXd& abs_residues) {
  const auto& zz = zigzag();
  Eigen::MatrixXd z(abs_residues.rows(), static_cast<Eigen::Index>(zz.size()));
  for (std::size_t t = 0; t < zz.size(); ++t) z.col(static_cast<Eigen::Index>(t)) = abs_residues.col(zz[t].index());
  return z;
}

// Fits on the first `count` columns except `skip`, whose weight stays 0.
LinearModel fit_or_constant(const RegressionMoments& m, int count, int target, WeightSign sign, int skip = -1) {
  std::vector<int> subset;
  for (int i = 0; i < count; ++i)
    if (i != skip) subset.push_back(i);
  LinearModel out;
  try {
    out = m.fit(subset, target, sign);
  } catch (const RankDeficientError&) {
    out = m.fit_prefix(0, target, sign);
    subset.clear();
  }
  std::vector<double> w(static_cast<std::size_t>(count), 0.0);
  for (std::size_t i = 0; i < subset.size(); ++i) w[static_cast<std::size_t>(subset[i])] = out.weights[i];
  out.weights = std::move(w);
  return out;
}

}  // namespace

double LinearModel::evaluate(std::span<const double> features) const {
  if (features.size() != weights.size())
    throw std::invalid_argument("LinearModel: expected " + std::to_string(weights.size()) + " features, got " +
                                std::to_string(features.size()));
  double v = intercept;
  for (std::size_t i = 0; i < weights.size(); ++i) v += weights[i] * features[i];
  return v;
}

RegressionMoments::RegressionMoments(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets) {
  if (features.rows() != targets.rows()) throw std::invalid_argument("RegressionMoments: row counts differ");
  n_ = static_cast<std::size_t>(features.rows());
  if (n_ == 0) throw std::invalid_argument("RegressionMoments: empty sample");
  mean_x_ = features.colwise().mean();
  mean_y_ = targets.colwise().mean();
  cxx_ = centred_cross(features, mean_x_, features, mean_x_);
  cxy_ = centred_cross(features, mean_x_, targets, mean_y_);
}

LinearModel RegressionMoments::fit(std::span<const int> subset, int target, WeightSign sign) const {
  const std::size_t d = subset.size();
  if (n_ < d + 1) throw std::invalid_argument("fit_least_squares: need at least features + 1 rows");
  if (target < 0 || target >= mean_y_.size()) throw std::out_of_range("fit_least_squares: target index");
  LinearModel m;
  m.weights.assign(d, 0.0);
  m.intercept = mean_y_(target);
  if (d == 0) return m;

  Eigen::MatrixXd c = submatrix(cxx_, subset, subset);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < d; ++i) rhs(static_cast<Eigen::Index>(i)) = cxy_(subset[i], target);
  const double ridge = ridge_for(c);
  if (!(ridge > 0.0) || !std::isfinite(ridge)) throw RankDeficientError("fit_least_squares: features carry no variance");
  c.diagonal().array() += ridge;

  Eigen::VectorXd w;
  if (sign == WeightSign::Nonnegative) {
    w = nnls_normal(c, rhs);
  } else {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(c);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
      throw RankDeficientError("fit_least_squares: normal equations are singular");
    w = ldlt.solve(rhs);
  }
  if (!w.allFinite()) throw RankDeficientError("fit_least_squares: non-finite solution");
  for (std::size_t i = 0; i < d; ++i) {
    m.weights[i] = w(static_cast<Eigen::Index>(i));
    m.intercept -= m.weights[i] * mean_x_(subset[i]);
  }
  return m;
}

LinearModel RegressionMoments::fit_prefix(int count, int target, WeightSign sign) const {
  std::vector<int> subset(static_cast<std::size_t>(count));
  std::iota(subset.begin(), subset.end(), 0);
  return fit(subset, target, sign);
}

LinearModel fit_least_squares(const Eigen::MatrixXd& rows, std::span<const double> targets, WeightSign sign) {
  if (static_cast<std::size_t>(rows.rows()) != targets.size()) throw std::invalid_argument("fit_least_squares: row counts differ");
  if (static_cast<std::size_t>(rows.rows()) < static_cast<std::size_t>(rows.cols()) + 1)
    throw std::invalid_argument("fit_least_squares: need at least features + 1 rows");
  const Eigen::MatrixXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), static_cast<Eigen::Index>(targets.size()));
  return RegressionMoments(rows, y).fit_prefix(static_cast<int>(rows.cols()), 0, sign);
}

Eigen::VectorXd nnls_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs) {
  const Eigen::Index d = rhs.size();
  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  std::vector<bool> passive(static_cast<std::size_t>(d), false);
  const double tol = 1e-12 * std::max(1.0, rhs.cwiseAbs().maxCoeff()) * std::max(1.0, gram.diagonal().maxCoeff());

  auto solve_passive = [&] {
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < d; ++i)
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(static_cast<int>(i));
    Eigen::VectorXd z = Eigen::VectorXd::Zero(d);
    if (idx.empty()) return z;
    Eigen::MatrixXd g = submatrix(gram, idx, idx);
    Eigen::VectorXd r(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) r(static_cast<Eigen::Index>(i)) = rhs(idx[i]);
    const Eigen::VectorXd s = g.ldlt().solve(r);
    for (std::size_t i = 0; i < idx.size(); ++i) z(idx[i]) = s(static_cast<Eigen::Index>(i));
    return z;
  };

  for (int outer = 0; outer < 3 * static_cast<int>(d) + 10; ++outer) {
    const Eigen::VectorXd grad = rhs - gram * w;
    Eigen::Index best = -1;
    double best_g = tol;
    for (Eigen::Index i = 0; i < d; ++i)
      if (!passive[static_cast<std::size_t>(i)] && grad(i) > best_g) {
        best_g = grad(i);
        best = i;
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (int inner = 0; inner < 3 * static_cast<int>(d) + 10; ++inner) {
      const Eigen::VectorXd z = solve_passive();
      bool feasible = true;
      for (Eigen::Index i = 0; i < d; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) feasible = false;
      if (feasible) {
        w = z;
        break;
      }
      double alpha = 1.0;
      for (Eigen::Index i = 0; i < d; ++i)
        if (passive[static_cast<std::size_t>(i)] && z(i) <= 0.0) alpha = std::min(alpha, w(i) / (w(i) - z(i)));
      w += alpha * (z - w);
      for (Eigen::Index i = 0; i < d; ++i)
        if (passive[static_cast<std::size_t>(i)] && w(i) <= 1e-15 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
          passive[static_cast<std::size_t>(i)] = false;
          w(i) = 0.0;
        }
    }
  }
  return w;
}

double laplace_bits(double x, double mu, double sigma) {
  return std::log2(2.0 * sigma) + std::abs(x - mu) / sigma * std::numbers::log2e;
}

double savings_bits(double mse_baseline, double mse_model) {
  if (!(mse_baseline > 0.0) || !(mse_model > 0.0)) throw std::invalid_argument("savings_bits: MSEs must be positive");
  return 0.5 * std::log2(mse_baseline / mse_model);
}

std::array<double, kBlockArea - 1> zigzag_magnitudes(const DctBlock& block) {
  std::array<double, kBlockArea - 1> out{};
  const auto& zz = zigzag();
  for (std::size_t t = 0; t < zz.size(); ++t) out[t] = std::abs(block[zz[t]]);
  return out;
}

std::vector<LinearModel> fit_sigma_zigzag(std::span<const DctBlock> blocks, WeightSign sign) {
  if (blocks.size() < 1000) throw std::invalid_argument("fit_sigma_zigzag: need at least 1000 blocks");
  constexpr int kAc = kBlockArea - 1;
  Eigen::MatrixXd mags(static_cast<Eigen::Index>(blocks.size()), kAc);
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto m = zigzag_magnitudes(blocks[i]);
    for (int t = 0; t < kAc; ++t) mags(static_cast<Eigen::Index>(i), t) = m[static_cast<std::size_t>(t)];
  }
  const RegressionMoments moments(mags, mags);
  std::vector<LinearModel> out;
  out.reserve(kAc);
  for (int t = 0; t < kAc; ++t) {
    LinearModel m = fit_or_constant(moments, t, t, sign);
    m.target = ModelTarget::Sigma;
    m.position = zigzag()[static_cast<std::size_t>(t)];
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<ZigzagScore> score_sigma_zigzag(std::span<const DctBlock> blocks, std::span<const LinearModel> models) {
  constexpr std::size_t kAc = kBlockArea - 1;
  if (models.size() != kAc) throw std::invalid_argument("score_sigma_zigzag: need 63 models");
  if (blocks.empty()) throw std::invalid_argument("score_sigma_zigzag: no blocks");
  std::vector<ZigzagScore> out(kAc);
  std::vector<double> mean_abs(kAc, 0.0);
  for (const DctBlock& b : blocks) {
    const auto m = zigzag_magnitudes(b);
    for (std::size_t t = 0; t < kAc; ++t) mean_abs[t] += m[t];
  }
  for (double& v : mean_abs) v = std::max(kSigmaFloor, v / static_cast<double>(blocks.size()));
  for (const DctBlock& b : blocks) {
    const auto m = zigzag_magnitudes(b);
    for (std::size_t t = 0; t < kAc; ++t) {
      const double sigma = std::max(kSigmaFloor, models[t].evaluate(std::span<const double>(m.data(), t)));
      out[t].constant_bits += laplace_bits(m[t], 0.0, mean_abs[t]);
      out[t].predicted_bits += laplace_bits(m[t], 0.0, sigma);
    }
  }
  for (std::size_t t = 0; t < kAc; ++t) {
    out[t].position = zigzag()[t];
    out[t].constant_bits /= static_cast<double>(blocks.size());
    out[t].predicted_bits /= static_cast<double>(blocks.size());
  }
  return out;
}

DctPlane make_dct_plane(const BlockGrid& grid) {
  DctPlane p;
  p.cols = grid.cols;
  p.rows = grid.rows;
  p.pixels = grid.blocks;
  p.coeffs.reserve(grid.blocks.size());
  for (const PixelBlock& b : grid.blocks) p.coeffs.push_back(dct2_forward(b));
  return p;
}

std::size_t boundary_feature_count(BoundaryFeatures set) {
  switch (set) {
    case BoundaryFeatures::SameTwo: return 2;
    case BoundaryFeatures::SameFour: return 4;
    case BoundaryFeatures::RowColumn: return 16;
    case BoundaryFeatures::Boundary1D: return kBoundaryCount;
    case BoundaryFeatures::Full: return 4 * kBlockArea;
  }
  return 0;
}

bool has_context(const DctPlane& plane, int bx, int by, BoundaryFeatures set) {
  if (bx <= 0 || by <= 0) return false;
  if (set == BoundaryFeatures::SameFour || set == BoundaryFeatures::Full) return bx + 1 < plane.cols;
  return true;
}

BoundaryVector boundary_dct(const PixelBlock& left, const PixelBlock& up) {
  Vector8 col{}, row{};
  for (int i = 0; i < kBlockSize; ++i) {
    col[static_cast<std::size_t>(i)] = left(i, kBlockSize - 1);
    row[static_cast<std::size_t>(i)] = up(kBlockSize - 1, i);
  }
  const Vector8 dc = dct1(col), dr = dct1(row);
  BoundaryVector out{};
  std::copy(dc.begin(), dc.end(), out.begin());
  std::copy(dr.begin(), dr.end(), out.begin() + kBlockSize);
  out[kBoundaryGradient] = (dc[0] - dr[0]) / std::numbers::sqrt2;
  out[kBoundaryLevel] = (dc[0] + dr[0]) / std::numbers::sqrt2;
  return out;
}

std::vector<double> boundary_context(const DctPlane& plane, int bx, int by, BoundaryFeatures set, Position pos) {
  if (!has_context(plane, bx, by, set)) throw std::invalid_argument("boundary_context: missing neighbour");
  const DctBlock& left = plane.coeff(bx - 1, by);
  const DctBlock& up = plane.coeff(bx, by - 1);
  std::vector<double> out;
  out.reserve(boundary_feature_count(set));
  switch (set) {
    case BoundaryFeatures::SameTwo:
      out = {left[pos], up[pos]};
      break;
    case BoundaryFeatures::SameFour:
      out = {left[pos], up[pos], plane.coeff(bx - 1, by - 1)[pos], plane.coeff(bx + 1, by - 1)[pos]};
      break;
    case BoundaryFeatures::RowColumn:
      for (int k = 0; k < kBlockSize; ++k) out.push_back(left(pos.row, k));
      for (int j = 0; j < kBlockSize; ++j) out.push_back(up(j, pos.col));
      break;
    case BoundaryFeatures::Boundary1D: {
      const BoundaryVector b = boundary_dct(plane.pixel(bx - 1, by), plane.pixel(bx, by - 1));
      out.assign(b.begin(), b.end());
      break;
    }
    case BoundaryFeatures::Full:
      for (const DctBlock* n : {&left, &up, &plane.coeff(bx - 1, by - 1), &plane.coeff(bx + 1, by - 1)})
        out.insert(out.end(), n->values.begin(), n->values.end());
      break;
  }
  return out;
}

BoundaryModelSet fit_boundary_models(std::span<const DctPlane> planes, const BoundaryFitOptions& options) {
  const BoundaryFeatures set = options.features;
  const std::vector<Site> sites = collect_sites(planes, set, options.interior_only);
  const int d = static_cast<int>(boundary_feature_count(set));
  if (sites.size() < static_cast<std::size_t>(d) + 2)
    throw std::invalid_argument("fit_boundary_models: not enough blocks with neighbours");

  BoundaryModelSet out;
  out.features = set;
  out.zigzag_residues = options.zigzag_residues;
  const Eigen::MatrixXd y = coefficient_rows(sites);
  const auto n = static_cast<Eigen::Index>(sites.size());

  std::vector<Eigen::MatrixXd> per_pos;  // contexts for position-dependent sets
  Eigen::MatrixXd shared;
  if (shared_context(set)) {
    shared = context_rows(sites, set, {});
  } else {
    per_pos.reserve(kBlockArea);
    for (int p = 0; p < kBlockArea; ++p) per_pos.push_back(context_rows(sites, set, position_of(p)));
  }
  auto context_of = [&](int p) -> const Eigen::MatrixXd& { return shared_context(set) ? shared : per_pos[static_cast<std::size_t>(p)]; };

  Eigen::MatrixXd residues(n, kBlockArea);
  std::optional<RegressionMoments> shared_moments;
  if (shared_context(set)) shared_moments.emplace(shared, y);
  // Brightness shifts only DC coefficients: AC centres and all widths ignore the level.
  const int level = set == BoundaryFeatures::Boundary1D ? kBoundaryLevel : -1;
  for (int p = 0; p < kBlockArea; ++p) {
    const int skip = p == 0 ? -1 : level;
    LinearModel mu = shared_moments ? fit_or_constant(*shared_moments, d, p, WeightSign::Free, skip)
                                    : fit_or_constant(RegressionMoments(context_of(p), y.col(p)), d, 0, WeightSign::Free, skip);
    mu.target = ModelTarget::Mu;
    mu.position = position_of(p);
    const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(mu.weights.data(), d);
    residues.col(p) = y.col(p) - ((context_of(p) * w).array() + mu.intercept).matrix();
    out.models[static_cast<std::size_t>(p)].mu = std::move(mu);
  }
  if (!options.fit_sigma) {
    for (int p = 0; p < kBlockArea; ++p)
      out.models[static_cast<std::size_t>(p)].sigma = constant_model(residues.col(p).cwiseAbs().mean(), ModelTarget::Sigma, position_of(p),
                                                                 static_cast<std::size_t>(d));
    return out;
  }

  const Eigen::MatrixXd abs_res = residues.cwiseAbs();
  const Eigen::MatrixXd zz = options.zigzag_residues ? zigzag_columns(abs_res) : Eigen::MatrixXd(n, 0);
  auto sigma_features = [&](const Eigen::MatrixXd& ctx) {
    Eigen::MatrixXd a(n, ctx.cols() + zz.cols());
    a << ctx.cwiseAbs(), zz;
    return a;
  };
  std::optional<RegressionMoments> sigma_moments;
  if (shared_context(set)) sigma_moments.emplace(sigma_features(shared), abs_res);
  for (int p = 0; p < kBlockArea; ++p) {
    const int rank = zigzag_rank()[static_cast<std::size_t>(p)];
    const int count = d + (options.zigzag_residues ? std::max(rank, 0) : 0);
    LinearModel s = sigma_moments
                        ? fit_or_constant(*sigma_moments, count, p, WeightSign::Nonnegative, level)
                        : fit_or_constant(RegressionMoments(sigma_features(context_of(p)), abs_res.col(p)), count, 0,
                                          WeightSign::Nonnegative, level);
    s.target = ModelTarget::Sigma;
    s.position = position_of(p);
    out.models[static_cast<std::size_t>(p)].sigma = std::move(s);
  }
  return out;
}

std::array<PositionModel, kBlockArea> fit_fallback_models(std::span<const DctPlane> planes) {
  std::array<double, kBlockArea> sum{};
  std::size_t count = 0;
  for (const DctPlane& plane : planes)
    for (const DctBlock& b : plane.coeffs) {
      for (int p = 0; p < kBlockArea; ++p) sum[static_cast<std::size_t>(p)] += b.values[static_cast<std::size_t>(p)];
      ++count;
    }
  if (count == 0) throw std::invalid_argument("fit_fallback_models: no blocks");
  std::array<double, kBlockArea> abs_dev{};
  for (double& s : sum) s /= static_cast<double>(count);
  for (const DctPlane& plane : planes)
    for (const DctBlock& b : plane.coeffs)
      for (int p = 0; p < kBlockArea; ++p) abs_dev[static_cast<std::size_t>(p)] += std::abs(b.values[static_cast<std::size_t>(p)] - sum[static_cast<std::size_t>(p)]);
  std::array<PositionModel, kBlockArea> out;
  for (int p = 0; p < kBlockArea; ++p) {
    const auto i = static_cast<std::size_t>(p);
    out[i].mu = constant_model(sum[i], ModelTarget::Mu, position_of(p));
    out[i].sigma = constant_model(abs_dev[i] / static_cast<double>(count), ModelTarget::Sigma, position_of(p));
  }
  return out;
}

std::array<BoundaryScore, kBlockArea> score_boundary_models(std::span<const DctPlane> planes, const BoundaryModelSet& set,
                                                            bool interior_only) {
  const std::vector<Site> sites = collect_sites(planes, set.features, interior_only);
  if (sites.empty()) throw std::invalid_argument("score_boundary_models: no blocks with neighbours");
  const auto n = static_cast<Eigen::Index>(sites.size());
  const Eigen::MatrixXd y = coefficient_rows(sites);
  Eigen::MatrixXd residues(n, kBlockArea), sigmas(n, kBlockArea);
  const auto& zz = zigzag();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Site& s = sites[static_cast<std::size_t>(i)];
    std::vector<double> zz_abs;  // |residues| in zigzag order, filled as positions are visited
    for (int z = -1; z < static_cast<int>(zz.size()); ++z) {
      const Position pos = z < 0 ? Position{} : zz[static_cast<std::size_t>(z)];
      const PositionModel& m = set.models[static_cast<std::size_t>(pos.index())];
      const auto ctx = boundary_context(*s.plane, s.bx, s.by, set.features, pos);
      const Prediction pr = predict_parameters(m, ctx, set.zigzag_residues ? std::span<const double>(zz_abs) : std::span<const double>{});
      residues(i, pos.index()) = y(i, pos.index()) - pr.mu;
      sigmas(i, pos.index()) = pr.sigma;
      if (z >= 0) zz_abs.push_back(std::abs(residues(i, pos.index())));
    }
  }
  std::array<BoundaryScore, kBlockArea> out{};
  for (int p = 0; p < kBlockArea; ++p) {
    const Eigen::VectorXd col = y.col(p);
    const double mean = col.mean();
    const double sigma_const = std::max(kSigmaFloor, residues.col(p).cwiseAbs().mean());
    BoundaryScore& sc = out[static_cast<std::size_t>(p)];
    sc.variance = (col.array() - mean).square().mean();
    sc.mu_mse = residues.col(p).squaredNorm() / static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      sc.constant_bits += laplace_bits(residues(i, p), 0.0, sigma_const);
      sc.predicted_bits += laplace_bits(residues(i, p), 0.0, sigmas(i, p));
    }
    sc.constant_bits /= static_cast<double>(n);
    sc.predicted_bits /= static_cast<double>(n);
  }
  return out;
}

Prediction predict_parameters(const PositionModel& model, std::span<const double> context, std::span<const double> extra_sigma) {
  if (model.sigma.weights.size() != context.size() + extra_sigma.size())
    throw std::invalid_argument("predict_parameters: sigma model expects " + std::to_string(model.sigma.weights.size()) +
                                " features, got " + std::to_string(context.size() + extra_sigma.size()));
  Prediction out;
  out.mu = model.mu.evaluate(context);
  double s = model.sigma.intercept;
  for (std::size_t i = 0; i < context.size(); ++i) s += model.sigma.weights[i] * std::abs(context[i]);
  for (std::size_t i = 0; i < extra_sigma.size(); ++i) s += model.sigma.weights[context.size() + i] * std::abs(extra_sigma[i]);
  out.sigma = std::max(kSigmaFloor, s);
  return out;
}

CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t k) {
  if (x.rows() != y.rows()) throw std::invalid_argument("cca: sample counts differ");
  if (x.rows() <= std::max(x.cols(), y.cols())) throw std::invalid_argument("cca: fewer samples than dimensions");
  const Eigen::VectorXd mx = x.colwise().mean(), my = y.colwise().mean();
  Eigen::MatrixXd cxx = centred_cross(x, mx, x, mx);
  Eigen::MatrixXd cyy = centred_cross(y, my, y, my);
  const Eigen::MatrixXd cxy = centred_cross(x, mx, y, my);
  cxx.diagonal().array() += ridge_for(cxx);
  cyy.diagonal().array() += ridge_for(cyy);

  const Eigen::LLT<Eigen::MatrixXd> lx(cxx), ly(cyy);
  if (lx.info() != Eigen::Success || ly.info() != Eigen::Success) throw RankDeficientError("cca: covariance is singular");
  const Eigen::MatrixXd lxm = lx.matrixL(), lym = ly.matrixL();
  // Cross-covariance of the whitened variables.
  const Eigen::MatrixXd t = lxm.triangularView<Eigen::Lower>().solve(cxy);
  const Eigen::MatrixXd m = lym.triangularView<Eigen::Lower>().solve(t.transpose()).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const std::size_t count = std::min<std::size_t>(k, static_cast<std::size_t>(std::min(x.cols(), y.cols())));
  CcaResult out;
  for (std::size_t i = 0; i < count; ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    CanonicalPair pair;
    pair.a = lxm.transpose().triangularView<Eigen::Upper>().solve(svd.matrixU().col(c));
    pair.b = lym.transpose().triangularView<Eigen::Upper>().solve(svd.matrixV().col(c));
    pair.correlation = std::clamp(svd.singularValues()(c), 0.0, 1.0);
    out.push_back(std::move(pair));
  }
  return out;
}

LinearModel ReducedSigmaModel::expand(Position pos) const {
  const auto& b = beta[static_cast<std::size_t>(pos.index())];
  LinearModel m;
  m.target = ModelTarget::Sigma;
  m.position = pos;
  m.intercept = b[0];
  m.weights.resize(kBoundaryCount);
  for (int i = 0; i < kBoundaryCount; ++i)
    m.weights[static_cast<std::size_t>(i)] = direction[static_cast<std::size_t>(i)] * (i < kBlockSize ? b[1] : b[2]);
  return m;
}

SigmaTrainingSet sigma_training_set(std::span<const DctPlane> planes, const BoundaryModelSet& mu_models) {
  std::vector<Site> sites = collect_sites(planes, BoundaryFeatures::Boundary1D, false);
  std::erase_if(sites, [&](const Site& s) { return !has_context(*s.plane, s.bx, s.by, mu_models.features); });
  const auto n = static_cast<Eigen::Index>(sites.size());
  SigmaTrainingSet out;
  out.abs_features.resize(n, kBoundaryCount);
  out.abs_residues.resize(n, kBlockArea);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Site& s = sites[static_cast<std::size_t>(i)];
    const BoundaryVector b = boundary_dct(s.plane->pixel(s.bx - 1, s.by), s.plane->pixel(s.bx, s.by - 1));
    for (int j = 0; j < kBoundaryCount; ++j) out.abs_features(i, j) = std::abs(b[static_cast<std::size_t>(j)]);
    const DctBlock& c = s.plane->coeff(s.bx, s.by);
    for (int p = 0; p < kBlockArea; ++p) {
      const Position pos = position_of(p);
      const auto ctx = boundary_context(*s.plane, s.bx, s.by, mu_models.features, pos);
      out.abs_residues(i, p) = std::abs(c[pos] - mu_models.models[static_cast<std::size_t>(p)].mu.evaluate(ctx));
    }
  }
  return out;
}

BoundaryVector sigma_direction(const SigmaTrainingSet& data) {
  std::vector<int> keep;
  for (int i = 0; i < kBoundaryCount; ++i)
    if (i != kBoundaryLevel) keep.push_back(i);
  const CcaResult r = cca(data.abs_features(Eigen::all, keep), data.abs_residues, 1);
  Eigen::VectorXd a = r.at(0).a;
  if (a.sum() < 0.0) a = -a;
  BoundaryVector w{};
  double total = 0.0;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    w[static_cast<std::size_t>(keep[i])] = std::max(0.0, a(static_cast<Eigen::Index>(i)));
    total += w[static_cast<std::size_t>(keep[i])];
  }
  if (!(total > 0.0)) {
    for (int i : keep) w[static_cast<std::size_t>(i)] = 1.0 / static_cast<double>(keep.size());
    return w;
  }
  for (double& v : w) v /= total;
  return w;
}

ReducedSigmaModel sigma_feature_model(SigmaMode mode, const SigmaTrainingSet& data) {
  return sigma_feature_model(mode, data, sigma_direction(data));
}

ReducedSigmaModel sigma_feature_model(SigmaMode mode, const SigmaTrainingSet& data, const BoundaryVector& direction) {
  ReducedSigmaModel out;
  out.mode = mode;
  out.direction = direction;
  const Eigen::Map<const Eigen::VectorXd> w(direction.data(), kBoundaryCount);
  const Eigen::VectorXd sv = data.abs_features.leftCols(kBlockSize) * w.head(kBlockSize);
  const Eigen::VectorXd sh = data.abs_features.rightCols(kBlockSize) * w.tail(kBlockSize);
  Eigen::MatrixXd feats;
  switch (mode) {
    case SigmaMode::VH:
      feats = sv + sh;
      break;
    case SigmaMode::VPlusH:
      feats.resize(sv.size(), 2);
      feats << sv, sh;
      break;
    case SigmaMode::HOnly:
      feats = sh;
      break;
  }
  const RegressionMoments moments(feats, data.abs_residues);
  for (int p = 0; p < kBlockArea; ++p) {
    const LinearModel m = fit_or_constant(moments, static_cast<int>(feats.cols()), p, WeightSign::Nonnegative);
    auto& b = out.beta[static_cast<std::size_t>(p)];
    b[0] = m.intercept;
    switch (mode) {
      case SigmaMode::VH: b[1] = b[2] = m.weights[0]; break;
      case SigmaMode::VPlusH: b[1] = m.weights[0]; b[2] = m.weights[1]; break;
      case SigmaMode::HOnly: b[1] = 0.0; b[2] = m.weights[0]; break;
    }
  }
  return out;
}

std::vector<WidthScanPoint> conditional_width_scan(std::span<const std::pair<double, double>> pairs, std::size_t window,
                                                   bool fit_kappa, std::size_t stride) {
  if (window < 100) throw std::invalid_argument("conditional_width_scan: window must be at least 100");
  if (pairs.size() < window) throw std::invalid_argument("conditional_width_scan: fewer pairs than the window");
  if (stride == 0) stride = std::max<std::size_t>(1, window / 2);
  std::vector<std::pair<double, double>> sorted(pairs.begin(), pairs.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<WidthScanPoint> out;
  std::vector<double> second(window);
  for (std::size_t start = 0; start + window <= sorted.size(); start += stride) {
    WidthScanPoint pt;
    double abs_sum = 0.0;
    for (std::size_t i = 0; i < window; ++i) {
      const auto& [a, b] = sorted[start + i];
      pt.center += a;
      pt.mean_abs += std::abs(a);
      second[i] = b;
      abs_sum += std::abs(b);
    }
    pt.center /= static_cast<double>(window);
    pt.mean_abs /= static_cast<double>(window);
    if (fit_kappa) {
      const EpdFit fit = epd_mle(second, MuPolicy::Zero);
      pt.width = fit.params.sigma();
      pt.kappa = fit.params.kappa();
    } else {
      pt.width = abs_sum / static_cast<double>(window);
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace epq
