#pragma once

// Linear context models for the centre (mu) and width (sigma) of DCT
// coefficients: least squares with a small ridge, nonnegative fits for
// widths, in-block zigzag width models, between-block boundary models, CCA
// and the reduced width predictors built from it.

#include <Eigen/Dense>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "epq/transform.hpp"

namespace epq {

inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kRidgeScale = 1e-10;  // times trace(C) / dim
inline constexpr int kBoundaryCount = 16;     // 8 left-column + 8 upper-row 1-D DCTs
inline constexpr int kBoundaryGradient = 0;   // slot holding (left DC - upper DC) / sqrt 2
inline constexpr int kBoundaryLevel = 8;      // slot holding (left DC + upper DC) / sqrt 2

class RankDeficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelTarget : std::uint8_t { Mu, Sigma };
enum class WeightSign { Free, Nonnegative };

struct LinearModel {
  std::vector<double> weights;
  double intercept = 0.0;
  ModelTarget target = ModelTarget::Mu;
  Position position{};

  /// Throws std::invalid_argument if the feature count differs.
  double evaluate(std::span<const double> features) const;
};

/// Means and centred second moments of a sample of [features | targets].
/// Regressions on any feature subset reuse them.
class RegressionMoments {
 public:
  /// Rows are samples.  Throws std::invalid_argument on mismatched row counts.
  RegressionMoments(const Eigen::MatrixXd& features, const Eigen::MatrixXd& targets);

  std::size_t samples() const noexcept { return n_; }
  std::size_t feature_count() const noexcept { return static_cast<std::size_t>(mean_x_.size()); }
  std::size_t target_count() const noexcept { return static_cast<std::size_t>(mean_y_.size()); }

  /// Least squares of target `target` on the listed feature columns with an
  /// intercept.  Throws std::invalid_argument with fewer than
  /// subset.size() + 1 samples and RankDeficientError if the ridged normal
  /// equations are singular.
  LinearModel fit(std::span<const int> subset, int target, WeightSign sign = WeightSign::Free) const;
  /// Fit on the first `count` feature columns.
  LinearModel fit_prefix(int count, int target, WeightSign sign = WeightSign::Free) const;

 private:
  std::size_t n_ = 0;
  Eigen::VectorXd mean_x_, mean_y_;
  Eigen::MatrixXd cxx_, cxy_;
};

LinearModel fit_least_squares(const Eigen::MatrixXd& rows, std::span<const double> targets,
                              WeightSign sign = WeightSign::Free);

/// Lawson-Hanson active set on normal equations: minimizes
/// w^T G w / 2 - r^T w subject to w >= 0.  G must be positive definite.
Eigen::VectorXd nnls_normal(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs);

/// Laplace code length in bits of x under centre mu and width sigma.
double laplace_bits(double x, double mu, double sigma);

/// lg sqrt(mse_baseline / mse_model).  Throws std::invalid_argument unless both are > 0.
double savings_bits(double mse_baseline, double mse_model);

// ---------------------------------------------------------------------------
// In-block width models

/// One model per AC position in zigzag order: |DCT| regressed on the
/// absolute values of all earlier AC coefficients.  Positions whose
/// predecessors carry no variance get an intercept-only model.  Throws
/// std::invalid_argument for fewer than 1000 blocks.
std::vector<LinearModel> fit_sigma_zigzag(std::span<const DctBlock> blocks, WeightSign sign = WeightSign::Nonnegative);

/// |AC| values of a block in zigzag order.
std::array<double, kBlockArea - 1> zigzag_magnitudes(const DctBlock& block);

struct ZigzagScore {
  Position position;
  double constant_bits = 0.0;   // Laplace, mu = 0, sigma = mean |x|
  double predicted_bits = 0.0;  // Laplace, mu = 0, sigma from the model
};
/// Mean code length per AC position with and without the zigzag width model.
std::vector<ZigzagScore> score_sigma_zigzag(std::span<const DctBlock> blocks, std::span<const LinearModel> models);

// ---------------------------------------------------------------------------
// Between-block models

/// Pixel and DCT blocks of one channel in raster order.
struct DctPlane {
  int cols = 0;
  int rows = 0;
  std::vector<PixelBlock> pixels;
  std::vector<DctBlock> coeffs;

  const PixelBlock& pixel(int bx, int by) const { return pixels[static_cast<std::size_t>(by * cols + bx)]; }
  const DctBlock& coeff(int bx, int by) const { return coeffs[static_cast<std::size_t>(by * cols + bx)]; }
};
DctPlane make_dct_plane(const BlockGrid& grid);

/// Contexts of growing cost: the same-position coefficient of the left and
/// upper blocks; of the left, upper, upper-left and upper-right blocks; the
/// matching row of the left block's DCT and column of the upper block's; the
/// 1-D DCTs of the adjacent pixel column and row; all 4 x 64 coefficients.
enum class BoundaryFeatures : std::uint8_t { SameTwo, SameFour, RowColumn, Boundary1D, Full };

std::size_t boundary_feature_count(BoundaryFeatures set);
/// True when every neighbour the feature set reads exists.
bool has_context(const DctPlane& plane, int bx, int by, BoundaryFeatures set);

using BoundaryVector = std::array<double, kBoundaryCount>;
/// dct1 of the left block's rightmost column, then dct1 of the upper block's
/// bottom row, with the two DC terms rotated into a gradient and a level.
BoundaryVector boundary_dct(const PixelBlock& left, const PixelBlock& up);
/// Signed context for predicting position `pos` of block (bx, by).
std::vector<double> boundary_context(const DctPlane& plane, int bx, int by, BoundaryFeatures set, Position pos);

struct PositionModel {
  LinearModel mu;
  LinearModel sigma;
};

struct BoundaryModelSet {
  BoundaryFeatures features = BoundaryFeatures::Boundary1D;
  bool zigzag_residues = false;                 // sigma also reads |residues| of earlier AC positions
  std::array<PositionModel, kBlockArea> models;  // by Position::index()
};

struct BoundaryFitOptions {
  BoundaryFeatures features = BoundaryFeatures::Boundary1D;
  bool zigzag_residues = false;
  bool interior_only = false;  // use only blocks with all four neighbours
  bool fit_sigma = true;
};

/// mu from the signed context, sigma from its absolute values (plus the
/// optional zigzag residues) regressed on |x - mu| with nonnegative weights.
BoundaryModelSet fit_boundary_models(std::span<const DctPlane> planes, const BoundaryFitOptions& options);

/// Per-position constant mu (mean) and sigma (mean |x - mean|) for blocks
/// without neighbours.
std::array<PositionModel, kBlockArea> fit_fallback_models(std::span<const DctPlane> planes);

struct BoundaryScore {
  double variance = 0.0;        // MSE around the mean
  double mu_mse = 0.0;          // MSE around the predicted mu
  double constant_bits = 0.0;   // Laplace bits with predicted mu and constant sigma
  double predicted_bits = 0.0;  // Laplace bits with predicted mu and sigma
};
/// Scores every block that has the model's context.
std::array<BoundaryScore, kBlockArea> score_boundary_models(std::span<const DctPlane> planes, const BoundaryModelSet& set,
                                                            bool interior_only = false);

struct Prediction {
  double mu = 0.0;
  double sigma = kSigmaFloor;
};
/// mu from the signed context; sigma = max(floor, model on |context| followed
/// by `extra_sigma`).  Throws std::invalid_argument on a schema mismatch.
Prediction predict_parameters(const PositionModel& model, std::span<const double> context,
                              std::span<const double> extra_sigma = {});

// ---------------------------------------------------------------------------
// Canonical correlation analysis

struct CanonicalPair {
  Eigen::VectorXd a;  // a^T C_xx a = 1
  Eigen::VectorXd b;  // b^T C_yy b = 1
  double correlation = 0.0;
};
using CcaResult = std::vector<CanonicalPair>;

/// Top-k canonical pairs of the sample rows of X and Y, correlations
/// non-increasing.  Throws std::invalid_argument if the row counts differ or
/// there are not more samples than dimensions.
CcaResult cca(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, std::size_t k);

// ---------------------------------------------------------------------------
// Reduced width predictors

enum class SigmaMode : std::uint8_t { VH, VPlusH, HOnly };

/// sigma = b0 + bV * (w_V . |V|) + bH * (w_H . |H|) with a single nonnegative
/// direction w shared by all positions.  VH ties bV = bH; H-only has bV = 0.
struct ReducedSigmaModel {
  SigmaMode mode = SigmaMode::VH;
  BoundaryVector direction{};                        // V (left column) part first
  std::array<std::array<double, 3>, kBlockArea> beta{};  // b0, bV, bH by Position::index()

  /// The same predictor as a linear model on the 16 absolute boundary features.
  LinearModel expand(Position pos) const;
};

/// Training rows for the width models: |boundary_dct| (n x 16) and
/// |x - mu| for every position (n x 64).
struct SigmaTrainingSet {
  Eigen::MatrixXd abs_features;
  Eigen::MatrixXd abs_residues;
};
SigmaTrainingSet sigma_training_set(std::span<const DctPlane> planes, const BoundaryModelSet& mu_models);

/// The direction is the first canonical direction of |features| against
/// |residues| with negative weights clipped; the betas are nonnegative fits.
ReducedSigmaModel sigma_feature_model(SigmaMode mode, const SigmaTrainingSet& data);
/// Fits the betas of `mode` for a given direction.
ReducedSigmaModel sigma_feature_model(SigmaMode mode, const SigmaTrainingSet& data, const BoundaryVector& direction);
/// Direction used by sigma_feature_model.
BoundaryVector sigma_direction(const SigmaTrainingSet& data);

// ---------------------------------------------------------------------------
// Conditional width diagnostic

struct WidthScanPoint {
  double center = 0.0;    // mean of the first coordinate in the window
  double mean_abs = 0.0;  // mean of its absolute value
  double width = 0.0;     // Laplace (or EPD) scale of the second coordinate, centre 0
  std::optional<double> kappa;
};

/// Sorts pairs by the first coordinate and fits the second over sliding
/// windows advancing by `stride` (default window / 2).  Throws
/// std::invalid_argument for window < 100 or fewer pairs than window.
std::vector<WidthScanPoint> conditional_width_scan(std::span<const std::pair<double, double>> pairs, std::size_t window,
                                                   bool fit_kappa = false, std::size_t stride = 0);

}  // namespace epq
