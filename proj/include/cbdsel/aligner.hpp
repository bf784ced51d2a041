#pragma once

// Affine map from a classifier's representation space into the shared
// vision-language embedding space, fit by ridge least squares.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "cbdsel/types.hpp"

namespace cbdsel {

inline constexpr double kDefaultRidge = 1e-6;

/// y = W^T x + b, with W stored d_s x d_t.
struct AlignerModel {
  RowMatrix<double> weights;
  Vector<double> bias;
  double lambda = 0.0;
  double r_squared = 1.0;
  /// Fewer training pairs than d_s + 1; the fit relies on lambda.
  bool underdetermined = false;

  Eigen::Index source_dim() const noexcept { return weights.rows(); }
  Eigen::Index target_dim() const noexcept { return weights.cols(); }

  static AlignerModel identity(Eigen::Index dim) {
    AlignerModel m;
    m.weights = RowMatrix<double>::Identity(dim, dim);
    m.bias = Vector<double>::Zero(dim);
    return m;
  }
};

/// Row i of the result is W^T source_i + b.
template <typename Derived>
RowMatrix<double> map(const AlignerModel& model, const Eigen::MatrixBase<Derived>& source) {
  if (source.cols() != model.source_dim())
    throw ShapeError("aligner expects " + std::to_string(model.source_dim()) + "-dimensional input, got " +
                     std::to_string(source.cols()));
  RowMatrix<double> out = source.template cast<double>() * model.weights;
  out.rowwise() += model.bias.transpose();
  return out;
}

/// Mean squared residual per row, i.e. (1/n) sum ||map(x_i) - y_i||^2.
template <typename DS, typename DT>
double training_mse(const AlignerModel& model, const Eigen::MatrixBase<DS>& source,
                    const Eigen::MatrixBase<DT>& target) {
  if (source.rows() == 0) return 0.0;
  return (map(model, source) - target.template cast<double>()).squaredNorm() / static_cast<double>(source.rows());
}

/// Coefficient of determination pooled over all target coordinates.
/// Exactly 1 when the residual vanishes; negative for fits worse than the mean.
template <typename DS, typename DT>
double r_squared_of(const AlignerModel& model, const Eigen::MatrixBase<DS>& source,
                    const Eigen::MatrixBase<DT>& target) {
  if (source.rows() != target.rows())
    throw ShapeError("r_squared_of: source has " + std::to_string(source.rows()) + " rows, target has " +
                     std::to_string(target.rows()));
  if (target.cols() != model.target_dim())
    throw ShapeError("r_squared_of: target dimension " + std::to_string(target.cols()) + " does not match model " +
                     std::to_string(model.target_dim()));
  const RowMatrix<double> y = target.template cast<double>();
  const double ss_res = (map(model, source) - y).squaredNorm();
  if (ss_res == 0.0) return 1.0;
  const Vector<double> mean = y.colwise().mean().transpose();
  const double ss_tot = (y.rowwise() - mean.transpose()).squaredNorm();
  if (ss_tot == 0.0) throw DegenerateError("r_squared_of: target has zero variance but a non-zero residual");
  return 1.0 - ss_res / ss_tot;
}

/// Closed-form minimiser of (1/n) sum ||W^T x_i + b - y_i||^2 + lambda ||W||_F^2.
///
/// Both matrices are centred, (Xc^T Xc + n lambda I) W = Xc^T Yc is solved by
/// Cholesky, and b = mean(Y) - W^T mean(X). The bias is not penalised.
template <typename DS, typename DT>
AlignerModel fit_aligner(const Eigen::MatrixBase<DS>& source, const Eigen::MatrixBase<DT>& target,
                         double lambda = kDefaultRidge) {
  if (source.rows() != target.rows())
    throw ShapeError("fit_aligner: source has " + std::to_string(source.rows()) + " rows, target has " +
                     std::to_string(target.rows()));
  if (source.rows() == 0) throw ShapeError("fit_aligner: no training pairs");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("fit_aligner: lambda must be finite and >= 0");
  require_finite(source, "aligner source");
  require_finite(target, "aligner target");

  const auto n = static_cast<double>(source.rows());
  const Eigen::Index ds = source.cols();

  const RowMatrix<double> x = source.template cast<double>();
  const RowMatrix<double> y = target.template cast<double>();
  const Vector<double> x_mean = x.colwise().mean().transpose();
  const Vector<double> y_mean = y.colwise().mean().transpose();
  const RowMatrix<double> xc = x.rowwise() - x_mean.transpose();
  const RowMatrix<double> yc = y.rowwise() - y_mean.transpose();

  Eigen::MatrixXd normal = xc.transpose() * xc;
  normal.diagonal().array() += n * lambda;
  const Eigen::MatrixXd rhs = xc.transpose() * yc;

  Eigen::LLT<Eigen::MatrixXd> llt(normal);
  const double rank_tol = static_cast<double>(ds) * std::numeric_limits<double>::epsilon();
  if (llt.info() != Eigen::Success || (lambda == 0.0 && !(llt.rcond() > rank_tol)))
    throw RankDeficiencyError(
        "fit_aligner: normal matrix is singular (rank-deficient source features); refit with a positive lambda");

  AlignerModel model;
  model.weights = llt.solve(rhs);
  model.bias = y_mean - model.weights.transpose() * x_mean;
  model.lambda = lambda;
  model.underdetermined = source.rows() < ds + 1;
  require_finite(model.weights, "aligner weights");
  const auto r2 = r_squared_of(model, x, y);
  model.r_squared = r2;
  return model;
}

// ALN1: "ALN1", u32 d_s, u32 d_t, f64 lambda, f64 r_squared, W row-major f64, b f64; little-endian.
std::vector<std::uint8_t> encode_aligner(const AlignerModel& model);
AlignerModel decode_aligner(const std::vector<std::uint8_t>& bytes, const std::string& source = "<memory>");
void save_aligner(const AlignerModel& model, const std::filesystem::path& path);
AlignerModel load_aligner(const std::filesystem::path& path);

}  // namespace cbdsel
