#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stacknet/params.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

/// Sample error covariance C of the base regressors on labeled data:
/// C[j][j'] = E[(h_j(x) - y)(h_j'(x) - y)].
struct ErrorCovariance {
  Eigen::MatrixXd matrix;
  Index estimated_from = 0;
};

struct RegressionTrainConfig {
  double learning_rate = 0.05;
  int epochs = 2000;
  std::uint64_t seed = 0;
};

inline void require_regression(const PredictionTable& table, const char* op) {
  if (!table.is_regression())
    throw std::invalid_argument(std::string(op) + ": kind mismatch (expected regression table)");
}

/// Mean of the base predictions per sample.
inline Eigen::VectorXd uniform_average(const PredictionTable& table) {
  require_regression(table, "uniform_average");
  return table.values().rowwise().mean();
}

namespace detail {
/// Gathers the labeled rows into (H, y) for vectorized training.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> gather_labeled(const PredictionTable& table,
                                                                  const LabeledSubset& labels) {
  const Index nl = labels.size();
  Eigen::MatrixXd h(nl, table.num_models());
  Eigen::VectorXd y(nl);
  for (Index i = 0; i < nl; ++i) {
    const Index row = labels.index(i);
    if (row >= table.num_samples())
      throw std::invalid_argument("labeled index out of range");
    h.row(i) = table.values().row(row);
    y(i) = labels.target(i);
  }
  return {std::move(h), std::move(y)};
}
}  // namespace detail

/// Population (1/N_l) covariance of per-model errors on the labeled subset.
inline ErrorCovariance estimate_error_covariance(const PredictionTable& table,
                                                 const LabeledSubset& labels) {
  require_regression(table, "estimate_error_covariance");
  if (labels.size() < 2)
    throw std::invalid_argument("estimate_error_covariance: need at least 2 labeled samples");
  auto [h, y] = detail::gather_labeled(table, labels);
  const Eigen::MatrixXd errors = h.colwise() - y;  // eps_j(x_i) = h_j(x_i) - y_i
  ErrorCovariance cov;
  cov.estimated_from = labels.size();
  cov.matrix = (errors.transpose() * errors) / static_cast<double>(labels.size());
  return cov;
}

/// Weights each model inversely to its error variance (diagonal of C).
/// A model with exactly zero variance is treated as perfect: all weight is
/// split among such models.
inline CombinerParams inverse_variance_weights(const ErrorCovariance& cov) {
  const Index m = cov.matrix.rows();
  const Eigen::VectorXd diag = cov.matrix.diagonal();
  for (Index j = 0; j < m; ++j)
    if (diag(j) < 0.0)
      throw std::invalid_argument("inverse_variance_weights: negative variance on diagonal");
  CombinerParams p;
  p.bias = 0.0;
  p.weights = Eigen::VectorXd::Zero(m);
  const Index perfect = (diag.array() == 0.0).count();
  if (perfect > 0) {
    for (Index j = 0; j < m; ++j)
      if (diag(j) == 0.0) p.weights(j) = 1.0 / static_cast<double>(perfect);
    return p;
  }
  p.weights = diag.cwiseInverse();
  p.weights /= p.weights.sum();
  return p;
}

struct WeightSolution {
  CombinerParams params;
  bool used_fallback = false;  // inverse-variance fallback for ill-conditioned C
};

/// Minimum-error weights under the sum-to-one constraint:
/// w_j = sum_j' (C^-1)_{jj'} / sum_{j''j'} (C^-1)_{j''j'}.
/// Falls back to inverse-variance weights when C is singular or its condition
/// number exceeds `condition_threshold`.
inline WeightSolution optimal_weights_covariance(const ErrorCovariance& cov,
                                                 double condition_threshold = 1e12) {
  const Index m = cov.matrix.rows();
  if (m != cov.matrix.cols())
    throw std::invalid_argument("optimal_weights_covariance: matrix must be square");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov.matrix);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("optimal_weights_covariance: eigendecomposition failed");
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  WeightSolution sol;
  if (lo <= 0.0 || hi / lo > condition_threshold) {
    sol.params = inverse_variance_weights(cov);
    sol.used_fallback = true;
    return sol;
  }
  const Eigen::VectorXd row_sums = cov.matrix.ldlt().solve(Eigen::VectorXd::Ones(m));
  const double total = row_sums.sum();
  if (total == 0.0 || !std::isfinite(total))
    throw std::runtime_error("optimal_weights_covariance: degenerate solution");
  sol.params.bias = 0.0;
  sol.params.weights = row_sums / total;
  return sol;
}

/// MSE of the combined prediction w.h(x) + b over the labeled subset.
inline double regression_loss(const PredictionTable& table, const LabeledSubset& labels,
                              const CombinerParams& params) {
  require_regression(table, "regression_loss");
  if (labels.empty()) throw std::invalid_argument("regression_loss: empty labeled subset");
  auto [h, y] = detail::gather_labeled(table, labels);
  const double b = params.bias.value_or(0.0);
  const Eigen::VectorXd r = (h * params.weights).array() + b - y.array();
  return r.squaredNorm() / static_cast<double>(labels.size());
}

/// Analytic gradient of regression_loss with respect to (w, b).
inline std::pair<Eigen::VectorXd, double> regression_loss_gradient(const PredictionTable& table,
                                                                   const LabeledSubset& labels,
                                                                   const CombinerParams& params) {
  require_regression(table, "regression_loss_gradient");
  if (labels.empty()) throw std::invalid_argument("regression_loss_gradient: empty labeled subset");
  auto [h, y] = detail::gather_labeled(table, labels);
  const double b = params.bias.value_or(0.0);
  const Eigen::VectorXd r = (h * params.weights).array() + b - y.array();
  const double scale = 2.0 / static_cast<double>(labels.size());
  Eigen::VectorXd gw = scale * (h.transpose() * r);
  const double gb = scale * r.sum();
  return {std::move(gw), gb};
}

struct RegressionTrainResult {
  CombinerParams params;
  /// Loss before each step plus the final loss (epochs + 1 entries).
  std::vector<double> loss_history;
};

/// Full-batch projected gradient descent on the MSE objective. Weights and
/// bias are clamped to >= 0 after every step; initialization is the uniform
/// combination (w_j = 1/M, b = 0).
inline RegressionTrainResult stacking_regression_train(const PredictionTable& table,
                                                       const LabeledSubset& labels,
                                                       const RegressionTrainConfig& cfg) {
  require_regression(table, "stacking_regression_train");
  if (labels.empty())
    throw std::invalid_argument("stacking_regression_train: empty labeled subset");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("stacking_regression_train: learning_rate must be positive");
  if (cfg.epochs < 1) throw std::invalid_argument("stacking_regression_train: epochs must be >= 1");
  auto [h, y] = detail::gather_labeled(table, labels);
  const Index m = table.num_models();
  const double inv_nl = 1.0 / static_cast<double>(labels.size());

  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  double b = 0.0;
  RegressionTrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs) + 1);

  Eigen::VectorXd r(labels.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    r = (h * w).array() + b - y.array();
    const double loss = r.squaredNorm() * inv_nl;
    if (!std::isfinite(loss))
      throw std::runtime_error("stacking_regression_train: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.loss_history.push_back(loss);
    const double scale = 2.0 * inv_nl;
    w -= cfg.learning_rate * scale * (h.transpose() * r);
    b -= cfg.learning_rate * scale * r.sum();
    w = w.cwiseMax(0.0);
    b = std::max(b, 0.0);
  }
  r = (h * w).array() + b - y.array();
  result.loss_history.push_back(r.squaredNorm() * inv_nl);
  result.params.weights = std::move(w);
  result.params.bias = b;
  return result;
}

/// Combined prediction w.h(x) + b, clipped into [0, 1] at inference.
inline Eigen::VectorXd stacking_regression_predict(const PredictionTable& table,
                                                   const CombinerParams& params) {
  require_regression(table, "stacking_regression_predict");
  if (params.weights.size() != table.num_models())
    throw std::invalid_argument("stacking_regression_predict: weight length mismatch");
  const double b = params.bias.value_or(0.0);
  Eigen::VectorXd out = (table.values() * params.weights).array() + b;
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace stacknet
