#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <vector>

#include "stacknet/classification.hpp"
#include "stacknet/params.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

/// Sample covariance of the +-1 coded predictions of a binary classification
/// table (class 1 -> +1, class 2 -> -1), with per-model means.
struct PredictionCovariance {
  Eigen::MatrixXd q;
  Eigen::VectorXd mu;
  /// Difference of class priors P[Y=+1] - P[Y=-1], when known. Informational:
  /// the off-diagonal structure absorbs (1-b^2) into the eigenvalue, so the
  /// eigenvector is recoverable without it.
  std::optional<double> class_imbalance;
  Index sample_count = 0;
};

/// Principal eigenpair of the rank-one completed covariance.
struct SpectralEstimate {
  Eigen::VectorXd eigenvector;
  double eigenvalue = 0.0;
  bool sign_resolved = false;
};

/// Population (1/N) covariance of the +-1 coded predictions. Binary only;
/// multi-class spectral estimation is unsupported.
inline PredictionCovariance prediction_covariance(const PredictionTable& table) {
  require_classification(table, "prediction_covariance");
  detail::require_valid_labels(table, "prediction_covariance");
  if (table.num_classes() != 2)
    throw std::invalid_argument(
        "prediction_covariance: unsupported class cardinality (binary K=2 only)");
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const auto& labels = table.labels();
  Eigen::MatrixXd coded(n, m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j) coded(i, j) = labels(i, j) == 1 ? 1.0 : -1.0;
  PredictionCovariance cov;
  cov.sample_count = n;
  cov.mu = coded.colwise().mean();
  const Eigen::MatrixXd centered = coded.rowwise() - cov.mu.transpose();
  cov.q = (centered.transpose() * centered) / static_cast<double>(n);
  return cov;
}

/// Completes the off-diagonal rank-one structure of q: each diagonal entry is
/// the average of the triple products q_jk * q_jl / q_kl over valid pairs
/// (exact on noiseless rank-one input). Pairs with |q_kl| <= threshold are
/// excluded to avoid division blow-ups.
inline Eigen::MatrixXd impute_rank_one_diagonal(const Eigen::MatrixXd& q,
                                                double offdiag_threshold = 1e-6) {
  const Index m = q.rows();
  Eigen::MatrixXd r = q;
  for (Index j = 0; j < m; ++j) {
    double sum = 0.0;
    int count = 0;
    for (Index k = 0; k < m; ++k) {
      if (k == j) continue;
      for (Index l = k + 1; l < m; ++l) {
        if (l == j) continue;
        if (std::abs(q(k, l)) <= offdiag_threshold) continue;
        sum += q(j, k) * q(j, l) / q(k, l);
        ++count;
      }
    }
    r(j, j) = count > 0 ? sum / count : 0.0;
  }
  return r;
}

struct PowerIterationResult {
  Eigen::VectorXd eigenvector;
  double eigenvalue = 0.0;
  int iterations = 0;
};

/// Dominant eigenpair of a symmetric matrix by power iteration, starting from
/// the normalized all-ones vector.
inline PowerIterationResult power_iteration(const Eigen::MatrixXd& a, double tol = 1e-10,
                                            int max_iters = 10000) {
  const Index m = a.rows();
  if (m != a.cols()) throw std::invalid_argument("power_iteration: matrix must be square");
  if (m < 1) throw std::invalid_argument("power_iteration: empty matrix");
  Eigen::VectorXd v = Eigen::VectorXd::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
  PowerIterationResult result;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd u = a * v;
    const double norm = u.norm();
    if (norm == 0.0)
      throw std::runtime_error("power_iteration: iterate annihilated (matrix maps start to zero)");
    u /= norm;
    // A negative dominant eigenvalue flips the iterate each step; compare
    // against both signs.
    const double delta = std::min((u - v).norm(), (u + v).norm());
    v = u;
    result.iterations = it + 1;
    if (delta < tol) break;
  }
  result.eigenvector = v;
  result.eigenvalue = v.dot(a * v);
  return result;
}

/// Recovers the rank-one factor of the prediction covariance: completes the
/// diagonal from triple products, then extracts the principal eigenpair.
/// The eigenvector entries estimate (2 pi_j - 1) up to a common sign.
inline SpectralEstimate rank_one_recover(const PredictionCovariance& cov,
                                         double offdiag_threshold = 1e-6) {
  const Index m = cov.q.rows();
  if (m < 3)
    throw std::invalid_argument(
        "rank_one_recover: need at least 3 models (diagonal recovery uses triple products)");
  bool any_signal = false;
  for (Index j = 0; j < m && !any_signal; ++j)
    for (Index k = j + 1; k < m; ++k)
      if (std::abs(cov.q(j, k)) > offdiag_threshold) {
        any_signal = true;
        break;
      }
  if (!any_signal)
    throw std::runtime_error(
        "rank_one_recover: no signal (all off-diagonal covariances below threshold)");
  const Eigen::MatrixXd completed = impute_rank_one_diagonal(cov.q, offdiag_threshold);
  const PowerIterationResult pi = power_iteration(completed);
  SpectralEstimate est;
  est.eigenvector = pi.eigenvector;
  est.eigenvalue = pi.eigenvalue;
  est.sign_resolved = false;
  return est;
}

/// Resolves the sign ambiguity of the eigenvector: flips it so that a strict
/// majority of entries are positive (majority-competence assumption). When
/// positive and negative counts tie, flips so the largest-magnitude entry is
/// positive. Applying twice equals applying once.
inline SpectralEstimate resolve_sign(SpectralEstimate est) {
  const Index m = est.eigenvector.size();
  int pos = 0, neg = 0;
  for (Index j = 0; j < m; ++j) {
    if (est.eigenvector(j) > 0.0) ++pos;
    if (est.eigenvector(j) < 0.0) ++neg;
  }
  bool flip = false;
  if (neg > pos) {
    flip = true;
  } else if (neg == pos) {
    Index arg = 0;
    est.eigenvector.cwiseAbs().maxCoeff(&arg);
    flip = est.eigenvector(arg) < 0.0;
  }
  if (flip) est.eigenvector = -est.eigenvector;
  est.sign_resolved = true;
  return est;
}

/// Combination weights from the sign-resolved eigenvector: negative entries
/// clamped to zero, then normalized to sum 1.
inline CombinerParams spectral_weights(const SpectralEstimate& est) {
  if (!est.sign_resolved)
    throw std::invalid_argument("spectral_weights: resolve_sign must be applied first");
  Eigen::VectorXd w = est.eigenvector.cwiseMax(0.0);
  const double total = w.sum();
  if (total == 0.0)
    throw std::runtime_error("spectral_weights: no competent model (all entries <= 0)");
  CombinerParams params;
  params.weights = w / total;
  return params;
}

/// Per-model balanced accuracy computed on the labeled subset only (few-shot
/// reliability estimation). Classes absent from the subset are skipped.
inline std::vector<double> supervised_bca_estimate(const PredictionTable& table,
                                                   const LabeledSubset& labels) {
  require_classification(table, "supervised_bca_estimate");
  if (labels.empty()) throw std::invalid_argument("supervised_bca_estimate: empty labeled subset");
  const Index m = table.num_models();
  std::vector<int> truth(static_cast<std::size_t>(labels.size()));
  for (Index i = 0; i < labels.size(); ++i)
    truth[static_cast<std::size_t>(i)] = labels.target_label(i);
  std::vector<double> out(static_cast<std::size_t>(m));
  std::vector<int> preds(static_cast<std::size_t>(labels.size()));
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < labels.size(); ++i)
      preds[static_cast<std::size_t>(i)] = table.label(labels.index(i), j);
    out[static_cast<std::size_t>(j)] = balanced_accuracy(preds, truth, table.num_classes());
  }
  return out;
}

}  // namespace stacknet
