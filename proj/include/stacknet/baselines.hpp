#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/classification.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

struct WawaResult {
  std::vector<int> labels;
  /// Per-model agreement fraction with the plurality-vote consensus.
  std::vector<double> reliabilities;
};

/// Worker Agreement with Aggregate: plurality-vote labels, per-model
/// agreement reliabilities, then a reliability-weighted vote.
inline WawaResult wawa(const PredictionTable& table, std::uint64_t seed) {
  require_classification(table, "wawa");
  detail::require_valid_labels(table, "wawa");
  Rng rng(seed);
  const std::vector<int> consensus = detail::plurality_vote_impl(table, rng);
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const auto& labels = table.labels();
  Eigen::VectorXd reliability = Eigen::VectorXd::Zero(m);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < m; ++j)
      if (labels(i, j) == consensus[static_cast<std::size_t>(i)]) reliability(j) += 1.0;
  reliability /= static_cast<double>(n);
  WawaResult result;
  result.labels = detail::weighted_vote_impl(table, reliability, rng);
  result.reliabilities.assign(reliability.data(), reliability.data() + m);
  return result;
}

/// Per-model confusion tensor: values[j][k][k'] is the probability that model
/// j outputs k' given true class k. Rows over k' sum to 1.
class ConfusionTensor {
 public:
  ConfusionTensor(Index m, Index k)
      : m_(m), k_(k), values_(static_cast<std::size_t>(m * k * k), 0.0) {}

  Index num_models() const { return m_; }
  Index num_classes() const { return k_; }

  double at(Index j, Index truth, Index predicted) const {
    return values_[offset(j, truth, predicted)];
  }
  double& at(Index j, Index truth, Index predicted) { return values_[offset(j, truth, predicted)]; }

 private:
  std::size_t offset(Index j, Index truth, Index predicted) const {
    return static_cast<std::size_t>((j * k_ + truth) * k_ + predicted);
  }
  Index m_, k_;
  std::vector<double> values_;
};

struct EmConfig {
  int max_iters = 100;
  double tol = 1e-6;
  /// Additive pseudo-count applied in the M-step; keeps degenerate classes
  /// and confusion cells alive on small N.
  double smoothing = 0.01;
  std::uint64_t seed = 0;
};

struct DawidSkeneResult {
  Eigen::MatrixXd posterior;  // N x K, rows sum to 1
  ConfusionTensor confusion;
  Eigen::VectorXd priors;
  /// Observed-data log-likelihood evaluated once per iteration.
  std::vector<double> log_likelihoods;
  int iterations = 0;

  DawidSkeneResult(Index m, Index k) : confusion(m, k) {}
};

/// Dawid-Skene EM: posteriors initialized from vote fractions (deterministic,
/// no random restarts), M-step re-estimates smoothed priors and confusion
/// tensors, E-step recomputes posteriors in the log domain. Stops when the
/// largest posterior change drops below tol or max_iters is reached.
inline DawidSkeneResult dawid_skene(const PredictionTable& table, const EmConfig& cfg) {
  require_classification(table, "dawid_skene");
  detail::require_valid_labels(table, "dawid_skene");
  if (cfg.max_iters < 1) throw std::invalid_argument("dawid_skene: max_iters must be >= 1");
  if (cfg.tol <= 0.0) throw std::invalid_argument("dawid_skene: tol must be positive");
  if (cfg.smoothing < 0.0) throw std::invalid_argument("dawid_skene: smoothing must be >= 0");
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const Index k = table.num_classes();
  const auto& labels = table.labels();

  DawidSkeneResult result(m, k);
  result.posterior.resize(n, k);
  result.posterior.setZero();
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) result.posterior(i, labels(i, j) - 1) += 1.0;
    result.posterior.row(i) /= static_cast<double>(m);
  }
  result.priors.resize(k);

  Eigen::MatrixXd log_scores(n, k);
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    // M-step: smoothed priors and confusion rows from the current posteriors.
    result.priors = result.posterior.colwise().sum();
    result.priors.array() += cfg.smoothing;
    result.priors /= result.priors.sum();
    for (Index j = 0; j < m; ++j) {
      for (Index t = 0; t < k; ++t)
        for (Index p = 0; p < k; ++p) result.confusion.at(j, t, p) = cfg.smoothing;
      for (Index i = 0; i < n; ++i) {
        const Index p = labels(i, j) - 1;
        for (Index t = 0; t < k; ++t) result.confusion.at(j, t, p) += result.posterior(i, t);
      }
      for (Index t = 0; t < k; ++t) {
        double row_sum = 0.0;
        for (Index p = 0; p < k; ++p) row_sum += result.confusion.at(j, t, p);
        for (Index p = 0; p < k; ++p) result.confusion.at(j, t, p) /= row_sum;
      }
    }

    // E-step in the log domain, with the observed-data log-likelihood from
    // the same pass.
    for (Index i = 0; i < n; ++i)
      for (Index t = 0; t < k; ++t) log_scores(i, t) = std::log(result.priors(t));
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) {
        const Index p = labels(i, j) - 1;
        for (Index t = 0; t < k; ++t) log_scores(i, t) += std::log(result.confusion.at(j, t, p));
      }
    double log_likelihood = 0.0;
    double max_change = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double row_max = log_scores.row(i).maxCoeff();
      double z = 0.0;
      for (Index t = 0; t < k; ++t) z += std::exp(log_scores(i, t) - row_max);
      log_likelihood += row_max + std::log(z);
      for (Index t = 0; t < k; ++t) {
        const double post = std::exp(log_scores(i, t) - row_max) / z;
        max_change = std::max(max_change, std::abs(post - result.posterior(i, t)));
        result.posterior(i, t) = post;
      }
    }
    if (!std::isfinite(log_likelihood))
      throw std::runtime_error("dawid_skene: non-finite log-likelihood at iteration " +
                               std::to_string(iter));
    result.log_likelihoods.push_back(log_likelihood);
    result.iterations = iter + 1;
    if (max_change < cfg.tol) break;
  }
  return result;
}

/// MAP labels from a posterior matrix; exact ties resolve to the lowest class
/// index (deterministic).
inline std::vector<int> map_labels(const Eigen::MatrixXd& posterior) {
  std::vector<int> out(static_cast<std::size_t>(posterior.rows()));
  for (Index i = 0; i < posterior.rows(); ++i) {
    Index arg = 0;
    posterior.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg) + 1;
  }
  return out;
}

}  // namespace stacknet
