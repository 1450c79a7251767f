#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stacknet/metrics.hpp"
#include "stacknet/params.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

enum class InitMode { kUniform, kSupervisedBca, kVotingBca };
enum class ClassWeighting { kNone, kInverseFrequency };

struct ClassificationTrainConfig {
  double learning_rate = 0.05;
  int epochs = 2000;
  double lambda1 = 1.0;  // unsupervised consensus loss
  double lambda2 = 1.0;  // sum-to-one regularizer
  InitMode init_mode = InitMode::kUniform;
  ClassWeighting class_weighting = ClassWeighting::kNone;
  std::uint64_t seed = 0;
};

/// Outcome of majority voting: a class label, or a rejection when no class
/// wins more than half of the votes. `margin` is the vote-count gap between
/// the top class and the runner-up.
struct VoteResult {
  int label = 0;  // valid only when !rejected
  int margin = 0;
  bool rejected = false;
};

inline void require_classification(const PredictionTable& table, const char* op) {
  if (!table.is_classification())
    throw std::invalid_argument(std::string(op) +
                                ": kind mismatch (expected classification table)");
}

namespace detail {

/// Label entries must lie in {1..K} before they are used as indices.
inline void require_valid_labels(const PredictionTable& table, const char* op) {
  if (table.num_samples() == 0 || table.num_models() == 0) return;
  const auto& l = table.labels();
  if (l.minCoeff() < 1 || l.maxCoeff() > table.num_classes())
    throw std::invalid_argument(std::string(op) +
                                ": table contains labels outside {1..K}; run validate_table");
}

/// Argmax over scores with ties broken uniformly at random. The RNG is
/// consumed only when two or more classes tie at the exact maximum, so
/// identical tie structure implies identical draws.
template <typename Scalar>
int argmax_random_ties(const std::vector<Scalar>& scores, Rng& rng) {
  Scalar best = scores[0];
  for (std::size_t k = 1; k < scores.size(); ++k) best = std::max(best, scores[k]);
  int tied = 0;
  for (std::size_t k = 0; k < scores.size(); ++k)
    if (scores[k] == best) ++tied;
  if (tied == 1) {
    for (std::size_t k = 0; k < scores.size(); ++k)
      if (scores[k] == best) return static_cast<int>(k) + 1;
  }
  const int pick = static_cast<int>(rng.uniform_int(0, tied - 1));
  int seen = 0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    if (scores[k] == best && seen++ == pick) return static_cast<int>(k) + 1;
  }
  throw std::logic_error("argmax_random_ties: unreachable");
}

inline std::vector<int> weighted_vote_impl(const PredictionTable& table,
                                           const Eigen::VectorXd& weights, Rng& rng) {
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const int k = table.num_classes();
  const auto& labels = table.labels();
  std::vector<int> out(static_cast<std::size_t>(n));
  std::vector<double> scores(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    std::fill(scores.begin(), scores.end(), 0.0);
    for (Index j = 0; j < m; ++j) scores[static_cast<std::size_t>(labels(i, j) - 1)] += weights(j);
    out[static_cast<std::size_t>(i)] = argmax_random_ties(scores, rng);
  }
  return out;
}

inline std::vector<int> plurality_vote_impl(const PredictionTable& table, Rng& rng) {
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const int k = table.num_classes();
  const auto& labels = table.labels();
  std::vector<int> out(static_cast<std::size_t>(n));
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (Index j = 0; j < m; ++j) ++counts[static_cast<std::size_t>(labels(i, j) - 1)];
    out[static_cast<std::size_t>(i)] = argmax_random_ties(counts, rng);
  }
  return out;
}

}  // namespace detail

/// Per sample, the class with the most votes; ties broken uniformly at random
/// with the seeded stream.
inline std::vector<int> plurality_vote(const PredictionTable& table, std::uint64_t seed) {
  require_classification(table, "plurality_vote");
  detail::require_valid_labels(table, "plurality_vote");
  Rng rng(seed);
  return detail::plurality_vote_impl(table, rng);
}

/// Per sample, a class label only if it receives strictly more than M/2
/// votes, a rejection otherwise.
inline std::vector<VoteResult> majority_vote(const PredictionTable& table) {
  require_classification(table, "majority_vote");
  detail::require_valid_labels(table, "majority_vote");
  const Index n = table.num_samples();
  const Index m = table.num_models();
  const int k = table.num_classes();
  const auto& labels = table.labels();
  std::vector<VoteResult> out(static_cast<std::size_t>(n));
  std::vector<int> counts(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    std::fill(counts.begin(), counts.end(), 0);
    for (Index j = 0; j < m; ++j) ++counts[static_cast<std::size_t>(labels(i, j) - 1)];
    int top = 0, second = 0, top_class = 1;
    for (int c = 0; c < k; ++c) {
      const int v = counts[static_cast<std::size_t>(c)];
      if (v > top) {
        second = top;
        top = v;
        top_class = c + 1;
      } else if (v > second) {
        second = v;
      }
    }
    VoteResult r;
    r.margin = top - second;
    if (2 * top > static_cast<int>(m)) {
      r.label = top_class;
    } else {
      r.rejected = true;
    }
    out[static_cast<std::size_t>(i)] = r;
  }
  return out;
}

/// Weighted voting weights from per-model accuracies: w_j = log(p_j/(1-p_j)),
/// with negative log-odds clamped to zero and the result normalized to sum 1
/// (keeps the convex-combination constraint; models at or below chance get
/// zero weight).
inline CombinerParams log_odds_weights(const std::vector<double>& accuracies) {
  if (accuracies.empty()) throw std::invalid_argument("log_odds_weights: empty accuracy vector");
  Eigen::VectorXd w(static_cast<Index>(accuracies.size()));
  for (std::size_t j = 0; j < accuracies.size(); ++j) {
    const double p = accuracies[j];
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument(
          "log_odds_weights: accuracy must lie strictly in (0,1); clamp inputs to "
          "[1e-6, 1-1e-6] first");
    w(static_cast<Index>(j)) = std::max(std::log(p / (1.0 - p)), 0.0);
  }
  const double total = w.sum();
  if (total == 0.0)
    throw std::runtime_error("log_odds_weights: no model above chance (all log-odds <= 0)");
  CombinerParams params;
  params.weights = w / total;
  return params;
}

/// Per sample, argmax_k of the combined class score sum_j w_j [h_j(x) = k];
/// ties broken uniformly at random with the seeded stream.
inline std::vector<int> weighted_vote(const PredictionTable& table, const CombinerParams& params,
                                      std::uint64_t seed) {
  require_classification(table, "weighted_vote");
  detail::require_valid_labels(table, "weighted_vote");
  if (params.weights.size() != table.num_models())
    throw std::invalid_argument("weighted_vote: weight length mismatch");
  Rng rng(seed);
  return detail::weighted_vote_impl(table, params.weights, rng);
}

/// Consensus pseudo-labels: the one-hot argmax of the combined class score.
/// Identical to weighted_vote by definition.
inline std::vector<int> consensus_pseudo_labels(const PredictionTable& table,
                                                const CombinerParams& params, std::uint64_t seed) {
  require_classification(table, "consensus_pseudo_labels");
  detail::require_valid_labels(table, "consensus_pseudo_labels");
  if (params.weights.size() != table.num_models())
    throw std::invalid_argument("consensus_pseudo_labels: weight length mismatch");
  Rng rng(seed);
  return detail::weighted_vote_impl(table, params.weights, rng);
}

namespace detail {

/// Per-sample loss scale: 1 (uniform) or 1/freq(class) on the labeled subset.
inline std::vector<double> supervised_scales(const PredictionTable& table,
                                             const LabeledSubset& labels,
                                             ClassWeighting weighting) {
  const Index nl = labels.size();
  std::vector<double> scale(static_cast<std::size_t>(nl), 1.0);
  if (weighting == ClassWeighting::kInverseFrequency) {
    std::vector<double> counts(static_cast<std::size_t>(table.num_classes()), 0.0);
    for (Index i = 0; i < nl; ++i) ++counts[static_cast<std::size_t>(labels.target_label(i) - 1)];
    for (Index i = 0; i < nl; ++i) {
      const double freq =
          counts[static_cast<std::size_t>(labels.target_label(i) - 1)] / static_cast<double>(nl);
      scale[static_cast<std::size_t>(i)] = 1.0 / freq;
    }
  }
  return scale;
}

/// Stable softmax cross-entropy and its gradient contribution for one sample.
/// Returns the CE loss; accumulates d(loss)/dw into `grad` when given.
inline double softmax_ce_sample(const PredictionTable& table, Index row, int truth_label,
                                const Eigen::VectorXd& w, double sample_scale,
                                Eigen::VectorXd* grad) {
  const int k = table.num_classes();
  const Index m = table.num_models();
  const auto& labels = table.labels();
  std::vector<double> scores(static_cast<std::size_t>(k), 0.0);
  for (Index j = 0; j < m; ++j) scores[static_cast<std::size_t>(labels(row, j) - 1)] += w(j);
  double max_score = scores[0];
  for (int c = 1; c < k; ++c) max_score = std::max(max_score, scores[static_cast<std::size_t>(c)]);
  double z = 0.0;
  for (int c = 0; c < k; ++c) z += std::exp(scores[static_cast<std::size_t>(c)] - max_score);
  const double log_z = std::log(z) + max_score;
  const double loss = sample_scale * (log_z - scores[static_cast<std::size_t>(truth_label - 1)]);
  if (grad) {
    // d(loss)/dw_j = scale * (softmax[h_j(x)] - [h_j(x) == y])
    for (Index j = 0; j < m; ++j) {
      const int c = labels(row, j);
      const double p = std::exp(scores[static_cast<std::size_t>(c - 1)] - log_z);
      (*grad)(j) += sample_scale * (p - (c == truth_label ? 1.0 : 0.0));
    }
  }
  return loss;
}

}  // namespace detail

/// Cross-entropy of the softmaxed combined score against the labeled targets,
/// averaged over the labeled subset. With kInverseFrequency, each sample's
/// term is scaled by the inverse relative frequency of its class in D_l.
inline double loss_supervised(const PredictionTable& table, const LabeledSubset& labels,
                              const CombinerParams& params,
                              ClassWeighting weighting = ClassWeighting::kNone) {
  require_classification(table, "loss_supervised");
  detail::require_valid_labels(table, "loss_supervised");
  if (labels.empty()) throw std::invalid_argument("loss_supervised: empty labeled subset");
  const auto scale = detail::supervised_scales(table, labels, weighting);
  double total = 0.0;
  for (Index i = 0; i < labels.size(); ++i)
    total += detail::softmax_ce_sample(table, labels.index(i), labels.target_label(i),
                                       params.weights, scale[static_cast<std::size_t>(i)], nullptr);
  return total / static_cast<double>(labels.size());
}

inline Eigen::VectorXd loss_supervised_gradient(const PredictionTable& table,
                                                const LabeledSubset& labels,
                                                const CombinerParams& params,
                                                ClassWeighting weighting = ClassWeighting::kNone) {
  require_classification(table, "loss_supervised_gradient");
  detail::require_valid_labels(table, "loss_supervised_gradient");
  if (labels.empty()) throw std::invalid_argument("loss_supervised_gradient: empty labeled subset");
  const auto scale = detail::supervised_scales(table, labels, weighting);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(table.num_models());
  for (Index i = 0; i < labels.size(); ++i)
    detail::softmax_ce_sample(table, labels.index(i), labels.target_label(i), params.weights,
                              scale[static_cast<std::size_t>(i)], &grad);
  return grad / static_cast<double>(labels.size());
}

/// Weighted disagreement with the consensus pseudo-labels:
/// mean_i sum_j w_j [h_j(x_i) != y_hat_i]. The pseudo-labels are treated as
/// constants, so the loss is linear in w.
inline double loss_unsupervised(const PredictionTable& table, const CombinerParams& params,
                                const std::vector<int>& pseudo_labels) {
  require_classification(table, "loss_unsupervised");
  detail::require_valid_labels(table, "loss_unsupervised");
  const Index n = table.num_samples();
  if (static_cast<Index>(pseudo_labels.size()) != n)
    throw std::invalid_argument("loss_unsupervised: pseudo-label length mismatch");
  const auto& labels = table.labels();
  double total = 0.0;
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < table.num_models(); ++j)
      if (labels(i, j) != pseudo_labels[static_cast<std::size_t>(i)]) total += params.weights(j);
  return total / static_cast<double>(n);
}

/// Convenience overload that derives the pseudo-labels from the current
/// weights with a seeded stream.
inline double loss_unsupervised(const PredictionTable& table, const CombinerParams& params,
                                std::uint64_t seed) {
  return loss_unsupervised(table, params, consensus_pseudo_labels(table, params, seed));
}

/// Gradient of loss_unsupervised: the per-model disagreement rate with the
/// (fixed) pseudo-labels. Independent of w.
inline Eigen::VectorXd loss_unsupervised_gradient(const PredictionTable& table,
                                                  const std::vector<int>& pseudo_labels) {
  require_classification(table, "loss_unsupervised_gradient");
  detail::require_valid_labels(table, "loss_unsupervised_gradient");
  const Index n = table.num_samples();
  if (static_cast<Index>(pseudo_labels.size()) != n)
    throw std::invalid_argument("loss_unsupervised_gradient: pseudo-label length mismatch");
  const auto& labels = table.labels();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(table.num_models());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < table.num_models(); ++j)
      if (labels(i, j) != pseudo_labels[static_cast<std::size_t>(i)]) grad(j) += 1.0;
  return grad / static_cast<double>(n);
}

/// Sum-to-one regularizer (1 - sum_j w_j)^2.
inline double loss_regularizer(const CombinerParams& params) {
  const double d = 1.0 - params.weights.sum();
  return d * d;
}

inline Eigen::VectorXd loss_regularizer_gradient(const CombinerParams& params) {
  const double d = 1.0 - params.weights.sum();
  return Eigen::VectorXd::Constant(params.weights.size(), -2.0 * d);
}

/// Combined objective L_sup + lambda1 * L_unsup + lambda2 * L_reg, with the
/// supervised term dropped when the labeled subset is empty. Pseudo-labels
/// are supplied by the caller and treated as constants.
inline double classification_loss(const PredictionTable& table, const LabeledSubset& labels,
                                  const CombinerParams& params,
                                  const ClassificationTrainConfig& cfg,
                                  const std::vector<int>& pseudo_labels) {
  double loss = cfg.lambda1 * loss_unsupervised(table, params, pseudo_labels) +
                cfg.lambda2 * loss_regularizer(params);
  if (!labels.empty()) loss += loss_supervised(table, labels, params, cfg.class_weighting);
  return loss;
}

inline Eigen::VectorXd classification_loss_gradient(const PredictionTable& table,
                                                    const LabeledSubset& labels,
                                                    const CombinerParams& params,
                                                    const ClassificationTrainConfig& cfg,
                                                    const std::vector<int>& pseudo_labels) {
  Eigen::VectorXd grad = cfg.lambda1 * loss_unsupervised_gradient(table, pseudo_labels) +
                         cfg.lambda2 * loss_regularizer_gradient(params);
  if (!labels.empty())
    grad += loss_supervised_gradient(table, labels, params, cfg.class_weighting);
  return grad;
}

/// Per-model balanced accuracy against an arbitrary reference labeling
/// restricted to the given rows. Used for BCA-based initialization.
namespace detail {
inline Eigen::VectorXd per_model_bca(const PredictionTable& table,
                                     const std::vector<Index>& rows,
                                     const std::vector<int>& reference) {
  const Index m = table.num_models();
  Eigen::VectorXd bca(m);
  std::vector<int> preds(rows.size());
  std::vector<int> truth(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) truth[r] = reference[r];
  for (Index j = 0; j < m; ++j) {
    for (std::size_t r = 0; r < rows.size(); ++r) preds[r] = table.label(rows[r], j);
    bca(j) = balanced_accuracy(preds, truth, table.num_classes());
  }
  return bca;
}
}  // namespace detail

struct ClassificationTrainResult {
  CombinerParams params;
  /// Combined loss before each step plus the final loss (epochs + 1 entries).
  std::vector<double> loss_history;
};

/// Semi-supervised StackingNet training: full-batch projected gradient
/// descent on L_sup + lambda1 * L_unsup + lambda2 * L_reg, with weights
/// clamped to >= 0 after every step. With an empty labeled subset this is
/// the unsupervised variant (the supervised term is dropped). Pseudo-labels
/// are recomputed from the current weights every epoch and detached from the
/// gradient.
inline ClassificationTrainResult stacking_classification_train(
    const PredictionTable& table, const LabeledSubset& labels,
    const ClassificationTrainConfig& cfg) {
  require_classification(table, "stacking_classification_train");
  detail::require_valid_labels(table, "stacking_classification_train");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("stacking_classification_train: learning_rate must be positive");
  if (cfg.epochs < 1)
    throw std::invalid_argument("stacking_classification_train: epochs must be >= 1");
  if (cfg.lambda1 < 0.0 || cfg.lambda2 < 0.0)
    throw std::invalid_argument("stacking_classification_train: lambdas must be non-negative");
  if (labels.empty() && cfg.lambda1 == 0.0)
    throw std::invalid_argument(
        "stacking_classification_train: degenerate objective (no labels and lambda1 = 0)");

  const Index m = table.num_models();
  Rng rng = Rng::stream(cfg.seed, 0);

  CombinerParams params;
  switch (cfg.init_mode) {
    case InitMode::kUniform:
      params.weights = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
      break;
    case InitMode::kSupervisedBca: {
      if (labels.empty())
        throw std::invalid_argument(
            "stacking_classification_train: SupervisedBCA init requires labeled data");
      std::vector<int> ref(static_cast<std::size_t>(labels.size()));
      for (Index i = 0; i < labels.size(); ++i)
        ref[static_cast<std::size_t>(i)] = labels.target_label(i);
      params.weights = detail::per_model_bca(table, labels.indices(), ref);
      break;
    }
    case InitMode::kVotingBca: {
      const std::vector<int> consensus = detail::plurality_vote_impl(table, rng);
      std::vector<Index> all(static_cast<std::size_t>(table.num_samples()));
      for (Index i = 0; i < table.num_samples(); ++i) all[static_cast<std::size_t>(i)] = i;
      params.weights = detail::per_model_bca(table, all, consensus);
      break;
    }
  }
  if (cfg.init_mode != InitMode::kUniform) {
    // Every model wrong on a tiny labeled set leaves nothing to normalize.
    const double total = params.weights.sum();
    if (total > 0.0)
      params.weights /= total;
    else
      params.weights.setConstant(1.0 / static_cast<double>(m));
  }

  ClassificationTrainResult result;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<int> pseudo = detail::weighted_vote_impl(table, params.weights, rng);
    const double loss = classification_loss(table, labels, params, cfg, pseudo);
    if (!std::isfinite(loss))
      throw std::runtime_error("stacking_classification_train: non-finite loss at epoch " +
                               std::to_string(epoch));
    result.loss_history.push_back(loss);
    const Eigen::VectorXd grad =
        classification_loss_gradient(table, labels, params, cfg, pseudo);
    params.weights -= cfg.learning_rate * grad;
    params.weights = params.weights.cwiseMax(0.0);
  }
  const std::vector<int> pseudo = detail::weighted_vote_impl(table, params.weights, rng);
  result.loss_history.push_back(classification_loss(table, labels, params, cfg, pseudo));
  result.params = std::move(params);
  return result;
}

/// Balanced accuracy over non-rejected majority votes; rejected samples are
/// excluded from scoring and counted separately.
struct RejectingScore {
  double bca = 0.0;
  Index rejected = 0;
};

inline RejectingScore balanced_accuracy_with_rejection(const std::vector<VoteResult>& votes,
                                                       const std::vector<int>& truth,
                                                       int num_classes) {
  if (votes.size() != truth.size())
    throw std::invalid_argument("balanced_accuracy_with_rejection: length mismatch");
  std::vector<int> preds, kept_truth;
  RejectingScore score;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    if (votes[i].rejected) {
      ++score.rejected;
      continue;
    }
    preds.push_back(votes[i].label);
    kept_truth.push_back(truth[i]);
  }
  if (preds.empty()) throw std::invalid_argument("balanced_accuracy_with_rejection: all rejected");
  score.bca = balanced_accuracy(preds, kept_truth, num_classes);
  return score;
}

}  // namespace stacknet
