#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/classification.hpp"
#include "stacknet/metrics.hpp"
#include "stacknet/reliability.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

/// Attack model: inject uniform-random predictors, or flip the outputs of
/// chosen models (the best one, or an explicit id list).
struct AttackSpec {
  enum class Kind { kRandomInjection, kLabelFlip };
  enum class Target { kBestModel, kModelIds };

  Kind kind = Kind::kRandomInjection;
  int count = 1;                        // injected columns (kRandomInjection)
  Target target = Target::kBestModel;   // kLabelFlip
  std::vector<std::string> target_ids;  // kLabelFlip with kModelIds
  std::uint64_t seed = 0;
};

struct AttackResult {
  PredictionTable table;
  /// Ids of injected or flipped columns in the returned table.
  std::vector<std::string> attacked_ids;
};

/// Model with the highest balanced accuracy against ground truth; used to
/// resolve the kBestModel attack target when no reliability report is given.
inline std::string best_model_by_bca(const PredictionTable& table, const std::vector<int>& truth) {
  require_classification(table, "best_model_by_bca");
  if (static_cast<Index>(truth.size()) != table.num_samples())
    throw std::invalid_argument("best_model_by_bca: truth length mismatch");
  const Index m = table.num_models();
  double best = -1.0;
  Index best_j = 0;
  std::vector<int> preds(static_cast<std::size_t>(table.num_samples()));
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < table.num_samples(); ++i)
      preds[static_cast<std::size_t>(i)] = table.label(i, j);
    const double bca = balanced_accuracy(preds, truth, table.num_classes());
    if (bca > best) {
      best = bca;
      best_j = j;
    }
  }
  return table.model_ids()[static_cast<std::size_t>(best_j)];
}

namespace detail {

/// Sattolo's algorithm: a uniformly random single-cycle permutation of 1..K,
/// which is always a derangement (no label maps to itself).
inline std::vector<int> random_derangement(int k, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) perm[static_cast<std::size_t>(i)] = i + 1;
  for (int i = k - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(0, i - 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  return perm;
}

inline std::string unique_injected_id(const std::vector<std::string>& existing, int index) {
  std::string id = "injected-" + std::to_string(index);
  while (std::find(existing.begin(), existing.end(), id) != existing.end()) id += "x";
  return id;
}

}  // namespace detail

/// Applies the attack. Random injection appends seeded uniform-random
/// columns. Label flipping swaps the two classes on binary tables; on K > 2
/// it maps labels through a fixed seeded derangement per attacked model
/// (a consistent adversary, not per-sample noise). Flipping a binary column
/// twice restores it exactly.
inline AttackResult apply_attack(const PredictionTable& table, const AttackSpec& spec,
                                 const ReliabilityReport* best_oracle = nullptr) {
  require_classification(table, "apply_attack");
  detail::require_valid_labels(table, "apply_attack");
  Rng rng(spec.seed);
  const int k = table.num_classes();

  if (spec.kind == AttackSpec::Kind::kRandomInjection) {
    if (spec.count < 1) throw std::invalid_argument("apply_attack: injection count must be >= 1");
    PredictionTable attacked = table;
    std::vector<std::string> ids;
    for (int c = 0; c < spec.count; ++c) {
      Eigen::VectorXi column(table.num_samples());
      for (Index i = 0; i < table.num_samples(); ++i)
        column(i) = static_cast<int>(rng.uniform_int(1, k));
      const std::string id = detail::unique_injected_id(attacked.model_ids(), c + 1);
      attacked = attacked.with_model_appended(column, id);
      ids.push_back(id);
    }
    return AttackResult{std::move(attacked), std::move(ids)};
  }

  // Label flip.
  std::vector<std::string> targets;
  if (spec.target == AttackSpec::Target::kBestModel) {
    if (!best_oracle)
      throw std::invalid_argument(
          "apply_attack: BestModel target needs a ReliabilityReport or ground truth to "
          "identify the best model");
    targets.push_back(best_oracle->best().model_id);
  } else {
    if (spec.target_ids.empty())
      throw std::invalid_argument("apply_attack: no target model ids given");
    targets = spec.target_ids;
  }
  PredictionTable attacked = table;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const Index j = attacked.model_index(targets[t]);
    std::vector<int> mapping;
    if (k == 2) {
      mapping = {2, 1};
    } else {
      Rng derange_rng = Rng::stream(spec.seed, t + 1);
      mapping = detail::random_derangement(k, derange_rng);
    }
    Eigen::VectorXi column(attacked.num_samples());
    for (Index i = 0; i < attacked.num_samples(); ++i)
      column(i) = mapping[static_cast<std::size_t>(attacked.label(i, j) - 1)];
    attacked = attacked.with_model_replaced(j, column);
  }
  return AttackResult{std::move(attacked), std::move(targets)};
}

struct PruneStep {
  std::string removed_model_id;
  Index remaining_models = 0;
  double metric = 0.0;
};

struct PruneTrace {
  double initial_metric = 0.0;
  /// True when the metric is balanced accuracy against ground truth; false
  /// when it is scored against the initial combination's consensus labels.
  bool metric_vs_truth = true;
  std::vector<PruneStep> steps;
};

namespace detail {
inline double prune_metric(const PredictionTable& table, const CombinerParams& params,
                           const std::vector<int>& reference, std::uint64_t seed) {
  const std::vector<int> combined = weighted_vote(table, params, seed);
  return balanced_accuracy(combined, reference, table.num_classes());
}
}  // namespace detail

/// Iteratively removes the lowest-weight model: train StackingNet (the
/// unsupervised variant when `labels` is empty), drop the rank-M model,
/// retrain, recording the post-prune metric each step. The metric is BCA
/// against `truth` when given; otherwise against the initial combination's
/// consensus labels (recorded via metric_vs_truth).
inline PruneTrace prune_iteratively(const PredictionTable& table, const LabeledSubset& labels,
                                    const ClassificationTrainConfig& cfg, int steps,
                                    const std::vector<int>* truth = nullptr) {
  require_classification(table, "prune_iteratively");
  if (steps < 0) throw std::invalid_argument("prune_iteratively: steps must be >= 0");
  if (steps >= table.num_models())
    throw std::invalid_argument("prune_iteratively: pruning " + std::to_string(steps) +
                                " of " + std::to_string(table.num_models()) +
                                " models would empty the ensemble");
  const auto method =
      labels.empty() ? ReliabilityMethod::kUStackingNet : ReliabilityMethod::kSStackingNet;

  PruneTrace trace;
  PredictionTable current = table;
  ClassificationTrainConfig step_cfg = cfg;
  CombinerParams params = stacking_classification_train(current, labels, step_cfg).params;

  std::vector<int> reference;
  if (truth) {
    if (static_cast<Index>(truth->size()) != table.num_samples())
      throw std::invalid_argument("prune_iteratively: truth length mismatch");
    reference = *truth;
    trace.metric_vs_truth = true;
  } else {
    reference = consensus_pseudo_labels(current, params, cfg.seed);
    trace.metric_vs_truth = false;
  }
  trace.initial_metric = detail::prune_metric(current, params, reference, cfg.seed);

  for (int s = 0; s < steps; ++s) {
    const ReliabilityReport report = rank_models(params, current.model_ids(), method);
    const std::string victim = report.worst().model_id;
    current = current.without_model(current.model_index(victim));
    step_cfg.seed = Rng::stream(cfg.seed, static_cast<std::uint64_t>(s) + 1).next_u64();
    params = stacking_classification_train(current, labels, step_cfg).params;
    PruneStep step;
    step.removed_model_id = victim;
    step.remaining_models = current.num_models();
    step.metric = detail::prune_metric(current, params, reference, step_cfg.seed);
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

}  // namespace stacknet
