#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/rng.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

/// Synthetic pool under the conditional-independence assumption: per-model
/// accuracies (classification) or error variances with optional pairwise
/// error correlation (regression).
struct SyntheticPoolSpec {
  Index num_samples = 0;
  Index num_models = 0;
  bool classification = true;
  int num_classes = 2;
  /// Classification: per-model balanced accuracy pi_j in (0,1).
  std::vector<double> accuracies;
  /// Regression: per-model error variance > 0.
  std::vector<double> error_variances;
  /// Classification: difference in class priors; class 1 gets prior
  /// 1/K + b(K-1)/K, the rest share the remainder equally.
  double class_imbalance = 0.0;
  /// Regression: pairwise error correlation in [0, 1).
  double correlation = 0.0;
  std::uint64_t seed = 0;
};

struct SyntheticPool {
  PredictionTable table;
  std::vector<int> truth_labels;   // classification
  Eigen::VectorXd truth_values;    // regression
};

namespace detail {
inline std::vector<std::string> sequence_ids(const char* prefix, Index count) {
  int width = 1;
  for (Index v = count; v >= 10; v /= 10) ++width;
  std::vector<std::string> ids;
  ids.reserve(static_cast<std::size_t>(count));
  for (Index i = 1; i <= count; ++i) {
    std::string num = std::to_string(i);
    ids.push_back(prefix + std::string(static_cast<std::size_t>(width) - num.size(), '0') + num);
  }
  return ids;
}
}  // namespace detail

/// Generates a pool with known ground truth. Classification: truth sampled
/// from the imbalance-implied priors; each model is correct with probability
/// pi_j on every class (so its balanced accuracy equals pi_j exactly in
/// expectation), wrong labels uniform over the other classes. Regression:
/// truth uniform in [0,1]; model j adds Gaussian noise with the requested
/// variance and pairwise correlation. Deterministic per seed.
///
/// Regression values are not clipped (clipping would distort the calibrated
/// noise model); the declared range is widened to cover the realized values,
/// so generated tables always validate.
inline SyntheticPool generate_synthetic(const SyntheticPoolSpec& spec) {
  if (spec.num_samples < 1 || spec.num_models < 1)
    throw std::invalid_argument("generate_synthetic: need N >= 1 and M >= 1");
  Rng rng(spec.seed);
  const Index n = spec.num_samples;
  const Index m = spec.num_models;
  auto sample_ids = detail::sequence_ids("s", n);
  auto model_ids = detail::sequence_ids("m", m);

  if (spec.classification) {
    const int k = spec.num_classes;
    if (k < 2) throw std::invalid_argument("generate_synthetic: K must be >= 2");
    if (static_cast<Index>(spec.accuracies.size()) != m)
      throw std::invalid_argument("generate_synthetic: accuracies size must equal M");
    for (double p : spec.accuracies)
      if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("generate_synthetic: accuracies must lie in (0,1)");
    const double p1 =
        1.0 / k + spec.class_imbalance * (static_cast<double>(k) - 1.0) / static_cast<double>(k);
    const double rest = (1.0 - p1) / (static_cast<double>(k) - 1.0);
    if (!(p1 > 0.0 && p1 < 1.0) || !(rest > 0.0))
      throw std::invalid_argument(
          "generate_synthetic: class_imbalance incompatible with K (degenerate priors)");

    std::vector<int> truth(static_cast<std::size_t>(n));
    Eigen::MatrixXi labels(n, m);
    for (Index i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      int y = 1;
      double cum = p1;
      while (u >= cum && y < k) {
        ++y;
        cum += rest;
      }
      truth[static_cast<std::size_t>(i)] = y;
      for (Index j = 0; j < m; ++j) {
        if (rng.uniform01() < spec.accuracies[static_cast<std::size_t>(j)]) {
          labels(i, j) = y;
        } else {
          const int offset = static_cast<int>(rng.uniform_int(1, k - 1));
          const int wrong = offset < y ? offset : offset + 1;
          labels(i, j) = wrong;
        }
      }
    }
    SyntheticPool pool{
        PredictionTable::classification(std::move(labels), k, std::move(model_ids),
                                        std::move(sample_ids)),
        std::move(truth), Eigen::VectorXd()};
    return pool;
  }

  // Regression.
  if (static_cast<Index>(spec.error_variances.size()) != m)
    throw std::invalid_argument("generate_synthetic: error_variances size must equal M");
  for (double v : spec.error_variances)
    if (!(v > 0.0)) throw std::invalid_argument("generate_synthetic: variances must be positive");
  if (!(spec.correlation >= 0.0 && spec.correlation < 1.0))
    throw std::invalid_argument("generate_synthetic: correlation must lie in [0, 1)");

  Eigen::VectorXd truth(n);
  Eigen::MatrixXd values(n, m);
  const double shared_scale = std::sqrt(spec.correlation);
  const double own_scale = std::sqrt(1.0 - spec.correlation);
  for (Index i = 0; i < n; ++i) {
    truth(i) = rng.uniform01();
    const double shared = rng.normal();
    for (Index j = 0; j < m; ++j) {
      const double eps = std::sqrt(spec.error_variances[static_cast<std::size_t>(j)]) *
                         (shared_scale * shared + own_scale * rng.normal());
      values(i, j) = truth(i) + eps;
    }
  }
  ValueRange range{std::min(0.0, values.minCoeff()), std::max(1.0, values.maxCoeff())};
  SyntheticPool pool{PredictionTable::regression(std::move(values), std::move(model_ids),
                                                 std::move(sample_ids), range),
                     std::vector<int>(), std::move(truth)};
  return pool;
}

}  // namespace stacknet
