#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <vector>

namespace stacknet {

inline double mae(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("mae: length mismatch");
  if (predictions.size() == 0) throw std::invalid_argument("mae: empty input");
  return (predictions - truth).cwiseAbs().mean();
}

inline double mse(const Eigen::VectorXd& predictions, const Eigen::VectorXd& truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("mse: length mismatch");
  if (predictions.size() == 0) throw std::invalid_argument("mse: empty input");
  return (predictions - truth).squaredNorm() / static_cast<double>(predictions.size());
}

inline double accuracy(const std::vector<int>& predictions, const std::vector<int>& truth) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("accuracy: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    if (predictions[i] == truth[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

/// Mean of per-class recall over the classes present in `truth`. Classes
/// absent from `truth` are skipped; `absent_classes`, when given, receives
/// their count so callers can surface a warning.
inline double balanced_accuracy(const std::vector<int>& predictions, const std::vector<int>& truth,
                                int num_classes, int* absent_classes = nullptr) {
  if (predictions.size() != truth.size())
    throw std::invalid_argument("balanced_accuracy: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("balanced_accuracy: empty input");
  std::vector<std::size_t> total(static_cast<std::size_t>(num_classes), 0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i];
    if (y < 1 || y > num_classes)
      throw std::invalid_argument("balanced_accuracy: truth label outside {1..K}");
    ++total[static_cast<std::size_t>(y - 1)];
    if (predictions[i] == y) ++correct[static_cast<std::size_t>(y - 1)];
  }
  double sum = 0.0;
  int present = 0;
  int absent = 0;
  for (int k = 0; k < num_classes; ++k) {
    if (total[static_cast<std::size_t>(k)] == 0) {
      ++absent;
      continue;
    }
    sum += static_cast<double>(correct[static_cast<std::size_t>(k)]) /
           static_cast<double>(total[static_cast<std::size_t>(k)]);
    ++present;
  }
  if (absent_classes) *absent_classes = absent;
  if (present == 0) throw std::invalid_argument("balanced_accuracy: no class present in truth");
  return sum / static_cast<double>(present);
}

namespace detail {
inline void require_permutation(const std::vector<int>& r, const char* what) {
  const int m = static_cast<int>(r.size());
  std::vector<bool> seen(static_cast<std::size_t>(m), false);
  for (int v : r) {
    if (v < 1 || v > m || seen[static_cast<std::size_t>(v - 1)])
      throw std::invalid_argument(std::string(what) + ": not a permutation of 1..M");
    seen[static_cast<std::size_t>(v - 1)] = true;
  }
}
}  // namespace detail

/// Kendall's tau between two rankings given as permutations of 1..M
/// (rank_x[i] is the rank of item i under ordering x). No ties possible.
inline double kendall_tau(const std::vector<int>& rank_a, const std::vector<int>& rank_b) {
  if (rank_a.size() != rank_b.size()) throw std::invalid_argument("kendall_tau: length mismatch");
  const int m = static_cast<int>(rank_a.size());
  if (m < 2) throw std::invalid_argument("kendall_tau: need at least two items");
  detail::require_permutation(rank_a, "kendall_tau");
  detail::require_permutation(rank_b, "kendall_tau");
  long long concordant = 0, discordant = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const int da = rank_a[static_cast<std::size_t>(i)] - rank_a[static_cast<std::size_t>(j)];
      const int db = rank_b[static_cast<std::size_t>(i)] - rank_b[static_cast<std::size_t>(j)];
      if (da * db > 0)
        ++concordant;
      else
        ++discordant;
    }
  }
  const double pairs = static_cast<double>(m) * (m - 1) / 2.0;
  return static_cast<double>(concordant - discordant) / pairs;
}

/// Kendall's tau-b over raw scores, with the tie correction. Use this when
/// comparing weight vectors that may contain exact ties.
inline double kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("kendall_tau_b: length mismatch");
  const int m = static_cast<int>(x.size());
  if (m < 2) throw std::invalid_argument("kendall_tau_b: need at least two items");
  long long concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (int i = 0; i < m; ++i) {
    for (int j = i + 1; j < m; ++j) {
      const double dx = x[static_cast<std::size_t>(i)] - x[static_cast<std::size_t>(j)];
      const double dy = y[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(j)];
      if (dx == 0.0 && dy == 0.0) {
        ++ties_x;
        ++ties_y;
      } else if (dx == 0.0) {
        ++ties_x;
      } else if (dy == 0.0) {
        ++ties_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = static_cast<double>(m) * (m - 1) / 2.0;
  const double denom =
      std::sqrt((n0 - static_cast<double>(ties_x)) * (n0 - static_cast<double>(ties_y)));
  if (denom == 0.0) return 0.0;  // one list fully tied carries no rank information
  return static_cast<double>(concordant - discordant) / denom;
}

}  // namespace stacknet
