#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stacknet {

using Index = Eigen::Index;

enum class TableKind { kRegression, kClassification };

/// Value range of a regression table. Normalized tables have lo=0, hi=1.
struct ValueRange {
  double lo = 0.0;
  double hi = 1.0;
};

/// Complete N x M matrix of base-model outputs: one row per sample, one
/// column per model. Regression tables hold reals inside a declared range;
/// classification tables hold hard labels in {1..K}. Immutable after
/// construction.
class PredictionTable {
 public:
  static PredictionTable regression(Eigen::MatrixXd values, std::vector<std::string> model_ids,
                                    std::vector<std::string> sample_ids,
                                    ValueRange range = ValueRange{}) {
    PredictionTable t;
    t.kind_ = TableKind::kRegression;
    t.values_ = std::move(values);
    t.range_ = range;
    t.init_ids(std::move(model_ids), std::move(sample_ids), t.values_.rows(), t.values_.cols());
    return t;
  }

  static PredictionTable classification(Eigen::MatrixXi labels, int num_classes,
                                        std::vector<std::string> model_ids,
                                        std::vector<std::string> sample_ids,
                                        std::vector<std::string> class_names = {}) {
    PredictionTable t;
    t.kind_ = TableKind::kClassification;
    t.labels_ = std::move(labels);
    t.num_classes_ = num_classes;
    t.init_ids(std::move(model_ids), std::move(sample_ids), t.labels_.rows(), t.labels_.cols());
    if (class_names.empty()) {
      for (int k = 1; k <= num_classes; ++k) class_names.push_back(std::to_string(k));
    }
    if (static_cast<int>(class_names.size()) != num_classes)
      throw std::invalid_argument("PredictionTable: class_names size must equal K");
    t.class_names_ = std::move(class_names);
    return t;
  }

  TableKind kind() const { return kind_; }
  bool is_regression() const { return kind_ == TableKind::kRegression; }
  bool is_classification() const { return kind_ == TableKind::kClassification; }

  Index num_samples() const { return is_regression() ? values_.rows() : labels_.rows(); }
  Index num_models() const { return is_regression() ? values_.cols() : labels_.cols(); }

  const Eigen::MatrixXd& values() const {
    require_kind(TableKind::kRegression, "values()");
    return values_;
  }
  const Eigen::MatrixXi& labels() const {
    require_kind(TableKind::kClassification, "labels()");
    return labels_;
  }
  int label(Index sample, Index model) const {
    require_kind(TableKind::kClassification, "label()");
    return labels_(sample, model);
  }
  int num_classes() const {
    require_kind(TableKind::kClassification, "num_classes()");
    return num_classes_;
  }
  ValueRange range() const {
    require_kind(TableKind::kRegression, "range()");
    return range_;
  }

  const std::vector<std::string>& model_ids() const { return model_ids_; }
  const std::vector<std::string>& sample_ids() const { return sample_ids_; }
  /// Class names indexed by label-1 (sidecar map from canonicalization).
  const std::vector<std::string>& class_names() const { return class_names_; }

  Index model_index(const std::string& id) const {
    auto it = std::find(model_ids_.begin(), model_ids_.end(), id);
    if (it == model_ids_.end())
      throw std::invalid_argument("PredictionTable: unknown model id '" + id + "'");
    return static_cast<Index>(it - model_ids_.begin());
  }

  /// Copy with model column `j` removed. Used by pruning.
  PredictionTable without_model(Index j) const {
    if (j < 0 || j >= num_models())
      throw std::invalid_argument("PredictionTable::without_model: index out of range");
    const Index m = num_models();
    std::vector<std::string> ids;
    ids.reserve(m - 1);
    for (Index c = 0; c < m; ++c)
      if (c != j) ids.push_back(model_ids_[static_cast<std::size_t>(c)]);
    if (is_regression()) {
      Eigen::MatrixXd v(values_.rows(), m - 1);
      for (Index c = 0, o = 0; c < m; ++c)
        if (c != j) v.col(o++) = values_.col(c);
      return regression(std::move(v), std::move(ids), sample_ids_, range_);
    }
    Eigen::MatrixXi l(labels_.rows(), m - 1);
    for (Index c = 0, o = 0; c < m; ++c)
      if (c != j) l.col(o++) = labels_.col(c);
    return classification(std::move(l), num_classes_, std::move(ids), sample_ids_, class_names_);
  }

  /// Copy with an extra model column appended (classification only).
  PredictionTable with_model_appended(const Eigen::VectorXi& column, const std::string& id) const {
    require_kind(TableKind::kClassification, "with_model_appended()");
    if (column.size() != num_samples())
      throw std::invalid_argument("PredictionTable::with_model_appended: column length mismatch");
    Eigen::MatrixXi l(labels_.rows(), labels_.cols() + 1);
    l.leftCols(labels_.cols()) = labels_;
    l.col(labels_.cols()) = column;
    std::vector<std::string> ids = model_ids_;
    ids.push_back(id);
    return classification(std::move(l), num_classes_, std::move(ids), sample_ids_, class_names_);
  }

  /// Copy with model column `j` replaced (classification only). Used by attacks.
  PredictionTable with_model_replaced(Index j, const Eigen::VectorXi& column) const {
    require_kind(TableKind::kClassification, "with_model_replaced()");
    if (j < 0 || j >= num_models())
      throw std::invalid_argument("PredictionTable::with_model_replaced: index out of range");
    if (column.size() != num_samples())
      throw std::invalid_argument("PredictionTable::with_model_replaced: column length mismatch");
    Eigen::MatrixXi l = labels_;
    l.col(j) = column;
    return classification(std::move(l), num_classes_, model_ids_, sample_ids_, class_names_);
  }

 private:
  PredictionTable() = default;

  void init_ids(std::vector<std::string> model_ids, std::vector<std::string> sample_ids,
                Index n, Index m) {
    if (static_cast<Index>(model_ids.size()) != m)
      throw std::invalid_argument("PredictionTable: model_ids size must equal column count");
    if (static_cast<Index>(sample_ids.size()) != n)
      throw std::invalid_argument("PredictionTable: sample_ids size must equal row count");
    model_ids_ = std::move(model_ids);
    sample_ids_ = std::move(sample_ids);
  }

  void require_kind(TableKind k, const char* what) const {
    if (kind_ != k)
      throw std::invalid_argument(std::string("PredictionTable: kind mismatch in ") + what);
  }

  TableKind kind_ = TableKind::kRegression;
  Eigen::MatrixXd values_;   // regression storage
  Eigen::MatrixXi labels_;   // classification storage
  int num_classes_ = 0;
  ValueRange range_;
  std::vector<std::string> model_ids_;
  std::vector<std::string> sample_ids_;
  std::vector<std::string> class_names_;
};

/// Row indices paired with ground-truth targets: the supervision set.
/// Regression targets are reals (normalized space); classification targets
/// are class labels in {1..K}, stored exactly.
class LabeledSubset {
 public:
  LabeledSubset() = default;

  static LabeledSubset regression(std::vector<Index> indices, std::vector<double> targets) {
    return LabeledSubset(std::move(indices), std::move(targets), TableKind::kRegression);
  }

  static LabeledSubset classification(std::vector<Index> indices, const std::vector<int>& labels) {
    std::vector<double> t(labels.begin(), labels.end());
    return LabeledSubset(std::move(indices), std::move(t), TableKind::kClassification);
  }

  Index size() const { return static_cast<Index>(indices_.size()); }
  bool empty() const { return indices_.empty(); }
  TableKind kind() const { return kind_; }

  Index index(Index i) const { return indices_[static_cast<std::size_t>(i)]; }
  double target(Index i) const { return targets_[static_cast<std::size_t>(i)]; }
  int target_label(Index i) const { return static_cast<int>(targets_[static_cast<std::size_t>(i)]); }

  const std::vector<Index>& indices() const { return indices_; }
  const std::vector<double>& targets() const { return targets_; }

 private:
  LabeledSubset(std::vector<Index> indices, std::vector<double> targets, TableKind kind)
      : indices_(std::move(indices)), targets_(std::move(targets)), kind_(kind) {
    if (indices_.size() != targets_.size())
      throw std::invalid_argument("LabeledSubset: indices and targets must have equal length");
    std::set<Index> seen(indices_.begin(), indices_.end());
    if (seen.size() != indices_.size())
      throw std::invalid_argument("LabeledSubset: duplicate indices");
    for (Index i : indices_)
      if (i < 0) throw std::invalid_argument("LabeledSubset: negative index");
  }

  std::vector<Index> indices_;
  std::vector<double> targets_;
  TableKind kind_ = TableKind::kRegression;
};

/// N x K x M binary tensor: entry (i, k, j) is 1 iff model j predicts class k
/// on sample i.
class OneHotTensor {
 public:
  OneHotTensor(Index n, Index k, Index m)
      : n_(n), k_(k), m_(m), data_(static_cast<std::size_t>(n * k * m), 0) {}

  Index num_samples() const { return n_; }
  Index num_classes() const { return k_; }
  Index num_models() const { return m_; }

  std::uint8_t at(Index i, Index k, Index j) const { return data_[offset(i, k, j)]; }
  void set(Index i, Index k, Index j, std::uint8_t v) { data_[offset(i, k, j)] = v; }

 private:
  std::size_t offset(Index i, Index k, Index j) const {
    return static_cast<std::size_t>((i * k_ + k) * m_ + j);
  }
  Index n_, k_, m_;
  std::vector<std::uint8_t> data_;
};

struct ValidationReport {
  Index num_samples = 0;
  Index num_models = 0;
  TableKind kind = TableKind::kRegression;
  std::vector<std::string> errors;
  bool valid() const { return errors.empty(); }
};

namespace detail {
inline void check_duplicate_ids(const std::vector<std::string>& ids, const char* what,
                                std::vector<std::string>& errors) {
  std::set<std::string> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) errors.push_back(std::string("duplicate ") + what + " '" + id + "'");
  }
}
}  // namespace detail

/// Reports shape, kind consistency, out-of-range entries, and duplicate ids.
/// The error list is empty iff the table satisfies every invariant.
inline ValidationReport validate_table(const PredictionTable& table) {
  ValidationReport report;
  report.num_samples = table.num_samples();
  report.num_models = table.num_models();
  report.kind = table.kind();
  if (table.num_samples() < 1) report.errors.push_back("table has no samples (N >= 1 required)");
  if (table.num_models() < 1) report.errors.push_back("table has no models (M >= 1 required)");
  detail::check_duplicate_ids(table.model_ids(), "model id", report.errors);
  detail::check_duplicate_ids(table.sample_ids(), "sample id", report.errors);
  if (table.is_regression()) {
    const ValueRange r = table.range();
    if (!(r.hi > r.lo)) report.errors.push_back("regression range hi must exceed lo");
    const auto& v = table.values();
    for (Index i = 0; i < v.rows(); ++i) {
      for (Index j = 0; j < v.cols(); ++j) {
        const double x = v(i, j);
        if (!std::isfinite(x)) {
          report.errors.push_back("non-finite value at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ")");
        } else if (x < r.lo || x > r.hi) {
          report.errors.push_back("value " + std::to_string(x) + " at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") outside range [" + std::to_string(r.lo) +
                                  "," + std::to_string(r.hi) + "]");
        }
      }
    }
  } else {
    if (table.num_classes() < 2) report.errors.push_back("classification needs K >= 2");
    const auto& l = table.labels();
    for (Index i = 0; i < l.rows(); ++i) {
      for (Index j = 0; j < l.cols(); ++j) {
        const int x = l(i, j);
        if (x < 1 || x > table.num_classes()) {
          report.errors.push_back("label " + std::to_string(x) + " at (" + std::to_string(i) + "," +
                                  std::to_string(j) + ") outside {1.." +
                                  std::to_string(table.num_classes()) + "}");
        }
      }
    }
  }
  return report;
}

/// Validates a labeled subset against the table it indexes into.
inline ValidationReport validate_subset(const PredictionTable& table, const LabeledSubset& subset) {
  ValidationReport report;
  for (Index i = 0; i < subset.size(); ++i) {
    const Index row = subset.index(i);
    if (row >= table.num_samples())
      report.errors.push_back("labeled index " + std::to_string(row) + " out of range");
    if (table.is_classification()) {
      const int y = subset.target_label(i);
      if (y < 1 || y > table.num_classes())
        report.errors.push_back("labeled target " + std::to_string(y) + " outside {1..K}");
    }
  }
  return report;
}

/// Clips every entry to [lo, hi], then maps it affinely onto [0, 1].
/// Idempotent on already-normalized tables when lo=0, hi=1.
inline PredictionTable normalize_minmax(const PredictionTable& table, double lo, double hi) {
  if (!table.is_regression())
    throw std::invalid_argument("normalize_minmax: kind mismatch (classification table)");
  if (!(hi > lo)) throw std::invalid_argument("normalize_minmax: hi must exceed lo");
  Eigen::MatrixXd v = table.values();
  const double span = hi - lo;
  for (Index i = 0; i < v.rows(); ++i)
    for (Index j = 0; j < v.cols(); ++j)
      v(i, j) = (std::clamp(v(i, j), lo, hi) - lo) / span;
  return PredictionTable::regression(std::move(v), table.model_ids(), table.sample_ids(),
                                     ValueRange{0.0, 1.0});
}

/// Expands hard labels into the one-hot indicator tensor.
inline OneHotTensor one_hot(const PredictionTable& table) {
  if (!table.is_classification())
    throw std::invalid_argument("one_hot: kind mismatch (regression table)");
  const auto& l = table.labels();
  if (l.size() > 0 && (l.minCoeff() < 1 || l.maxCoeff() > table.num_classes()))
    throw std::invalid_argument("one_hot: table contains labels outside {1..K}");
  OneHotTensor t(table.num_samples(), table.num_classes(), table.num_models());
  for (Index i = 0; i < l.rows(); ++i)
    for (Index j = 0; j < l.cols(); ++j) t.set(i, l(i, j) - 1, j, 1);
  return t;
}

}  // namespace stacknet
