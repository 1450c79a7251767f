#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/io.hpp"
#include "stacknet/table.hpp"

namespace stacknet {

/// Schema binding for a prediction CSV. For regression, lo/hi give the
/// clipping bounds used for min-max normalization; when absent the observed
/// min/max are used and a warning is emitted. For classification, K defaults
/// to the number of distinct observed labels.
struct CsvSchema {
  TableKind kind = TableKind::kClassification;
  std::optional<double> lo;
  std::optional<double> hi;
  std::optional<int> num_classes;
  /// Apply min-max normalization to regression values (and targets) at load.
  bool normalize = true;
};

struct CsvLoadResult {
  PredictionTable table;
  LabeledSubset labels;
  std::vector<std::string> warnings;
};

namespace detail {

[[noreturn]] inline void csv_error(std::size_t line_number, const std::string& message) {
  throw std::runtime_error("csv: line " + std::to_string(line_number) + ": " + message);
}

/// Canonical class order: numeric when every label parses as an integer,
/// lexicographic otherwise. Deterministic across platforms.
inline std::vector<std::string> canonical_class_order(const std::vector<std::string>& distinct) {
  std::vector<std::string> order = distinct;
  const bool all_numeric =
      std::all_of(order.begin(), order.end(), [](const std::string& s) {
        return is_integer_literal(s);
      });
  if (all_numeric) {
    std::sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
      return parse_int(a) < parse_int(b);
    });
  } else {
    std::sort(order.begin(), order.end());
  }
  return order;
}

}  // namespace detail

/// Parses the schema `sample_id, <model_1>, ..., <model_M>[, label]`.
/// The label column is optional; rows where it is non-empty define the
/// labeled subset. Any missing or unparseable prediction cell is a hard
/// error (the response matrix must be complete). Class labels are
/// canonicalized to contiguous 1..K; the original strings are kept as the
/// table's class names.
inline CsvLoadResult load_csv(std::istream& is, const CsvSchema& schema) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("csv: empty file");
  std::size_t line_number = 1;
  auto header = split(trim(line), ',');
  for (auto& h : header) h = std::string(trim(h));
  if (header.size() < 2 || header[0] != "sample_id")
    detail::csv_error(1, "header must start with 'sample_id' and name at least one model");
  const bool has_label = header.back() == "label";
  const std::size_t m = header.size() - 1 - (has_label ? 1 : 0);
  if (m < 1) detail::csv_error(1, "no model columns");
  std::vector<std::string> model_ids(header.begin() + 1, header.begin() + 1 + m);
  {
    std::set<std::string> seen;
    for (const auto& id : model_ids)
      if (!seen.insert(id).second) detail::csv_error(1, "duplicate model id '" + id + "'");
  }

  std::vector<std::string> sample_ids;
  std::set<std::string> seen_samples;
  std::vector<std::vector<std::string>> cells;   // per row, m prediction cells
  std::vector<std::string> label_cells;          // per row, "" when unlabeled
  while (std::getline(is, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != header.size())
      detail::csv_error(line_number, "expected " + std::to_string(header.size()) +
                                         " fields, found " + std::to_string(fields.size()));
    for (auto& f : fields) f = std::string(trim(f));
    if (!seen_samples.insert(fields[0]).second)
      detail::csv_error(line_number, "duplicate sample id '" + fields[0] + "'");
    sample_ids.push_back(fields[0]);
    for (std::size_t j = 1; j <= m; ++j)
      if (fields[j].empty())
        detail::csv_error(line_number, "blank prediction cell in column '" + header[j] +
                                           "' (complete response matrix required)");
    cells.emplace_back(fields.begin() + 1, fields.begin() + 1 + m);
    label_cells.push_back(has_label ? fields.back() : std::string());
  }
  const Index n = static_cast<Index>(sample_ids.size());
  if (n == 0) throw std::runtime_error("csv: no data rows");

  std::vector<std::string> warnings;

  if (schema.kind == TableKind::kRegression) {
    Eigen::MatrixXd values(n, static_cast<Index>(m));
    for (Index i = 0; i < n; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double parsed = 0.0;
        try {
          parsed = parse_double(cells[static_cast<std::size_t>(i)][j]);
        } catch (const std::exception&) {
          detail::csv_error(static_cast<std::size_t>(i) + 2,
                            "unparseable value '" + cells[static_cast<std::size_t>(i)][j] + "'");
        }
        if (!std::isfinite(parsed))
          detail::csv_error(static_cast<std::size_t>(i) + 2,
                            "non-finite value '" + cells[static_cast<std::size_t>(i)][j] + "'");
        values(i, static_cast<Index>(j)) = parsed;
      }
    std::vector<Index> indices;
    std::vector<double> targets;
    for (Index i = 0; i < n; ++i) {
      const auto& cell = label_cells[static_cast<std::size_t>(i)];
      if (cell.empty()) continue;
      indices.push_back(i);
      targets.push_back(parse_double(cell));
    }
    double lo = schema.lo.value_or(values.minCoeff());
    double hi = schema.hi.value_or(values.maxCoeff());
    if (!schema.lo || !schema.hi)
      warnings.push_back("regression range not configured; using observed min/max [" +
                         format_double(lo) + ", " + format_double(hi) + "]");
    if (!(hi > lo)) throw std::runtime_error("csv: degenerate value range (hi <= lo)");
    if (schema.normalize) {
      const double span = hi - lo;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < static_cast<Index>(m); ++j)
          values(i, j) = (std::clamp(values(i, j), lo, hi) - lo) / span;
      for (double& t : targets) t = (std::clamp(t, lo, hi) - lo) / span;
      lo = 0.0;
      hi = 1.0;
    }
    CsvLoadResult result{
        PredictionTable::regression(std::move(values), std::move(model_ids),
                                    std::move(sample_ids), ValueRange{lo, hi}),
        LabeledSubset::regression(std::move(indices), std::move(targets)), std::move(warnings)};
    return result;
  }

  // Classification: canonicalize the union of prediction and label strings.
  std::map<std::string, int> class_index;
  {
    std::vector<std::string> distinct;
    for (const auto& row : cells)
      for (const auto& cell : row)
        if (!class_index.count(cell)) {
          class_index.emplace(cell, 0);
          distinct.push_back(cell);
        }
    for (const auto& cell : label_cells)
      if (!cell.empty() && !class_index.count(cell)) {
        class_index.emplace(cell, 0);
        distinct.push_back(cell);
      }
    const auto order = detail::canonical_class_order(distinct);
    for (std::size_t k = 0; k < order.size(); ++k) class_index[order[k]] = static_cast<int>(k) + 1;
  }
  int k = static_cast<int>(class_index.size());
  if (schema.num_classes) {
    if (*schema.num_classes < k)
      throw std::runtime_error("csv: observed " + std::to_string(k) +
                               " distinct labels but schema declares K=" +
                               std::to_string(*schema.num_classes));
    k = *schema.num_classes;
  }
  if (k < 2) throw std::runtime_error("csv: classification needs K >= 2 distinct labels");
  std::vector<std::string> class_names(static_cast<std::size_t>(k));
  for (const auto& [name, idx] : class_index)
    class_names[static_cast<std::size_t>(idx) - 1] = name;
  for (std::size_t c = 0; c < class_names.size(); ++c)
    if (class_names[c].empty()) class_names[c] = "class-" + std::to_string(c + 1);

  Eigen::MatrixXi labels(n, static_cast<Index>(m));
  for (Index i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      labels(i, static_cast<Index>(j)) = class_index.at(cells[static_cast<std::size_t>(i)][j]);
  std::vector<Index> indices;
  std::vector<int> targets;
  for (Index i = 0; i < n; ++i) {
    const auto& cell = label_cells[static_cast<std::size_t>(i)];
    if (cell.empty()) continue;
    indices.push_back(i);
    targets.push_back(class_index.at(cell));
  }
  CsvLoadResult result{
      PredictionTable::classification(std::move(labels), k, std::move(model_ids),
                                      std::move(sample_ids), std::move(class_names)),
      LabeledSubset::classification(std::move(indices), targets), std::move(warnings)};
  return result;
}

inline CsvLoadResult load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("csv: cannot open '" + path + "'");
  return load_csv(is, schema);
}

/// Writes a table (plus optional labels) in the same schema load_csv reads.
/// Values use shortest round-trip formatting, so load(save(load(x))) is
/// bit-identical to load(x).
inline void save_csv(const PredictionTable& table, const LabeledSubset* labels, std::ostream& os) {
  os << "sample_id";
  for (const auto& id : table.model_ids()) os << "," << id;
  if (labels) os << ",label";
  os << "\n";
  std::map<Index, Index> labeled_rows;  // row -> position in subset
  if (labels)
    for (Index i = 0; i < labels->size(); ++i) labeled_rows.emplace(labels->index(i), i);
  for (Index i = 0; i < table.num_samples(); ++i) {
    os << table.sample_ids()[static_cast<std::size_t>(i)];
    for (Index j = 0; j < table.num_models(); ++j) {
      os << ",";
      if (table.is_regression())
        os << format_double(table.values()(i, j));
      else
        os << table.class_names()[static_cast<std::size_t>(table.label(i, j)) - 1];
    }
    if (labels) {
      os << ",";
      const auto it = labeled_rows.find(i);
      if (it != labeled_rows.end()) {
        if (table.is_regression())
          os << format_double(labels->target(it->second));
        else
          os << table.class_names()[static_cast<std::size_t>(labels->target_label(it->second)) - 1];
      }
    }
    os << "\n";
  }
}

inline std::string table_to_csv(const PredictionTable& table, const LabeledSubset* labels) {
  std::ostringstream os;
  save_csv(table, labels, os);
  return os.str();
}

}  // namespace stacknet
