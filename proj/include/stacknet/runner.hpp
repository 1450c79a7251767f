#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/attack.hpp"
#include "stacknet/baselines.hpp"
#include "stacknet/classification.hpp"
#include "stacknet/config.hpp"
#include "stacknet/csv.hpp"
#include "stacknet/metrics.hpp"
#include "stacknet/regression.hpp"
#include "stacknet/reliability.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/spectral.hpp"
#include "stacknet/synthetic.hpp"
#include "stacknet/table.hpp"
#include "stacknet/version.hpp"

namespace stacknet {

inline const std::vector<std::string>& known_methods() {
  static const std::vector<std::string> methods = {
      "uniform",     "stacknet",    "covariance-optimal", "inverse-variance", "voting",
      "wawa",        "dawid-skene", "sml",                "u-stacknet",       "s-stacknet",
      "detect",      "prune"};
  return methods;
}

struct RunRow {
  std::string method;
  std::string dataset;
  std::uint64_t seed = 0;
  double value = 0.0;
};

struct ExperimentResults {
  std::string metric_name;  // "mae", "bca_percent", or "detection_rate"
  std::vector<RunRow> rows;
  double mean = 0.0;
  double stddev = 0.0;  // sample stddev over seeds; 0 for a single seed
};

namespace detail {

/// Fixed-purpose stream indices derived from the run seed.
enum RunStream : std::uint64_t {
  kStreamSplit = 1,
  kStreamTrain = 2,
  kStreamAttack = 3,
  kStreamTies = 4,
};

struct RunData {
  PredictionTable table;
  /// Rows with known ground truth (all rows for synthetic pools).
  std::vector<Index> truth_rows;
  std::vector<int> truth_labels;     // classification, aligned with truth_rows
  std::vector<double> truth_values;  // regression, aligned with truth_rows
};

inline RunData materialize(const ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.synthetic) {
    SyntheticPoolSpec spec = *cfg.synthetic;
    spec.seed = seed;  // each run draws its own pool
    SyntheticPool pool = generate_synthetic(spec);
    RunData data{std::move(pool.table), {}, {}, {}};
    data.truth_rows.resize(static_cast<std::size_t>(data.table.num_samples()));
    for (Index i = 0; i < data.table.num_samples(); ++i)
      data.truth_rows[static_cast<std::size_t>(i)] = i;
    if (spec.classification) {
      data.truth_labels = std::move(pool.truth_labels);
    } else {
      data.truth_values.assign(pool.truth_values.data(),
                               pool.truth_values.data() + pool.truth_values.size());
    }
    return data;
  }
  const CsvLoadResult loaded = load_csv(cfg.dataset->path, cfg.dataset->schema);
  RunData data{loaded.table, {}, {}, {}};
  for (Index i = 0; i < loaded.labels.size(); ++i) {
    data.truth_rows.push_back(loaded.labels.index(i));
    if (data.table.is_classification())
      data.truth_labels.push_back(loaded.labels.target_label(i));
    else
      data.truth_values.push_back(loaded.labels.target(i));
  }
  if (data.truth_rows.empty())
    throw std::runtime_error("run_experiment: dataset has no labeled rows to evaluate against");
  return data;
}

/// Seeded sample of round(fraction * |truth_rows|) positions (indices into
/// truth_rows) via partial Fisher-Yates.
inline std::vector<std::size_t> sample_positions(std::size_t total, double fraction,
                                                 std::uint64_t seed) {
  const std::size_t count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(total)));
  std::vector<std::size_t> pool(total);
  for (std::size_t i = 0; i < total; ++i) pool[i] = i;
  Rng rng = Rng::stream(seed, kStreamSplit);
  for (std::size_t i = 0; i < count && i + 1 < total; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(total - i - 1)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(std::min(count, total));
  std::sort(pool.begin(), pool.end());
  return pool;
}

struct Split {
  LabeledSubset train;
  std::vector<Index> eval_rows;
  std::vector<int> eval_labels;
  std::vector<double> eval_values;
};

inline Split make_split(const RunData& data, double fraction, bool include_labeled_in_eval,
                        std::uint64_t seed) {
  const auto picked = sample_positions(data.truth_rows.size(), fraction, seed);
  std::vector<bool> in_train(data.truth_rows.size(), false);
  for (std::size_t p : picked) in_train[p] = true;
  Split split;
  std::vector<Index> train_rows;
  std::vector<int> train_labels;
  std::vector<double> train_values;
  for (std::size_t p = 0; p < data.truth_rows.size(); ++p) {
    if (in_train[p]) {
      train_rows.push_back(data.truth_rows[p]);
      if (!data.truth_labels.empty()) train_labels.push_back(data.truth_labels[p]);
      if (!data.truth_values.empty()) train_values.push_back(data.truth_values[p]);
    }
    if (!in_train[p] || include_labeled_in_eval) {
      split.eval_rows.push_back(data.truth_rows[p]);
      if (!data.truth_labels.empty()) split.eval_labels.push_back(data.truth_labels[p]);
      if (!data.truth_values.empty()) split.eval_values.push_back(data.truth_values[p]);
    }
  }
  if (!data.truth_labels.empty())
    split.train = LabeledSubset::classification(std::move(train_rows), train_labels);
  else
    split.train = LabeledSubset::regression(std::move(train_rows), std::move(train_values));
  if (split.eval_rows.empty())
    throw std::runtime_error(
        "run_experiment: evaluation set is empty (labels_fraction too high without "
        "include_labeled_in_eval)");
  return split;
}

inline double evaluate_regression(const Eigen::VectorXd& predictions, const Split& split) {
  Eigen::VectorXd pred(static_cast<Index>(split.eval_rows.size()));
  Eigen::VectorXd truth(static_cast<Index>(split.eval_rows.size()));
  for (std::size_t i = 0; i < split.eval_rows.size(); ++i) {
    pred(static_cast<Index>(i)) = predictions(split.eval_rows[i]);
    truth(static_cast<Index>(i)) = split.eval_values[i];
  }
  return mae(pred, truth);
}

inline double evaluate_classification(const std::vector<int>& predictions, const Split& split,
                                      int num_classes) {
  std::vector<int> pred(split.eval_rows.size());
  for (std::size_t i = 0; i < split.eval_rows.size(); ++i)
    pred[i] = predictions[static_cast<std::size_t>(split.eval_rows[i])];
  return 100.0 * balanced_accuracy(pred, split.eval_labels, num_classes);
}

inline ClassificationTrainConfig classification_config_for(const ExperimentConfig& cfg,
                                                           bool supervised, std::uint64_t seed) {
  ClassificationTrainConfig train = cfg.classification_train;
  train.seed = Rng::stream(seed, kStreamTrain).next_u64();
  if (cfg.init_mode_override)
    train.init_mode = *cfg.init_mode_override;
  else
    train.init_mode = supervised ? InitMode::kSupervisedBca : InitMode::kVotingBca;
  return train;
}

inline AttackSpec attack_spec_for(const ExperimentConfig& cfg, const RunData& data,
                                  std::uint64_t seed) {
  AttackSpec spec;
  spec.seed = Rng::stream(seed, kStreamAttack).next_u64();
  if (cfg.attack.kind == "random-injection") {
    spec.kind = AttackSpec::Kind::kRandomInjection;
    spec.count = cfg.attack.count;
  } else if (cfg.attack.kind == "label-flip") {
    spec.kind = AttackSpec::Kind::kLabelFlip;
    spec.target = AttackSpec::Target::kModelIds;
    if (cfg.attack.target == "best") {
      // Resolve against ground truth restricted to the truth-bearing rows.
      Eigen::MatrixXi sub(static_cast<Index>(data.truth_rows.size()), data.table.num_models());
      for (std::size_t i = 0; i < data.truth_rows.size(); ++i)
        sub.row(static_cast<Index>(i)) = data.table.labels().row(data.truth_rows[i]);
      std::vector<std::string> row_ids(data.truth_rows.size());
      for (std::size_t i = 0; i < data.truth_rows.size(); ++i)
        row_ids[i] = data.table.sample_ids()[static_cast<std::size_t>(data.truth_rows[i])];
      const PredictionTable view = PredictionTable::classification(
          std::move(sub), data.table.num_classes(), data.table.model_ids(), std::move(row_ids),
          data.table.class_names());
      spec.target_ids = {best_model_by_bca(view, data.truth_labels)};
    } else {
      for (const auto& id : split(cfg.attack.target, ','))
        if (!trim(id).empty()) spec.target_ids.push_back(std::string(trim(id)));
    }
  } else {
    throw std::runtime_error("config: unknown attack kind '" + cfg.attack.kind +
                             "' (expected random-injection|label-flip)");
  }
  return spec;
}

inline double run_single(const ExperimentConfig& cfg, const std::string& method,
                         std::uint64_t seed, std::string& metric_name) {
  RunData data = materialize(cfg, seed);
  const Split split = make_split(data, cfg.labels_fraction, cfg.include_labeled_in_eval, seed);
  const std::uint64_t tie_seed = Rng::stream(seed, kStreamTies).next_u64();

  if (method == "uniform" || method == "stacknet" || method == "covariance-optimal" ||
      method == "inverse-variance") {
    metric_name = "mae";
    if (!data.table.is_regression())
      throw std::runtime_error("run_experiment: method '" + method +
                               "' needs a regression dataset");
    Eigen::VectorXd predictions;
    if (method == "uniform") {
      predictions = uniform_average(data.table);
    } else if (method == "stacknet") {
      RegressionTrainConfig train = cfg.regression_train;
      train.seed = Rng::stream(seed, kStreamTrain).next_u64();
      const auto trained = stacking_regression_train(data.table, split.train, train);
      predictions = stacking_regression_predict(data.table, trained.params);
    } else {
      const ErrorCovariance cov = estimate_error_covariance(data.table, split.train);
      const CombinerParams params = method == "covariance-optimal"
                                        ? optimal_weights_covariance(cov).params
                                        : inverse_variance_weights(cov);
      predictions = stacking_regression_predict(data.table, params);
    }
    return evaluate_regression(predictions, split);
  }

  if (!data.table.is_classification())
    throw std::runtime_error("run_experiment: method '" + method +
                             "' needs a classification dataset");
  const int k = data.table.num_classes();

  if (method == "voting") {
    metric_name = "bca_percent";
    return evaluate_classification(plurality_vote(data.table, tie_seed), split, k);
  }
  if (method == "wawa") {
    metric_name = "bca_percent";
    return evaluate_classification(wawa(data.table, tie_seed).labels, split, k);
  }
  if (method == "dawid-skene") {
    metric_name = "bca_percent";
    const auto ds = dawid_skene(data.table, cfg.em);
    return evaluate_classification(map_labels(ds.posterior), split, k);
  }
  if (method == "sml") {
    metric_name = "bca_percent";
    const auto est = resolve_sign(rank_one_recover(prediction_covariance(data.table)));
    const auto labels = weighted_vote(data.table, spectral_weights(est), tie_seed);
    return evaluate_classification(labels, split, k);
  }
  if (method == "u-stacknet" || method == "s-stacknet") {
    metric_name = "bca_percent";
    const bool supervised = method == "s-stacknet";
    if (supervised && split.train.empty())
      throw std::runtime_error("run_experiment: s-stacknet needs labels_fraction > 0");
    const auto train = classification_config_for(cfg, supervised, seed);
    const LabeledSubset no_labels;
    const auto trained = stacking_classification_train(
        data.table, supervised ? split.train : no_labels, train);
    return evaluate_classification(weighted_vote(data.table, trained.params, tie_seed), split, k);
  }
  if (method == "detect") {
    metric_name = "detection_rate";
    const AttackSpec attack = attack_spec_for(cfg, data, seed);
    const AttackResult attacked = apply_attack(data.table, attack);
    const bool supervised = !split.train.empty();
    const auto train = classification_config_for(cfg, supervised, seed);
    const auto trained = stacking_classification_train(attacked.table, split.train, train);
    const auto report = rank_models(trained.params, attacked.table.model_ids(),
                                    supervised ? ReliabilityMethod::kSStackingNet
                                               : ReliabilityMethod::kUStackingNet);
    const auto suspects = detect_compromised(report, cfg.inspect_fraction);
    for (const auto& id : attacked.attacked_ids)
      if (std::find(suspects.begin(), suspects.end(), id) == suspects.end()) return 0.0;
    return 1.0;
  }
  if (method == "prune") {
    metric_name = "bca_percent";
    const bool supervised = !split.train.empty();
    const auto train = classification_config_for(cfg, supervised, seed);
    std::vector<int> full_truth(static_cast<std::size_t>(data.table.num_samples()), 0);
    const bool full = data.truth_rows.size() ==
                      static_cast<std::size_t>(data.table.num_samples());
    for (std::size_t p = 0; p < data.truth_rows.size(); ++p)
      full_truth[static_cast<std::size_t>(data.truth_rows[p])] = data.truth_labels[p];
    const auto trace =
        prune_iteratively(data.table, supervised ? split.train : LabeledSubset(), train,
                          cfg.prune_steps, full ? &full_truth : nullptr);
    const double metric = trace.steps.empty() ? trace.initial_metric : trace.steps.back().metric;
    return 100.0 * metric;
  }

  std::string valid;
  for (const auto& name : known_methods()) valid += (valid.empty() ? "" : "|") + name;
  throw std::runtime_error("run_experiment: unknown method '" + method + "' (valid: " + valid +
                           ")");
}

}  // namespace detail

/// Executes the configured method once per seed and aggregates mean and
/// sample standard deviation. Fully deterministic: identical (config, seed)
/// inputs produce identical results.
inline ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  if (std::find(known_methods().begin(), known_methods().end(), cfg.method) ==
      known_methods().end()) {
    std::string valid;
    for (const auto& name : known_methods()) valid += (valid.empty() ? "" : "|") + name;
    throw std::runtime_error("run_experiment: unknown method '" + cfg.method +
                             "' (valid: " + valid + ")");
  }
  ExperimentResults results;
  const std::string dataset_name =
      cfg.dataset ? cfg.dataset->name : ("synthetic-" + std::string(cfg.synthetic->classification
                                                                        ? "classification"
                                                                        : "regression"));
  for (std::uint64_t seed : cfg.seeds) {
    RunRow row;
    row.method = cfg.method;
    row.dataset = dataset_name;
    row.seed = seed;
    row.value = detail::run_single(cfg, cfg.method, seed, results.metric_name);
    results.rows.push_back(std::move(row));
  }
  double sum = 0.0;
  for (const auto& row : results.rows) sum += row.value;
  results.mean = sum / static_cast<double>(results.rows.size());
  if (results.rows.size() > 1) {
    double ss = 0.0;
    for (const auto& row : results.rows) ss += (row.value - results.mean) * (row.value - results.mean);
    results.stddev = std::sqrt(ss / static_cast<double>(results.rows.size() - 1));
  }
  return results;
}

/// Machine-readable long-form results. Per-seed rows carry an empty std
/// column; the final aggregate row reports mean and std.
inline std::string results_to_csv(const ExperimentResults& results) {
  std::ostringstream os;
  os << "method,dataset,seed,metric,value,std\n";
  for (const auto& row : results.rows)
    os << row.method << "," << row.dataset << "," << row.seed << "," << results.metric_name << ","
       << format_double(row.value) << ",\n";
  if (!results.rows.empty())
    os << results.rows.front().method << "," << results.rows.front().dataset << ",mean,"
       << results.metric_name << "," << format_double(results.mean) << ","
       << format_double(results.stddev) << "\n";
  return os.str();
}

/// Human-readable summary. Percent metrics use the two-decimal convention.
inline std::string results_to_table(const ExperimentResults& results) {
  std::ostringstream os;
  if (results.rows.empty()) return "(no results)\n";
  const bool percent = results.metric_name == "bca_percent";
  os << std::fixed << std::setprecision(percent ? 2 : 4);
  os << results.rows.front().method << " on " << results.rows.front().dataset << " ("
     << results.rows.size() << " seed" << (results.rows.size() == 1 ? "" : "s")
     << "): " << results.metric_name << " = " << results.mean << " ± " << results.stddev
     << "\n";
  return os.str();
}

inline const std::vector<std::string>& sweepable_params() {
  static const std::vector<std::string> params = {
      "labels_fraction", "learning_rate",    "epochs",      "lambda1",
      "lambda2",         "inspect_fraction", "prune_steps", "attack_count"};
  return params;
}

namespace detail {
inline void apply_sweep_param(ExperimentConfig& cfg, const std::string& param, double value) {
  if (param == "labels_fraction") {
    cfg.labels_fraction = value;
  } else if (param == "learning_rate") {
    cfg.regression_train.learning_rate = value;
    cfg.classification_train.learning_rate = value;
  } else if (param == "epochs") {
    cfg.regression_train.epochs = static_cast<int>(value);
    cfg.classification_train.epochs = static_cast<int>(value);
  } else if (param == "lambda1") {
    cfg.classification_train.lambda1 = value;
  } else if (param == "lambda2") {
    cfg.classification_train.lambda2 = value;
  } else if (param == "inspect_fraction") {
    cfg.inspect_fraction = value;
  } else if (param == "prune_steps") {
    cfg.prune_steps = static_cast<int>(value);
  } else if (param == "attack_count") {
    cfg.attack.count = static_cast<int>(value);
  } else {
    std::string valid;
    for (const auto& name : sweepable_params()) valid += (valid.empty() ? "" : "|") + name;
    throw std::runtime_error("sweep: unknown param '" + param + "' (valid: " + valid + ")");
  }
}
}  // namespace detail

/// Runs the experiment once per parameter value, in the given order, and
/// emits a long-form CSV. An empty value list yields a header-only file.
inline std::string sweep(const ExperimentConfig& base, const std::string& param,
                         const std::vector<double>& values) {
  std::ostringstream os;
  os << "param,param_value,method,dataset,seed,metric,value,std\n";
  for (double value : values) {
    ExperimentConfig cfg = base;
    detail::apply_sweep_param(cfg, param, value);
    const ExperimentResults results = run_experiment(cfg);
    for (const auto& row : results.rows)
      os << param << "," << format_double(value) << "," << row.method << "," << row.dataset << ","
         << row.seed << "," << results.metric_name << "," << format_double(row.value) << ",\n";
    os << param << "," << format_double(value) << "," << base.method << ","
       << results.rows.front().dataset << ",mean," << results.metric_name << ","
       << format_double(results.mean) << "," << format_double(results.stddev) << "\n";
  }
  if (values.empty()) {
    // Validate the param name even when there is nothing to run.
    ExperimentConfig cfg = base;
    detail::apply_sweep_param(cfg, param, 0.0);
  }
  return os.str();
}

/// Provenance record written next to every output artifact.
inline void write_run_meta(std::ostream& os, const std::string& config_text,
                           const std::vector<std::uint64_t>& seeds, const std::string& command) {
  os << "version " << kVersion << "\n";
  std::ostringstream hash;
  hash << std::hex << fnv1a64(config_text);
  os << "config_hash 0x" << hash.str() << "\n";
  os << "seeds ";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  os << "command " << command << "\n";
}

}  // namespace stacknet
