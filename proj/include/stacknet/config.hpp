#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stacknet/baselines.hpp"
#include "stacknet/classification.hpp"
#include "stacknet/csv.hpp"
#include "stacknet/io.hpp"
#include "stacknet/regression.hpp"
#include "stacknet/synthetic.hpp"

namespace stacknet {

/// Flat key-value + sections text format:
///   # comment
///   [section]
///   key = value
class KvConfig {
 public:
  static KvConfig parse(std::istream& is) {
    KvConfig cfg;
    std::ostringstream raw;
    std::string line;
    std::string section;
    std::size_t line_number = 0;
    while (std::getline(is, line)) {
      ++line_number;
      raw << line << "\n";
      const auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw std::runtime_error("config: line " + std::to_string(line_number) +
                                   ": unterminated section header");
        section = std::string(trim(t.substr(1, t.size() - 2)));
        cfg.sections_[section];  // record even if empty
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string_view::npos)
        throw std::runtime_error("config: line " + std::to_string(line_number) +
                                 ": expected 'key = value'");
      const std::string key(trim(t.substr(0, eq)));
      const std::string value(trim(t.substr(eq + 1)));
      if (key.empty())
        throw std::runtime_error("config: line " + std::to_string(line_number) + ": empty key");
      cfg.sections_[section][key] = value;
    }
    cfg.raw_text_ = raw.str();
    return cfg;
  }

  static KvConfig parse_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open '" + path + "'");
    return parse(is);
  }

  static KvConfig parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  bool has_section(const std::string& section) const { return sections_.count(section) > 0; }

  bool has(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    return it != sections_.end() && it->second.count(key) > 0;
  }

  std::string get(const std::string& section, const std::string& key) const {
    auto it = sections_.find(section);
    if (it == sections_.end() || !it->second.count(key))
      throw std::runtime_error("config: missing key '" + key + "' in section [" + section + "]");
    return it->second.at(key);
  }

  std::string get_or(const std::string& section, const std::string& key,
                     const std::string& fallback) const {
    return has(section, key) ? get(section, key) : fallback;
  }

  double get_double(const std::string& section, const std::string& key) const {
    return parse_double(get(section, key));
  }
  double get_double_or(const std::string& section, const std::string& key, double fallback) const {
    return has(section, key) ? get_double(section, key) : fallback;
  }
  std::int64_t get_int(const std::string& section, const std::string& key) const {
    return parse_int(get(section, key));
  }
  std::int64_t get_int_or(const std::string& section, const std::string& key,
                          std::int64_t fallback) const {
    return has(section, key) ? get_int(section, key) : fallback;
  }
  bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const {
    if (!has(section, key)) return fallback;
    const std::string v = get(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: boolean expected for '" + key + "', found '" + v + "'");
  }
  std::vector<double> get_double_list(const std::string& section, const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : split(get(section, key), ','))
      if (!trim(item).empty()) out.push_back(parse_double(trim(item)));
    return out;
  }
  std::vector<std::uint64_t> get_seed_list(const std::string& section,
                                           const std::string& key) const {
    std::vector<std::uint64_t> out;
    for (const auto& item : split(get(section, key), ','))
      if (!trim(item).empty()) out.push_back(static_cast<std::uint64_t>(parse_int(trim(item))));
    return out;
  }

  const std::string& raw_text() const { return raw_text_; }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
  std::string raw_text_;
};

inline InitMode parse_init_mode(const std::string& s) {
  if (s == "uniform") return InitMode::kUniform;
  if (s == "supervised-bca") return InitMode::kSupervisedBca;
  if (s == "voting-bca") return InitMode::kVotingBca;
  throw std::runtime_error("config: unknown init_mode '" + s +
                           "' (expected uniform|supervised-bca|voting-bca)");
}

inline ClassWeighting parse_class_weighting(const std::string& s) {
  if (s == "none") return ClassWeighting::kNone;
  if (s == "inverse-frequency") return ClassWeighting::kInverseFrequency;
  throw std::runtime_error("config: unknown class_weighting '" + s +
                           "' (expected none|inverse-frequency)");
}

struct DatasetBinding {
  std::string name;
  std::string path;
  CsvSchema schema;
};

struct AttackConfig {
  std::string kind = "random-injection";  // or "label-flip"
  int count = 1;
  std::string target = "best";  // or comma-separated model ids
};

/// Fully parsed experiment description: dataset or synthetic pool binding,
/// method name, supervision fraction, seeds, and method-specific blocks.
struct ExperimentConfig {
  std::string method;
  std::optional<DatasetBinding> dataset;
  std::optional<SyntheticPoolSpec> synthetic;
  double labels_fraction = 0.0;
  std::vector<std::uint64_t> seeds{0};
  bool include_labeled_in_eval = false;

  RegressionTrainConfig regression_train;
  ClassificationTrainConfig classification_train;
  /// Set only when the config names init_mode explicitly; otherwise the
  /// runner picks the method's default.
  std::optional<InitMode> init_mode_override;
  EmConfig em;
  AttackConfig attack;
  double inspect_fraction = 0.5;
  int prune_steps = 0;

  std::string config_text;  // raw text for provenance hashing
};

namespace detail {

inline CsvSchema parse_schema(const KvConfig& kv, const std::string& section) {
  CsvSchema schema;
  const std::string kind = kv.get_or(section, "kind", "classification");
  if (kind == "classification") {
    schema.kind = TableKind::kClassification;
    if (kv.has(section, "classes"))
      schema.num_classes = static_cast<int>(kv.get_int(section, "classes"));
  } else if (kind == "regression") {
    schema.kind = TableKind::kRegression;
    if (kv.has(section, "lo")) schema.lo = kv.get_double(section, "lo");
    if (kv.has(section, "hi")) schema.hi = kv.get_double(section, "hi");
  } else {
    throw std::runtime_error("config: unknown dataset kind '" + kind + "'");
  }
  return schema;
}

inline DatasetBinding parse_dataset_section(const KvConfig& kv, const std::string& section,
                                            const std::string& name,
                                            const std::string& data_dir) {
  DatasetBinding ds;
  ds.name = name;
  ds.path = kv.get(section, "path");
  if (!ds.path.empty() && ds.path.front() != '/' && !data_dir.empty())
    ds.path = data_dir + "/" + ds.path;
  ds.schema = parse_schema(kv, section);
  return ds;
}

inline SyntheticPoolSpec parse_synthetic_section(const KvConfig& kv, const std::string& section) {
  SyntheticPoolSpec spec;
  spec.num_samples = kv.get_int(section, "samples");
  spec.num_models = kv.get_int(section, "models");
  const std::string kind = kv.get_or(section, "kind", "classification");
  if (kind == "classification") {
    spec.classification = true;
    spec.num_classes = static_cast<int>(kv.get_int_or(section, "classes", 2));
    spec.accuracies = kv.get_double_list(section, "accuracies");
    spec.class_imbalance = kv.get_double_or(section, "imbalance", 0.0);
  } else if (kind == "regression") {
    spec.classification = false;
    spec.error_variances = kv.get_double_list(section, "variances");
    spec.correlation = kv.get_double_or(section, "correlation", 0.0);
  } else {
    throw std::runtime_error("config: unknown synthetic kind '" + kind + "'");
  }
  spec.seed = static_cast<std::uint64_t>(kv.get_int_or(section, "seed", 0));
  return spec;
}

}  // namespace detail

/// Resolves a dataset name through the registry file `registry.cfg` under
/// `data_dir` (sections `[dataset.<name>]` with path/kind/range keys).
inline DatasetBinding resolve_registry_dataset(const std::string& name,
                                               const std::string& data_dir) {
  if (data_dir.empty())
    throw std::runtime_error("config: dataset '" + name +
                             "' not defined inline and no data directory configured "
                             "(set STACKNET_DATA_DIR)");
  const std::string registry_path = data_dir + "/registry.cfg";
  const KvConfig registry = KvConfig::parse_file(registry_path);
  const std::string section = "dataset." + name;
  if (!registry.has_section(section))
    throw std::runtime_error("config: dataset '" + name + "' not found in " + registry_path);
  return detail::parse_dataset_section(registry, section, name, data_dir);
}

/// Parses an experiment config. Dataset resolution order: inline
/// [dataset.<name>] section, inline [dataset] section, then the registry
/// under `data_dir`.
inline ExperimentConfig parse_experiment_config(const KvConfig& kv, const std::string& data_dir) {
  ExperimentConfig cfg;
  cfg.config_text = kv.raw_text();
  cfg.method = kv.get("experiment", "method");
  cfg.labels_fraction = kv.get_double_or("experiment", "labels_fraction", 0.0);
  if (cfg.labels_fraction < 0.0 || cfg.labels_fraction > 1.0)
    throw std::runtime_error("config: labels_fraction must lie in [0, 1]");
  if (kv.has("experiment", "seeds")) {
    cfg.seeds = kv.get_seed_list("experiment", "seeds");
    if (cfg.seeds.empty()) throw std::runtime_error("config: seeds list is empty");
  }
  cfg.include_labeled_in_eval = kv.get_bool_or("experiment", "include_labeled_in_eval", false);

  if (kv.has("experiment", "dataset")) {
    const std::string name = kv.get("experiment", "dataset");
    const std::string inline_section = "dataset." + name;
    if (kv.has_section(inline_section))
      cfg.dataset = detail::parse_dataset_section(kv, inline_section, name, data_dir);
    else if (kv.has_section("dataset"))
      cfg.dataset = detail::parse_dataset_section(kv, "dataset", name, data_dir);
    else
      cfg.dataset = resolve_registry_dataset(name, data_dir);
  } else if (kv.has_section("dataset")) {
    cfg.dataset = detail::parse_dataset_section(kv, "dataset", "dataset", data_dir);
  }
  if (kv.has_section("synthetic")) cfg.synthetic = detail::parse_synthetic_section(kv, "synthetic");
  if (cfg.dataset && cfg.synthetic)
    throw std::runtime_error("config: give either a dataset or a synthetic pool, not both");
  if (!cfg.dataset && !cfg.synthetic)
    throw std::runtime_error("config: no dataset or synthetic pool configured");

  cfg.regression_train.learning_rate = kv.get_double_or("train", "learning_rate", 0.05);
  cfg.regression_train.epochs = static_cast<int>(kv.get_int_or("train", "epochs", 2000));
  cfg.classification_train.learning_rate = cfg.regression_train.learning_rate;
  cfg.classification_train.epochs = cfg.regression_train.epochs;
  cfg.classification_train.lambda1 = kv.get_double_or("train", "lambda1", 1.0);
  cfg.classification_train.lambda2 = kv.get_double_or("train", "lambda2", 1.0);
  if (kv.has("train", "init_mode"))
    cfg.init_mode_override = parse_init_mode(kv.get("train", "init_mode"));
  cfg.classification_train.class_weighting =
      parse_class_weighting(kv.get_or("train", "class_weighting", "none"));

  cfg.em.max_iters = static_cast<int>(kv.get_int_or("em", "max_iters", 100));
  cfg.em.tol = kv.get_double_or("em", "tol", 1e-6);
  cfg.em.smoothing = kv.get_double_or("em", "smoothing", 0.01);

  cfg.attack.kind = kv.get_or("attack", "kind", "random-injection");
  cfg.attack.count = static_cast<int>(kv.get_int_or("attack", "count", 1));
  cfg.attack.target = kv.get_or("attack", "target", "best");
  cfg.inspect_fraction = kv.get_double_or("detect", "inspect_fraction", 0.5);
  cfg.prune_steps = static_cast<int>(kv.get_int_or("prune", "steps", 0));
  return cfg;
}

}  // namespace stacknet
