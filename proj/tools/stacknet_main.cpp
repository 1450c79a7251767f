// Command-line front end: combine, train, baseline, rank, attack, detect,
// prune, sweep, and generate subcommands over the stacknet library. All
// outputs are CSV files plus a run.meta provenance record in --out.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stacknet/stacknet.hpp"

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::string data_dir;
  std::optional<std::int64_t> seed;
  std::optional<double> labels_fraction;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::string init_mode;
};

void add_common(CLI::App* cmd, CommonOptions& opt, bool config_required = true) {
  auto* config = cmd->add_option("--config", opt.config_path, "experiment config file");
  if (config_required) config->required();
  cmd->add_option("--out", opt.out_dir, "output directory (created if missing)");
  cmd->add_option("--data-dir", opt.data_dir,
                  "dataset root (overrides STACKNET_DATA_DIR)");
  cmd->add_option("--seed", opt.seed, "run with this single seed (overrides config seeds)");
  cmd->add_option("--labels-fraction", opt.labels_fraction,
                  "fraction of labeled rows used for supervision");
  cmd->add_option("--lambda1", opt.lambda1, "weight of the unsupervised consensus loss");
  cmd->add_option("--lambda2", opt.lambda2, "weight of the sum-to-one regularizer");
  cmd->add_option("--init-mode", opt.init_mode,
                  "weight initialization: uniform|supervised-bca|voting-bca");
}

std::string resolve_data_dir(const CommonOptions& opt) {
  if (!opt.data_dir.empty()) return opt.data_dir;
  if (const char* env = std::getenv("STACKNET_DATA_DIR")) return env;
  return {};
}

stacknet::ExperimentConfig load_config(const CommonOptions& opt) {
  const auto kv = stacknet::KvConfig::parse_file(opt.config_path);
  auto cfg = stacknet::parse_experiment_config(kv, resolve_data_dir(opt));
  if (opt.seed) cfg.seeds = {static_cast<std::uint64_t>(*opt.seed)};
  if (opt.labels_fraction) cfg.labels_fraction = *opt.labels_fraction;
  if (opt.lambda1) cfg.classification_train.lambda1 = *opt.lambda1;
  if (opt.lambda2) cfg.classification_train.lambda2 = *opt.lambda2;
  if (!opt.init_mode.empty()) cfg.init_mode_override = stacknet::parse_init_mode(opt.init_mode);
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << content;
}

void write_meta(const fs::path& out_dir, const stacknet::ExperimentConfig& cfg,
                const std::string& command) {
  std::ostringstream os;
  stacknet::write_run_meta(os, cfg.config_text, cfg.seeds, command);
  write_file(out_dir / "run.meta", os.str());
}

fs::path prepare_out(const CommonOptions& opt) {
  fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  return dir;
}

struct LoadedData {
  stacknet::PredictionTable table;
  stacknet::LabeledSubset labels;
};

LoadedData load_table(const stacknet::ExperimentConfig& cfg, std::uint64_t seed) {
  if (cfg.synthetic) {
    stacknet::SyntheticPoolSpec spec = *cfg.synthetic;
    spec.seed = seed;
    auto pool = stacknet::generate_synthetic(spec);
    if (spec.classification) {
      std::vector<stacknet::Index> idx(static_cast<std::size_t>(pool.table.num_samples()));
      for (stacknet::Index i = 0; i < pool.table.num_samples(); ++i)
        idx[static_cast<std::size_t>(i)] = i;
      auto labels = stacknet::LabeledSubset::classification(std::move(idx), pool.truth_labels);
      return LoadedData{std::move(pool.table), std::move(labels)};
    }
    std::vector<stacknet::Index> idx(static_cast<std::size_t>(pool.table.num_samples()));
    for (stacknet::Index i = 0; i < pool.table.num_samples(); ++i)
      idx[static_cast<std::size_t>(i)] = i;
    std::vector<double> targets(pool.truth_values.data(),
                                pool.truth_values.data() + pool.truth_values.size());
    auto labels = stacknet::LabeledSubset::regression(std::move(idx), std::move(targets));
    return LoadedData{std::move(pool.table), std::move(labels)};
  }
  auto loaded = stacknet::load_csv(cfg.dataset->path, cfg.dataset->schema);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
  return LoadedData{std::move(loaded.table), std::move(loaded.labels)};
}

stacknet::LabeledSubset subsample_labels(const stacknet::PredictionTable& table,
                                         const stacknet::LabeledSubset& all, double fraction,
                                         std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(all.size());
  const auto count = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  stacknet::Rng rng = stacknet::Rng::stream(seed, 1);
  for (std::size_t i = 0; i < count && i + 1 < n; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - i - 1)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(std::min(count, n));
  std::sort(pool.begin(), pool.end());
  std::vector<stacknet::Index> idx;
  if (table.is_classification()) {
    std::vector<int> targets;
    for (std::size_t p : pool) {
      idx.push_back(all.index(static_cast<stacknet::Index>(p)));
      targets.push_back(all.target_label(static_cast<stacknet::Index>(p)));
    }
    return stacknet::LabeledSubset::classification(std::move(idx), targets);
  }
  std::vector<double> targets;
  for (std::size_t p : pool) {
    idx.push_back(all.index(static_cast<stacknet::Index>(p)));
    targets.push_back(all.target(static_cast<stacknet::Index>(p)));
  }
  return stacknet::LabeledSubset::regression(std::move(idx), std::move(targets));
}

std::string predictions_csv(const stacknet::PredictionTable& table,
                            const Eigen::VectorXd& predictions) {
  std::string out = "sample_id,prediction\n";
  for (stacknet::Index i = 0; i < table.num_samples(); ++i)
    out += table.sample_ids()[static_cast<std::size_t>(i)] + "," +
           stacknet::format_double(predictions(i)) + "\n";
  return out;
}

std::string labels_csv(const stacknet::PredictionTable& table, const std::vector<int>& labels) {
  std::string out = "sample_id,label\n";
  for (stacknet::Index i = 0; i < table.num_samples(); ++i)
    out += table.sample_ids()[static_cast<std::size_t>(i)] + "," +
           table.class_names()[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)]) - 1] +
           "\n";
  return out;
}

int run_combine(const CommonOptions& opt, const std::string& params_path) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);
  const std::uint64_t tie_seed = stacknet::Rng::stream(seed, 4).next_u64();

  if (data.table.is_regression()) {
    Eigen::VectorXd predictions;
    if (!params_path.empty()) {
      std::ifstream is(params_path);
      if (!is) throw std::runtime_error("cannot open params file " + params_path);
      const auto params = stacknet::load_params(is, data.table.model_ids());
      predictions = stacknet::stacking_regression_predict(data.table, params);
    } else if (cfg.method == "uniform") {
      predictions = stacknet::uniform_average(data.table);
    } else if (cfg.method != "stacknet") {
      throw std::runtime_error("combine: method '" + cfg.method +
                               "' is not a regression combiner here; use uniform, stacknet, "
                               "--params, or the run subcommand");
    } else {
      const auto train = subsample_labels(data.table, data.labels, cfg.labels_fraction, seed);
      stacknet::RegressionTrainConfig rt = cfg.regression_train;
      rt.seed = stacknet::Rng::stream(seed, 2).next_u64();
      const auto trained = stacknet::stacking_regression_train(data.table, train, rt);
      predictions = stacknet::stacking_regression_predict(data.table, trained.params);
    }
    write_file(out / "predictions.csv", predictions_csv(data.table, predictions));
  } else {
    std::vector<int> labels;
    if (!params_path.empty()) {
      std::ifstream is(params_path);
      if (!is) throw std::runtime_error("cannot open params file " + params_path);
      const auto params = stacknet::load_params(is, data.table.model_ids());
      labels = stacknet::weighted_vote(data.table, params, tie_seed);
    } else if (cfg.method == "voting") {
      labels = stacknet::plurality_vote(data.table, tie_seed);
    } else if (cfg.method != "u-stacknet" && cfg.method != "s-stacknet") {
      throw std::runtime_error("combine: method '" + cfg.method +
                               "' is not a combiner here; use voting, u-stacknet, s-stacknet, "
                               "--params, or the baseline/run subcommands");
    } else {
      const bool supervised = cfg.method == "s-stacknet";
      auto train_cfg = cfg.classification_train;
      train_cfg.seed = stacknet::Rng::stream(seed, 2).next_u64();
      if (!cfg.init_mode_override)
        train_cfg.init_mode = supervised ? stacknet::InitMode::kSupervisedBca
                                         : stacknet::InitMode::kVotingBca;
      else
        train_cfg.init_mode = *cfg.init_mode_override;
      const auto train =
          supervised ? subsample_labels(data.table, data.labels, cfg.labels_fraction, seed)
                     : stacknet::LabeledSubset();
      const auto trained = stacknet::stacking_classification_train(data.table, train, train_cfg);
      labels = stacknet::weighted_vote(data.table, trained.params, tie_seed);
    }
    write_file(out / "labels.csv", labels_csv(data.table, labels));
  }
  write_meta(out, cfg, "combine");
  std::cout << "wrote " << (out / (data.table.is_regression() ? "predictions.csv" : "labels.csv"))
            << "\n";
  return 0;
}

int run_train(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);

  stacknet::CombinerParams params;
  if (data.table.is_regression()) {
    const auto train = subsample_labels(data.table, data.labels, cfg.labels_fraction, seed);
    stacknet::RegressionTrainConfig rt = cfg.regression_train;
    rt.seed = stacknet::Rng::stream(seed, 2).next_u64();
    params = stacknet::stacking_regression_train(data.table, train, rt).params;
  } else {
    const bool supervised = cfg.method != "u-stacknet";
    auto train_cfg = cfg.classification_train;
    train_cfg.seed = stacknet::Rng::stream(seed, 2).next_u64();
    if (cfg.init_mode_override)
      train_cfg.init_mode = *cfg.init_mode_override;
    else
      train_cfg.init_mode =
          supervised ? stacknet::InitMode::kSupervisedBca : stacknet::InitMode::kVotingBca;
    const auto train = supervised
                           ? subsample_labels(data.table, data.labels, cfg.labels_fraction, seed)
                           : stacknet::LabeledSubset();
    params = stacknet::stacking_classification_train(data.table, train, train_cfg).params;
  }
  write_file(out / "params.txt", stacknet::params_to_string(params, data.table.model_ids()));
  write_meta(out, cfg, "train");
  std::cout << "wrote " << (out / "params.txt") << "\n";
  return 0;
}

int run_baseline(const CommonOptions& opt, const std::string& method) {
  auto cfg = load_config(opt);
  cfg.method = method;
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);
  const std::uint64_t tie_seed = stacknet::Rng::stream(seed, 4).next_u64();

  std::vector<int> labels;
  std::vector<double> reliabilities(static_cast<std::size_t>(data.table.num_models()),
                                    1.0 / static_cast<double>(data.table.num_models()));
  if (method == "voting") {
    labels = stacknet::plurality_vote(data.table, tie_seed);
  } else if (method == "wawa") {
    auto result = stacknet::wawa(data.table, tie_seed);
    labels = std::move(result.labels);
    reliabilities = std::move(result.reliabilities);
  } else if (method == "dawid-skene") {
    const auto result = stacknet::dawid_skene(data.table, cfg.em);
    labels = stacknet::map_labels(result.posterior);
    for (stacknet::Index j = 0; j < data.table.num_models(); ++j) {
      double diag = 0.0;
      for (stacknet::Index k = 0; k < data.table.num_classes(); ++k)
        diag += result.confusion.at(j, k, k);
      reliabilities[static_cast<std::size_t>(j)] =
          diag / static_cast<double>(data.table.num_classes());
    }
  } else {
    throw std::runtime_error("baseline: unknown method '" + method +
                             "' (expected voting|wawa|dawid-skene)");
  }
  write_file(out / "labels.csv", labels_csv(data.table, labels));
  stacknet::CombinerParams params;
  params.weights = Eigen::Map<const Eigen::VectorXd>(reliabilities.data(),
                                                     static_cast<stacknet::Index>(
                                                         reliabilities.size()));
  const auto report = stacknet::rank_models(params, data.table.model_ids(),
                                            stacknet::ReliabilityMethod::kUStackingNet);
  write_file(out / "reliability.csv", stacknet::reliability_to_csv(report));
  write_meta(out, cfg, "baseline " + method);
  std::cout << "wrote " << (out / "labels.csv") << " and " << (out / "reliability.csv") << "\n";
  return 0;
}

int run_rank(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);

  stacknet::ReliabilityReport report;
  if (cfg.method == "sml") {
    const auto est =
        stacknet::resolve_sign(stacknet::rank_one_recover(stacknet::prediction_covariance(
            data.table)));
    report = stacknet::spectral_reliability_report(est, data.table.model_ids());
  } else if (cfg.method == "supervised-few-shot" || cfg.method == "few-shot") {
    const auto train = subsample_labels(data.table, data.labels, cfg.labels_fraction, seed);
    const auto bca = stacknet::supervised_bca_estimate(data.table, train);
    stacknet::CombinerParams params;
    params.weights =
        Eigen::Map<const Eigen::VectorXd>(bca.data(), static_cast<stacknet::Index>(bca.size()));
    report = stacknet::rank_models(params, data.table.model_ids(),
                                   stacknet::ReliabilityMethod::kSupervisedFewShot, &bca);
  } else {
    const bool supervised = cfg.method == "s-stacknet";
    auto train_cfg = cfg.classification_train;
    train_cfg.seed = stacknet::Rng::stream(seed, 2).next_u64();
    if (cfg.init_mode_override)
      train_cfg.init_mode = *cfg.init_mode_override;
    else
      train_cfg.init_mode =
          supervised ? stacknet::InitMode::kSupervisedBca : stacknet::InitMode::kVotingBca;
    const auto train = supervised
                           ? subsample_labels(data.table, data.labels, cfg.labels_fraction, seed)
                           : stacknet::LabeledSubset();
    const auto trained = stacknet::stacking_classification_train(data.table, train, train_cfg);
    report = stacknet::rank_models(trained.params, data.table.model_ids(),
                                   supervised ? stacknet::ReliabilityMethod::kSStackingNet
                                              : stacknet::ReliabilityMethod::kUStackingNet);
  }
  write_file(out / "reliability.csv", stacknet::reliability_to_csv(report));
  write_meta(out, cfg, "rank");
  std::cout << "wrote " << (out / "reliability.csv") << "\n";
  return 0;
}

int run_attack(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);

  stacknet::AttackSpec spec;
  spec.seed = stacknet::Rng::stream(seed, 3).next_u64();
  if (cfg.attack.kind == "random-injection") {
    spec.kind = stacknet::AttackSpec::Kind::kRandomInjection;
    spec.count = cfg.attack.count;
  } else {
    spec.kind = stacknet::AttackSpec::Kind::kLabelFlip;
    spec.target = stacknet::AttackSpec::Target::kModelIds;
    if (cfg.attack.target == "best") {
      std::vector<int> truth;
      for (stacknet::Index i = 0; i < data.labels.size(); ++i)
        truth.push_back(data.labels.target_label(i));
      if (data.labels.size() != data.table.num_samples())
        throw std::runtime_error("attack: target=best needs full ground truth labels");
      spec.target_ids = {stacknet::best_model_by_bca(data.table, truth)};
    } else {
      for (const auto& id : stacknet::split(cfg.attack.target, ','))
        spec.target_ids.push_back(std::string(stacknet::trim(id)));
    }
  }
  const auto attacked = stacknet::apply_attack(data.table, spec);
  write_file(out / "attacked.csv", stacknet::table_to_csv(attacked.table, &data.labels));
  std::string ids;
  for (const auto& id : attacked.attacked_ids) ids += id + "\n";
  write_file(out / "attacked_ids.txt", ids);
  write_meta(out, cfg, "attack " + cfg.attack.kind);
  std::cout << "wrote " << (out / "attacked.csv") << "\n";
  return 0;
}

int run_detect(const CommonOptions& opt, const std::string& report_path,
               double inspect_fraction_flag) {
  if (report_path.empty() && opt.config_path.empty())
    throw std::runtime_error(
        "detect: give --report <reliability.csv> to inspect an existing ranking, or "
        "--config <file> to run the attack-train-detect protocol");
  const auto out = prepare_out(opt);
  if (!report_path.empty()) {
    std::ifstream is(report_path);
    if (!is) throw std::runtime_error("cannot open report " + report_path);
    const auto report = stacknet::reliability_from_csv(is);
    const auto suspects = stacknet::detect_compromised(report, inspect_fraction_flag);
    std::string csv = "model_id\n";
    for (const auto& id : suspects) csv += id + "\n";
    write_file(out / "suspects.csv", csv);
    std::cout << "wrote " << (out / "suspects.csv") << "\n";
    return 0;
  }
  auto cfg = load_config(opt);
  cfg.method = "detect";
  const auto results = stacknet::run_experiment(cfg);
  write_file(out / "results.csv", stacknet::results_to_csv(results));
  write_meta(out, cfg, "detect");
  std::cout << stacknet::results_to_table(results);
  return 0;
}

int run_prune(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);

  const bool supervised = cfg.labels_fraction > 0.0;
  auto train_cfg = cfg.classification_train;
  train_cfg.seed = stacknet::Rng::stream(seed, 2).next_u64();
  if (cfg.init_mode_override)
    train_cfg.init_mode = *cfg.init_mode_override;
  else
    train_cfg.init_mode =
        supervised ? stacknet::InitMode::kSupervisedBca : stacknet::InitMode::kVotingBca;
  const auto train = supervised
                         ? subsample_labels(data.table, data.labels, cfg.labels_fraction, seed)
                         : stacknet::LabeledSubset();
  std::vector<int> truth;
  const bool full_truth = data.labels.size() == data.table.num_samples();
  if (full_truth)
    for (stacknet::Index i = 0; i < data.labels.size(); ++i)
      truth.push_back(data.labels.target_label(i));
  const auto trace = stacknet::prune_iteratively(data.table, train, train_cfg, cfg.prune_steps,
                                                 full_truth ? &truth : nullptr);
  std::string csv = "step,removed_id,metric\n";
  csv += "0,," + stacknet::format_double(trace.initial_metric) + "\n";
  for (std::size_t s = 0; s < trace.steps.size(); ++s)
    csv += std::to_string(s + 1) + "," + trace.steps[s].removed_model_id + "," +
           stacknet::format_double(trace.steps[s].metric) + "\n";
  write_file(out / "prune_trace.csv", csv);
  write_meta(out, cfg, "prune");
  std::cout << "wrote " << (out / "prune_trace.csv") << "\n";
  return 0;
}

int run_sweep(const CommonOptions& opt, const std::string& param,
              const std::string& values_text) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  std::vector<double> values;
  for (const auto& v : stacknet::split(values_text, ','))
    if (!stacknet::trim(v).empty()) values.push_back(stacknet::parse_double(stacknet::trim(v)));
  const auto csv = stacknet::sweep(cfg, param, values);
  write_file(out / "sweep.csv", csv);
  write_meta(out, cfg, "sweep " + param);
  std::cout << "wrote " << (out / "sweep.csv") << "\n";
  return 0;
}

int run_generate(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  if (!cfg.synthetic) throw std::runtime_error("generate: config needs a [synthetic] section");
  const auto out = prepare_out(opt);
  const std::uint64_t seed = cfg.seeds.front();
  auto data = load_table(cfg, seed);
  write_file(out / "data.csv", stacknet::table_to_csv(data.table, &data.labels));
  write_meta(out, cfg, "generate");
  std::cout << "wrote " << (out / "data.csv") << "\n";
  return 0;
}

int run_experiment_cmd(const CommonOptions& opt) {
  auto cfg = load_config(opt);
  const auto out = prepare_out(opt);
  const auto results = stacknet::run_experiment(cfg);
  write_file(out / "results.csv", stacknet::results_to_csv(results));
  write_meta(out, cfg, "run");
  std::cout << stacknet::results_to_table(results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stacknet: black-box model combination, reliability ranking, and pruning"};
  app.require_subcommand(1);

  CommonOptions combine_opt, train_opt, baseline_opt, rank_opt, attack_opt, detect_opt, prune_opt,
      sweep_opt, generate_opt, run_opt;
  std::string combine_params, baseline_method, detect_report, sweep_param, sweep_values;
  double detect_fraction = 0.5;

  auto* combine = app.add_subcommand("combine", "emit combined predictions for a dataset");
  add_common(combine, combine_opt);
  combine->add_option("--params", combine_params, "reuse a trained params file");

  auto* train = app.add_subcommand("train", "train combiner weights and save them");
  add_common(train, train_opt);

  auto* baseline = app.add_subcommand("baseline", "run a reference aggregator");
  add_common(baseline, baseline_opt);
  baseline->add_option("--method", baseline_method, "voting|wawa|dawid-skene")->required();

  auto* rank = app.add_subcommand("rank", "emit a per-model reliability report");
  add_common(rank, rank_opt);

  auto* attack = app.add_subcommand("attack", "apply an attack and save the modified table");
  add_common(attack, attack_opt);

  auto* detect = app.add_subcommand("detect", "flag suspected compromised models");
  add_common(detect, detect_opt, /*config_required=*/false);
  detect->add_option("--report", detect_report, "reliability report CSV to inspect");
  detect->add_option("--inspect-fraction", detect_fraction, "fraction of models to inspect");

  auto* prune = app.add_subcommand("prune", "iteratively remove the lowest-weight model");
  add_common(prune, prune_opt);

  auto* sweep_cmd = app.add_subcommand("sweep", "run an experiment across parameter values");
  add_common(sweep_cmd, sweep_opt);
  sweep_cmd->add_option("--param", sweep_param, "parameter to sweep")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();

  auto* generate = app.add_subcommand("generate", "write a synthetic pool as CSV");
  add_common(generate, generate_opt);

  auto* run = app.add_subcommand("run", "run the configured experiment across seeds");
  add_common(run, run_opt);

  CLI11_PARSE(app, argc, argv);

  try {
    if (combine->parsed()) return run_combine(combine_opt, combine_params);
    if (train->parsed()) return run_train(train_opt);
    if (baseline->parsed()) return run_baseline(baseline_opt, baseline_method);
    if (rank->parsed()) return run_rank(rank_opt);
    if (attack->parsed()) return run_attack(attack_opt);
    if (detect->parsed()) return run_detect(detect_opt, detect_report, detect_fraction);
    if (prune->parsed()) return run_prune(prune_opt);
    if (sweep_cmd->parsed()) return run_sweep(sweep_opt, sweep_param, sweep_values);
    if (generate->parsed()) return run_generate(generate_opt);
    if (run->parsed()) return run_experiment_cmd(run_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
