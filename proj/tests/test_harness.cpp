#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stacknet/config.hpp"
#include "stacknet/csv.hpp"
#include "stacknet/metrics.hpp"
#include "stacknet/runner.hpp"
#include "stacknet/synthetic.hpp"

using namespace stacknet;

TEST(GenerateSynthetic, PerfectModelsEqualTruth) {
  SyntheticPoolSpec spec;
  spec.num_samples = 100;
  spec.num_models = 3;
  spec.num_classes = 3;
  spec.accuracies = {0.999999, 0.999999, 0.999999};
  spec.seed = 1;
  const auto pool = generate_synthetic(spec);
  for (Index i = 0; i < 100; ++i)
    for (Index j = 0; j < 3; ++j)
      EXPECT_EQ(pool.table.label(i, j), pool.truth_labels[static_cast<std::size_t>(i)]);
}

TEST(GenerateSynthetic, BcaCalibratedToRequestedAccuracies) {
  SyntheticPoolSpec spec;
  spec.num_samples = 50000;
  spec.num_models = 4;
  spec.num_classes = 3;
  spec.accuracies = {0.35, 0.55, 0.75, 0.9};
  spec.class_imbalance = 0.2;
  spec.seed = 2;
  const auto pool = generate_synthetic(spec);
  for (Index j = 0; j < 4; ++j) {
    std::vector<int> preds(static_cast<std::size_t>(pool.table.num_samples()));
    for (Index i = 0; i < pool.table.num_samples(); ++i)
      preds[static_cast<std::size_t>(i)] = pool.table.label(i, j);
    EXPECT_NEAR(balanced_accuracy(preds, pool.truth_labels, 3),
                spec.accuracies[static_cast<std::size_t>(j)], 0.01);
  }
}

TEST(GenerateSynthetic, RegressionErrorsUncorrelatedWhenRequested) {
  SyntheticPoolSpec spec;
  spec.classification = false;
  spec.num_samples = 50000;
  spec.num_models = 3;
  spec.error_variances = {0.01, 0.02, 0.04};
  spec.correlation = 0.0;
  spec.seed = 3;
  const auto pool = generate_synthetic(spec);
  const Eigen::MatrixXd errors = pool.table.values().colwise() - pool.truth_values;
  for (Index a = 0; a < 3; ++a) {
    for (Index b = a + 1; b < 3; ++b) {
      const Eigen::VectorXd ea = errors.col(a).array() - errors.col(a).mean();
      const Eigen::VectorXd eb = errors.col(b).array() - errors.col(b).mean();
      const double corr = ea.dot(eb) / std::sqrt(ea.squaredNorm() * eb.squaredNorm());
      EXPECT_LT(std::abs(corr), 0.02);
    }
  }
}

TEST(GenerateSynthetic, RegressionCorrelationIsRealized) {
  SyntheticPoolSpec spec;
  spec.classification = false;
  spec.num_samples = 50000;
  spec.num_models = 2;
  spec.error_variances = {0.02, 0.05};
  spec.correlation = 0.6;
  spec.seed = 4;
  const auto pool = generate_synthetic(spec);
  const Eigen::MatrixXd errors = pool.table.values().colwise() - pool.truth_values;
  const Eigen::VectorXd ea = errors.col(0).array() - errors.col(0).mean();
  const Eigen::VectorXd eb = errors.col(1).array() - errors.col(1).mean();
  const double corr = ea.dot(eb) / std::sqrt(ea.squaredNorm() * eb.squaredNorm());
  EXPECT_NEAR(corr, 0.6, 0.02);
}

// Conditional independence given the truth: within each true class, model
// agreement factorizes (chi-square independence test on 2x2 tables).
TEST(GenerateSynthetic, ConditionallyIndependentGivenTruth) {
  SyntheticPoolSpec spec;
  spec.num_samples = 50000;
  spec.num_models = 2;
  spec.num_classes = 2;
  spec.accuracies = {0.7, 0.8};
  spec.seed = 5;
  const auto pool = generate_synthetic(spec);
  for (int truth_class = 1; truth_class <= 2; ++truth_class) {
    double table2[2][2] = {{0, 0}, {0, 0}};
    double total = 0;
    for (Index i = 0; i < pool.table.num_samples(); ++i) {
      if (pool.truth_labels[static_cast<std::size_t>(i)] != truth_class) continue;
      const int a = pool.table.label(i, 0) == truth_class ? 0 : 1;
      const int b = pool.table.label(i, 1) == truth_class ? 0 : 1;
      table2[a][b] += 1;
      total += 1;
    }
    double chi2 = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double row = table2[a][0] + table2[a][1];
        const double col = table2[0][b] + table2[1][b];
        const double expected = row * col / total;
        chi2 += (table2[a][b] - expected) * (table2[a][b] - expected) / expected;
      }
    EXPECT_LT(chi2, 6.635);  // chi-square 1 dof critical value at alpha = 0.01
  }
}

TEST(GenerateSynthetic, RejectsInfeasibleSpecs) {
  SyntheticPoolSpec spec;
  spec.num_samples = 10;
  spec.num_models = 2;
  spec.num_classes = 3;
  spec.accuracies = {0.5, 0.5};
  spec.class_imbalance = 1.2;  // prior for class 1 would leave nothing for the rest
  EXPECT_THROW(generate_synthetic(spec), std::invalid_argument);
  SyntheticPoolSpec bad_pi;
  bad_pi.num_samples = 10;
  bad_pi.num_models = 1;
  bad_pi.accuracies = {1.5};
  EXPECT_THROW(generate_synthetic(bad_pi), std::invalid_argument);
}

TEST(LoadCsv, RegressionRoundTripIsBitIdentical) {
  const std::string csv =
      "sample_id,alpha,beta\n"
      "s1,0.1,0.25\n"
      "s2,0.5,0.75\n"
      "s3,0.9,1\n";
  CsvSchema schema;
  schema.kind = TableKind::kRegression;
  schema.lo = 0.0;
  schema.hi = 1.0;
  std::istringstream is(csv);
  const auto loaded = load_csv(is, schema);
  EXPECT_EQ(loaded.table.num_samples(), 3);
  EXPECT_EQ(loaded.table.num_models(), 2);
  EXPECT_TRUE(loaded.labels.empty());
  const std::string out = table_to_csv(loaded.table, nullptr);
  std::istringstream is2(out);
  const auto reloaded = load_csv(is2, schema);
  EXPECT_TRUE(reloaded.table.values().isApprox(loaded.table.values(), 0.0));
  EXPECT_EQ(table_to_csv(reloaded.table, nullptr), out);
}

TEST(LoadCsv, LabelColumnDefinesSubsetAndNormalization) {
  const std::string csv =
      "sample_id,m1,m2,label\n"
      "a,2,4,1\n"
      "b,6,8,\n"
      "c,10,1,10\n";
  CsvSchema schema;
  schema.kind = TableKind::kRegression;
  schema.lo = 1.0;
  schema.hi = 10.0;
  std::istringstream is(csv);
  const auto loaded = load_csv(is, schema);
  EXPECT_EQ(loaded.labels.size(), 2);
  EXPECT_DOUBLE_EQ(loaded.labels.target(0), 0.0);   // label 1 -> 0
  EXPECT_DOUBLE_EQ(loaded.labels.target(1), 1.0);   // label 10 -> 1
  EXPECT_DOUBLE_EQ(loaded.table.values()(0, 0), (2.0 - 1.0) / 9.0);
  EXPECT_TRUE(loaded.warnings.empty());
}

TEST(LoadCsv, ClassificationCanonicalizesLabels) {
  const std::string csv =
      "sample_id,m1,m2,label\n"
      "a,yes,no,yes\n"
      "b,no,no,\n"
      "c,yes,yes,no\n";
  CsvSchema schema;
  schema.kind = TableKind::kClassification;
  std::istringstream is(csv);
  const auto loaded = load_csv(is, schema);
  EXPECT_EQ(loaded.table.num_classes(), 2);
  // Lexicographic canonical order: no=1, yes=2.
  EXPECT_EQ(loaded.table.class_names()[0], "no");
  EXPECT_EQ(loaded.table.class_names()[1], "yes");
  EXPECT_EQ(loaded.table.label(0, 0), 2);
  EXPECT_EQ(loaded.labels.target_label(0), 2);
  // Numeric labels sort numerically, not lexicographically.
  const std::string numeric =
      "sample_id,m1\n"
      "a,10\n"
      "b,2\n"
      "c,1\n";
  std::istringstream is2(numeric);
  const auto loaded2 = load_csv(is2, schema);
  EXPECT_EQ(loaded2.table.class_names(), std::vector<std::string>({"1", "2", "10"}));
}

TEST(LoadCsv, HardErrorsOnMalformedInput) {
  CsvSchema schema;
  schema.kind = TableKind::kRegression;
  schema.lo = 0.0;
  schema.hi = 1.0;
  {
    std::istringstream is("sample_id,m1\nrow1,\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // blank prediction cell
  }
  {
    std::istringstream is("sample_id,m1\nrow1,abc\n");
    try {
      load_csv(is, schema);
      FAIL() << "expected parse error";
    } catch (const std::runtime_error& e) {
      EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
  }
  {
    std::istringstream is("sample_id,m1\nrow1,0.5,extra\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // field count mismatch
  }
  {
    std::istringstream is("wrong,m1\nrow1,0.5\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // bad header
  }
  {
    std::istringstream is("sample_id,m1,m1\nrow1,0.5,0.6\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // duplicate model id
  }
  {
    std::istringstream is("sample_id,m1\nrow1,nan\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // non-finite cell
  }
  {
    std::istringstream is("sample_id,m1\nrow1,0.5\nrow1,0.6\n");
    EXPECT_THROW(load_csv(is, schema), std::runtime_error);  // duplicate sample id
  }
}

TEST(LoadCsv, ObservedRangeWarning) {
  CsvSchema schema;
  schema.kind = TableKind::kRegression;
  std::istringstream is("sample_id,m1\nr1,2\nr2,4\n");
  const auto loaded = load_csv(is, schema);
  ASSERT_EQ(loaded.warnings.size(), 1u);
  EXPECT_NE(loaded.warnings[0].find("observed min/max"), std::string::npos);
  EXPECT_DOUBLE_EQ(loaded.table.values()(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(loaded.table.values()(1, 0), 1.0);
}

TEST(KvConfig, ParsesSectionsKeysAndLists) {
  const std::string text =
      "# top comment\n"
      "[experiment]\n"
      "method = voting\n"
      "seeds = 0, 1, 2\n"
      "labels_fraction = 0.1\n"
      "\n"
      "[synthetic]\n"
      "kind = classification\n"
      "samples = 100\n"
      "models = 4\n"
      "accuracies = 0.6,0.7,0.8,0.9\n";
  const auto kv = KvConfig::parse_string(text);
  EXPECT_EQ(kv.get("experiment", "method"), "voting");
  EXPECT_EQ(kv.get_seed_list("experiment", "seeds").size(), 3u);
  EXPECT_DOUBLE_EQ(kv.get_double("experiment", "labels_fraction"), 0.1);
  EXPECT_TRUE(kv.has_section("synthetic"));
  EXPECT_THROW(kv.get("experiment", "missing"), std::runtime_error);
  EXPECT_THROW(KvConfig::parse_string("key_without_equals\n"), std::runtime_error);

  const auto cfg = parse_experiment_config(kv, "");
  ASSERT_TRUE(cfg.synthetic.has_value());
  EXPECT_EQ(cfg.synthetic->num_samples, 100);
  EXPECT_EQ(cfg.method, "voting");
}

TEST(KvConfig, ResolvesDatasetThroughRegistry) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "stacknet_registry_test";
  fs::create_directories(dir / "helm");
  {
    std::ofstream csv(dir / "helm" / "tiny.csv");
    csv << "sample_id,m1,m2,label\na,yes,no,yes\nb,no,no,no\nc,yes,yes,yes\n";
  }
  {
    std::ofstream reg(dir / "registry.cfg");
    reg << "[dataset.tiny]\npath = helm/tiny.csv\nkind = classification\nclasses = 2\n";
  }
  const auto kv = KvConfig::parse_string("[experiment]\nmethod = voting\ndataset = tiny\n");
  const auto cfg = parse_experiment_config(kv, dir.string());
  ASSERT_TRUE(cfg.dataset.has_value());
  EXPECT_EQ(cfg.dataset->name, "tiny");
  const auto results = run_experiment(cfg);
  EXPECT_EQ(results.rows.size(), 1u);
  EXPECT_GT(results.mean, 0.0);
  // Unknown names report the registry they searched.
  EXPECT_THROW(parse_experiment_config(
                   KvConfig::parse_string("[experiment]\nmethod = voting\ndataset = nope\n"),
                   dir.string()),
               std::runtime_error);
  fs::remove_all(dir);
}

TEST(RunExperiment, UnknownMethodListsValidOnes) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = noop\n[synthetic]\nkind = classification\nsamples = 50\n"
      "models = 3\naccuracies = 0.6,0.7,0.8\n");
  const auto cfg = parse_experiment_config(kv, "");
  try {
    run_experiment(cfg);
    FAIL() << "expected config error";
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("noop"), std::string::npos);
    EXPECT_NE(what.find("voting"), std::string::npos);
    EXPECT_NE(what.find("u-stacknet"), std::string::npos);
  }
}

TEST(RunExperiment, VotingOnSyntheticPoolAggregates) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = voting\nseeds = 0,1,2,3,4\n"
      "[synthetic]\nkind = classification\nsamples = 2000\nmodels = 5\n"
      "accuracies = 0.65,0.7,0.75,0.8,0.85\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto results = run_experiment(cfg);
  EXPECT_EQ(results.rows.size(), 5u);
  EXPECT_EQ(results.metric_name, "bca_percent");
  EXPECT_GT(results.mean, 80.0);
  EXPECT_LT(results.stddev, 3.0);
}

TEST(RunExperiment, SingleSeedStdIsExactlyZero) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = wawa\nseeds = 7\n"
      "[synthetic]\nkind = classification\nsamples = 500\nmodels = 5\n"
      "accuracies = 0.6,0.65,0.7,0.75,0.8\n");
  const auto results = run_experiment(parse_experiment_config(kv, ""));
  EXPECT_EQ(results.rows.size(), 1u);
  EXPECT_EQ(results.stddev, 0.0);
}

TEST(RunExperiment, DeterministicByteIdenticalCsv) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = u-stacknet\nseeds = 0,1\n"
      "[train]\nepochs = 100\n"
      "[synthetic]\nkind = classification\nsamples = 400\nmodels = 6\n"
      "accuracies = 0.6,0.65,0.7,0.75,0.8,0.85\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto a = results_to_csv(run_experiment(cfg));
  const auto b = results_to_csv(run_experiment(cfg));
  EXPECT_EQ(a, b);
  EXPECT_NE(a.find("u-stacknet"), std::string::npos);
}

TEST(RunExperiment, RegressionMethodsProduceMae) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = stacknet\nseeds = 0\nlabels_fraction = 0.2\n"
      "[train]\nepochs = 300\n"
      "[synthetic]\nkind = regression\nsamples = 500\nmodels = 3\n"
      "variances = 0.01,0.02,0.05\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto trained = run_experiment(cfg);
  EXPECT_EQ(trained.metric_name, "mae");
  auto uniform_cfg = cfg;
  uniform_cfg.method = "uniform";
  const auto uniform = run_experiment(uniform_cfg);
  EXPECT_LE(trained.mean, uniform.mean * 1.25);
  EXPECT_GT(trained.mean, 0.0);
}

TEST(RunExperiment, DetectAndPruneProtocols) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = detect\nseeds = 0,1,2,3,4\n"
      "[train]\nepochs = 30\n"
      "[synthetic]\nkind = classification\nsamples = 800\nmodels = 10\n"
      "accuracies = 0.84,0.7,0.9,0.74,0.8,0.72,0.87,0.76,0.78,0.82\n"
      "[attack]\nkind = random-injection\ncount = 1\n"
      "[detect]\ninspect_fraction = 0.5\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto detect = run_experiment(cfg);
  EXPECT_EQ(detect.metric_name, "detection_rate");
  EXPECT_GE(detect.mean, 0.8);

  auto prune_cfg = cfg;
  prune_cfg.method = "prune";
  prune_cfg.prune_steps = 3;
  prune_cfg.classification_train.epochs = 100;
  const auto prune = run_experiment(prune_cfg);
  EXPECT_EQ(prune.metric_name, "bca_percent");
  EXPECT_GT(prune.mean, 70.0);
}

TEST(Sweep, LabelsFractionCurveAndEmptyValues) {
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = stacknet\nseeds = 0,1\nlabels_fraction = 0.1\n"
      "[train]\nepochs = 200\n"
      "[synthetic]\nkind = regression\nsamples = 1000\nmodels = 4\n"
      "variances = 0.01,0.02,0.03,0.05\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto csv = sweep(cfg, "labels_fraction", {0.01, 0.05, 0.1, 0.2});
  // Four parameter values, each with two seed rows and one aggregate row.
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 3);
  // MAE is flat after tiny supervision: max/min of the four means within 10%.
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<double> means;
  while (std::getline(is, line)) {
    const auto f = split(line, ',');
    if (f[4] == "mean") means.push_back(parse_double(f[6]));
  }
  ASSERT_EQ(means.size(), 4u);
  const double lo = *std::min_element(means.begin(), means.end());
  const double hi = *std::max_element(means.begin(), means.end());
  EXPECT_LE(hi, 1.1 * lo);

  const auto empty = sweep(cfg, "labels_fraction", {});
  EXPECT_EQ(empty, "param,param_value,method,dataset,seed,metric,value,std\n");
  EXPECT_THROW(sweep(cfg, "bogus_param", {1.0}), std::runtime_error);
}

TEST(Sweep, Lambda1StabilityOnSeparatedPool) {
  // Supervised runs tolerate lambda1 = 0; trained to the asymptote so each
  // lambda1 reaches its fixed point rather than a mid-transient state.
  const auto kv = KvConfig::parse_string(
      "[experiment]\nmethod = s-stacknet\nseeds = 0,1\nlabels_fraction = 0.1\n"
      "[synthetic]\nkind = classification\nsamples = 1500\nmodels = 6\n"
      "accuracies = 0.7,0.74,0.78,0.82,0.86,0.9\n");
  const auto cfg = parse_experiment_config(kv, "");
  const auto csv = sweep(cfg, "lambda1", {0.0, 0.5, 1.0, 2.0});
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<double> means;
  while (std::getline(is, line)) {
    const auto f = split(line, ',');
    if (f[4] == "mean") means.push_back(parse_double(f[6]));
  }
  ASSERT_EQ(means.size(), 4u);
  const double lo = *std::min_element(means.begin(), means.end());
  const double hi = *std::max_element(means.begin(), means.end());
  EXPECT_LE(hi - lo, 1.0);  // BCA varies at most one point
}

TEST(RunMeta, CarriesHashSeedsVersion) {
  std::ostringstream os;
  write_run_meta(os, "[experiment]\nmethod = voting\n", {0, 1, 2}, "run");
  const std::string meta = os.str();
  EXPECT_NE(meta.find("version 0.1.0"), std::string::npos);
  EXPECT_NE(meta.find("config_hash 0x"), std::string::npos);
  EXPECT_NE(meta.find("seeds 0,1,2"), std::string::npos);
  // Hash is stable for identical text and changes when the text changes.
  std::ostringstream os2, os3;
  write_run_meta(os2, "[experiment]\nmethod = voting\n", {0, 1, 2}, "run");
  write_run_meta(os3, "[experiment]\nmethod = wawa\n", {0, 1, 2}, "run");
  EXPECT_EQ(meta, os2.str());
  EXPECT_NE(meta, os3.str());
}
