#include <gtest/gtest.h>

#include <cmath>

#include "stacknet/metrics.hpp"
#include "stacknet/reliability.hpp"
#include "stacknet/rng.hpp"
#include "stacknet/spectral.hpp"
#include "stacknet/synthetic.hpp"

using namespace stacknet;

namespace {

SyntheticPool binary_pool(const std::vector<double>& pis, Index n, std::uint64_t seed,
                          double imbalance = 0.0) {
  SyntheticPoolSpec spec;
  spec.num_samples = n;
  spec.num_models = static_cast<Index>(pis.size());
  spec.num_classes = 2;
  spec.accuracies = pis;
  spec.class_imbalance = imbalance;
  spec.seed = seed;
  return generate_synthetic(spec);
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ca = a.array() - a.mean();
  const Eigen::VectorXd cb = b.array() - b.mean();
  return ca.dot(cb) / std::sqrt(ca.squaredNorm() * cb.squaredNorm());
}

}  // namespace

TEST(PredictionCovariance, IdenticalAndIndependentModels) {
  // Two identical columns: off-diagonal equals the common variance.
  Eigen::MatrixXi l(4, 2);
  l << 1, 1, 2, 2, 1, 1, 2, 2;
  const auto table = PredictionTable::classification(l, 2, {"a", "b"}, {"s1", "s2", "s3", "s4"});
  const auto cov = prediction_covariance(table);
  EXPECT_DOUBLE_EQ(cov.q(0, 1), cov.q(0, 0));
  EXPECT_DOUBLE_EQ(cov.q(1, 0), cov.q(1, 1));

  // Coin-flip model against anything: off-diagonal vanishes.
  const auto pool = binary_pool({0.5, 0.8}, 100000, 17);
  const auto cov2 = prediction_covariance(pool.table);
  EXPECT_LT(std::abs(cov2.q(0, 1)), 0.01);

  // diag(q) = 1 - mu^2 within sampling tolerance for +-1 coding.
  for (Index j = 0; j < 2; ++j)
    EXPECT_NEAR(cov2.q(j, j), 1.0 - cov2.mu(j) * cov2.mu(j), 1e-9);
}

TEST(PredictionCovariance, MatchesLemmaClosedForm) {
  const std::vector<double> pis = {0.6, 0.7, 0.8, 0.9};
  const auto pool = binary_pool(pis, 50000, 29);
  const auto cov = prediction_covariance(pool.table);
  for (Index j = 0; j < 4; ++j)
    for (Index l = 0; l < 4; ++l)
      if (j != l)
        EXPECT_NEAR(cov.q(j, l), (2 * pis[static_cast<std::size_t>(j)] - 1) *
                                     (2 * pis[static_cast<std::size_t>(l)] - 1),
                    0.02);
}

TEST(PredictionCovariance, RejectsMultiClass) {
  SyntheticPoolSpec spec;
  spec.num_samples = 10;
  spec.num_models = 3;
  spec.num_classes = 3;
  spec.accuracies = {0.5, 0.6, 0.7};
  const auto pool = generate_synthetic(spec);
  EXPECT_THROW(prediction_covariance(pool.table), std::invalid_argument);
}

TEST(RankOneRecover, ExactRankOneInput) {
  Eigen::Vector3d v(0.8, 0.36, 0.48);
  const double lambda = 1.7;
  PredictionCovariance cov;
  cov.q = lambda * v * v.transpose();
  cov.mu = Eigen::Vector3d::Zero();
  const auto est = rank_one_recover(cov);
  EXPECT_NEAR(est.eigenvalue, lambda, 1e-8);
  const double sign = est.eigenvector(0) > 0 ? 1.0 : -1.0;
  for (Index j = 0; j < 3; ++j) EXPECT_NEAR(sign * est.eigenvector(j), v(j), 1e-6);
  EXPECT_FALSE(est.sign_resolved);
}

TEST(RankOneRecover, ErrorsOnTooFewModelsOrNoSignal) {
  PredictionCovariance two;
  two.q = Eigen::MatrixXd::Identity(2, 2);
  two.mu = Eigen::Vector2d::Zero();
  EXPECT_THROW(rank_one_recover(two), std::invalid_argument);

  PredictionCovariance flat;
  flat.q = Eigen::MatrixXd::Identity(4, 4);  // all off-diagonals zero
  flat.mu = Eigen::Vector4d::Zero();
  EXPECT_THROW(rank_one_recover(flat), std::runtime_error);
}

TEST(RankOneRecover, RecoversAccuracyDirectionOnSampledPool) {
  const std::vector<double> pis = {0.55, 0.59, 0.63, 0.67, 0.72, 0.76, 0.8, 0.84, 0.87, 0.9};
  const auto pool = binary_pool(pis, 10000, 41);
  const auto est = resolve_sign(rank_one_recover(prediction_covariance(pool.table)));
  Eigen::VectorXd target(10);
  for (Index j = 0; j < 10; ++j) target(j) = 2 * pis[static_cast<std::size_t>(j)] - 1;
  EXPECT_GE(pearson(est.eigenvector, target), 0.98);
}

TEST(RankOneRecover, SurvivesDuplicatedModelPair) {
  const std::vector<double> pis = {0.6, 0.7, 0.8, 0.9};
  const auto pool = binary_pool(pis, 20000, 53);
  // Append an exact copy of the last column.
  Eigen::VectorXi copy = pool.table.labels().col(3);
  const auto table = pool.table.with_model_appended(copy, "m05");
  const auto est = resolve_sign(rank_one_recover(prediction_covariance(table)));
  EXPECT_NEAR(est.eigenvector(3), est.eigenvector(4), 0.05);
  EXPECT_GT(est.eigenvector(3), est.eigenvector(0));
}

TEST(PowerIteration, MatchesDenseEigensolverOracle) {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const Index m = 4 + static_cast<Index>(rng.uniform_int(0, 16));
    Eigen::MatrixXd a(m, m);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j <= i; ++j) a(i, j) = a(j, i) = rng.normal();
    // Shift to make the dominant eigenvalue clearly separated and positive.
    a += (2.0 * static_cast<double>(m)) * Eigen::MatrixXd::Identity(m, m);
    const auto pi = power_iteration(a, 1e-12, 20000);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
    const Index last = m - 1;
    EXPECT_NEAR(pi.eigenvalue, eig.eigenvalues()(last), 1e-8 * std::abs(eig.eigenvalues()(last)));
    Eigen::VectorXd oracle = eig.eigenvectors().col(last);
    if (oracle.dot(pi.eigenvector) < 0) oracle = -oracle;
    EXPECT_LT((oracle - pi.eigenvector).norm(), 1e-8);
  }
}

TEST(PowerIteration, ScaleEquivariance) {
  // Scaling every (2*pi_j - 1) by c scales lambda by c^2 and fixes v.
  Eigen::VectorXd d(5);
  d << 0.1, 0.25, 0.4, 0.55, 0.7;
  for (double c : {1.0, 2.0, 3.5}) {
    PredictionCovariance cov;
    const Eigen::VectorXd scaled = c * d;
    cov.q = scaled * scaled.transpose();
    cov.mu = Eigen::VectorXd::Zero(5);
    const auto est = rank_one_recover(cov);
    EXPECT_NEAR(est.eigenvalue, c * c * d.squaredNorm(), 1e-8 * c * c);
    const double sign = est.eigenvector(0) > 0 ? 1.0 : -1.0;
    EXPECT_LT((sign * est.eigenvector - d.normalized()).norm(), 1e-8);
  }
}

TEST(ResolveSign, MajorityRuleAndTieBreak) {
  SpectralEstimate est;
  est.eigenvector.resize(10);
  est.eigenvector << -0.1, -0.2, -0.3, -0.4, -0.5, -0.6, -0.7, 0.1, 0.2, 0.3;
  const auto flipped = resolve_sign(est);
  EXPECT_TRUE(flipped.sign_resolved);
  EXPECT_GT(flipped.eigenvector(0), 0.0);

  SpectralEstimate positive;
  positive.eigenvector = Eigen::Vector3d(0.5, 0.5, 0.7);
  EXPECT_TRUE(resolve_sign(positive).eigenvector.isApprox(positive.eigenvector, 0.0));

  // Tie: flip so the largest-magnitude entry is positive.
  SpectralEstimate tie;
  tie.eigenvector = Eigen::Vector4d(0.9, -0.1, 0.1, -0.2);
  EXPECT_GT(resolve_sign(tie).eigenvector(0), 0.0);
  SpectralEstimate tie2;
  tie2.eigenvector = Eigen::Vector4d(-0.9, 0.1, -0.1, 0.2);
  EXPECT_GT(resolve_sign(tie2).eigenvector(0), 0.0);
}

TEST(ResolveSign, ApplyingTwiceEqualsApplyingOnce) {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    SpectralEstimate est;
    est.eigenvector.resize(6);
    for (Index j = 0; j < 6; ++j) est.eigenvector(j) = rng.normal();
    est.eigenvector.normalize();
    const auto once = resolve_sign(est);
    const auto twice = resolve_sign(once);
    EXPECT_TRUE(once.eigenvector.isApprox(twice.eigenvector, 0.0));
  }
}

// A pool violating majority competence: sign resolution inverts the ranking
// and the report carries an assumption-risk flag.
TEST(ResolveSign, AdversarialMajorityInvertsRankingAndFlags) {
  std::vector<double> pis = {0.2, 0.25, 0.3, 0.22, 0.28, 0.35, 0.8, 0.85, 0.9, 0.75};
  const auto pool = binary_pool(pis, 20000, 83);
  const auto est = resolve_sign(rank_one_recover(prediction_covariance(pool.table)));
  Eigen::VectorXd target(10);
  for (Index j = 0; j < 10; ++j) target(j) = 2 * pis[static_cast<std::size_t>(j)] - 1;
  // Inverted: correlation with the true direction is strongly negative.
  EXPECT_LE(pearson(est.eigenvector, target), -0.9);
  const auto report = spectral_reliability_report(est, pool.table.model_ids());
  bool flagged = false;
  for (const auto& [id, text] : report.flags)
    if (id == "*" && text.find("assumption-risk") != std::string::npos) flagged = true;
  EXPECT_TRUE(flagged);
}

TEST(SpectralWeights, NormalizationAndClamping) {
  SpectralEstimate est;
  est.eigenvector = Eigen::Vector2d(0.6, 0.8);
  est.sign_resolved = true;
  const auto params = spectral_weights(est);
  EXPECT_NEAR(params.weights(0), 0.4286, 5e-5);
  EXPECT_NEAR(params.weights(1), 0.5714, 5e-5);

  SpectralEstimate neg;
  neg.eigenvector = Eigen::Vector3d(0.8, -0.2, 0.6);
  neg.sign_resolved = true;
  EXPECT_DOUBLE_EQ(spectral_weights(neg).weights(1), 0.0);

  SpectralEstimate unresolved;
  unresolved.eigenvector = Eigen::Vector2d(0.6, 0.8);
  EXPECT_THROW(spectral_weights(unresolved), std::invalid_argument);

  SpectralEstimate hopeless;
  hopeless.eigenvector = Eigen::Vector2d(-0.6, -0.8);
  hopeless.sign_resolved = true;
  EXPECT_THROW(spectral_weights(hopeless), std::runtime_error);
}

// Spectral weights beat plain plurality when the accuracy spread is wide.
TEST(SpectralWeights, BeatPluralityOnSpreadPools) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng gen(seed * 11 + 5);
    std::vector<double> pis;
    for (int j = 0; j < 10; ++j) pis.push_back(0.52 + 0.4 * gen.uniform01());
    const auto pool = binary_pool(pis, 4000, seed);
    const auto est = resolve_sign(rank_one_recover(prediction_covariance(pool.table)));
    const auto labels = weighted_vote(pool.table, spectral_weights(est), seed);
    const auto plain = plurality_vote(pool.table, seed);
    if (accuracy(labels, pool.truth_labels) >= accuracy(plain, pool.truth_labels)) ++wins;
  }
  EXPECT_GE(wins, 90);
}

TEST(SpectralEstimate, LambdaMatchesClosedFormOnBalancedPools) {
  const std::vector<double> pis = {0.58, 0.64, 0.72, 0.8, 0.88};
  const auto pool = binary_pool(pis, 50000, 97);
  const auto est = resolve_sign(rank_one_recover(prediction_covariance(pool.table)));
  double expected = 0.0;
  for (double p : pis) expected += (2 * p - 1) * (2 * p - 1);
  EXPECT_NEAR(est.eigenvalue, expected, 0.1 * expected);
  EXPECT_GE(est.eigenvalue, 0.0);
  EXPECT_NEAR(est.eigenvector.norm(), 1.0, 1e-10);
}

TEST(SupervisedBcaEstimate, PerfectModelAndBinomialSpread) {
  const std::vector<double> pis = {0.999999, 0.8};
  Rng seeder(5);
  std::vector<double> estimates;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto pool = binary_pool(pis, 2000, seed, 0.0);
    // Ten labeled samples per class.
    std::vector<Index> idx;
    std::vector<int> targets;
    int want[3] = {0, 10, 10};
    for (Index i = 0; i < pool.table.num_samples(); ++i) {
      const int y = pool.truth_labels[static_cast<std::size_t>(i)];
      if (want[y] > 0) {
        --want[y];
        idx.push_back(i);
        targets.push_back(y);
      }
    }
    const auto labels = LabeledSubset::classification(std::move(idx), targets);
    const auto bca = supervised_bca_estimate(pool.table, labels);
    EXPECT_DOUBLE_EQ(bca[0], 1.0);  // perfect model is perfect on any subset
    estimates.push_back(bca[1]);
  }
  double mean = 0.0;
  for (double e : estimates) mean += e;
  mean /= static_cast<double>(estimates.size());
  double var = 0.0;
  for (double e : estimates) var += (e - mean) * (e - mean);
  var /= static_cast<double>(estimates.size() - 1);
  // Binomial oracle: std of the two-class mean recall with 10 samples/class
  // at pi = 0.8 is sqrt(2 * 0.8 * 0.2 / 10) / 2 = 0.0894.
  EXPECT_NEAR(std::sqrt(var), 0.0894, 0.02);
  EXPECT_NEAR(mean, 0.8, 0.02);
}

// Few-shot estimates rank models less faithfully than U-StackingNet weights
// on spread pools (few-shot variance dominates with 10 labels per class).
TEST(SupervisedBcaEstimate, FewShotRanksWorseThanUnsupervisedWeights) {
  std::vector<std::vector<double>> archetypes = {
      {0.84, 0.70, 0.90, 0.74, 0.80, 0.72, 0.87, 0.76, 0.78, 0.82},
      {0.76, 0.55, 0.88, 0.68, 0.83, 0.60, 0.71, 0.79, 0.86, 0.74},
      {0.90, 0.73, 0.66, 0.85, 0.70, 0.88, 0.62, 0.79, 0.76, 0.82},
      {0.64, 0.68, 0.71, 0.74, 0.77, 0.80, 0.82, 0.84, 0.87, 0.89},
      {0.62, 0.80, 0.84, 0.87, 0.89, 0.91, 0.92, 0.94, 0.95, 0.96},
      {0.84, 0.77, 0.89, 0.78, 0.86, 0.80, 0.88, 0.81, 0.83, 0.85},
      {0.60, 0.51, 0.64, 0.53, 0.62, 0.55, 0.65, 0.57, 0.59, 0.63},
      {0.95, 0.55, 0.75, 0.65, 0.85, 0.60, 0.90, 0.70, 0.80, 0.593},
  };
  int stacknet_wins = 0;
  for (std::size_t a = 0; a < archetypes.size(); ++a) {
    double tau_few_sum = 0.0, tau_stack_sum = 0.0;
    const int runs = 5;
    for (std::uint64_t seed = 0; seed < runs; ++seed) {
      const auto pool = binary_pool(archetypes[a], 3000, seed * 101 + a);
      // Few-shot: 10 labels per class.
      std::vector<Index> idx;
      std::vector<int> targets;
      Rng rng(seed);
      int want[3] = {0, 10, 10};
      for (Index i = 0; i < pool.table.num_samples(); ++i) {
        const int y = pool.truth_labels[static_cast<std::size_t>(i)];
        if (want[y] > 0) {
          --want[y];
          idx.push_back(i);
          targets.push_back(y);
        }
      }
      const auto labels = LabeledSubset::classification(std::move(idx), targets);
      const auto few = supervised_bca_estimate(pool.table, labels);
      tau_few_sum += kendall_tau_b(few, archetypes[a]);

      ClassificationTrainConfig cfg;
      cfg.epochs = 50;  // rank-informative transient, before weight collapse
      cfg.init_mode = InitMode::kVotingBca;
      cfg.seed = seed;
      const auto trained = stacking_classification_train(pool.table, LabeledSubset(), cfg);
      std::vector<double> w(trained.params.weights.data(), trained.params.weights.data() + 10);
      tau_stack_sum += kendall_tau_b(w, archetypes[a]);
    }
    if (tau_stack_sum > tau_few_sum) ++stacknet_wins;
  }
  EXPECT_GE(stacknet_wins, 7);
}
