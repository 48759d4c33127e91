#include <doctest.h>

#include <cmath>

#include "hinmega/eval.hpp"
#include "support/oracles.hpp"

using namespace hinmega;

namespace {

Eigen::MatrixXd two_blobs(int per_cluster, double separation, std::uint64_t seed) {
  Eigen::MatrixXd points(2 * per_cluster, 2);
  Rng rng(seed);
  for (int i = 0; i < per_cluster; ++i) {
    points(i, 0) = rng.gaussian() * 0.1;
    points(i, 1) = rng.gaussian() * 0.1;
    points(per_cluster + i, 0) = separation + rng.gaussian() * 0.1;
    points(per_cluster + i, 1) = separation + rng.gaussian() * 0.1;
  }
  return points;
}

std::vector<int> blob_labels(int per_cluster) {
  std::vector<int> labels;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < per_cluster; ++i) labels.push_back(c);
  return labels;
}

}  // namespace

TEST_CASE("kmeans separates two well-separated blobs perfectly") {
  const Eigen::MatrixXd points = two_blobs(20, 10.0, 5);
  const eval::KMeansResult result = eval::kmeans(points, 2, 10, 123);
  const std::vector<int> truth = blob_labels(20);
  CHECK(eval::nmi(truth, result.assignment) == 1.0);
  CHECK(eval::purity(truth, result.assignment) == 1.0);
}

TEST_CASE("kmeans with k equal to the point count has zero inertia") {
  const Eigen::MatrixXd points = two_blobs(3, 4.0, 6);
  const eval::KMeansResult result = eval::kmeans(points, 6, 5, 7);
  CHECK(result.inertia == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kmeans is deterministic under a fixed seed") {
  const Eigen::MatrixXd points = two_blobs(15, 2.0, 8);
  const eval::KMeansResult a = eval::kmeans(points, 3, 7, 999);
  const eval::KMeansResult b = eval::kmeans(points, 3, 7, 999);
  CHECK(a.assignment == b.assignment);
  CHECK(a.inertia == b.inertia);
}

TEST_CASE("kmeans inertia is non-increasing across Lloyd iterations") {
  const Eigen::MatrixXd points = two_blobs(25, 1.0, 9);
  const eval::KMeansResult result = eval::kmeans(points, 4, 3, 11);
  for (std::size_t i = 1; i < result.inertia_trace.size(); ++i)
    CHECK(result.inertia_trace[i] <= result.inertia_trace[i - 1] + 1e-9);
}

TEST_CASE("kmeans argument validation") {
  const Eigen::MatrixXd points = two_blobs(3, 1.0, 10);
  CHECK_THROWS_AS(eval::kmeans(points, 7, 1, 1), InputError);   // k > M
  CHECK_THROWS_AS(eval::kmeans(points, 2, 0, 1), InputError);   // restarts < 1
}

TEST_CASE("kmeans++ initialization also separates blobs") {
  const Eigen::MatrixXd points = two_blobs(20, 8.0, 12);
  const eval::KMeansResult result = eval::kmeans(points, 2, 5, 13, /*plus_plus=*/true);
  CHECK(eval::nmi(blob_labels(20), result.assignment) == 1.0);
}

TEST_CASE("nmi basics") {
  const std::vector<int> a = {0, 0, 1, 1};
  const std::vector<int> b = {1, 1, 0, 0};
  CHECK(eval::nmi(a, a) == 1.0);
  CHECK(eval::nmi(a, b) == 1.0);  // permutation invariance
  const std::vector<int> c = {0, 1, 0, 1};
  CHECK(eval::nmi(a, c) == doctest::Approx(0.0));
  CHECK_THROWS_AS(eval::nmi(a, std::vector<int>{0, 1}), InputError);

  // Single cluster against a split: zero entropy on one side.
  const std::vector<int> flat = {0, 0, 0, 0};
  CHECK(eval::nmi(flat, c) == 0.0);
  CHECK(eval::nmi(flat, flat) == 1.0);
}

TEST_CASE("nmi of independent random labelings is near zero") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::vector<int> a(10000), b(10000);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<int>(rng.uniform_int(0, 3));
      b[i] = static_cast<int>(rng.uniform_int(0, 3));
    }
    CHECK(eval::nmi(a, b) < 0.01);
  }
}

TEST_CASE("nmi matches the independent contingency oracle") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 31);
    const int n = 40;
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 2));
      b[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 3));
    }
    CHECK(eval::nmi(a, b) == doctest::Approx(oracles::nmi_oracle(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("purity on hand-checked cases") {
  const std::vector<int> perfect_truth = {0, 0, 1, 1};
  const std::vector<int> perfect_pred = {5, 5, 9, 9};
  CHECK(eval::purity(perfect_truth, perfect_pred) == 1.0);

  // One cluster over classes sized (6, 3, 1): purity 6/10.
  std::vector<int> truth;
  for (int i = 0; i < 6; ++i) truth.push_back(0);
  for (int i = 0; i < 3; ++i) truth.push_back(1);
  truth.push_back(2);
  const std::vector<int> single(10, 0);
  CHECK(eval::purity(truth, single) == doctest::Approx(0.6));
  CHECK(eval::purity(truth, single) == oracles::purity_oracle(truth, single));

  // Singleton clusters trivially reach purity 1.
  std::vector<int> singletons(10);
  for (int i = 0; i < 10; ++i) singletons[static_cast<std::size_t>(i)] = i;
  CHECK(eval::purity(truth, singletons) == 1.0);
}

TEST_CASE("purity lower bound and permutation invariance properties") {
  for (std::uint64_t seed = 5; seed < 15; ++seed) {
    Rng rng(seed);
    const int n = 60;
    std::vector<int> truth(n), pred(n), permuted(n);
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 3));
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 4));
      permuted[static_cast<std::size_t>(i)] = 7 - pred[static_cast<std::size_t>(i)];
    }
    CHECK(eval::purity(truth, pred) >= 0.25);
    CHECK(eval::purity(truth, pred) == eval::purity(truth, permuted));
    CHECK(eval::nmi(truth, pred) == doctest::Approx(eval::nmi(truth, permuted)).epsilon(1e-12));
  }
}

TEST_CASE("macro and micro F1 on a hand-enumerated confusion matrix") {
  // class 0: TP=2, FP=1, FN=1; class 1: TP=1, FP=1, FN=1.
  const std::vector<int> truth = {0, 0, 0, 1, 1};
  const std::vector<int> pred = {0, 0, 1, 0, 1};
  const double f1_class0 = 2.0 * 2 / (2 * 2 + 1 + 1);
  const double f1_class1 = 2.0 * 1 / (2 * 1 + 1 + 1);
  CHECK(eval::macro_f1(truth, pred) == doctest::Approx((f1_class0 + f1_class1) / 2));
  CHECK(eval::micro_f1(truth, pred) == doctest::Approx(0.6));
  CHECK(eval::macro_f1(truth, pred) == oracles::macro_f1_oracle(truth, pred));
  CHECK(eval::micro_f1(truth, pred) == oracles::micro_f1_oracle(truth, pred));
}

TEST_CASE("all-one-class predictions on balanced binary labels") {
  const std::vector<int> truth = {0, 0, 1, 1};
  const std::vector<int> pred = {0, 0, 0, 0};
  CHECK(eval::micro_f1(truth, pred) == doctest::Approx(0.5));
}

TEST_CASE("micro F1 equals accuracy for single-label classification") {
  for (std::uint64_t seed = 2; seed < 10; ++seed) {
    Rng rng(seed);
    const int n = 50;
    std::vector<int> truth(n), pred(n);
    int hits = 0;
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 2));
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 2));
      if (truth[static_cast<std::size_t>(i)] == pred[static_cast<std::size_t>(i)]) ++hits;
    }
    CHECK(eval::micro_f1(truth, pred) ==
          doctest::Approx(static_cast<double>(hits) / n).epsilon(1e-12));
  }
}

TEST_CASE("F1 implementations match the confusion-matrix oracle on random labelings") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7 + 1);
    const int n = 30;
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 3));
      pred[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(0, 3));
    }
    CHECK(eval::macro_f1(truth, pred) == oracles::macro_f1_oracle(truth, pred));
    CHECK(eval::micro_f1(truth, pred) == oracles::micro_f1_oracle(truth, pred));
  }
}

TEST_CASE("knn_classify is perfect on a one-hot separable embedding") {
  const int per_class = 10;
  Eigen::MatrixXd points = Eigen::MatrixXd::Zero(3 * per_class, 3);
  eval::LabeledEmbedding data;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < per_class; ++i) {
      points(c * per_class + i, c) = 1.0;
      data.labels.push_back("class" + std::to_string(c));
    }
  }
  data.P = points;
  eval::KnnOptions options;
  options.seed = 77;
  const eval::EvalReport report = eval::knn_classify(data, options);
  CHECK(report.mean[0] == doctest::Approx(1.0));
  CHECK(report.mean[1] == doctest::Approx(1.0));
  CHECK(report.trials.size() == 10);
}

TEST_CASE("knn_classify on shuffled labels hovers near chance") {
  const int n = 1000;
  Rng rng(31);
  Eigen::MatrixXd points(n, 4);
  eval::LabeledEmbedding data;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 4; ++j) points(i, j) = rng.gaussian();
    data.labels.push_back("c" + std::to_string(rng.uniform_int(0, 3)));
  }
  data.P = points;
  eval::KnnOptions options;
  options.seed = 17;
  const eval::EvalReport report = eval::knn_classify(data, options);
  CHECK(std::abs(report.mean[1] - 0.25) <= 0.05);  // micro F1 near chance
}

TEST_CASE("knn_classify reports are reproducible and metrics bounded") {
  const Eigen::MatrixXd points = two_blobs(20, 3.0, 21);
  eval::LabeledEmbedding data;
  data.P = points;
  for (const int l : blob_labels(20)) data.labels.push_back("c" + std::to_string(l));
  eval::KnnOptions options;
  options.seed = 5;
  const eval::EvalReport a = eval::knn_classify(data, options);
  const eval::EvalReport b = eval::knn_classify(data, options);
  CHECK(a.trials == b.trials);
  for (const auto& trial : a.trials)
    for (const double v : trial) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  CHECK(a.to_csv() == b.to_csv());
}

TEST_CASE("knn_classify errors when a class cannot appear in training") {
  // Nine points of one class, one of another, train fraction 0.5: the lone
  // second-class point lands in training with probability ~.5 per attempt,
  // so with an adversarial seed the resampling can still succeed; instead
  // make it impossible: a class with zero chance is not constructible, so
  // use k larger than the training split to trigger the other error.
  eval::LabeledEmbedding data;
  data.P = Eigen::MatrixXd::Random(6, 2);
  data.labels = {"a", "a", "a", "b", "b", "b"};
  eval::KnnOptions options;
  options.k = 5;
  options.train_fraction = 0.5;  // 3 training rows < k
  CHECK_THROWS_AS(eval::knn_classify(data, options), InputError);
}

TEST_CASE("labeled embedding validation") {
  eval::LabeledEmbedding data;
  data.P = Eigen::MatrixXd::Random(4, 2);
  data.labels = {"a", "a", "a"};
  CHECK_THROWS_AS(data.validate(), InputError);
  data.labels = {"a", "a", "a", "a"};
  CHECK_THROWS_AS(data.validate(), InputError);  // single class
}

TEST_CASE("cluster_eval produces a bounded single-trial report") {
  const Eigen::MatrixXd points = two_blobs(15, 6.0, 33);
  eval::LabeledEmbedding data;
  data.P = points;
  for (const int l : blob_labels(15)) data.labels.push_back("c" + std::to_string(l));
  eval::ClusterEvalOptions options;
  options.restarts = 20;
  options.seed = 3;
  const eval::EvalReport report = eval::cluster_eval(data, options);
  REQUIRE(report.trials.size() == 1);
  CHECK(report.trials[0][0] == 1.0);  // nmi
  CHECK(report.trials[0][1] == 1.0);  // purity
  CHECK(report.task == "clustering");
}
