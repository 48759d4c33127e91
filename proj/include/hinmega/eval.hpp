#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "hinmega/common.hpp"

namespace hinmega::eval {

// Embedding rows paired with ground-truth class labels.
struct LabeledEmbedding {
  Eigen::MatrixXd P;
  std::vector<std::string> labels;  // one per row
  std::vector<std::string> ids;     // optional, one per row when present

  void validate() const;  // label count matches rows, >= 2 distinct classes
};

// Deterministic integer encoding of string labels (sorted label order).
std::vector<int> encode_labels(std::span<const std::string> labels);

struct KMeansResult {
  std::vector<int> assignment;
  double inertia = 0.0;
  int iterations = 0;
  std::vector<double> inertia_trace;  // per Lloyd iteration of the winning restart
};

// Lloyd's algorithm, best inertia over `restarts` random initializations
// (uniform distinct data points, or k-means++ when plus_plus).
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts,
                    std::uint64_t seed, bool plus_plus = false);

enum class NmiNorm { Arithmetic, Geometric, Max };

// Mutual information normalized by the (arithmetic, by default) mean of the
// entropies; 1 when the partitions are identical, 0 when either entropy is 0
// and the partitions differ.
double nmi(std::span<const int> truth, std::span<const int> predicted,
           NmiNorm norm = NmiNorm::Arithmetic);

// Sum over clusters of the majority class count, divided by the total.
double purity(std::span<const int> truth, std::span<const int> predicted);

// Unweighted mean of per-class F1 (classes absent from both truth and
// prediction excluded) / F1 of the pooled counts.
double macro_f1(std::span<const int> truth, std::span<const int> predicted);
double micro_f1(std::span<const int> truth, std::span<const int> predicted);

struct EvalReport {
  std::string task;  // "clustering" | "classification"
  std::vector<std::string> metric_names;
  std::vector<std::vector<double>> trials;  // trials x metrics
  std::vector<double> mean;
  std::vector<double> stddev;  // sample sd; 0 for a single trial
  std::vector<std::pair<std::string, std::string>> config;  // echo

  std::string to_table() const;
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

struct ClusterEvalOptions {
  int k = 0;  // 0: number of distinct labels
  int restarts = 100;
  bool plus_plus = false;
  NmiNorm nmi_norm = NmiNorm::Arithmetic;
  std::uint64_t seed = 1;
};

EvalReport cluster_eval(const LabeledEmbedding& data, const ClusterEvalOptions& options);

struct KnnOptions {
  int k = 5;
  double train_fraction = 0.8;
  int repeats = 10;
  bool l2_normalize = false;
  std::uint64_t seed = 1;
};

// Euclidean k-NN majority vote (ties broken by the nearest neighbor among the
// tied classes), uniform random splits re-sampled (max 10 tries) when a class
// is missing from training. Reports Macro-F1 / Micro-F1 mean and sd.
EvalReport knn_classify(const LabeledEmbedding& data, const KnnOptions& options);

}  // namespace hinmega::eval
