#include "hinmega/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "hinmega/io.hpp"

namespace hinmega::eval {

namespace {

void check_lengths(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw InputError("label vectors have different lengths (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  if (a.empty()) throw InputError("label vectors are empty");
}

// Contingency table as nested maps: table[t][p] = count.
std::map<int, std::map<int, std::int64_t>> contingency(std::span<const int> truth,
                                                       std::span<const int> predicted) {
  std::map<int, std::map<int, std::int64_t>> table;
  for (std::size_t i = 0; i < truth.size(); ++i) table[truth[i]][predicted[i]] += 1;
  return table;
}

double entropy(const std::map<int, std::int64_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

void LabeledEmbedding::validate() const {
  if (static_cast<std::size_t>(P.rows()) != labels.size())
    throw InputError("labeled embedding: label count does not match row count");
  if (!ids.empty() && ids.size() != labels.size())
    throw InputError("labeled embedding: id count does not match row count");
  const std::set<std::string> classes(labels.begin(), labels.end());
  if (classes.size() < 2)
    throw InputError("labeled embedding: need at least 2 distinct classes");
}

std::vector<int> encode_labels(std::span<const std::string> labels) {
  std::map<std::string, int> codes;
  for (const auto& l : labels) codes.emplace(l, 0);
  int next = 0;
  for (auto& [label, code] : codes) code = next++;
  std::vector<int> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(codes.at(l));
  return out;
}

namespace {

std::vector<int> nearest_assignment(const Eigen::MatrixXd& points,
                                    const Eigen::MatrixXd& centroids) {
  std::vector<int> assignment(static_cast<std::size_t>(points.rows()), 0);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    assignment[static_cast<std::size_t>(i)] = best_c;
  }
  return assignment;
}

double inertia_of(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                  const std::vector<int>& assignment) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    total += (points.row(i) - centroids.row(assignment[static_cast<std::size_t>(i)]))
                 .squaredNorm();
  return total;
}

Eigen::MatrixXd init_centroids_random(const Eigen::MatrixXd& points, int k, Rng& rng) {
  // k distinct data points via partial Fisher-Yates.
  const std::int64_t m = points.rows();
  std::vector<std::int64_t> indices(static_cast<std::size_t>(m));
  std::iota(indices.begin(), indices.end(), 0);
  Eigen::MatrixXd centroids(k, points.cols());
  for (int c = 0; c < k; ++c) {
    const std::int64_t pick = rng.uniform_int(c, m - 1);
    std::swap(indices[static_cast<std::size_t>(c)], indices[static_cast<std::size_t>(pick)]);
    centroids.row(c) = points.row(indices[static_cast<std::size_t>(c)]);
  }
  return centroids;
}

Eigen::MatrixXd init_centroids_plus_plus(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const std::int64_t m = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(rng.uniform_int(0, m - 1));
  Eigen::VectorXd dist2(m);
  for (std::int64_t i = 0; i < m; ++i)
    dist2(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    std::int64_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      for (std::int64_t i = 0; i < m; ++i) {
        acc += dist2(i);
        if (u < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.uniform_int(0, m - 1);
    }
    centroids.row(c) = points.row(pick);
    for (std::int64_t i = 0; i < m; ++i)
      dist2(i) = std::min(dist2(i), (points.row(i) - centroids.row(c)).squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, int restarts,
                    std::uint64_t seed, bool plus_plus) {
  const std::int64_t m = points.rows();
  if (k < 1 || k > m)
    throw InputError("kmeans: k must be in [1, " + std::to_string(m) + "]");
  if (restarts < 1) throw InputError("kmeans: restarts must be >= 1");
  if (!points.allFinite()) throw InputError("kmeans: points contain non-finite values");

  constexpr int kMaxLloyd = 300;
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  const Rng master(seed);
  for (int restart = 0; restart < restarts; ++restart) {
    Rng rng = master.substream("kmeans-restart-" + std::to_string(restart));
    Eigen::MatrixXd centroids = plus_plus ? init_centroids_plus_plus(points, k, rng)
                                          : init_centroids_random(points, k, rng);
    std::vector<int> assignment;
    std::vector<double> trace;
    int iterations = 0;
    for (int iter = 0; iter < kMaxLloyd; ++iter) {
      std::vector<int> next = nearest_assignment(points, centroids);
      // Update step: mean of each cluster; empty clusters are re-seeded at
      // the point farthest from its current centroid.
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
      std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index i = 0; i < m; ++i) {
        sums.row(next[static_cast<std::size_t>(i)]) += points.row(i);
        counts[static_cast<std::size_t>(next[static_cast<std::size_t>(i)])] += 1;
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
          centroids.row(c) =
              sums.row(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        } else {
          std::int64_t farthest = 0;
          double worst = -1.0;
          for (Eigen::Index i = 0; i < m; ++i) {
            const double d =
                (points.row(i) - centroids.row(next[static_cast<std::size_t>(i)]))
                    .squaredNorm();
            if (d > worst) {
              worst = d;
              farthest = i;
            }
          }
          centroids.row(c) = points.row(farthest);
        }
      }
      trace.push_back(inertia_of(points, centroids, nearest_assignment(points, centroids)));
      iterations = iter + 1;
      if (iter > 0 && next == assignment) {
        assignment = std::move(next);
        break;
      }
      assignment = std::move(next);
    }
    const double inertia = inertia_of(points, centroids, assignment);
    if (inertia < best.inertia) {
      best.assignment = assignment;
      best.inertia = inertia;
      best.iterations = iterations;
      best.inertia_trace = trace;
    }
  }
  return best;
}

double nmi(std::span<const int> truth, std::span<const int> predicted, NmiNorm norm) {
  check_lengths(truth, predicted);
  const double n = static_cast<double>(truth.size());
  const auto table = contingency(truth, predicted);
  std::map<int, std::int64_t> rows, cols;
  bool one_to_one = true;
  std::map<int, int> seen_col;
  for (const auto& [t, row] : table) {
    if (row.size() != 1) one_to_one = false;
    for (const auto& [p, c] : row) {
      rows[t] += c;
      cols[p] += c;
      if (auto it = seen_col.find(p); it != seen_col.end() && it->second != t)
        one_to_one = false;
      seen_col.emplace(p, t);
    }
  }
  if (one_to_one) return 1.0;  // identical partitions up to relabeling

  const double hu = entropy(rows, n);
  const double hv = entropy(cols, n);
  if (hu == 0.0 || hv == 0.0) return 0.0;

  double mi = 0.0;
  for (const auto& [t, row] : table) {
    for (const auto& [p, c] : row) {
      if (c == 0) continue;
      const double pij = static_cast<double>(c) / n;
      const double pi = static_cast<double>(rows.at(t)) / n;
      const double qj = static_cast<double>(cols.at(p)) / n;
      mi += pij * std::log(pij / (pi * qj));
    }
  }
  double denom = 0.0;
  switch (norm) {
    case NmiNorm::Arithmetic: denom = 0.5 * (hu + hv); break;
    case NmiNorm::Geometric: denom = std::sqrt(hu * hv); break;
    case NmiNorm::Max: denom = std::max(hu, hv); break;
  }
  return std::clamp(mi / denom, 0.0, 1.0);
}

double purity(std::span<const int> truth, std::span<const int> predicted) {
  check_lengths(truth, predicted);
  std::map<int, std::map<int, std::int64_t>> clusters;  // cluster -> class counts
  for (std::size_t i = 0; i < truth.size(); ++i) clusters[predicted[i]][truth[i]] += 1;
  std::int64_t majority_total = 0;
  for (const auto& [cluster, classes] : clusters) {
    std::int64_t best = 0;
    for (const auto& [cls, c] : classes) best = std::max(best, c);
    majority_total += best;
  }
  return static_cast<double>(majority_total) / static_cast<double>(truth.size());
}

namespace {

struct F1Counts {
  std::map<int, std::int64_t> tp, fp, fn;
};

F1Counts f1_counts(std::span<const int> truth, std::span<const int> predicted) {
  check_lengths(truth, predicted);
  F1Counts counts;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    counts.tp[truth[i]];
    counts.tp[predicted[i]];
    if (truth[i] == predicted[i]) {
      counts.tp[truth[i]] += 1;
    } else {
      counts.fn[truth[i]] += 1;
      counts.fp[predicted[i]] += 1;
    }
  }
  return counts;
}

}  // namespace

double macro_f1(std::span<const int> truth, std::span<const int> predicted) {
  const F1Counts counts = f1_counts(truth, predicted);
  double sum = 0.0;
  std::int64_t classes = 0;
  for (const auto& [cls, tp] : counts.tp) {
    const std::int64_t fp = counts.fp.count(cls) ? counts.fp.at(cls) : 0;
    const std::int64_t fn = counts.fn.count(cls) ? counts.fn.at(cls) : 0;
    if (tp + fp + fn == 0) continue;  // neither instances nor predictions
    sum += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    ++classes;
  }
  return classes > 0 ? sum / static_cast<double>(classes) : 0.0;
}

double micro_f1(std::span<const int> truth, std::span<const int> predicted) {
  const F1Counts counts = f1_counts(truth, predicted);
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& [cls, c] : counts.tp) tp += c;
  for (const auto& [cls, c] : counts.fp) fp += c;
  for (const auto& [cls, c] : counts.fn) fn += c;
  if (2 * tp + fp + fn == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

std::string EvalReport::to_table() const {
  std::ostringstream out;
  out << "task: " << task << '\n';
  for (const auto& [k, v] : config) out << k << ": " << v << '\n';
  out << "metric";
  for (const auto& name : metric_names) out << '\t' << name;
  out << '\n';
  for (std::size_t t = 0; t < trials.size(); ++t) {
    out << "trial_" << t;
    for (const double v : trials[t]) out << '\t' << io::format_double(v);
    out << '\n';
  }
  out << "mean";
  for (const double v : mean) out << '\t' << io::format_double(v);
  out << '\n';
  out << "sd";
  for (const double v : stddev) out << '\t' << io::format_double(v);
  out << '\n';
  return out.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream out;
  out << "trial";
  for (const auto& name : metric_names) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < trials.size(); ++t) {
    out << t;
    for (const double v : trials[t]) out << ',' << io::format_double(v);
    out << '\n';
  }
  out << "mean";
  for (const double v : mean) out << ',' << io::format_double(v);
  out << '\n';
  out << "sd";
  for (const double v : stddev) out << ',' << io::format_double(v);
  out << '\n';
  return out.str();
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << to_csv();
}

namespace {

void finish_report(EvalReport& report) {
  const std::size_t metrics = report.metric_names.size();
  report.mean.assign(metrics, 0.0);
  report.stddev.assign(metrics, 0.0);
  const double n = static_cast<double>(report.trials.size());
  if (report.trials.empty()) return;
  for (const auto& trial : report.trials)
    for (std::size_t j = 0; j < metrics; ++j) report.mean[j] += trial[j] / n;
  if (report.trials.size() > 1) {
    for (const auto& trial : report.trials)
      for (std::size_t j = 0; j < metrics; ++j) {
        const double d = trial[j] - report.mean[j];
        report.stddev[j] += d * d / (n - 1.0);
      }
    for (std::size_t j = 0; j < metrics; ++j) report.stddev[j] = std::sqrt(report.stddev[j]);
  }
  for (const auto& trial : report.trials)
    for (const double v : trial)
      if (!(v >= 0.0 && v <= 1.0 + 1e-12))
        throw NumericalError("evaluation metric outside [0,1]");
}

}  // namespace

EvalReport cluster_eval(const LabeledEmbedding& data, const ClusterEvalOptions& options) {
  data.validate();
  const std::vector<int> truth = encode_labels(data.labels);
  const int classes = 1 + *std::max_element(truth.begin(), truth.end());
  const int k = options.k > 0 ? options.k : classes;

  const KMeansResult clustering =
      kmeans(data.P, k, options.restarts, Rng(options.seed).substream("kmeans").seed(),
             options.plus_plus);
  EvalReport report;
  report.task = "clustering";
  report.metric_names = {"nmi", "purity"};
  report.trials.push_back({nmi(truth, clustering.assignment, options.nmi_norm),
                           purity(truth, clustering.assignment)});
  report.config = {{"k", std::to_string(k)},
                   {"restarts", std::to_string(options.restarts)},
                   {"init", options.plus_plus ? "plusplus" : "random"},
                   {"seed", std::to_string(options.seed)}};
  finish_report(report);
  return report;
}

EvalReport knn_classify(const LabeledEmbedding& data, const KnnOptions& options) {
  data.validate();
  if (options.k < 1) throw InputError("knn: k must be >= 1");
  if (options.repeats < 1) throw InputError("knn: repeats must be >= 1");
  if (options.train_fraction <= 0.0 || options.train_fraction >= 1.0)
    throw InputError("knn: train fraction must be in (0,1)");

  const std::vector<int> truth = encode_labels(data.labels);
  const std::int64_t m = data.P.rows();
  const std::int64_t train_count =
      std::clamp<std::int64_t>(std::llround(options.train_fraction * static_cast<double>(m)),
                               1, m - 1);
  if (train_count < options.k)
    throw InputError("knn: training split smaller than k");

  Eigen::MatrixXd points = data.P;
  if (options.l2_normalize) {
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const double norm = points.row(i).norm();
      if (norm > 0.0) points.row(i) /= norm;
    }
  }

  const std::set<int> class_set(truth.begin(), truth.end());
  const Rng master(options.seed);
  EvalReport report;
  report.task = "classification";
  report.metric_names = {"macro_f1", "micro_f1"};

  for (int trial = 0; trial < options.repeats; ++trial) {
    Rng rng = master.substream("split-" + std::to_string(trial));
    std::vector<std::int64_t> order(static_cast<std::size_t>(m));
    std::iota(order.begin(), order.end(), 0);
    bool ok = false;
    for (int attempt = 0; attempt < 10 && !ok; ++attempt) {
      for (std::int64_t i = m - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
      std::set<int> train_classes;
      for (std::int64_t i = 0; i < train_count; ++i)
        train_classes.insert(truth[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
      ok = train_classes == class_set;
    }
    if (!ok)
      throw InputError("knn: a class is missing from the training split after 10 resamples");

    std::vector<int> test_truth, test_pred;
    std::vector<std::pair<double, std::int64_t>> neighbors;
    for (std::int64_t t = train_count; t < m; ++t) {
      const std::int64_t row = order[static_cast<std::size_t>(t)];
      neighbors.clear();
      for (std::int64_t i = 0; i < train_count; ++i) {
        const std::int64_t train_row = order[static_cast<std::size_t>(i)];
        neighbors.emplace_back((points.row(row) - points.row(train_row)).squaredNorm(),
                               train_row);
      }
      const std::size_t kk = static_cast<std::size_t>(std::min<std::int64_t>(
          options.k, static_cast<std::int64_t>(neighbors.size())));
      std::partial_sort(neighbors.begin(), neighbors.begin() + static_cast<std::ptrdiff_t>(kk),
                        neighbors.end());
      std::map<int, int> votes;
      for (std::size_t i = 0; i < kk; ++i)
        votes[truth[static_cast<std::size_t>(neighbors[i].second)]] += 1;
      int best_votes = 0;
      for (const auto& [cls, v] : votes) best_votes = std::max(best_votes, v);
      // Tie-break: the nearest neighbor whose class is among the tied ones.
      int predicted = -1;
      for (std::size_t i = 0; i < kk && predicted < 0; ++i) {
        const int cls = truth[static_cast<std::size_t>(neighbors[i].second)];
        if (votes[cls] == best_votes) predicted = cls;
      }
      test_truth.push_back(truth[static_cast<std::size_t>(row)]);
      test_pred.push_back(predicted);
    }
    report.trials.push_back({macro_f1(test_truth, test_pred), micro_f1(test_truth, test_pred)});
  }

  report.config = {{"k", std::to_string(options.k)},
                   {"train_fraction", io::format_double(options.train_fraction)},
                   {"repeats", std::to_string(options.repeats)},
                   {"normalize", options.l2_normalize ? "l2" : "none"},
                   {"seed", std::to_string(options.seed)}};
  finish_report(report);
  return report;
}

}  // namespace hinmega::eval
