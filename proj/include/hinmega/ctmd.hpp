#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hinmega/relevance.hpp"
#include "hinmega/tensor.hpp"

namespace hinmega::ctmd {

// M x M x N stack of per-meta-path similarity slices; every frontal slice is
// symmetric (the stack is partial symmetric in modes 1 and 2).
struct SimilarityTensor {
  std::string node_type;
  std::vector<std::string> ids;          // shared node ordering (M)
  std::vector<std::string> slice_names;  // provenance per slice (N)
  tensor::DenseTensor data;              // M x M x N

  std::int64_t node_count() const { return data.order() == 3 ? data.shape()[0] : 0; }
  std::int64_t slice_count() const { return data.order() == 3 ? data.shape()[2] : 0; }
  Eigen::MatrixXd slice(std::int64_t k) const;

  // Validates matching orderings and slice symmetry.
  static SimilarityTensor stack(const std::vector<relevance::SimilarityMatrix>& slices);
};

struct CtmdConfig {
  int rank = 5;
  double alpha = 1.0;         // coupling weight; only used when a Y matrix is given
  double lambda0 = 1e-6;      // initial penalty
  double rho = 1.15;          // penalty growth per iteration
  double lambda_max = 1e6;
  int max_iter = 500;
  double tol_objective = 1e-6;  // relative objective change
  double tol_residual = 1e-4;   // ||P-Q||_F / max(||P||_F, 1)
  std::uint64_t seed = 1;
  bool scaled_init = false;     // divide the N(0,1) init by sqrt(rank)

  void validate() const;
};

struct TracePoint {
  int iteration;
  double objective;        // tensor fit + alpha * matrix fit, evaluated with P
  double primal_residual;  // ||P-Q||_F / max(||P||_F, 1)
  double lambda;
};

struct EmbeddingResult {
  std::string node_type;
  std::vector<std::string> ids;
  Eigen::MatrixXd P;  // M x R node embedding
  Eigen::MatrixXd T;  // N x R slice weights
  Eigen::MatrixXd Q;  // auxiliary variable at termination
  std::vector<TracePoint> trace;
  int iterations = 0;
  bool converged = false;
};

// Thrown when the solve turns non-finite; carries the trace collected so far
// so callers can still persist diagnostics.
class CtmdDivergence : public NumericalError {
 public:
  CtmdDivergence(const std::string& message, std::vector<TracePoint> trace)
      : NumericalError(message), trace_(std::move(trace)) {}
  const std::vector<TracePoint>& trace() const { return trace_; }

 private:
  std::vector<TracePoint> trace_;
};

// One ADMM iteration's inputs, exposed so the closed-form updates can be
// exercised (and finite-difference checked) in isolation.
struct SolverState {
  const std::vector<Eigen::MatrixXd>* slices = nullptr;  // N symmetric M x M
  const Eigen::MatrixXd* coupling = nullptr;             // Y, null when alpha = 0
  double alpha = 0.0;
  double lambda = 0.0;
  Eigen::MatrixXd P, Q, T, U;
};

// Closed-form subproblem minimizers of the augmented Lagrangian.
Eigen::MatrixXd update_P(const SolverState& s);
Eigen::MatrixXd update_Q(const SolverState& s);
Eigen::MatrixXd update_T(const SolverState& s);
// Multiplier ascent step: U + lambda (P - Q).
Eigen::MatrixXd update_U(const SolverState& s);

// || X - [[P,P,T]] ||_F^2 + alpha * || Y - P P^T ||_F^2 (Y term dropped when
// coupling is null).
double objective(const std::vector<Eigen::MatrixXd>& slices,
                 const Eigen::MatrixXd* coupling, double alpha,
                 const Eigen::MatrixXd& P, const Eigen::MatrixXd& T);

// Coupled tensor-matrix decomposition by ADMM with an increasing penalty.
// `coupling` may be null, in which case the alpha term is dropped entirely.
EmbeddingResult ctmd(const SimilarityTensor& X, const relevance::SimilarityMatrix* coupling,
                     const CtmdConfig& config);

// Tensor-only embedding: stacks [graphsim(mg)] + [pathsim(p) for each
// embedded meta-path p] and runs ctmd with alpha = 0.
EmbeddingResult mega(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                     const CtmdConfig& config, bool dedupe_paths = false,
                     const relevance::RelevanceOptions& rel_options = {});

// Coupled embedding: Y = graphsim(mg), X = stacked pathsim slices of the
// embedded meta-paths, P = ctmd(X, Y).
EmbeddingResult mega_pp(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                        const CtmdConfig& config, bool dedupe_paths = false,
                        const relevance::RelevanceOptions& rel_options = {});

// node_id<TAB>v1<TAB>...<TAB>vR
void write_embedding_tsv(const EmbeddingResult& result, const std::filesystem::path& path);
// Binary block (order-2 tensor payload with id ordering).
void write_embedding_block(const EmbeddingResult& result, const std::filesystem::path& path);
struct LoadedEmbedding {
  std::vector<std::string> ids;
  Eigen::MatrixXd P;
};
LoadedEmbedding read_embedding_tsv(const std::filesystem::path& path);
// iter,objective,residual,lambda
void write_trace_csv(const std::vector<TracePoint>& trace, const std::filesystem::path& path);

}  // namespace hinmega::ctmd
