#include "hinmega/ctmd.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>

#include "hinmega/io.hpp"

namespace hinmega::ctmd {

namespace {

// X(1) * (T kr Q) without materializing the unfolding:
// sum_k M_k Q diag(T.row(k)).
Eigen::MatrixXd mode1_product(const std::vector<Eigen::MatrixXd>& slices,
                              const Eigen::MatrixXd& Q, const Eigen::MatrixXd& T) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(Q.rows(), Q.cols());
  for (std::size_t k = 0; k < slices.size(); ++k)
    out.noalias() += (slices[k] * Q) * T.row(static_cast<Eigen::Index>(k)).asDiagonal();
  return out;
}

// X(2) * (T kr P) = sum_k M_k^T P diag(T.row(k)).
Eigen::MatrixXd mode2_product(const std::vector<Eigen::MatrixXd>& slices,
                              const Eigen::MatrixXd& P, const Eigen::MatrixXd& T) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P.rows(), P.cols());
  for (std::size_t k = 0; k < slices.size(); ++k)
    out.noalias() += (slices[k].transpose() * P) * T.row(static_cast<Eigen::Index>(k)).asDiagonal();
  return out;
}

// X(3) * (Q kr P): row k, column r is p_r^T M_k q_r.
Eigen::MatrixXd mode3_product(const std::vector<Eigen::MatrixXd>& slices,
                              const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(slices.size()), P.cols());
  for (std::size_t k = 0; k < slices.size(); ++k)
    out.row(static_cast<Eigen::Index>(k)) =
        (P.transpose() * slices[k] * Q).diagonal().transpose();
  return out;
}

void check_state(const SolverState& s) {
  if (s.slices == nullptr || s.slices->empty())
    throw InputError("solver state has no tensor slices");
  if (!s.P.allFinite() || !s.Q.allFinite() || !s.T.allFinite() || !s.U.allFinite())
    throw InputError("solver state has non-finite factors");
  if (s.coupling != nullptr && !s.coupling->allFinite())
    throw InputError("coupling matrix has non-finite entries");
}

}  // namespace

Eigen::MatrixXd SimilarityTensor::slice(std::int64_t k) const {
  const std::int64_t m = node_count();
  Eigen::MatrixXd out(m, m);
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j) out(i, j) = data(i, j, k);
  return out;
}

SimilarityTensor SimilarityTensor::stack(
    const std::vector<relevance::SimilarityMatrix>& slices) {
  if (slices.empty()) throw InputError("cannot stack zero similarity slices");
  const auto& first = slices.front();
  const std::int64_t m = first.values.rows();
  SimilarityTensor out;
  out.node_type = first.node_type;
  out.ids = first.ids;
  out.data = tensor::DenseTensor({m, m, static_cast<std::int64_t>(slices.size())});
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const auto& s = slices[k];
    if (s.values.rows() != m || s.values.cols() != m || s.ids != out.ids ||
        s.node_type != out.node_type)
      throw InputError("similarity slice " + std::to_string(k) +
                       " does not share the node ordering of the first slice");
    const double scale = std::max(1.0, s.values.cwiseAbs().maxCoeff());
    if ((s.values - s.values.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw InputError("similarity slice " + std::to_string(k) + " (" + s.measure +
                       ") is not symmetric");
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < m; ++j)
        out.data(i, j, static_cast<std::int64_t>(k)) = s.values(i, j);
    out.slice_names.push_back(s.measure + ":" + s.provenance);
  }
  return out;
}

void CtmdConfig::validate() const {
  if (rank < 1) throw InputError("ctmd: rank must be >= 1");
  if (alpha < 0.0) throw InputError("ctmd: alpha must be >= 0");
  if (rho <= 1.0) throw InputError("ctmd: rho must be > 1");
  if (lambda0 <= 0.0 || lambda0 > lambda_max)
    throw InputError("ctmd: lambda0 must satisfy 0 < lambda0 <= lambda_max");
  if (max_iter < 1) throw InputError("ctmd: max_iter must be >= 1");
}

Eigen::MatrixXd update_P(const SolverState& s) {
  check_state(s);
  const Eigen::Index rank = s.P.cols();
  const Eigen::MatrixXd qtq = s.Q.transpose() * s.Q;
  // F^T F via the Khatri-Rao identity: (T kr Q)^T (T kr Q) = T^T T (*) Q^T Q.
  const Eigen::MatrixXd ftf = (s.T.transpose() * s.T).cwiseProduct(qtq);
  Eigen::MatrixXd lhs = 2.0 * ftf + s.lambda * Eigen::MatrixXd::Identity(rank, rank);
  Eigen::MatrixXd rhs = 2.0 * mode1_product(*s.slices, s.Q, s.T) + s.lambda * s.Q - s.U;
  if (s.coupling != nullptr && s.alpha != 0.0) {
    lhs.noalias() += 2.0 * s.alpha * qtq;
    rhs.noalias() += 2.0 * s.alpha * (*s.coupling) * s.Q;
  }
  return tensor::spd_solve(lhs, rhs.transpose()).transpose();
}

Eigen::MatrixXd update_Q(const SolverState& s) {
  check_state(s);
  const Eigen::Index rank = s.P.cols();
  const Eigen::MatrixXd ptp = s.P.transpose() * s.P;
  const Eigen::MatrixXd gtg = (s.T.transpose() * s.T).cwiseProduct(ptp);
  Eigen::MatrixXd lhs = 2.0 * gtg + s.lambda * Eigen::MatrixXd::Identity(rank, rank);
  Eigen::MatrixXd rhs = 2.0 * mode2_product(*s.slices, s.P, s.T) + s.lambda * s.P + s.U;
  if (s.coupling != nullptr && s.alpha != 0.0) {
    lhs.noalias() += 2.0 * s.alpha * ptp;
    rhs.noalias() += 2.0 * s.alpha * s.coupling->transpose() * s.P;
  }
  return tensor::spd_solve(lhs, rhs.transpose()).transpose();
}

Eigen::MatrixXd update_T(const SolverState& s) {
  check_state(s);
  const Eigen::MatrixXd hth =
      (s.Q.transpose() * s.Q).cwiseProduct(s.P.transpose() * s.P);
  const Eigen::MatrixXd rhs = mode3_product(*s.slices, s.P, s.Q);
  bool used_fallback = false;
  Eigen::MatrixXd t =
      tensor::spd_solve(hth, rhs.transpose(), 1e-12, &used_fallback).transpose();
  if (used_fallback)
    std::cerr << "hinmega: warning: singular H^T H in T update, applied ridge 1e-12\n";
  return t;
}

Eigen::MatrixXd update_U(const SolverState& s) { return s.U + s.lambda * (s.P - s.Q); }

double objective(const std::vector<Eigen::MatrixXd>& slices,
                 const Eigen::MatrixXd* coupling, double alpha,
                 const Eigen::MatrixXd& P, const Eigen::MatrixXd& T) {
  double value = 0.0;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const Eigen::MatrixXd approx =
        P * T.row(static_cast<Eigen::Index>(k)).asDiagonal() * P.transpose();
    value += (slices[k] - approx).squaredNorm();
  }
  if (coupling != nullptr && alpha != 0.0)
    value += alpha * (*coupling - P * P.transpose()).squaredNorm();
  return value;
}

EmbeddingResult ctmd(const SimilarityTensor& X, const relevance::SimilarityMatrix* coupling,
                     const CtmdConfig& config) {
  config.validate();
  if (X.data.order() != 3) throw InputError("ctmd: tensor must be M x M x N");
  if (!X.data.all_finite()) throw InputError("ctmd: tensor has non-finite entries");
  const std::int64_t m = X.node_count();
  const std::int64_t n_slices = X.slice_count();
  if (X.data.shape()[1] != m) throw InputError("ctmd: tensor must be M x M x N");
  const Eigen::MatrixXd* Y = nullptr;
  Eigen::MatrixXd y_storage;
  if (coupling != nullptr && config.alpha != 0.0) {
    if (coupling->ids != X.ids)
      throw InputError("ctmd: coupling matrix ordering differs from the tensor's");
    if (!coupling->values.allFinite())
      throw InputError("ctmd: coupling matrix has non-finite entries");
    y_storage = coupling->values;
    Y = &y_storage;
  }

  std::vector<Eigen::MatrixXd> slices;
  slices.reserve(static_cast<std::size_t>(n_slices));
  for (std::int64_t k = 0; k < n_slices; ++k) slices.push_back(X.slice(k));

  SolverState state;
  state.slices = &slices;
  state.coupling = Y;
  state.alpha = Y != nullptr ? config.alpha : 0.0;
  state.lambda = config.lambda0;

  Rng rng = Rng(config.seed).substream("init");
  const double init_scale = config.scaled_init ? 1.0 / std::sqrt(config.rank) : 1.0;
  const auto gaussian_matrix = [&](std::int64_t rows, std::int64_t cols) {
    Eigen::MatrixXd out(rows, cols);
    for (std::int64_t i = 0; i < rows; ++i)
      for (std::int64_t j = 0; j < cols; ++j) out(i, j) = init_scale * rng.gaussian();
    return out;
  };
  state.P = gaussian_matrix(m, config.rank);
  state.Q = gaussian_matrix(m, config.rank);
  state.T = gaussian_matrix(n_slices, config.rank);
  state.U = Eigen::MatrixXd::Zero(m, config.rank);

  EmbeddingResult result;
  result.node_type = X.node_type;
  result.ids = X.ids;

  double prev_objective = std::numeric_limits<double>::infinity();
  for (int iter = 1; iter <= config.max_iter; ++iter) {
    state.P = update_P(state);
    state.Q = update_Q(state);
    state.T = update_T(state);
    state.U = update_U(state);
    state.lambda = std::min(config.rho * state.lambda, config.lambda_max);

    const double obj = objective(slices, Y, state.alpha, state.P, state.T);
    const double residual =
        (state.P - state.Q).norm() / std::max(state.P.norm(), 1.0);
    result.trace.push_back({iter, obj, residual, state.lambda});
    result.iterations = iter;
    if (!std::isfinite(obj) || !std::isfinite(residual))
      throw CtmdDivergence("ctmd: objective became non-finite at iteration " +
                               std::to_string(iter),
                           result.trace);

    const double rel_change = std::isfinite(prev_objective)
                                  ? std::abs(prev_objective - obj) /
                                        std::max(prev_objective, 1e-30)
                                  : std::numeric_limits<double>::infinity();
    if (rel_change < config.tol_objective && residual < config.tol_residual) {
      result.converged = true;
      break;
    }
    prev_objective = obj;
  }

  result.P = state.P;
  result.Q = state.Q;
  result.T = state.T;
  return result;
}

namespace {

std::vector<relevance::SimilarityMatrix> embedded_path_slices(
    const hin::TypedGraph& graph, const meta::MetaGraph& mg, bool dedupe,
    const relevance::RelevanceOptions& rel_options) {
  std::vector<meta::MetaPath> paths = meta::embedded_meta_paths(mg);
  if (dedupe) paths = meta::dedupe_paths(std::move(paths));
  std::vector<relevance::SimilarityMatrix> slices;
  slices.reserve(paths.size());
  for (const auto& p : paths) slices.push_back(relevance::pathsim(graph, p, rel_options));
  return slices;
}

}  // namespace

EmbeddingResult mega(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                     const CtmdConfig& config, bool dedupe_paths,
                     const relevance::RelevanceOptions& rel_options) {
  std::vector<relevance::SimilarityMatrix> slices;
  slices.push_back(relevance::graphsim(graph, mg, rel_options));
  for (auto& s : embedded_path_slices(graph, mg, dedupe_paths, rel_options))
    slices.push_back(std::move(s));
  const SimilarityTensor X = SimilarityTensor::stack(slices);
  CtmdConfig tensor_only = config;
  tensor_only.alpha = 0.0;
  return ctmd(X, nullptr, tensor_only);
}

EmbeddingResult mega_pp(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                        const CtmdConfig& config, bool dedupe_paths,
                        const relevance::RelevanceOptions& rel_options) {
  const relevance::SimilarityMatrix Y = relevance::graphsim(graph, mg, rel_options);
  const SimilarityTensor X =
      SimilarityTensor::stack(embedded_path_slices(graph, mg, dedupe_paths, rel_options));
  return ctmd(X, &Y, config);
}

void write_embedding_tsv(const EmbeddingResult& result, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  for (Eigen::Index i = 0; i < result.P.rows(); ++i) {
    out << result.ids[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < result.P.cols(); ++r)
      out << '\t' << io::format_double(result.P(i, r));
    out << '\n';
  }
}

void write_embedding_block(const EmbeddingResult& result, const std::filesystem::path& path) {
  io::BlockHeader header;
  header.kind = "embedding";
  header.set("node_type", result.node_type);
  header.set("rows", std::to_string(result.P.rows()));
  header.set("cols", std::to_string(result.P.cols()));
  std::string ids;
  for (std::size_t i = 0; i < result.ids.size(); ++i) {
    if (i) ids += '\t';
    ids += result.ids[i];
  }
  header.set("ordering", ids);
  std::vector<double> payload(static_cast<std::size_t>(result.P.size()));
  for (Eigen::Index i = 0; i < result.P.rows(); ++i)
    for (Eigen::Index r = 0; r < result.P.cols(); ++r)
      payload[static_cast<std::size_t>(i * result.P.cols() + r)] = result.P(i, r);
  io::write_block_file(path, header, payload);
}

LoadedEmbedding read_embedding_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open embedding file: " + path.string());
  LoadedEmbedding out;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto fields = io::split(line, '\t');
    if (fields.size() < 2)
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected node_id<TAB>v1<TAB>...");
    out.ids.push_back(fields[0]);
    std::vector<double> values;
    for (std::size_t i = 1; i < fields.size(); ++i) {
      try {
        values.push_back(std::stod(fields[i]));
      } catch (const std::exception&) {
        throw InputError(path.string() + ":" + std::to_string(lineno) +
                         ": bad float '" + fields[i] + "'");
      }
    }
    if (!rows.empty() && rows.front().size() != values.size())
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": inconsistent embedding width");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError("embedding file is empty: " + path.string());
  out.P.resize(static_cast<Eigen::Index>(rows.size()),
               static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      out.P(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return out;
}

void write_trace_csv(const std::vector<TracePoint>& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << "iter,objective,residual,lambda\n";
  for (const auto& p : trace)
    out << p.iteration << ',' << io::format_double(p.objective) << ','
        << io::format_double(p.primal_residual) << ',' << io::format_double(p.lambda)
        << '\n';
}

}  // namespace hinmega::ctmd
