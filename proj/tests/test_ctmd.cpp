#include <doctest.h>

#include <cmath>
#include <limits>

#include "hinmega/ctmd.hpp"
#include "hinmega/synth.hpp"
#include "support/oracles.hpp"

using namespace hinmega;
using ctmd::SolverState;

namespace {

Eigen::MatrixXd random_matrix(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
  Eigen::MatrixXd m(rows, cols);
  Rng rng(seed);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
  return m;
}

std::vector<Eigen::MatrixXd> random_symmetric_slices(std::int64_t m, std::int64_t n,
                                                     std::uint64_t seed) {
  std::vector<Eigen::MatrixXd> slices;
  for (std::int64_t k = 0; k < n; ++k) {
    const Eigen::MatrixXd raw = random_matrix(m, m, seed + static_cast<std::uint64_t>(k));
    slices.push_back(0.5 * (raw + raw.transpose()));
  }
  return slices;
}

// Planted instance: X = [[P*,P*,T*]], Y = P* P*^T.
struct Planted {
  Eigen::MatrixXd P, T, Y;
  std::vector<Eigen::MatrixXd> slices;
};

Planted planted_instance(std::int64_t m, std::int64_t n, int rank, std::uint64_t seed) {
  Planted out;
  out.P = random_matrix(m, rank, seed);
  out.T = random_matrix(n, rank, seed + 1);
  out.Y = out.P * out.P.transpose();
  for (std::int64_t k = 0; k < n; ++k)
    out.slices.push_back(out.P * out.T.row(k).asDiagonal() * out.P.transpose());
  return out;
}

ctmd::SimilarityTensor tensor_from_slices(const std::vector<Eigen::MatrixXd>& slices) {
  std::vector<relevance::SimilarityMatrix> sims;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    relevance::SimilarityMatrix sim;
    sim.node_type = "A";
    sim.measure = "test";
    sim.provenance = "slice" + std::to_string(k);
    const std::int64_t m = slices[k].rows();
    for (std::int64_t i = 0; i < m; ++i) sim.ids.push_back("n" + std::to_string(i));
    sim.values = slices[k];
    sims.push_back(std::move(sim));
  }
  return ctmd::SimilarityTensor::stack(sims);
}

SolverState random_state(std::int64_t m, std::int64_t n, int rank, std::uint64_t seed,
                         const std::vector<Eigen::MatrixXd>* slices,
                         const Eigen::MatrixXd* y, double alpha, double lambda) {
  SolverState s;
  s.slices = slices;
  s.coupling = y;
  s.alpha = alpha;
  s.lambda = lambda;
  s.P = random_matrix(m, rank, seed + 11);
  s.Q = random_matrix(m, rank, seed + 12);
  s.T = random_matrix(n, rank, seed + 13);
  s.U = random_matrix(m, rank, seed + 14);
  return s;
}

double fd_stationarity(const SolverState& state, const Eigen::MatrixXd& updated, int which) {
  // Max |finite-difference gradient| at the updated point, relative to
  // 1 + gradient norm at the old point.
  const Eigen::MatrixXd& old = which == 0 ? state.P : which == 1 ? state.Q : state.T;
  const Eigen::MatrixXd grad_old = oracles::fd_gradient(
      *state.slices, state.coupling, state.alpha, state.lambda, state.P, state.Q, state.T,
      state.U, which);
  SolverState at_update = state;
  (which == 0 ? at_update.P : which == 1 ? at_update.Q : at_update.T) = updated;
  const Eigen::MatrixXd grad_new = oracles::fd_gradient(
      *state.slices, at_update.coupling, at_update.alpha, at_update.lambda, at_update.P,
      at_update.Q, at_update.T, at_update.U, which);
  (void)old;
  return grad_new.cwiseAbs().maxCoeff() / (1.0 + grad_old.norm());
}

}  // namespace

TEST_CASE("update_P zeroes the subproblem gradient (finite differences)") {
  const auto slices = random_symmetric_slices(6, 2, 100);
  const Eigen::MatrixXd y = 0.5 * (random_matrix(6, 6, 200) +
                                   random_matrix(6, 6, 200).transpose());
  const SolverState state = random_state(6, 2, 2, 300, &slices, &y, 0.7, 0.3);
  CHECK(fd_stationarity(state, ctmd::update_P(state), 0) < 1e-6);
}

TEST_CASE("update_Q and update_T zero their subproblem gradients") {
  const auto slices = random_symmetric_slices(6, 2, 400);
  const Eigen::MatrixXd y = 0.5 * (random_matrix(6, 6, 500) +
                                   random_matrix(6, 6, 500).transpose());
  const SolverState state = random_state(6, 2, 2, 600, &slices, &y, 1.3, 0.2);
  CHECK(fd_stationarity(state, ctmd::update_Q(state), 1) < 1e-6);
  CHECK(fd_stationarity(state, ctmd::update_T(state), 2) < 1e-6);
}

TEST_CASE("update_P with alpha=0, lambda=0, U=0 is the plain ALS mode-1 step") {
  const auto slices = random_symmetric_slices(5, 3, 700);
  SolverState state = random_state(5, 3, 2, 800, &slices, nullptr, 0.0, 0.0);
  state.U.setZero();

  const Eigen::MatrixXd updated = ctmd::update_P(state);

  const ctmd::SimilarityTensor x = tensor_from_slices(slices);
  const Eigen::MatrixXd x1 = tensor::matricize(x.data, 1);
  const Eigen::MatrixXd f = tensor::khatri_rao(state.T, state.Q);
  const Eigen::MatrixXd als =
      ((f.transpose() * f).ldlt().solve(f.transpose() * x1.transpose())).transpose();
  CHECK((updated - als).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("updates match the matricized closed forms exactly") {
  // The slice-wise products and the Khatri-Rao gram identity must agree with
  // the literal matricization formulas.
  const auto slices = random_symmetric_slices(7, 3, 900);
  const Eigen::MatrixXd y = 0.5 * (random_matrix(7, 7, 901) +
                                   random_matrix(7, 7, 901).transpose());
  const SolverState state = random_state(7, 3, 3, 902, &slices, &y, 0.9, 0.4);
  const ctmd::SimilarityTensor x = tensor_from_slices(slices);

  {
    const Eigen::MatrixXd f = tensor::khatri_rao(state.T, state.Q);
    const Eigen::MatrixXd lhs = 2.0 * f.transpose() * f +
                                2.0 * state.alpha * state.Q.transpose() * state.Q +
                                state.lambda * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd rhs = 2.0 * tensor::matricize(x.data, 1) * f +
                                2.0 * state.alpha * y * state.Q +
                                state.lambda * state.Q - state.U;
    const Eigen::MatrixXd direct = lhs.ldlt().solve(rhs.transpose()).transpose();
    CHECK((ctmd::update_P(state) - direct).cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    const Eigen::MatrixXd g = tensor::khatri_rao(state.T, state.P);
    const Eigen::MatrixXd lhs = 2.0 * g.transpose() * g +
                                2.0 * state.alpha * state.P.transpose() * state.P +
                                state.lambda * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd rhs = 2.0 * tensor::matricize(x.data, 2) * g +
                                2.0 * state.alpha * y.transpose() * state.P +
                                state.lambda * state.P + state.U;
    const Eigen::MatrixXd direct = lhs.ldlt().solve(rhs.transpose()).transpose();
    CHECK((ctmd::update_Q(state) - direct).cwiseAbs().maxCoeff() < 1e-9);
  }
  {
    const Eigen::MatrixXd h = tensor::khatri_rao(state.Q, state.P);
    const Eigen::MatrixXd direct =
        (h.transpose() * h)
            .ldlt()
            .solve((tensor::matricize(x.data, 3) * h).transpose())
            .transpose();
    CHECK((ctmd::update_T(state) - direct).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("planted factors are a fixed point of every update") {
  const Planted planted = planted_instance(8, 3, 2, 1000);
  SolverState state;
  state.slices = &planted.slices;
  state.coupling = &planted.Y;
  state.alpha = 1.0;
  state.lambda = 0.5;
  state.P = planted.P;
  state.Q = planted.P;
  state.T = planted.T;
  state.U = Eigen::MatrixXd::Zero(8, 2);
  CHECK((ctmd::update_P(state) - planted.P).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ctmd::update_Q(state) - planted.P).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ctmd::update_T(state) - planted.T).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update_Q flips sign with P, Q, U when the coupling term is off") {
  const auto slices = random_symmetric_slices(5, 2, 1100);
  SolverState state = random_state(5, 2, 2, 1200, &slices, nullptr, 0.0, 0.7);
  const Eigen::MatrixXd q1 = ctmd::update_Q(state);
  state.P = -state.P;
  state.Q = -state.Q;
  state.U = -state.U;
  const Eigen::MatrixXd q2 = ctmd::update_Q(state);
  CHECK((q1 + q2).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("update_T edge cases") {
  // All-zero tensor: T collapses to zero.
  std::vector<Eigen::MatrixXd> zeros = {Eigen::MatrixXd::Zero(5, 5),
                                        Eigen::MatrixXd::Zero(5, 5)};
  SolverState state = random_state(5, 2, 2, 1300, &zeros, nullptr, 0.0, 0.1);
  CHECK(ctmd::update_T(state).cwiseAbs().maxCoeff() < 1e-12);

  // N=1: the single T row satisfies the normal equations.
  const auto one_slice = random_symmetric_slices(6, 1, 1400);
  SolverState single = random_state(6, 1, 2, 1500, &one_slice, nullptr, 0.0, 0.1);
  const Eigen::MatrixXd t = ctmd::update_T(single);
  REQUIRE(t.rows() == 1);
  const Eigen::MatrixXd h = tensor::khatri_rao(single.Q, single.P);
  const ctmd::SimilarityTensor x = tensor_from_slices(one_slice);
  const Eigen::MatrixXd residual =
      tensor::matricize(x.data, 3) * h - t * (h.transpose() * h);
  CHECK(residual.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("update_U accumulates the scaled primal residual") {
  SolverState state;
  std::vector<Eigen::MatrixXd> slices = {Eigen::MatrixXd::Zero(2, 2)};
  state.slices = &slices;
  state.lambda = 2.0;
  state.P = Eigen::MatrixXd::Ones(2, 2);
  state.Q = Eigen::MatrixXd::Zero(2, 2);
  state.T = Eigen::MatrixXd::Ones(1, 2);
  state.U = Eigen::MatrixXd::Zero(2, 2);
  const Eigen::MatrixXd u1 = ctmd::update_U(state);
  CHECK((u1 - 2.0 * Eigen::MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() == 0.0);

  // P = Q leaves U unchanged.
  state.Q = state.P;
  state.U = u1;
  CHECK((ctmd::update_U(state) - u1).cwiseAbs().maxCoeff() == 0.0);

  // Repeated application keeps accumulating.
  state.Q.setZero();
  state.U = u1;
  CHECK((ctmd::update_U(state) - 4.0 * Eigen::MatrixXd::Ones(2, 2)).cwiseAbs().maxCoeff() ==
        0.0);
}

TEST_CASE("ctmd fits a planted coupled instance to high accuracy") {
  const Planted planted = planted_instance(20, 3, 4, 2026);
  const ctmd::SimilarityTensor x = tensor_from_slices(planted.slices);
  relevance::SimilarityMatrix y;
  y.node_type = "A";
  y.ids = x.ids;
  y.measure = "test";
  y.values = planted.Y;

  ctmd::CtmdConfig config;
  config.rank = 4;
  config.alpha = 1.0;
  config.seed = 5;
  const ctmd::EmbeddingResult result = ctmd::ctmd(x, &y, config);

  double signal = 0.0;
  for (const auto& s : planted.slices) signal += s.squaredNorm();
  signal += config.alpha * planted.Y.squaredNorm();
  REQUIRE(!result.trace.empty());
  CHECK(result.trace.back().objective < 1e-3 * signal);
  CHECK(result.trace.back().primal_residual < 1e-4);
  CHECK(result.iterations <= 500);
}

TEST_CASE("converged flag implies the primal residual tolerance") {
  const Planted planted = planted_instance(10, 2, 2, 41);
  const ctmd::SimilarityTensor x = tensor_from_slices(planted.slices);
  ctmd::CtmdConfig config;
  config.rank = 2;
  config.alpha = 0.0;
  config.seed = 2;
  const ctmd::EmbeddingResult result = ctmd::ctmd(x, nullptr, config);
  if (result.converged) CHECK(result.trace.back().primal_residual < config.tol_residual);
}

TEST_CASE("tensor-only ctmd is competitive with symmetrized CP-ALS") {
  // On similarity slices (the solver's actual domain) unconstrained CP lands
  // on sign-consistent factors, so symmetrizing them is a fair oracle for
  // the partial-symmetric fit. Fixed instance and seed: the tensor-only mode
  // has no coupling term to break the per-column sign ambiguity of the
  // split init, so adversarial seeds can stall at a worse stationary point.
  synth::SynthConfig synth_config;
  synth_config.communities = 2;
  synth_config.authors_per_community = 8;
  synth_config.venues_per_community = 2;
  synth_config.topics_per_community = 4;
  synth_config.seed = 8;
  const hin::TypedGraph graph = synth::generate(synth_config).graph;
  const meta::MetaGraph mg = synth::author_venue_topic_meta_graph(graph.schema());
  std::vector<relevance::SimilarityMatrix> slices;
  slices.push_back(relevance::graphsim(graph, mg));
  for (const auto& p : meta::embedded_meta_paths(mg))
    slices.push_back(relevance::pathsim(graph, p));
  const ctmd::SimilarityTensor x = ctmd::SimilarityTensor::stack(slices);
  std::vector<Eigen::MatrixXd> slice_values;
  for (std::int64_t k = 0; k < x.slice_count(); ++k) slice_values.push_back(x.slice(k));

  ctmd::CtmdConfig config;
  config.rank = 3;
  config.alpha = 0.0;
  config.seed = 1;
  const ctmd::EmbeddingResult result = ctmd::ctmd(x, nullptr, config);
  const double ctmd_error =
      std::sqrt(ctmd::objective(slice_values, nullptr, 0.0, result.P, result.T));

  tensor::CpOptions cp_options;
  cp_options.max_sweeps = 500;
  const tensor::CpResult cp = tensor::cp_als(x.data, 3, 1, cp_options);
  Eigen::MatrixXd a = cp.factors.factors[0];
  Eigen::MatrixXd b = cp.factors.factors[1];
  Eigen::MatrixXd c = cp.factors.factors[2];
  for (int r = 0; r < 3; ++r) {
    if (a.col(r).dot(b.col(r)) < 0) {
      b.col(r) = -b.col(r);
      c.col(r) = -c.col(r);
    }
    const double na = a.col(r).norm();
    const double nb = b.col(r).norm();
    if (na > 0 && nb > 0) {
      a.col(r) *= std::sqrt(nb / na);
      b.col(r) *= std::sqrt(na / nb);
    }
  }
  tensor::FactorSet symmetrized;
  symmetrized.factors = {0.5 * (a + b), 0.5 * (a + b), c};
  const double cp_error = tensor::frobenius_error(x.data, symmetrized);

  CHECK(ctmd_error <= 1.05 * cp_error);
}

TEST_CASE("zero data drives the objective and the embedding toward zero") {
  std::vector<Eigen::MatrixXd> zeros = {Eigen::MatrixXd::Zero(8, 8),
                                        Eigen::MatrixXd::Zero(8, 8)};
  const ctmd::SimilarityTensor x = tensor_from_slices(zeros);
  ctmd::CtmdConfig config;
  config.rank = 2;
  config.alpha = 0.0;
  config.seed = 13;
  const ctmd::EmbeddingResult result = ctmd::ctmd(x, nullptr, config);
  REQUIRE(!result.trace.empty());
  CHECK(result.trace.back().objective <= 1e-12);
  CHECK(result.P.norm() < 1.0);
}

TEST_CASE("ctmd traces are bit-for-bit reproducible under one seed") {
  const Planted planted = planted_instance(9, 2, 2, 314);
  const ctmd::SimilarityTensor x = tensor_from_slices(planted.slices);
  relevance::SimilarityMatrix y;
  y.node_type = "A";
  y.ids = x.ids;
  y.values = planted.Y;

  ctmd::CtmdConfig config;
  config.rank = 2;
  config.alpha = 0.5;
  config.seed = 99;
  const ctmd::EmbeddingResult a = ctmd::ctmd(x, &y, config);
  const ctmd::EmbeddingResult b = ctmd::ctmd(x, &y, config);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].objective == b.trace[i].objective);
    CHECK(a.trace[i].primal_residual == b.trace[i].primal_residual);
    CHECK(a.trace[i].lambda == b.trace[i].lambda);
  }
  CHECK((a.P - b.P).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scaling every slice and the coupling scales the fit accordingly") {
  const Planted planted = planted_instance(10, 2, 2, 2718);
  const double c = 3.0;
  std::vector<Eigen::MatrixXd> scaled = planted.slices;
  for (auto& s : scaled) s *= c;

  const ctmd::SimilarityTensor x1 = tensor_from_slices(planted.slices);
  const ctmd::SimilarityTensor xc = tensor_from_slices(scaled);
  relevance::SimilarityMatrix y1, yc;
  y1.node_type = yc.node_type = "A";
  y1.ids = yc.ids = x1.ids;
  y1.values = planted.Y;
  yc.values = c * planted.Y;

  ctmd::CtmdConfig config;
  config.rank = 2;
  config.alpha = 1.0;
  config.seed = 4;
  const ctmd::EmbeddingResult r1 = ctmd::ctmd(x1, &y1, config);
  const ctmd::EmbeddingResult rc = ctmd::ctmd(xc, &yc, config);

  // The recovered reconstruction (not P itself) scales by c.
  double norm1 = 0.0, normc = 0.0;
  for (std::int64_t k = 0; k < 2; ++k) {
    norm1 += (r1.P * r1.T.row(k).asDiagonal() * r1.P.transpose()).squaredNorm();
    normc += (rc.P * rc.T.row(k).asDiagonal() * rc.P.transpose()).squaredNorm();
  }
  CHECK(std::sqrt(normc / norm1) == doctest::Approx(c).epsilon(0.01));
  // Objectives stay below the scaled signal bound.
  double signal = 0.0;
  for (const auto& s : planted.slices) signal += s.squaredNorm();
  signal += planted.Y.squaredNorm();
  CHECK(rc.trace.back().objective < 1e-3 * c * c * signal);
}

TEST_CASE("stack_similarity_tensor validation") {
  const auto slices = random_symmetric_slices(4, 2, 3141);
  ctmd::SimilarityTensor x = tensor_from_slices(slices);
  CHECK(x.node_count() == 4);
  CHECK(x.slice_count() == 2);

  // Single slice stacks to M x M x 1 equal to the matrix.
  relevance::SimilarityMatrix one;
  one.node_type = "A";
  one.ids = {"n0", "n1", "n2", "n3"};
  one.values = slices[0];
  const ctmd::SimilarityTensor single = ctmd::SimilarityTensor::stack({one});
  CHECK(single.slice_count() == 1);
  CHECK((single.slice(0) - slices[0]).cwiseAbs().maxCoeff() == 0.0);

  // Two identical slices: mode-3 fibers are constant.
  const ctmd::SimilarityTensor twin = ctmd::SimilarityTensor::stack({one, one});
  for (std::int64_t i = 0; i < 4; ++i)
    for (std::int64_t j = 0; j < 4; ++j)
      CHECK(twin.data(i, j, 0) == twin.data(i, j, 1));

  // Ordering mismatch rejected.
  relevance::SimilarityMatrix reordered = one;
  std::swap(reordered.ids[0], reordered.ids[1]);
  CHECK_THROWS_AS(ctmd::SimilarityTensor::stack({one, reordered}), InputError);

  // Asymmetric slice rejected.
  relevance::SimilarityMatrix crooked = one;
  crooked.values(0, 1) += 1.0;
  CHECK_THROWS_AS(ctmd::SimilarityTensor::stack({crooked}), InputError);
}

TEST_CASE("ctmd rejects non-finite input") {
  const auto slices = random_symmetric_slices(4, 2, 5150);
  ctmd::SimilarityTensor x = tensor_from_slices(slices);
  x.data(1, 2, 0) = std::numeric_limits<double>::quiet_NaN();
  x.data(2, 1, 0) = std::numeric_limits<double>::quiet_NaN();
  ctmd::CtmdConfig config;
  config.rank = 2;
  CHECK_THROWS_AS(ctmd::ctmd(x, nullptr, config), InputError);
}

TEST_CASE("config validation") {
  ctmd::CtmdConfig config;
  config.rho = 1.0;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = {};
  config.rank = 0;
  CHECK_THROWS_AS(config.validate(), InputError);
  config = {};
  config.lambda0 = 10.0;
  config.lambda_max = 1.0;
  CHECK_THROWS_AS(config.validate(), InputError);
}

TEST_CASE("mega on a chain meta-graph uses two coinciding slices") {
  const hin::TypedGraph graph = oracles::small_biblio_graph(6, 5, 7, 3, 3, 0.4);
  const meta::MetaGraph chain = meta::chain_meta_graph(
      meta::parse_meta_path("A-P-V-P-A", graph.schema()), graph.schema());
  ctmd::CtmdConfig config;
  config.rank = 1;
  config.seed = 21;
  const ctmd::EmbeddingResult result = ctmd::mega(graph, chain, config);
  // graphsim == pathsim on a chain, so the stacked slices coincide and the
  // two slice weights agree at the solution.
  REQUIRE(result.T.rows() == 2);
  CHECK((result.T.row(0) - result.T.row(1)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(result.P.rows() == 5);
  CHECK(result.P.allFinite());
}

TEST_CASE("mega stacks the meta-graph slice plus each embedded path slice") {
  const hin::TypedGraph graph = oracles::small_biblio_graph(8, 5, 7, 3, 3, 0.45);
  const meta::MetaGraph mg = synth::author_venue_topic_meta_graph(graph.schema());
  ctmd::CtmdConfig config;
  config.rank = 2;
  config.seed = 22;
  const ctmd::EmbeddingResult result = ctmd::mega(graph, mg, config);
  CHECK(result.T.rows() == 3);  // graphsim + APVPA + APTPA
}

TEST_CASE("mega_pp at alpha=0 coincides with tensor-only ctmd on the path slices") {
  const hin::TypedGraph graph = oracles::small_biblio_graph(5, 6, 8, 3, 4, 0.4);
  const meta::MetaGraph mg = synth::author_venue_topic_meta_graph(graph.schema());
  ctmd::CtmdConfig config;
  config.rank = 3;
  config.alpha = 0.0;
  config.seed = 17;
  const ctmd::EmbeddingResult coupled = ctmd::mega_pp(graph, mg, config);

  std::vector<relevance::SimilarityMatrix> slices;
  for (const auto& p : meta::embedded_meta_paths(mg))
    slices.push_back(relevance::pathsim(graph, p));
  const ctmd::EmbeddingResult tensor_only =
      ctmd::ctmd(ctmd::SimilarityTensor::stack(slices), nullptr, config);
  CHECK((coupled.P - tensor_only.P).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mega_pp trace objective is non-increasing once consensus holds") {
  // During the penalty ramp the objective (evaluated with P) can transiently
  // rise while P and Q are pulled together; once the primal residual has
  // collapsed (the lambda plateau), every later iteration must not increase.
  synth::SynthConfig synth_config;
  synth_config.communities = 2;
  synth_config.authors_per_community = 10;
  synth_config.venues_per_community = 2;
  synth_config.topics_per_community = 4;
  synth_config.seed = 8;
  const synth::SynthResult data = synth::generate(synth_config);
  const meta::MetaGraph mg = synth::author_venue_topic_meta_graph(data.graph.schema());
  ctmd::CtmdConfig config;
  config.rank = 4;
  config.alpha = 1.6;
  config.seed = 12;
  const ctmd::EmbeddingResult result = ctmd::mega_pp(data.graph, mg, config);

  std::size_t settled = result.trace.size();
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    if (result.trace[i].primal_residual < 1e-3) {
      settled = i;
      break;
    }
  }
  REQUIRE(settled + 5 < result.trace.size());
  for (std::size_t i = settled + 1; i < result.trace.size(); ++i)
    CHECK(result.trace[i].objective <=
          result.trace[i - 1].objective * (1.0 + 1e-9) + 1e-12);
}

TEST_CASE("mega_pp separates planted communities in cosine similarity") {
  synth::SynthConfig synth_config;
  synth_config.communities = 2;
  synth_config.authors_per_community = 12;
  synth_config.venues_per_community = 2;
  synth_config.topics_per_community = 5;
  synth_config.seed = 5;
  const synth::SynthResult data = synth::generate(synth_config);
  const meta::MetaGraph mg = synth::author_venue_topic_meta_graph(data.graph.schema());
  ctmd::CtmdConfig config;
  config.rank = 4;
  config.alpha = 1.6;
  config.seed = 3;
  const ctmd::EmbeddingResult result = ctmd::mega_pp(data.graph, mg, config);

  // Community of author row i: ids are a0000.. in block order.
  const auto community = [&](Eigen::Index row) {
    const int index = std::stoi(result.ids[static_cast<std::size_t>(row)].substr(1));
    return index / synth_config.authors_per_community;
  };
  const auto cosine = [&](Eigen::Index i, Eigen::Index j) {
    const double denom = result.P.row(i).norm() * result.P.row(j).norm();
    return denom > 0 ? result.P.row(i).dot(result.P.row(j)) / denom : 0.0;
  };

  Rng rng(777);
  const Eigen::Index m = result.P.rows();
  int better = 0, total = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index anchor = rng.uniform_int(0, m - 1);
    const Eigen::Index same = rng.uniform_int(0, m - 1);
    const Eigen::Index cross = rng.uniform_int(0, m - 1);
    if (community(anchor) != community(same) || community(anchor) == community(cross))
      continue;
    if (anchor == same) continue;
    ++total;
    if (cosine(anchor, same) > cosine(anchor, cross)) ++better;
  }
  REQUIRE(total > 50);
  CHECK(static_cast<double>(better) / total >= 0.9);
}
