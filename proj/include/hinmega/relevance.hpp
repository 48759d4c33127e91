#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hinmega/hin.hpp"
#include "hinmega/meta.hpp"

namespace hinmega::relevance {

struct RelevanceOptions {
  // Dense similarity matrices are refused beyond this many target nodes.
  std::int64_t dense_node_limit = 20000;
  // Memory guard on intermediate count factors during instance counting.
  std::int64_t factor_entry_limit = 400000000;
};

// Exact instance counts between two node populations. Entries are 64-bit
// with overflow detection everywhere they are produced.
struct CountMatrix {
  std::string row_type;
  std::string col_type;
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  std::string provenance;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<std::int64_t> data;  // row-major

  std::int64_t at(std::int64_t r, std::int64_t c) const {
    return data[static_cast<std::size_t>(r * cols + c)];
  }
  std::int64_t& at(std::int64_t r, std::int64_t c) {
    return data[static_cast<std::size_t>(r * cols + c)];
  }
  static CountMatrix zeros(std::int64_t rows, std::int64_t cols);
};

// Checked count algebra: throws NumericalError on 64-bit overflow.
CountMatrix multiply(const CountMatrix& a, const CountMatrix& b);
CountMatrix hadamard(const CountMatrix& a, const CountMatrix& b);

// Counting adjacency of one edge type as a dense CountMatrix; reversed walks
// use the transpose.
CountMatrix adjacency_count_matrix(const hin::TypedGraph& graph,
                                   const meta::MetaStep& step);

// Dense symmetric relevance scores in [0,1] for one target node type.
struct SimilarityMatrix {
  std::string node_type;
  std::vector<std::string> ids;
  std::string measure;     // "pathsim" | "graphsim" | ...
  std::string provenance;  // which meta-path / meta-graph
  Eigen::MatrixXd values;

  std::int64_t size() const { return values.rows(); }
};

// Product of the per-step adjacency matrices; entry (s,t) counts path
// instances from s to t (parallel edges weighted by multiplicity).
CountMatrix commuting_count(const hin::TypedGraph& graph, const meta::MetaPath& path,
                            const RelevanceOptions& options = {});

// Entry (s,t) counts meta-graph instances with source s and target t.
// Computed exactly by contracting the DAG's edge constraints over the
// internal meta-nodes (variable elimination); on chains this degenerates to
// the commuting matrix product, and at a merge meta-node the shared-node
// constraint appears as an elementwise product of branch counts.
CountMatrix struct_count(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                         const RelevanceOptions& options = {});

// Brute-force oracle: backtracking assignment of graph nodes to meta-nodes
// honoring types and all meta-edges. Assignments are not required injective
// across meta-nodes unless `injective`. Guarded to graphs of <= 200 nodes.
std::int64_t enumerate_instances(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                                 const std::string& source_id, const std::string& target_id,
                                 bool injective = false);
CountMatrix enumerate_count_matrix(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                                   bool injective = false);

// 2*c(s,t) / (c(s,s) + c(t,t)) on commuting counts; 0/0 = 0. Requires a
// symmetric meta-path.
SimilarityMatrix pathsim(const hin::TypedGraph& graph, const meta::MetaPath& path,
                         const RelevanceOptions& options = {});

// Normalized instance count, same formula on struct_count. Requires a
// symmetric meta-graph.
SimilarityMatrix graphsim(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                          const RelevanceOptions& options = {});

// Raw struct_count as a (unnormalized) similarity surface for k-means style
// consumers; entries are the counts cast to double.
SimilarityMatrix struct_count_matrix(const hin::TypedGraph& graph,
                                     const meta::MetaGraph& mg,
                                     const RelevanceOptions& options = {});

// `row_id<TAB>col_id<TAB>value` with `#` provenance comments.
void write_similarity_tsv(const SimilarityMatrix& sim, const std::filesystem::path& path);
// Flat binary block: text header naming ordering and measure + row-major f64.
void write_similarity_block(const SimilarityMatrix& sim, const std::filesystem::path& path);
SimilarityMatrix read_similarity_block(const std::filesystem::path& path);

}  // namespace hinmega::relevance
