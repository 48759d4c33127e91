#include "hinmega/relevance.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "hinmega/io.hpp"

namespace hinmega::relevance {

namespace {

// A count table over a set of meta-node variables; data is row-major in the
// listed variable order (last variable fastest).
struct Factor {
  std::vector<int> vars;            // meta-node indices, ascending
  std::vector<std::int64_t> dims;   // candidate counts per variable
  std::vector<std::int64_t> data;

  std::int64_t entry_count() const {
    std::int64_t n = 1;
    for (const std::int64_t d : dims) n = checked_mul(n, d);
    return n;
  }
};

std::int64_t type_count(const hin::TypedGraph& graph, const std::string& type) {
  return static_cast<std::int64_t>(graph.ids_of_type(type).size());
}

// Multiply all `inputs` together and sum out `eliminate` (or keep everything
// when eliminate < 0). Exact 64-bit arithmetic with overflow detection.
Factor contract(const std::vector<const Factor*>& inputs, int eliminate,
                const std::vector<std::int64_t>& var_dims,
                const RelevanceOptions& options) {
  std::vector<int> union_vars;
  for (const Factor* f : inputs)
    for (const int v : f->vars)
      if (std::find(union_vars.begin(), union_vars.end(), v) == union_vars.end())
        union_vars.push_back(v);
  std::sort(union_vars.begin(), union_vars.end());

  Factor out;
  for (const int v : union_vars)
    if (v != eliminate) {
      out.vars.push_back(v);
      out.dims.push_back(var_dims[static_cast<std::size_t>(v)]);
    }
  const std::int64_t out_count = out.entry_count();
  if (out_count > options.factor_entry_limit)
    throw NumericalError("instance counting intermediate exceeds factor entry limit");
  out.data.assign(static_cast<std::size_t>(out_count), 0);

  // Iterate the full union index space with an odometer; track flat offsets
  // into each input factor and the output incrementally via strides.
  const std::size_t k = union_vars.size();
  std::vector<std::int64_t> dims(k);
  for (std::size_t i = 0; i < k; ++i)
    dims[i] = var_dims[static_cast<std::size_t>(union_vars[i])];

  const auto strides_for = [&](const std::vector<int>& vars,
                               const std::vector<std::int64_t>& fdims) {
    // stride of union position i inside a factor laid out row-major on vars
    std::vector<std::int64_t> strides(k, 0);
    std::vector<std::int64_t> fs(vars.size());
    std::int64_t acc = 1;
    for (std::size_t j = vars.size(); j-- > 0;) {
      fs[j] = acc;
      acc *= fdims[j];
    }
    for (std::size_t j = 0; j < vars.size(); ++j) {
      const auto pos = std::find(union_vars.begin(), union_vars.end(), vars[j]);
      strides[static_cast<std::size_t>(pos - union_vars.begin())] = fs[j];
    }
    return strides;
  };

  std::vector<std::vector<std::int64_t>> in_strides;
  in_strides.reserve(inputs.size());
  for (const Factor* f : inputs) in_strides.push_back(strides_for(f->vars, f->dims));
  const std::vector<std::int64_t> out_strides = strides_for(out.vars, out.dims);

  std::vector<std::int64_t> idx(k, 0);
  std::vector<std::int64_t> in_off(inputs.size(), 0);
  std::int64_t out_off = 0;
  std::int64_t total = 1;
  for (const std::int64_t d : dims) total = checked_mul(total, d);
  if (total > options.factor_entry_limit)
    throw NumericalError("instance counting workload exceeds factor entry limit");

  for (std::int64_t step = 0; step < total; ++step) {
    std::int64_t product = 1;
    for (std::size_t f = 0; f < inputs.size(); ++f) {
      product = checked_mul(product, inputs[f]->data[static_cast<std::size_t>(in_off[f])]);
      if (product == 0) break;
    }
    if (product != 0) {
      auto& cell = out.data[static_cast<std::size_t>(out_off)];
      cell = checked_add(cell, product);
    }
    // Odometer increment, last union variable fastest.
    for (std::size_t i = k; i-- > 0;) {
      ++idx[i];
      for (std::size_t f = 0; f < inputs.size(); ++f) in_off[f] += in_strides[f][i];
      out_off += out_strides[i];
      if (idx[i] < dims[i]) break;
      for (std::size_t f = 0; f < inputs.size(); ++f) in_off[f] -= in_strides[f][i] * dims[i];
      out_off -= out_strides[i] * dims[i];
      idx[i] = 0;
    }
  }
  return out;
}

void check_dense_limit(std::int64_t nodes, const RelevanceOptions& options,
                       const char* what) {
  if (nodes > options.dense_node_limit)
    throw InputError(std::string(what) + ": " + std::to_string(nodes) +
                     " target nodes exceed the dense limit of " +
                     std::to_string(options.dense_node_limit) +
                     " (raise --dense-limit to override)");
}

SimilarityMatrix normalize_counts(const CountMatrix& counts, std::string measure) {
  if (counts.rows != counts.cols)
    throw NumericalError("similarity normalization needs a square count matrix");
  const std::int64_t m = counts.rows;
  SimilarityMatrix sim;
  sim.node_type = counts.row_type;
  sim.ids = counts.row_ids;
  sim.measure = std::move(measure);
  sim.provenance = counts.provenance;
  sim.values = Eigen::MatrixXd::Zero(m, m);
  for (std::int64_t i = 0; i < m; ++i) {
    for (std::int64_t j = i; j < m; ++j) {
      const std::int64_t cross = counts.at(i, j);
      if (cross != counts.at(j, i))
        throw NumericalError("count matrix is not symmetric; cannot normalize");
      const std::int64_t denom = checked_add(counts.at(i, i), counts.at(j, j));
      if (cross < 0 || checked_mul(2, cross) > denom)
        throw NumericalError("count matrix violates 2*c(s,t) <= c(s,s)+c(t,t)");
      const double value =
          denom == 0 ? 0.0 : 2.0 * static_cast<double>(cross) / static_cast<double>(denom);
      sim.values(i, j) = value;
      sim.values(j, i) = value;
    }
  }
  return sim;
}

}  // namespace

CountMatrix CountMatrix::zeros(std::int64_t rows, std::int64_t cols) {
  CountMatrix out;
  out.rows = rows;
  out.cols = cols;
  out.data.assign(static_cast<std::size_t>(checked_mul(rows, cols)), 0);
  return out;
}

CountMatrix multiply(const CountMatrix& a, const CountMatrix& b) {
  if (a.cols != b.rows) throw InputError("count matrix dimension mismatch in multiply");
  CountMatrix out = CountMatrix::zeros(a.rows, b.cols);
  out.row_type = a.row_type;
  out.col_type = b.col_type;
  out.row_ids = a.row_ids;
  out.col_ids = b.col_ids;
  parallel_for(a.rows, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      for (std::int64_t k = 0; k < a.cols; ++k) {
        const std::int64_t aik = a.at(i, k);
        if (aik == 0) continue;
        for (std::int64_t j = 0; j < b.cols; ++j) {
          const std::int64_t bkj = b.at(k, j);
          if (bkj == 0) continue;
          out.at(i, j) = checked_add(out.at(i, j), checked_mul(aik, bkj));
        }
      }
    }
  });
  return out;
}

CountMatrix hadamard(const CountMatrix& a, const CountMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw InputError("count matrix dimension mismatch in hadamard");
  CountMatrix out = a;
  for (std::size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = checked_mul(out.data[i], b.data[i]);
  return out;
}

CountMatrix adjacency_count_matrix(const hin::TypedGraph& graph,
                                   const meta::MetaStep& step) {
  const hin::EdgeTypeDef* def = graph.schema().find_edge_type(step.edge_label);
  if (def == nullptr) throw InputError("unknown edge type '" + step.edge_label + "'");
  const hin::SparseAdjacency adj = graph.adjacency(step.edge_label);
  CountMatrix out;
  if (!step.reversed) {
    out = CountMatrix::zeros(adj.rows, adj.cols);
    out.row_type = def->src_type;
    out.col_type = def->dst_type;
    for (const auto& e : adj.entries) out.at(e.row, e.col) = e.count;
  } else {
    out = CountMatrix::zeros(adj.cols, adj.rows);
    out.row_type = def->dst_type;
    out.col_type = def->src_type;
    for (const auto& e : adj.entries) out.at(e.col, e.row) = e.count;
  }
  out.row_ids = graph.ids_of_type(out.row_type);
  out.col_ids = graph.ids_of_type(out.col_type);
  return out;
}

CountMatrix commuting_count(const hin::TypedGraph& graph, const meta::MetaPath& path,
                            const RelevanceOptions& options) {
  if (path.steps.empty()) throw InputError("meta-path must have at least one step");
  check_dense_limit(
      std::max(type_count(graph, path.source_type()), type_count(graph, path.target_type())),
      options, "commuting_count");
  CountMatrix acc = adjacency_count_matrix(graph, path.steps.front());
  for (std::size_t i = 1; i < path.steps.size(); ++i)
    acc = multiply(acc, adjacency_count_matrix(graph, path.steps[i]));
  acc.provenance = path.to_string(graph.schema());
  return acc;
}

CountMatrix struct_count(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                         const RelevanceOptions& options) {
  check_dense_limit(
      std::max(type_count(graph, mg.source_type()), type_count(graph, mg.target_type())),
      options, "struct_count");

  const int n = static_cast<int>(mg.nodes().size());
  std::vector<std::int64_t> var_dims(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v)
    var_dims[static_cast<std::size_t>(v)] =
        type_count(graph, mg.nodes()[static_cast<std::size_t>(v)].type);

  // One factor per meta-edge, carrying the oriented counting adjacency.
  std::vector<Factor> factors;
  for (const auto& e : mg.edges()) {
    const CountMatrix w = adjacency_count_matrix(graph, e.step);
    Factor f;
    if (e.from < e.to) {
      f.vars = {e.from, e.to};
      f.dims = {w.rows, w.cols};
      f.data = w.data;
    } else {
      // Keep variables ascending: store the transpose.
      f.vars = {e.to, e.from};
      f.dims = {w.cols, w.rows};
      f.data.assign(static_cast<std::size_t>(w.rows * w.cols), 0);
      for (std::int64_t r = 0; r < w.rows; ++r)
        for (std::int64_t c = 0; c < w.cols; ++c)
          f.data[static_cast<std::size_t>(c * w.rows + r)] = w.at(r, c);
    }
    factors.push_back(std::move(f));
  }

  // Eliminate internal meta-nodes one at a time, smallest resulting factor
  // first (ties by meta-node index) for a deterministic, frugal order.
  std::vector<int> remaining;
  for (int v = 0; v < n; ++v)
    if (v != mg.source() && v != mg.target()) remaining.push_back(v);

  std::vector<Factor> pool = std::move(factors);
  while (!remaining.empty()) {
    int best_var = -1;
    std::int64_t best_size = -1;
    for (const int v : remaining) {
      std::set<int> union_vars;
      for (const Factor& f : pool)
        if (std::find(f.vars.begin(), f.vars.end(), v) != f.vars.end())
          union_vars.insert(f.vars.begin(), f.vars.end());
      std::int64_t size = 1;
      for (const int u : union_vars)
        if (u != v) size = checked_mul(size, var_dims[static_cast<std::size_t>(u)]);
      if (best_var < 0 || size < best_size) {
        best_var = v;
        best_size = size;
      }
    }

    std::vector<const Factor*> involved;
    std::vector<Factor> rest;
    for (Factor& f : pool) {
      if (std::find(f.vars.begin(), f.vars.end(), best_var) != f.vars.end())
        involved.push_back(&f);
      else
        rest.push_back(std::move(f));
    }
    Factor merged = contract(involved, best_var, var_dims, options);
    rest.push_back(std::move(merged));
    pool = std::move(rest);
    remaining.erase(std::find(remaining.begin(), remaining.end(), best_var));
  }

  // Combine what is left (all over subsets of {source, target}).
  std::vector<const Factor*> finals;
  finals.reserve(pool.size());
  for (const Factor& f : pool) finals.push_back(&f);
  Factor result = contract(finals, -1, var_dims, options);

  CountMatrix out = CountMatrix::zeros(var_dims[static_cast<std::size_t>(mg.source())],
                                       var_dims[static_cast<std::size_t>(mg.target())]);
  out.row_type = mg.source_type();
  out.col_type = mg.target_type();
  out.row_ids = graph.ids_of_type(out.row_type);
  out.col_ids = graph.ids_of_type(out.col_type);
  out.provenance = mg.describe();
  // result.vars is ascending; map onto (source, target) axes.
  if (result.vars.size() == 2) {
    const bool source_first = result.vars[0] == mg.source();
    for (std::int64_t s = 0; s < out.rows; ++s)
      for (std::int64_t t = 0; t < out.cols; ++t)
        out.at(s, t) = source_first
                           ? result.data[static_cast<std::size_t>(s * out.cols + t)]
                           : result.data[static_cast<std::size_t>(t * out.rows + s)];
  } else {
    throw NumericalError("internal error: unexpected contraction result arity");
  }
  return out;
}

namespace {

// Backtracking state shared by the oracle entry points. The graph stays
// alive for the context's lifetime; adjacency_storage owns the matrices the
// constraints point into.
struct OracleContext {
  const hin::TypedGraph* graph;
  const meta::MetaGraph* mg;
  bool injective = false;
  std::vector<int> order;                             // assignment order (topological)
  std::vector<std::vector<std::int64_t>> candidates;  // global node indices per meta-node
  struct Constraint {
    int other_meta;      // endpoint assigned earlier in `order`
    bool other_is_from;  // true when the earlier endpoint is the edge's tail
    meta::MetaStep step;
    const hin::SparseAdjacency* adj;
  };
  std::vector<std::vector<Constraint>> checks;  // per meta-node
  std::vector<hin::SparseAdjacency> adjacency_storage;
};

// Multiplicity of the oriented step between two concrete nodes.
std::int64_t step_count(const hin::TypedGraph& graph, const meta::MetaStep& step,
                        const hin::SparseAdjacency& adj, std::int64_t from_node,
                        std::int64_t to_node) {
  const std::int64_t r = graph.index_in_type(step.reversed ? to_node : from_node);
  const std::int64_t c = graph.index_in_type(step.reversed ? from_node : to_node);
  return adj.at(r, c);
}

void oracle_dfs(const OracleContext& ctx, std::size_t depth,
                std::vector<std::int64_t>& assignment, std::int64_t weight,
                std::vector<std::int64_t>& row_out) {
  if (depth == ctx.order.size()) {
    const std::int64_t t = assignment[static_cast<std::size_t>(ctx.mg->target())];
    auto& cell = row_out[static_cast<std::size_t>(ctx.graph->index_in_type(t))];
    cell = checked_add(cell, weight);
    return;
  }
  const int meta = ctx.order[depth];
  for (const std::int64_t candidate : ctx.candidates[static_cast<std::size_t>(meta)]) {
    if (ctx.injective) {
      bool clash = false;
      for (std::size_t d = 0; d < depth; ++d)
        if (assignment[static_cast<std::size_t>(ctx.order[d])] == candidate) {
          clash = true;
          break;
        }
      if (clash) continue;
    }
    std::int64_t w = weight;
    for (const auto& check : ctx.checks[static_cast<std::size_t>(meta)]) {
      const std::int64_t other = assignment[static_cast<std::size_t>(check.other_meta)];
      const std::int64_t from_node = check.other_is_from ? other : candidate;
      const std::int64_t to_node = check.other_is_from ? candidate : other;
      const std::int64_t c =
          step_count(*ctx.graph, check.step, *check.adj, from_node, to_node);
      if (c == 0) {
        w = 0;
        break;
      }
      w = checked_mul(w, c);
    }
    if (w == 0) continue;
    assignment[static_cast<std::size_t>(meta)] = candidate;
    oracle_dfs(ctx, depth + 1, assignment, w, row_out);
    assignment[static_cast<std::size_t>(meta)] = -1;
  }
}

OracleContext build_oracle(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                           bool injective) {
  if (graph.node_count() > 200)
    throw InputError("enumerate_instances guard: graph has more than 200 nodes");
  OracleContext ctx;
  ctx.graph = &graph;
  ctx.mg = &mg;
  ctx.injective = injective;
  ctx.order = mg.topological_order();
  const std::size_t n = mg.nodes().size();
  ctx.candidates.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    const auto& ids = graph.ids_of_type(mg.nodes()[v].type);
    for (std::int64_t pos = 0; pos < static_cast<std::int64_t>(ids.size()); ++pos)
      ctx.candidates[v].push_back(graph.node_of_type_at(mg.nodes()[v].type, pos));
  }
  std::vector<std::size_t> rank(n);
  for (std::size_t d = 0; d < ctx.order.size(); ++d)
    rank[static_cast<std::size_t>(ctx.order[d])] = d;
  ctx.checks.resize(n);
  ctx.adjacency_storage.reserve(mg.edges().size());
  for (const auto& e : mg.edges())
    ctx.adjacency_storage.push_back(graph.adjacency(e.step.edge_label));
  // Register each meta-edge as a constraint on its later-assigned endpoint.
  std::size_t edge_index = 0;
  for (const auto& e : mg.edges()) {
    const hin::SparseAdjacency* adj = &ctx.adjacency_storage[edge_index++];
    const bool from_first =
        rank[static_cast<std::size_t>(e.from)] < rank[static_cast<std::size_t>(e.to)];
    const int later = from_first ? e.to : e.from;
    const int earlier = from_first ? e.from : e.to;
    ctx.checks[static_cast<std::size_t>(later)].push_back({earlier, from_first, e.step, adj});
  }
  return ctx;
}

}  // namespace

CountMatrix enumerate_count_matrix(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                                   bool injective) {
  OracleContext ctx = build_oracle(graph, mg, injective);
  CountMatrix out = CountMatrix::zeros(type_count(graph, mg.source_type()),
                                       type_count(graph, mg.target_type()));
  out.row_type = mg.source_type();
  out.col_type = mg.target_type();
  out.row_ids = graph.ids_of_type(out.row_type);
  out.col_ids = graph.ids_of_type(out.col_type);
  out.provenance = mg.describe() + " (enumerated)";
  std::vector<std::int64_t> assignment(mg.nodes().size(), -1);
  std::vector<std::int64_t> row(static_cast<std::size_t>(out.cols));
  for (std::int64_t s = 0; s < out.rows; ++s) {
    std::fill(row.begin(), row.end(), 0);
    // Pin the source (first in topological order) and enumerate the rest.
    ctx.candidates[static_cast<std::size_t>(mg.source())] = {
        graph.node_of_type_at(mg.source_type(), s)};
    std::fill(assignment.begin(), assignment.end(), -1);
    oracle_dfs(ctx, 0, assignment, 1, row);
    for (std::int64_t t = 0; t < out.cols; ++t) out.at(s, t) = row[static_cast<std::size_t>(t)];
  }
  return out;
}

std::int64_t enumerate_instances(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                                 const std::string& source_id, const std::string& target_id,
                                 bool injective) {
  const auto s = graph.find_node(source_id);
  const auto t = graph.find_node(target_id);
  if (!s) throw InputError("unknown source node '" + source_id + "'");
  if (!t) throw InputError("unknown target node '" + target_id + "'");
  if (graph.node(*s).type != mg.source_type())
    throw InputError("source node '" + source_id + "' does not have type " + mg.source_type());
  if (graph.node(*t).type != mg.target_type())
    throw InputError("target node '" + target_id + "' does not have type " + mg.target_type());

  OracleContext ctx = build_oracle(graph, mg, injective);
  ctx.candidates[static_cast<std::size_t>(mg.source())] = {*s};
  std::vector<std::int64_t> row(graph.ids_of_type(mg.target_type()).size(), 0);
  std::vector<std::int64_t> assignment(mg.nodes().size(), -1);
  oracle_dfs(ctx, 0, assignment, 1, row);
  return row[static_cast<std::size_t>(graph.index_in_type(*t))];
}

SimilarityMatrix pathsim(const hin::TypedGraph& graph, const meta::MetaPath& path,
                         const RelevanceOptions& options) {
  if (!path.is_symmetric())
    throw InputError("pathsim requires a symmetric meta-path, got '" +
                     path.to_string(graph.schema()) + "'");
  return normalize_counts(commuting_count(graph, path, options), "pathsim");
}

SimilarityMatrix graphsim(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                          const RelevanceOptions& options) {
  if (!meta::is_symmetric(mg))
    throw InputError("graphsim requires a symmetric meta-graph (" + mg.describe() + ")");
  return normalize_counts(struct_count(graph, mg, options), "graphsim");
}

SimilarityMatrix struct_count_matrix(const hin::TypedGraph& graph, const meta::MetaGraph& mg,
                                     const RelevanceOptions& options) {
  const CountMatrix counts = struct_count(graph, mg, options);
  SimilarityMatrix sim;
  sim.node_type = counts.row_type;
  sim.ids = counts.row_ids;
  sim.measure = "structcount";
  sim.provenance = counts.provenance;
  sim.values.resize(counts.rows, counts.cols);
  for (std::int64_t i = 0; i < counts.rows; ++i)
    for (std::int64_t j = 0; j < counts.cols; ++j)
      sim.values(i, j) = static_cast<double>(counts.at(i, j));
  return sim;
}

void write_similarity_tsv(const SimilarityMatrix& sim, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open for writing: " + path.string());
  out << "# measure\t" << sim.measure << '\n';
  out << "# provenance\t" << sim.provenance << '\n';
  out << "# node_type\t" << sim.node_type << '\n';
  const std::int64_t m = sim.values.rows();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < m; ++j)
      out << sim.ids[static_cast<std::size_t>(i)] << '\t'
          << sim.ids[static_cast<std::size_t>(j)] << '\t'
          << io::format_double(sim.values(i, j)) << '\n';
}

namespace {

std::string join_tabs(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += '\t';
    out += parts[i];
  }
  return out;
}

}  // namespace

void write_similarity_block(const SimilarityMatrix& sim, const std::filesystem::path& path) {
  io::BlockHeader header;
  header.kind = "matrix";
  header.set("measure", sim.measure);
  header.set("provenance", sim.provenance);
  header.set("node_type", sim.node_type);
  header.set("rows", std::to_string(sim.values.rows()));
  header.set("cols", std::to_string(sim.values.cols()));
  header.set("ordering", join_tabs(sim.ids));
  std::vector<double> payload(static_cast<std::size_t>(sim.values.size()));
  for (std::int64_t i = 0; i < sim.values.rows(); ++i)
    for (std::int64_t j = 0; j < sim.values.cols(); ++j)
      payload[static_cast<std::size_t>(i * sim.values.cols() + j)] = sim.values(i, j);
  io::write_block_file(path, header, payload);
}

SimilarityMatrix read_similarity_block(const std::filesystem::path& path) {
  std::vector<double> payload;
  const io::BlockHeader header = io::read_block_file(path, payload);
  if (header.kind != "matrix") throw InputError("expected a matrix block in " + path.string());
  SimilarityMatrix sim;
  sim.measure = header.require("measure");
  sim.provenance = header.require("provenance");
  sim.node_type = header.require("node_type");
  const std::int64_t rows = std::stoll(header.require("rows"));
  const std::int64_t cols = std::stoll(header.require("cols"));
  sim.ids = io::split(header.require("ordering"), '\t');
  if (static_cast<std::int64_t>(sim.ids.size()) != rows)
    throw InputError("matrix block ordering does not match rows in " + path.string());
  if (static_cast<std::int64_t>(payload.size()) != rows * cols)
    throw InputError("matrix block payload size mismatch in " + path.string());
  sim.values.resize(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j)
      sim.values(i, j) = payload[static_cast<std::size_t>(i * cols + j)];
  return sim;
}

}  // namespace hinmega::relevance
