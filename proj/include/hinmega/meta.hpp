#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "hinmega/hin.hpp"

namespace hinmega::meta {

// One traversal step along an edge type. `reversed` means the step walks the
// declared relation backwards (the transposed adjacency); it is always false
// for undirected edge types.
struct MetaStep {
  std::string edge_label;
  bool reversed = false;
  bool undirected = false;

  bool operator==(const MetaStep&) const = default;
};

// A chain of node types connected by edge-type steps, e.g. A-P-V-P-A.
struct MetaPath {
  std::vector<std::string> node_types;  // length L+1
  std::vector<MetaStep> steps;          // length L

  std::int64_t length() const { return static_cast<std::int64_t>(steps.size()); }
  const std::string& source_type() const { return node_types.front(); }
  const std::string& target_type() const { return node_types.back(); }

  // True iff the reversed step sequence equals the original.
  bool is_symmetric() const;

  // Textual form re-parseable by parse_meta_path. Edge annotations are
  // emitted only where type-based inference would be ambiguous.
  std::string to_string(const hin::Schema& schema) const;

  bool operator==(const MetaPath&) const = default;
};

// `A-P-V-P-A`, or `A-[writes]-P` where the edge label between two types is
// not unique. A trailing `~` inside an annotation (`P-[cites~]-P`) walks a
// same-typed directed relation backwards.
MetaPath parse_meta_path(const std::string& text, const hin::Schema& schema);

// Single-source single-target DAG over node types.
struct MetaNode {
  std::string id;
  std::string type;
};

struct MetaEdge {
  int from = 0;  // indices into MetaGraph::nodes
  int to = 0;
  MetaStep step;
};

class MetaGraph {
 public:
  // Validates all structural invariants: DAG, unique source (in-degree 0)
  // and target (out-degree 0), every node on a source->target path, edges
  // schema-valid.
  MetaGraph(std::vector<MetaNode> nodes, std::vector<MetaEdge> edges, int source,
            int target, const hin::Schema& schema);

  static MetaGraph from_json(const std::string& text, const hin::Schema& schema);
  static MetaGraph from_json_file(const std::filesystem::path& path,
                                  const hin::Schema& schema);
  std::string to_json() const;

  const std::vector<MetaNode>& nodes() const { return nodes_; }
  const std::vector<MetaEdge>& edges() const { return edges_; }
  int source() const { return source_; }
  int target() const { return target_; }
  const std::string& source_type() const { return nodes_[static_cast<std::size_t>(source_)].type; }
  const std::string& target_type() const { return nodes_[static_cast<std::size_t>(target_)].type; }

  // Meta-node indices in a deterministic topological order (source first).
  std::vector<int> topological_order() const;

  // Short provenance string, e.g. "S(a1->a2; 5 nodes)".
  std::string describe() const;

 private:
  std::vector<MetaNode> nodes_;
  std::vector<MetaEdge> edges_;
  int source_ = 0;
  int target_ = 0;
};

// Degenerate chain meta-graph equivalent to a meta-path.
MetaGraph chain_meta_graph(const MetaPath& path, const hin::Schema& schema);

// All distinct source->target directed paths through the DAG, each converted
// to a MetaPath, ordered lexicographically by meta-node id sequence. Paths
// identical as type sequences but distinct as meta-node (or meta-edge)
// sequences are kept distinct.
std::vector<MetaPath> embedded_meta_paths(const MetaGraph& mg);

// Collapse embedded paths that are identical as (type, step) sequences.
std::vector<MetaPath> dedupe_paths(std::vector<MetaPath> paths);

// True iff the DAG equals its own reversal under some isomorphism that swaps
// source/target and preserves node types and oriented edge labels.
bool is_symmetric(const MetaGraph& mg);

}  // namespace hinmega::meta
