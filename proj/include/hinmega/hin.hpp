#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hinmega/common.hpp"

namespace hinmega::hin {

struct EdgeTypeDef {
  std::string label;
  std::string src_type;
  std::string dst_type;
  bool directed = true;
};

// Declares the node and edge types a graph may contain. Immutable once built.
class Schema {
 public:
  Schema(std::vector<std::string> node_types, std::vector<EdgeTypeDef> edge_types);

  static Schema from_json(const std::string& text);
  static Schema from_json_file(const std::filesystem::path& path);
  std::string to_json() const;

  const std::vector<std::string>& node_types() const { return node_types_; }
  const std::vector<EdgeTypeDef>& edge_types() const { return edge_types_; }

  bool has_node_type(std::string_view type) const;
  int edge_type_index(std::string_view label) const;  // -1 if unknown
  const EdgeTypeDef& edge_type(int index) const { return edge_types_.at(index); }
  const EdgeTypeDef* find_edge_type(std::string_view label) const;

 private:
  std::vector<std::string> node_types_;
  std::vector<EdgeTypeDef> edge_types_;
};

struct NodeRecord {
  std::string id;
  std::string type;
  std::string label;  // class label; empty = unlabeled
};

struct EdgeRecord {
  std::string src;
  std::string dst;
  std::string edge_type;
};

// Counting adjacency: entry count = multiplicity of parallel edges.
struct SparseAdjacency {
  struct Entry {
    std::int64_t row;
    std::int64_t col;
    std::int64_t count;
  };
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<Entry> entries;  // sorted by (row, col), unique, counts >= 1

  std::int64_t at(std::int64_t row, std::int64_t col) const;
};

struct DegreeStats {
  std::int64_t node_count = 0;
  std::int64_t edge_count = 0;
  double avg_degree = 0.0;  // 2|E|/|V|, undirected interpretation
  std::map<std::string, std::int64_t> nodes_per_type;
  std::map<std::string, double> avg_degree_per_type;
};

// Multi-typed node/edge store. Nodes of each type are kept in canonical
// order (lexicographic node_id); all downstream matrices and tensors index
// by that order. Immutable after construction, safe to share across threads.
class TypedGraph {
 public:
  TypedGraph(Schema schema, std::vector<NodeRecord> nodes,
             std::vector<EdgeRecord> edges);

  const Schema& schema() const { return schema_; }
  std::int64_t node_count() const { return static_cast<std::int64_t>(nodes_.size()); }
  std::int64_t edge_count() const { return static_cast<std::int64_t>(edges_.size()); }

  const NodeRecord& node(std::int64_t index) const { return nodes_.at(index); }
  std::optional<std::int64_t> find_node(std::string_view id) const;

  // Canonically ordered node ids of one type (the matrix/tensor row order).
  const std::vector<std::string>& ids_of_type(std::string_view type) const;
  // Global node index -> position within its type's canonical order.
  std::int64_t index_in_type(std::int64_t node_index) const;
  // Position within a type's canonical order -> global node index.
  std::int64_t node_of_type_at(std::string_view type, std::int64_t pos) const;

  struct StoredEdge {
    std::int64_t src;  // global node index
    std::int64_t dst;
    int edge_type;     // index into schema().edge_types()
  };
  const std::vector<StoredEdge>& edges() const { return edges_; }

  // |src type| x |dst type| matrix in canonical ordering. Undirected types
  // are stored once and expanded symmetrically here.
  SparseAdjacency adjacency(std::string_view edge_type) const;

  DegreeStats degree_stats() const;

  // Canonical serialization; reloading yields identical ordering/adjacency.
  void save(const std::filesystem::path& nodes_path,
            const std::filesystem::path& edges_path) const;

 private:
  Schema schema_;
  std::vector<NodeRecord> nodes_;              // arbitrary stable order
  std::vector<StoredEdge> edges_;
  std::map<std::string, std::vector<std::int64_t>, std::less<>> by_type_;  // sorted by id
  std::map<std::string, std::vector<std::string>, std::less<>> ids_by_type_;
  std::map<std::string, std::int64_t, std::less<>> id_index_;
  std::vector<std::int64_t> index_in_type_;
  std::vector<SparseAdjacency> adjacency_;     // per edge type, as stored
};

// File ingestion per the TSV formats described in the README.
TypedGraph load_graph(const std::filesystem::path& nodes_path,
                      const std::filesystem::path& edges_path,
                      const Schema& schema);

// node_id -> class label map from a labels TSV.
std::map<std::string, std::string> load_labels(const std::filesystem::path& path);

}  // namespace hinmega::hin
