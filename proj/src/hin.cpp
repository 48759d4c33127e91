#include "hinmega/hin.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

namespace hinmega::hin {

namespace {

using nlohmann::json;

void check_type_label(const std::string& label, const char* what) {
  if (label.empty()) throw InputError(std::string(what) + " label must be non-empty");
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Schema::Schema(std::vector<std::string> node_types, std::vector<EdgeTypeDef> edge_types)
    : node_types_(std::move(node_types)), edge_types_(std::move(edge_types)) {
  std::set<std::string> seen_nodes;
  for (const auto& t : node_types_) {
    check_type_label(t, "node type");
    if (!seen_nodes.insert(t).second)
      throw InputError("duplicate node type '" + t + "' in schema");
  }
  std::set<std::string> seen_edges;
  for (const auto& e : edge_types_) {
    check_type_label(e.label, "edge type");
    if (!seen_edges.insert(e.label).second)
      throw InputError("duplicate edge type '" + e.label + "' in schema");
    if (!seen_nodes.count(e.src_type) || !seen_nodes.count(e.dst_type))
      throw InputError("edge type '" + e.label + "' references undeclared node type");
    if (!e.directed && e.src_type != e.dst_type)
      throw InputError("undirected edge type '" + e.label +
                       "' must connect a node type to itself");
  }
}

bool Schema::has_node_type(std::string_view type) const {
  return std::find(node_types_.begin(), node_types_.end(), type) != node_types_.end();
}

int Schema::edge_type_index(std::string_view label) const {
  for (std::size_t i = 0; i < edge_types_.size(); ++i)
    if (edge_types_[i].label == label) return static_cast<int>(i);
  return -1;
}

const EdgeTypeDef* Schema::find_edge_type(std::string_view label) const {
  const int i = edge_type_index(label);
  return i < 0 ? nullptr : &edge_types_[static_cast<std::size_t>(i)];
}

Schema Schema::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("schema JSON parse error: ") + e.what());
  }
  try {
    std::vector<std::string> node_types = doc.at("node_types").get<std::vector<std::string>>();
    std::vector<EdgeTypeDef> edge_types;
    for (const auto& e : doc.at("edge_types")) {
      EdgeTypeDef def;
      def.label = e.at("label").get<std::string>();
      def.src_type = e.at("src").get<std::string>();
      def.dst_type = e.at("dst").get<std::string>();
      def.directed = e.value("directed", true);
      edge_types.push_back(std::move(def));
    }
    return Schema(std::move(node_types), std::move(edge_types));
  } catch (const json::exception& e) {
    throw InputError(std::string("schema JSON structure error: ") + e.what());
  }
}

Schema Schema::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open schema file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string Schema::to_json() const {
  json doc;
  doc["node_types"] = node_types_;
  doc["edge_types"] = json::array();
  for (const auto& e : edge_types_) {
    doc["edge_types"].push_back(
        {{"label", e.label}, {"src", e.src_type}, {"dst", e.dst_type}, {"directed", e.directed}});
  }
  return doc.dump(2) + "\n";
}

std::int64_t SparseAdjacency::at(std::int64_t row, std::int64_t col) const {
  const Entry probe{row, col, 0};
  auto it = std::lower_bound(entries.begin(), entries.end(), probe,
                             [](const Entry& a, const Entry& b) {
                               return a.row != b.row ? a.row < b.row : a.col < b.col;
                             });
  if (it != entries.end() && it->row == row && it->col == col) return it->count;
  return 0;
}

TypedGraph::TypedGraph(Schema schema, std::vector<NodeRecord> nodes,
                       std::vector<EdgeRecord> edges)
    : schema_(std::move(schema)), nodes_(std::move(nodes)) {
  for (std::int64_t i = 0; i < node_count(); ++i) {
    const NodeRecord& n = nodes_[static_cast<std::size_t>(i)];
    if (n.id.empty()) throw InputError("empty node id");
    if (!schema_.has_node_type(n.type))
      throw InputError("node '" + n.id + "' has undeclared type '" + n.type + "'");
    if (!id_index_.emplace(n.id, i).second)
      throw InputError("duplicate node id '" + n.id + "'");
    by_type_[n.type].push_back(i);
  }
  for (const auto& t : schema_.node_types()) by_type_[t];  // ensure all types present
  index_in_type_.resize(nodes_.size());
  for (auto& [type, members] : by_type_) {
    std::sort(members.begin(), members.end(), [&](std::int64_t a, std::int64_t b) {
      return nodes_[static_cast<std::size_t>(a)].id < nodes_[static_cast<std::size_t>(b)].id;
    });
    for (std::size_t pos = 0; pos < members.size(); ++pos)
      index_in_type_[static_cast<std::size_t>(members[pos])] = static_cast<std::int64_t>(pos);
    auto& ids = ids_by_type_[type];
    ids.reserve(members.size());
    for (const std::int64_t n : members) ids.push_back(nodes_[static_cast<std::size_t>(n)].id);
  }

  edges_.reserve(edges.size());
  for (const auto& e : edges) {
    const int et = schema_.edge_type_index(e.edge_type);
    if (et < 0) throw InputError("edge references undeclared edge type '" + e.edge_type + "'");
    const auto src = id_index_.find(e.src);
    const auto dst = id_index_.find(e.dst);
    if (src == id_index_.end())
      throw InputError("edge endpoint '" + e.src + "' is not a declared node");
    if (dst == id_index_.end())
      throw InputError("edge endpoint '" + e.dst + "' is not a declared node");
    const EdgeTypeDef& def = schema_.edge_type(et);
    const std::string& st = nodes_[static_cast<std::size_t>(src->second)].type;
    const std::string& dt = nodes_[static_cast<std::size_t>(dst->second)].type;
    if (st != def.src_type || dt != def.dst_type)
      throw InputError("edge (" + e.src + ", " + e.dst + ") violates endpoint types of '" +
                       e.edge_type + "' (expected " + def.src_type + " -> " + def.dst_type +
                       ", got " + st + " -> " + dt + ")");
    edges_.push_back(StoredEdge{src->second, dst->second, et});
  }

  // Aggregate per-edge-type counting adjacency, stored as loaded (no
  // symmetric expansion yet).
  adjacency_.resize(schema_.edge_types().size());
  std::vector<std::vector<SparseAdjacency::Entry>> buckets(schema_.edge_types().size());
  for (const StoredEdge& e : edges_) {
    buckets[static_cast<std::size_t>(e.edge_type)].push_back(
        {index_in_type_[static_cast<std::size_t>(e.src)],
         index_in_type_[static_cast<std::size_t>(e.dst)], 1});
  }
  for (std::size_t et = 0; et < buckets.size(); ++et) {
    auto& entries = buckets[et];
    std::sort(entries.begin(), entries.end(),
              [](const SparseAdjacency::Entry& a, const SparseAdjacency::Entry& b) {
                return a.row != b.row ? a.row < b.row : a.col < b.col;
              });
    SparseAdjacency adj;
    const EdgeTypeDef& def = schema_.edge_type(static_cast<int>(et));
    adj.rows = static_cast<std::int64_t>(by_type_.at(def.src_type).size());
    adj.cols = static_cast<std::int64_t>(by_type_.at(def.dst_type).size());
    for (const auto& e : entries) {
      if (!adj.entries.empty() && adj.entries.back().row == e.row &&
          adj.entries.back().col == e.col) {
        adj.entries.back().count = checked_add(adj.entries.back().count, 1);
      } else {
        adj.entries.push_back(e);
      }
    }
    adjacency_[et] = std::move(adj);
  }
}

std::optional<std::int64_t> TypedGraph::find_node(std::string_view id) const {
  auto it = id_index_.find(id);
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::string>& TypedGraph::ids_of_type(std::string_view type) const {
  auto it = ids_by_type_.find(type);
  if (it == ids_by_type_.end())
    throw InputError("unknown node type '" + std::string(type) + "'");
  return it->second;
}

std::int64_t TypedGraph::index_in_type(std::int64_t node_index) const {
  return index_in_type_.at(static_cast<std::size_t>(node_index));
}

std::int64_t TypedGraph::node_of_type_at(std::string_view type, std::int64_t pos) const {
  auto it = by_type_.find(type);
  if (it == by_type_.end()) throw InputError("unknown node type '" + std::string(type) + "'");
  return it->second.at(static_cast<std::size_t>(pos));
}

SparseAdjacency TypedGraph::adjacency(std::string_view edge_type) const {
  const int et = schema_.edge_type_index(edge_type);
  if (et < 0) throw InputError("unknown edge type '" + std::string(edge_type) + "'");
  const SparseAdjacency& stored = adjacency_[static_cast<std::size_t>(et)];
  if (schema_.edge_type(et).directed) return stored;

  // Undirected: stored once, expanded symmetrically on extraction.
  SparseAdjacency out;
  out.rows = stored.rows;
  out.cols = stored.cols;
  std::vector<SparseAdjacency::Entry> entries;
  entries.reserve(stored.entries.size() * 2);
  for (const auto& e : stored.entries) {
    entries.push_back(e);
    if (e.row != e.col) entries.push_back({e.col, e.row, e.count});
  }
  std::sort(entries.begin(), entries.end(),
            [](const SparseAdjacency::Entry& a, const SparseAdjacency::Entry& b) {
              return a.row != b.row ? a.row < b.row : a.col < b.col;
            });
  for (const auto& e : entries) {
    if (!out.entries.empty() && out.entries.back().row == e.row &&
        out.entries.back().col == e.col) {
      out.entries.back().count = checked_add(out.entries.back().count, e.count);
    } else {
      out.entries.push_back(e);
    }
  }
  return out;
}

DegreeStats TypedGraph::degree_stats() const {
  DegreeStats stats;
  stats.node_count = node_count();
  stats.edge_count = edge_count();
  stats.avg_degree = stats.node_count > 0
                         ? 2.0 * static_cast<double>(stats.edge_count) /
                               static_cast<double>(stats.node_count)
                         : 0.0;
  std::map<std::string, std::int64_t> endpoints;
  for (const auto& [type, members] : by_type_) {
    stats.nodes_per_type[type] = static_cast<std::int64_t>(members.size());
    endpoints[type] = 0;
  }
  for (const StoredEdge& e : edges_) {
    endpoints[nodes_[static_cast<std::size_t>(e.src)].type] += 1;
    endpoints[nodes_[static_cast<std::size_t>(e.dst)].type] += 1;
  }
  for (const auto& [type, touch] : endpoints) {
    const std::int64_t n = stats.nodes_per_type[type];
    stats.avg_degree_per_type[type] =
        n > 0 ? static_cast<double>(touch) / static_cast<double>(n) : 0.0;
  }
  return stats;
}

void TypedGraph::save(const std::filesystem::path& nodes_path,
                      const std::filesystem::path& edges_path) const {
  std::ofstream nout(nodes_path);
  if (!nout) throw InputError("cannot open for writing: " + nodes_path.string());
  for (const auto& [type, members] : by_type_) {
    for (const std::int64_t n : members) {
      const NodeRecord& rec = nodes_[static_cast<std::size_t>(n)];
      nout << rec.id << '\t' << rec.type;
      if (!rec.label.empty()) nout << '\t' << rec.label;
      nout << '\n';
    }
  }

  std::vector<StoredEdge> sorted = edges_;
  std::sort(sorted.begin(), sorted.end(), [&](const StoredEdge& a, const StoredEdge& b) {
    if (a.edge_type != b.edge_type) return a.edge_type < b.edge_type;
    const std::string& as = nodes_[static_cast<std::size_t>(a.src)].id;
    const std::string& bs = nodes_[static_cast<std::size_t>(b.src)].id;
    if (as != bs) return as < bs;
    return nodes_[static_cast<std::size_t>(a.dst)].id < nodes_[static_cast<std::size_t>(b.dst)].id;
  });
  std::ofstream eout(edges_path);
  if (!eout) throw InputError("cannot open for writing: " + edges_path.string());
  for (const StoredEdge& e : sorted) {
    eout << nodes_[static_cast<std::size_t>(e.src)].id << '\t'
         << nodes_[static_cast<std::size_t>(e.dst)].id << '\t'
         << schema_.edge_type(e.edge_type).label << '\n';
  }
}

TypedGraph load_graph(const std::filesystem::path& nodes_path,
                      const std::filesystem::path& edges_path, const Schema& schema) {
  std::ifstream nin(nodes_path);
  if (!nin) throw InputError("cannot open nodes file: " + nodes_path.string());
  std::vector<NodeRecord> nodes;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(nin, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty())
      throw InputError(nodes_path.string() + ":" + std::to_string(lineno) +
                       ": expected node_id<TAB>type[<TAB>label]");
    NodeRecord rec;
    rec.id = fields[0];
    rec.type = fields[1];
    if (fields.size() == 3) rec.label = fields[2];
    nodes.push_back(std::move(rec));
  }

  std::ifstream ein(edges_path);
  if (!ein) throw InputError("cannot open edges file: " + edges_path.string());
  std::vector<EdgeRecord> edges;
  lineno = 0;
  while (std::getline(ein, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty())
      throw InputError(edges_path.string() + ":" + std::to_string(lineno) +
                       ": expected src_id<TAB>dst_id<TAB>edge_type");
    edges.push_back(EdgeRecord{fields[0], fields[1], fields[2]});
  }

  return TypedGraph(schema, std::move(nodes), std::move(edges));
}

std::map<std::string, std::string> load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open labels file: " + path.string());
  std::map<std::string, std::string> labels;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2 || fields[0].empty())
      throw InputError(path.string() + ":" + std::to_string(lineno) +
                       ": expected node_id<TAB>label");
    labels[fields[0]] = fields[1];
  }
  return labels;
}

}  // namespace hinmega::hin
