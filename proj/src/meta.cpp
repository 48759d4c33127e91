#include "hinmega/meta.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <queue>
#include <set>
#include <sstream>
#include <tuple>

namespace hinmega::meta {

namespace {

using nlohmann::json;

// All (label, orientation) steps that can connect from_type -> to_type.
// Same-typed directed relations are offered forward only; a reversed walk
// must be requested explicitly with `~`.
std::vector<MetaStep> step_candidates(const hin::Schema& schema,
                                      const std::string& from_type,
                                      const std::string& to_type) {
  std::vector<MetaStep> out;
  for (const auto& et : schema.edge_types()) {
    if (!et.directed) {
      if (et.src_type == from_type && et.dst_type == to_type)
        out.push_back({et.label, false, true});
    } else if (et.src_type == from_type && et.dst_type == to_type) {
      out.push_back({et.label, false, false});
    } else if (et.src_type == to_type && et.dst_type == from_type) {
      out.push_back({et.label, true, false});
    }
  }
  return out;
}

// Resolve an explicitly labelled step, inferring orientation from the
// endpoint types. reversed_requested comes from a `~` annotation.
MetaStep resolve_step(const hin::Schema& schema, const std::string& from_type,
                      const std::string& to_type, const std::string& label,
                      bool reversed_requested) {
  const hin::EdgeTypeDef* def = schema.find_edge_type(label);
  if (def == nullptr) throw InputError("unknown edge type '" + label + "'");
  if (!def->directed) {
    if (reversed_requested)
      throw InputError("edge type '" + label + "' is undirected; '~' not applicable");
    if (def->src_type != from_type || def->dst_type != to_type)
      throw InputError("edge type '" + label + "' does not connect " + from_type +
                       " to " + to_type);
    return {label, false, true};
  }
  const bool forward_ok = def->src_type == from_type && def->dst_type == to_type;
  const bool backward_ok = def->src_type == to_type && def->dst_type == from_type;
  if (reversed_requested) {
    if (!backward_ok)
      throw InputError("edge type '" + label + "' cannot be walked backwards from " +
                       from_type + " to " + to_type);
    return {label, true, false};
  }
  if (forward_ok) return {label, false, false};
  if (backward_ok) return {label, true, false};
  throw InputError("edge type '" + label + "' does not connect " + from_type + " to " +
                   to_type);
}

MetaStep flipped(const MetaStep& s) {
  return {s.edge_label, s.undirected ? s.reversed : !s.reversed, s.undirected};
}

}  // namespace

bool MetaPath::is_symmetric() const {
  const std::size_t n = node_types.size();
  for (std::size_t i = 0; i < n; ++i)
    if (node_types[i] != node_types[n - 1 - i]) return false;
  const std::size_t L = steps.size();
  for (std::size_t i = 0; i < L; ++i)
    if (steps[i] != flipped(steps[L - 1 - i])) return false;
  return true;
}

std::string MetaPath::to_string(const hin::Schema& schema) const {
  std::string out = node_types.front();
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto candidates = step_candidates(schema, node_types[i], node_types[i + 1]);
    const bool inferable = candidates.size() == 1 && candidates.front() == steps[i];
    if (!inferable) {
      out += "-[" + steps[i].edge_label;
      if (steps[i].reversed && node_types[i] == node_types[i + 1]) out += '~';
      out += ']';
    }
    out += '-';
    out += node_types[i + 1];
  }
  return out;
}

MetaPath parse_meta_path(const std::string& text, const hin::Schema& schema) {
  std::vector<std::string> tokens;
  {
    std::size_t start = 0;
    while (true) {
      const std::size_t pos = text.find('-', start);
      if (pos == std::string::npos) {
        tokens.push_back(text.substr(start));
        break;
      }
      tokens.push_back(text.substr(start, pos - start));
      start = pos + 1;
    }
  }

  MetaPath path;
  std::string pending_label;
  bool pending_reversed = false;
  bool have_pending = false;
  for (const std::string& token : tokens) {
    if (token.empty()) throw InputError("meta-path syntax error in '" + text + "'");
    if (token.front() == '[') {
      if (token.back() != ']' || token.size() < 3 || have_pending || path.node_types.empty())
        throw InputError("meta-path syntax error in '" + text + "'");
      pending_label = token.substr(1, token.size() - 2);
      pending_reversed = false;
      if (!pending_label.empty() && pending_label.back() == '~') {
        pending_reversed = true;
        pending_label.pop_back();
      }
      have_pending = true;
      continue;
    }
    if (!schema.has_node_type(token))
      throw InputError("unknown node type '" + token + "' in meta-path '" + text + "'");
    if (path.node_types.empty()) {
      path.node_types.push_back(token);
      continue;
    }
    const std::string& from = path.node_types.back();
    if (have_pending) {
      path.steps.push_back(resolve_step(schema, from, token, pending_label, pending_reversed));
      have_pending = false;
    } else {
      const auto candidates = step_candidates(schema, from, token);
      if (candidates.empty())
        throw InputError("no edge type connects " + from + " to " + token +
                         " in meta-path '" + text + "'");
      if (candidates.size() > 1)
        throw InputError("ambiguous edge between " + from + " and " + token +
                         " in meta-path '" + text + "'; annotate as " + from + "-[label]-" +
                         token);
      path.steps.push_back(candidates.front());
    }
    path.node_types.push_back(token);
  }
  if (have_pending) throw InputError("dangling edge annotation in '" + text + "'");
  if (path.node_types.size() < 2)
    throw InputError("meta-path must have length >= 1: '" + text + "'");
  return path;
}

MetaGraph::MetaGraph(std::vector<MetaNode> nodes, std::vector<MetaEdge> edges, int source,
                     int target, const hin::Schema& schema)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), source_(source), target_(target) {
  const int n = static_cast<int>(nodes_.size());
  if (n < 2) throw InputError("meta-graph needs at least two meta-nodes");
  if (edges_.empty()) throw InputError("meta-graph needs at least one edge");
  std::set<std::string> ids;
  for (const auto& node : nodes_) {
    if (node.id.empty()) throw InputError("empty meta-node id");
    if (!ids.insert(node.id).second)
      throw InputError("duplicate meta-node id '" + node.id + "'");
    if (!schema.has_node_type(node.type))
      throw InputError("meta-node '" + node.id + "' has undeclared type '" + node.type + "'");
  }
  if (source_ < 0 || source_ >= n || target_ < 0 || target_ >= n)
    throw InputError("meta-graph source/target out of range");
  if (source_ == target_) throw InputError("meta-graph source and target must differ");

  std::set<std::tuple<int, int, std::string, bool>> seen;
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  std::vector<int> outdeg(static_cast<std::size_t>(n), 0);
  for (auto& e : edges_) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n || e.from == e.to)
      throw InputError("meta-edge endpoint out of range");
    // Normalize orientation flags against the schema.
    e.step = resolve_step(schema, nodes_[static_cast<std::size_t>(e.from)].type,
                          nodes_[static_cast<std::size_t>(e.to)].type, e.step.edge_label,
                          e.step.reversed &&
                              nodes_[static_cast<std::size_t>(e.from)].type ==
                                  nodes_[static_cast<std::size_t>(e.to)].type);
    if (!seen.insert({e.from, e.to, e.step.edge_label, e.step.reversed}).second)
      throw InputError("duplicate meta-edge between '" +
                       nodes_[static_cast<std::size_t>(e.from)].id + "' and '" +
                       nodes_[static_cast<std::size_t>(e.to)].id + "'");
    indeg[static_cast<std::size_t>(e.to)]++;
    outdeg[static_cast<std::size_t>(e.from)]++;
  }

  for (int v = 0; v < n; ++v) {
    if (indeg[static_cast<std::size_t>(v)] == 0 && v != source_)
      throw InputError("meta-node '" + nodes_[static_cast<std::size_t>(v)].id +
                       "' has in-degree 0 but is not the source");
    if (outdeg[static_cast<std::size_t>(v)] == 0 && v != target_)
      throw InputError("meta-node '" + nodes_[static_cast<std::size_t>(v)].id +
                       "' has out-degree 0 but is not the target");
  }
  if (indeg[static_cast<std::size_t>(source_)] != 0)
    throw InputError("declared source has incoming edges");
  if (outdeg[static_cast<std::size_t>(target_)] != 0)
    throw InputError("declared target has outgoing edges");

  // Cycle check (Kahn).
  {
    std::vector<int> deg = indeg;
    std::vector<int> ready;
    for (int v = 0; v < n; ++v)
      if (deg[static_cast<std::size_t>(v)] == 0) ready.push_back(v);
    int emitted = 0;
    while (!ready.empty()) {
      const int v = ready.back();
      ready.pop_back();
      ++emitted;
      for (const auto& e : edges_)
        if (e.from == v && --deg[static_cast<std::size_t>(e.to)] == 0) ready.push_back(e.to);
    }
    if (emitted != n) throw InputError("meta-graph contains a cycle");
  }

  // Every meta-node must lie on some source->target path.
  const auto reach = [&](int start, bool forward) {
    std::vector<char> seen_nodes(static_cast<std::size_t>(n), 0);
    std::vector<int> stack{start};
    seen_nodes[static_cast<std::size_t>(start)] = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (const auto& e : edges_) {
        const int next = forward ? (e.from == v ? e.to : -1) : (e.to == v ? e.from : -1);
        if (next >= 0 && !seen_nodes[static_cast<std::size_t>(next)]) {
          seen_nodes[static_cast<std::size_t>(next)] = 1;
          stack.push_back(next);
        }
      }
    }
    return seen_nodes;
  };
  const auto from_source = reach(source_, true);
  const auto to_target = reach(target_, false);
  for (int v = 0; v < n; ++v) {
    if (!from_source[static_cast<std::size_t>(v)] || !to_target[static_cast<std::size_t>(v)])
      throw InputError("meta-node '" + nodes_[static_cast<std::size_t>(v)].id +
                       "' lies on no source->target path");
  }
}

MetaGraph MetaGraph::from_json(const std::string& text, const hin::Schema& schema) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("meta-graph JSON parse error: ") + e.what());
  }
  try {
    std::vector<MetaNode> nodes;
    std::map<std::string, int> index;
    for (const auto& n : doc.at("nodes")) {
      MetaNode node{n.at("id").get<std::string>(), n.at("type").get<std::string>()};
      index.emplace(node.id, static_cast<int>(nodes.size()));
      nodes.push_back(std::move(node));
    }
    const auto lookup = [&](const std::string& id) {
      auto it = index.find(id);
      if (it == index.end())
        throw InputError("meta-graph references unknown meta-node '" + id + "'");
      return it->second;
    };
    std::vector<MetaEdge> edges;
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || e.size() < 3)
        throw InputError("meta-graph edge must be [from, to, label]");
      MetaEdge edge;
      edge.from = lookup(e.at(0).get<std::string>());
      edge.to = lookup(e.at(1).get<std::string>());
      edge.step.edge_label = e.at(2).get<std::string>();
      if (e.size() > 3) edge.step.reversed = e.at(3).get<bool>();
      edges.push_back(std::move(edge));
    }
    const int source = lookup(doc.at("source").get<std::string>());
    const int target = lookup(doc.at("target").get<std::string>());
    return MetaGraph(std::move(nodes), std::move(edges), source, target, schema);
  } catch (const json::exception& e) {
    throw InputError(std::string("meta-graph JSON structure error: ") + e.what());
  }
}

MetaGraph MetaGraph::from_json_file(const std::filesystem::path& path,
                                    const hin::Schema& schema) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open meta-graph file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str(), schema);
}

std::string MetaGraph::to_json() const {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& n : nodes_) doc["nodes"].push_back({{"id", n.id}, {"type", n.type}});
  doc["edges"] = json::array();
  for (const auto& e : edges_) {
    json edge = json::array({nodes_[static_cast<std::size_t>(e.from)].id,
                             nodes_[static_cast<std::size_t>(e.to)].id, e.step.edge_label});
    if (e.step.reversed && nodes_[static_cast<std::size_t>(e.from)].type ==
                               nodes_[static_cast<std::size_t>(e.to)].type)
      edge.push_back(true);
    doc["edges"].push_back(edge);
  }
  doc["source"] = nodes_[static_cast<std::size_t>(source_)].id;
  doc["target"] = nodes_[static_cast<std::size_t>(target_)].id;
  return doc.dump(2) + "\n";
}

std::vector<int> MetaGraph::topological_order() const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> indeg(static_cast<std::size_t>(n), 0);
  for (const auto& e : edges_) indeg[static_cast<std::size_t>(e.to)]++;
  // Smallest meta-node id first keeps the order deterministic.
  const auto cmp = [&](int a, int b) {
    return nodes_[static_cast<std::size_t>(a)].id > nodes_[static_cast<std::size_t>(b)].id;
  };
  std::priority_queue<int, std::vector<int>, decltype(cmp)> ready(cmp);
  for (int v = 0; v < n; ++v)
    if (indeg[static_cast<std::size_t>(v)] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(n));
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    order.push_back(v);
    for (const auto& e : edges_)
      if (e.from == v && --indeg[static_cast<std::size_t>(e.to)] == 0) ready.push(e.to);
  }
  return order;
}

std::string MetaGraph::describe() const {
  std::ostringstream out;
  out << "metagraph(" << nodes_[static_cast<std::size_t>(source_)].id << "->"
      << nodes_[static_cast<std::size_t>(target_)].id << "," << nodes_.size() << "n,"
      << edges_.size() << "e)";
  return out.str();
}

MetaGraph chain_meta_graph(const MetaPath& path, const hin::Schema& schema) {
  std::vector<MetaNode> nodes;
  for (std::size_t i = 0; i < path.node_types.size(); ++i)
    nodes.push_back({"n" + std::to_string(i), path.node_types[i]});
  std::vector<MetaEdge> edges;
  for (std::size_t i = 0; i < path.steps.size(); ++i)
    edges.push_back({static_cast<int>(i), static_cast<int>(i + 1), path.steps[i]});
  return MetaGraph(std::move(nodes), std::move(edges), 0,
                   static_cast<int>(path.node_types.size()) - 1, schema);
}

std::vector<MetaPath> embedded_meta_paths(const MetaGraph& mg) {
  // Outgoing edge lists sorted by (neighbor id, label, orientation): the DFS
  // then emits paths in lexicographic meta-node-id-sequence order.
  std::vector<std::vector<const MetaEdge*>> out(mg.nodes().size());
  for (const auto& e : mg.edges()) out[static_cast<std::size_t>(e.from)].push_back(&e);
  for (auto& lst : out) {
    std::sort(lst.begin(), lst.end(), [&](const MetaEdge* a, const MetaEdge* b) {
      const std::string& na = mg.nodes()[static_cast<std::size_t>(a->to)].id;
      const std::string& nb = mg.nodes()[static_cast<std::size_t>(b->to)].id;
      if (na != nb) return na < nb;
      if (a->step.edge_label != b->step.edge_label) return a->step.edge_label < b->step.edge_label;
      return a->step.reversed < b->step.reversed;
    });
  }

  std::vector<MetaPath> paths;
  MetaPath current;
  current.node_types.push_back(mg.source_type());
  const auto dfs = [&](auto&& self, int v) -> void {
    if (v == mg.target()) {
      paths.push_back(current);
      return;
    }
    for (const MetaEdge* e : out[static_cast<std::size_t>(v)]) {
      current.node_types.push_back(mg.nodes()[static_cast<std::size_t>(e->to)].type);
      current.steps.push_back(e->step);
      self(self, e->to);
      current.node_types.pop_back();
      current.steps.pop_back();
    }
  };
  dfs(dfs, mg.source());
  return paths;
}

std::vector<MetaPath> dedupe_paths(std::vector<MetaPath> paths) {
  std::vector<MetaPath> out;
  for (auto& p : paths) {
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(std::move(p));
  }
  return out;
}

bool is_symmetric(const MetaGraph& mg) {
  const int n = static_cast<int>(mg.nodes().size());
  std::set<std::tuple<int, int, std::string, bool>> edge_set;
  for (const auto& e : mg.edges())
    edge_set.insert({e.from, e.to, e.step.edge_label, e.step.reversed});

  // Search for a bijection phi with phi(source)=target that maps every edge
  // (u,v,l,o) onto a present edge (phi(v),phi(u),l,flip(o)).
  std::vector<int> phi(static_cast<std::size_t>(n), -1);
  std::vector<char> used(static_cast<std::size_t>(n), 0);

  const auto compatible = [&](int v) {
    for (const auto& e : mg.edges()) {
      if (phi[static_cast<std::size_t>(e.from)] < 0 || phi[static_cast<std::size_t>(e.to)] < 0)
        continue;
      if (e.from != v && e.to != v) continue;
      const MetaStep f = flipped(e.step);
      if (!edge_set.count({phi[static_cast<std::size_t>(e.to)],
                           phi[static_cast<std::size_t>(e.from)], f.edge_label, f.reversed}))
        return false;
    }
    return true;
  };

  const auto assign = [&](auto&& self, int v) -> bool {
    if (v == n) return true;
    if (phi[static_cast<std::size_t>(v)] >= 0) return self(self, v + 1);
    for (int w = 0; w < n; ++w) {
      if (used[static_cast<std::size_t>(w)]) continue;
      if (mg.nodes()[static_cast<std::size_t>(v)].type !=
          mg.nodes()[static_cast<std::size_t>(w)].type)
        continue;
      phi[static_cast<std::size_t>(v)] = w;
      used[static_cast<std::size_t>(w)] = 1;
      if (compatible(v) && self(self, v + 1)) return true;
      phi[static_cast<std::size_t>(v)] = -1;
      used[static_cast<std::size_t>(w)] = 0;
    }
    return false;
  };

  if (mg.nodes()[static_cast<std::size_t>(mg.source())].type !=
      mg.nodes()[static_cast<std::size_t>(mg.target())].type)
    return false;
  // phi is forced on the terminals: the unique in-degree-0 node of the
  // reversal is the original target, and vice versa.
  phi[static_cast<std::size_t>(mg.source())] = mg.target();
  used[static_cast<std::size_t>(mg.target())] = 1;
  phi[static_cast<std::size_t>(mg.target())] = mg.source();
  used[static_cast<std::size_t>(mg.source())] = 1;
  if (!compatible(mg.source()) || !compatible(mg.target())) return false;
  return assign(assign, 0);
}

}  // namespace hinmega::meta
