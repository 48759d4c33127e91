#include "hinmega/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace hinmega::synth {

namespace {

std::string padded(const char* prefix, int value, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", prefix, width, value);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (communities < 2) throw InputError("synth: need at least 2 communities");
  if (authors_per_community < 1 || venues_per_community < 1 || topics_per_community < 1)
    throw InputError("synth: authors/venues/topics per community must be >= 1");
  if (papers_per_author < 1.0)
    throw InputError("synth: papers_per_author mean must be >= 1");
  if (!(0.0 <= p_out && p_out < p_in && p_in <= 1.0))
    throw InputError("synth: require 0 <= p_out < p_in <= 1");
}

hin::Schema dblp_like_schema() {
  return hin::Schema({"A", "P", "V", "T"},
                     {{"writes", "A", "P", true},
                      {"published_in", "P", "V", true},
                      {"has_topic", "P", "T", true}});
}

meta::MetaGraph author_venue_topic_meta_graph(const hin::Schema& schema) {
  std::vector<meta::MetaNode> nodes = {{"a1", "A"}, {"p1", "P"}, {"v", "V"},
                                       {"t", "T"},  {"p2", "P"}, {"a2", "A"}};
  std::vector<meta::MetaEdge> edges = {
      {0, 1, {"writes", false, false}},       {1, 2, {"published_in", false, false}},
      {1, 3, {"has_topic", false, false}},    {2, 4, {"published_in", true, false}},
      {3, 4, {"has_topic", true, false}},     {4, 5, {"writes", true, false}},
  };
  return meta::MetaGraph(std::move(nodes), std::move(edges), 0, 5, schema);
}

SynthResult generate(const SynthConfig& config) {
  config.validate();
  const Rng master(config.seed);

  const int total_authors = config.communities * config.authors_per_community;
  const int total_venues = config.communities * config.venues_per_community;
  const int total_topics = config.communities * config.topics_per_community;

  std::vector<hin::NodeRecord> nodes;
  std::vector<hin::EdgeRecord> edges;
  std::vector<std::pair<std::string, std::string>> labels;

  const auto community_label = [](int c) { return "c" + std::to_string(c); };
  const auto add_node = [&](std::string id, const char* type, int community) {
    nodes.push_back({id, type, community_label(community)});
    labels.emplace_back(std::move(id), community_label(community));
  };

  std::vector<int> author_community(static_cast<std::size_t>(total_authors));
  for (int a = 0; a < total_authors; ++a) {
    author_community[static_cast<std::size_t>(a)] = a / config.authors_per_community;
    add_node(padded("a", a, 4), "A", author_community[static_cast<std::size_t>(a)]);
  }
  for (int v = 0; v < total_venues; ++v)
    add_node(padded("v", v, 3), "V", v / config.venues_per_community);
  for (int t = 0; t < total_topics; ++t)
    add_node(padded("t", t, 4), "T", t / config.topics_per_community);

  // Papers: every author writes 1 + Poisson(mean - 1) papers, so no author is
  // isolated; a paper inherits its author's community.
  Rng papers_rng = master.substream("papers");
  std::vector<int> paper_community;
  std::vector<int> paper_author;
  for (int a = 0; a < total_authors; ++a) {
    const int count = 1 + papers_rng.poisson(config.papers_per_author - 1.0);
    for (int i = 0; i < count; ++i) {
      paper_author.push_back(a);
      paper_community.push_back(author_community[static_cast<std::size_t>(a)]);
    }
  }
  const int total_papers = static_cast<int>(paper_author.size());
  for (int p = 0; p < total_papers; ++p) {
    add_node(padded("p", p, 5), "P", paper_community[static_cast<std::size_t>(p)]);
    edges.push_back({padded("a", paper_author[static_cast<std::size_t>(p)], 4),
                     padded("p", p, 5), "writes"});
  }

  Rng venue_rng = master.substream("venues");
  for (int p = 0; p < total_papers; ++p) {
    for (int v = 0; v < total_venues; ++v) {
      const bool same = paper_community[static_cast<std::size_t>(p)] ==
                        v / config.venues_per_community;
      if (venue_rng.uniform() < (same ? config.p_in : config.p_out))
        edges.push_back({padded("p", p, 5), padded("v", v, 3), "published_in"});
    }
  }

  Rng topic_rng = master.substream("topics");
  for (int p = 0; p < total_papers; ++p) {
    for (int t = 0; t < total_topics; ++t) {
      const bool same = paper_community[static_cast<std::size_t>(p)] ==
                        t / config.topics_per_community;
      if (topic_rng.uniform() < (same ? config.p_in : config.p_out))
        edges.push_back({padded("p", p, 5), padded("t", t, 4), "has_topic"});
    }
  }

  return SynthResult{hin::TypedGraph(dblp_like_schema(), std::move(nodes), std::move(edges)),
                     std::move(labels)};
}

void write_dataset(const SynthConfig& config, const std::filesystem::path& dir) {
  const SynthResult result = generate(config);
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "schema.json");
    if (!out) throw InputError("cannot open for writing: " + (dir / "schema.json").string());
    out << result.graph.schema().to_json();
  }
  result.graph.save(dir / "nodes.tsv", dir / "edges.tsv");
  {
    std::ofstream out(dir / "labels.tsv");
    if (!out) throw InputError("cannot open for writing: " + (dir / "labels.tsv").string());
    std::vector<std::pair<std::string, std::string>> sorted = result.labels;
    std::sort(sorted.begin(), sorted.end());
    for (const auto& [id, label] : sorted) out << id << '\t' << label << '\n';
  }
  {
    std::ofstream out(dir / "metagraph.json");
    if (!out)
      throw InputError("cannot open for writing: " + (dir / "metagraph.json").string());
    out << author_venue_topic_meta_graph(result.graph.schema()).to_json();
  }
}

}  // namespace hinmega::synth
