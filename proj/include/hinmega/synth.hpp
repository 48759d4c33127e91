#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hinmega/hin.hpp"
#include "hinmega/meta.hpp"

namespace hinmega::synth {

// Planted-community bibliographic network: authors (A) write papers (P),
// papers appear in venues (V) and carry topics (T). Papers link to
// own-community venues/topics with probability p_in, cross-community with
// p_out. Labels are community ids.
struct SynthConfig {
  int communities = 4;
  int authors_per_community = 50;
  double papers_per_author = 2.0;  // Poisson mean; every author gets >= 1 paper
  int venues_per_community = 3;
  int topics_per_community = 10;
  double p_in = 0.9;
  double p_out = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthResult {
  hin::TypedGraph graph;
  std::vector<std::pair<std::string, std::string>> labels;  // (node_id, community)
};

SynthResult generate(const SynthConfig& config);

// Writes schema.json, nodes.tsv (labels inline), edges.tsv, labels.tsv and
// metagraph.json into `dir`. Same seed, same bytes.
void write_dataset(const SynthConfig& config, const std::filesystem::path& dir);

// The A/P/V/T bibliographic schema the generator emits.
hin::Schema dblp_like_schema();

// Author-to-author meta-graph routing through a shared paper pair and both a
// common venue and a common topic (embedded meta-paths APVPA and APTPA).
meta::MetaGraph author_venue_topic_meta_graph(const hin::Schema& schema);

}  // namespace hinmega::synth
