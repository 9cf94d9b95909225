#pragma once

#include <array>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "relanet/corpus.hpp"

namespace relanet::hlg {

// The 12 edge types. r1..r8 encode statistical dependencies between intent
// and B- slot labels in two strength bands; r9..r12 encode the B-/I- and
// pseudo-parent/child hierarchies.
enum class Relation : int {
  i2i_stat_dep = 0,
  i2s_stat_dep,
  s2s_stat_dep,
  s2i_stat_dep,
  i2i_stat_strong_dep,
  i2s_stat_strong_dep,
  s2s_stat_strong_dep,
  s2i_stat_strong_dep,
  b2i_hierarchy,
  i2b_hierarchy,
  parent2child_hierarchy,
  child2parent_hierarchy,
};

inline constexpr int kNumRelations = 12;

const char* relation_name(Relation r);
// "r1".."r12" codes used by the graph document schema.
std::string relation_code(Relation r);
Relation relation_from_code(const std::string& code);

enum class NodeKind { intent, slot, pseudo };

const char* node_kind_name(NodeKind k);
NodeKind node_kind_from_name(const std::string& name);

struct Node {
  int id;
  NodeKind kind;
  std::string label;

  bool operator==(const Node&) const = default;
};

struct Edge {
  int src;
  int dst;
  Relation rel;

  bool operator==(const Edge&) const = default;
};

struct GraphMeta {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::string corpus_fingerprint;
};

// Typed label graph. Node ids of built graphs are dense and canonical
// (intents, then slots, then pseudo nodes); subgraphs keep the parent's ids.
class HeterogeneousLabelGraph {
 public:
  HeterogeneousLabelGraph() = default;
  HeterogeneousLabelGraph(std::vector<Node> nodes, std::vector<Edge> edges, GraphMeta meta);

  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const GraphMeta& meta() const { return meta_; }

  bool has_node(int id) const { return by_id_.count(id) > 0; }
  const Node& node(int id) const;
  // -1 when no node with this kind/label exists.
  int find_node(NodeKind kind, const std::string& label) const;

  // In-neighbors of `id` over relation r: sources of edges (j -> id, r).
  const std::vector<int>& in_neighbors(int id, Relation r) const;
  // Neighbors over any relation, either direction, deduplicated.
  std::vector<int> undirected_neighbors(int id) const;

  int max_node_id() const { return max_id_; }

  // Order-insensitive comparison of node and edge sets.
  bool same_structure(const HeterogeneousLabelGraph& o) const;

 private:
  std::vector<Node> nodes_;
  std::vector<Edge> edges_;
  GraphMeta meta_;
  std::unordered_map<int, std::size_t> by_id_;
  std::unordered_map<int, std::array<std::vector<int>, kNumRelations>> in_index_;
  int max_id_ = -1;
};

// Sample-level co-occurrence counts over the statistical universe: all
// intent labels plus all B- slot labels, each counted at most once per
// sample. I- labels, "O" and pseudo labels are excluded.
struct CooccurrenceStats {
  struct Entry {
    bool is_intent;
    std::string label;  // full label, e.g. "atis_flight" or "B-city_name"
  };
  std::vector<Entry> universe;
  std::unordered_map<std::string, int> universe_index;  // keyed by label string
  std::vector<long> count;                              // per universe index
  std::vector<std::vector<long>> joint;                 // symmetric, joint[i][j]

  int size() const { return static_cast<int>(universe.size()); }
  int index_of(const std::string& label) const;
};

CooccurrenceStats compute_stats(const corpus::Dataset& train, const corpus::LabelInventory& inv);

// P(j|i) = joint[i][j] / count[i]. Throws when i was never counted.
double conditional_probability(const CooccurrenceStats& stats, int i, int j);
double conditional_probability(const CooccurrenceStats& stats, const std::string& label_i,
                               const std::string& label_j);

// Builds the full HLG: statistical edges for every ordered universe pair
// whose P(j|i) clears a threshold band, plus hierarchy edges derived from
// the inventory. Requires 0 < lambda1 < lambda2 <= 1.
HeterogeneousLabelGraph build_hlg(const CooccurrenceStats& stats, const corpus::LabelInventory& inv,
                                  double lambda1, double lambda2);

// Induced subgraph on the predicted labels plus their first-order neighbors
// (either edge direction). Label sets are given as plain label strings.
HeterogeneousLabelGraph dm_subgraph(const HeterogeneousLabelGraph& g,
                                    const std::vector<std::string>& predicted_intents,
                                    const std::vector<std::string>& predicted_slots);

enum class GraphAblation { none, no_stat_dep, no_hierarchy, no_relation };

GraphAblation graph_ablation_from_name(const std::string& name);
std::string graph_ablation_name(GraphAblation mode);

// none: identity. no_stat_dep: drops r1..r8. no_hierarchy: drops r9..r12
// and the pseudo nodes. no_relation: keeps every edge but collapses all
// relation types into one shared type.
HeterogeneousLabelGraph ablate_graph(const HeterogeneousLabelGraph& g, GraphAblation mode);

nlohmann::json export_graph(const HeterogeneousLabelGraph& g);
HeterogeneousLabelGraph import_graph(const nlohmann::json& doc);

}  // namespace relanet::hlg
