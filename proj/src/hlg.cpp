#include "relanet/hlg.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "relanet/errors.hpp"

namespace relanet::hlg {

namespace {

constexpr const char* kRelationNames[kNumRelations] = {
    "i2i_stat_dep",        "i2s_stat_dep",        "s2s_stat_dep",        "s2i_stat_dep",
    "i2i_stat_strong_dep", "i2s_stat_strong_dep", "s2s_stat_strong_dep", "s2i_stat_strong_dep",
    "b2i_hierarchy",       "i2b_hierarchy",       "parent2child_hierarchy",
    "child2parent_hierarchy",
};

bool is_statistical(Relation r) { return static_cast<int>(r) < 8; }

}  // namespace

const char* relation_name(Relation r) {
  int k = static_cast<int>(r);
  if (k < 0 || k >= kNumRelations) throw ConfigError("invalid relation value");
  return kRelationNames[k];
}

std::string relation_code(Relation r) {
  int k = static_cast<int>(r);
  if (k < 0 || k >= kNumRelations) throw ConfigError("invalid relation value");
  return "r" + std::to_string(k + 1);
}

Relation relation_from_code(const std::string& code) {
  if (code.size() >= 2 && code[0] == 'r') {
    try {
      int k = std::stoi(code.substr(1));
      if (k >= 1 && k <= kNumRelations) return static_cast<Relation>(k - 1);
    } catch (const std::exception&) {
    }
  }
  throw DataError("unknown relation code: " + code);
}

const char* node_kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::intent: return "intent";
    case NodeKind::slot: return "slot";
    case NodeKind::pseudo: return "pseudo";
  }
  throw ConfigError("invalid node kind value");
}

NodeKind node_kind_from_name(const std::string& name) {
  if (name == "intent") return NodeKind::intent;
  if (name == "slot") return NodeKind::slot;
  if (name == "pseudo") return NodeKind::pseudo;
  throw DataError("unknown node kind: " + name);
}

HeterogeneousLabelGraph::HeterogeneousLabelGraph(std::vector<Node> nodes, std::vector<Edge> edges,
                                                 GraphMeta meta)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), meta_(std::move(meta)) {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!by_id_.emplace(nodes_[i].id, i).second)
      throw DataError("duplicate node id " + std::to_string(nodes_[i].id));
    max_id_ = std::max(max_id_, nodes_[i].id);
  }
  for (const Edge& e : edges_) {
    if (!by_id_.count(e.src) || !by_id_.count(e.dst))
      throw DataError("edge references missing node (" + std::to_string(e.src) + " -> " +
                      std::to_string(e.dst) + ")");
    in_index_[e.dst][static_cast<int>(e.rel)].push_back(e.src);
  }
}

const Node& HeterogeneousLabelGraph::node(int id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw DataError("no node with id " + std::to_string(id));
  return nodes_[it->second];
}

int HeterogeneousLabelGraph::find_node(NodeKind kind, const std::string& label) const {
  for (const Node& n : nodes_)
    if (n.kind == kind && n.label == label) return n.id;
  return -1;
}

const std::vector<int>& HeterogeneousLabelGraph::in_neighbors(int id, Relation r) const {
  static const std::vector<int> empty;
  auto it = in_index_.find(id);
  if (it == in_index_.end()) return empty;
  return it->second[static_cast<int>(r)];
}

std::vector<int> HeterogeneousLabelGraph::undirected_neighbors(int id) const {
  std::set<int> out;
  for (const Edge& e : edges_) {
    if (e.src == id) out.insert(e.dst);
    if (e.dst == id) out.insert(e.src);
  }
  return {out.begin(), out.end()};
}

bool HeterogeneousLabelGraph::same_structure(const HeterogeneousLabelGraph& o) const {
  auto node_key = [](const Node& n) { return std::tuple(n.id, n.kind, n.label); };
  auto edge_key = [](const Edge& e) { return std::tuple(e.src, e.dst, e.rel); };
  auto a_nodes = nodes_;
  auto b_nodes = o.nodes_;
  auto a_edges = edges_;
  auto b_edges = o.edges_;
  auto by_node = [&](const Node& x, const Node& y) { return node_key(x) < node_key(y); };
  auto by_edge = [&](const Edge& x, const Edge& y) { return edge_key(x) < edge_key(y); };
  std::sort(a_nodes.begin(), a_nodes.end(), by_node);
  std::sort(b_nodes.begin(), b_nodes.end(), by_node);
  std::sort(a_edges.begin(), a_edges.end(), by_edge);
  std::sort(b_edges.begin(), b_edges.end(), by_edge);
  return a_nodes == b_nodes && a_edges == b_edges;
}

int CooccurrenceStats::index_of(const std::string& label) const {
  auto it = universe_index.find(label);
  return it == universe_index.end() ? -1 : it->second;
}

CooccurrenceStats compute_stats(const corpus::Dataset& train, const corpus::LabelInventory& inv) {
  CooccurrenceStats stats;
  for (const std::string& l : inv.intent_labels) {
    stats.universe_index.emplace(l, stats.size());
    stats.universe.push_back({true, l});
  }
  for (const std::string& l : inv.slot_labels) {
    if (l.rfind("B-", 0) != 0) continue;
    stats.universe_index.emplace(l, stats.size());
    stats.universe.push_back({false, l});
  }
  int n = stats.size();
  stats.count.assign(n, 0);
  stats.joint.assign(n, std::vector<long>(n, 0));

  for (const corpus::Sample& s : train.samples) {
    std::set<int> present;
    for (const std::string& l : s.intents) {
      int k = stats.index_of(l);
      if (k < 0) throw DataError("intent label outside inventory: " + l);
      present.insert(k);
    }
    for (const std::string& l : s.slots) {
      if (l.rfind("B-", 0) != 0) continue;
      int k = stats.index_of(l);
      if (k < 0) throw DataError("slot label outside inventory: " + l);
      present.insert(k);
    }
    for (int a : present) {
      ++stats.count[a];
      for (int b : present) ++stats.joint[a][b];
    }
  }
  return stats;
}

double conditional_probability(const CooccurrenceStats& stats, int i, int j) {
  int n = stats.size();
  if (i < 0 || i >= n || j < 0 || j >= n) throw DataError("universe index out of range");
  if (stats.count[i] == 0)
    throw DataError("label never observed: " + stats.universe[i].label);
  return static_cast<double>(stats.joint[i][j]) / static_cast<double>(stats.count[i]);
}

double conditional_probability(const CooccurrenceStats& stats, const std::string& label_i,
                               const std::string& label_j) {
  int i = stats.index_of(label_i);
  int j = stats.index_of(label_j);
  if (i < 0) throw DataError("label not in statistical universe: " + label_i);
  if (j < 0) throw DataError("label not in statistical universe: " + label_j);
  return conditional_probability(stats, i, j);
}

HeterogeneousLabelGraph build_hlg(const CooccurrenceStats& stats, const corpus::LabelInventory& inv,
                                  double lambda1, double lambda2) {
  if (!(0.0 < lambda1 && lambda1 < lambda2 && lambda2 <= 1.0))
    throw ConfigError("thresholds must satisfy 0 < lambda1 < lambda2 <= 1");

  std::vector<Node> nodes;
  int next_id = 0;
  for (const std::string& l : inv.intent_labels) nodes.push_back({next_id++, NodeKind::intent, l});
  int slot_base = next_id;
  for (const std::string& l : inv.slot_labels) nodes.push_back({next_id++, NodeKind::slot, l});
  for (const std::string& l : inv.pseudo_labels) nodes.push_back({next_id++, NodeKind::pseudo, l});

  auto universe_node_id = [&](int u) {
    const auto& entry = stats.universe[u];
    if (entry.is_intent) return inv.intent_index.at(entry.label);
    return slot_base + inv.slot_index.at(entry.label);
  };

  std::vector<Edge> edges;
  int n = stats.size();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double p = conditional_probability(stats, i, j);
      if (p < lambda1) continue;
      bool strong = p >= lambda2;
      bool src_intent = stats.universe[i].is_intent;
      bool dst_intent = stats.universe[j].is_intent;
      Relation base = src_intent ? (dst_intent ? Relation::i2i_stat_dep : Relation::i2s_stat_dep)
                                 : (dst_intent ? Relation::s2i_stat_dep : Relation::s2s_stat_dep);
      Relation rel = strong ? static_cast<Relation>(static_cast<int>(base) + 4) : base;
      edges.push_back({universe_node_id(i), universe_node_id(j), rel});
    }
  }

  for (const std::string& l : inv.slot_labels) {
    if (l.rfind("I-", 0) != 0) continue;
    auto bit = inv.slot_index.find("B-" + l.substr(2));
    if (bit == inv.slot_index.end()) continue;
    int b_id = slot_base + bit->second;
    int i_id = slot_base + inv.slot_index.at(l);
    edges.push_back({b_id, i_id, Relation::b2i_hierarchy});
    edges.push_back({i_id, b_id, Relation::i2b_hierarchy});
  }

  int pseudo_base = slot_base + static_cast<int>(inv.slot_labels.size());
  std::unordered_map<std::string, int> pseudo_id;
  for (std::size_t k = 0; k < inv.pseudo_labels.size(); ++k)
    pseudo_id.emplace(inv.pseudo_labels[k], pseudo_base + static_cast<int>(k));
  for (const std::string& child : inv.slot_labels) {
    auto pit = inv.parent_of.find(child);
    if (pit == inv.parent_of.end()) continue;
    int p_id = pseudo_id.at(pit->second);
    int c_id = slot_base + inv.slot_index.at(child);
    edges.push_back({p_id, c_id, Relation::parent2child_hierarchy});
    edges.push_back({c_id, p_id, Relation::child2parent_hierarchy});
  }

  GraphMeta meta;
  meta.lambda1 = lambda1;
  meta.lambda2 = lambda2;
  meta.corpus_fingerprint = inv.fingerprint();
  return HeterogeneousLabelGraph(std::move(nodes), std::move(edges), std::move(meta));
}

HeterogeneousLabelGraph dm_subgraph(const HeterogeneousLabelGraph& g,
                                    const std::vector<std::string>& predicted_intents,
                                    const std::vector<std::string>& predicted_slots) {
  std::set<int> keep;
  auto seed = [&](NodeKind kind, const std::string& label) {
    int id = g.find_node(kind, label);
    if (id < 0)
      throw DataError("predicted label has no graph node: " + label);
    keep.insert(id);
    for (int nb : g.undirected_neighbors(id)) keep.insert(nb);
  };
  for (const std::string& l : predicted_intents) seed(NodeKind::intent, l);
  for (const std::string& l : predicted_slots) seed(NodeKind::slot, l);

  std::vector<Node> nodes;
  for (const Node& n : g.nodes())
    if (keep.count(n.id)) nodes.push_back(n);
  std::vector<Edge> edges;
  for (const Edge& e : g.edges())
    if (keep.count(e.src) && keep.count(e.dst)) edges.push_back(e);
  return HeterogeneousLabelGraph(std::move(nodes), std::move(edges), g.meta());
}

GraphAblation graph_ablation_from_name(const std::string& name) {
  if (name == "none") return GraphAblation::none;
  if (name == "no_stat_dep") return GraphAblation::no_stat_dep;
  if (name == "no_hierarchy") return GraphAblation::no_hierarchy;
  if (name == "no_relation") return GraphAblation::no_relation;
  throw ConfigError("unknown graph ablation: " + name);
}

std::string graph_ablation_name(GraphAblation mode) {
  switch (mode) {
    case GraphAblation::none: return "none";
    case GraphAblation::no_stat_dep: return "no_stat_dep";
    case GraphAblation::no_hierarchy: return "no_hierarchy";
    case GraphAblation::no_relation: return "no_relation";
  }
  throw ConfigError("unknown graph ablation mode");
}

HeterogeneousLabelGraph ablate_graph(const HeterogeneousLabelGraph& g, GraphAblation mode) {
  std::vector<Node> nodes = g.nodes();
  std::vector<Edge> edges = g.edges();
  switch (mode) {
    case GraphAblation::none:
      break;
    case GraphAblation::no_stat_dep:
      std::erase_if(edges, [](const Edge& e) { return is_statistical(e.rel); });
      break;
    case GraphAblation::no_hierarchy:
      std::erase_if(edges, [](const Edge& e) { return !is_statistical(e.rel); });
      std::erase_if(nodes, [](const Node& n) { return n.kind == NodeKind::pseudo; });
      break;
    case GraphAblation::no_relation:
      for (Edge& e : edges) e.rel = Relation::i2i_stat_dep;
      break;
  }
  return HeterogeneousLabelGraph(std::move(nodes), std::move(edges), g.meta());
}

nlohmann::json export_graph(const HeterogeneousLabelGraph& g) {
  nlohmann::json doc;
  doc["nodes"] = nlohmann::json::array();
  for (const Node& n : g.nodes())
    doc["nodes"].push_back({{"id", n.id}, {"kind", node_kind_name(n.kind)}, {"label", n.label}});
  doc["edges"] = nlohmann::json::array();
  for (const Edge& e : g.edges())
    doc["edges"].push_back({{"src", e.src}, {"dst", e.dst}, {"relation", relation_code(e.rel)}});
  doc["metadata"] = {{"lambda1", g.meta().lambda1},
                     {"lambda2", g.meta().lambda2},
                     {"corpus_fingerprint", g.meta().corpus_fingerprint}};
  return doc;
}

HeterogeneousLabelGraph import_graph(const nlohmann::json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("edges") ||
        !doc.contains("metadata"))
      throw DataError("graph document must have nodes, edges and metadata");
    std::vector<Node> nodes;
    for (const auto& jn : doc.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      n.kind = node_kind_from_name(jn.at("kind").get<std::string>());
      n.label = jn.at("label").get<std::string>();
      nodes.push_back(std::move(n));
    }
    std::vector<Edge> edges;
    for (const auto& je : doc.at("edges")) {
      Edge e;
      e.src = je.at("src").get<int>();
      e.dst = je.at("dst").get<int>();
      e.rel = relation_from_code(je.at("relation").get<std::string>());
      edges.push_back(e);
    }
    GraphMeta meta;
    const auto& jm = doc.at("metadata");
    meta.lambda1 = jm.at("lambda1").get<double>();
    meta.lambda2 = jm.at("lambda2").get<double>();
    meta.corpus_fingerprint = jm.at("corpus_fingerprint").get<std::string>();
    return HeterogeneousLabelGraph(std::move(nodes), std::move(edges), std::move(meta));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed graph document: ") + e.what());
  }
}

}  // namespace relanet::hlg
