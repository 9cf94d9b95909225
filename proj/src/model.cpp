#include "relanet/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "relanet/errors.hpp"
#include "relanet/rng.hpp"

namespace relanet::model {

namespace {

constexpr int kCheckpointVersion = 1;

double init_scale(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

void ModelConfig::validate() const {
  if (word_emb_dim < 1 || label_dim < 1 || hidden_dim < 1 || attn_dim < 1 || attn_out_dim < 1)
    throw ConfigError("model dimensions must be >= 1");
  if (gnn_layers < 1) throw ConfigError("gnn layer count must be >= 1");
  if (steps < 1) throw ConfigError("step count must be >= 1");
  if (window < 0) throw ConfigError("local window must be >= 0");
  if (gat_heads < 1) throw ConfigError("gat head count must be >= 1");
  if (!(lambda1 > 0.0 && lambda1 < lambda2 && lambda2 <= 1.0))
    throw ConfigError("thresholds must satisfy 0 < lambda1 < lambda2 <= 1");
  if (!(intent_threshold > 0.0 && intent_threshold < 1.0))
    throw ConfigError("intent threshold must lie in (0, 1)");
  if (gamma_i < 0.0 || gamma_s < 0.0 || beta_i < 0.0 || beta_s < 0.0)
    throw ConfigError("loss weights must be nonnegative");
  if (!no_gats && (2 * hidden_dim) % gat_heads != 0)
    throw ConfigError("2*hidden_dim must be divisible by gat_heads");
}

nlohmann::json ModelConfig::to_json() const {
  return nlohmann::json{{"word_emb_dim", word_emb_dim},
                        {"label_dim", label_dim},
                        {"hidden_dim", hidden_dim},
                        {"attn_dim", attn_dim},
                        {"attn_out_dim", attn_out_dim},
                        {"gnn_layers", gnn_layers},
                        {"steps", steps},
                        {"window", window},
                        {"gat_heads", gat_heads},
                        {"lambda1", lambda1},
                        {"lambda2", lambda2},
                        {"intent_threshold", intent_threshold},
                        {"gamma_i", gamma_i},
                        {"gamma_s", gamma_s},
                        {"beta_i", beta_i},
                        {"beta_s", beta_s},
                        {"no_matching", no_matching},
                        {"no_gats", no_gats},
                        {"no_dm_hlgt", no_dm_hlgt},
                        {"graph_ablation", hlg::graph_ablation_name(graph_ablation)}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.word_emb_dim = j.at("word_emb_dim").get<int>();
    c.label_dim = j.at("label_dim").get<int>();
    c.hidden_dim = j.at("hidden_dim").get<int>();
    c.attn_dim = j.at("attn_dim").get<int>();
    c.attn_out_dim = j.at("attn_out_dim").get<int>();
    c.gnn_layers = j.at("gnn_layers").get<int>();
    c.steps = j.at("steps").get<int>();
    c.window = j.at("window").get<int>();
    c.gat_heads = j.at("gat_heads").get<int>();
    c.lambda1 = j.at("lambda1").get<double>();
    c.lambda2 = j.at("lambda2").get<double>();
    c.intent_threshold = j.at("intent_threshold").get<double>();
    c.gamma_i = j.at("gamma_i").get<double>();
    c.gamma_s = j.at("gamma_s").get<double>();
    c.beta_i = j.at("beta_i").get<double>();
    c.beta_s = j.at("beta_s").get<double>();
    c.no_matching = j.at("no_matching").get<bool>();
    c.no_gats = j.at("no_gats").get<bool>();
    c.no_dm_hlgt = j.at("no_dm_hlgt").get<bool>();
    c.graph_ablation = hlg::graph_ablation_from_name(j.at("graph_ablation").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

Var matching_scores(Tape& t, Var hidden, Var label_embs, const DecoderParams& p,
                    double neg_slope) {
  Var h1 = t.leaky_relu(t.affine(t.param(*p.w1), hidden, t.param(*p.b1)), neg_slope);
  Var proj = t.affine(t.param(*p.w2), h1, t.param(*p.b2));  // d x n
  return t.matmul(t.transpose(label_embs), proj);           // n_labels x n
}

std::vector<int> vote_intents(const Matrix& probs, double threshold) {
  const int n_labels = static_cast<int>(probs.rows());
  const int n_tokens = static_cast<int>(probs.cols());
  if (n_labels == 0 || n_tokens == 0) throw ComputeError("vote_intents: empty probability matrix");
  const int need = (n_tokens + 1) / 2;
  std::vector<int> winners;
  for (int j = 0; j < n_labels; ++j) {
    int votes = 0;
    for (int i = 0; i < n_tokens; ++i)
      if (probs(j, i) > threshold) ++votes;
    if (votes >= need) winners.push_back(j);
  }
  if (winners.empty()) {
    int best = 0;
    double best_mean = probs.row(0).mean();
    for (int j = 1; j < n_labels; ++j) {
      double m = probs.row(j).mean();
      if (m > best_mean) {
        best = j;
        best_mean = m;
      }
    }
    winners.push_back(best);
  }
  return winners;
}

std::vector<int> argmax_slots(const Matrix& dists) {
  std::vector<int> out(dists.cols());
  for (Eigen::Index i = 0; i < dists.cols(); ++i) {
    Eigen::Index best = 0;
    dists.col(i).maxCoeff(&best);
    out[i] = static_cast<int>(best);
  }
  return out;
}

ReLaNet::ReLaNet(ModelConfig cfg, corpus::LabelInventory inv, corpus::Vocabulary vocab,
                 hlg::HeterogeneousLabelGraph graph, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      inv_(std::move(inv)),
      vocab_(std::move(vocab)),
      graph_(hlg::ablate_graph(graph, cfg_.graph_ablation)) {
  cfg_.validate();
  if (vocab_.size() < 1 || vocab_.words[0] != "<unk>")
    throw DataError("vocabulary must reserve index 0 for <unk>");
  if (inv_.n_intents() < 1 || inv_.n_slots() < 1)
    throw DataError("inventory must contain at least one intent and one slot label");

  // graph node ids must mirror the inventory layout: intents first, then slots
  const int n_i = inv_.n_intents();
  const int n_s = inv_.n_slots();
  if (static_cast<int>(graph_.nodes().size()) < n_i + n_s)
    throw DataError("graph is missing inventory label nodes");
  for (int i = 0; i < n_i; ++i) {
    const auto& nd = graph_.node(i);
    if (nd.kind != hlg::NodeKind::intent || nd.label != inv_.intent_labels[i])
      throw DataError("graph node layout does not match the inventory (intent " +
                      inv_.intent_labels[i] + ")");
  }
  for (int s = 0; s < n_s; ++s) {
    const auto& nd = graph_.node(n_i + s);
    if (nd.kind != hlg::NodeKind::slot || nd.label != inv_.slot_labels[s])
      throw DataError("graph node layout does not match the inventory (slot " +
                      inv_.slot_labels[s] + ")");
  }

  Rng rng(seed);
  const int d = cfg_.label_dim;
  const int h = cfg_.hidden_dim;
  const int n_nodes = static_cast<int>(graph_.nodes().size());

  // creation order is the checkpoint layout; keep it stable
  word_emb_ = &pc_.add_uniform("word_emb", cfg_.word_emb_dim, vocab_.size(), rng,
                               init_scale(cfg_.word_emb_dim));
  label_init_ = &pc_.add_uniform("label_init", d, n_nodes, rng, init_scale(d));
  hlgt_ = layers::make_hlgt_params(pc_, "hlgt", cfg_.gnn_layers, d, rng);
  if (!cfg_.no_dm_hlgt)
    dm_hlgt_ = layers::make_hlgt_params(pc_, "dm_hlgt", cfg_.gnn_layers, d, rng);
  enc_ = layers::make_encoder_params(pc_, "enc", cfg_.word_emb_dim, h, cfg_.attn_dim,
                                     cfg_.attn_out_dim, rng);
  const int stream_in = cfg_.encoder_dim() + 2 * d;
  intent_lstm_ = layers::make_bilstm_params(pc_, "intent_lstm", stream_in, h, rng);
  slot_lstm_ = layers::make_bilstm_params(pc_, "slot_lstm", stream_in, h, rng);
  if (!cfg_.no_gats) {
    intent_gat_ = layers::make_gat_params(pc_, "intent_gat", cfg_.gnn_layers, 2 * h,
                                          cfg_.gat_heads, rng);
    slot_gat_ = layers::make_gat_params(pc_, "slot_gat", cfg_.gnn_layers, 2 * h,
                                        cfg_.gat_heads, rng);
  }
  if (cfg_.no_matching) {
    intent_head_.w = &pc_.add_uniform("intent_head.w", n_i, 2 * h, rng, init_scale(2 * h));
    intent_head_.b = &pc_.add("intent_head.b", n_i, 1);
    slot_head_.w = &pc_.add_uniform("slot_head.w", n_s, 2 * h, rng, init_scale(2 * h));
    slot_head_.b = &pc_.add("slot_head.b", n_s, 1);
  } else {
    intent_dec_.w1 = &pc_.add_uniform("intent_dec.w1", d, 2 * h, rng, init_scale(2 * h));
    intent_dec_.b1 = &pc_.add("intent_dec.b1", d, 1);
    intent_dec_.w2 = &pc_.add_uniform("intent_dec.w2", d, d, rng, init_scale(d));
    intent_dec_.b2 = &pc_.add("intent_dec.b2", d, 1);
    slot_dec_.w1 = &pc_.add_uniform("slot_dec.w1", d, 2 * h, rng, init_scale(2 * h));
    slot_dec_.b1 = &pc_.add("slot_dec.b1", d, 1);
    slot_dec_.w2 = &pc_.add_uniform("slot_dec.w2", d, d, rng, init_scale(d));
    slot_dec_.b2 = &pc_.add("slot_dec.b2", d, 1);
  }
}

ReLaNet::LabelState ReLaNet::initial_embeddings(Tape& t) {
  Var full = layers::hlgt_forward(t, t.param(*label_init_), graph_, hlgt_);
  std::vector<int> intent_ids(inv_.n_intents());
  for (int i = 0; i < inv_.n_intents(); ++i) intent_ids[i] = i;
  std::vector<int> slot_ids(inv_.n_slots());
  for (int s = 0; s < inv_.n_slots(); ++s) slot_ids[s] = inv_.n_intents() + s;
  return {full, t.gather_cols(full, intent_ids), t.gather_cols(full, slot_ids)};
}

ReLaNet::LabelState ReLaNet::refresh_embeddings(Tape& t, const LabelState& prev,
                                                const std::vector<int>& intent_ids,
                                                const std::vector<int>& slot_ids) {
  if (cfg_.no_dm_hlgt) return prev;
  std::vector<std::string> intents;
  for (int id : intent_ids) intents.push_back(inv_.intent_labels[id]);
  std::set<int> slot_set(slot_ids.begin(), slot_ids.end());
  std::vector<std::string> slots;
  for (int id : slot_set) slots.push_back(inv_.slot_labels[id]);
  auto sub = hlg::dm_subgraph(graph_, intents, slots);
  if (sub.nodes().empty()) return prev;

  Var updated = layers::hlgt_forward(t, prev.full, sub, dm_hlgt_);
  // retained columns take the refreshed values, everything else stays put
  Matrix mask = Matrix::Zero(prev.full.rows(), prev.full.cols());
  for (const auto& nd : sub.nodes()) mask.col(nd.id).setOnes();
  Matrix inv_mask = Matrix::Ones(mask.rows(), mask.cols()) - mask;
  Var full = t.add(t.cmul(updated, t.constant(mask)), t.cmul(prev.full, t.constant(inv_mask)));

  std::vector<int> all_intents(inv_.n_intents());
  for (int i = 0; i < inv_.n_intents(); ++i) all_intents[i] = i;
  std::vector<int> all_slots(inv_.n_slots());
  for (int s = 0; s < inv_.n_slots(); ++s) all_slots[s] = inv_.n_intents() + s;
  return {full, t.gather_cols(full, all_intents), t.gather_cols(full, all_slots)};
}

Var ReLaNet::encode(Tape& t, const corpus::Sample& sample) {
  if (sample.tokens.empty()) throw DataError("cannot run the model on an empty sample");
  std::vector<int> ids;
  ids.reserve(sample.tokens.size());
  for (const auto& tok : sample.tokens) ids.push_back(vocab_.id(tok));
  Var x = t.gather_cols(t.param(*word_emb_), ids);
  return layers::self_attentive_encode(t, x, enc_);
}

ForwardResult ReLaNet::forward(Tape& t, const corpus::Sample& sample, bool keep_trace) {
  Var h = encode(t, sample);
  const int n = static_cast<int>(sample.tokens.size());
  const int d = cfg_.label_dim;

  LabelState st = initial_embeddings(t);
  auto global_adj = layers::build_global_adjacency(n);
  auto local_adj = layers::build_local_adjacency(n, cfg_.window);

  // no knowledge exists before the first step; zero vectors contribute nothing
  Var k_intent = t.zeros(d, 1);
  Var k_slot = t.zeros(d, 1);
  Var k_tok = t.zeros(d, n);

  ForwardResult res;
  std::vector<int> intent_ids;
  std::vector<int> slot_ids;
  for (int step = 0; step < cfg_.steps; ++step) {
    Var intent_in = t.vstack({h, t.repeat_cols(k_intent, n), t.repeat_cols(k_slot, n)});
    Var slot_in = t.vstack({h, t.repeat_cols(k_intent, n), k_tok});
    Var hi = layers::birecurrent_forward(t, intent_in, intent_lstm_);
    Var hs = layers::birecurrent_forward(t, slot_in, slot_lstm_);
    if (!cfg_.no_gats) {
      hi = layers::gat_forward(t, hi, global_adj, intent_gat_);
      hs = layers::gat_forward(t, hs, local_adj, slot_gat_);
    }

    res.intent_hidden = hi;
    res.slot_hidden = hs;

    Var i_scores = cfg_.no_matching
                       ? t.affine(t.param(*intent_head_.w), hi, t.param(*intent_head_.b))
                       : matching_scores(t, hi, st.intents, intent_dec_);
    Var s_scores = cfg_.no_matching
                       ? t.affine(t.param(*slot_head_.w), hs, t.param(*slot_head_.b))
                       : matching_scores(t, hs, st.slots, slot_dec_);
    Var i_probs = t.sigmoid(i_scores);
    Var s_dists = t.softmax_cols(s_scores);
    res.intent_probs.push_back(i_probs);
    res.slot_dists.push_back(s_dists);

    intent_ids = vote_intents(i_probs.value(), cfg_.intent_threshold);
    slot_ids = argmax_slots(s_dists.value());
    if (keep_trace) {
      StepTrace trace;
      for (int id : intent_ids) trace.intents.push_back(inv_.intent_labels[id]);
      for (int id : slot_ids) trace.slots.push_back(inv_.slot_labels[id]);
      trace.intent_probs = i_probs.value();
      trace.slot_dists = s_dists.value();
      res.pred.steps.push_back(std::move(trace));
    }

    if (step + 1 < cfg_.steps) {
      // project label knowledge from the embeddings this step decoded against
      k_intent = t.sum_cols(t.gather_cols(st.intents, intent_ids));
      std::set<int> slot_set(slot_ids.begin(), slot_ids.end());
      slot_set.erase(inv_.o_index());
      if (slot_set.empty()) {
        k_slot = t.zeros(d, 1);
      } else {
        std::vector<int> distinct(slot_set.begin(), slot_set.end());
        k_slot = t.sum_cols(t.gather_cols(st.slots, distinct));
      }
      k_tok = t.gather_cols(st.slots, slot_ids);
      st = refresh_embeddings(t, st, intent_ids, slot_ids);
    }
  }

  for (int id : intent_ids) res.pred.intents.push_back(inv_.intent_labels[id]);
  for (int id : slot_ids) res.pred.slots.push_back(inv_.slot_labels[id]);
  return res;
}

Prediction ReLaNet::predict(const corpus::Sample& sample, bool keep_trace) {
  Tape t;
  return forward(t, sample, keep_trace).pred;
}

Matrix ReLaNet::intent_embeddings() {
  Tape t;
  return initial_embeddings(t).intents.value();
}

Matrix ReLaNet::slot_embeddings() {
  Tape t;
  return initial_embeddings(t).slots.value();
}

nlohmann::json ReLaNet::to_checkpoint() const {
  return nlohmann::json{{"format_version", kCheckpointVersion},
                        {"config", cfg_.to_json()},
                        {"inventory", inv_.to_json()},
                        {"vocabulary", vocab_.words},
                        {"params", pc_.to_json()}};
}

ReLaNet ReLaNet::from_checkpoint(const nlohmann::json& doc,
                                 const hlg::HeterogeneousLabelGraph& graph) {
  if (!doc.is_object() || !doc.contains("format_version"))
    throw DataError("checkpoint: missing format_version");
  if (doc.at("format_version").get<int>() != kCheckpointVersion)
    throw DataError("checkpoint: unsupported format version");
  ModelConfig cfg = ModelConfig::from_json(doc.at("config"));
  corpus::LabelInventory inv = corpus::LabelInventory::from_json(doc.at("inventory"));
  corpus::Vocabulary vocab;
  try {
    vocab.words = doc.at("vocabulary").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: malformed vocabulary: ") + e.what());
  }
  for (int i = 0; i < static_cast<int>(vocab.words.size()); ++i) vocab.index[vocab.words[i]] = i;
  if (!graph.meta().corpus_fingerprint.empty() &&
      graph.meta().corpus_fingerprint != inv.fingerprint())
    throw DataError("checkpoint inventory does not match the graph fingerprint");
  ReLaNet m(cfg, std::move(inv), std::move(vocab), graph, 0);
  m.pc_.load_json(doc.at("params"));
  return m;
}

}  // namespace relanet::model
