#include "relanet/layers.hpp"

#include <cmath>

#include "relanet/errors.hpp"

namespace relanet::layers {

namespace {

double init_scale(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace

HlgtParams make_hlgt_params(ParamCollection& pc, const std::string& prefix, int n_layers, int dim,
                            Rng& rng) {
  HlgtParams p;
  p.n_layers = n_layers;
  p.dim = dim;
  double s = init_scale(dim);
  for (int l = 0; l < n_layers; ++l) {
    std::string base = prefix + ".l" + std::to_string(l);
    p.self_w.push_back(&pc.add_uniform(base + ".self", dim, dim, rng, s));
    auto& per_rel = p.rel_w.emplace_back();
    for (int r = 0; r < hlg::kNumRelations; ++r) {
      per_rel[r] = &pc.add_uniform(
          base + "." + hlg::relation_code(static_cast<hlg::Relation>(r)), dim, dim, rng, s);
    }
  }
  return p;
}

Var hlgt_layer(Tape& t, Var embs, const hlg::HeterogeneousLabelGraph& g, const HlgtParams& p,
               int layer) {
  if (layer < 0 || layer >= p.n_layers) throw ComputeError("hlgt_layer: layer out of range");
  if (embs.rows() != p.dim) throw ComputeError("hlgt_layer: embedding dim mismatch");
  const int n = embs.cols();
  if (g.max_node_id() >= n) throw ComputeError("hlgt_layer: graph node id exceeds column count");

  // Column-normalized in-neighbor indicators: M_r(j, i) = 1/|N_i^r| for each
  // edge j -> i, so (E * M_r) column i is the mean of i's in-neighbors.
  std::array<Matrix, hlg::kNumRelations> nbr;
  std::array<bool, hlg::kNumRelations> used{};
  for (const auto& e : g.edges()) {
    int r = static_cast<int>(e.rel);
    if (!used[r]) {
      nbr[r] = Matrix::Zero(n, n);
      used[r] = true;
    }
    nbr[r](e.src, e.dst) += 1.0;
  }
  for (int r = 0; r < hlg::kNumRelations; ++r) {
    if (!used[r]) continue;
    for (int i = 0; i < n; ++i) {
      double deg = nbr[r].col(i).sum();
      if (deg > 0.0) nbr[r].col(i) /= deg;
    }
  }

  Var acc = t.matmul(t.param(*p.self_w[layer]), embs);
  for (int r = 0; r < hlg::kNumRelations; ++r) {
    if (!used[r]) continue;
    Var messages = t.matmul(t.param(*p.rel_w[layer][r]), embs);
    acc = t.add(acc, t.matmul(messages, t.constant(nbr[r])));
  }
  return t.relu(acc);
}

Var hlgt_forward(Tape& t, Var embs, const hlg::HeterogeneousLabelGraph& g, const HlgtParams& p) {
  Var cur = embs;
  for (int l = 0; l < p.n_layers; ++l) cur = hlgt_layer(t, cur, g, p, l);
  return cur;
}

Adjacency build_global_adjacency(int n) {
  if (n < 1) throw ConfigError("adjacency needs at least one node");
  Adjacency adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) adj[i].push_back(j);
  return adj;
}

Adjacency build_local_adjacency(int n, int w) {
  if (n < 1) throw ConfigError("adjacency needs at least one node");
  if (w < 0) throw ConfigError("window must be nonnegative");
  Adjacency adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = std::max(0, i - w); j <= std::min(n - 1, i + w); ++j) adj[i].push_back(j);
  return adj;
}

GatParams make_gat_params(ParamCollection& pc, const std::string& prefix, int n_layers, int in_dim,
                          int heads, Rng& rng) {
  if (n_layers < 1) throw ConfigError("gat needs at least one layer");
  if (heads < 1 || in_dim % heads != 0)
    throw ConfigError("gat width must be divisible by the head count");
  GatParams p;
  p.in_dim = in_dim;
  double s = init_scale(in_dim);
  for (int l = 0; l < n_layers; ++l) {
    GatLayerParams lp;
    lp.average = (l == n_layers - 1);
    lp.heads = lp.average ? 1 : heads;
    lp.head_dim = lp.average ? in_dim : in_dim / heads;
    std::string base = prefix + ".l" + std::to_string(l);
    for (int k = 0; k < lp.heads; ++k) {
      std::string hb = base + ".h" + std::to_string(k);
      lp.w.push_back(&pc.add_uniform(hb + ".w", lp.head_dim, in_dim, rng, s));
      lp.a_self.push_back(&pc.add_uniform(hb + ".a_self", lp.head_dim, 1, rng, s));
      lp.a_nbr.push_back(&pc.add_uniform(hb + ".a_nbr", lp.head_dim, 1, rng, s));
    }
    p.layers.push_back(std::move(lp));
  }
  return p;
}

Var gat_forward(Tape& t, Var feats, const Adjacency& adj, const GatParams& p,
                std::vector<Matrix>* attn_out) {
  const int n = feats.cols();
  if (static_cast<int>(adj.size()) != n) throw ComputeError("gat_forward: adjacency size mismatch");
  for (int i = 0; i < n; ++i)
    if (adj[i].empty()) throw ComputeError("gat_forward: empty neighborhood at node " +
                                           std::to_string(i));
  // mask(j, i) = 0 when j may attend into i, else a large negative constant
  Matrix mask = Matrix::Constant(n, n, -1e30);
  for (int i = 0; i < n; ++i)
    for (int j : adj[i]) mask(j, i) = 0.0;
  Var mask_c = t.constant(mask);

  Var cur = feats;
  for (const auto& lp : p.layers) {
    std::vector<Var> head_outs;
    for (int k = 0; k < lp.heads; ++k) {
      Var z = t.matmul(t.param(*lp.w[k]), cur);  // head_dim x n
      Var s_self = t.matmul(t.transpose(t.param(*lp.a_self[k])), z);  // 1 x n
      Var s_nbr = t.matmul(t.transpose(t.param(*lp.a_nbr[k])), z);    // 1 x n
      // logits(j, i) = LeakyReLU(a_self . z_i + a_nbr . z_j)
      Var logits = t.leaky_relu(
          t.add(t.repeat_rows(s_self, n), t.repeat_cols(t.transpose(s_nbr), n)), p.neg_slope);
      Var attn = t.softmax_cols(t.add(logits, mask_c));
      if (attn_out) attn_out->push_back(attn.value());
      Var agg = t.matmul(z, attn);
      head_outs.push_back(lp.average ? agg : t.leaky_relu(agg, p.neg_slope));
    }
    if (lp.average) {
      Var sum = head_outs[0];
      for (std::size_t k = 1; k < head_outs.size(); ++k) sum = t.add(sum, head_outs[k]);
      cur = t.scale(sum, 1.0 / static_cast<double>(head_outs.size()));
    } else {
      cur = t.vstack(head_outs);
    }
  }
  return cur;
}

BiLstmParams make_bilstm_params(ParamCollection& pc, const std::string& prefix, int in_dim,
                                int hidden, Rng& rng) {
  BiLstmParams p;
  p.in_dim = in_dim;
  p.hidden = hidden;
  double sw = init_scale(in_dim);
  double su = init_scale(hidden);
  p.w_f = &pc.add_uniform(prefix + ".fwd.w", 4 * hidden, in_dim, rng, sw);
  p.u_f = &pc.add_uniform(prefix + ".fwd.u", 4 * hidden, hidden, rng, su);
  p.b_f = &pc.add(prefix + ".fwd.b", 4 * hidden, 1);
  p.w_b = &pc.add_uniform(prefix + ".bwd.w", 4 * hidden, in_dim, rng, sw);
  p.u_b = &pc.add_uniform(prefix + ".bwd.u", 4 * hidden, hidden, rng, su);
  p.b_b = &pc.add(prefix + ".bwd.b", 4 * hidden, 1);
  return p;
}

namespace {

std::vector<Var> lstm_direction(Tape& t, Var inputs, ad::Param& w, ad::Param& u, ad::Param& b,
                                int hidden, bool reverse) {
  const int n = inputs.cols();
  Var wx = t.matmul(t.param(w), inputs);  // 4h x n
  Var uu = t.param(u);
  Var bb = t.param(b);
  Var h = t.zeros(hidden, 1);
  Var c = t.zeros(hidden, 1);
  std::vector<Var> states(n);
  for (int step = 0; step < n; ++step) {
    int pos = reverse ? n - 1 - step : step;
    Var pre = t.add(t.add(t.cols(wx, pos, 1), t.matmul(uu, h)), bb);
    Var gi = t.sigmoid(t.rows(pre, 0, hidden));
    Var gf = t.sigmoid(t.rows(pre, hidden, hidden));
    Var gc = t.tanh(t.rows(pre, 2 * hidden, hidden));
    Var go = t.sigmoid(t.rows(pre, 3 * hidden, hidden));
    c = t.add(t.cmul(gf, c), t.cmul(gi, gc));
    h = t.cmul(go, t.tanh(c));
    states[pos] = h;
  }
  return states;
}

}  // namespace

Var birecurrent_forward(Tape& t, Var inputs, const BiLstmParams& p) {
  if (inputs.rows() != p.in_dim) throw ComputeError("birecurrent_forward: input dim mismatch");
  auto fwd = lstm_direction(t, inputs, *p.w_f, *p.u_f, *p.b_f, p.hidden, false);
  auto bwd = lstm_direction(t, inputs, *p.w_b, *p.u_b, *p.b_b, p.hidden, true);
  std::vector<Var> both;
  both.reserve(fwd.size());
  for (std::size_t i = 0; i < fwd.size(); ++i) both.push_back(t.vstack({fwd[i], bwd[i]}));
  return t.hstack(both);
}

SelfAttentionParams make_self_attention_params(ParamCollection& pc, const std::string& prefix,
                                               int in_dim, int attn_dim, int out_dim, Rng& rng) {
  SelfAttentionParams p;
  p.in_dim = in_dim;
  p.attn_dim = attn_dim;
  p.out_dim = out_dim;
  double s = init_scale(in_dim);
  p.w_q = &pc.add_uniform(prefix + ".wq", attn_dim, in_dim, rng, s);
  p.w_k = &pc.add_uniform(prefix + ".wk", attn_dim, in_dim, rng, s);
  p.w_v = &pc.add_uniform(prefix + ".wv", out_dim, in_dim, rng, s);
  return p;
}

Var self_attention(Tape& t, Var x, const SelfAttentionParams& p) {
  if (x.rows() != p.in_dim) throw ComputeError("self_attention: input dim mismatch");
  Var q = t.matmul(t.param(*p.w_q), x);  // attn_dim x n
  Var k = t.matmul(t.param(*p.w_k), x);
  Var v = t.matmul(t.param(*p.w_v), x);  // out_dim x n
  Var scores = t.scale(t.matmul(t.transpose(k), q), 1.0 / std::sqrt(double(p.attn_dim)));
  Var attn = t.softmax_cols(scores);  // column i: weights over keys for query i
  return t.matmul(v, attn);
}

EncoderParams make_encoder_params(ParamCollection& pc, const std::string& prefix, int emb_dim,
                                  int hidden, int attn_dim, int attn_out, Rng& rng) {
  EncoderParams p;
  p.lstm = make_bilstm_params(pc, prefix + ".lstm", emb_dim, hidden, rng);
  p.attn = make_self_attention_params(pc, prefix + ".attn", emb_dim, attn_dim, attn_out, rng);
  return p;
}

Var self_attentive_encode(Tape& t, Var word_embs, const EncoderParams& p) {
  Var recurrent = birecurrent_forward(t, word_embs, p.lstm);
  Var attended = self_attention(t, word_embs, p.attn);
  return t.vstack({recurrent, attended});
}

}  // namespace relanet::layers
