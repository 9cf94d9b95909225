#pragma once

#include <array>
#include <string>
#include <vector>

#include "relanet/autodiff.hpp"
#include "relanet/hlg.hpp"
#include "relanet/rng.hpp"

namespace relanet::layers {

using ad::Matrix;
using ad::ParamCollection;
using ad::Tape;
using ad::Var;

// Relation-specific graph transformation over label embeddings. Embedding
// matrices are d x N with node id = column index; a graph may reference any
// subset of the columns (DM subgraphs keep their parent's ids).
struct HlgtParams {
  int n_layers = 0;
  int dim = 0;
  std::vector<ad::Param*> self_w;                              // per layer, d x d
  std::vector<std::array<ad::Param*, hlg::kNumRelations>> rel_w;  // per layer/relation
};

HlgtParams make_hlgt_params(ParamCollection& pc, const std::string& prefix, int n_layers, int dim,
                            Rng& rng);

// One layer: out_i = ReLU(W1 e_i + sum_r mean_{j in N_i^r} W1^r e_j).
// Columns of `embs` whose ids are absent from the graph still receive the
// self term; callers mask them out when that matters.
Var hlgt_layer(Tape& t, Var embs, const hlg::HeterogeneousLabelGraph& g, const HlgtParams& p,
               int layer);
Var hlgt_forward(Tape& t, Var embs, const hlg::HeterogeneousLabelGraph& g, const HlgtParams& p);

using Adjacency = std::vector<std::vector<int>>;

// Complete graph over n tokens, self-loops included.
Adjacency build_global_adjacency(int n);
// Window graph: token i connects to [i-w, i+w] clipped, self included.
Adjacency build_local_adjacency(int n, int w);

struct GatLayerParams {
  int heads = 0;
  int head_dim = 0;
  bool average = false;  // final layers average heads instead of concatenating
  std::vector<ad::Param*> w;      // per head, head_dim x in_dim
  std::vector<ad::Param*> a_self; // per head, head_dim x 1
  std::vector<ad::Param*> a_nbr;  // per head, head_dim x 1
};

struct GatParams {
  int in_dim = 0;
  double neg_slope = 0.2;
  std::vector<GatLayerParams> layers;
};

// Width-preserving stack: hidden layers concatenate `heads` heads of
// in_dim/heads each, the last layer averages full-width heads.
GatParams make_gat_params(ParamCollection& pc, const std::string& prefix, int n_layers, int in_dim,
                          int heads, Rng& rng);

// Multi-head attention aggregation over the adjacency. feats is d x n.
// When `attn_out` is given, every layer/head's n x n attention matrix is
// appended (column i = weights over node i's neighborhood).
Var gat_forward(Tape& t, Var feats, const Adjacency& adj, const GatParams& p,
                std::vector<Matrix>* attn_out = nullptr);

struct BiLstmParams {
  int in_dim = 0;
  int hidden = 0;
  // gate rows ordered [input; forget; cell; output]
  ad::Param *w_f = nullptr, *u_f = nullptr, *b_f = nullptr;
  ad::Param *w_b = nullptr, *u_b = nullptr, *b_b = nullptr;
};

BiLstmParams make_bilstm_params(ParamCollection& pc, const std::string& prefix, int in_dim,
                                int hidden, Rng& rng);

// inputs d_in x n -> 2*hidden x n (forward states stacked over backward).
Var birecurrent_forward(Tape& t, Var inputs, const BiLstmParams& p);

struct SelfAttentionParams {
  int in_dim = 0;
  int attn_dim = 0;
  int out_dim = 0;
  ad::Param *w_q = nullptr, *w_k = nullptr, *w_v = nullptr;
};

SelfAttentionParams make_self_attention_params(ParamCollection& pc, const std::string& prefix,
                                               int in_dim, int attn_dim, int out_dim, Rng& rng);

// Scaled dot-product attention over all token pairs; x is d_in x n.
Var self_attention(Tape& t, Var x, const SelfAttentionParams& p);

struct EncoderParams {
  BiLstmParams lstm;
  SelfAttentionParams attn;
};

EncoderParams make_encoder_params(ParamCollection& pc, const std::string& prefix, int emb_dim,
                                  int hidden, int attn_dim, int attn_out, Rng& rng);

// concat(BiLSTM(x), SelfAttention(x)) -> (2*hidden + attn_out) x n.
Var self_attentive_encode(Tape& t, Var word_embs, const EncoderParams& p);

}  // namespace relanet::layers
