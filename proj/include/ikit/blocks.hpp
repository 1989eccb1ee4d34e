#pragma once

#include <memory>
#include <string>

#include "ikit/kvq.hpp"
#include "ikit/nn.hpp"

namespace ikit {

struct BlockSpec {
  enum class Kind { Informer, SigmaInformer, Transformer, LinTransformer, NpFormer };
  Kind kind = Kind::SigmaInformer;
  int layers = 1;
  int heads = 4;
  Index model_width = 64;
  Index hidden_width = 128;
  double input_dropout = 0.2;

  void validate() const;
  std::string kind_name() const;
  static Kind kind_from_name(const std::string& name);
};

/// Per-head mixing on already-embedded keys/values/queries:
///   informer        E_Q E_K' [reg(E_K E_K')]^-1 E_V
///   sigma-informer  softmax(E_Q E_K' [reg(E_K E_K')]^-1) E_V
///   transformer     softmax(E_Q E_K' / sqrt(d_head)) E_V
///   lin-transformer E_Q E_K' E_V
/// reg() is the AlphaSpec regularizer (convex mixing for sigmoid mode).
Matrix head_forward(BlockSpec::Kind kind, const Matrix& e_k, const Matrix& e_v,
                    const Matrix& e_q, const AlphaSpec& alpha);

/// Neural-process head: mean over context of e_c([E_K_i; E_V_i]) is
/// concatenated to each query embedding and decoded by e_z.
class NpHead {
 public:
  NpHead(RngStream& rng, Index in_width, Index head_width, Index agg_hidden);
  NodePtr forward(Tape& t, const NodePtr& e_k, const NodePtr& e_v,
                  const NodePtr& e_q) const;
  void collect(ParamSet& ps, const std::string& prefix) const;

 private:
  Mlp e_c_;  // context aggregate embed
  Mlp e_z_;  // decoder to head width
};

/// One residual layer: heads over relu(e_x(X)), concat + merge, then
/// O1 = LN(E_Z + X), O2 = LN(e_o(O1) + O1). LayerNorm carries learnable
/// gain (init 1) and bias (init 0).
class BlockLayer {
 public:
  BlockLayer(RngStream& rng, const BlockSpec& spec);
  NodePtr forward(Tape& t, const NodePtr& x) const;
  void collect(ParamSet& ps, const std::string& prefix) const;
  NodePtr head_mix(Tape& t, const NodePtr& e_k, const NodePtr& e_v,
                   const NodePtr& e_q, int head) const;

 private:
  BlockSpec spec_;
  Linear e_x_;
  std::vector<Linear> head_k_, head_v_, head_q_;
  std::vector<NodePtr> theta_sigma_;      // informer kinds: alpha = sigmoid(theta)
  std::vector<std::unique_ptr<NpHead>> np_heads_;
  Linear merge_;
  Mlp e_o_;
  NodePtr ln1_gain_, ln1_bias_, ln2_gain_, ln2_bias_;
};

/// Stack of layers over a set of rows; emits one logit per input row.
class BlockModel {
 public:
  BlockModel(RngStream& rng, Index input_dim, const BlockSpec& spec);
  const BlockSpec& spec() const { return spec_; }
  /// Logits as a 1 x N row. Dropout draws from rng only when train is set.
  NodePtr logits(Tape& t, const Matrix& x, bool train = false,
                 RngStream* dropout_rng = nullptr) const;
  ParamSet params() const;

 private:
  BlockSpec spec_;
  Linear input_proj_;
  std::vector<std::unique_ptr<BlockLayer>> layers_;
  Linear readout_;
};

}  // namespace ikit
