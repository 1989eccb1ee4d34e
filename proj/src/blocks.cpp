#include "ikit/blocks.hpp"

#include <cmath>

namespace ikit {

void BlockSpec::validate() const {
  if (layers < 1) throw ContractError("BlockSpec: layers must be >= 1");
  if (heads < 1) throw ContractError("BlockSpec: heads must be >= 1");
  if (model_width % heads != 0) {
    throw ContractError("BlockSpec: model width not divisible by heads");
  }
  if (input_dropout < 0.0 || input_dropout >= 1.0) {
    throw ContractError("BlockSpec: dropout must be in [0, 1)");
  }
}

std::string BlockSpec::kind_name() const {
  switch (kind) {
    case Kind::Informer: return "informer";
    case Kind::SigmaInformer: return "sigma-informer";
    case Kind::Transformer: return "transformer";
    case Kind::LinTransformer: return "lin-transformer";
    case Kind::NpFormer: return "np-former";
  }
  return "?";
}

BlockSpec::Kind BlockSpec::kind_from_name(const std::string& name) {
  if (name == "informer") return Kind::Informer;
  if (name == "sigma-informer") return Kind::SigmaInformer;
  if (name == "transformer") return Kind::Transformer;
  if (name == "lin-transformer") return Kind::LinTransformer;
  if (name == "np-former") return Kind::NpFormer;
  throw ContractError("unknown block kind: " + name);
}

namespace {

Matrix softmax_rows_mat(const Matrix& a) {
  Matrix s(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    Eigen::RowVectorXd e = (a.row(i).array() - a.row(i).maxCoeff()).exp();
    s.row(i) = e / e.sum();
  }
  return s;
}

}  // namespace

Matrix head_forward(BlockSpec::Kind kind, const Matrix& e_k, const Matrix& e_v,
                    const Matrix& e_q, const AlphaSpec& alpha) {
  if (e_k.rows() != e_v.rows() || e_k.cols() != e_q.cols()) {
    throw DimensionError("head_forward: embedding shapes inconsistent");
  }
  switch (kind) {
    case BlockSpec::Kind::Informer: {
      Matrix mixed = solve_psd_or_pinv(alpha.regularize(e_k * e_k.transpose()),
                                       e_v);
      return (e_q * e_k.transpose()) * mixed;
    }
    case BlockSpec::Kind::SigmaInformer: {
      Matrix mix = solve_psd_or_pinv(alpha.regularize(e_k * e_k.transpose()),
                                     Matrix::Identity(e_k.rows(), e_k.rows()));
      return softmax_rows_mat((e_q * e_k.transpose()) * mix) * e_v;
    }
    case BlockSpec::Kind::Transformer: {
      const double scale = 1.0 / std::sqrt(static_cast<double>(e_k.cols()));
      return softmax_rows_mat(scale * e_q * e_k.transpose()) * e_v;
    }
    case BlockSpec::Kind::LinTransformer:
      return (e_q * e_k.transpose()) * e_v;
    case BlockSpec::Kind::NpFormer:
      throw ContractError("head_forward: NP head has its own parameters, use NpHead");
  }
  throw Error("head_forward: unknown kind");
}

NpHead::NpHead(RngStream& rng, Index in_width, Index head_width,
               Index agg_hidden) {
  e_c_ = Mlp::make(rng, 2 * in_width, {agg_hidden, in_width});
  e_z_ = Mlp::make(rng, 2 * in_width, {head_width});
}

NodePtr NpHead::forward(Tape& t, const NodePtr& e_k, const NodePtr& e_v,
                        const NodePtr& e_q) const {
  NodePtr pairs = op_concat_cols(t, e_k, e_v);
  NodePtr agg = e_c_.forward(t, op_mean_rows(t, pairs));
  NodePtr tiled = op_repeat_rows(t, agg, e_q->value.rows());
  return e_z_.forward(t, op_concat_cols(t, e_q, tiled));
}

void NpHead::collect(ParamSet& ps, const std::string& prefix) const {
  e_c_.collect(ps, prefix + ".e_c");
  e_z_.collect(ps, prefix + ".e_z");
}

BlockLayer::BlockLayer(RngStream& rng, const BlockSpec& spec) : spec_(spec) {
  const Index w = spec.model_width;
  const Index hw = w / spec.heads;
  e_x_ = Linear::init(rng, w, w);
  for (int h = 0; h < spec.heads; ++h) {
    if (spec.kind == BlockSpec::Kind::NpFormer) {
      head_q_.push_back(Linear::init(rng, w, hw));
      head_k_.push_back(Linear::init(rng, w, hw));
      head_v_.push_back(Linear::init(rng, w, hw));
      np_heads_.push_back(
          std::make_unique<NpHead>(rng, hw, hw, spec.hidden_width));
    } else {
      head_k_.push_back(Linear::init(rng, w, hw));
      head_v_.push_back(Linear::init(rng, w, hw));
      head_q_.push_back(Linear::init(rng, w, hw));
      if (spec.kind == BlockSpec::Kind::Informer ||
          spec.kind == BlockSpec::Kind::SigmaInformer) {
        theta_sigma_.push_back(make_param(Matrix::Zero(1, 1)));
      }
    }
  }
  merge_ = Linear::init(rng, w, w);
  e_o_ = Mlp::make(rng, w, {spec.hidden_width, w});
  ln1_gain_ = make_param(Matrix::Ones(1, w));
  ln1_bias_ = make_param(Matrix::Zero(1, w));
  ln2_gain_ = make_param(Matrix::Ones(1, w));
  ln2_bias_ = make_param(Matrix::Zero(1, w));
}

NodePtr BlockLayer::head_mix(Tape& t, const NodePtr& e_k, const NodePtr& e_v,
                             const NodePtr& e_q, int head) const {
  switch (spec_.kind) {
    case BlockSpec::Kind::Informer:
    case BlockSpec::Kind::SigmaInformer: {
      NodePtr alpha = op_sigmoid(t, theta_sigma_[head]);
      NodePtr gram = op_matmul(t, e_k, op_transpose(t, e_k));
      NodePtr inv = op_inverse(t, op_convex_mix_identity(t, gram, alpha));
      NodePtr mix = op_matmul(t, op_matmul(t, e_q, op_transpose(t, e_k)), inv);
      if (spec_.kind == BlockSpec::Kind::SigmaInformer) {
        mix = op_softmax_rows(t, mix);
      }
      return op_matmul(t, mix, e_v);
    }
    case BlockSpec::Kind::Transformer: {
      const double scale =
          1.0 / std::sqrt(static_cast<double>(e_k->value.cols()));
      NodePtr logits =
          op_scale(t, op_matmul(t, e_q, op_transpose(t, e_k)), scale);
      return op_matmul(t, op_softmax_rows(t, logits), e_v);
    }
    case BlockSpec::Kind::LinTransformer:
      return op_matmul(t, op_matmul(t, e_q, op_transpose(t, e_k)), e_v);
    case BlockSpec::Kind::NpFormer:
      return np_heads_[head]->forward(t, e_k, e_v, e_q);
  }
  throw Error("head_mix: unknown kind");
}

NodePtr BlockLayer::forward(Tape& t, const NodePtr& x) const {
  NodePtr ex = op_relu(t, e_x_.forward(t, x));
  NodePtr concat;
  for (int h = 0; h < spec_.heads; ++h) {
    NodePtr e_k = head_k_[h].forward(t, ex);
    NodePtr e_v = head_v_[h].forward(t, ex);
    NodePtr e_q = head_q_[h].forward(t, ex);
    NodePtr out = head_mix(t, e_k, e_v, e_q, h);
    concat = concat ? op_concat_cols(t, concat, out) : out;
  }
  NodePtr ez = merge_.forward(t, concat);
  NodePtr o1 = op_add(t, ez, x);
  o1 = op_add(t, op_rowmul(t, op_layernorm_rows(t, o1), ln1_gain_), ln1_bias_);
  NodePtr o2 = op_add(t, e_o_.forward(t, o1), o1);
  o2 = op_add(t, op_rowmul(t, op_layernorm_rows(t, o2), ln2_gain_), ln2_bias_);
  return o2;
}

void BlockLayer::collect(ParamSet& ps, const std::string& prefix) const {
  e_x_.collect(ps, prefix + ".e_x");
  for (int h = 0; h < spec_.heads; ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    head_k_[h].collect(ps, hp + ".e_k");
    head_v_[h].collect(ps, hp + ".e_v");
    head_q_[h].collect(ps, hp + ".e_q");
    if (!theta_sigma_.empty()) ps.add(hp + ".theta_sigma", theta_sigma_[h]);
    if (!np_heads_.empty()) np_heads_[h]->collect(ps, hp + ".np");
  }
  merge_.collect(ps, prefix + ".merge");
  e_o_.collect(ps, prefix + ".e_o");
  ps.add(prefix + ".ln1.gain", ln1_gain_);
  ps.add(prefix + ".ln1.bias", ln1_bias_);
  ps.add(prefix + ".ln2.gain", ln2_gain_);
  ps.add(prefix + ".ln2.bias", ln2_bias_);
}

BlockModel::BlockModel(RngStream& rng, Index input_dim, const BlockSpec& spec)
    : spec_(spec) {
  spec_.validate();
  input_proj_ = Linear::init(rng, input_dim, spec.model_width);
  for (int l = 0; l < spec.layers; ++l) {
    layers_.push_back(std::make_unique<BlockLayer>(rng, spec_));
  }
  readout_ = Linear::init(rng, spec.model_width, 1);
}

NodePtr BlockModel::logits(Tape& t, const Matrix& x, bool train,
                           RngStream* dropout_rng) const {
  Matrix input = x;
  if (train && spec_.input_dropout > 0.0) {
    if (!dropout_rng) throw ContractError("BlockModel: dropout needs an rng");
    const double keep = 1.0 - spec_.input_dropout;
    for (Index i = 0; i < input.rows(); ++i) {
      for (Index j = 0; j < input.cols(); ++j) {
        input(i, j) = dropout_rng->next_uniform() < keep
                          ? input(i, j) / keep
                          : 0.0;
      }
    }
  }
  NodePtr h = input_proj_.forward(t, make_const(input));
  for (auto& layer : layers_) h = layer->forward(t, h);
  return op_transpose(t, readout_.forward(t, h));
}

ParamSet BlockModel::params() const {
  ParamSet ps;
  input_proj_.collect(ps, "input");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l]->collect(ps, "layer" + std::to_string(l));
  }
  readout_.collect(ps, "readout");
  return ps;
}

}  // namespace ikit
