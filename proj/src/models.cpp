#include "ikit/models.hpp"

#include <stdexcept>

namespace ikit {

std::string task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::Linreg2d: return "linreg2d";
    case TaskKind::Scaling: return "scaling";
    case TaskKind::Sine: return "sine";
    case TaskKind::Policy: return "policy";
    case TaskKind::Kabsch: return "kabsch";
    case TaskKind::Anomaly: return "anomaly";
  }
  return "?";
}

TaskKind task_kind_from_name(const std::string& name) {
  if (name == "linreg2d") return TaskKind::Linreg2d;
  if (name == "scaling") return TaskKind::Scaling;
  if (name == "sine") return TaskKind::Sine;
  if (name == "policy") return TaskKind::Policy;
  if (name == "kabsch") return TaskKind::Kabsch;
  if (name == "anomaly") return TaskKind::Anomaly;
  throw ContractError("unknown task kind: " + name);
}

// ---------------------------------------------------------------------------
// IntentionModule

IntentionModule::IntentionModule(RngStream& rng, Index k_in, Index v_in,
                                 Index q_in, Config cfg)
    : alpha_mode_(cfg.alpha.mode), softmax_mix_(cfg.softmax_mix) {
  e_k_ = Mlp::make(rng, k_in, cfg.ek);
  e_v_ = Mlp::make(rng, v_in, cfg.ev);
  e_q_ = Mlp::make(rng, q_in, cfg.eq);
  const Index w_cols = cfg.ev.empty() ? v_in : cfg.ev.back();
  e_w_ = Mlp::make(rng, w_cols, cfg.ew);
  if (alpha_mode_ == AlphaSpec::Mode::Fixed) {
    alpha_fixed_ = cfg.alpha.effective();
  } else {
    theta_ = make_param(Matrix::Constant(1, 1, cfg.alpha.value));
  }
}

NodePtr IntentionModule::regularized_sigma(Tape& t, const NodePtr& ek) const {
  NodePtr gram = op_matmul(t, op_transpose(t, ek), ek);
  switch (alpha_mode_) {
    case AlphaSpec::Mode::Fixed:
      return op_add_scaled_identity(t, gram,
                                    make_const(Matrix::Constant(1, 1, alpha_fixed_)));
    case AlphaSpec::Mode::Sigmoid:
      return op_convex_mix_identity(t, gram, op_sigmoid(t, theta_));
    case AlphaSpec::Mode::Softplus:
      return op_add_scaled_identity(t, gram, op_softplus(t, theta_));
  }
  throw Error("IntentionModule: bad alpha mode");
}

IntentionModule::Out IntentionModule::forward(Tape& t, const NodePtr& K,
                                              const NodePtr& V,
                                              const NodePtr& Q) const {
  NodePtr ek = e_k_.forward(t, K);
  NodePtr ev = e_v_.forward(t, V);
  NodePtr eq = e_q_.forward(t, Q);
  NodePtr inv = op_inverse(t, regularized_sigma(t, ek));
  NodePtr w_raw = op_matmul(t, inv, op_matmul(t, op_transpose(t, ek), ev));
  NodePtr w = e_w_.forward(t, w_raw);
  NodePtr pred;
  if (softmax_mix_) {
    NodePtr mix = op_matmul(t, op_matmul(t, eq, inv), op_transpose(t, ek));
    pred = op_matmul(t, op_softmax_rows(t, mix), ev);
  } else {
    pred = op_matmul(t, eq, w);
  }
  return {pred, w};
}

IntentionModule::Out IntentionModule::forward(Tape& t, const KvqBatch& b) const {
  b.validate();
  return forward(t, make_const(b.K), make_const(b.V), make_const(b.Q));
}

std::pair<Matrix, Matrix> IntentionModule::forward_values(const KvqBatch& b) const {
  Tape t;
  Out o = forward(t, b);
  return {o.predictions->value, o.weights->value};
}

void IntentionModule::collect(ParamSet& ps, const std::string& prefix) const {
  e_k_.collect(ps, prefix + ".e_k");
  e_v_.collect(ps, prefix + ".e_v");
  e_q_.collect(ps, prefix + ".e_q");
  e_w_.collect(ps, prefix + ".e_w");
  if (theta_) ps.add(prefix + ".alpha_theta", theta_);
}

// ---------------------------------------------------------------------------
// MhaModule

MhaModule::MhaModule(RngStream& rng, Index kq_in, Index v_in, int heads,
                     Index head_width, Index out_width, bool softmax)
    : softmax_(softmax) {
  if (heads < 1) throw ContractError("MhaModule: heads must be >= 1");
  for (int h = 0; h < heads; ++h) {
    wk_.push_back(Linear::init(rng, kq_in, head_width));
    wv_.push_back(Linear::init(rng, v_in, head_width));
    wq_.push_back(Linear::init(rng, kq_in, head_width));
  }
  merge_ = Linear::init(rng, heads * head_width, out_width);
}

NodePtr MhaModule::forward(Tape& t, const NodePtr& ek, const NodePtr& ev,
                           const NodePtr& eq) const {
  NodePtr concat;
  for (std::size_t h = 0; h < wk_.size(); ++h) {
    NodePtr k = wk_[h].forward(t, ek);
    NodePtr v = wv_[h].forward(t, ev);
    NodePtr q = wq_[h].forward(t, eq);
    NodePtr logits = op_matmul(t, q, op_transpose(t, k));
    NodePtr out;
    if (softmax_) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(k->value.cols()));
      out = op_matmul(t, op_softmax_rows(t, op_scale(t, logits, scale)), v);
    } else {
      out = op_matmul(t, logits, v);
    }
    concat = concat ? op_concat_cols(t, concat, out) : out;
  }
  return merge_.forward(t, concat);
}

void MhaModule::collect(ParamSet& ps, const std::string& prefix) const {
  for (std::size_t h = 0; h < wk_.size(); ++h) {
    const std::string hp = prefix + ".h" + std::to_string(h);
    wk_[h].collect(ps, hp + ".wk");
    wv_[h].collect(ps, hp + ".wv");
    wq_[h].collect(ps, hp + ".wq");
  }
  merge_.collect(ps, prefix + ".merge");
}

// ---------------------------------------------------------------------------
// Task model wirings

namespace {

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix m(a.rows(), a.cols() + b.cols());
  m << a, b;
  return m;
}

Matrix hcat3(const Matrix& a, const Matrix& b, const Matrix& c) {
  Matrix m(a.rows(), a.cols() + b.cols() + c.cols());
  m << a, b, c;
  return m;
}

/// Sine / Kabsch style: row-wise encoders, a KVQ core, optional decoder.
class KvqRegModel final : public TaskModel {
 public:
  enum class Core { Intention, SigmaIntention, Attention, LinearAttention, Np };

  struct Cfg {
    Core core = Core::Intention;
    bool pair_context = false;  // context encoder input [K_i; V_i] vs K_i
    bool shared_kq = false;     // one encoder shared by keys and queries
    bool raw_values = false;    // E_V = V (no value encoder)
    double input_scale = 1.0;   // key/query normalization at the model edge
    std::vector<Index> enc;     // context/query encoder sizes
    std::vector<Index> dec;     // row decoder sizes (empty = none)
    AlphaSpec alpha = AlphaSpec::softplus(-2.0);
    int heads = 4;
  };

  KvqRegModel(RngStream& rng, Index d_in, Index k_in, Cfg cfg, std::string name)
      : cfg_(cfg), name_(std::move(name)) {
    const Index ctx_in = cfg.pair_context ? d_in + k_in : d_in;
    enc_k_ = Mlp::make(rng, ctx_in, cfg.enc);
    if (!cfg.shared_kq && cfg.core != Core::Np) {
      enc_q_ = Mlp::make(rng, d_in, cfg.enc);
    }
    const Index ew = cfg.enc.empty() ? ctx_in : cfg.enc.back();
    if (!cfg.raw_values && cfg.core != Core::Np) {
      enc_v_ = Mlp::make(rng, ctx_in, cfg.enc);
    }
    if (cfg.core == Core::Intention || cfg.core == Core::SigmaIntention) {
      if (cfg.alpha.mode != AlphaSpec::Mode::Fixed) {
        theta_ = make_param(Matrix::Constant(1, 1, cfg.alpha.value));
      }
    }
    if (cfg.core == Core::Attention || cfg.core == Core::LinearAttention) {
      const Index hw = std::max<Index>(1, ew / cfg.heads);
      const Index vw = cfg.raw_values ? k_in : ew;
      mha_ = std::make_unique<MhaModule>(rng, ew, vw, cfg.heads, hw, ew,
                                         cfg.core == Core::Attention);
    }
    if (!cfg.dec.empty()) {
      Index dec_in;
      if (cfg.core == Core::Np) {
        dec_in = d_in + ew;  // raw query next to the mean aggregate
      } else if (cfg.core == Core::Intention || cfg.core == Core::SigmaIntention) {
        dec_in = cfg.raw_values ? k_in : ew;
      } else {
        dec_in = ew;
      }
      dec_ = Mlp::make(rng, dec_in, cfg.dec);
    }
  }

  NodePtr forward(Tape& t, const TaskInstance& inst, bool /*train*/,
                  RngStream* /*rng*/) const override {
    const Matrix K = inst.kvq.K * cfg_.input_scale;
    const Matrix& V = inst.kvq.V;
    const Matrix Q = inst.kvq.Q * cfg_.input_scale;
    NodePtr ctx = make_const(cfg_.pair_context ? hcat(K, V) : K);
    NodePtr q_raw = make_const(Q);
    NodePtr ek = enc_k_.forward(t, ctx);

    if (cfg_.core == Core::Np) {
      NodePtr agg = op_mean_rows(t, ek);
      NodePtr tiled = op_repeat_rows(t, agg, Q.rows());
      return dec_.forward(t, op_concat_cols(t, q_raw, tiled));
    }

    NodePtr eq = cfg_.shared_kq ? enc_k_.forward(t, q_raw)
                                : enc_q_.forward(t, q_raw);
    NodePtr ev = cfg_.raw_values ? make_const(V) : enc_v_.forward(t, ctx);

    NodePtr out;
    if (cfg_.core == Core::Attention || cfg_.core == Core::LinearAttention) {
      out = mha_->forward(t, ek, ev, eq);
    } else {
      NodePtr gram = op_matmul(t, op_transpose(t, ek), ek);
      NodePtr sigma;
      switch (cfg_.alpha.mode) {
        case AlphaSpec::Mode::Fixed:
          sigma = op_add_scaled_identity(
              t, gram, make_const(Matrix::Constant(1, 1, cfg_.alpha.effective())));
          break;
        case AlphaSpec::Mode::Sigmoid:
          sigma = op_convex_mix_identity(t, gram, op_sigmoid(t, theta_));
          break;
        case AlphaSpec::Mode::Softplus:
          sigma = op_add_scaled_identity(t, gram, op_softplus(t, theta_));
          break;
      }
      NodePtr inv = op_inverse(t, sigma);
      if (cfg_.core == Core::SigmaIntention) {
        NodePtr mix = op_matmul(t, op_matmul(t, eq, inv), op_transpose(t, ek));
        out = op_matmul(t, op_softmax_rows(t, mix), ev);
      } else {
        NodePtr w = op_matmul(t, inv, op_matmul(t, op_transpose(t, ek), ev));
        out = op_matmul(t, eq, w);
      }
    }
    return dec_.identity() ? out : dec_.forward(t, out);
  }

  ParamSet params() const override {
    ParamSet ps;
    enc_k_.collect(ps, "enc_k");
    if (!cfg_.shared_kq && cfg_.core != Core::Np) enc_q_.collect(ps, "enc_q");
    if (!cfg_.raw_values && cfg_.core != Core::Np) enc_v_.collect(ps, "enc_v");
    if (theta_) ps.add("alpha_theta", theta_);
    if (mha_) mha_->collect(ps, "mha");
    dec_.collect(ps, "dec");
    return ps;
  }

  std::string name() const override { return name_; }

 private:
  Cfg cfg_;
  std::string name_;
  Mlp enc_k_, enc_q_, enc_v_, dec_;
  NodePtr theta_;
  std::unique_ptr<MhaModule> mha_;
};

/// Policy / scaling style: the module infers the mapping w(K, V) itself;
/// predictions come from decoding the flattened weights (queries unused).
class WeightOutModel final : public TaskModel {
 public:
  enum class Core { Intention, Np, Attention };

  struct Cfg {
    Core core = Core::Intention;
    bool raw_keys = false;       // E_K is the raw context (policy wiring)
    bool include_q = false;      // context rows also carry Q (policy: K=V=Q)
    Index ctx_rows = 5;          // fixed context size for this task
    std::vector<Index> ek, ev, dec;
    AlphaSpec alpha = AlphaSpec::softplus(-2.0);
    int heads = 4;
    Activation act = Activation::Relu;
  };

  WeightOutModel(RngStream& rng, Index d_in, Index k_in, Cfg cfg,
                 std::string name)
      : cfg_(cfg), name_(std::move(name)) {
    const Index ctx_in = cfg.include_q ? 2 * d_in + k_in : d_in + k_in;
    if (!cfg.raw_keys) e_k_ = Mlp::make(rng, ctx_in, cfg.ek, cfg.act);
    e_v_ = Mlp::make(rng, ctx_in, cfg.ev, cfg.act);
    const Index kw = cfg.raw_keys ? ctx_in : cfg.ek.back();
    const Index vw = cfg.ev.empty() ? ctx_in : cfg.ev.back();
    if (cfg.core == Core::Intention) {
      if (cfg.alpha.mode != AlphaSpec::Mode::Fixed) {
        theta_ = make_param(Matrix::Constant(1, 1, cfg.alpha.value));
      }
      dec_ = Mlp::make(rng, kw * vw, cfg.dec, cfg.act);
    } else if (cfg.core == Core::Np) {
      dec_ = Mlp::make(rng, vw, cfg.dec, cfg.act);
    } else {
      const Index hw = std::max<Index>(1, kw / cfg.heads);
      mha_ = std::make_unique<MhaModule>(rng, kw, vw, cfg.heads, hw, vw, true);
      dec_ = Mlp::make(rng, cfg.ctx_rows * vw, cfg.dec, cfg.act);
    }
  }

  NodePtr forward(Tape& t, const TaskInstance& inst, bool /*train*/,
                  RngStream* /*rng*/) const override {
    const Matrix ctx = cfg_.include_q
                           ? hcat3(inst.kvq.K, inst.kvq.V, inst.kvq.Q)
                           : hcat(inst.kvq.K, inst.kvq.V);
    NodePtr ctx_node = make_const(ctx);
    NodePtr ek = cfg_.raw_keys ? ctx_node : e_k_.forward(t, ctx_node);
    NodePtr ev = e_v_.forward(t, ctx_node);

    if (cfg_.core == Core::Np) {
      return dec_.forward(t, op_mean_rows(t, ev));
    }
    if (cfg_.core == Core::Attention) {
      NodePtr out = mha_->forward(t, ek, ev, ek);
      return dec_.forward(t, op_flatten_to_row(t, out));
    }
    NodePtr gram = op_matmul(t, op_transpose(t, ek), ek);
    NodePtr sigma;
    switch (cfg_.alpha.mode) {
      case AlphaSpec::Mode::Fixed:
        sigma = op_add_scaled_identity(
            t, gram, make_const(Matrix::Constant(1, 1, cfg_.alpha.effective())));
        break;
      case AlphaSpec::Mode::Sigmoid:
        sigma = op_convex_mix_identity(t, gram, op_sigmoid(t, theta_));
        break;
      case AlphaSpec::Mode::Softplus:
        sigma = op_add_scaled_identity(t, gram, op_softplus(t, theta_));
        break;
    }
    NodePtr w = op_matmul(t, op_inverse(t, sigma),
                          op_matmul(t, op_transpose(t, ek), ev));
    return dec_.forward(t, op_flatten_to_row(t, w));
  }

  ParamSet params() const override {
    ParamSet ps;
    if (!cfg_.raw_keys) e_k_.collect(ps, "e_k");
    e_v_.collect(ps, "e_v");
    if (theta_) ps.add("alpha_theta", theta_);
    if (mha_) mha_->collect(ps, "mha");
    dec_.collect(ps, "dec");
    return ps;
  }

  std::string name() const override { return name_; }

 private:
  Cfg cfg_;
  std::string name_;
  Mlp e_k_, e_v_, dec_;
  NodePtr theta_;
  std::unique_ptr<MhaModule> mha_;
};

/// Flattened-input MLP baseline.
class FlatMlpModel final : public TaskModel {
 public:
  struct Cfg {
    bool include_q = true;
    std::vector<Index> sizes;
    Index out_rows = 1, out_cols = 1;
    Activation act = Activation::Relu;
  };

  FlatMlpModel(RngStream& rng, Index flat_in, Cfg cfg, std::string name)
      : cfg_(cfg), name_(std::move(name)) {
    mlp_ = Mlp::make(rng, flat_in, cfg.sizes, cfg.act);
  }

  NodePtr forward(Tape& t, const TaskInstance& inst, bool /*train*/,
                  RngStream* /*rng*/) const override {
    const Matrix in = cfg_.include_q
                          ? hcat3(inst.kvq.K, inst.kvq.V, inst.kvq.Q)
                          : hcat(inst.kvq.K, inst.kvq.V);
    NodePtr flat = op_flatten_to_row(t, make_const(in));
    NodePtr out = mlp_.forward(t, flat);
    if (cfg_.out_rows > 1) {
      out = op_reshape_from_row(t, out, cfg_.out_rows, cfg_.out_cols);
    }
    return out;
  }

  ParamSet params() const override {
    ParamSet ps;
    mlp_.collect(ps, "mlp");
    return ps;
  }

  std::string name() const override { return name_; }

 private:
  Cfg cfg_;
  std::string name_;
  Mlp mlp_;
};

class BlockTaskModel final : public TaskModel {
 public:
  BlockTaskModel(RngStream& rng, Index input_dim, const BlockSpec& spec)
      : model_(rng, input_dim, spec),
        name_(spec.kind_name() + "-" + std::to_string(spec.layers) + "l") {}

  NodePtr forward(Tape& t, const TaskInstance& inst, bool train,
                  RngStream* rng) const override {
    return model_.logits(t, inst.kvq.K, train, rng);
  }

  ParamSet params() const override { return model_.params(); }
  std::string name() const override { return name_; }

 private:
  BlockModel model_;
  std::string name_;
};

std::vector<Index> or_default(const std::vector<Index>& widths,
                              std::vector<Index> def) {
  return widths.empty() ? def : widths;
}

}  // namespace

std::unique_ptr<TaskModel> make_task_model(TaskKind task,
                                           const ModuleSpec& spec,
                                           Index input_dim, RngStream& rng) {
  const std::string& kind = spec.kind;
  switch (task) {
    case TaskKind::Sine: {
      auto enc = or_default(spec.widths, {128, 128});
      const Index ew = enc.back();
      const double scale = 1.0 / 6.0;  // inputs live on [-6, 6)
      if (kind == "intention" || kind == "sigma-intention") {
        KvqRegModel::Cfg cfg;
        cfg.core = kind == "intention" ? KvqRegModel::Core::Intention
                                       : KvqRegModel::Core::SigmaIntention;
        cfg.shared_kq = true;
        cfg.raw_values = true;
        cfg.input_scale = scale;
        cfg.enc = enc;
        cfg.alpha = spec.alpha;
        return std::make_unique<KvqRegModel>(rng, 1, 1, cfg, kind);
      }
      if (kind == "attention" || kind == "linear-attention") {
        KvqRegModel::Cfg cfg;
        cfg.core = kind == "attention" ? KvqRegModel::Core::Attention
                                       : KvqRegModel::Core::LinearAttention;
        cfg.shared_kq = true;
        cfg.input_scale = scale;
        cfg.enc = enc;
        cfg.dec = {ew, 1};
        cfg.heads = spec.heads;
        return std::make_unique<KvqRegModel>(rng, 1, 1, cfg, kind);
      }
      if (kind == "np") {
        KvqRegModel::Cfg cfg;
        cfg.core = KvqRegModel::Core::Np;
        cfg.pair_context = true;
        cfg.input_scale = scale;
        cfg.enc = enc;
        cfg.dec = {ew, ew, 1};
        return std::make_unique<KvqRegModel>(rng, 1, 1, cfg, kind);
      }
      break;
    }
    case TaskKind::Kabsch: {
      auto enc = or_default(spec.widths, {64, 64});
      const Index ew = enc.back();
      if (kind == "intention" || kind == "sigma-intention") {
        KvqRegModel::Cfg cfg;
        cfg.core = kind == "intention" ? KvqRegModel::Core::Intention
                                       : KvqRegModel::Core::SigmaIntention;
        cfg.pair_context = true;
        cfg.enc = enc;
        cfg.dec = {ew, 2};
        cfg.alpha = spec.alpha;
        return std::make_unique<KvqRegModel>(rng, 2, 2, cfg, kind);
      }
      if (kind == "attention" || kind == "linear-attention") {
        KvqRegModel::Cfg cfg;
        cfg.core = kind == "attention" ? KvqRegModel::Core::Attention
                                       : KvqRegModel::Core::LinearAttention;
        cfg.pair_context = true;
        cfg.enc = enc;
        cfg.dec = {ew, 2};
        cfg.heads = spec.heads;
        return std::make_unique<KvqRegModel>(rng, 2, 2, cfg, kind);
      }
      if (kind == "np") {
        KvqRegModel::Cfg cfg;
        cfg.core = KvqRegModel::Core::Np;
        cfg.pair_context = true;
        cfg.enc = enc;
        cfg.dec = {ew, ew, 2};
        return std::make_unique<KvqRegModel>(rng, 2, 2, cfg, kind);
      }
      if (kind == "mlp") {
        FlatMlpModel::Cfg cfg;
        cfg.include_q = true;
        cfg.sizes = or_default(spec.widths, {128, 128, 128, 10});
        cfg.out_rows = 5;
        cfg.out_cols = 2;
        return std::make_unique<FlatMlpModel>(rng, 30, cfg, kind);
      }
      break;
    }
    case TaskKind::Policy: {
      if (kind == "intention") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Intention;
        cfg.raw_keys = true;
        cfg.include_q = true;
        cfg.ev = or_default(spec.widths, {64, 64});
        cfg.dec = {64, 2};
        cfg.alpha = spec.alpha;
        return std::make_unique<WeightOutModel>(rng, 3, 3, cfg, kind);
      }
      if (kind == "np") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Np;
        cfg.include_q = true;
        cfg.ev = or_default(spec.widths, {64, 64});
        cfg.dec = {64, 2};
        return std::make_unique<WeightOutModel>(rng, 3, 3, cfg, kind);
      }
      if (kind == "attention") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Attention;
        cfg.raw_keys = true;
        cfg.include_q = true;
        cfg.ev = or_default(spec.widths, {64, 64});
        cfg.dec = {64, 2};
        cfg.heads = spec.heads;
        return std::make_unique<WeightOutModel>(rng, 3, 3, cfg, kind);
      }
      if (kind == "mlp") {
        FlatMlpModel::Cfg cfg;
        cfg.include_q = true;
        cfg.sizes = or_default(spec.widths, {128, 128, 128, 2});
        return std::make_unique<FlatMlpModel>(rng, 45, cfg, kind);
      }
      break;
    }
    case TaskKind::Scaling: {
      const Index d = input_dim;
      const Index s = spec.widths.empty() ? 16 : spec.widths.front();
      if (kind == "intention") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Intention;
        cfg.ek = {s, s};
        cfg.ev = {s, s};
        cfg.dec = {s, d};
        cfg.alpha = spec.alpha;
        cfg.ctx_rows = 10;
        return std::make_unique<WeightOutModel>(rng, d, 1, cfg, kind);
      }
      if (kind == "np") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Np;
        cfg.ev = {s, s};
        cfg.dec = {s, s, s, d};
        cfg.ctx_rows = 10;
        return std::make_unique<WeightOutModel>(rng, d, 1, cfg, kind);
      }
      if (kind == "attention") {
        WeightOutModel::Cfg cfg;
        cfg.core = WeightOutModel::Core::Attention;
        cfg.ek = {s};
        cfg.ev = {s};
        cfg.dec = {s, d};
        cfg.heads = spec.heads;
        cfg.act = Activation::LeakyRelu;
        cfg.ctx_rows = 10;
        return std::make_unique<WeightOutModel>(rng, d, 1, cfg, kind);
      }
      if (kind == "mlp") {
        FlatMlpModel::Cfg cfg;
        cfg.include_q = false;
        cfg.sizes = {s, s, s, d};
        return std::make_unique<FlatMlpModel>(rng, 10 * (d + 1), cfg, kind);
      }
      break;
    }
    case TaskKind::Linreg2d:
    case TaskKind::Anomaly:
      throw ContractError("make_task_model: " + task_kind_name(task) +
                          " does not take a ModuleSpec model");
  }
  throw ContractError("make_task_model: no wiring for model '" + kind +
                      "' on task " + task_kind_name(task));
}

std::unique_ptr<TaskModel> make_block_task_model(const BlockSpec& spec,
                                                 Index input_dim,
                                                 RngStream& rng) {
  return std::make_unique<BlockTaskModel>(rng, input_dim, spec);
}

}  // namespace ikit
