#pragma once

#include <memory>
#include <string>

#include "ikit/blocks.hpp"
#include "ikit/kvq.hpp"
#include "ikit/nn.hpp"

namespace ikit {

enum class TaskKind { Linreg2d, Scaling, Sine, Policy, Kabsch, Anomaly };

std::string task_kind_name(TaskKind k);
TaskKind task_kind_from_name(const std::string& name);

/// One sampled problem. `target` is what the model must output for
/// regression tasks (query predictions, a weight vector, ...); `label`
/// is the outlier index for classification tasks.
struct TaskInstance {
  KvqBatch kvq;
  Matrix target;
  int label = -1;
};

/// Declarative description of a trainable KVQ module.
struct ModuleSpec {
  std::string kind = "intention";  // intention | sigma-intention | attention |
                                   // linear-attention | np | mlp
  AlphaSpec alpha = AlphaSpec::softplus(-2.0);
  KernelSpec kernel = KernelSpec::linear();
  int heads = 1;
  std::vector<Index> widths;  // latent sizes; task wiring fills defaults
};

/// The trainable Intention module: predictions E_Q e_w(w) together with
/// the inferred mapping w = [reg(E_K'E_K)]^-1 E_K' E_V itself. Any
/// embedding with an empty size list is the identity.
class IntentionModule {
 public:
  struct Config {
    std::vector<Index> ek, ev, eq, ew;
    AlphaSpec alpha = AlphaSpec::fixed(0.0);
    bool softmax_mix = false;  // sigma-intention variant
  };

  IntentionModule(RngStream& rng, Index k_in, Index v_in, Index q_in,
                  Config cfg);

  struct Out {
    NodePtr predictions;
    NodePtr weights;
  };
  Out forward(Tape& t, const NodePtr& K, const NodePtr& V,
              const NodePtr& Q) const;
  Out forward(Tape& t, const KvqBatch& b) const;
  /// Value-level convenience on a throwaway tape.
  std::pair<Matrix, Matrix> forward_values(const KvqBatch& b) const;

  void collect(ParamSet& ps, const std::string& prefix) const;
  NodePtr regularized_sigma(Tape& t, const NodePtr& ek) const;

 private:
  Mlp e_k_, e_v_, e_q_, e_w_;
  AlphaSpec::Mode alpha_mode_;
  double alpha_fixed_ = 0.0;
  NodePtr theta_;  // learnable alpha parameter when not fixed
  bool softmax_mix_ = false;
};

/// Multi-head attention with per-head projections; softmax optional
/// (off = linear attention heads).
class MhaModule {
 public:
  MhaModule(RngStream& rng, Index kq_in, Index v_in, int heads,
            Index head_width, Index out_width, bool softmax = true);
  NodePtr forward(Tape& t, const NodePtr& ek, const NodePtr& ev,
                  const NodePtr& eq) const;
  void collect(ParamSet& ps, const std::string& prefix) const;

 private:
  std::vector<Linear> wk_, wv_, wq_;
  Linear merge_;
  bool softmax_;
};

/// A model wired for one task family; forward output matches the shape the
/// trainer compares against (targets for regression, 1 x N logits for
/// classification).
class TaskModel {
 public:
  virtual ~TaskModel() = default;
  virtual NodePtr forward(Tape& t, const TaskInstance& inst, bool train,
                          RngStream* rng) const = 0;
  virtual ParamSet params() const = 0;
  virtual std::string name() const = 0;
};

std::unique_ptr<TaskModel> make_task_model(TaskKind task,
                                           const ModuleSpec& spec,
                                           Index input_dim, RngStream& rng);

std::unique_ptr<TaskModel> make_block_task_model(const BlockSpec& spec,
                                                 Index input_dim,
                                                 RngStream& rng);

}  // namespace ikit
