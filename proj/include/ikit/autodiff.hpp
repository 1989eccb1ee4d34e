#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ikit/linalg.hpp"

namespace ikit {

/// One value in the computation graph. Leaves (parameters, constants) are
/// created with make_param/make_const and live across training steps;
/// interior nodes are recorded on a Tape during a forward pass.
struct Node {
  Matrix value;
  Matrix grad;  // same shape, zero-initialized
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's upstream gradient contribution into parent grads.
  std::function<void(const Matrix&)> backward_rule;

  explicit Node(Matrix v)
      : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
};

using NodePtr = std::shared_ptr<Node>;

NodePtr make_param(Matrix v);
NodePtr make_const(Matrix v);

/// Ordered record of one forward pass. backward() walks it in reverse
/// creation order; leaf gradients accumulate across calls until zeroed.
class Tape {
 public:
  NodePtr record(Matrix value, std::vector<NodePtr> parents,
                 std::function<void(const Matrix&)> rule);
  void backward(const NodePtr& loss);
  void clear();
  std::size_t size() const { return order_.size(); }

 private:
  std::vector<NodePtr> order_;
};

void zero_grad(const std::vector<NodePtr>& params);

NodePtr op_matmul(Tape& t, const NodePtr& a, const NodePtr& b);
/// Elementwise add; b may also be a 1 x cols row vector, broadcast over rows.
NodePtr op_add(Tape& t, const NodePtr& a, const NodePtr& b);
NodePtr op_transpose(Tape& t, const NodePtr& a);
NodePtr op_relu(Tape& t, const NodePtr& a);
NodePtr op_leaky_relu(Tape& t, const NodePtr& a, double tau);
NodePtr op_softmax_rows(Tape& t, const NodePtr& a);
NodePtr op_layernorm_rows(Tape& t, const NodePtr& a, double eps = 1e-5);
NodePtr op_mean_rows(Tape& t, const NodePtr& a);
NodePtr op_concat_cols(Tape& t, const NodePtr& a, const NodePtr& b);
NodePtr op_scale(Tape& t, const NodePtr& a, double c);
/// Elementwise product with a constant matrix (dropout masks etc.).
NodePtr op_cmul(Tape& t, const NodePtr& a, const Matrix& m);
/// Per-column scale by a 1 x cols node (LayerNorm gain).
NodePtr op_rowmul(Tape& t, const NodePtr& a, const NodePtr& g);
NodePtr op_sigmoid(Tape& t, const NodePtr& a);
NodePtr op_softplus(Tape& t, const NodePtr& a);
NodePtr op_sum(Tape& t, const NodePtr& a);
/// Stacks `times` copies of a 1 x cols row (NP aggregate broadcast).
NodePtr op_repeat_rows(Tape& t, const NodePtr& a, Index times);
/// Reshapes to a single 1 x (rows*cols) row, row-major.
NodePtr op_flatten_to_row(Tape& t, const NodePtr& a);
/// Inverse of op_flatten_to_row: 1 x (rows*cols) row into rows x cols.
NodePtr op_reshape_from_row(Tape& t, const NodePtr& a, Index rows, Index cols);

/// a + s I with s a 1x1 node (ridge term on a Gram matrix).
NodePtr op_add_scaled_identity(Tape& t, const NodePtr& a, const NodePtr& s);
/// (1 - s) a + s I with s a 1x1 node (convex covariance mixing).
NodePtr op_convex_mix_identity(Tape& t, const NodePtr& a, const NodePtr& s);
/// s * a with s a 1x1 node.
NodePtr op_scale_node(Tape& t, const NodePtr& a, const NodePtr& s);

/// Matrix inverse with Moore-Penrose fallback for singular input; the
/// backward rule is -inv' upstream inv' using the same (pseudo)inverse as
/// the forward pass.
NodePtr op_inverse(Tape& t, const NodePtr& a);

NodePtr loss_mse(Tape& t, const NodePtr& pred, const Matrix& target);
NodePtr loss_softmax_xent(Tape& t, const NodePtr& logits,
                          const std::vector<int>& labels);

}  // namespace ikit
