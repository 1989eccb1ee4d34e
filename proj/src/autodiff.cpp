#include "ikit/autodiff.hpp"

#include <cmath>

namespace ikit {

NodePtr make_param(Matrix v) { return std::make_shared<Node>(std::move(v)); }
NodePtr make_const(Matrix v) { return std::make_shared<Node>(std::move(v)); }

NodePtr Tape::record(Matrix value, std::vector<NodePtr> parents,
                     std::function<void(const Matrix&)> rule) {
  ensure_finite(value, "autodiff op");
  auto n = std::make_shared<Node>(std::move(value));
  n->parents = std::move(parents);
  n->backward_rule = std::move(rule);
  order_.push_back(n);
  return n;
}

void Tape::backward(const NodePtr& loss) {
  if (loss->value.rows() != 1 || loss->value.cols() != 1) {
    throw ContractError("backward: loss must be 1x1");
  }
  // Interior grads belong to this pass only; leaf grads accumulate.
  for (auto& n : order_) n->grad.setZero();
  loss->grad(0, 0) = 1.0;
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    if ((*it)->backward_rule) (*it)->backward_rule((*it)->grad);
  }
}

void Tape::clear() { order_.clear(); }

void zero_grad(const std::vector<NodePtr>& params) {
  for (auto& p : params) p->grad.setZero();
}

namespace {

void check_same_shape(const NodePtr& a, const NodePtr& b, const char* op) {
  if (a->value.rows() != b->value.rows() ||
      a->value.cols() != b->value.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch");
  }
}

void check_scalar(const NodePtr& s, const char* op) {
  if (s->value.rows() != 1 || s->value.cols() != 1) {
    throw ContractError(std::string(op) + ": scale must be 1x1");
  }
}

}  // namespace

NodePtr op_matmul(Tape& t, const NodePtr& a, const NodePtr& b) {
  if (a->value.cols() != b->value.rows()) {
    throw DimensionError("op_matmul: shape mismatch");
  }
  return t.record(a->value * b->value, {a, b}, [a, b](const Matrix& up) {
    a->grad.noalias() += up * b->value.transpose();
    b->grad.noalias() += a->value.transpose() * up;
  });
}

NodePtr op_add(Tape& t, const NodePtr& a, const NodePtr& b) {
  const bool broadcast =
      b->value.rows() == 1 && a->value.cols() == b->value.cols() &&
      a->value.rows() != 1;
  if (!broadcast) check_same_shape(a, b, "op_add");
  Matrix v = broadcast ? Matrix(a->value.rowwise() + b->value.row(0))
                       : Matrix(a->value + b->value);
  return t.record(std::move(v), {a, b}, [a, b, broadcast](const Matrix& up) {
    a->grad += up;
    if (broadcast) {
      b->grad += up.colwise().sum();
    } else {
      b->grad += up;
    }
  });
}

NodePtr op_transpose(Tape& t, const NodePtr& a) {
  return t.record(a->value.transpose(), {a},
                  [a](const Matrix& up) { a->grad += up.transpose(); });
}

NodePtr op_relu(Tape& t, const NodePtr& a) {
  // Derivative at exactly 0 is 0.
  Matrix mask = (a->value.array() > 0.0).cast<double>();
  return t.record(a->value.cwiseMax(0.0), {a}, [a, mask](const Matrix& up) {
    a->grad.array() += up.array() * mask.array();
  });
}

NodePtr op_leaky_relu(Tape& t, const NodePtr& a, double tau) {
  Matrix mask = (a->value.array() > 0.0)
                    .select(Matrix::Ones(a->value.rows(), a->value.cols()),
                            Matrix::Constant(a->value.rows(), a->value.cols(), tau));
  Matrix v = a->value.cwiseMax(0.0) + tau * a->value.cwiseMin(0.0);
  return t.record(std::move(v), {a}, [a, mask](const Matrix& up) {
    a->grad.array() += up.array() * mask.array();
  });
}

NodePtr op_softmax_rows(Tape& t, const NodePtr& a) {
  Matrix s = a->value;
  for (Index i = 0; i < s.rows(); ++i) {
    Eigen::RowVectorXd row =
        (s.row(i).array() - s.row(i).maxCoeff()).exp();
    s.row(i) = row / row.sum();
  }
  return t.record(s, {a}, [a, s](const Matrix& up) {
    for (Index i = 0; i < s.rows(); ++i) {
      const double dot = up.row(i).dot(s.row(i));
      a->grad.row(i).array() +=
          s.row(i).array() * (up.row(i).array() - dot);
    }
  });
}

NodePtr op_layernorm_rows(Tape& t, const NodePtr& a, double eps) {
  const Index cols = a->value.cols();
  Matrix y(a->value.rows(), cols);
  Vector inv_std(a->value.rows());
  for (Index i = 0; i < a->value.rows(); ++i) {
    const double mu = a->value.row(i).mean();
    const double var = (a->value.row(i).array() - mu).square().mean();
    inv_std(i) = 1.0 / std::sqrt(var + eps);
    y.row(i) = (a->value.row(i).array() - mu) * inv_std(i);
  }
  return t.record(y, {a}, [a, y, inv_std](const Matrix& up) {
    for (Index i = 0; i < y.rows(); ++i) {
      const double mean_g = up.row(i).mean();
      const double mean_gy = (up.row(i).array() * y.row(i).array()).mean();
      a->grad.row(i).array() +=
          inv_std(i) * (up.row(i).array() - mean_g - y.row(i).array() * mean_gy);
    }
  });
}

NodePtr op_mean_rows(Tape& t, const NodePtr& a) {
  const Index rows = a->value.rows();
  Matrix v = a->value.colwise().mean();
  return t.record(std::move(v), {a}, [a, rows](const Matrix& up) {
    a->grad += up.replicate(rows, 1) / static_cast<double>(rows);
  });
}

NodePtr op_concat_cols(Tape& t, const NodePtr& a, const NodePtr& b) {
  if (a->value.rows() != b->value.rows()) {
    throw DimensionError("op_concat_cols: row mismatch");
  }
  const Index ca = a->value.cols();
  const Index cb = b->value.cols();
  Matrix v(a->value.rows(), ca + cb);
  v << a->value, b->value;
  return t.record(std::move(v), {a, b}, [a, b, ca, cb](const Matrix& up) {
    a->grad += up.leftCols(ca);
    b->grad += up.rightCols(cb);
  });
}

NodePtr op_scale(Tape& t, const NodePtr& a, double c) {
  return t.record(c * a->value, {a},
                  [a, c](const Matrix& up) { a->grad += c * up; });
}

NodePtr op_cmul(Tape& t, const NodePtr& a, const Matrix& m) {
  if (a->value.rows() != m.rows() || a->value.cols() != m.cols()) {
    throw DimensionError("op_cmul: shape mismatch");
  }
  return t.record(a->value.cwiseProduct(m), {a}, [a, m](const Matrix& up) {
    a->grad.array() += up.array() * m.array();
  });
}

NodePtr op_rowmul(Tape& t, const NodePtr& a, const NodePtr& g) {
  if (g->value.rows() != 1 || g->value.cols() != a->value.cols()) {
    throw DimensionError("op_rowmul: gain must be 1 x cols");
  }
  Matrix v = a->value.array().rowwise() * g->value.row(0).array();
  return t.record(std::move(v), {a, g}, [a, g](const Matrix& up) {
    a->grad.array() += up.array().rowwise() * g->value.row(0).array();
    g->grad += (up.cwiseProduct(a->value)).colwise().sum();
  });
}

NodePtr op_sigmoid(Tape& t, const NodePtr& a) {
  Matrix s = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  return t.record(s, {a}, [a, s](const Matrix& up) {
    a->grad.array() += up.array() * s.array() * (1.0 - s.array());
  });
}

NodePtr op_softplus(Tape& t, const NodePtr& a) {
  // log(1 + e^x) = max(x, 0) + log1p(e^-|x|), overflow-safe.
  Matrix v = a->value.array().max(0.0) +
             (-a->value.array().abs()).exp().log1p();
  Matrix sig = (1.0 / (1.0 + (-a->value.array()).exp())).matrix();
  return t.record(std::move(v), {a}, [a, sig](const Matrix& up) {
    a->grad.array() += up.array() * sig.array();
  });
}

NodePtr op_sum(Tape& t, const NodePtr& a) {
  Matrix v(1, 1);
  v(0, 0) = a->value.sum();
  return t.record(std::move(v), {a}, [a](const Matrix& up) {
    a->grad.array() += up(0, 0);
  });
}

NodePtr op_repeat_rows(Tape& t, const NodePtr& a, Index times) {
  if (a->value.rows() != 1) {
    throw DimensionError("op_repeat_rows: input must be a single row");
  }
  if (times < 1) throw ContractError("op_repeat_rows: times must be >= 1");
  return t.record(a->value.replicate(times, 1), {a}, [a](const Matrix& up) {
    a->grad += up.colwise().sum();
  });
}

NodePtr op_flatten_to_row(Tape& t, const NodePtr& a) {
  const Index r = a->value.rows(), c = a->value.cols();
  Matrix v(1, r * c);
  for (Index i = 0; i < r; ++i) v.block(0, i * c, 1, c) = a->value.row(i);
  return t.record(std::move(v), {a}, [a, r, c](const Matrix& up) {
    for (Index i = 0; i < r; ++i) a->grad.row(i) += up.block(0, i * c, 1, c);
  });
}

NodePtr op_reshape_from_row(Tape& t, const NodePtr& a, Index rows,
                            Index cols) {
  if (a->value.rows() != 1 || a->value.cols() != rows * cols) {
    throw DimensionError("op_reshape_from_row: size mismatch");
  }
  Matrix v(rows, cols);
  for (Index i = 0; i < rows; ++i) v.row(i) = a->value.block(0, i * cols, 1, cols);
  return t.record(std::move(v), {a}, [a, rows, cols](const Matrix& up) {
    for (Index i = 0; i < rows; ++i) {
      a->grad.block(0, i * cols, 1, cols) += up.row(i);
    }
  });
}

NodePtr op_add_scaled_identity(Tape& t, const NodePtr& a, const NodePtr& s) {
  if (a->value.rows() != a->value.cols()) {
    throw DimensionError("op_add_scaled_identity: matrix must be square");
  }
  check_scalar(s, "op_add_scaled_identity");
  Matrix v = a->value;
  v.diagonal().array() += s->value(0, 0);
  return t.record(std::move(v), {a, s}, [a, s](const Matrix& up) {
    a->grad += up;
    s->grad(0, 0) += up.trace();
  });
}

NodePtr op_convex_mix_identity(Tape& t, const NodePtr& a, const NodePtr& s) {
  if (a->value.rows() != a->value.cols()) {
    throw DimensionError("op_convex_mix_identity: matrix must be square");
  }
  check_scalar(s, "op_convex_mix_identity");
  const double sv = s->value(0, 0);
  Matrix v = (1.0 - sv) * a->value;
  v.diagonal().array() += sv;
  return t.record(std::move(v), {a, s}, [a, s](const Matrix& up) {
    const double cur = s->value(0, 0);
    a->grad += (1.0 - cur) * up;
    s->grad(0, 0) += up.trace() - up.cwiseProduct(a->value).sum();
  });
}

NodePtr op_scale_node(Tape& t, const NodePtr& a, const NodePtr& s) {
  check_scalar(s, "op_scale_node");
  return t.record(s->value(0, 0) * a->value, {a, s}, [a, s](const Matrix& up) {
    a->grad += s->value(0, 0) * up;
    s->grad(0, 0) += up.cwiseProduct(a->value).sum();
  });
}

NodePtr op_inverse(Tape& t, const NodePtr& a) {
  if (a->value.rows() != a->value.cols()) {
    throw DimensionError("op_inverse: matrix must be square");
  }
  Matrix inv;
  if (is_symmetric(a->value)) {
    inv = solve_psd_or_pinv(a->value,
                            Matrix::Identity(a->value.rows(), a->value.cols()));
  } else {
    Eigen::FullPivLU<Matrix> lu(a->value);
    inv = lu.isInvertible() ? Matrix(lu.inverse()) : pinv(a->value);
  }
  return t.record(inv, {a}, [a, inv](const Matrix& up) {
    a->grad.noalias() -= inv.transpose() * up * inv.transpose();
  });
}

NodePtr loss_mse(Tape& t, const NodePtr& pred, const Matrix& target) {
  if (pred->value.rows() != target.rows() ||
      pred->value.cols() != target.cols()) {
    throw DimensionError("loss_mse: shape mismatch");
  }
  Matrix diff = pred->value - target;
  const double n = static_cast<double>(diff.size());
  Matrix v(1, 1);
  v(0, 0) = diff.squaredNorm() / n;
  return t.record(std::move(v), {pred}, [pred, diff, n](const Matrix& up) {
    pred->grad += up(0, 0) * 2.0 / n * diff;
  });
}

NodePtr loss_softmax_xent(Tape& t, const NodePtr& logits,
                          const std::vector<int>& labels) {
  const Index rows = logits->value.rows();
  const Index cols = logits->value.cols();
  if (static_cast<Index>(labels.size()) != rows) {
    throw ContractError("loss_softmax_xent: one label per row required");
  }
  Matrix p(rows, cols);
  double total = 0.0;
  for (Index i = 0; i < rows; ++i) {
    const int label = labels[i];
    if (label < 0 || label >= cols) {
      throw ContractError("loss_softmax_xent: label out of range");
    }
    const double mx = logits->value.row(i).maxCoeff();
    Eigen::RowVectorXd e = (logits->value.row(i).array() - mx).exp();
    const double z = e.sum();
    p.row(i) = e / z;
    total -= logits->value(i, label) - mx - std::log(z);
  }
  Matrix v(1, 1);
  v(0, 0) = total / static_cast<double>(rows);
  return t.record(std::move(v), {logits},
                  [logits, p, labels, rows](const Matrix& up) {
                    Matrix g = p;
                    for (Index i = 0; i < rows; ++i) g(i, labels[i]) -= 1.0;
                    logits->grad += up(0, 0) / static_cast<double>(rows) * g;
                  });
}

}  // namespace ikit
