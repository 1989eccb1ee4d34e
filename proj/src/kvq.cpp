#include "ikit/kvq.hpp"

#include <cmath>

namespace ikit {

void KvqBatch::validate() const {
  if (K.rows() < 1 || Q.rows() < 1) {
    throw ContractError("KvqBatch: N and M must be >= 1");
  }
  if (V.rows() != K.rows()) {
    throw DimensionError("KvqBatch: K and V row counts differ");
  }
  if (Q.cols() != K.cols()) {
    throw DimensionError("KvqBatch: K and Q column counts differ");
  }
  if (targets && (targets->rows() != Q.rows() || targets->cols() != V.cols())) {
    throw DimensionError("KvqBatch: target shape must be M x k");
  }
}

AlphaSpec AlphaSpec::fixed(double alpha) {
  if (alpha < 0.0) throw ContractError("AlphaSpec: fixed alpha must be >= 0");
  return {Mode::Fixed, alpha};
}

double AlphaSpec::effective() const {
  switch (mode) {
    case Mode::Fixed:
      return value;
    case Mode::Sigmoid:
      return 1.0 / (1.0 + std::exp(-value));
    case Mode::Softplus:
      return value > 30.0 ? value : std::log1p(std::exp(value));
  }
  return 0.0;
}

Matrix AlphaSpec::regularize(const Matrix& gram) const {
  const double a = effective();
  Matrix r = convex_mix() ? Matrix((1.0 - a) * gram) : gram;
  r.diagonal().array() += a;
  return r;
}

KernelSpec KernelSpec::gaussian(double gamma) {
  if (gamma >= 0.0) {
    throw ContractError("KernelSpec: gaussian gamma must be < 0");
  }
  return {Kind::Gaussian, gamma};
}

Matrix linear_attention(const KvqBatch& b) {
  b.validate();
  return matmul(matmul(b.Q, b.K.transpose()), b.V);
}

namespace {

Matrix softmax_rows(const Matrix& a) {
  Matrix s(a.rows(), a.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    Eigen::RowVectorXd e = (a.row(i).array() - a.row(i).maxCoeff()).exp();
    s.row(i) = e / e.sum();
  }
  return s;
}

/// [gram + reg]^-1 applied to rhs, with pinv fallback when the regularized
/// Gram is singular (alpha = 0 in particular).
Matrix solve_regularized(const Matrix& gram, const AlphaSpec& alpha,
                         const Matrix& rhs) {
  return solve_psd_or_pinv(alpha.regularize(gram), rhs);
}

}  // namespace

Matrix attention(const KvqBatch& b, std::optional<double> scale) {
  b.validate();
  Matrix logits = b.Q * b.K.transpose();
  if (scale) logits *= *scale;
  Matrix out = softmax_rows(logits) * b.V;
  ensure_finite(out, "attention");
  return out;
}

Matrix intention(const KvqBatch& b, const AlphaSpec& alpha) {
  b.validate();
  Matrix w = solve_regularized(b.K.transpose() * b.K, alpha,
                               b.K.transpose() * b.V);
  Matrix out = b.Q * w;
  ensure_finite(out, "intention");
  return out;
}

Matrix sigma_intention(const KvqBatch& b, const AlphaSpec& alpha) {
  b.validate();
  Matrix mix = solve_regularized(b.K.transpose() * b.K, alpha,
                                 Matrix(b.K.transpose()));
  Matrix out = softmax_rows(b.Q * mix) * b.V;
  ensure_finite(out, "sigma_intention");
  return out;
}

Matrix intention_dual(const KvqBatch& b, const AlphaSpec& alpha) {
  b.validate();
  Matrix mixed = solve_regularized(b.K * b.K.transpose(), alpha, b.V);
  Matrix out = (b.Q * b.K.transpose()) * mixed;
  ensure_finite(out, "intention_dual");
  return out;
}

IntentionBranch intention_branch(Index n, Index d) {
  return d < n ? IntentionBranch::Primal : IntentionBranch::Dual;
}

Matrix intention_auto(const KvqBatch& b, const AlphaSpec& alpha,
                      IntentionBranch* used) {
  const IntentionBranch branch = intention_branch(b.n(), b.d());
  if (used) *used = branch;
  return branch == IntentionBranch::Primal ? intention(b, alpha)
                                           : intention_dual(b, alpha);
}

double gaussian_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y,
                       double gamma) {
  if (gamma >= 0.0) {
    throw ContractError("gaussian_kernel: gamma must be < 0");
  }
  if (x.size() != y.size()) {
    throw DimensionError("gaussian_kernel: length mismatch");
  }
  return std::exp(gamma * (x - y).squaredNorm());
}

Matrix kernel_matrix(const Matrix& X, const Matrix& Y, const KernelSpec& spec) {
  if (X.cols() != Y.cols()) {
    throw DimensionError("kernel_matrix: column dims differ");
  }
  if (spec.kind == KernelSpec::Kind::Linear) {
    return X * Y.transpose();
  }
  if (spec.gamma >= 0.0) {
    throw ContractError("kernel_matrix: gaussian gamma must be < 0");
  }
  // ||x - y||^2 = ||x||^2 + ||y||^2 - 2 x.y, formed in one pass.
  Vector xn = X.rowwise().squaredNorm();
  Vector yn = Y.rowwise().squaredNorm();
  Matrix sq = (-2.0 * X * Y.transpose()).colwise() + xn;
  sq.rowwise() += yn.transpose();
  return (spec.gamma * sq.cwiseMax(0.0).array()).exp();
}

Matrix kernel_map(const Matrix& X, const Matrix& K, const KernelSpec& spec,
                  double eig_floor) {
  Matrix gram = kernel_matrix(K, K, spec);
  // Round-off can leave the Gram slightly asymmetric; symmetrize before
  // the eigendecomposition. Genuinely non-PSD input still errors there.
  gram = 0.5 * (gram + gram.transpose());
  Matrix root = inv_sqrt_psd(gram, eig_floor);
  return kernel_matrix(X, K, spec) * root;
}

Matrix scaled_intention(const KvqBatch& b, ScaledVariant variant) {
  b.validate();
  const double sqrt_d = std::sqrt(static_cast<double>(b.d()));
  Matrix gram = b.K * b.K.transpose();
  switch (variant) {
    case ScaledVariant::Unscaled:
      return (b.Q * b.K.transpose()) * pinv(gram);
    case ScaledVariant::Scaled:
      return sqrt_d * (b.Q * b.K.transpose()) * pinv(gram);
    case ScaledVariant::ScaledRegularized: {
      // Trainable mixing parameter initialized to 0: sigmoid(0) = 0.5.
      const double s = 0.5;
      Matrix reg = s * gram;
      reg.diagonal().array() += 1.0 - s;
      return 0.5 * sqrt_d * (b.Q * b.K.transpose()) *
             solve_psd_or_pinv(reg, Matrix::Identity(b.n(), b.n()));
    }
  }
  throw Error("scaled_intention: unknown variant");
}

Matrix multi_head(const std::function<Matrix(const KvqBatch&)>& apply,
                  int heads, const KvqBatch& b,
                  const std::optional<Matrix>& merge) {
  b.validate();
  if (heads < 1) throw ContractError("multi_head: heads must be >= 1");
  if (b.d() % heads != 0 || b.k() % heads != 0) {
    throw ContractError("multi_head: embedding width not divisible by heads");
  }
  const Index dh = b.d() / heads;
  const Index kh = b.k() / heads;
  Matrix out(b.m(), b.k());
  for (int h = 0; h < heads; ++h) {
    KvqBatch sub{b.K.middleCols(h * dh, dh), b.V.middleCols(h * kh, kh),
                 b.Q.middleCols(h * dh, dh), std::nullopt};
    Matrix head_out = apply(sub);
    if (head_out.rows() != b.m() || head_out.cols() != kh) {
      throw DimensionError("multi_head: per-head output has wrong shape");
    }
    out.middleCols(h * kh, kh) = head_out;
  }
  if (merge) {
    if (merge->rows() != b.k()) {
      throw DimensionError("multi_head: merge matrix rows must equal k");
    }
    out = out * *merge;
  }
  return out;
}

}  // namespace ikit
