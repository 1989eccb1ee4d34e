#pragma once

#include <functional>
#include <optional>

#include "ikit/linalg.hpp"

namespace ikit {

/// A (keys, values, queries) triple with optional query targets.
/// K is N x d, V is N x k, Q is M x d, targets M x k.
struct KvqBatch {
  Matrix K, V, Q;
  std::optional<Matrix> targets;

  Index n() const { return K.rows(); }
  Index m() const { return Q.rows(); }
  Index d() const { return K.cols(); }
  Index k() const { return V.cols(); }

  void validate() const;
};

/// Covariance smoothing parameter: a fixed value, or a learnable scalar
/// squashed through sigmoid (convex mixing (1-a)G + aI) or softplus
/// (additive ridge G + aI).
struct AlphaSpec {
  enum class Mode { Fixed, Sigmoid, Softplus };
  Mode mode = Mode::Fixed;
  double value = 0.0;  // alpha itself for Fixed, theta otherwise

  static AlphaSpec fixed(double alpha);
  static AlphaSpec sigmoid(double theta) { return {Mode::Sigmoid, theta}; }
  static AlphaSpec softplus(double theta) { return {Mode::Softplus, theta}; }

  double effective() const;
  bool convex_mix() const { return mode == Mode::Sigmoid; }
  /// gram regularized per mode: G + aI, or (1-a)G + aI for sigmoid.
  Matrix regularize(const Matrix& gram) const;
};

struct KernelSpec {
  enum class Kind { Linear, Gaussian };
  Kind kind = Kind::Linear;
  double gamma = -1.0;  // Gaussian only, must be < 0

  static KernelSpec linear() { return {Kind::Linear, 0.0}; }
  static KernelSpec gaussian(double gamma);
};

/// Q K' V.
Matrix linear_attention(const KvqBatch& b);

/// softmax(Q K' * scale) V. scale defaults to 1 (the definition-faithful
/// form); pass 1/sqrt(d) for the Transformer convention.
Matrix attention(const KvqBatch& b, std::optional<double> scale = std::nullopt);

/// Q [K'K + aI]^-1 K' V (primal least-squares form; pinv fallback at a=0).
Matrix intention(const KvqBatch& b, const AlphaSpec& alpha);

/// softmax(Q [K'K + aI]^-1 K') V.
Matrix sigma_intention(const KvqBatch& b, const AlphaSpec& alpha);

/// [Q K'] (K K' + aI)^-1 V (dual form, cubic in N instead of d).
Matrix intention_dual(const KvqBatch& b, const AlphaSpec& alpha);

enum class IntentionBranch { Primal, Dual };

/// Complexity rule: invert the smaller Gram (d x d if d < N, else N x N).
IntentionBranch intention_branch(Index n, Index d);

/// intention via the branch picked by intention_branch; reports the choice.
Matrix intention_auto(const KvqBatch& b, const AlphaSpec& alpha,
                      IntentionBranch* used = nullptr);

/// exp(gamma ||x - y||^2), gamma < 0.
double gaussian_kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y,
                       double gamma);

/// Pairwise kernel matrix K(X, Y), rows(X) x rows(Y).
Matrix kernel_matrix(const Matrix& X, const Matrix& Y, const KernelSpec& spec);

/// Feature map phi(X) := K(X, K) K(K, K)^{-1/2} so that linear least
/// squares in the embedded space equals kernel regression.
Matrix kernel_map(const Matrix& X, const Matrix& K, const KernelSpec& spec,
                  double eig_floor = 1e-10);

enum class ScaledVariant { Unscaled, Scaled, ScaledRegularized };

/// The query-side mixing map Z (M x N), values excluded:
///   unscaled            Q K' [K K']^-1
///   scaled              sqrt(d) Q K' [K K']^-1
///   scaled-regularized  0.5 sqrt(d) Q K' [s K K' + (1-s) I]^-1, s = sigmoid(0)
Matrix scaled_intention(const KvqBatch& b, ScaledVariant variant);

/// Column-splits K, Q (d/heads) and V (k/heads), applies the per-head op,
/// concatenates, then multiplies by the merge matrix (identity by default).
Matrix multi_head(const std::function<Matrix(const KvqBatch&)>& apply,
                  int heads, const KvqBatch& b,
                  const std::optional<Matrix>& merge = std::nullopt);

}  // namespace ikit
