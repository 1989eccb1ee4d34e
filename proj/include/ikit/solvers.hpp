#pragma once

#include <optional>

#include "ikit/linalg.hpp"

namespace ikit {

/// Design matrix with binary labels or real targets, optional per-sample
/// weights, and an optional declared bias-column index (required by
/// LS-SVM, which must not penalize the bias).
struct LabeledData {
  Matrix X;  // N x d
  Vector y;  // length N
  std::optional<Vector> weights;
  std::optional<Index> bias_col;

  Index n() const { return X.rows(); }
  Index dim() const { return X.cols(); }
  void validate() const;
};

enum class SolverKind { Ridge, WeightedRidge, LsSvm, Lda, Qda };

/// Data summary (Sigma_m) and relabeled targets (y_m) for one solver; the
/// unified solution is w = Sigma_m^+ X_m' y_m.
struct NormalForm {
  Matrix sigma;  // d x d
  Vector rhs;    // X_m' y_m
};

NormalForm normal_form(SolverKind kind, const LabeledData& d, double C = 0.0);

/// Single generic path through the normal form; every specialized fit
/// below must agree with this to 1e-10.
Vector unified_fit(SolverKind kind, const LabeledData& d, double C = 0.0);

/// w = (X'X + C I)^-1 X' y; minimum-norm solution via pinv when singular.
Vector ridge_fit(const LabeledData& d, double C);

/// w = (X'WX + C I)^-1 X'Wy with W = diag(weights).
Vector weighted_ridge_fit(const LabeledData& d, double C);

/// Ridge on relabeled targets 2y-1 with the declared bias column left
/// unpenalized; sign(Xw) classifies.
Vector lssvm_fit(const LabeledData& d, double C);

/// Total-scatter discriminant: w = [(X-mean)'(X-mean)]^-1 (mu1 - mu0).
Vector lda_fit(const LabeledData& d);

/// As LDA with the summed within-class scatter (no count normalization).
Vector qda_fit(const LabeledData& d);

/// Relabeling used by LDA/QDA: entries 1/N1 for class 1 and -1/N0 for
/// class 0, so that X' y_m equals mu1 - mu0 exactly.
Vector discriminant_relabel(const Vector& y);

/// One-shot projection of w_star onto the violated rows of the constraint
/// set C'w >= c:  w - Z Cv (Cv' Z Cv)^-1 (Cv' w - cv). Returns w_star
/// unchanged (same values, bitwise) when nothing is violated.
Vector constrained_project(const Vector& w_star, const Matrix& Z,
                           const Matrix& C, const Vector& c);

/// Rows of C'w >= c violated at w (threshold 1e-12).
std::vector<Index> violated_constraints(const Vector& w, const Matrix& C,
                                        const Vector& c);

}  // namespace ikit
