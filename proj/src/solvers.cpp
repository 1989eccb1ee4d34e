#include "ikit/solvers.hpp"

#include <cmath>

namespace ikit {

namespace {

bool is_binary(const Vector& y) {
  return ((y.array() == 0.0) || (y.array() == 1.0)).all();
}

void require_binary(const Vector& y, const char* who) {
  if (!is_binary(y)) {
    throw ContractError(std::string(who) + ": labels must be in {0, 1}");
  }
}

struct ClassSplit {
  std::vector<Index> idx0, idx1;
  Vector mu0, mu1;
};

ClassSplit split_classes(const LabeledData& d, const char* who) {
  require_binary(d.y, who);
  ClassSplit s;
  for (Index i = 0; i < d.n(); ++i) {
    (d.y(i) == 1.0 ? s.idx1 : s.idx0).push_back(i);
  }
  if (s.idx0.empty() || s.idx1.empty()) {
    throw ContractError(std::string(who) + ": both classes must be non-empty");
  }
  s.mu0 = Vector::Zero(d.dim());
  s.mu1 = Vector::Zero(d.dim());
  for (Index i : s.idx0) s.mu0 += d.X.row(i).transpose();
  for (Index i : s.idx1) s.mu1 += d.X.row(i).transpose();
  s.mu0 /= static_cast<double>(s.idx0.size());
  s.mu1 /= static_cast<double>(s.idx1.size());
  return s;
}

Matrix class_scatter(const Matrix& X, const std::vector<Index>& idx,
                     const Vector& mu) {
  Matrix s = Matrix::Zero(X.cols(), X.cols());
  for (Index i : idx) {
    Vector c = X.row(i).transpose() - mu;
    s.noalias() += c * c.transpose();
  }
  return s;
}

/// Zero scatter carries no whitening information (single point per class);
/// the discriminant degenerates to the raw mean difference.
Vector discriminant_solve(const Matrix& sigma, const Vector& rhs) {
  if (sigma.cwiseAbs().maxCoeff() == 0.0) return rhs;
  return solve_psd_or_pinv(sigma, rhs);
}

}  // namespace

void LabeledData::validate() const {
  if (y.size() != X.rows()) {
    throw DimensionError("LabeledData: label count != row count");
  }
  if (weights && weights->size() != X.rows()) {
    throw DimensionError("LabeledData: weight count != row count");
  }
  if (weights && (weights->array() < 0.0).any()) {
    throw ContractError("LabeledData: weights must be non-negative");
  }
  if (bias_col && (*bias_col < 0 || *bias_col >= X.cols())) {
    throw ContractError("LabeledData: bias column index out of range");
  }
}

Vector discriminant_relabel(const Vector& y) {
  require_binary(y, "discriminant_relabel");
  const double n1 = y.sum();
  const double n0 = static_cast<double>(y.size()) - n1;
  if (n0 == 0.0 || n1 == 0.0) {
    throw ContractError("discriminant_relabel: both classes must be non-empty");
  }
  return (y.array() / n1 - (1.0 - y.array()) / n0).matrix();
}

NormalForm normal_form(SolverKind kind, const LabeledData& d, double C) {
  d.validate();
  if (C < 0.0) throw ContractError("normal_form: C must be >= 0");
  switch (kind) {
    case SolverKind::Ridge: {
      Matrix sigma = d.X.transpose() * d.X;
      sigma.diagonal().array() += C;
      return {std::move(sigma), d.X.transpose() * d.y};
    }
    case SolverKind::WeightedRidge: {
      if (!d.weights) {
        throw ContractError("weighted ridge: weights are required");
      }
      Matrix xw = d.weights->asDiagonal() * d.X;
      Matrix sigma = d.X.transpose() * xw;
      sigma.diagonal().array() += C;
      return {std::move(sigma), d.X.transpose() * (d.weights->asDiagonal() * d.y)};
    }
    case SolverKind::LsSvm: {
      if (!d.bias_col) {
        throw ContractError("ls-svm: a declared bias column is required");
      }
      require_binary(d.y, "ls-svm");
      Matrix sigma = d.X.transpose() * d.X;
      sigma.diagonal().array() += C;
      sigma(*d.bias_col, *d.bias_col) -= C;  // bias stays unpenalized
      Vector ym = 2.0 * d.y.array() - 1.0;
      return {std::move(sigma), d.X.transpose() * ym};
    }
    case SolverKind::Lda: {
      split_classes(d, "lda");  // validates class structure
      Matrix centered = d.X.rowwise() - d.X.colwise().mean();
      return {centered.transpose() * centered,
              d.X.transpose() * discriminant_relabel(d.y)};
    }
    case SolverKind::Qda: {
      auto s = split_classes(d, "qda");
      Matrix sigma = class_scatter(d.X, s.idx0, s.mu0) +
                     class_scatter(d.X, s.idx1, s.mu1);
      return {std::move(sigma), d.X.transpose() * discriminant_relabel(d.y)};
    }
  }
  throw Error("normal_form: unknown solver kind");
}

Vector unified_fit(SolverKind kind, const LabeledData& d, double C) {
  NormalForm nf = normal_form(kind, d, C);
  if (kind == SolverKind::Lda || kind == SolverKind::Qda) {
    return discriminant_solve(nf.sigma, nf.rhs);
  }
  return solve_psd_or_pinv(nf.sigma, nf.rhs);
}

Vector ridge_fit(const LabeledData& d, double C) {
  d.validate();
  if (C < 0.0) throw ContractError("ridge_fit: C must be >= 0");
  if (C == 0.0) {
    return pinv(d.X) * d.y;  // minimum-norm least squares
  }
  Matrix sigma = d.X.transpose() * d.X;
  sigma.diagonal().array() += C;
  return solve_psd_or_pinv(sigma, d.X.transpose() * d.y);
}

Vector weighted_ridge_fit(const LabeledData& d, double C) {
  d.validate();
  if (!d.weights) {
    throw ContractError("weighted_ridge_fit: weights are required");
  }
  if (C < 0.0) throw ContractError("weighted_ridge_fit: C must be >= 0");
  // Scale rows by sqrt(w) and reduce to plain ridge normal equations.
  Vector sw = d.weights->array().sqrt();
  Matrix xz = sw.asDiagonal() * d.X;
  Vector yz = sw.cwiseProduct(d.y);
  Matrix sigma = xz.transpose() * xz;
  sigma.diagonal().array() += C;
  return solve_psd_or_pinv(sigma, xz.transpose() * yz);
}

Vector lssvm_fit(const LabeledData& d, double C) {
  NormalForm nf = normal_form(SolverKind::LsSvm, d, C);
  return solve_psd_or_pinv(nf.sigma, nf.rhs);
}

Vector lda_fit(const LabeledData& d) {
  d.validate();
  auto s = split_classes(d, "lda_fit");
  Matrix centered = d.X.rowwise() - d.X.colwise().mean();
  Matrix sigma = centered.transpose() * centered;
  return discriminant_solve(sigma, s.mu1 - s.mu0);
}

Vector qda_fit(const LabeledData& d) {
  d.validate();
  auto s = split_classes(d, "qda_fit");
  Matrix sigma =
      class_scatter(d.X, s.idx0, s.mu0) + class_scatter(d.X, s.idx1, s.mu1);
  return discriminant_solve(sigma, s.mu1 - s.mu0);
}

std::vector<Index> violated_constraints(const Vector& w, const Matrix& C,
                                        const Vector& c) {
  if (C.rows() != w.size() || C.cols() != c.size()) {
    throw DimensionError("constraints: C must be dim(w) x #constraints");
  }
  std::vector<Index> out;
  for (Index j = 0; j < C.cols(); ++j) {
    if (C.col(j).dot(w) < c(j) - 1e-12) out.push_back(j);
  }
  return out;
}

Vector constrained_project(const Vector& w_star, const Matrix& Z,
                           const Matrix& C, const Vector& c) {
  if (Z.rows() != Z.cols() || Z.rows() != w_star.size()) {
    throw DimensionError("constrained_project: Z must be dim(w) square");
  }
  if (!is_symmetric(Z)) {
    throw ContractError("constrained_project: Z must be symmetric");
  }
  auto violated = violated_constraints(w_star, C, c);
  if (violated.empty()) return w_star;

  const Index nv = static_cast<Index>(violated.size());
  Matrix cv(w_star.size(), nv);
  Vector bv(nv);
  for (Index j = 0; j < nv; ++j) {
    cv.col(j) = C.col(violated[j]);
    bv(j) = c(violated[j]);
  }
  Matrix gram = cv.transpose() * Z * cv;
  Vector gap = cv.transpose() * w_star - bv;
  return w_star - Z * cv * solve_psd_or_pinv(gram, gap);
}

}  // namespace ikit
