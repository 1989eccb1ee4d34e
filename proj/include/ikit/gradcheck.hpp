// Central finite-difference oracle for reverse-mode gradients, shared by
// the unit tests and the selftest suite. Never calls into the backward
// rules it checks.
#pragma once

#include <functional>
#include <vector>

#include "ikit/autodiff.hpp"

namespace ikit::testing {

using ForwardFn =
    std::function<NodePtr(Tape&, const std::vector<NodePtr>&)>;

struct GradCheckResult {
  double max_rel_err = 0.0;
  bool ok(double tol) const { return max_rel_err <= tol; }
};

/// Builds loss = sum(f(inputs) .* R) with a fixed random weighting R,
/// runs backward once, then compares every input gradient against
/// (L(x+h) - L(x-h)) / 2h computed through fresh forward passes.
inline GradCheckResult gradcheck(const ForwardFn& f,
                                 const std::vector<Matrix>& values,
                                 RngStream& rng, double h = 1e-5) {
  std::vector<NodePtr> leaves;
  leaves.reserve(values.size());
  for (const auto& v : values) leaves.push_back(make_param(v));

  Tape tape;
  NodePtr out = f(tape, leaves);
  Matrix weights =
      sample_uniform(rng, out->value.rows(), out->value.cols(), -1.0, 1.0);
  NodePtr loss = op_sum(tape, op_cmul(tape, out, weights));
  tape.backward(loss);

  auto loss_at = [&](const std::vector<Matrix>& vals) {
    std::vector<NodePtr> ls;
    ls.reserve(vals.size());
    for (const auto& v : vals) ls.push_back(make_param(v));
    Tape t2;
    NodePtr o = f(t2, ls);
    return o->value.cwiseProduct(weights).sum();
  };

  GradCheckResult res;
  for (std::size_t i = 0; i < values.size(); ++i) {
    Matrix fd = Matrix::Zero(values[i].rows(), values[i].cols());
    for (Index r = 0; r < values[i].rows(); ++r) {
      for (Index c = 0; c < values[i].cols(); ++c) {
        std::vector<Matrix> plus = values, minus = values;
        plus[i](r, c) += h;
        minus[i](r, c) -= h;
        fd(r, c) = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
      }
    }
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    const double err =
        (leaves[i]->grad - fd).cwiseAbs().maxCoeff() / scale;
    res.max_rel_err = std::max(res.max_rel_err, err);
  }
  return res;
}

/// Same oracle for a model's named parameters: perturbs parameter values
/// in place and recomputes the scalar loss.
inline double param_gradcheck_max_rel_err(
    const std::function<double()>& loss_value,
    const std::function<void()>& backward_into_params,
    const std::vector<NodePtr>& params, double h = 1e-5) {
  backward_into_params();
  double worst = 0.0;
  for (const auto& p : params) {
    Matrix fd = Matrix::Zero(p->value.rows(), p->value.cols());
    for (Index r = 0; r < p->value.rows(); ++r) {
      for (Index c = 0; c < p->value.cols(); ++c) {
        const double keep = p->value(r, c);
        p->value(r, c) = keep + h;
        const double lp = loss_value();
        p->value(r, c) = keep - h;
        const double lm = loss_value();
        p->value(r, c) = keep;
        fd(r, c) = (lp - lm) / (2.0 * h);
      }
    }
    const double scale = std::max(1.0, fd.cwiseAbs().maxCoeff());
    worst = std::max(worst,
                     (p->grad - fd).cwiseAbs().maxCoeff() / scale);
  }
  return worst;
}

}  // namespace ikit::testing
