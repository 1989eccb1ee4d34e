#include "ikit/optim.hpp"

#include <cmath>
#include <numbers>

namespace ikit {

Schedule Schedule::constant(double value) {
  Schedule s;
  s.kind = Kind::Constant;
  s.init = value;
  return s;
}

Schedule Schedule::exponential(double init, double decay_rate,
                               std::int64_t start, std::int64_t duration) {
  if (duration < 1) throw ContractError("schedule: duration must be >= 1");
  Schedule s;
  s.kind = Kind::Exponential;
  s.init = init;
  s.decay_rate = decay_rate;
  s.start = start;
  s.duration = duration;
  return s;
}

Schedule Schedule::cosine_warmup(double peak, std::int64_t warmup) {
  Schedule s;
  s.kind = Kind::CosineWarmup;
  s.init = peak;
  s.warmup = warmup;
  return s;
}

double lr_at(const Schedule& s, std::int64_t step) {
  switch (s.kind) {
    case Schedule::Kind::Constant:
      return s.init;
    case Schedule::Kind::Exponential: {
      if (step <= s.start) return s.init;
      // One decay_rate application over the window, then hold.
      const double frac =
          std::min<double>(step - s.start, s.duration) /
          static_cast<double>(s.duration);
      return s.init * std::pow(s.decay_rate, frac);
    }
    case Schedule::Kind::CosineWarmup: {
      if (s.warmup <= 0 || step >= s.warmup) return s.init;
      const double frac = static_cast<double>(step) / s.warmup;
      return s.init * 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
    }
  }
  return 0.0;
}

OptimSpec OptimSpec::adam(double lr) {
  OptimSpec o;
  o.kind = Kind::Adam;
  o.lr = lr;
  o.schedule = Schedule::constant(lr);
  return o;
}

OptimSpec OptimSpec::sgd_momentum(double lr, double momentum,
                                  double weight_decay) {
  OptimSpec o;
  o.kind = Kind::SgdMomentum;
  o.lr = lr;
  o.momentum = momentum;
  o.weight_decay = weight_decay;
  o.schedule = Schedule::constant(lr);
  return o;
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, double lr,
               double beta1, double beta2, double eps) {
  if (state.m.size() == 0) {
    state.m = Matrix::Zero(param.rows(), param.cols());
    state.v = Matrix::Zero(param.rows(), param.cols());
  }
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw DimensionError("adam_step: grad/param shape mismatch");
  }
  state.t += 1;
  state.m = beta1 * state.m + (1.0 - beta1) * grad;
  state.v = beta2 * state.v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  param.array() -=
      lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + eps);
}

void sgd_momentum_step(Matrix& param, const Matrix& grad, MomentumState& state,
                       double lr, double momentum, double weight_decay) {
  if (state.v.size() == 0) {
    state.v = Matrix::Zero(param.rows(), param.cols());
  }
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw DimensionError("sgd_momentum_step: grad/param shape mismatch");
  }
  state.v = momentum * state.v + grad + weight_decay * param;
  param -= lr * state.v;
}

Optimizer::Optimizer(OptimSpec spec, std::vector<NodePtr> params)
    : spec_(spec), params_(std::move(params)) {
  if (spec_.kind == OptimSpec::Kind::Adam) {
    adam_.resize(params_.size());
  } else {
    mom_.resize(params_.size());
  }
}

void Optimizer::step() {
  const double lr = lr_at(spec_.schedule, t_);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    if (spec_.kind == OptimSpec::Kind::Adam) {
      adam_step(p.value, p.grad, adam_[i], lr, spec_.beta1, spec_.beta2,
                spec_.eps);
    } else {
      sgd_momentum_step(p.value, p.grad, mom_[i], lr, spec_.momentum,
                        spec_.weight_decay);
    }
  }
  t_ += 1;
}

}  // namespace ikit
