#pragma once

#include <cstdint>
#include <vector>

#include "ikit/autodiff.hpp"

namespace ikit {

struct Schedule {
  enum class Kind { Constant, Exponential, CosineWarmup };
  Kind kind = Kind::Constant;
  double init = 0.0;          // base rate (constant value / exponential start / cosine peak)
  double decay_rate = 1.0;    // exponential
  std::int64_t start = 0;     // exponential: first decaying step
  std::int64_t duration = 1;  // exponential: length of the decay window
  std::int64_t warmup = 0;    // cosine: steps from 0 to peak

  static Schedule constant(double value);
  static Schedule exponential(double init, double decay_rate,
                              std::int64_t start, std::int64_t duration);
  static Schedule cosine_warmup(double peak, std::int64_t warmup);
};

double lr_at(const Schedule& s, std::int64_t step);

struct OptimSpec {
  enum class Kind { Adam, SgdMomentum };
  Kind kind = Kind::Adam;
  double lr = 3e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;  // adam
  double momentum = 0.9, weight_decay = 0.0;      // sgd
  Schedule schedule = Schedule::constant(3e-4);

  static OptimSpec adam(double lr);
  static OptimSpec sgd_momentum(double lr, double momentum = 0.9,
                                double weight_decay = 0.0);
};

struct AdamState {
  Matrix m, v;
  std::int64_t t = 0;
};

struct MomentumState {
  Matrix v;
};

void adam_step(Matrix& param, const Matrix& grad, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// v <- momentum v + (grad + weight_decay param); param <- param - lr v.
void sgd_momentum_step(Matrix& param, const Matrix& grad, MomentumState& state,
                       double lr, double momentum, double weight_decay = 0.0);

/// Applies the configured update to every parameter from its accumulated
/// gradient; the schedule is evaluated at the internal step counter.
class Optimizer {
 public:
  Optimizer(OptimSpec spec, std::vector<NodePtr> params);
  void step();
  std::int64_t steps_taken() const { return t_; }
  double current_lr() const { return lr_at(spec_.schedule, t_); }

 private:
  OptimSpec spec_;
  std::vector<NodePtr> params_;
  std::vector<AdamState> adam_;
  std::vector<MomentumState> mom_;
  std::int64_t t_ = 0;
};

}  // namespace ikit
