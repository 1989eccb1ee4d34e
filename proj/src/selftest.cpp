#include "ikit/selftest.hpp"

#include <cmath>
#include <sstream>

#include "ikit/bench.hpp"
#include "ikit/blocks.hpp"
#include "ikit/gradcheck.hpp"
#include "ikit/kvq.hpp"
#include "ikit/models.hpp"
#include "ikit/solvers.hpp"
#include "ikit/tasks.hpp"

namespace ikit {

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

KvqBatch random_batch(RngStream& rng, Index n, Index m, Index d, Index k) {
  return KvqBatch{sample_normal(rng, n, d), sample_normal(rng, n, k),
                  sample_normal(rng, m, d), std::nullopt};
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

CheckResult check_fls_witness() {
  double worst = 0.0;
  for (double kappa : {0.5, 1.0, 2.0, 4.0}) {
    KvqBatch b{Matrix::Constant(1, 1, kappa), Matrix::Ones(1, 1),
               Matrix::Ones(1, 1), std::nullopt};
    worst = std::max(worst, std::abs(intention(b, AlphaSpec::fixed(0.0))(0, 0) -
                                     1.0 / kappa));
    worst = std::max(worst,
                     std::abs(intention_dual(b, AlphaSpec::fixed(0.0))(0, 0) -
                              1.0 / kappa));
  }
  return {"f_ls 1/kappa witness", worst <= 1e-12,
          "max deviation " + fmt(worst)};
}

CheckResult check_theorem_limits(std::uint64_t seed) {
  RngStream rng(seed, 0x7E0);
  bool monotone = true;
  double worst_final = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    KvqBatch b = random_batch(rng, 8, 4, 4, 3);
    Matrix lin = linear_attention(b);
    Matrix att = attention(b);
    double prev_g = std::numeric_limits<double>::infinity();
    double prev_s = std::numeric_limits<double>::infinity();
    double g = 0.0, s = 0.0;
    for (int e = 1; e <= 8; ++e) {
      const double alpha = std::pow(10.0, e);
      KvqBatch scaled = b;
      scaled.Q = alpha * b.Q;
      g = max_abs(intention(scaled, AlphaSpec::fixed(alpha)) - lin);
      s = max_abs(sigma_intention(scaled, AlphaSpec::fixed(alpha)) - att);
      if (g > prev_g * (1.0 + 1e-9) || s > prev_s * (1.0 + 1e-9)) {
        monotone = false;
      }
      prev_g = g;
      prev_s = s;
    }
    worst_final = std::max(worst_final,
                           std::max(g / max_abs(lin), s / max_abs(att)));
  }
  return {"theorem 2/3 limits (50 instances)",
          monotone && worst_final <= 1e-5,
          std::string(monotone ? "monotone" : "NOT monotone") +
              ", worst relative gap at alpha=1e8: " + fmt(worst_final)};
}

CheckResult check_equivariance(std::uint64_t seed) {
  RngStream rng(seed, 0xE9B);
  double worst_ops = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    KvqBatch b = random_batch(rng, 6, 5, 4, 2);
    Matrix rho1 = random_permutation(rng, b.n());
    Matrix rho2 = random_permutation(rng, b.m());
    KvqBatch pb{rho1 * b.K, rho1 * b.V, rho2 * b.Q, std::nullopt};
    AlphaSpec a = AlphaSpec::fixed(0.1);
    const Matrix outs[6] = {
        intention(b, a),      sigma_intention(b, a), intention_dual(b, a),
        attention(b),         linear_attention(b),
        multi_head([](const KvqBatch& s) { return attention(s); }, 2, b)};
    const Matrix pouts[6] = {
        intention(pb, a),      sigma_intention(pb, a), intention_dual(pb, a),
        attention(pb),         linear_attention(pb),
        multi_head([](const KvqBatch& s) { return attention(s); }, 2, pb)};
    for (int i = 0; i < 6; ++i) {
      worst_ops = std::max(worst_ops, max_abs(pouts[i] - rho2 * outs[i]));
    }
  }

  double worst_blocks = 0.0;
  const BlockSpec::Kind kinds[5] = {
      BlockSpec::Kind::Informer, BlockSpec::Kind::SigmaInformer,
      BlockSpec::Kind::Transformer, BlockSpec::Kind::LinTransformer,
      BlockSpec::Kind::NpFormer};
  for (int k = 0; k < 5; ++k) {
    RngStream init(seed, 0xB10C + k);
    BlockSpec spec;
    spec.kind = kinds[k];
    spec.layers = 1;
    spec.heads = 4;
    spec.model_width = 32;
    spec.hidden_width = 64;
    spec.input_dropout = 0.0;
    BlockModel model(init, 16, spec);
    for (int trial = 0; trial < 20; ++trial) {
      Matrix x = sample_normal(rng, 10, 16);
      Matrix rho = random_permutation(rng, 10);
      Tape ta, tb;
      Matrix base = model.logits(ta, x)->value;
      Matrix perm = model.logits(tb, Matrix(rho * x))->value;
      worst_blocks =
          std::max(worst_blocks, max_abs(perm - base * rho.transpose()));
    }
  }
  return {"permutation equivariance (100 op + 100 block tests)",
          worst_ops <= 1e-10 && worst_blocks <= 1e-8,
          "ops " + fmt(worst_ops) + ", blocks " + fmt(worst_blocks)};
}

CheckResult check_primal_dual(std::uint64_t seed) {
  RngStream rng(seed, 0xD0A1);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    KvqBatch b = random_batch(rng, 6, 4, 3, 2);
    for (double a : {0.0, 0.1}) {
      Matrix p = intention(b, AlphaSpec::fixed(a));
      Matrix d = intention_dual(b, AlphaSpec::fixed(a));
      worst = std::max(worst, max_abs(p - d) / std::max(1.0, max_abs(p)));
    }
  }
  return {"primal/dual equality (100 instances, alpha 0 and 0.1)",
          worst <= 1e-8, "worst relative gap " + fmt(worst)};
}

Vector ridge_gd(const Matrix& x, const Vector& y, double C, int steps) {
  Vector w = Vector::Zero(x.cols());
  Matrix xtx = x.transpose() * x;
  const double lr = 1.0 / (2.0 * (xtx.eigenvalues().real().maxCoeff() + C));
  for (int s = 0; s < steps; ++s) {
    w -= lr * (2.0 * (xtx * w - x.transpose() * y) + 2.0 * C * w);
  }
  return w;
}

CheckResult check_solver_oracles(std::uint64_t seed) {
  RngStream rng(seed, 0x50CE);
  std::ostringstream detail;
  bool pass = true;

  {  // ridge vs 5000-step gradient descent
    Matrix x = sample_normal(rng, 20, 4);
    Vector y = sample_normal(rng, 20, 1).col(0);
    LabeledData d{x, y, std::nullopt, std::nullopt};
    const double gap =
        (ridge_fit(d, 0.7) - ridge_gd(x, y, 0.7, 5000)).cwiseAbs().maxCoeff();
    pass &= gap <= 1e-4;
    detail << "ridge-gd " << gap;
  }
  {  // weighted ridge vs replication
    Matrix x = sample_normal(rng, 10, 3);
    Vector y = sample_normal(rng, 10, 1).col(0);
    Vector w = Vector::Ones(10);
    w(2) = 3.0;
    LabeledData d{x, y, w, std::nullopt};
    Matrix xr(12, 3);
    Vector yr(12);
    Index r = 0;
    for (Index i = 0; i < 10; ++i) {
      const int copies = i == 2 ? 3 : 1;
      for (int c = 0; c < copies; ++c) {
        xr.row(r) = x.row(i);
        yr(r) = y(i);
        ++r;
      }
    }
    LabeledData drep{xr, yr, std::nullopt, std::nullopt};
    const double gap = (weighted_ridge_fit(d, 0.4) - ridge_fit(drep, 0.4))
                           .cwiseAbs()
                           .maxCoeff();
    pass &= gap <= 1e-10;
    detail << ", replication " << gap;
  }
  {  // separable blobs classify perfectly
    Matrix x(40, 3);
    Vector y(40);
    for (Index i = 0; i < 40; ++i) {
      const bool pos = i < 20;
      x(i, 0) = rng.next_normal(pos ? 3.0 : -3.0, 0.5);
      x(i, 1) = rng.next_normal(pos ? 3.0 : -3.0, 0.5);
      x(i, 2) = 1.0;
      y(i) = pos ? 1.0 : 0.0;
    }
    LabeledData d{x, y, std::nullopt, Index(2)};
    Vector w = lssvm_fit(d, 0.1);
    int correct = 0;
    for (Index i = 0; i < 40; ++i) {
      correct += ((x.row(i).dot(w) > 0) == (y(i) == 1.0)) ? 1 : 0;
    }
    pass &= correct == 40;
    detail << ", ls-svm " << correct << "/40";
  }
  {  // LDA relabeling identity
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      Matrix x = sample_normal(rng, 14, 4);
      Vector y(14);
      for (Index i = 0; i < 14; ++i) {
        y(i) = rng.next_uniform() < 0.5 ? 0.0 : 1.0;
      }
      if (y.sum() == 0 || y.sum() == 14) continue;
      Vector lhs = x.transpose() * discriminant_relabel(y);
      Vector mu0 = Vector::Zero(4), mu1 = Vector::Zero(4);
      double n0 = 0, n1 = 0;
      for (Index i = 0; i < 14; ++i) {
        if (y(i) == 1.0) {
          mu1 += x.row(i).transpose();
          n1 += 1;
        } else {
          mu0 += x.row(i).transpose();
          n0 += 1;
        }
      }
      worst = std::max(
          worst, (lhs - (mu1 / n1 - mu0 / n0)).cwiseAbs().maxCoeff());
    }
    pass &= worst <= 1e-10;
    detail << ", lda-identity " << worst;
  }
  {  // constrained projection
    Matrix g = sample_normal(rng, 5, 3);
    Matrix z = g.transpose() * g + 0.3 * Matrix::Identity(3, 3);
    Vector w(3);
    w << 1.0, -2.0, 0.5;
    Matrix c = Matrix::Identity(3, 3);
    Vector lo = Vector::Zero(3);
    Vector out = constrained_project(w, z, c, lo);
    pass &= std::abs(out(1)) <= 1e-8;  // equality on the violated row
    Vector satisfied = constrained_project(out.cwiseMax(0.0), z, c, lo);
    pass &= (satisfied - out.cwiseMax(0.0)).cwiseAbs().maxCoeff() == 0.0;
    detail << ", projection " << std::abs(out(1));
  }
  return {"solver oracle equivalence", pass, detail.str()};
}

CheckResult check_gradients(std::uint64_t seed) {
  RngStream rng(seed, 0x9AD);
  double worst = 0.0;
  auto away_from_kink = [&](Index r, Index c) {
    Matrix m = sample_normal(rng, r, c);
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < c; ++j)
        while (std::abs(m(i, j)) < 0.1) m(i, j) = rng.next_normal();
    return m;
  };

  using F = testing::ForwardFn;
  auto check_op = [&](const F& f, const std::function<std::vector<Matrix>()>& gen) {
    for (int i = 0; i < 20; ++i) {
      worst = std::max(worst, testing::gradcheck(f, gen(), rng).max_rel_err);
    }
  };

  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_matmul(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4), sample_normal(rng, 4, 2)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_add(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4), sample_normal(rng, 1, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_transpose(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([&](Tape& t, const std::vector<NodePtr>& in) {
    return op_relu(t, in[0]);
  }, [&] { return std::vector<Matrix>{away_from_kink(3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_leaky_relu(t, in[0], 0.01);
  }, [&] { return std::vector<Matrix>{away_from_kink(3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_softmax_rows(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_layernorm_rows(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_mean_rows(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_concat_cols(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 2), sample_normal(rng, 3, 3)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_rowmul(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4), sample_normal(rng, 1, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_sigmoid(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_softplus(t, in[0]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_repeat_rows(t, in[0], 4);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 1, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_reshape_from_row(t, op_flatten_to_row(t, in[0]), 4, 3);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_add_scaled_identity(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 4, 4), sample_normal(rng, 1, 1)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_convex_mix_identity(t, in[0], op_sigmoid(t, in[1]));
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 4, 4), sample_normal(rng, 1, 1)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_scale_node(t, in[0], in[1]);
  }, [&] { return std::vector<Matrix>{sample_normal(rng, 3, 4), sample_normal(rng, 1, 1)}; });
  check_op([](Tape& t, const std::vector<NodePtr>& in) {
    return op_inverse(t, in[0]);
  }, [&] {
    Matrix g = sample_normal(rng, 6, 4);
    return std::vector<Matrix>{Matrix(g.transpose() * g +
                                      0.5 * Matrix::Identity(4, 4))};
  });

  const double op_worst = worst;

  // full intention-module forward + MSE loss wrt every parameter
  double module_worst = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    RngStream init(seed, 0x31AD + inst);
    IntentionModule::Config cfg;
    cfg.ek = {5};
    cfg.ev = {4};
    cfg.eq = {5};
    cfg.ew = {4};
    cfg.alpha = AlphaSpec::softplus(-1.0);
    IntentionModule mod(init, 3, 2, 3, cfg);
    KvqBatch b = random_batch(rng, 7, 4, 3, 2);
    Matrix target = sample_normal(rng, 4, 4);
    ParamSet ps;
    mod.collect(ps, "m");
    auto loss_value = [&] {
      Tape t;
      return loss_mse(t, mod.forward(t, b).predictions, target)->value(0, 0);
    };
    auto backward = [&] {
      zero_grad(ps.nodes());
      Tape t;
      t.backward(loss_mse(t, mod.forward(t, b).predictions, target));
    };
    module_worst =
        std::max(module_worst, testing::param_gradcheck_max_rel_err(
                                   loss_value, backward, ps.nodes()));
  }
  return {"gradient checks (20 instances per op + intention module)",
          op_worst <= 1e-4 && module_worst <= 1e-4,
          "ops " + fmt(op_worst) + ", module " + fmt(module_worst)};
}

CheckResult check_untrained_bias(std::uint64_t seed) {
  RngStream rng(seed, 0xF16);
  std::vector<double> r_int_in, r_int_ex, r_att_ex, mse_int, mse_att;
  for (int s = 0; s < 100; ++s) {
    auto pair = gen_linreg2d(rng, 20, 50, 50);
    Matrix p_in = intention(pair.interp.kvq, AlphaSpec::fixed(0.0));
    Matrix p_ex = intention(pair.extrap.kvq, AlphaSpec::fixed(0.0));
    Matrix a_in = attention(pair.interp.kvq);
    Matrix a_ex = attention(pair.extrap.kvq);
    auto push = [](std::vector<double>& v, std::optional<double> r) {
      if (r) v.push_back(*r);
    };
    push(r_int_in, pearson_r(p_in.col(0), pair.interp.target.col(0)));
    push(r_int_ex, pearson_r(p_ex.col(0), pair.extrap.target.col(0)));
    push(r_att_ex, pearson_r(a_ex.col(0), pair.extrap.target.col(0)));
    mse_int.push_back(mse(p_in, pair.interp.target));
    mse_att.push_back(mse(a_in, pair.interp.target));
  }
  const double med_int_in = quantile(r_int_in, 0.5);
  const double med_int_ex = quantile(r_int_ex, 0.5);
  const double med_att_ex = quantile(r_att_ex, 0.5);
  const double med_mse_int = quantile(mse_int, 0.5);
  const double med_mse_att = quantile(mse_att, 0.5);
  const bool pass = med_int_in >= 0.999999 && med_int_ex >= 0.999999 &&
                    med_att_ex <= 0.9 && med_mse_int <= 1e-10 &&
                    med_mse_att > 0.1;
  return {"untrained inductive bias (100 seeds)", pass,
          "median r: intention interp " + fmt(med_int_in) + ", extrap " +
              fmt(med_int_ex) + ", attention extrap " + fmt(med_att_ex) +
              "; median mse: intention " + fmt(med_mse_int) + ", attention " +
              fmt(med_mse_att)};
}

CheckResult check_normalization(std::uint64_t seed) {
  RngStream rng(seed, 0x407);
  bool pass = true;
  std::ostringstream detail;
  for (Index d : {128, 256, 512}) {
    const double v = variance_probe(ScaledVariant::Scaled, 32, d, 150, rng);
    pass &= v >= 0.5 && v <= 2.0;
    detail << "scaled d=" << d << ": " << v << "  ";
  }
  const double vu = variance_probe(ScaledVariant::Unscaled, 16, 4096, 100, rng);
  pass &= vu < 0.05;
  detail << "unscaled d=4096: " << vu;
  return {"normalization variances", pass, detail.str()};
}

}  // namespace

std::vector<CheckResult> selftest_fast(std::uint64_t seed) {
  std::vector<CheckResult> out;
  out.push_back(check_fls_witness());
  out.push_back(check_theorem_limits(seed));
  out.push_back(check_equivariance(seed));
  out.push_back(check_primal_dual(seed));
  out.push_back(check_solver_oracles(seed));
  out.push_back(check_gradients(seed));
  out.push_back(check_untrained_bias(seed));
  out.push_back(check_normalization(seed));
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    if (!r.pass) return false;
  }
  return true;
}

}  // namespace ikit
