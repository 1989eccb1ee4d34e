#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ikit/blocks.hpp"
#include "ikit/optim.hpp"
#include "ikit/tasks.hpp"

using namespace ikit;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

BlockSpec small_spec(BlockSpec::Kind kind, int layers = 1) {
  BlockSpec s;
  s.kind = kind;
  s.layers = layers;
  s.heads = 4;
  s.model_width = 32;
  s.hidden_width = 64;
  s.input_dropout = 0.0;
  return s;
}

const std::vector<BlockSpec::Kind> kAllKinds{
    BlockSpec::Kind::Informer, BlockSpec::Kind::SigmaInformer,
    BlockSpec::Kind::Transformer, BlockSpec::Kind::LinTransformer,
    BlockSpec::Kind::NpFormer};

}  // namespace

TEST_CASE("head_forward: informer converges to the linear head as alpha -> 1") {
  RngStream rng(41, 0);
  Matrix ek = sample_normal(rng, 6, 4);
  Matrix ev = sample_normal(rng, 6, 3);
  Matrix eq = sample_normal(rng, 5, 4);
  Matrix lin = head_forward(BlockSpec::Kind::LinTransformer, ek, ev, eq,
                            AlphaSpec::fixed(0.0));
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {2.0, 8.0, 16.0, 25.0}) {
    Matrix inf = head_forward(BlockSpec::Kind::Informer, ek, ev, eq,
                              AlphaSpec::sigmoid(theta));
    const double gap = max_abs(inf - lin);
    CHECK(gap <= prev * (1.0 + 1e-9));
    prev = gap;
  }
  CHECK(prev <= 1e-6 * std::max(1.0, max_abs(lin)));
}

TEST_CASE("head_forward: singleton context returns the value row") {
  RngStream rng(42, 0);
  Matrix ek = sample_normal(rng, 1, 4);
  Matrix ev = sample_normal(rng, 1, 3);
  Matrix eq = sample_normal(rng, 5, 4);
  Matrix out = head_forward(BlockSpec::Kind::SigmaInformer, ek, ev, eq,
                            AlphaSpec::sigmoid(0.0));
  for (Index i = 0; i < 5; ++i) CHECK(max_abs(out.row(i) - ev.row(0)) < 1e-12);
}

TEST_CASE("head_forward: permutation equivariance") {
  RngStream rng(43, 0);
  for (auto kind :
       {BlockSpec::Kind::Informer, BlockSpec::Kind::SigmaInformer,
        BlockSpec::Kind::Transformer, BlockSpec::Kind::LinTransformer}) {
    Matrix ek = sample_normal(rng, 6, 4);
    Matrix ev = sample_normal(rng, 6, 3);
    Matrix eq = sample_normal(rng, 5, 4);
    Matrix rho1 = random_permutation(rng, 6);
    Matrix rho2 = random_permutation(rng, 5);
    AlphaSpec a = AlphaSpec::sigmoid(-0.3);
    Matrix base = head_forward(kind, ek, ev, eq, a);
    Matrix perm = head_forward(kind, rho1 * ek, rho1 * ev, rho2 * eq, a);
    CHECK(max_abs(perm - rho2 * base) < 1e-8);
  }
}

TEST_CASE("block layer with zeroed head and e_O output is LayerNorm twice") {
  RngStream rng(44, 0);
  BlockSpec spec = small_spec(BlockSpec::Kind::Transformer);
  BlockLayer layer(rng, spec);
  ParamSet ps;
  layer.collect(ps, "L");
  for (auto& [name, p] : ps.items) {
    if (name.find(".merge.") != std::string::npos ||
        name.find(".e_o.l1.") != std::string::npos) {
      p->value.setZero();
    }
  }
  Matrix x = sample_normal(rng, 10, spec.model_width);
  Tape t;
  NodePtr out = layer.forward(t, make_const(x));

  Tape t2;
  NodePtr twice =
      op_layernorm_rows(t2, op_layernorm_rows(t2, make_const(x)));
  CHECK(max_abs(out->value - twice->value) < 1e-10);
}

TEST_CASE("stacking is non-degenerate") {
  RngStream rng1(45, 0), rng4(45, 0);
  BlockModel one(rng1, 16, small_spec(BlockSpec::Kind::SigmaInformer, 1));
  BlockModel four(rng4, 16, small_spec(BlockSpec::Kind::SigmaInformer, 4));
  RngStream data(46, 0);
  Matrix x = sample_normal(data, 10, 16);
  Tape ta, tb;
  Matrix la = one.logits(ta, x)->value;
  Matrix lb = four.logits(tb, x)->value;
  CHECK(max_abs(la - lb) > 1e-8);
}

TEST_CASE("gradient reaches every parameter in every block kind") {
  for (auto kind : kAllKinds) {
    RngStream rng(47, static_cast<std::uint64_t>(kind));
    BlockModel model(rng, 16, small_spec(kind, 2));
    RngStream data(48, 0);
    Matrix x = sample_normal(data, 10, 16);
    ParamSet ps = model.params();
    zero_grad(ps.nodes());
    Tape t;
    NodePtr logits = model.logits(t, x);
    NodePtr loss = loss_softmax_xent(t, logits, {3});
    t.backward(loss);
    for (auto& [name, p] : ps.items) {
      // the readout bias shifts every logit equally; softmax cross-entropy
      // is invariant to that shift, so its gradient is identically zero
      if (name == "readout.b") continue;
      INFO("parameter ", name);
      CHECK(p->grad.cwiseAbs().maxCoeff() > 0.0);
    }
  }
}

TEST_CASE("np head: mean aggregation is permutation and duplication invariant") {
  RngStream rng(49, 0);
  NpHead head(rng, 8, 8, 16);
  Matrix ek = sample_normal(rng, 6, 8);
  Matrix ev = sample_normal(rng, 6, 8);
  Matrix eq = sample_normal(rng, 4, 8);

  Tape t;
  Matrix base =
      head.forward(t, make_const(ek), make_const(ev), make_const(eq))->value;

  Matrix rho = random_permutation(rng, 6);
  Tape t2;
  Matrix perm = head.forward(t2, make_const(Matrix(rho * ek)),
                             make_const(Matrix(rho * ev)), make_const(eq))
                    ->value;
  CHECK(max_abs(base - perm) < 1e-12);

  // doubling every context row leaves the mean aggregate unchanged
  Matrix ek2(12, 8), ev2(12, 8);
  ek2 << ek, ek;
  ev2 << ev, ev;
  Tape t3;
  Matrix doubled =
      head.forward(t3, make_const(ek2), make_const(ev2), make_const(eq))
          ->value;
  CHECK(max_abs(base - doubled) < 1e-12);

  // N=1: aggregation is just the single embedded pair
  Tape t4;
  Matrix single = head.forward(t4, make_const(Matrix(ek.topRows(1))),
                               make_const(Matrix(ev.topRows(1))),
                               make_const(eq))
                      ->value;
  CHECK(single.rows() == 4);
}

TEST_CASE("block logits are permutation equivariant for every kind") {
  for (auto kind : kAllKinds) {
    RngStream rng(50, static_cast<std::uint64_t>(kind));
    BlockModel model(rng, 16, small_spec(kind, 1));
    RngStream data(51, 0);
    Matrix x = sample_normal(data, 10, 16);
    Matrix rho = random_permutation(data, 10);
    Tape ta, tb;
    Matrix base = model.logits(ta, x)->value;            // 1 x 10
    Matrix perm = model.logits(tb, Matrix(rho * x))->value;
    CHECK(max_abs(perm - base * rho.transpose()) < 1e-8);
  }
}

TEST_CASE("informer head approaches the lin-transformer head as theta grows") {
  RngStream rng(52, 0);
  BlockSpec spec = small_spec(BlockSpec::Kind::Informer);
  BlockLayer layer(rng, spec);
  Matrix ek = sample_normal(rng, 8, 8);
  Matrix ev = sample_normal(rng, 8, 8);
  Matrix eq = sample_normal(rng, 8, 8);
  ParamSet ps;
  layer.collect(ps, "L");
  std::vector<NodePtr> thetas;
  for (auto& [name, p] : ps.items) {
    if (name.find("theta_sigma") != std::string::npos) thetas.push_back(p);
  }
  REQUIRE(!thetas.empty());
  Matrix lin = (eq * ek.transpose()) * ev;
  double prev = std::numeric_limits<double>::infinity();
  for (double theta : {2.0, 12.0, 25.0}) {
    for (auto& th : thetas) th->value(0, 0) = theta;
    Tape t;
    Matrix out = layer
                     .head_mix(t, make_const(ek), make_const(ev),
                               make_const(eq), 0)
                     ->value;
    const double gap = max_abs(out - lin);
    CHECK(gap < prev + 1e-12);
    prev = gap;
  }
  CHECK(prev <= 1e-6 * std::max(1.0, max_abs(lin)));
}

TEST_CASE("dropout only acts in training mode and draws from the stream") {
  RngStream rng(53, 0);
  BlockSpec spec = small_spec(BlockSpec::Kind::Transformer);
  spec.input_dropout = 0.2;
  BlockModel model(rng, 16, spec);
  RngStream data(54, 0);
  Matrix x = sample_normal(data, 10, 16);
  Tape ta, tb;
  Matrix eval1 = model.logits(ta, x, false)->value;
  Matrix eval2 = model.logits(tb, x, false)->value;
  CHECK(max_abs(eval1 - eval2) == 0.0);

  RngStream d1(55, 0), d2(55, 0), d3(56, 0);
  Tape tc, td, te;
  Matrix tr1 = model.logits(tc, x, true, &d1)->value;
  Matrix tr2 = model.logits(td, x, true, &d2)->value;
  Matrix tr3 = model.logits(te, x, true, &d3)->value;
  CHECK(max_abs(tr1 - tr2) == 0.0);   // same stream, same mask
  CHECK(max_abs(tr1 - tr3) > 0.0);    // different stream, different mask
}

TEST_CASE("optimizer steps") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Matrix p = Matrix::Constant(2, 2, 1.5);
    Matrix p0 = p;
    AdamState st;
    adam_step(p, Matrix::Zero(2, 2), st, 0.1);
    CHECK(max_abs(p - p0) == 0.0);

    MomentumState ms;
    Matrix q = p0;
    sgd_momentum_step(q, Matrix::Zero(2, 2), ms, 0.1, 0.9, 0.0);
    CHECK(max_abs(q - p0) == 0.0);
    // weight decay alone shifts parameters
    Matrix r = p0;
    MomentumState ms2;
    sgd_momentum_step(r, Matrix::Zero(2, 2), ms2, 0.1, 0.9, 0.01);
    CHECK(max_abs(r - p0) > 0.0);
  }
  SUBCASE("sgd momentum accumulates velocity") {
    Matrix p = Matrix::Zero(1, 1);
    MomentumState st;
    Matrix g = Matrix::Constant(1, 1, 1.0);
    sgd_momentum_step(p, g, st, 0.1, 0.9, 0.0);
    CHECK(p(0, 0) == doctest::Approx(-0.1));
    sgd_momentum_step(p, g, st, 0.1, 0.9, 0.0);
    CHECK(p(0, 0) == doctest::Approx(-0.1 - 0.19));
  }
  SUBCASE("adam drives a convex quadratic to zero") {
    Matrix w = Matrix::Constant(1, 1, 1.0);
    AdamState st;
    for (int s = 0; s < 2000; ++s) {
      Matrix g = 2.0 * w;  // d/dw w^2
      adam_step(w, g, st, 1e-2);
    }
    CHECK(std::abs(w(0, 0)) < 1e-3);
  }
}

TEST_CASE("learning-rate schedules") {
  CHECK(lr_at(Schedule::constant(0.3), 12345) == 0.3);

  Schedule cos = Schedule::cosine_warmup(0.1, 100);
  CHECK(lr_at(cos, 0) == 0.0);
  CHECK(lr_at(cos, 100) == doctest::Approx(0.1));
  CHECK(lr_at(cos, 5000) == doctest::Approx(0.1));
  CHECK(lr_at(cos, 50) == doctest::Approx(0.05));

  Schedule ex = Schedule::exponential(0.1, 0.8, 1000, 1000);
  CHECK(lr_at(ex, 0) == doctest::Approx(0.1));
  CHECK(lr_at(ex, 1000) == doctest::Approx(0.1));
  CHECK(lr_at(ex, 2000) == doctest::Approx(0.08));
  CHECK(lr_at(ex, 9000) == doctest::Approx(0.08));  // holds after the window
  CHECK(lr_at(ex, 1500) == doctest::Approx(0.1 * std::pow(0.8, 0.5)));
}

TEST_CASE("200 optimizer steps halve the anomaly training loss per kind") {
  TaskSpec ts;
  ts.kind = TaskKind::Anomaly;
  ts.context_n = 10;
  ts.dim = 16;
  ts.class_sep = 6.0;
  ts.seed = 99;
  Task task(ts);

  for (auto kind : kAllKinds) {
    CAPTURE(static_cast<int>(kind));
    RngStream rng(60, static_cast<std::uint64_t>(kind));
    BlockSpec spec = small_spec(kind, 1);
    spec.input_dropout = 0.0;
    BlockModel model(rng, 16, spec);
    ParamSet ps = model.params();
    Optimizer opt(OptimSpec::adam(1e-3), ps.nodes());
    RngStream data(61, 0);

    auto batch_loss = [&](bool update) {
      Tape t;
      NodePtr total;
      for (int b = 0; b < 8; ++b) {
        TaskInstance inst = task.sample(data);
        NodePtr logits = model.logits(t, inst.kvq.K);
        NodePtr l = loss_softmax_xent(t, logits, {inst.label});
        total = total ? op_add(t, total, l) : l;
      }
      total = op_scale(t, total, 1.0 / 8.0);
      if (update) {
        zero_grad(ps.nodes());
        t.backward(total);
        opt.step();
      }
      return total->value(0, 0);
    };

    RngStream probe_rng(62, 0);
    const double initial = batch_loss(false);
    for (int s = 0; s < 200; ++s) batch_loss(true);
    // measure on fresh batches after training
    double after = 0.0;
    for (int i = 0; i < 5; ++i) after += batch_loss(false);
    after /= 5.0;
    CHECK(after <= 0.5 * initial);
  }
}
