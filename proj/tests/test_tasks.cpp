#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ikit/kvq.hpp"
#include "ikit/tasks.hpp"

using namespace ikit;

namespace {
double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }
}  // namespace

TEST_CASE("gen_linreg2d") {
  RngStream rng(70, 0);
  auto pair = gen_linreg2d(rng, 20, 50, 50);

  SUBCASE("construction is noiseless") {
    CHECK(max_abs(pair.interp.kvq.V - pair.interp.kvq.K * pair.w) == 0.0);
    CHECK(max_abs(*pair.interp.kvq.targets - pair.interp.kvq.Q * pair.w) ==
          0.0);
  }
  SUBCASE("untrained intention interpolates essentially perfectly") {
    Matrix pred = intention(pair.interp.kvq, AlphaSpec::fixed(0.0));
    auto r = pearson_r(pred.col(0), pair.interp.target.col(0));
    REQUIRE(r.has_value());
    CHECK(*r >= 0.999999);
  }
  SUBCASE("untrained attention extrapolates poorly (reported)") {
    double total = 0.0;
    int count = 0;
    RngStream mc(71, 0);
    for (int i = 0; i < 20; ++i) {
      auto p = gen_linreg2d(mc, 20, 20, 50);
      Matrix pred = attention(p.extrap.kvq);
      auto r = pearson_r(pred.col(0), p.extrap.target.col(0));
      if (r) {
        total += std::abs(*r);
        ++count;
      }
    }
    MESSAGE("mean |r| of untrained attention on extrapolation: ",
            total / count);
    CHECK(count > 0);
  }
  SUBCASE("fixed seed reproduces instances bitwise") {
    RngStream a(72, 3), b(72, 3);
    auto pa = gen_linreg2d(a, 10, 10, 10);
    auto pb = gen_linreg2d(b, 10, 10, 10);
    CHECK((pa.interp.kvq.K.array() == pb.interp.kvq.K.array()).all());
    CHECK((pa.extrap.kvq.Q.array() == pb.extrap.kvq.Q.array()).all());
  }
}

TEST_CASE("gen_scaling") {
  RngStream rng(73, 0);
  SUBCASE("d=1: W recoverable by one division") {
    TaskInstance inst = gen_scaling(rng, 1);
    Index row = 0;
    while (inst.kvq.K(row, 0) == 0.0) ++row;
    CHECK(inst.kvq.V(row, 0) / inst.kvq.K(row, 0) ==
          doctest::Approx(inst.target(0, 0)).epsilon(1e-12));
  }
  SUBCASE("pinv oracle recovers W exactly") {
    TaskInstance inst = gen_scaling(rng, 5);
    Matrix w_rec = pinv(inst.kvq.K) * inst.kvq.V;
    CHECK(max_abs(w_rec.transpose() - inst.target) < 1e-6);
  }
}

TEST_CASE("gen_sine") {
  RngStream rng(74, 0);
  for (int i = 0; i < 10; ++i) {
    TaskInstance inst = gen_sine(rng);
    CHECK(inst.kvq.K.rows() == 10);
    CHECK(inst.kvq.Q.rows() == 200);
    CHECK(max_abs(inst.target) <= 5.0);  // amplitude bound
    // every context point is one of the query points, with its curve value
    for (Index c = 0; c < 10; ++c) {
      bool found = false;
      for (Index q = 0; q < 200; ++q) {
        if (inst.kvq.Q(q, 0) == inst.kvq.K(c, 0)) {
          found = inst.target(q, 0) == inst.kvq.V(c, 0);
          break;
        }
      }
      CHECK(found);
    }
  }
  RngStream a(75, 1), b(75, 1);
  TaskInstance ia = gen_sine(a), ib = gen_sine(b);
  CHECK((ia.kvq.Q.array() == ib.kvq.Q.array()).all());
  CHECK((ia.target.array() == ib.target.array()).all());
}

TEST_CASE("gen_policy and the trilateration oracle") {
  RngStream rng(76, 0);
  SUBCASE("distances are non-negative and well-formed") {
    for (int i = 0; i < 20; ++i) {
      TaskInstance inst = gen_policy(rng);
      CHECK(inst.kvq.K.rows() == 5);
      CHECK(inst.kvq.K.cols() == 3);
      CHECK(inst.kvq.K.col(2).minCoeff() >= 0.0);
    }
  }
  SUBCASE("unit distance sanity") {
    Matrix obs(3, 3);
    obs << 1, 0, 1, 0, 1, 1, 0, 0, 0;  // target must be (0, 0)
    Vector t = trilaterate(obs);
    CHECK(max_abs(Matrix(t)) < 1e-10);
  }
  SUBCASE("oracle recovers the target from noiseless observations") {
    for (int i = 0; i < 20; ++i) {
      TaskInstance inst = gen_policy(rng, 0.0);
      Vector t = trilaterate(inst.kvq.K);
      CHECK(max_abs(Matrix(t.transpose() - inst.target)) < 1e-8);
    }
  }
  SUBCASE("noise moves the oracle off the exact answer") {
    TaskInstance inst = gen_policy(rng, 0.05);
    Vector t = trilaterate(inst.kvq.K);
    CHECK(max_abs(Matrix(t.transpose() - inst.target)) > 1e-8);
  }
}

TEST_CASE("gen_kabsch and the Umeyama oracle") {
  RngStream rng(77, 0);
  SUBCASE("noiseless fit maps queries onto targets") {
    for (int i = 0; i < 20; ++i) {
      TaskInstance inst = gen_kabsch(rng, 5, 7, 0.0);
      SimilarityTransform fit = umeyama_fit(inst.kvq.K, inst.kvq.V);
      CHECK(max_abs(fit.apply(inst.kvq.Q) - inst.target) < 1e-8);
    }
  }
  SUBCASE("identity transform on hand-built data") {
    Matrix pts(4, 2);
    pts << 0, 0, 1, 0, 0, 1, 1, 1;
    SimilarityTransform fit = umeyama_fit(pts, pts);
    CHECK(max_abs(fit.apply(pts) - pts) < 1e-10);
    CHECK(max_abs(fit.linear - Matrix::Identity(2, 2)) < 1e-10);
  }
  SUBCASE("pure translation is constant across rows") {
    Matrix pts(4, 2);
    pts << 0, 0, 1, 0, 0, 1, 2, 2;
    Matrix moved = pts;
    moved.rowwise() += Eigen::RowVector2d(3.0, -1.0);
    SimilarityTransform fit = umeyama_fit(pts, moved);
    Matrix diff = fit.apply(pts) - pts;
    for (Index i = 0; i < 4; ++i) {
      CHECK(max_abs(diff.row(i) - diff.row(0)) < 1e-10);
    }
  }
}

TEST_CASE("gen_anomaly_toy") {
  SUBCASE("huge separation makes the heuristic perfect") {
    RngStream rng(78, 0);
    for (int i = 0; i < 50; ++i) {
      TaskInstance inst = gen_anomaly_toy(rng, 10, 8, 100.0);
      CHECK(anomaly_loo_outlier(inst.kvq.K) == inst.label);
    }
  }
  SUBCASE("zero separation is chance level") {
    RngStream rng(79, 0);
    int hits = 0;
    const int trials = 400;
    for (int i = 0; i < trials; ++i) {
      TaskInstance inst = gen_anomaly_toy(rng, 10, 8, 0.0);
      hits += anomaly_loo_outlier(inst.kvq.K) == inst.label ? 1 : 0;
    }
    const double acc = static_cast<double>(hits) / trials;
    CHECK(acc < 0.2);  // 1/10 expected
    CHECK(acc > 0.02);
  }
  SUBCASE("the 6-sigma task is learnable: LOO heuristic >= 99%") {
    RngStream rng(80, 0);
    int hits = 0;
    const int trials = 500;
    for (int i = 0; i < trials; ++i) {
      TaskInstance inst = gen_anomaly_toy(rng, 10, 32, 6.0);
      hits += anomaly_loo_outlier(inst.kvq.K) == inst.label ? 1 : 0;
    }
    CHECK(static_cast<double>(hits) / trials >= 0.99);
  }
  SUBCASE("outlier position is uniform-ish") {
    RngStream rng(81, 0);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 1000; ++i) {
      counts[gen_anomaly_toy(rng, 10, 4, 3.0).label] += 1;
    }
    for (int c : counts) CHECK(c > 50);
  }
}

TEST_CASE("pearson correlation") {
  Vector x(5);
  x << 1, 2, 3, 4, 5;
  CHECK(*pearson_r(x, Vector(2 * x.array() + 1)) == doctest::Approx(1.0));
  CHECK(*pearson_r(x, Vector(-x)) == doctest::Approx(-1.0));
  CHECK(!pearson_r(x, Vector::Ones(5)).has_value());  // degenerate, not 0

  RngStream rng(82, 0);
  Vector a = sample_normal(rng, 50, 1).col(0);
  Vector b = sample_normal(rng, 50, 1).col(0);
  // direct covariance-formula oracle
  const double ma = a.mean(), mb = b.mean();
  double cov = 0, va = 0, vb = 0;
  for (Index i = 0; i < 50; ++i) {
    cov += (a(i) - ma) * (b(i) - mb);
    va += (a(i) - ma) * (a(i) - ma);
    vb += (b(i) - mb) * (b(i) - mb);
  }
  CHECK(*pearson_r(a, b) ==
        doctest::Approx(cov / std::sqrt(va * vb)).epsilon(1e-12));
}

TEST_CASE("mse and accuracy primitives") {
  Matrix p(2, 2), t(2, 2);
  p << 1, 2, 3, 4;
  t = p;
  CHECK(mse(p, t) == 0.0);

  // constant predictor on centered targets: MSE equals target variance
  RngStream rng(83, 0);
  Matrix targets = sample_normal(rng, 200, 1);
  targets.array() -= targets.mean();
  Matrix zeros = Matrix::Zero(200, 1);
  const double var = targets.array().square().mean();
  CHECK(mse(zeros, targets) == doctest::Approx(var).epsilon(1e-12));

  Matrix row(1, 4);
  row << 1.0, 3.0, 3.0, 2.0;
  CHECK(argmax_row(row) == 1);  // tie broken by lowest index
}

TEST_CASE("training harness") {
  TaskSpec ts;
  ts.kind = TaskKind::Scaling;
  ts.dim = 2;
  ts.seed = 5;
  Task task(ts);

  SUBCASE("steps=0 logs only the initialization evaluation") {
    ModuleSpec ms;
    ms.kind = "mlp";
    ms.widths = {8};
    RngStream rng(84, 0);
    auto model = make_task_model(TaskKind::Scaling, ms, 2, rng);
    TrainOptions opts;
    opts.steps = 0;
    opts.eval_instances = 10;
    TrainResult res = train_model(task, *model, OptimSpec::adam(1e-3), opts, 1);
    CHECK(res.log.size() == 1);
    CHECK(res.log[0].step == 0);
    CHECK(res.log[0].metric == "eval_mse");
  }
  SUBCASE("identical seeds give identical logs") {
    auto run = [&] {
      ModuleSpec ms;
      ms.kind = "mlp";
      ms.widths = {8};
      RngStream rng(85, 0);
      auto model = make_task_model(TaskKind::Scaling, ms, 2, rng);
      TrainOptions opts;
      opts.steps = 50;
      opts.batch = 4;
      opts.eval_every = 25;
      opts.eval_instances = 10;
      return run_log_csv(
          train_model(task, *model, OptimSpec::adam(1e-3), opts, 7).log);
    };
    CHECK(run() == run());
  }
  SUBCASE("convex probe: eval error decreases monotonically") {
    // a single linear layer on the scaling task is a convex problem
    ModuleSpec ms;
    ms.kind = "mlp";
    ms.widths = {2};
    RngStream rng(86, 0);
    auto model = make_task_model(TaskKind::Scaling, ms, 2, rng);
    TrainOptions opts;
    opts.steps = 400;
    opts.batch = 16;
    opts.eval_every = 100;
    opts.eval_instances = 50;
    TrainResult res = train_model(task, *model, OptimSpec::adam(1e-2), opts, 3);
    REQUIRE(!res.aborted);
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& r : res.log) {
      if (r.metric != "eval_mse") continue;
      CHECK(r.value <= prev * 1.1);
      prev = r.value;
    }
    CHECK(res.final_eval < 0.75 * res.initial_eval);
  }
}

TEST_CASE("run log csv format") {
  std::vector<RunRecord> log{{"sine", "intention", 7, 100, "eval_mse", 0.25}};
  const std::string csv = run_log_csv(log);
  CHECK(csv == "task,model,seed,step,metric,value\n"
               "sine,intention,7,100,eval_mse,0.25\n");
}

TEST_CASE("scaling width search smoke test") {
  WidthSearchOptions opts;
  opts.start_width = 2;
  opts.cap = 16;
  opts.steps = 200;
  opts.batch = 8;
  opts.tolerance = 0.9;  // loose: this is a plumbing test, not a calibration
  opts.eval_instances = 20;
  WidthSearchResult res = scaling_width_search("mlp", 2, opts, 11);
  CHECK(!res.tried.empty());
  bool any_record = false;
  for (const auto& r : res.log) {
    if (r.metric == "width_passed") any_record = true;
  }
  CHECK(any_record);
}

TEST_CASE("task eval set is model independent and deterministic") {
  TaskSpec ts;
  ts.kind = TaskKind::Sine;
  ts.seed = 42;
  Task task(ts);
  auto a = task.eval_set(3);
  auto b = task.eval_set(3);
  CHECK((a[2].kvq.Q.array() == b[2].kvq.Q.array()).all());
}
