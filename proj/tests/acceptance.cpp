// Acceptance suite: one pass/fail line per criterion.
//
//   acceptance [--criteria 1,2,...] [--seed S] [--strict-bench]
//
// Criterion 14 (timing) is hardware dependent and warns instead of failing
// unless --strict-bench is given.

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ikit/bench.hpp"
#include "ikit/config.hpp"
#include "ikit/selftest.hpp"

using namespace ikit;

namespace {

struct Outcome {
  int id = 0;
  std::string name;
  bool pass = false;
  bool soft = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

TrainResult train_module(TaskKind kind, const TaskSpec& ts,
                         const ModuleSpec& ms, const OptimSpec& optim,
                         const TrainOptions& opts, std::uint64_t seed,
                         Index input_dim) {
  Task task(ts);
  RngStream init(seed, 0x319);
  auto model = make_task_model(kind, ms, input_dim, init);
  return train_model(task, *model, optim, opts, seed);
}

// --- criterion 8: sine few-shot ---------------------------------------------

Outcome criterion_sine(std::uint64_t seed) {
  TaskSpec ts;
  ts.kind = TaskKind::Sine;
  ts.context_n = 10;
  ts.query_m = 200;
  ts.seed = seed;

  TrainOptions opts;
  opts.steps = 5000;
  opts.batch = 8;
  opts.eval_every = 1000;
  opts.eval_instances = 200;

  ModuleSpec intention_spec;
  intention_spec.kind = "intention";
  intention_spec.alpha = AlphaSpec::softplus(-9.0);
  intention_spec.widths = {128, 128};
  TrainResult ti = train_module(TaskKind::Sine, ts, intention_spec,
                                OptimSpec::adam(3e-4), opts, seed, 1);

  ModuleSpec np_spec;
  np_spec.kind = "np";
  np_spec.widths = {128, 128};
  TrainResult tn = train_module(TaskKind::Sine, ts, np_spec,
                                OptimSpec::adam(3e-4), opts, seed, 1);

  const bool halved = !ti.aborted && ti.final_eval <= 0.5 * ti.initial_eval;
  const bool beats_np = ti.initial_eval <= tn.final_eval;
  Outcome o{8, "sine few-shot (trained vs untrained intention, vs trained NP)",
            halved && beats_np && !tn.aborted, false,
            "intention untrained " + fmt(ti.initial_eval) + " -> trained " +
                fmt(ti.final_eval) + "; trained NP " + fmt(tn.final_eval)};
  return o;
}

// --- criterion 9: policy distillation ----------------------------------------

Outcome criterion_policy(std::uint64_t seed) {
  TaskSpec ts;
  ts.kind = TaskKind::Policy;
  ts.context_n = 5;
  ts.query_m = 5;
  ts.noise = 0.05;
  ts.seed = seed;
  Task task(ts);

  TrainOptions opts;
  opts.steps = 10000;
  opts.batch = 8;
  opts.eval_every = 2000;
  opts.eval_instances = 500;

  ModuleSpec intention_spec;
  intention_spec.kind = "intention";
  intention_spec.alpha = AlphaSpec::softplus(-2.0);
  TrainResult ti = train_module(TaskKind::Policy, ts, intention_spec,
                                OptimSpec::adam(3e-4), opts, seed, 3);

  ModuleSpec mlp_spec;
  mlp_spec.kind = "mlp";
  TrainResult tm = train_module(TaskKind::Policy, ts, mlp_spec,
                                OptimSpec::adam(3e-4), opts, seed, 3);

  // trilateration floor on the same noisy observations
  double oracle = 0.0;
  auto eval_set = task.eval_set(opts.eval_instances);
  for (const auto& inst : eval_set) {
    Vector t = trilaterate(inst.kvq.K);
    oracle += mse(Matrix(t.transpose()), inst.target);
  }
  oracle /= static_cast<double>(eval_set.size());

  const bool beats_mlp = ti.final_eval <= 0.5 * tm.final_eval;
  const bool near_oracle = ti.final_eval <= 10.0 * oracle;
  Outcome o{9, "policy distillation (intention vs MLP vs oracle floor)",
            beats_mlp && near_oracle && !ti.aborted && !tm.aborted, false,
            "intention " + fmt(ti.final_eval) + ", mlp " + fmt(tm.final_eval) +
                ", trilateration floor " + fmt(oracle)};
  return o;
}

// --- criterion 10: generalized Kabsch ----------------------------------------

Outcome criterion_kabsch(std::uint64_t seed) {
  TaskSpec ts;
  ts.kind = TaskKind::Kabsch;
  ts.context_n = 5;
  ts.query_m = 5;
  ts.noise = 0.05;
  ts.seed = seed;
  Task task(ts);

  TrainOptions opts;
  opts.steps = 10000;
  opts.batch = 8;
  opts.eval_every = 2000;
  opts.eval_instances = 500;

  ModuleSpec intention_spec;
  intention_spec.kind = "intention";
  intention_spec.alpha = AlphaSpec::softplus(-2.0);
  TrainResult ti = train_module(TaskKind::Kabsch, ts, intention_spec,
                                OptimSpec::adam(3e-4), opts, seed, 2);

  ModuleSpec mlp_spec;
  mlp_spec.kind = "mlp";
  TrainResult tm = train_module(TaskKind::Kabsch, ts, mlp_spec,
                                OptimSpec::adam(3e-4), opts, seed, 2);

  double oracle = 0.0;
  auto eval_set = task.eval_set(opts.eval_instances);
  for (const auto& inst : eval_set) {
    SimilarityTransform fit = umeyama_fit(inst.kvq.K, inst.kvq.V);
    oracle += mse(fit.apply(inst.kvq.Q), inst.target);
  }
  oracle /= static_cast<double>(eval_set.size());

  const bool wide_margin = ti.final_eval <= 0.2 * tm.final_eval;
  const bool bounded_below = ti.final_eval >= oracle * (1.0 - 1e-9);
  Outcome o{10, "kabsch (intention vs MLP, Umeyama floor)",
            wide_margin && bounded_below && !ti.aborted && !tm.aborted, false,
            "intention " + fmt(ti.final_eval) + ", mlp " + fmt(tm.final_eval) +
                ", umeyama floor " + fmt(oracle)};
  return o;
}

// --- criterion 11: anomaly toy ------------------------------------------------

Outcome criterion_anomaly(std::uint64_t seed) {
  TaskSpec ts;
  ts.kind = TaskKind::Anomaly;
  ts.context_n = 10;
  ts.dim = 32;
  ts.class_sep = 6.0;
  ts.seed = seed;
  Task task(ts);

  TrainOptions opts;
  opts.steps = 2000;
  opts.batch = 12;
  opts.eval_every = 500;
  opts.eval_instances = 400;

  OptimSpec optim = OptimSpec::adam(3e-4);
  optim.schedule = Schedule::cosine_warmup(3e-4, 100);

  auto run_block = [&](int layers) {
    BlockSpec spec;
    spec.kind = BlockSpec::Kind::SigmaInformer;
    spec.layers = layers;
    spec.heads = 4;
    spec.model_width = 64;
    spec.hidden_width = 128;
    spec.input_dropout = 0.2;
    RngStream init(seed, 0x319 + layers);
    auto model = make_block_task_model(spec, ts.dim, init);
    return train_model(task, *model, optim, opts, seed);
  };

  TrainResult one = run_block(1);
  TrainResult four = run_block(4);
  const bool pass = !one.aborted && !four.aborted && one.final_eval >= 0.90 &&
                    four.final_eval >= one.final_eval - 0.01;
  Outcome o{11, "anomaly toy (sigma-informer accuracy, layer trend)", pass,
            false,
            "1-layer " + fmt(one.final_eval) + ", 4-layer " +
                fmt(four.final_eval)};
  return o;
}

// --- criterion 12: scaling ------------------------------------------------------

Outcome criterion_scaling(std::uint64_t seed) {
  WidthSearchOptions opts;  // pinned desk-scale protocol
  opts.start_width = 2;
  opts.cap = 64;
  opts.steps = 1500;
  opts.batch = 32;
  opts.tolerance = 0.05;
  opts.eval_instances = 200;

  std::ostringstream detail;
  std::vector<Index> int_widths, mlp_widths;
  for (int d = 2; d <= 6; ++d) {
    WidthSearchResult ri = scaling_width_search("intention", d, opts, seed);
    WidthSearchResult rm = scaling_width_search("mlp", d, opts, seed);
    int_widths.push_back(ri.minimal_passing);
    mlp_widths.push_back(rm.minimal_passing);
    detail << "d=" << d << ": intention " << ri.minimal_passing << ", mlp "
           << rm.minimal_passing << "; ";
  }
  bool int_constant = true;
  for (Index w : int_widths) {
    if (w != int_widths.front() || w < 0 || w > 32) int_constant = false;
  }
  bool mlp_increasing = true;
  for (std::size_t i = 1; i < mlp_widths.size(); ++i) {
    const Index prev = mlp_widths[i - 1] < 0 ? opts.cap * 2 : mlp_widths[i - 1];
    const Index cur = mlp_widths[i] < 0 ? opts.cap * 2 : mlp_widths[i];
    if (cur <= prev) mlp_increasing = false;
  }
  Outcome o{12, "scaling widths (intention constant <= 32, MLP increasing)",
            int_constant && mlp_increasing, false, detail.str()};
  return o;
}

// --- criterion 14: timing (soft) ------------------------------------------------

Outcome criterion_bench(std::uint64_t seed) {
  BenchGrid grid;
  grid.n_values = {64, 128, 256, 512};
  grid.d_values = {64, 128, 256, 512};
  grid.repetitions = 5;
  grid.warmup = 1;
  RngStream rng(seed, 0xBE7C);
  auto att = time_forward(BenchOp::Attention, grid, rng);
  auto inte = time_forward(BenchOp::Intention, grid, rng);
  auto ratios = slowdown_ratio(att, inte);
  const double med = quantile(ratios, 0.5);
  const double slope_att = loglog_slope_in_n(att, 512);
  const double slope_int = loglog_slope_in_n(inte, 512);
  const bool pass = med >= 0.5 && med <= 10.0 && slope_att >= 1.6 &&
                    slope_att <= 2.6 && slope_int >= 1.6 && slope_int <= 2.6;
  Outcome o{14, "timing (median slowdown in [0.5,10], slopes in [1.6,2.6])",
            pass, true,
            "median slowdown " + fmt(med) + ", slopes attention " +
                fmt(slope_att) + " / intention " + fmt(slope_int)};
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  std::uint64_t seed = 0;
  bool strict_bench = false;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criteria") == 0 && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) wanted.insert(std::stoi(item));
    } else if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc) {
      seed = std::strtoull(argv[++i], nullptr, 10);
    } else if (std::strcmp(argv[i], "--strict-bench") == 0) {
      strict_bench = true;
    } else {
      std::fprintf(stderr, "usage: acceptance [--criteria 1,2,...] [--seed S] "
                           "[--strict-bench]\n");
      return 2;
    }
  }
  auto selected = [&](int id) { return wanted.empty() || wanted.count(id); };

  std::vector<Outcome> outcomes;

  // criteria 1-7 and 13 are the fast property suite
  const int fast_ids[8] = {1, 2, 3, 4, 5, 6, 7, 13};
  bool need_fast = false;
  for (int id : fast_ids) need_fast |= selected(id);
  if (need_fast) {
    auto fast = selftest_fast(seed);
    for (int i = 0; i < 8; ++i) {
      if (!selected(fast_ids[i])) continue;
      outcomes.push_back(Outcome{fast_ids[i], fast[i].name, fast[i].pass,
                                 false, fast[i].detail});
    }
  }
  if (selected(8)) outcomes.push_back(criterion_sine(seed));
  if (selected(9)) outcomes.push_back(criterion_policy(seed));
  if (selected(10)) outcomes.push_back(criterion_kabsch(seed));
  if (selected(11)) outcomes.push_back(criterion_anomaly(seed));
  if (selected(12)) outcomes.push_back(criterion_scaling(seed));
  if (selected(14)) outcomes.push_back(criterion_bench(seed));

  std::sort(outcomes.begin(), outcomes.end(),
            [](const Outcome& a, const Outcome& b) { return a.id < b.id; });

  bool failed = false;
  for (const auto& o : outcomes) {
    const char* tag = o.pass ? "PASS" : (o.soft && !strict_bench) ? "WARN" : "FAIL";
    std::printf("[%s] criterion %2d: %s — %s\n", tag, o.id, o.name.c_str(),
                o.detail.c_str());
    if (!o.pass && (!o.soft || strict_bench)) failed = true;
  }
  return failed ? 1 : 0;
}
