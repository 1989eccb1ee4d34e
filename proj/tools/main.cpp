#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "ikit/bench.hpp"
#include "ikit/config.hpp"
#include "ikit/matrix_io.hpp"
#include "ikit/selftest.hpp"
#include "ikit/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ikit;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv("INTENTION_KIT_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

std::string timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_summary(const std::string& out_dir, json summary) {
  summary["timestamp"] = timestamp();
  write_text_file(out_dir + "/summary.json", summary.dump(2) + "\n");
}

Index task_input_dim(const TaskSpec& t) {
  switch (t.kind) {
    case TaskKind::Sine: return 1;
    case TaskKind::Kabsch: return 2;
    case TaskKind::Policy: return 3;
    case TaskKind::Linreg2d: return 2;
    case TaskKind::Scaling:
    case TaskKind::Anomaly: return t.dim;
  }
  return 1;
}

std::unique_ptr<TaskModel> build_model(const ExperimentConfig& c,
                                       std::uint64_t seed) {
  RngStream init(seed, 0x319);
  const Index dim = task_input_dim(c.task);
  if (c.use_block) return make_block_task_model(c.block, dim, init);
  return make_task_model(c.task.kind, c.model, dim, init);
}

std::vector<Index> parse_index_list(const std::string& csv) {
  std::vector<Index> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoll(item));
  }
  if (out.empty()) throw ContractError("empty list: " + csv);
  return out;
}

std::vector<std::string> parse_name_list(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// --- demo-linreg -------------------------------------------------------------

int run_demo_linreg(std::uint64_t seed, const std::string& out_dir,
                    Index context, Index queries, int trials) {
  std::vector<RunRecord> log;
  json table = json::object();
  const std::vector<std::string> models{"attention", "linear-attention",
                                        "intention", "sigma-intention"};
  std::map<std::string, std::vector<double>> collected;

  RngStream rng(seed, 0x11A);
  for (int trial = 0; trial < trials; ++trial) {
    auto pair = gen_linreg2d(rng, context, queries, queries);
    for (const auto& name : models) {
      auto apply = [&](const KvqBatch& b) -> Matrix {
        if (name == "attention") return attention(b);
        if (name == "linear-attention") return linear_attention(b);
        if (name == "intention") return intention(b, AlphaSpec::fixed(0.0));
        return sigma_intention(b, AlphaSpec::fixed(0.0));
      };
      for (const auto* split : {"interp", "extrap"}) {
        const TaskInstance& inst =
            std::string(split) == "interp" ? pair.interp : pair.extrap;
        Matrix pred = apply(inst.kvq);
        auto r = pearson_r(pred.col(0), inst.target.col(0));
        const double value = r ? *r : std::numeric_limits<double>::quiet_NaN();
        log.push_back(RunRecord{"linreg2d", name, seed, trial,
                                std::string("pearson_") + split, value});
        collected[name + "/" + split].push_back(value);
      }
    }
  }
  for (auto& [key, values] : collected) {
    table[key] = trials == 1 ? values[0] : quantile(values, 0.5);
  }
  write_text_file(out_dir + "/runlog.csv", run_log_csv(log));
  write_summary(out_dir, json{{"command", "demo-linreg"},
                              {"seed", seed},
                              {"trials", trials},
                              {"pearson_r", table}});
  std::printf("demo-linreg: %d trial(s), intention interp r = %s -> %s\n",
              trials,
              format_double(table["intention/interp"].get<double>()).c_str(),
              (out_dir + "/summary.json").c_str());
  return 0;
}

// --- scaling -----------------------------------------------------------------

int run_scaling(std::uint64_t seed, const std::string& out_dir,
                const std::string& dims_csv, const std::string& models_csv,
                WidthSearchOptions opts) {
  std::vector<RunRecord> log;
  json minimal = json::object();
  for (const auto& model : parse_name_list(models_csv)) {
    json per_d = json::object();
    for (Index d : parse_index_list(dims_csv)) {
      WidthSearchResult res =
          scaling_width_search(model, static_cast<int>(d), opts, seed);
      for (auto& r : res.log) log.push_back(r);
      per_d[std::to_string(d)] = res.minimal_passing;
      std::printf("scaling: %s d=%lld minimal width %lld\n", model.c_str(),
                  static_cast<long long>(d),
                  static_cast<long long>(res.minimal_passing));
    }
    minimal[model] = per_d;
  }
  write_text_file(out_dir + "/runlog.csv", run_log_csv(log));
  write_summary(out_dir, json{{"command", "scaling"},
                              {"seed", seed},
                              {"tolerance", opts.tolerance},
                              {"steps", opts.steps},
                              {"minimal_width", minimal}});
  return 0;
}

// --- train / eval ------------------------------------------------------------

int run_train(std::uint64_t seed, const std::string& out_dir,
              const std::string& config_path, int parallel_seeds) {
  ExperimentConfig cfg = config_path.empty() ? default_config()
                                             : load_config_file(config_path);
  write_text_file(out_dir + "/config.json", config_to_json(cfg) + "\n");
  Task task(cfg.task);

  struct PerSeed {
    std::uint64_t seed = 0;
    TrainResult result;
    std::string checkpoint;
  };
  std::vector<PerSeed> runs(parallel_seeds);
  const auto t0 = std::chrono::steady_clock::now();

  auto run_one = [&](int i) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(i);
    auto model = build_model(cfg, s);
    runs[i].seed = s;
    runs[i].result = train_model(task, *model, cfg.optim, cfg.train, s);
    ParamSet ps = model->params();
    runs[i].checkpoint = checkpoint_to_json(ps);
  };

  if (parallel_seeds == 1) {
    run_one(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(parallel_seeds);
    for (int i = 0; i < parallel_seeds; ++i) threads.emplace_back(run_one, i);
    for (auto& th : threads) th.join();
  }
  const double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();

  std::vector<RunRecord> combined;
  json per_seed = json::array();
  bool any_abort = false;
  for (int i = 0; i < parallel_seeds; ++i) {
    for (auto& r : runs[i].result.log) combined.push_back(r);
    const std::string ck = parallel_seeds == 1
                               ? out_dir + "/checkpoint.json"
                               : out_dir + "/checkpoint_seed" +
                                     std::to_string(runs[i].seed) + ".json";
    write_text_file(ck, runs[i].checkpoint + "\n");
    per_seed.push_back(json{{"seed", runs[i].seed},
                            {"initial_eval", runs[i].result.initial_eval},
                            {"final_eval", runs[i].result.final_eval},
                            {"aborted", runs[i].result.aborted}});
    any_abort |= runs[i].result.aborted;
  }
  write_text_file(out_dir + "/runlog.csv", run_log_csv(combined));
  write_summary(out_dir, json{{"command", "train"},
                              {"seed", seed},
                              {"parallel_seeds", parallel_seeds},
                              {"wall_ms", wall_ms},
                              {"runs", per_seed}});
  std::printf("train: %s/%s seed %llu: eval %s -> %s%s\n", task.name().c_str(),
              (cfg.use_block ? cfg.block.kind_name() : cfg.model.kind).c_str(),
              static_cast<unsigned long long>(seed),
              format_double(runs[0].result.initial_eval).c_str(),
              format_double(runs[0].result.final_eval).c_str(),
              any_abort ? " (ABORTED on non-finite loss)" : "");
  return any_abort ? 1 : 0;
}

int run_eval(std::uint64_t seed, const std::string& out_dir,
             const std::string& config_path, const std::string& checkpoint) {
  ExperimentConfig cfg = config_path.empty() ? default_config()
                                             : load_config_file(config_path);
  Task task(cfg.task);
  auto model = build_model(cfg, seed);
  ParamSet ps = model->params();
  load_checkpoint_json(ps, read_text_file(checkpoint));
  const double metric =
      evaluate_model(task, *model, task.eval_set(cfg.train.eval_instances));
  const std::string metric_name =
      task.classification() ? "eval_accuracy" : "eval_mse";
  std::vector<RunRecord> log{
      RunRecord{task.name(), model->name(), seed, 0, metric_name, metric}};
  write_text_file(out_dir + "/runlog.csv", run_log_csv(log));
  write_summary(out_dir, json{{"command", "eval"},
                              {"seed", seed},
                              {"checkpoint", checkpoint},
                              {metric_name, metric}});
  std::printf("eval: %s %s = %s\n", task.name().c_str(), metric_name.c_str(),
              format_double(metric).c_str());
  return 0;
}

// --- solve -------------------------------------------------------------------

int run_solve(const std::string& kind, const std::string& out_dir,
              const std::string& csv_path, double C, long long bias_col,
              bool weighted) {
  Matrix raw = read_matrix_csv(csv_path);
  const Index label_col = weighted ? raw.cols() - 2 : raw.cols() - 1;
  if (label_col < 1) throw ContractError("solve: csv needs feature columns");
  LabeledData d;
  d.X = raw.leftCols(label_col);
  d.y = raw.col(label_col);
  if (weighted) d.weights = raw.col(raw.cols() - 1);
  if (bias_col >= 0) d.bias_col = bias_col;

  Vector w;
  if (kind == "ridge") {
    w = ridge_fit(d, C);
  } else if (kind == "weighted-ridge") {
    w = weighted_ridge_fit(d, C);
  } else if (kind == "ls-svm") {
    w = lssvm_fit(d, C);
  } else if (kind == "lda") {
    w = lda_fit(d);
  } else if (kind == "qda") {
    w = qda_fit(d);
  } else {
    throw ContractError("solve: unknown kind " + kind);
  }
  json jw = json::array();
  for (Index i = 0; i < w.size(); ++i) jw.push_back(w(i));
  write_text_file(
      out_dir + "/weights.json",
      json{{"kind", kind}, {"C", C}, {"weights", jw}}.dump(2) + "\n");
  std::printf("solve %s: %lld weights -> %s/weights.json\n", kind.c_str(),
              static_cast<long long>(w.size()), out_dir.c_str());
  return 0;
}

// --- benches -----------------------------------------------------------------

int run_bench_timing(std::uint64_t seed, const std::string& out_dir,
                     const std::string& grid_csv, int reps, int warmup,
                     bool strict) {
  BenchGrid grid;
  grid.n_values = parse_index_list(grid_csv);
  grid.d_values = grid.n_values;
  grid.repetitions = reps;
  grid.warmup = warmup;

  RngStream rng(seed, 0xBE7C);
  auto att = time_forward(BenchOp::Attention, grid, rng);
  auto inte = time_forward(BenchOp::Intention, grid, rng);
  auto ratios = slowdown_ratio(att, inte);
  const double med = quantile(ratios, 0.5);
  const Index d_max =
      *std::max_element(grid.d_values.begin(), grid.d_values.end());
  const double slope_att = loglog_slope_in_n(att, d_max);
  const double slope_int = loglog_slope_in_n(inte, d_max);

  std::vector<BenchResult> all = att;
  all.insert(all.end(), inte.begin(), inte.end());
  write_text_file(out_dir + "/bench.csv", bench_to_csv(all));
  write_summary(out_dir, json{{"command", "bench-timing"},
                              {"seed", seed},
                              {"median_slowdown", med},
                              {"slowdown_p10", quantile(ratios, 0.1)},
                              {"slowdown_p90", quantile(ratios, 0.9)},
                              {"slope_attention", slope_att},
                              {"slope_intention", slope_int}});

  bool ok = true;
  if (med < 0.5 || med > 10.0) {
    std::fprintf(stderr, "warning: median slowdown %.3f outside [0.5, 10]\n",
                 med);
    ok = false;
  }
  for (double s : {slope_att, slope_int}) {
    if (s < 1.6 || s > 2.6) {
      std::fprintf(stderr, "warning: log-log slope %.3f outside [1.6, 2.6]\n",
                   s);
      ok = false;
    }
  }
  std::printf(
      "bench-timing: median intention/attention slowdown %.3f, slopes "
      "%.2f/%.2f\n",
      med, slope_att, slope_int);
  return (strict && !ok) ? 1 : 0;
}

int run_bench_variance(std::uint64_t seed, const std::string& out_dir,
                       int trials) {
  RngStream rng(seed, 0x7A2);
  std::string csv = "variant,N,d,trials,variance\n";
  json cells = json::array();
  auto probe = [&](ScaledVariant v, const char* name, Index n, Index d) {
    const double var = variance_probe(v, n, d, trials, rng);
    csv += std::string(name) + ',' + std::to_string(n) + ',' +
           std::to_string(d) + ',' + std::to_string(trials) + ',' +
           format_double(var) + '\n';
    cells.push_back(
        json{{"variant", name}, {"N", n}, {"d", d}, {"variance", var}});
    return var;
  };
  for (Index d : {128, 256, 512}) probe(ScaledVariant::Scaled, "scaled", 32, d);
  probe(ScaledVariant::Unscaled, "unscaled", 16, 4096);
  for (Index d : {128, 256, 512}) {
    probe(ScaledVariant::ScaledRegularized, "scaled-regularized", 32, d);
  }
  probe(ScaledVariant::ScaledRegularized, "scaled-regularized", 32, 32);
  probe(ScaledVariant::Unscaled, "unscaled", 32, 32);

  write_text_file(out_dir + "/variance.csv", csv);
  write_summary(out_dir, json{{"command", "bench-variance"},
                              {"seed", seed},
                              {"trials", trials},
                              {"cells", cells}});
  std::printf("bench-variance: %zu cells -> %s/variance.csv\n", cells.size(),
              out_dir.c_str());
  return 0;
}

int run_selftest(std::uint64_t seed, const std::string& out_dir) {
  auto results = selftest_fast(seed);
  json detail = json::array();
  int passed = 0;
  for (const auto& r : results) {
    detail.push_back(
        json{{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    passed += r.pass ? 1 : 0;
    if (!r.pass) {
      std::fprintf(stderr, "FAIL %s: %s\n", r.name.c_str(), r.detail.c_str());
    }
  }
  write_summary(out_dir, json{{"command", "selftest"},
                              {"seed", seed},
                              {"passed", passed},
                              {"total", results.size()},
                              {"checks", detail}});
  std::printf("selftest: %d/%zu checks passed\n", passed, results.size());
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "intention-kit: key-value-query modules, closed-form solvers, and "
      "desk-scale experiments"};
  app.require_subcommand(1);

  std::uint64_t seed = default_seed();
  std::string out_dir = "out";

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "master random seed");
    cmd->add_option("--out", out_dir, "output directory");
  };

  auto* demo = app.add_subcommand(
      "demo-linreg", "untrained model comparison on 2D linear regression");
  Index demo_context = 20, demo_queries = 200;
  int demo_trials = 1;
  add_common(demo);
  demo->add_option("--context", demo_context, "context points");
  demo->add_option("--queries", demo_queries, "query points per split");
  demo->add_option("--trials", demo_trials, "instances to aggregate over");

  auto* scal =
      app.add_subcommand("scaling", "latent-width search per input dimension");
  std::string scal_dims = "2,3,4,5,6", scal_models = "intention,mlp";
  WidthSearchOptions scal_opts;
  add_common(scal);
  scal->add_option("--dims", scal_dims, "input dimensions, comma separated");
  scal->add_option("--models", scal_models, "model kinds, comma separated");
  scal->add_option("--steps", scal_opts.steps, "training steps per width");
  scal->add_option("--batch", scal_opts.batch, "batch size");
  scal->add_option("--tolerance", scal_opts.tolerance, "passing eval MSE");
  scal->add_option("--cap", scal_opts.cap, "largest width tried");
  scal->add_option("--start-width", scal_opts.start_width, "first width tried");

  auto* train = app.add_subcommand("train", "train a model from a config file");
  std::string train_config;
  int parallel_seeds = 1;
  add_common(train);
  train->add_option("--config", train_config, "JSON experiment config");
  train
      ->add_option("--parallel-seeds", parallel_seeds,
                   "independent single-threaded trainers")
      ->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a task");
  std::string eval_config, eval_checkpoint;
  add_common(eval);
  eval->add_option("--config", eval_config, "JSON experiment config");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint JSON")
      ->required();

  auto* solve = app.add_subcommand("solve", "closed-form solver on CSV data");
  std::string solve_kind, solve_csv;
  double solve_c = 0.0;
  long long solve_bias = -1;
  bool solve_weighted = false;
  add_common(solve);
  solve
      ->add_option("kind", solve_kind,
                   "ridge | weighted-ridge | ls-svm | lda | qda")
      ->required();
  solve->add_option("--csv", solve_csv, "data: features...,label[,weight]")
      ->required();
  solve->add_option("--C", solve_c, "regularization strength");
  solve->add_option("--bias-col", solve_bias, "declared bias column (ls-svm)");
  solve->add_flag("--weighted", solve_weighted,
                  "last column is a sample weight");

  auto* bt = app.add_subcommand("bench-timing",
                                "attention vs intention wall-clock grid");
  std::string bt_grid = "64,128,256,512";
  int bt_reps = 5, bt_warmup = 1;
  bool strict_bench = false;
  add_common(bt);
  bt->add_option("--grid", bt_grid, "N and d values, comma separated");
  bt->add_option("--reps", bt_reps, "timed repetitions per cell");
  bt->add_option("--warmup", bt_warmup, "discarded warmup runs");
  bt->add_flag("--strict-bench", strict_bench,
               "fail (not warn) on band violations");

  auto* bv = app.add_subcommand("bench-variance", "mixing-map variance table");
  int bv_trials = 150;
  add_common(bv);
  bv->add_option("--trials", bv_trials, "Monte Carlo trials per cell")
      ->check(CLI::Range(100, 1000000));

  auto* st = app.add_subcommand("selftest", "run the fast property suite");
  add_common(st);

  CLI11_PARSE(app, argc, argv);

  try {
    fs::create_directories(out_dir);
    if (demo->parsed()) {
      return run_demo_linreg(seed, out_dir, demo_context, demo_queries,
                             demo_trials);
    }
    if (scal->parsed()) {
      return run_scaling(seed, out_dir, scal_dims, scal_models, scal_opts);
    }
    if (train->parsed()) {
      return run_train(seed, out_dir, train_config, parallel_seeds);
    }
    if (eval->parsed()) {
      return run_eval(seed, out_dir, eval_config, eval_checkpoint);
    }
    if (solve->parsed()) {
      return run_solve(solve_kind, out_dir, solve_csv, solve_c, solve_bias,
                       solve_weighted);
    }
    if (bt->parsed()) {
      return run_bench_timing(seed, out_dir, bt_grid, bt_reps, bt_warmup,
                              strict_bench);
    }
    if (bv->parsed()) {
      return run_bench_variance(seed, out_dir, bv_trials);
    }
    if (st->parsed()) {
      return run_selftest(seed, out_dir);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
