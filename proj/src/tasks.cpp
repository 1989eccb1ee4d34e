#include "ikit/tasks.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ikit/matrix_io.hpp"

namespace ikit {

void TaskSpec::validate() const {
  if (context_n < 1 || query_m < 1) {
    throw ContractError("TaskSpec: context and query sizes must be >= 1");
  }
  if (noise < 0.0) throw ContractError("TaskSpec: noise must be >= 0");
  if (dim < 1) throw ContractError("TaskSpec: dim must be >= 1");
  if (kind == TaskKind::Anomaly && class_sep < 0.0) {
    throw ContractError("TaskSpec: class separation must be >= 0");
  }
}

std::string run_log_csv(const std::vector<RunRecord>& log) {
  std::string out = "task,model,seed,step,metric,value\n";
  for (const auto& r : log) {
    out += r.task + ',' + r.model + ',' + std::to_string(r.seed) + ',' +
           std::to_string(r.step) + ',' + r.metric + ',' +
           format_double(r.value) + '\n';
  }
  return out;
}

// --- generators -------------------------------------------------------------

Linreg2dInstances gen_linreg2d(RngStream& rng, Index n, Index m_in,
                               Index m_ex) {
  if (n < 1 || m_in < 1 || m_ex < 1) {
    throw ContractError("gen_linreg2d: counts must be >= 1");
  }
  Matrix w = sample_normal(rng, 2, 1, 0.0, std::sqrt(10.0));
  // The printed covariance [[0.7,0.9],[0.9,1.0]] is not PSD; it acts as a
  // linear transform on standard normal draws instead.
  Matrix a(2, 2);
  a << 0.7, 0.9, 0.9, 1.0;
  Matrix k = sample_normal(rng, n, 2) * a;
  Matrix v = k * w;
  Matrix q_in = sample_uniform(rng, m_in, 2, -1.0, 1.0);
  Matrix q_ex = sample_uniform(rng, m_ex, 2, -25.0, 25.0);

  Linreg2dInstances out;
  out.w = w;
  out.interp.kvq = KvqBatch{k, v, q_in, Matrix(q_in * w)};
  out.interp.target = q_in * w;
  out.extrap.kvq = KvqBatch{k, v, q_ex, Matrix(q_ex * w)};
  out.extrap.target = q_ex * w;
  return out;
}

TaskInstance gen_scaling(RngStream& rng, int d) {
  if (d < 1) throw ContractError("gen_scaling: d must be >= 1");
  Matrix w = sample_normal(rng, d, 1);
  Matrix x = sample_normal(rng, 10, d);
  TaskInstance inst;
  inst.kvq = KvqBatch{x, Matrix(x * w), Matrix::Zero(1, d), std::nullopt};
  inst.target = w.transpose();
  return inst;
}

TaskInstance gen_sine(RngStream& rng, Index n, Index m) {
  if (n < 1 || m < n) throw ContractError("gen_sine: need m >= n >= 1");
  const double b = rng.next_uniform(0.0, std::numbers::pi);
  const double a = rng.next_uniform(0.1, 5.0);
  Matrix x = sample_uniform(rng, m, 1, -6.0, 6.0);
  std::sort(x.data(), x.data() + m);
  Matrix y = (a * (x.array() - b).sin()).matrix();
  // Observations are an evenly strided subset of the (sorted) query points,
  // so the context covers the full input range.
  Matrix k(n, 1), v(n, 1);
  const Index stride = m / n;
  for (Index i = 0; i < n; ++i) {
    const Index j = std::min(i * stride + stride / 2, m - 1);
    k(i, 0) = x(j, 0);
    v(i, 0) = y(j, 0);
  }
  TaskInstance inst;
  inst.kvq = KvqBatch{k, v, x, y};
  inst.target = y;
  return inst;
}

TaskInstance gen_policy(RngStream& rng, double noise) {
  Matrix t = sample_normal(rng, 1, 2);
  Matrix p = sample_normal(rng, 5, 2, 0.0, 0.5);
  Matrix eps = sample_normal(rng, 5, 1);
  Matrix obs(5, 3);
  for (Index i = 0; i < 5; ++i) {
    obs(i, 0) = p(i, 0);
    obs(i, 1) = p(i, 1);
    obs(i, 2) = (p.row(i) - t.row(0)).squaredNorm() + noise * eps(i, 0);
  }
  TaskInstance inst;
  inst.kvq = KvqBatch{obs, obs, obs, std::nullopt};
  inst.target = t;
  return inst;
}

TaskInstance gen_kabsch(RngStream& rng, Index n, Index m, double noise) {
  if (n < 1 || m < 1) throw ContractError("gen_kabsch: counts must be >= 1");
  Matrix k = sample_normal(rng, n, 2);
  const double theta = rng.next_uniform(0.0, 2.0 * std::numbers::pi);
  const double scale = rng.next_uniform(0.5, 2.0);
  Matrix rot(2, 2);
  rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  Matrix shift = sample_normal(rng, 1, 2);
  Matrix eps = sample_normal(rng, n, 2);
  Matrix q = sample_normal(rng, m, 2);

  Matrix v = scale * k * rot.transpose() + noise * eps;
  v.rowwise() += shift.row(0);
  Matrix targets = scale * q * rot.transpose();
  targets.rowwise() += shift.row(0);

  TaskInstance inst;
  inst.kvq = KvqBatch{k, v, q, targets};
  inst.target = targets;
  return inst;
}

TaskInstance gen_anomaly_toy(RngStream& rng, Index set_size, Index embed_dim,
                             double class_sep) {
  if (set_size < 2) throw ContractError("gen_anomaly_toy: set size must be >= 2");
  if (embed_dim < 1) throw ContractError("gen_anomaly_toy: embed_dim must be >= 1");
  if (class_sep < 0.0) {
    throw ContractError("gen_anomaly_toy: class separation must be >= 0");
  }
  Matrix m0 = sample_normal(rng, 1, embed_dim);
  Matrix u = sample_normal(rng, 1, embed_dim);
  const double norm = u.norm();
  if (norm > 0.0) u /= norm;
  Matrix m1 = m0 + class_sep * u;
  const int outlier =
      std::min<int>(static_cast<int>(rng.next_uniform() * set_size),
                    static_cast<int>(set_size) - 1);
  // Cluster noise is scaled so the deviation VECTOR has unit norm in
  // expectation; class_sep is measured in units of that sigma.
  const double coord_std = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  Matrix rows = sample_normal(rng, set_size, embed_dim, 0.0, coord_std);
  for (Index i = 0; i < set_size; ++i) {
    rows.row(i) += (static_cast<int>(i) == outlier ? m1 : m0).row(0);
  }
  TaskInstance inst;
  inst.kvq = KvqBatch{rows, rows, rows, std::nullopt};
  inst.label = outlier;
  return inst;
}

// --- oracles ----------------------------------------------------------------

Vector trilaterate(const Matrix& observations) {
  if (observations.cols() != 3 || observations.rows() < 3) {
    throw ContractError("trilaterate: need >= 3 rows of (x, y, d)");
  }
  const Index n = observations.rows();
  Matrix p = observations.leftCols(2);
  Vector d = observations.col(2);
  // d_i - d_1 = ||p_i||^2 - ||p_1||^2 - 2 (p_i - p_1) . t
  Matrix a(n - 1, 2);
  Vector b(n - 1);
  for (Index i = 1; i < n; ++i) {
    a.row(i - 1) = 2.0 * (p.row(i) - p.row(0));
    b(i - 1) = p.row(i).squaredNorm() - p.row(0).squaredNorm() -
               (d(i) - d(0));
  }
  return pinv(a) * b;
}

Matrix SimilarityTransform::apply(const Matrix& points) const {
  Matrix out = points * linear.transpose();
  out.rowwise() += shift.transpose();
  return out;
}

SimilarityTransform umeyama_fit(const Matrix& src, const Matrix& dst) {
  if (src.rows() != dst.rows() || src.cols() != dst.cols()) {
    throw DimensionError("umeyama_fit: point sets must match in shape");
  }
  Matrix t = Eigen::umeyama(src.transpose(), dst.transpose(), true);
  const Index d = src.cols();
  return SimilarityTransform{t.topLeftCorner(d, d), t.topRightCorner(d, 1)};
}

int anomaly_loo_outlier(const Matrix& embeddings) {
  const Index n = embeddings.rows();
  Eigen::RowVectorXd total = embeddings.colwise().sum();
  double best = -1.0;
  int pick = 0;
  for (Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd centroid =
        (total - embeddings.row(i)) / static_cast<double>(n - 1);
    const double dist = (embeddings.row(i) - centroid).squaredNorm();
    if (dist > best) {
      best = dist;
      pick = static_cast<int>(i);
    }
  }
  return pick;
}

// --- metrics ----------------------------------------------------------------

std::optional<double> pearson_r(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DimensionError("pearson_r: length mismatch");
  if (x.size() < 2) throw ContractError("pearson_r: need length >= 2");
  const double mx = x.mean(), my = y.mean();
  Vector cx = x.array() - mx, cy = y.array() - my;
  const double sx = cx.norm(), sy = cy.norm();
  if (sx == 0.0 || sy == 0.0) return std::nullopt;
  return cx.dot(cy) / (sx * sy);
}

double mse(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse: shape mismatch");
  }
  return (pred - target).squaredNorm() / static_cast<double>(pred.size());
}

int argmax_row(const Matrix& row) {
  int best = 0;
  for (Index j = 1; j < row.size(); ++j) {
    if (row(0, j) > row(0, best)) best = static_cast<int>(j);
  }
  return best;
}

// --- training ----------------------------------------------------------------

Task::Task(TaskSpec spec) : spec_(spec) { spec_.validate(); }

TaskInstance Task::sample(RngStream& rng) const {
  switch (spec_.kind) {
    case TaskKind::Sine:
      return gen_sine(rng, spec_.context_n, spec_.query_m);
    case TaskKind::Policy:
      return gen_policy(rng, spec_.noise);
    case TaskKind::Kabsch:
      return gen_kabsch(rng, spec_.context_n, spec_.query_m, spec_.noise);
    case TaskKind::Scaling:
      return gen_scaling(rng, spec_.dim);
    case TaskKind::Anomaly:
      return gen_anomaly_toy(rng, spec_.context_n, spec_.dim, spec_.class_sep);
    case TaskKind::Linreg2d: {
      auto pair = gen_linreg2d(rng, spec_.context_n, spec_.query_m,
                               spec_.query_m);
      return pair.interp;
    }
  }
  throw Error("Task::sample: unknown kind");
}

std::vector<TaskInstance> Task::eval_set(int count) const {
  RngStream rng(spec_.seed, 0xE7A1);
  std::vector<TaskInstance> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

double evaluate_model(const Task& task, const TaskModel& model,
                      const std::vector<TaskInstance>& eval_set) {
  if (eval_set.empty()) throw ContractError("evaluate_model: empty eval set");
  double total = 0.0;
  for (const auto& inst : eval_set) {
    Tape t;
    NodePtr out = model.forward(t, inst, /*train=*/false, nullptr);
    if (task.classification()) {
      total += argmax_row(out->value) == inst.label ? 1.0 : 0.0;
    } else {
      total += mse(out->value, inst.target);
    }
  }
  return total / static_cast<double>(eval_set.size());
}

TrainResult train_model(const Task& task, TaskModel& model,
                        const OptimSpec& optim, const TrainOptions& opts,
                        std::uint64_t run_seed) {
  TrainResult res;
  const std::string metric_name =
      task.classification() ? "eval_accuracy" : "eval_mse";
  auto eval_set = task.eval_set(opts.eval_instances);
  ParamSet params = model.params();
  Optimizer opt(optim, params.nodes());
  RngStream data_rng(run_seed, 0x7247);
  RngStream dropout_rng(run_seed, 0xD707);

  auto record = [&](std::int64_t step, const std::string& metric, double v) {
    res.log.push_back(RunRecord{task.name(), model.name(), run_seed, step,
                                metric, v});
  };

  res.initial_eval = evaluate_model(task, model, eval_set);
  record(0, metric_name, res.initial_eval);
  res.final_eval = res.initial_eval;

  for (std::int64_t step = 1; step <= opts.steps; ++step) {
    double batch_loss = 0.0;
    try {
      Tape t;
      zero_grad(params.nodes());
      NodePtr total;
      for (int b = 0; b < opts.batch; ++b) {
        TaskInstance inst = task.sample(data_rng);
        NodePtr out = model.forward(t, inst, /*train=*/true, &dropout_rng);
        NodePtr loss = task.classification()
                           ? loss_softmax_xent(t, out, {inst.label})
                           : loss_mse(t, out, inst.target);
        total = total ? op_add(t, total, loss) : loss;
      }
      total = op_scale(t, total, 1.0 / opts.batch);
      batch_loss = total->value(0, 0);
      if (!std::isfinite(batch_loss)) throw Error("non-finite loss");
      t.backward(total);
      opt.step();
    } catch (const Error&) {
      record(step, "abort_nan", static_cast<double>(step));
      res.aborted = true;
      return res;
    }
    if (step % opts.eval_every == 0 || step == opts.steps) {
      record(step, "train_loss", batch_loss);
      res.final_eval = evaluate_model(task, model, eval_set);
      record(step, metric_name, res.final_eval);
    }
  }
  return res;
}

// --- scaling width search ----------------------------------------------------

WidthSearchResult scaling_width_search(const std::string& model_kind, int d,
                                       const WidthSearchOptions& opts,
                                       std::uint64_t seed) {
  WidthSearchResult res;
  TaskSpec ts;
  ts.kind = TaskKind::Scaling;
  ts.dim = d;
  ts.seed = seed;
  Task task(ts);
  TrainOptions topts;
  topts.steps = opts.steps;
  topts.batch = opts.batch;
  topts.eval_every = opts.steps;  // evaluate at the end only
  topts.eval_instances = opts.eval_instances;

  for (Index width = opts.start_width; width <= opts.cap; width *= 2) {
    ModuleSpec spec;
    spec.kind = model_kind;
    spec.widths = {width};
    RngStream init_rng(seed, 0x319 + static_cast<std::uint64_t>(width));
    auto model = make_task_model(TaskKind::Scaling, spec, d, init_rng);
    TrainResult tr = train_model(task, *model, OptimSpec::adam(3e-4), topts,
                                 seed + static_cast<std::uint64_t>(width));
    const bool passed = !tr.aborted && tr.final_eval <= opts.tolerance;
    res.tried.emplace_back(width, passed);
    for (auto& r : tr.log) res.log.push_back(r);
    res.log.push_back(RunRecord{task.name(), model_kind + "-w" +
                                std::to_string(width),
                                seed, opts.steps, "width_passed",
                                passed ? 1.0 : 0.0});
    if (passed) {
      res.minimal_passing = width;
      break;
    }
  }
  return res;
}

}  // namespace ikit
