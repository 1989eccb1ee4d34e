#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ikit/models.hpp"
#include "ikit/optim.hpp"

namespace ikit {

struct TaskSpec {
  TaskKind kind = TaskKind::Sine;
  Index context_n = 10;
  Index query_m = 200;
  double noise = 0.0;
  int dim = 2;             // scaling input dim / anomaly embedding dim
  double class_sep = 6.0;  // anomaly cluster separation (in cluster sigmas)
  std::uint64_t seed = 0;

  void validate() const;
};

/// One experiment output row; append-only, one row per (step, metric).
struct RunRecord {
  std::string task;
  std::string model;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::string metric;
  double value = 0.0;
};

std::string run_log_csv(const std::vector<RunRecord>& log);

// --- generators -----------------------------------------------------------

struct Linreg2dInstances {
  TaskInstance interp, extrap;
  Matrix w;  // the ground-truth mapping
};

/// Context from a 2D skewed Gaussian (standard normals through the paper's
/// transform), values K w with w ~ N(0, 10 I); interpolation queries from
/// U(-1,1)^2 and extrapolation queries from U(-25,25)^2.
Linreg2dInstances gen_linreg2d(RngStream& rng, Index n, Index m_in, Index m_ex);

/// x ~ N(0,I) (10 x d), W ~ N(0,I) (d x 1), y = x W; target is W itself.
TaskInstance gen_scaling(RngStream& rng, int d);

/// y = a sin(x - b), a ~ U(0.1, 5), b ~ U(0, pi), x ~ U(-6, 6); the first
/// n of the m query points double as context.
TaskInstance gen_sine(RngStream& rng, Index n = 10, Index m = 200);

/// Five observations (x_i, y_i, d_i) with d_i the squared distance to a
/// hidden target t ~ N(0,1)^2, locations ~ N(0, 1/4); `noise` is added to
/// the distances. K = V = Q = observations; target is t.
TaskInstance gen_policy(RngStream& rng, double noise = 0.0);

/// V_i = a R K_i + w + eps, targets are the noiseless transform of Q.
TaskInstance gen_kabsch(RngStream& rng, Index n = 5, Index m = 5,
                        double noise = 0.0);

/// set_size rows, all but one from N(m0, I), the outlier from
/// N(m0 + class_sep * u, I); label is the outlier's position.
TaskInstance gen_anomaly_toy(RngStream& rng, Index set_size, Index embed_dim,
                             double class_sep);

// --- oracles (also eval baselines) ----------------------------------------

/// Recovers the policy target from (x, y, squared-distance) observations by
/// linearizing the circle equations; exact on noiseless input.
Vector trilaterate(const Matrix& observations);

struct SimilarityTransform {
  Matrix linear;  // scale * rotation, applied to row vectors as P linear'
  Vector shift;
  Matrix apply(const Matrix& points) const;
};

/// Closed-form similarity fit (points as rows).
SimilarityTransform umeyama_fit(const Matrix& src, const Matrix& dst);

/// Leave-one-out nearest-centroid outlier pick (anomaly calibration).
int anomaly_loo_outlier(const Matrix& embeddings);

// --- metrics ---------------------------------------------------------------

/// nullopt when either input has zero variance (degenerate, never 0).
std::optional<double> pearson_r(const Vector& x, const Vector& y);

double mse(const Matrix& pred, const Matrix& target);
int argmax_row(const Matrix& row);  // ties broken by lowest index

// --- training --------------------------------------------------------------

class Task {
 public:
  explicit Task(TaskSpec spec);
  const TaskSpec& spec() const { return spec_; }
  TaskInstance sample(RngStream& rng) const;
  bool classification() const { return spec_.kind == TaskKind::Anomaly; }
  std::string name() const { return task_kind_name(spec_.kind); }
  /// Evaluation instances depend only on the task spec, so every model
  /// sees the same benchmark set.
  std::vector<TaskInstance> eval_set(int count) const;

 private:
  TaskSpec spec_;
};

struct TrainOptions {
  std::int64_t steps = 1000;
  int batch = 8;
  std::int64_t eval_every = 100;
  int eval_instances = 100;
};

struct TrainResult {
  std::vector<RunRecord> log;
  bool aborted = false;        // NaN loss abort
  double initial_eval = 0.0;   // metric before any update
  double final_eval = 0.0;     // metric at the last evaluation
};

/// Mean eval metric: MSE for regression, accuracy for classification.
double evaluate_model(const Task& task, const TaskModel& model,
                      const std::vector<TaskInstance>& eval_set);

TrainResult train_model(const Task& task, TaskModel& model,
                        const OptimSpec& optim, const TrainOptions& opts,
                        std::uint64_t run_seed);

// --- scaling width search (doubling protocol) ------------------------------

struct WidthSearchOptions {
  Index start_width = 2;
  Index cap = 64;
  std::int64_t steps = 1500;
  int batch = 32;
  double tolerance = 0.05;  // per-entry eval MSE threshold
  int eval_instances = 200;
};

struct WidthSearchResult {
  std::vector<std::pair<Index, bool>> tried;  // (width, passed)
  Index minimal_passing = -1;                 // -1: none up to the cap
  std::vector<RunRecord> log;
};

WidthSearchResult scaling_width_search(const std::string& model_kind, int d,
                                       const WidthSearchOptions& opts,
                                       std::uint64_t seed);

}  // namespace ikit
