#pragma once

#include <string>
#include <vector>

#include "ikit/kvq.hpp"

namespace ikit {

struct BenchGrid {
  std::vector<Index> n_values{64, 128, 256, 512};
  std::vector<Index> d_values{64, 128, 256, 512};
  int repetitions = 5;
  int warmup = 1;

  void validate() const;
};

struct BenchResult {
  std::string op;
  Index n = 0, d = 0;
  std::vector<double> ns;  // nanoseconds per repetition

  double median() const;
  double p10() const;
  double p90() const;
};

enum class BenchOp { Attention, Intention };

/// Times forward passes over the grid. Inputs are regenerated from the
/// stream for every repetition (outside the timed region); warmup runs are
/// discarded. The intention path picks primal vs dual by the d < N rule.
std::vector<BenchResult> time_forward(BenchOp op, const BenchGrid& grid,
                                      RngStream& rng);

/// Cellwise ratios b/a over matching grid cells.
std::vector<double> slowdown_ratio(const std::vector<BenchResult>& a,
                                   const std::vector<BenchResult>& b);

/// Empirical entry variance of the mixing map Z over standard-normal K, Q.
double variance_probe(ScaledVariant variant, Index n, Index d, int trials,
                      RngStream& rng);

/// Least-squares slope of log(median time) against log(N) at fixed d.
double loglog_slope_in_n(const std::vector<BenchResult>& results, Index d);

double quantile(std::vector<double> values, double q);

std::string bench_to_csv(const std::vector<BenchResult>& results);

}  // namespace ikit
