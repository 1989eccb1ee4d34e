#include "ikit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ikit/matrix_io.hpp"

namespace ikit {

void BenchGrid::validate() const {
  if (n_values.empty() || d_values.empty()) {
    throw ContractError("BenchGrid: grid must be non-empty");
  }
  if (repetitions < 3) throw ContractError("BenchGrid: repetitions must be >= 3");
  if (warmup < 1) throw ContractError("BenchGrid: warmup must be >= 1");
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ContractError("quantile: empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * (values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - lo;
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

double BenchResult::median() const { return quantile(ns, 0.5); }
double BenchResult::p10() const { return quantile(ns, 0.1); }
double BenchResult::p90() const { return quantile(ns, 0.9); }

namespace {

using Clock = std::chrono::steady_clock;

double time_once(BenchOp op, const KvqBatch& b) {
  const auto start = Clock::now();
  Matrix out;
  if (op == BenchOp::Attention) {
    out = attention(b);
  } else {
    out = intention_auto(b, AlphaSpec::fixed(1e-6));
  }
  const auto stop = Clock::now();
  // Touch the result so the computation cannot be elided.
  volatile double sink = out(0, 0);
  (void)sink;
  return static_cast<double>(
      std::chrono::duration_cast<std::chrono::nanoseconds>(stop - start)
          .count());
}

}  // namespace

std::vector<BenchResult> time_forward(BenchOp op, const BenchGrid& grid,
                                      RngStream& rng) {
  grid.validate();
  std::vector<BenchResult> out;
  for (Index n : grid.n_values) {
    for (Index d : grid.d_values) {
      BenchResult r;
      r.op = op == BenchOp::Attention ? "attention" : "intention";
      r.n = n;
      r.d = d;
      for (int rep = 0; rep < grid.warmup + grid.repetitions; ++rep) {
        KvqBatch b{sample_normal(rng, n, d), sample_normal(rng, n, d),
                   sample_normal(rng, n, d), std::nullopt};
        const double ns = time_once(op, b);
        if (rep >= grid.warmup) r.ns.push_back(std::max(ns, 1.0));
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<double> slowdown_ratio(const std::vector<BenchResult>& a,
                                   const std::vector<BenchResult>& b) {
  if (a.size() != b.size()) throw ContractError("slowdown_ratio: grid mismatch");
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].n != b[i].n || a[i].d != b[i].d) {
      throw ContractError("slowdown_ratio: grid cells do not line up");
    }
    out.push_back(b[i].median() / a[i].median());
  }
  return out;
}

double variance_probe(ScaledVariant variant, Index n, Index d, int trials,
                      RngStream& rng) {
  if (trials < 100) throw ContractError("variance_probe: trials must be >= 100");
  double sum = 0.0, sum_sq = 0.0;
  std::int64_t count = 0;
  for (int t = 0; t < trials; ++t) {
    KvqBatch b{sample_normal(rng, n, d), Matrix::Zero(n, 1),
               sample_normal(rng, n, d), std::nullopt};
    Matrix z = scaled_intention(b, variant);
    sum += z.sum();
    sum_sq += z.squaredNorm();
    count += z.size();
  }
  const double mean = sum / count;
  return sum_sq / count - mean * mean;
}

double loglog_slope_in_n(const std::vector<BenchResult>& results, Index d) {
  std::vector<double> xs, ys;
  for (const auto& r : results) {
    if (r.d == d) {
      xs.push_back(std::log(static_cast<double>(r.n)));
      ys.push_back(std::log(r.median()));
    }
  }
  if (xs.size() < 2) throw ContractError("loglog_slope_in_n: need >= 2 sizes");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

std::string bench_to_csv(const std::vector<BenchResult>& results) {
  std::string out = "op,N,d,rep,ns\n";
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.ns.size(); ++i) {
      out += r.op + ',' + std::to_string(r.n) + ',' + std::to_string(r.d) +
             ',' + std::to_string(i) + ',' + format_double(r.ns[i]) + '\n';
    }
  }
  return out;
}

}  // namespace ikit
