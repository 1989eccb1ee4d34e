#include "ikit/linalg.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace ikit {

void ensure_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(std::string(what) + ": non-finite entries");
  }
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " * " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
  Matrix c = a * b;
  ensure_finite(c, "matmul");
  return c;
}

std::optional<Matrix> try_solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || a.rows() != b.rows()) {
    throw DimensionError("solve_spd: incompatible shapes");
  }
  if (!is_symmetric(a)) {
    throw ContractError("solve_spd: matrix is not symmetric");
  }
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix x = llt.solve(b);
  if (!x.allFinite()) return std::nullopt;
  const double resid = (a * x - b).cwiseAbs().maxCoeff();
  const double bound = 1e-8 * (1.0 + (b.size() ? b.cwiseAbs().maxCoeff() : 0.0));
  if (resid > bound) return std::nullopt;
  return x;
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  auto x = try_solve_spd(a, b);
  if (!x) throw NotSpdError("solve_spd: factorization failed, use pinv");
  return std::move(*x);
}

Matrix solve_psd_or_pinv(const Matrix& a, const Matrix& b) {
  if (auto x = try_solve_spd(a, b)) return std::move(*x);
  return pinv(a) * b;
}

Matrix pinv(const Matrix& a, std::optional<double> rtol) {
  if (rtol && *rtol < 0.0) throw ContractError("pinv: rtol must be >= 0");
  if (a.size() == 0) return a.transpose();
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double cutoff = rtol ? *rtol * sv(0) : 1e-10 * a.norm();
  Vector inv_sv = Vector::Zero(sv.size());
  for (Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv_sv(i) = 1.0 / sv(i);
  }
  Matrix r = svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().transpose();
  ensure_finite(r, "pinv");
  return r;
}

Matrix inv_sqrt_psd(const Matrix& a, double eig_floor) {
  if (a.rows() != a.cols()) {
    throw DimensionError("inv_sqrt_psd: matrix must be square");
  }
  if (!is_symmetric(a)) {
    throw ContractError("inv_sqrt_psd: matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  if (es.info() != Eigen::Success) {
    throw Error("inv_sqrt_psd: eigendecomposition failed");
  }
  Vector lam = es.eigenvalues();
  const double lam_max = lam.size() ? lam.maxCoeff() : 0.0;
  const double psd_tol = 1e-8 * std::max(1.0, lam_max);
  const double floor = eig_floor * std::max(lam_max, 0.0);
  Vector inv_sqrt = Vector::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (lam(i) < -psd_tol) {
      throw ContractError("inv_sqrt_psd: matrix is not PSD within tolerance");
    }
    const double v = std::max(lam(i), 0.0);
    if (v > floor && v > 0.0) inv_sqrt(i) = 1.0 / std::sqrt(v);
  }
  Matrix r = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  ensure_finite(r, "inv_sqrt_psd");
  return r;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  splitmix64(state);
  state ^= stream * 0xD2B74407B1CE6E93ULL;
  std::seed_seq seq{static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state) >> 32),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state) >> 32),
                    static_cast<std::uint32_t>(splitmix64(state)),
                    static_cast<std::uint32_t>(splitmix64(state) >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

RngStream RngStream::split(std::uint64_t substream) const {
  // Derivation is positional, not stateful: splitting twice with the same
  // id yields the same stream regardless of draws made in between.
  std::uint64_t s = stream_;
  splitmix64(s);
  return RngStream(seed_, s ^ (substream + 1));
}

std::uint64_t RngStream::next_u64() { return engine_(); }

double RngStream::next_uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::next_uniform(double lo, double hi) {
  if (lo > hi) throw ContractError("next_uniform: lo > hi");
  return lo + (hi - lo) * next_uniform();
}

double RngStream::next_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 mapped into (0, 1] so the log is finite.
  const double u1 = 1.0 - next_uniform();
  const double u2 = next_uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

double RngStream::next_normal(double mean, double std) {
  if (std < 0.0) throw ContractError("next_normal: std must be >= 0");
  return mean + std * next_normal();
}

Matrix sample_normal(RngStream& rng, Index rows, Index cols, double mean,
                     double std) {
  if (std < 0.0) throw ContractError("sample_normal: std must be >= 0");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_normal(mean, std);
  return m;
}

Matrix sample_uniform(RngStream& rng, Index rows, Index cols, double lo,
                      double hi) {
  if (lo > hi) throw ContractError("sample_uniform: lo > hi");
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.next_uniform(lo, hi);
  return m;
}

Matrix random_permutation(RngStream& rng, Index n) {
  std::vector<Index> idx(n);
  for (Index i = 0; i < n; ++i) idx[i] = i;
  for (Index i = n - 1; i > 0; --i) {
    const Index j =
        std::min<Index>(static_cast<Index>(rng.next_uniform() * (i + 1)), i);
    std::swap(idx[i], idx[j]);
  }
  Matrix p = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) p(i, idx[i]) = 1.0;
  return p;
}

}  // namespace ikit
