#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

namespace ikit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape mismatch between operands.
struct DimensionError : Error {
  using Error::Error;
};

/// An operation precondition was violated (bad range, asymmetry, ...).
struct ContractError : Error {
  using Error::Error;
};

/// Signals that a symmetric factorization failed (matrix not positive
/// definite within tolerance); callers fall back to the pseudoinverse.
struct NotSpdError : Error {
  using Error::Error;
};

/// Throws ikit::Error if any entry of m is NaN or infinite.
void ensure_finite(const Matrix& m, const char* what);

bool is_symmetric(const Matrix& a, double rel_tol = 1e-8);

Matrix matmul(const Matrix& a, const Matrix& b);

/// Solves a x = b for symmetric positive definite a via Cholesky.
/// Returns nullopt when the factorization fails or the residual check
/// ||a x - b||_inf <= 1e-8 (1 + ||b||_inf) does not hold.
std::optional<Matrix> try_solve_spd(const Matrix& a, const Matrix& b);

/// As try_solve_spd but throws NotSpdError instead of returning nullopt.
Matrix solve_spd(const Matrix& a, const Matrix& b);

/// solve_spd with automatic Moore-Penrose fallback for singular a.
Matrix solve_psd_or_pinv(const Matrix& a, const Matrix& b);

/// Moore-Penrose pseudoinverse. Singular values with relative magnitude
/// below rtol are zeroed; the default cutoff is 1e-10 times a trace-based
/// scale estimate (the Frobenius norm).
Matrix pinv(const Matrix& a, std::optional<double> rtol = std::nullopt);

/// Inverse square root of a symmetric PSD matrix. Eigenvalues below
/// eig_floor (relative to the largest eigenvalue) map to 0, so the result
/// satisfies r a r == projector onto a's row space. Negative eigenvalues
/// within round-off are clamped; larger ones are a contract error.
Matrix inv_sqrt_psd(const Matrix& a, double eig_floor = 1e-10);

/// Deterministic random stream. Equal (seed, stream) pairs reproduce
/// identical draw sequences on any platform: the engine is the fully
/// specified std::mt19937_64 and the uniform/normal mappings are our own
/// (libstdc++ distributions are not pinned by the standard).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Independent stream derived from this one's identity.
  RngStream split(std::uint64_t substream) const;

  std::uint64_t next_u64();
  double next_uniform();              // [0, 1)
  double next_uniform(double lo, double hi);
  double next_normal();               // standard normal, Box-Muller
  double next_normal(double mean, double std);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix sample_normal(RngStream& rng, Index rows, Index cols, double mean = 0.0,
                     double std = 1.0);
Matrix sample_uniform(RngStream& rng, Index rows, Index cols, double lo = 0.0,
                      double hi = 1.0);

/// Uniformly random n x n permutation matrix (Fisher-Yates).
Matrix random_permutation(RngStream& rng, Index n);

}  // namespace ikit
