#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace geomdiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Rows are points, columns are input coordinates.
using PointSet = Eigen::MatrixXd;

/// Raised when a floating-point computation produces NaN/Inf or a factorization fails.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotPositiveDefinite : public NumericError {
 public:
  using NumericError::NumericError;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid user-supplied configuration (unknown enum names, bad ranges, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_dims(bool ok, const std::string& what);

/// Lower-triangular factor L with L·Lᵀ = A + jitter_used·I.
struct CholeskyFactor {
  Matrix lower;
  double jitter_used = 0.0;

  std::size_t dim() const { return static_cast<std::size_t>(lower.rows()); }

  // A zero factor represents a degenerate (point-mass) Gaussian.
  static CholeskyFactor zero(std::size_t n);

  /// L·z
  Vector multiply(const Vector& z) const;
  /// L⁻¹·b
  Vector solve_lower(const Vector& b) const;
  /// L⁻ᵀ·b
  Vector solve_upper(const Vector& b) const;
  /// (L·Lᵀ)⁻¹·b
  Vector solve(const Vector& b) const;
  Matrix solve(const Matrix& b) const;
  double log_det() const;
  Matrix reconstruct() const { return lower * lower.transpose(); }
};

inline constexpr double kDefaultJitter = 1e-8;

/// Cholesky factorization, retrying with a geometrically growing diagonal jitter.
///
/// The first attempt uses no jitter. Retries add `base_jitter * mean(diag(A)) * 10^k`
/// for k = 0..5. `base_jitter <= 0` selects kDefaultJitter. The input is symmetrized.
/// Throws NotPositiveDefinite when every attempt fails.
CholeskyFactor cholesky_with_jitter(const Matrix& a, double base_jitter = kDefaultJitter);

/// Symmetric positive semi-definite square root via eigen-decomposition.
Matrix symmetric_sqrt(const Matrix& a);

/// Counter-based seeding on top of std::mt19937_64. Streams derived with split()
/// depend only on (seed, key), so fan-out over workers is reproducible regardless
/// of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  RngStream split(std::uint64_t key) const;

  double normal();
  double uniform();                         // [0, 1)
  double uniform(double lo, double hi);     // [lo, hi)
  std::size_t uniform_index(std::size_t n); // {0, ..., n-1}
  double rademacher();
  Vector normal_vector(std::size_t n);
  Vector rademacher_vector(std::size_t n);
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);

/// mean + L·z with z ~ N(0, I).
Vector mvn_sample(const Vector& mean, const CholeskyFactor& chol, RngStream& rng);

/// Gaussian log-density through triangular solves.
double mvn_logpdf(const Vector& y, const Vector& mean, const CholeskyFactor& chol);

/// Empirical mean and (unbiased) covariance of samples stored as columns.
struct GaussianFit {
  Vector mean;
  Matrix covariance;
  std::size_t count = 0;
};
GaussianFit fit_gaussian(const Matrix& samples);

/// KL(N(m0, S0) || N(m1, S1)) in nats.
double gaussian_kl(const Vector& m0, const Matrix& s0, const Vector& m1, const Matrix& s1);

/// Largest |Ĉ_ij − C_ij| / sqrt(C_ii C_jj): covariance error relative to the
/// diagonal scale of the reference.
double max_normalized_cov_error(const Matrix& estimate, const Matrix& reference);

bool all_finite(const Vector& v);

/// Runs fn(i) for i in [0, count) on up to `workers` threads (0 = hardware concurrency).
/// Each index is handled by exactly one call; callers derive per-index RNG streams
/// so results do not depend on the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  std::size_t workers = 0);

}  // namespace geomdiff
