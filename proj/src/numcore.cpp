#include "geomdiff/numcore.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <thread>
#include <vector>

namespace geomdiff {

void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

CholeskyFactor CholeskyFactor::zero(std::size_t n) {
  CholeskyFactor f;
  f.lower = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  return f;
}

Vector CholeskyFactor::multiply(const Vector& z) const {
  require_dims(z.size() == lower.rows(), "CholeskyFactor::multiply: dimension mismatch");
  return lower.triangularView<Eigen::Lower>() * z;
}

Vector CholeskyFactor::solve_lower(const Vector& b) const {
  require_dims(b.size() == lower.rows(), "CholeskyFactor::solve_lower: dimension mismatch");
  return lower.triangularView<Eigen::Lower>().solve(b);
}

Vector CholeskyFactor::solve_upper(const Vector& b) const {
  require_dims(b.size() == lower.rows(), "CholeskyFactor::solve_upper: dimension mismatch");
  return lower.transpose().triangularView<Eigen::Upper>().solve(b);
}

Vector CholeskyFactor::solve(const Vector& b) const { return solve_upper(solve_lower(b)); }

Matrix CholeskyFactor::solve(const Matrix& b) const {
  require_dims(b.rows() == lower.rows(), "CholeskyFactor::solve: dimension mismatch");
  Matrix tmp = lower.triangularView<Eigen::Lower>().solve(b);
  return lower.transpose().triangularView<Eigen::Upper>().solve(tmp);
}

double CholeskyFactor::log_det() const {
  return 2.0 * lower.diagonal().array().log().sum();
}

namespace {

bool try_factor(const Matrix& a, Matrix& out) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) return false;
  out = llt.matrixL();
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double d = out(i, i);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
  }
  return out.allFinite();
}

}  // namespace

CholeskyFactor cholesky_with_jitter(const Matrix& a, double base_jitter) {
  require_dims(a.rows() == a.cols() && a.rows() > 0, "cholesky_with_jitter: matrix must be square");
  const Matrix sym = 0.5 * (a + a.transpose());
  CholeskyFactor f;
  if (try_factor(sym, f.lower)) return f;

  if (base_jitter <= 0.0) base_jitter = kDefaultJitter;
  double scale = sym.diagonal().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  double jitter = base_jitter * scale;
  const Matrix eye = Matrix::Identity(sym.rows(), sym.cols());
  for (int attempt = 0; attempt < 6; ++attempt, jitter *= 10.0) {
    if (try_factor(sym + jitter * eye, f.lower)) {
      f.jitter_used = jitter;
      return f;
    }
  }
  throw NotPositiveDefinite("cholesky_with_jitter: matrix not positive definite after 6 jitter retries");
}

Matrix symmetric_sqrt(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.transpose()));
  const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

RngStream RngStream::split(std::uint64_t key) const {
  return RngStream(splitmix64(seed_ ^ splitmix64(key + 0x632be59bd9b4e019ULL)));
}

double RngStream::normal() { return normal_(engine_); }

double RngStream::uniform() {
  // 53 random bits -> [0, 1)
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

double RngStream::rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }

Vector RngStream::normal_vector(std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal();
  return v;
}

Vector RngStream::rademacher_vector(std::size_t n) {
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rademacher();
  return v;
}

Vector mvn_sample(const Vector& mean, const CholeskyFactor& chol, RngStream& rng) {
  require_dims(mean.size() == chol.lower.rows(), "mvn_sample: mean/factor dimension mismatch");
  return mean + chol.multiply(rng.normal_vector(chol.dim()));
}

double mvn_logpdf(const Vector& y, const Vector& mean, const CholeskyFactor& chol) {
  require_dims(y.size() == mean.size() && y.size() == chol.lower.rows(),
               "mvn_logpdf: dimension mismatch");
  const Vector w = chol.solve_lower(y - mean);
  const double d = static_cast<double>(y.size());
  return -0.5 * w.squaredNorm() - 0.5 * chol.log_det() - 0.5 * d * std::log(2.0 * std::numbers::pi);
}

GaussianFit fit_gaussian(const Matrix& samples) {
  if (samples.cols() < 2) throw std::invalid_argument("fit_gaussian: need at least two samples");
  GaussianFit fit;
  fit.count = static_cast<std::size_t>(samples.cols());
  fit.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - fit.mean;
  fit.covariance = centered * centered.transpose() / static_cast<double>(samples.cols() - 1);
  return fit;
}

double gaussian_kl(const Vector& m0, const Matrix& s0, const Vector& m1, const Matrix& s1) {
  require_dims(m0.size() == m1.size() && s0.rows() == m0.size() && s1.rows() == m1.size(),
               "gaussian_kl: dimension mismatch");
  const CholeskyFactor l0 = cholesky_with_jitter(s0);
  const CholeskyFactor l1 = cholesky_with_jitter(s1);
  const double trace = l1.solve(s0).trace();
  const Vector diff = m1 - m0;
  const double maha = l1.solve_lower(diff).squaredNorm();
  const double k = static_cast<double>(m0.size());
  return 0.5 * (trace + maha - k + l1.log_det() - l0.log_det());
}

double max_normalized_cov_error(const Matrix& estimate, const Matrix& reference) {
  require_dims(estimate.rows() == reference.rows() && estimate.cols() == reference.cols(),
               "max_normalized_cov_error: shape mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < reference.rows(); ++i) {
    for (Eigen::Index j = 0; j < reference.cols(); ++j) {
      const double scale = std::sqrt(reference(i, i) * reference(j, j));
      worst = std::max(worst, std::abs(estimate(i, j) - reference(i, j)) / scale);
    }
  }
  return worst;
}

bool all_finite(const Vector& v) { return v.allFinite(); }

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace geomdiff
