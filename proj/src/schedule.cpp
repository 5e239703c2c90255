#include "geomdiff/schedule.hpp"

#include <cmath>
#include <string>

namespace geomdiff {

namespace {

void check_time(const DiffusionSchedule& s, double t) {
  if (!(t >= -1e-12 && t <= s.horizon + 1e-12))
    throw std::domain_error("diffusion time " + std::to_string(t) + " outside [0, T]");
}

}  // namespace

void DiffusionSchedule::validate() const {
  if (!(beta_min > 0.0) || !(beta_max > 0.0)) throw ConfigError("schedule: beta_min/beta_max must be > 0");
  if (!(horizon > 0.0)) throw ConfigError("schedule: horizon must be > 0");
  if (!(eps_clip > 0.0 && eps_clip < horizon)) throw ConfigError("schedule: eps_clip must be in (0, T)");
}

double DiffusionSchedule::beta(double t) const {
  check_time(*this, t);
  return beta_min + (beta_max - beta_min) * t / horizon;
}

double DiffusionSchedule::integral(double t) const {
  check_time(*this, t);
  return beta_min * t + 0.5 * (beta_max - beta_min) * t * t / horizon;
}

double DiffusionSchedule::sigma(double t) const { return std::sqrt(-std::expm1(-integral(t))); }

double DiffusionSchedule::decay(double t) const { return std::exp(-0.5 * integral(t)); }

TransitionMoments transition_moments(const DiffusionSchedule& schedule, double t, const Vector& y0,
                                     const Vector& m, const Matrix& k) {
  require_dims(y0.size() == m.size() && k.rows() == m.size() && k.cols() == m.size(),
               "transition_moments: dimension mismatch");
  TransitionMoments tm;
  tm.decay = schedule.decay(t);
  tm.sigma = schedule.sigma(t);
  tm.mean = tm.decay * y0 + (1.0 - tm.decay) * m;
  tm.covariance = (tm.sigma * tm.sigma) * k;
  return tm;
}

Vector conditional_score(const DiffusionSchedule& schedule, double t, const Vector& yt, const Vector& y0,
                         const Vector& m, const CholeskyFactor& k_chol) {
  require_dims(yt.size() == y0.size() && yt.size() == m.size() &&
                   yt.size() == static_cast<Eigen::Index>(k_chol.dim()),
               "conditional_score: dimension mismatch");
  const double sigma = schedule.sigma(t);
  if (!(sigma > 0.0)) throw NumericError("conditional_score: Σ_{t|0} is singular at t = 0");
  const double decay = schedule.decay(t);
  const Vector mean = decay * y0 + (1.0 - decay) * m;
  return -k_chol.solve(Vector(yt - mean)) / (sigma * sigma);
}

MarginalMoments marginal_moments(const DiffusionSchedule& schedule, double t, const Vector& data_mean,
                                 const Matrix& data_cov, const Vector& m, const Matrix& k) {
  require_dims(data_mean.size() == m.size() && data_cov.rows() == m.size() && k.rows() == m.size(),
               "marginal_moments: dimension mismatch");
  const double decay = schedule.decay(t);
  return {decay * data_mean + (1.0 - decay) * m, k + (decay * decay) * (data_cov - k)};
}

Vector exact_marginal_score(const DiffusionSchedule& schedule, double t, const Vector& yt,
                            const Vector& data_mean, const Matrix& data_cov, const Vector& m,
                            const Matrix& k) {
  require_dims(yt.size() == m.size(), "exact_marginal_score: dimension mismatch");
  const MarginalMoments mm = marginal_moments(schedule, t, data_mean, data_cov, m, k);
  const CholeskyFactor lt = cholesky_with_jitter(mm.covariance);
  return -k * lt.solve(Vector(yt - mm.mean));
}

}  // namespace geomdiff
