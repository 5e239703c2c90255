#include "geomdiff/samplers.hpp"

#include <cmath>

namespace geomdiff {

namespace {

void check_finite(const Matrix& y, const char* where, double t) {
  if (!y.allFinite()) throw NumericError(std::string(where) + ": non-finite state at t = " + std::to_string(t));
}

Matrix normals(RngStream& rng, Eigen::Index rows) {
  Matrix z(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) z(i, 0) = rng.normal();
  return z;
}

}  // namespace

std::string to_string(Integrator i) { return i == Integrator::exponential ? "exponential" : "euler_maruyama"; }

Integrator integrator_from_string(const std::string& name) {
  if (name == "euler_maruyama" || name == "em") return Integrator::euler_maruyama;
  if (name == "exponential") return Integrator::exponential;
  throw ConfigError("unknown integrator '" + name + "'");
}

LimitingGaussian limiting_gaussian(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x,
                                   NoiseFactor factor) {
  const GramResult g = gram(kernel, mean, x);
  LimitingGaussian lg;
  lg.mean = g.mean;
  lg.gram = g.covariance;
  lg.root = factor == NoiseFactor::symmetric_sqrt ? symmetric_sqrt(g.covariance) : cholesky_with_jitter(g.covariance).lower;
  return lg;
}

void SdeRunConfig::validate(const DiffusionSchedule& schedule) const {
  if (steps < 1) throw ConfigError("sampler: steps must be >= 1");
  const double eps = floor(schedule);
  if (!(eps > 0.0 && eps < schedule.horizon)) throw ConfigError("sampler: eps_clip must be in (0, T)");
}

std::vector<double> reverse_time_grid(const DiffusionSchedule& schedule, int steps, double eps) {
  std::vector<double> grid(static_cast<std::size_t>(steps) + 1);
  const double h = (schedule.horizon - eps) / steps;
  for (int k = 0; k <= steps; ++k) grid[static_cast<std::size_t>(k)] = schedule.horizon - k * h;
  grid.back() = eps;
  return grid;
}

void reverse_step(Matrix& y, const Matrix& ks, const Matrix& z, double t, double h, const LimitingGaussian& prior,
                  const DiffusionSchedule& schedule, Integrator integrator) {
  Matrix centered = y.colwise() - prior.mean;
  if (integrator == Integrator::euler_maruyama) {
    const double bh = schedule.beta(t) * h;
    y += bh * (0.5 * centered + ks) + std::sqrt(bh) * (prior.root * z);
  } else {
    const double db = schedule.integral(t) - schedule.integral(std::max(0.0, t - h));
    const double grow = std::exp(0.5 * db);
    y = (grow * centered).colwise() + prior.mean;
    y += 2.0 * (grow - 1.0) * ks + std::sqrt(std::expm1(db)) * (prior.root * z);
  }
}

SdeResult reverse_sde_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                             const SdeRunConfig& config, const NoiseSource& noise) {
  config.validate(schedule);
  require_dims(score.dim() == prior.dim(), "reverse_sde_sample: score/prior dimension mismatch");
  const auto grid = reverse_time_grid(schedule, config.steps, config.floor(schedule));
  const std::size_t d = prior.dim();
  Matrix y = prior.mean + prior.root * noise(0, d);
  SdeResult result;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    if (config.store_trajectory) {
      result.trajectory.times.push_back(t);
      result.trajectory.states.push_back(y.col(0));
    }
    const Matrix ks = score.evaluate(t, y.col(0));
    const Matrix z = noise(k + 1, d);
    reverse_step(y, ks, z, t, t - grid[k + 1], prior, schedule, config.integrator);
    check_finite(y, "reverse_sde_sample", t);
  }
  result.sample = y.col(0);
  if (config.store_trajectory) {
    result.trajectory.times.push_back(grid.back());
    result.trajectory.states.push_back(result.sample);
  }
  return result;
}

SdeResult reverse_sde_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                             const SdeRunConfig& config, RngStream& rng) {
  return reverse_sde_sample(score, prior, schedule, config,
                            [&rng](std::size_t, std::size_t d) { return rng.normal_vector(d); });
}

SdeResult reverse_sde_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                             const PointSet& x, const DiffusionSchedule& schedule, const SdeRunConfig& config,
                             RngStream& rng) {
  auto bound = score.bind(x);
  return reverse_sde_sample(*bound, limiting_gaussian(kernel, mean, x), schedule, config, rng);
}

Matrix reverse_sde_sample_batch(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                                const SdeRunConfig& config, const RngStream& rng, std::size_t count) {
  config.validate(schedule);
  require_dims(score.dim() == prior.dim(), "reverse_sde_sample_batch: score/prior dimension mismatch");
  const auto d = static_cast<Eigen::Index>(prior.dim());
  const auto n = static_cast<Eigen::Index>(count);
  std::vector<RngStream> streams;
  streams.reserve(count);
  for (std::size_t j = 0; j < count; ++j) streams.push_back(rng.split(j));
  auto draw = [&]() {
    Matrix z(d, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < d; ++i) z(i, j) = streams[static_cast<std::size_t>(j)].normal();
    return z;
  };
  Matrix y = (prior.root * draw()).colwise() + prior.mean;
  const auto grid = reverse_time_grid(schedule, config.steps, config.floor(schedule));
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const double t = grid[k];
    const Matrix ks = score.evaluate_batch(t, y);
    reverse_step(y, ks, draw(), t, t - grid[k + 1], prior, schedule, config.integrator);
    check_finite(y, "reverse_sde_sample_batch", t);
  }
  return y;
}

Vector probability_flow_solve(BoundScore& score, const Vector& m, const DiffusionSchedule& schedule, Vector y,
                              double t_start, double t_end, int steps, Trajectory* trajectory) {
  if (steps < 1) throw ConfigError("probability flow: steps must be >= 1");
  require_dims(y.size() == m.size() && score.dim() == static_cast<std::size_t>(m.size()),
               "probability flow: dimension mismatch");
  auto drift = [&](double t, const Vector& state) -> Vector {
    return 0.5 * schedule.beta(t) * (m - state - score.evaluate(t, state));
  };
  const double h = (t_end - t_start) / steps;
  for (int k = 0; k < steps; ++k) {
    const double t = t_start + k * h;
    const double t_next = k + 1 == steps ? t_end : t_start + (k + 1) * h;
    if (trajectory != nullptr) {
      trajectory->times.push_back(t);
      trajectory->states.push_back(y);
    }
    const Vector k1 = drift(t, y);
    const Vector pred = y + (t_next - t) * k1;
    const Vector k2 = drift(t_next, pred);
    y += 0.5 * (t_next - t) * (k1 + k2);
    check_finite(y, "probability_flow_solve", t);
  }
  if (trajectory != nullptr) {
    trajectory->times.push_back(t_end);
    trajectory->states.push_back(y);
  }
  return y;
}

SdeResult probability_flow_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                                  const SdeRunConfig& config, RngStream& rng) {
  config.validate(schedule);
  const Vector y0 = prior.mean + prior.root * rng.normal_vector(prior.dim());
  SdeResult result;
  result.sample = probability_flow_solve(score, prior.mean, schedule, y0, schedule.horizon, config.floor(schedule),
                                         config.steps, config.store_trajectory ? &result.trajectory : nullptr);
  return result;
}

Vector langevin_steps(BoundScore& score, const Matrix& root, Vector y, double t, int n_steps, double gamma,
                      RngStream& rng) {
  if (!(gamma > 0.0)) throw ConfigError("langevin: step size must be > 0");
  if (n_steps < 0) throw ConfigError("langevin: n_steps must be >= 0");
  require_dims(root.rows() == y.size(), "langevin: dimension mismatch");
  const double noise = std::sqrt(gamma);
  for (int s = 0; s < n_steps; ++s) {
    y += 0.5 * gamma * score.evaluate(t, y) + noise * (root * normals(rng, y.size())).col(0);
    check_finite(y, "langevin_steps", t);
  }
  return y;
}

}  // namespace geomdiff
