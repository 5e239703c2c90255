#pragma once

#include <functional>
#include <vector>

#include "geomdiff/kernels.hpp"
#include "geomdiff/schedule.hpp"
#include "geomdiff/score_param.hpp"

namespace geomdiff {

enum class Integrator { euler_maruyama, exponential };
enum class NoiseFactor { cholesky, symmetric_sqrt };

std::string to_string(Integrator i);
Integrator integrator_from_string(const std::string& name);

/// GP(m, k) restricted to a finite input set, with the square root used for noise.
struct LimitingGaussian {
  Vector mean;
  Matrix gram;
  Matrix root;  // root·rootᵀ = gram (+ jitter)

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
};

LimitingGaussian limiting_gaussian(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x,
                                   NoiseFactor factor = NoiseFactor::cholesky);

/// Standard-normal source: noise(draw_index, dim). Index 0 is the initial state.
using NoiseSource = std::function<Vector(std::size_t, std::size_t)>;

struct SdeRunConfig {
  int steps = 1000;
  double eps_clip = -1.0;  // negative: use the schedule's
  Integrator integrator = Integrator::euler_maruyama;
  bool store_trajectory = false;

  void validate(const DiffusionSchedule& schedule) const;
  double floor(const DiffusionSchedule& schedule) const { return eps_clip > 0.0 ? eps_clip : schedule.eps_clip; }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
};

struct SdeResult {
  Vector sample;
  Trajectory trajectory;
};

/// Uniform time grid T = t₀ > t₁ > … > t_N = ε.
std::vector<double> reverse_time_grid(const DiffusionSchedule& schedule, int steps, double eps);

/// One reverse step from t to t − h, applied to every column of `y`; `z` holds the
/// standard-normal draws column-wise and `ks` the preconditioned score at (t, y).
void reverse_step(Matrix& y, const Matrix& ks, const Matrix& z, double t, double h, const LimitingGaussian& prior,
                  const DiffusionSchedule& schedule, Integrator integrator);

/// Reverse-SDE draw: Ȳ₀ ~ N(m, K), then `steps` steps down to ε.
SdeResult reverse_sde_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                             const SdeRunConfig& config, const NoiseSource& noise);
SdeResult reverse_sde_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                             const SdeRunConfig& config, RngStream& rng);
SdeResult reverse_sde_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                             const PointSet& x, const DiffusionSchedule& schedule, const SdeRunConfig& config,
                             RngStream& rng);

/// `count` independent reverse-SDE draws as columns; column j uses rng.split(j).
Matrix reverse_sde_sample_batch(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                                const SdeRunConfig& config, const RngStream& rng, std::size_t count);

/// dY = ½{m − Y − K∇log p_t}β(t) dt, Heun from t_start to t_end (either direction).
Vector probability_flow_solve(BoundScore& score, const Vector& m, const DiffusionSchedule& schedule, Vector y,
                              double t_start, double t_end, int steps, Trajectory* trajectory = nullptr);

/// Deterministic given the initial state: y_T ~ N(m, K) is drawn from `rng`.
SdeResult probability_flow_sample(BoundScore& score, const LimitingGaussian& prior, const DiffusionSchedule& schedule,
                                  const SdeRunConfig& config, RngStream& rng);

/// n_steps of Y ← Y + (γ/2)·K∇log p_t + √γ·K^{1/2}·z at fixed t.
Vector langevin_steps(BoundScore& score, const Matrix& root, Vector y, double t, int n_steps, double gamma,
                      RngStream& rng);

}  // namespace geomdiff
