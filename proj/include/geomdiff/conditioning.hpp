#pragma once

#include <array>
#include <string>

#include "geomdiff/samplers.hpp"

namespace geomdiff {

enum class NoiseScheme { resample_every_inner, resample_every_outer, sde_path_noise, no_noise };

inline constexpr std::array<NoiseScheme, 4> kAllSchemes = {NoiseScheme::resample_every_inner,
                                                           NoiseScheme::resample_every_outer,
                                                           NoiseScheme::sde_path_noise, NoiseScheme::no_noise};

std::string to_string(NoiseScheme s);
NoiseScheme noise_scheme_from_string(const std::string& name);

/// How the Langevin corrector preconditions the target update.
///   joint: y* += (γ/2)(K∇log p)_* + √γ (K^{1/2}z)_*
///   target_block: y* += (γ/2) K_**(∇log p)_* + √γ K_**^{1/2} z
enum class LangevinPreconditioner { joint, target_block };

struct ConditioningTask {
  PointSet context_x;
  Vector context_y;
  PointSet target_x;
  NoiseScheme scheme = NoiseScheme::resample_every_inner;
  int outer_steps = 500;
  int inner_steps = 5;
  int terminal_steps = 0;
  // Inner step = langevin_scale × (outer step in B(t) units).
  double langevin_scale = 1.0;
  double eps_clip = -1.0;
  Integrator integrator = Integrator::euler_maruyama;
  LangevinPreconditioner preconditioner = LangevinPreconditioner::joint;

  void validate(int output_dim) const;
  /// [context_x; target_x]
  PointSet joint_inputs() const;
};

/// Per-sample call counts.
struct ConditioningCounters {
  std::size_t score_evaluations = 0;
  std::size_t context_draws = 0;
};

struct ConditionalBatch {
  Matrix samples;  // target dimension × count
  ConditioningCounters counters;
};

/// Langevin-corrected conditional sampler. `joint_score` and `joint_prior` are bound
/// to task.joint_inputs(); column j of the result uses rng.split(j).
ConditionalBatch conditional_sample_batch(BoundScore& joint_score, const LimitingGaussian& joint_prior,
                                          const DiffusionSchedule& schedule, const ConditioningTask& task,
                                          const RngStream& rng, std::size_t count);

Vector conditional_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                          const DiffusionSchedule& schedule, const ConditioningTask& task, RngStream& rng);

/// RePaint: inner cycles of one reverse step followed by one forward step, with the
/// context re-noised from its exact transition each cycle. task.scheme is ignored.
ConditionalBatch repaint_sample_batch(BoundScore& joint_score, const LimitingGaussian& joint_prior,
                                      const DiffusionSchedule& schedule, const ConditioningTask& task,
                                      const RngStream& rng, std::size_t count);

Vector repaint_sample(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                      const DiffusionSchedule& schedule, const ConditioningTask& task, RngStream& rng);

/// Composition of an exponential-integrator backward step and a forward step of size γ
/// (unit-rate clock, K = I), written as X' = a_x·X + drift·∇log p + noise·Z.
struct RepaintCoefficients {
  double state_scale = 0.0;
  double drift_scale = 0.0;
  double noise_scale = 0.0;
  // Weights of the two independent draws before merging them into Z.
  double backward_noise = 0.0;
  double forward_noise = 0.0;
};
RepaintCoefficients repaint_langevin_coefficients(double gamma);

/// Noise-sampling cost of each context scheme: complexity classes (N outer, I inner
/// steps) and exact per-sample counts for the closed-form implementation.
struct SchemeCost {
  NoiseScheme scheme = NoiseScheme::resample_every_inner;
  std::string closed_form_noise;
  std::string simulated_noise;
  std::size_t context_draws = 0;
  std::size_t score_evaluations = 0;
};
SchemeCost scheme_cost(NoiseScheme scheme, int outer_steps, int inner_steps, int terminal_steps = 0);

}  // namespace geomdiff
