#pragma once

#include <cstdint>
#include <string>

#include "geomdiff/samplers.hpp"

namespace geomdiff {

enum class DivergenceKind { exact_autodiff, hutchinson };

std::string to_string(DivergenceKind k);
DivergenceKind divergence_kind_from_string(const std::string& name);

/// Hutchinson probes are Rademacher vectors, fixed for one ODE solve.
struct DivergenceMode {
  DivergenceKind kind = DivergenceKind::exact_autodiff;
  int probes = 8;

  void validate() const;
};

struct OdeConfig {
  int steps = 100;
  double eps_clip = -1.0;  // negative: use the schedule's

  void validate(const DiffusionSchedule& schedule) const;
  double floor(const DiffusionSchedule& schedule) const { return eps_clip > 0.0 ? eps_clip : schedule.eps_clip; }
};

/// Hutchinson estimate of tr(∂(K∇log p_t)/∂y) with the given probes.
double hutchinson_trace(BoundScore& score, double t, const Vector& y, const std::vector<Vector>& probes);
std::vector<Vector> rademacher_probes(std::size_t dim, int count, RngStream& rng);

/// div of f(t, y) = ½β(t){m − y − K∇log p_t(y)}.
double flow_divergence(BoundScore& score, const DiffusionSchedule& schedule, double t, const Vector& y,
                       const DivergenceMode& mode, const std::vector<Vector>& probes);

struct LikelihoodResult {
  double log_likelihood = 0.0;
  double terminal_logpdf = 0.0;   // log N(y_T; m, K)
  double divergence_integral = 0.0;
  Vector terminal;
};

/// log p_ε(y) = log N(y_T; m, K) + ∫_ε^T div f dt, state and log-density integrated
/// together with Heun from ε to T. Probes (Hutchinson only) come from `seed`.
LikelihoodResult log_likelihood(BoundScore& score, const Vector& m, const Matrix& k, const DiffusionSchedule& schedule,
                                const Vector& y, const OdeConfig& config, const DivergenceMode& mode,
                                std::uint64_t seed = 0);

double log_likelihood(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x,
                      const Vector& y, const DiffusionSchedule& schedule, const OdeConfig& config = {},
                      const DivergenceMode& mode = {}, std::uint64_t seed = 0);

/// log p(y* | x*, C) = log p([y_c, y*]) − log p(y_c). Zero for an empty target set.
double conditional_log_likelihood(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean,
                                  const PointSet& xc, const Vector& yc, const PointSet& xt, const Vector& yt,
                                  const DiffusionSchedule& schedule, const OdeConfig& config = {},
                                  const DivergenceMode& mode = {}, std::uint64_t seed = 0);

/// |log p(y_A) − log ∫ p(y_A, y_b) dy_b| for one extra scalar-output point x_b, with the
/// integral taken by the trapezoid rule on [lo, hi] with `nodes` nodes.
double consistency_gap(const ScoreModel& score, const KernelSpec& kernel, const MeanSpec& mean, const PointSet& xa,
                       const Vector& ya, const PointSet& xb, const DiffusionSchedule& schedule, double lo, double hi,
                       int nodes, const OdeConfig& config = {}, const DivergenceMode& mode = {});

}  // namespace geomdiff
