#pragma once

#include "geomdiff/kernels.hpp"
#include "geomdiff/numcore.hpp"

namespace geomdiff {

/// Exact Gaussian-process prior, posterior and marginal likelihood. This is the
/// ground truth that samplers and likelihood estimators are checked against.

struct GpPosterior {
  Vector mean;
  Matrix covariance;
  std::size_t context_count = 0;
  std::size_t target_count = 0;
};

enum class PosteriorTarget {
  observed,  // predictive of y* = f(x*) + noise
  latent,    // posterior of f(x*)
};

/// Draw from N(m(X), K(X,X) + noise_var·I).
Vector gp_sample(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x, double noise_var,
                 RngStream& rng);

/// Standard GP conditioning through Cholesky solves. Observation noise enters only via
/// `noise_var`; with PosteriorTarget::observed it is added to the target covariance too.
GpPosterior gp_condition(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& xc,
                         const Vector& yc, const PointSet& xt, double noise_var,
                         PosteriorTarget target = PosteriorTarget::observed);

double gp_loglik(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x, const Vector& y,
                 double noise_var);

/// Log-density of y* under the posterior, optionally with zeroed off-diagonal
/// covariance (the "diagonal GP" baseline).
double gp_posterior_logpdf(const GpPosterior& posterior, const Vector& y, bool diagonal_only = false);

}  // namespace geomdiff
