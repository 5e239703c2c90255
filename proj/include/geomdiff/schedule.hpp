#pragma once

#include "geomdiff/numcore.hpp"

namespace geomdiff {

/// Linear time scale β(t) = β_min + (β_max − β_min)·t/T on [0, T].
struct DiffusionSchedule {
  double beta_min = 1e-4;
  double beta_max = 15.0;
  double horizon = 1.0;
  double eps_clip = 5e-4;  // reverse integration stops here

  void validate() const;

  double beta(double t) const;
  /// B(t) = ∫₀ᵗ β(s) ds
  double integral(double t) const;
  /// σ_{t|0} = (1 − e^{−B(t)})^{1/2}
  double sigma(double t) const;
  /// e^{−B(t)/2}
  double decay(double t) const;
};

/// Moments of Y_t | Y_0 for the kernel-shaped OU process.
struct TransitionMoments {
  Vector mean;
  Matrix covariance;  // σ²·K
  double sigma = 0.0;
  double decay = 1.0;
};

TransitionMoments transition_moments(const DiffusionSchedule& schedule, double t, const Vector& y0,
                                     const Vector& m, const Matrix& k);

/// ∇ log p_{t|0}(y_t | y_0) = −Σ_{t|0}⁻¹(y_t − m_{t|0}) with Σ_{t|0} = σ²K, using a
/// precomputed Cholesky factor of K.
Vector conditional_score(const DiffusionSchedule& schedule, double t, const Vector& yt, const Vector& y0,
                         const Vector& m, const CholeskyFactor& k_chol);

/// Preconditioned marginal score K∇log p_t when the data are N(m₀, Σ₀):
/// −K Σ_t⁻¹ (y − m_t) with Σ_t = K + e^{−B}(Σ₀ − K).
Vector exact_marginal_score(const DiffusionSchedule& schedule, double t, const Vector& yt,
                            const Vector& data_mean, const Matrix& data_cov, const Vector& m,
                            const Matrix& k);

/// Marginal moments of Y_t when Y_0 ~ N(m₀, Σ₀).
struct MarginalMoments {
  Vector mean;
  Matrix covariance;
};
MarginalMoments marginal_moments(const DiffusionSchedule& schedule, double t, const Vector& data_mean,
                                 const Matrix& data_cov, const Vector& m, const Matrix& k);

}  // namespace geomdiff
