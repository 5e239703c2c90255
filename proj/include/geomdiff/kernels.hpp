#pragma once

#include <string>
#include <vector>

#include "geomdiff/numcore.hpp"

namespace geomdiff {

enum class KernelFamily {
  white,
  squared_exponential,
  matern52,
  periodic,
  weakly_periodic,
  diagonal,    // base scalar family times I_d
  curl_free,   // SE base times A(x, x')
  div_free,    // SE base times B(x, x')
};

std::string to_string(KernelFamily f);
KernelFamily kernel_family_from_string(const std::string& name);

/// Covariance function with hyperparameters.
///
/// Scalar families (white, SE, Matérn-5/2, periodic, weakly periodic) with
/// output_dim > 1 act as k₀·I. `diagonal` makes that explicit with `base`.
/// curl_free/div_free always use an SE base and require output_dim == input_dim.
struct KernelSpec {
  KernelFamily family = KernelFamily::squared_exponential;
  double variance = 1.0;
  double lengthscale = 1.0;
  double period = 1.0;                // periodic, weakly_periodic
  double envelope_lengthscale = 1.0;  // weakly_periodic SE envelope
  int input_dim = 1;
  int output_dim = 1;
  KernelFamily base = KernelFamily::squared_exponential;  // diagonal only
  // Per-coordinate lengthscales for an anisotropic SE. Not stationary under
  // rotations; exists as a negative control for equivariance checks.
  std::vector<double> ard_lengthscales;

  void validate() const;

  static KernelSpec white(double variance = 1.0, int input_dim = 1, int output_dim = 1);
  static KernelSpec se(double variance, double lengthscale, int input_dim = 1, int output_dim = 1);
};

enum class MeanKind { zero, constant, linear, table };

/// Mean function m(x). `linear` evaluates A·x + b; `table` returns the value of the
/// nearest tabulated input.
struct MeanSpec {
  MeanKind kind = MeanKind::zero;
  int output_dim = 1;
  Vector constant;       // constant / linear offset b
  Matrix linear;         // output_dim × input_dim
  PointSet table_inputs;
  Matrix table_values;   // rows align with table_inputs

  static MeanSpec zero(int output_dim = 1);
  static MeanSpec constant_value(const Vector& c);
  static MeanSpec linear_map(const Matrix& a, const Vector& b);

  Vector evaluate(const Vector& x) const;
};

/// d×d covariance block k(x, x').
Matrix kernel_eval(const KernelSpec& spec, const Vector& x, const Vector& xp);

/// k₀(x,x')·A(x,x') (curl_free) or k₀(x,x')·B(x,x') (div_free).
Matrix equivariant_block(const KernelSpec& spec, const Vector& x, const Vector& xp);

/// Block gram matrix K(X, X') of size (n·d)×(n'·d); outputs stacked point-major.
Matrix gram(const KernelSpec& spec, const PointSet& x, const PointSet& xp);
Matrix gram(const KernelSpec& spec, const PointSet& x);

/// Stacked mean vector m(X) of length n·d.
Vector mean_vector(const MeanSpec& mean, const PointSet& x);

struct GramResult {
  Vector mean;
  Matrix covariance;
};
GramResult gram(const KernelSpec& spec, const MeanSpec& mean, const PointSet& x);

/// Central finite-difference divergence of x ↦ k(x, x')·v (div_free), or 2-d curl
/// ∂₁F₂ − ∂₂F₁ for curl_free. Other families report the divergence.
double divergence_of_kernel_column(const KernelSpec& spec, const Vector& xp, const Vector& v,
                                   const Vector& x, double h = 1e-4);

/// Picks the v-th output coordinate of point i in a stacked vector.
inline Eigen::Index stacked_index(Eigen::Index point, Eigen::Index coord, Eigen::Index dim) {
  return point * dim + coord;
}

}  // namespace geomdiff
