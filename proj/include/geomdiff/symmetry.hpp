#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "geomdiff/kernels.hpp"

namespace geomdiff {

/// ρ_triv(g) = 1 for scalar fields, ρ_Id(g) = h for vector fields.
enum class Representation { trivial, identity };

std::string to_string(Representation r);
/// trivial for scalar outputs, identity when outputs live in the input space.
Representation representation_for(int input_dim, int output_dim);

/// E(n) element g·x = h·x + u.
struct GroupElement {
  Vector translation;
  Matrix orthogonal;

  static GroupElement identity(int dim);
  static GroupElement rotation2d(double angle, const Vector& translation = Vector::Zero(2));

  int dim() const { return static_cast<int>(orthogonal.rows()); }
  Vector act(const Vector& x) const { return orthogonal * x + translation; }
  /// (this ∘ other)·x = this·(other·x)
  GroupElement compose(const GroupElement& other) const;
  GroupElement inverse() const;
  /// Throws ConfigError unless hᵀh = I within 1e-12.
  void validate() const;
};

/// Haar-distributed orthogonal matrix (reflections included when `proper` is false).
Matrix random_orthogonal(int dim, RngStream& rng, bool proper = false);
GroupElement random_group_element(int dim, RngStream& rng, double translation_scale = 1.0, bool proper = false);

struct Field {
  PointSet x;
  Vector y;
};

/// (g·x_i, ρ(g)·y_i) for every point.
Field act_on_field(const GroupElement& g, const PointSet& x, const Vector& y, Representation rho);
/// Block-diagonal ρ(g) over n points.
Matrix stacked_representation(const GroupElement& g, Eigen::Index points, Representation rho, int output_dim);

PointSet permute_points(const PointSet& x, const std::vector<Eigen::Index>& perm);
Vector permute_outputs(const Vector& y, const std::vector<Eigen::Index>& perm, int output_dim);
std::vector<Eigen::Index> random_permutation(Eigen::Index n, RngStream& rng);

/// max over trials of ‖k(gx, gx') − ρ(g)k(x, x')ρ(g)ᵀ‖_max
double check_kernel_equivariance(const KernelSpec& kernel, int trials, RngStream& rng, double input_scale = 2.0);

/// f(t, X, Y) → one output per point, stacked.
using FieldMap = std::function<Vector(double, const PointSet&, const Vector&)>;

struct EquivarianceProbe {
  int trials = 50;
  int points = 5;
  double input_scale = 2.0;
  double output_scale = 1.0;
  double t_min = 0.05;
  double t_max = 1.0;
  double translation_scale = 1.0;
};

/// max over trials of ‖f(t, g·X, ρY) − ρ·f(t, X, Y)‖_∞ / max(1, ‖f(t, X, Y)‖_∞)
double check_score_equivariance(const FieldMap& f, int input_dim, int output_dim, const EquivarianceProbe& probe,
                                RngStream& rng);

/// Same measure for random point permutations.
double check_permutation_equivariance(const FieldMap& f, int input_dim, int output_dim,
                                      const EquivarianceProbe& probe, RngStream& rng);

/// count samples at X as columns, from the given seed.
using FieldSampler = std::function<Matrix(const PointSet&, std::uint64_t, std::size_t)>;

struct InvarianceReport {
  double max_mean_z = 0.0;
  double max_cov_z = 0.0;
  std::size_t samples = 0;

  double max_z() const { return std::max(max_mean_z, max_cov_z); }
};

/// Compares samples at X with ρ(g)⁻¹-pulled-back samples at g·X (independent seeds):
/// standardized differences of empirical means and covariance entries.
InvarianceReport check_distributional_invariance(const FieldSampler& sampler, const PointSet& x,
                                                 const GroupElement& g, Representation rho, int output_dim,
                                                 std::size_t samples, std::uint64_t seed_x, std::uint64_t seed_gx);

}  // namespace geomdiff
