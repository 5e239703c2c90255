#include "geomdiff/symmetry.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/QR>

namespace geomdiff {

namespace {

PointSet random_points(int n, int dim, double scale, RngStream& rng) {
  PointSet x(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) x(i, j) = rng.uniform(-scale, scale);
  return x;
}

Vector random_outputs(Eigen::Index size, double scale, RngStream& rng) {
  return scale * rng.normal_vector(static_cast<std::size_t>(size));
}

double relative_gap(const Vector& got, const Vector& want) {
  return (got - want).lpNorm<Eigen::Infinity>() / std::max(1.0, want.lpNorm<Eigen::Infinity>());
}

}  // namespace

std::string to_string(Representation r) { return r == Representation::identity ? "identity" : "trivial"; }

Representation representation_for(int input_dim, int output_dim) {
  if (output_dim == 1) return Representation::trivial;
  if (output_dim == input_dim) return Representation::identity;
  throw ConfigError("no E(n) representation for output_dim " + std::to_string(output_dim) + " and input_dim " +
                    std::to_string(input_dim));
}

GroupElement GroupElement::identity(int dim) { return {Vector::Zero(dim), Matrix::Identity(dim, dim)}; }

GroupElement GroupElement::rotation2d(double angle, const Vector& translation) {
  Matrix h(2, 2);
  h << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return {translation, h};
}

GroupElement GroupElement::compose(const GroupElement& other) const {
  require_dims(dim() == other.dim(), "group: dimension mismatch");
  return {orthogonal * other.translation + translation, orthogonal * other.orthogonal};
}

GroupElement GroupElement::inverse() const {
  const Matrix ht = orthogonal.transpose();
  return {-(ht * translation), ht};
}

void GroupElement::validate() const {
  if (orthogonal.rows() != orthogonal.cols() || translation.size() != orthogonal.rows())
    throw ConfigError("group element: inconsistent dimensions");
  const double dev =
      (orthogonal.transpose() * orthogonal - Matrix::Identity(orthogonal.rows(), orthogonal.cols())).cwiseAbs().maxCoeff();
  if (dev > 1e-12) throw ConfigError("group element: h is not orthogonal");
}

Matrix random_orthogonal(int dim, RngStream& rng, bool proper) {
  Matrix a(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < dim; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  if (proper && q.determinant() < 0.0) q.col(0) *= -1.0;
  return q;
}

GroupElement random_group_element(int dim, RngStream& rng, double translation_scale, bool proper) {
  GroupElement g;
  g.orthogonal = random_orthogonal(dim, rng, proper);
  g.translation = translation_scale * rng.normal_vector(static_cast<std::size_t>(dim));
  return g;
}

Matrix stacked_representation(const GroupElement& g, Eigen::Index points, Representation rho, int output_dim) {
  const Eigen::Index d = output_dim;
  if (rho == Representation::identity) require_dims(d == g.dim(), "representation: output_dim must equal input dim");
  Matrix r = Matrix::Zero(points * d, points * d);
  for (Eigen::Index i = 0; i < points; ++i)
    r.block(i * d, i * d, d, d) = rho == Representation::identity ? g.orthogonal : Matrix::Identity(d, d);
  return r;
}

Field act_on_field(const GroupElement& g, const PointSet& x, const Vector& y, Representation rho) {
  require_dims(x.cols() == g.dim(), "act_on_field: input dimension mismatch");
  require_dims(x.rows() > 0 ? y.size() % x.rows() == 0 : y.size() == 0, "act_on_field: output size mismatch");
  const int d = x.rows() > 0 ? static_cast<int>(y.size() / x.rows()) : 1;
  Field f;
  f.x = ((x * g.orthogonal.transpose()).rowwise() + g.translation.transpose()).eval();
  f.y = y;
  if (rho == Representation::identity) {
    require_dims(d == g.dim(), "act_on_field: vector field outputs must match the input dimension");
    for (Eigen::Index i = 0; i < x.rows(); ++i) f.y.segment(i * d, d) = g.orthogonal * y.segment(i * d, d);
  }
  return f;
}

PointSet permute_points(const PointSet& x, const std::vector<Eigen::Index>& perm) {
  PointSet out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) out.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
  return out;
}

Vector permute_outputs(const Vector& y, const std::vector<Eigen::Index>& perm, int output_dim) {
  Vector out(y.size());
  const Eigen::Index d = output_dim;
  for (std::size_t i = 0; i < perm.size(); ++i)
    out.segment(static_cast<Eigen::Index>(i) * d, d) = y.segment(perm[i] * d, d);
  return out;
}

std::vector<Eigen::Index> random_permutation(Eigen::Index n, RngStream& rng) {
  std::vector<Eigen::Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Eigen::Index{0});
  for (std::size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  return p;
}

double check_kernel_equivariance(const KernelSpec& kernel, int trials, RngStream& rng, double input_scale) {
  if (trials < 1) throw ConfigError("check_kernel_equivariance: trials must be >= 1");
  const Representation rho = representation_for(kernel.input_dim, kernel.output_dim);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const GroupElement g = random_group_element(kernel.input_dim, rng);
    const Vector x = random_points(1, kernel.input_dim, input_scale, rng).row(0).transpose();
    const Vector xp = random_points(1, kernel.input_dim, input_scale, rng).row(0).transpose();
    const Matrix r = rho == Representation::identity ? g.orthogonal : Matrix::Identity(1, 1);
    const Matrix want = r * kernel_eval(kernel, x, xp) * r.transpose();
    const Matrix got = kernel_eval(kernel, g.act(x), g.act(xp));
    worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
  }
  return worst;
}

double check_score_equivariance(const FieldMap& f, int input_dim, int output_dim, const EquivarianceProbe& probe,
                                RngStream& rng) {
  if (probe.trials < 1 || probe.points < 1) throw ConfigError("check_score_equivariance: empty probe");
  const Representation rho = representation_for(input_dim, output_dim);
  double worst = 0.0;
  for (int i = 0; i < probe.trials; ++i) {
    const GroupElement g = random_group_element(input_dim, rng, probe.translation_scale);
    const PointSet x = random_points(probe.points, input_dim, probe.input_scale, rng);
    const Vector y = random_outputs(static_cast<Eigen::Index>(probe.points) * output_dim, probe.output_scale, rng);
    const double t = rng.uniform(probe.t_min, probe.t_max);
    const Field moved = act_on_field(g, x, y, rho);
    const Vector base = f(t, x, y);
    const Vector want = act_on_field(g, x, base, rho).y;
    worst = std::max(worst, relative_gap(f(t, moved.x, moved.y), want));
  }
  return worst;
}

double check_permutation_equivariance(const FieldMap& f, int input_dim, int output_dim,
                                      const EquivarianceProbe& probe, RngStream& rng) {
  if (probe.trials < 1 || probe.points < 1) throw ConfigError("check_permutation_equivariance: empty probe");
  double worst = 0.0;
  for (int i = 0; i < probe.trials; ++i) {
    const PointSet x = random_points(probe.points, input_dim, probe.input_scale, rng);
    const Vector y = random_outputs(static_cast<Eigen::Index>(probe.points) * output_dim, probe.output_scale, rng);
    const double t = rng.uniform(probe.t_min, probe.t_max);
    const auto perm = random_permutation(x.rows(), rng);
    const Vector want = permute_outputs(f(t, x, y), perm, output_dim);
    worst = std::max(worst, relative_gap(f(t, permute_points(x, perm), permute_outputs(y, perm, output_dim)), want));
  }
  return worst;
}

InvarianceReport check_distributional_invariance(const FieldSampler& sampler, const PointSet& x,
                                                 const GroupElement& g, Representation rho, int output_dim,
                                                 std::size_t samples, std::uint64_t seed_x, std::uint64_t seed_gx) {
  if (samples < 2) throw ConfigError("check_distributional_invariance: need at least 2 samples");
  const Matrix a = sampler(x, seed_x, samples);
  const Field moved = act_on_field(g, x, Vector::Zero(x.rows() * output_dim), rho);
  const Matrix back = stacked_representation(g, x.rows(), rho, output_dim).transpose();
  const Matrix b = back * sampler(moved.x, seed_gx, samples);
  require_dims(a.rows() == x.rows() * output_dim && b.cols() == a.cols(),
               "check_distributional_invariance: sampler returned the wrong shape");

  const double n = static_cast<double>(samples);
  const Vector ma = a.rowwise().mean();
  const Vector mb = b.rowwise().mean();
  const Matrix ca = a.colwise() - ma;
  const Matrix cb = b.colwise() - mb;

  InvarianceReport r;
  r.samples = samples;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double va = ca.row(i).squaredNorm() / (n - 1.0);
    const double vb = cb.row(i).squaredNorm() / (n - 1.0);
    const double se = std::sqrt((va + vb) / n);
    if (se > 0.0) r.max_mean_z = std::max(r.max_mean_z, std::abs(ma(i) - mb(i)) / se);
  }
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i; j < a.rows(); ++j) {
      const Eigen::ArrayXd pa = ca.row(i).array() * ca.row(j).array();
      const Eigen::ArrayXd pb = cb.row(i).array() * cb.row(j).array();
      const double sa = pa.mean();
      const double sb = pb.mean();
      const double va = (pa - sa).square().sum() / (n - 1.0);
      const double vb = (pb - sb).square().sum() / (n - 1.0);
      const double se = std::sqrt((va + vb) / n);
      if (se > 0.0) r.max_cov_z = std::max(r.max_cov_z, std::abs(sa - sb) / se);
    }
  }
  return r;
}

}  // namespace geomdiff
