#include "geomdiff/gp_oracle.hpp"

namespace geomdiff {

namespace {

Matrix with_noise(Matrix k, double noise_var) {
  if (noise_var < 0.0) throw std::invalid_argument("noise_var must be >= 0");
  k.diagonal().array() += noise_var;
  return k;
}

}  // namespace

Vector gp_sample(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x, double noise_var,
                 RngStream& rng) {
  const GramResult g = gram(kernel, mean, x);
  return mvn_sample(g.mean, cholesky_with_jitter(with_noise(g.covariance, noise_var)), rng);
}

GpPosterior gp_condition(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& xc,
                         const Vector& yc, const PointSet& xt, double noise_var, PosteriorTarget target) {
  if (xc.rows() == 0) throw std::invalid_argument("gp_condition: empty context");
  const Eigen::Index d = kernel.output_dim;
  require_dims(yc.size() == xc.rows() * d, "gp_condition: context output size mismatch");

  const CholeskyFactor kcc = cholesky_with_jitter(with_noise(gram(kernel, xc), noise_var));
  const Matrix ktc = gram(kernel, xt, xc);
  Matrix ktt = gram(kernel, xt);
  if (target == PosteriorTarget::observed) ktt = with_noise(std::move(ktt), noise_var);

  GpPosterior post;
  post.context_count = static_cast<std::size_t>(xc.rows());
  post.target_count = static_cast<std::size_t>(xt.rows());
  post.mean = mean_vector(mean, xt) + ktc * kcc.solve(Vector(yc - mean_vector(mean, xc)));
  const Matrix w = kcc.lower.triangularView<Eigen::Lower>().solve(ktc.transpose());
  post.covariance = ktt - w.transpose() * w;
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  return post;
}

double gp_loglik(const KernelSpec& kernel, const MeanSpec& mean, const PointSet& x, const Vector& y,
                 double noise_var) {
  const GramResult g = gram(kernel, mean, x);
  return mvn_logpdf(y, g.mean, cholesky_with_jitter(with_noise(g.covariance, noise_var)));
}

double gp_posterior_logpdf(const GpPosterior& posterior, const Vector& y, bool diagonal_only) {
  Matrix cov = posterior.covariance;
  if (diagonal_only) cov = Matrix(cov.diagonal().asDiagonal());
  return mvn_logpdf(y, posterior.mean, cholesky_with_jitter(cov));
}

}  // namespace geomdiff
