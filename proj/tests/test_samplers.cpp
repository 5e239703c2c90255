#include <doctest.h>

#include "geomdiff/samplers.hpp"
#include "oracles.hpp"

using namespace geomdiff;

namespace {

struct Problem {
  PointSet x;
  Matrix k;
  Matrix s0;
  Vector m0;
  DiffusionSchedule sched;
};

Problem problem() {
  Problem p;
  p.x = PointSet(3, 1);
  p.x << -0.6, 0.1, 0.9;
  p.k = gram(KernelSpec::se(1.0, 0.8), p.x) + 1e-6 * Matrix::Identity(3, 3);
  p.s0 = 0.25 * p.k;
  p.m0 = Vector::Constant(3, 0.5);
  return p;
}

}  // namespace

TEST_CASE("time grid runs from T down to eps") {
  const DiffusionSchedule s;
  const auto g = reverse_time_grid(s, 10, 1e-3);
  REQUIRE(g.size() == 11);
  CHECK(g.front() == 1.0);
  CHECK(g.back() == 1e-3);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
  CHECK(integrator_from_string(to_string(Integrator::exponential)) == Integrator::exponential);
  CHECK_THROWS_AS(integrator_from_string("rk4"), ConfigError);
  SdeRunConfig bad;
  bad.steps = 0;
  CHECK_THROWS_AS(bad.validate(s), ConfigError);
}

TEST_CASE("limiting gaussian roots reproduce the gram") {
  const Problem p = problem();
  for (NoiseFactor f : {NoiseFactor::cholesky, NoiseFactor::symmetric_sqrt}) {
    const LimitingGaussian g = limiting_gaussian(KernelSpec::se(1.0, 0.8), MeanSpec::zero(), p.x, f);
    CHECK((g.root * g.root.transpose() - g.gram).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("one reverse step matches the hand-written update") {
  const Problem p = problem();
  LimitingGaussian prior{Vector::Zero(3), p.k, cholesky_with_jitter(p.k).lower};
  Matrix y = Matrix::Constant(3, 1, 0.3), ks = Matrix::Constant(3, 1, -0.2), z = Matrix::Ones(3, 1);
  const double t = 0.6, h = 0.01, b = p.sched.beta(t);
  const Vector want = y.col(0) + h * b * (0.5 * y.col(0) + ks.col(0)) + std::sqrt(h * b) * (prior.root * z.col(0));
  reverse_step(y, ks, z, t, h, prior, p.sched, Integrator::euler_maruyama);
  CHECK((y.col(0) - want).norm() < 1e-14);
}

TEST_CASE("reverse SDE with the exact score recovers the data distribution") {
  const Problem p = problem();
  FixedGaussianScore score(p.m0, p.s0, Vector::Zero(3), p.k, p.sched);
  auto bound = score.bind(p.x);
  LimitingGaussian prior{Vector::Zero(3), p.k, cholesky_with_jitter(p.k).lower};
  SdeRunConfig cfg;
  cfg.steps = 400;
  for (Integrator integ : {Integrator::euler_maruyama, Integrator::exponential}) {
    cfg.integrator = integ;
    const Matrix draws = reverse_sde_sample_batch(*bound, prior, p.sched, cfg, RngStream(3), 3000);
    const GaussianFit fit = fit_gaussian(draws);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(fit.mean(i) - 0.5) < 4.0 * std::sqrt(p.s0(i, i) / 3000.0));
    CHECK(max_normalized_cov_error(fit.covariance, p.s0) < 0.12);
  }
}

TEST_CASE("batch columns are independent of the batch size") {
  const Problem p = problem();
  FixedGaussianScore score(p.m0, p.s0, Vector::Zero(3), p.k, p.sched);
  auto bound = score.bind(p.x);
  LimitingGaussian prior{Vector::Zero(3), p.k, cholesky_with_jitter(p.k).lower};
  SdeRunConfig cfg;
  cfg.steps = 50;
  const Matrix a = reverse_sde_sample_batch(*bound, prior, p.sched, cfg, RngStream(5), 4);
  const Matrix b = reverse_sde_sample_batch(*bound, prior, p.sched, cfg, RngStream(5), 2);
  CHECK((a.leftCols(2) - b).norm() < 1e-12);
  RngStream r = RngStream(5).split(1);
  const SdeResult one = reverse_sde_sample(*bound, prior, p.sched, cfg, r);
  CHECK((one.sample - a.col(1)).norm() < 1e-12);
}

TEST_CASE("probability flow is reversible and transports moments") {
  const Problem p = problem();
  FixedGaussianScore score(p.m0, p.s0, Vector::Zero(3), p.k, p.sched);
  auto bound = score.bind(p.x);
  const Vector y0 = Vector::Constant(3, 0.2);
  const Vector yt = probability_flow_solve(*bound, Vector::Zero(3), p.sched, y0, 1e-3, 1.0, 400);
  const Vector back = probability_flow_solve(*bound, Vector::Zero(3), p.sched, yt, 1.0, 1e-3, 400);
  CHECK((back - y0).norm() < 1e-5);
  // For Gaussian data the flow is linear: y_t − μ_t = A (y_0 − μ_0) with A Σ_0 Aᵀ = Σ_t.
  const MarginalMoments mt = marginal_moments(p.sched, 1.0, p.m0, p.s0, Vector::Zero(3), p.k);
  const MarginalMoments m0 = marginal_moments(p.sched, 1e-3, p.m0, p.s0, Vector::Zero(3), p.k);
  Matrix a(3, 3);
  const Vector base = probability_flow_solve(*bound, Vector::Zero(3), p.sched, m0.mean, 1e-3, 1.0, 400);
  CHECK((base - mt.mean).norm() < 1e-4);
  for (int i = 0; i < 3; ++i) {
    Vector e = m0.mean;
    e(i) += 1.0;
    a.col(i) = probability_flow_solve(*bound, Vector::Zero(3), p.sched, e, 1e-3, 1.0, 400) - base;
  }
  CHECK(max_normalized_cov_error(a * m0.covariance * a.transpose(), mt.covariance) < 1e-3);
  Trajectory tr;
  probability_flow_solve(*bound, Vector::Zero(3), p.sched, y0, 1e-3, 1.0, 10, &tr);
  CHECK(tr.times.size() == 11);
}

TEST_CASE("langevin steps leave the marginal invariant") {
  const Problem p = problem();
  FixedGaussianScore score(p.m0, p.s0, Vector::Zero(3), p.k, p.sched);
  auto bound = score.bind(p.x);
  const double t = 0.3;
  const MarginalMoments mt = marginal_moments(p.sched, t, p.m0, p.s0, Vector::Zero(3), p.k);
  const CholeskyFactor c = cholesky_with_jitter(mt.covariance);
  const Matrix root = cholesky_with_jitter(p.k).lower;
  RngStream rng(8);
  const int n = 4000;
  Matrix draws(3, n);
  for (int i = 0; i < n; ++i) draws.col(i) = langevin_steps(*bound, root, mvn_sample(mt.mean, c, rng), t, 50, 0.01, rng);
  const GaussianFit fit = fit_gaussian(draws);
  CHECK(max_normalized_cov_error(fit.covariance, mt.covariance) < 0.08);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(fit.mean(i) - mt.mean(i)) < 4.0 * std::sqrt(mt.covariance(i, i) / n));
}
