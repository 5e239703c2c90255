#include <doctest.h>

#include "geomdiff/gp_oracle.hpp"
#include "geomdiff/likelihood.hpp"
#include "oracles.hpp"

using namespace geomdiff;

namespace {

struct Setup {
  KernelSpec data = KernelSpec::se(1.0, 0.5);
  double noise = 0.01;
  DiffusionSchedule sched;
  ExactGaussianScore score{{data, MeanSpec::zero(), noise}, KernelSpec::white(), MeanSpec::zero(), sched};
};

PointSet inputs(int n) {
  PointSet x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = -1.0 + 2.0 * i / std::max(1, n - 1) + 0.05 * i;
  return x;
}

}  // namespace

TEST_CASE("probability-flow likelihood matches the gaussian density") {
  Setup s;
  const PointSet x = inputs(4);
  Vector y(4);
  y << 0.3, -0.2, 0.5, 0.1;
  OdeConfig cfg;
  cfg.steps = 200;
  const double got = log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), x, y, s.sched, cfg);
  // The flow runs from ε, so the reference is the marginal at ε.
  const MarginalMoments me = marginal_moments(s.sched, s.sched.eps_clip, Vector::Zero(4),
                                              gram(s.data, x) + s.noise * Matrix::Identity(4, 4), Vector::Zero(4),
                                              Matrix::Identity(4, 4));
  CHECK(got == doctest::Approx(oracle::gaussian_logpdf(y, me.mean, me.covariance)).epsilon(1e-3));
  CHECK(std::abs(got - gp_loglik(s.data, MeanSpec::zero(), x, y, s.noise)) < 0.05);
}

TEST_CASE("conditional likelihood is the difference of two solves") {
  Setup s;
  const PointSet x = inputs(5);
  Vector y(5);
  y << 0.3, -0.2, 0.5, 0.1, -0.4;
  OdeConfig cfg;
  cfg.steps = 200;
  const double got = conditional_log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), x.topRows(2), y.head(2),
                                                x.bottomRows(3), y.tail(3), s.sched, cfg);
  const GpPosterior post = gp_condition(s.data, MeanSpec::zero(), x.topRows(2), y.head(2), x.bottomRows(3), s.noise);
  CHECK(std::abs(got - gp_posterior_logpdf(post, y.tail(3))) < 0.05);
  CHECK(conditional_log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), x, y, PointSet(0, 1), Vector(0),
                                   s.sched) == 0.0);
}

TEST_CASE("hutchinson divergence is unbiased and fixed by its seed") {
  Setup s;
  const PointSet x = inputs(4);
  auto bound = s.score.bind(x);
  const Vector y = Vector::Constant(4, 0.2);
  const double exact = bound->jacobian_trace(0.3, y);
  RngStream rng(1);
  double sum = 0.0;
  const int draws = 2000;
  for (int i = 0; i < draws; ++i) sum += hutchinson_trace(*bound, 0.3, y, rademacher_probes(4, 1, rng));
  CHECK(std::abs(sum / draws - exact) < 0.1 * std::abs(exact) + 0.05);
  OdeConfig cfg;
  cfg.steps = 20;
  const DivergenceMode h{DivergenceKind::hutchinson, 4};
  CHECK(log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), x, y, s.sched, cfg, h, 7) ==
        log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), x, y, s.sched, cfg, h, 7));
}

TEST_CASE("consistency gap is small for the exact score") {
  Setup s;
  const PointSet xa = inputs(2);
  PointSet xb(1, 1);
  xb << 0.4;
  Vector ya(2);
  ya << 0.2, -0.1;
  OdeConfig cfg;
  cfg.steps = 100;
  const double gap = consistency_gap(s.score, KernelSpec::white(), MeanSpec::zero(), xa, ya, xb, s.sched, -5.0, 5.0, 81, cfg);
  CHECK(gap < 0.02);
}

TEST_CASE("likelihood configuration errors") {
  CHECK(divergence_kind_from_string("exact") == DivergenceKind::exact_autodiff);
  CHECK(divergence_kind_from_string(to_string(DivergenceKind::hutchinson)) == DivergenceKind::hutchinson);
  CHECK_THROWS_AS(divergence_kind_from_string("skilling"), ConfigError);
  DivergenceMode m{DivergenceKind::hutchinson, 0};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  OdeConfig o;
  o.steps = 0;
  CHECK_THROWS_AS(o.validate(DiffusionSchedule{}), ConfigError);
  Setup s;
  Vector bad = Vector::Constant(2, std::nan(""));
  CHECK_THROWS_AS(log_likelihood(s.score, KernelSpec::white(), MeanSpec::zero(), inputs(2), bad, s.sched), NumericError);
}
