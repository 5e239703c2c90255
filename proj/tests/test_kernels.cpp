#include <doctest.h>

#include "geomdiff/kernels.hpp"
#include "oracles.hpp"

using namespace geomdiff;

TEST_CASE("scalar kernels match closed forms") {
  Vector x(1), xp(1);
  x << 0.3;
  xp << -0.4;
  const double r = 0.7;
  CHECK(kernel_eval(KernelSpec::se(2.0, 0.5), x, xp)(0, 0) == doctest::Approx(oracle::se(r * r, 2.0, 0.5)));
  KernelSpec m = KernelSpec::se(1.5, 0.8);
  m.family = KernelFamily::matern52;
  const double a = std::sqrt(5.0) * r / 0.8;
  CHECK(kernel_eval(m, x, xp)(0, 0) == doctest::Approx(1.5 * (1 + a + a * a / 3) * std::exp(-a)));
  KernelSpec p = KernelSpec::se(1.0, 0.6);
  p.family = KernelFamily::periodic;
  p.period = 0.5;
  const double s = std::sin(M_PI * r / 0.5);
  CHECK(kernel_eval(p, x, xp)(0, 0) == doctest::Approx(std::exp(-2 * s * s / 0.36)));
  KernelSpec w = p;
  w.family = KernelFamily::weakly_periodic;
  w.envelope_lengthscale = 2.0;
  CHECK(kernel_eval(w, x, xp)(0, 0) == doctest::Approx(std::exp(-2 * s * s / 0.36) * std::exp(-0.5 * r * r / 4.0)));
}

TEST_CASE("white kernel is an indicator of coincident inputs") {
  const KernelSpec w = KernelSpec::white(3.0);
  PointSet x(3, 1);
  x << 0.0, 1.0, 0.0;
  const Matrix k = gram(w, x);
  CHECK(k(0, 0) == 3.0);
  CHECK(k(0, 1) == 0.0);
  CHECK(k(0, 2) == 3.0);
}

TEST_CASE("gram is symmetric, block structured and positive definite") {
  RngStream rng(1);
  PointSet x(6, 2);
  for (int i = 0; i < 6; ++i) x.row(i) = rng.normal_vector(2).transpose();
  for (KernelFamily f : {KernelFamily::curl_free, KernelFamily::div_free, KernelFamily::diagonal}) {
    KernelSpec k = KernelSpec::se(1.0, 1.3, 2, 2);
    k.family = f;
    const Matrix g = gram(k, x);
    CHECK(g.rows() == 12);
    CHECK((g - g.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.selfadjointView<Eigen::Lower>().eigenvalues().minCoeff() > -1e-10);
    CHECK((g.block(2, 8, 2, 2) - kernel_eval(k, x.row(1).transpose(), x.row(4).transpose())).norm() < 1e-14);
  }
}

TEST_CASE("curl and div free blocks match the explicit formulas") {
  Vector x(2), xp(2);
  x << 0.4, -0.2;
  xp << -0.1, 0.5;
  const double l = 0.9;
  const Vector r = x - xp;
  const double k0 = oracle::se(r.squaredNorm(), 1.0, l);
  const Matrix outer = r * r.transpose() / (l * l);
  KernelSpec c = KernelSpec::se(1.0, l, 2, 2);
  c.family = KernelFamily::curl_free;
  CHECK((kernel_eval(c, x, xp) - k0 * (Matrix::Identity(2, 2) - outer)).norm() < 1e-14);
  KernelSpec d = c;
  d.family = KernelFamily::div_free;
  CHECK((kernel_eval(d, x, xp) - k0 * (outer + (1.0 - r.squaredNorm() / (l * l)) * Matrix::Identity(2, 2))).norm() <
        1e-14);
}

TEST_CASE("div-free columns are divergence free and curl-free columns irrotational") {
  RngStream rng(2);
  KernelSpec d = KernelSpec::se(1.0, 1.0, 2, 2);
  d.family = KernelFamily::div_free;
  KernelSpec c = d;
  c.family = KernelFamily::curl_free;
  KernelSpec diag = KernelSpec::se(1.0, 1.0, 2, 2);
  double worst = 0.0, control = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Vector x = rng.normal_vector(2), xp = rng.normal_vector(2), v = rng.normal_vector(2);
    worst = std::max({worst, std::abs(divergence_of_kernel_column(d, xp, v, x)),
                      std::abs(divergence_of_kernel_column(c, xp, v, x))});
    control = std::max(control, std::abs(divergence_of_kernel_column(diag, xp, v, x)));
  }
  CHECK(worst < 1e-5);
  CHECK(control > 1e-3);
}

TEST_CASE("means evaluate per point") {
  PointSet x(2, 2);
  x << 1.0, 2.0, -1.0, 0.5;
  Matrix a(2, 2);
  a << 1.0, 0.0, 0.0, 2.0;
  const Vector b = Vector::Constant(2, 0.5);
  const Vector m = mean_vector(MeanSpec::linear_map(a, b), x);
  CHECK(m.size() == 4);
  CHECK(m(0) == 1.5);
  CHECK(m(1) == 4.5);
  CHECK(m(3) == 1.5);
  CHECK(mean_vector(MeanSpec::zero(2), x).isZero());
}

TEST_CASE("kernel names round trip and invalid specs are rejected") {
  for (KernelFamily f : {KernelFamily::white, KernelFamily::squared_exponential, KernelFamily::matern52,
                         KernelFamily::periodic, KernelFamily::weakly_periodic, KernelFamily::diagonal,
                         KernelFamily::curl_free, KernelFamily::div_free})
    CHECK(kernel_family_from_string(to_string(f)) == f);
  CHECK_THROWS_AS(kernel_family_from_string("nope"), ConfigError);
  KernelSpec k = KernelSpec::se(1.0, -1.0);
  CHECK_THROWS_AS(k.validate(), ConfigError);
  KernelSpec c = KernelSpec::se(1.0, 1.0, 2, 1);
  c.family = KernelFamily::curl_free;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}
