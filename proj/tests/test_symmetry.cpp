#include <doctest.h>

#include "geomdiff/conditioning.hpp"
#include "geomdiff/datasets.hpp"
#include "geomdiff/gp_oracle.hpp"
#include "geomdiff/symmetry.hpp"

using namespace geomdiff;

TEST_CASE("group elements compose, invert and validate") {
  RngStream rng(1);
  const GroupElement g = random_group_element(2, rng), h = random_group_element(2, rng);
  CHECK_NOTHROW(g.validate());
  const Vector x = rng.normal_vector(2);
  CHECK((g.compose(h).act(x) - g.act(h.act(x))).norm() < 1e-12);
  CHECK((g.inverse().act(g.act(x)) - x).norm() < 1e-12);
  const GroupElement r = GroupElement::rotation2d(M_PI / 2);
  Vector e(2);
  e << 1.0, 0.0;
  CHECK(std::abs(r.act(e)(1) - 1.0) < 1e-15);
  GroupElement bad = GroupElement::identity(2);
  bad.orthogonal(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  const Matrix q = random_orthogonal(3, rng, true);
  CHECK(q.determinant() == doctest::Approx(1.0));
  CHECK(representation_for(2, 2) == Representation::identity);
  CHECK(representation_for(2, 1) == Representation::trivial);
  CHECK_THROWS_AS(representation_for(2, 3), ConfigError);
}

TEST_CASE("equivariant kernels pass and an anisotropic kernel fails") {
  RngStream rng(2);
  for (TaskKind t : {TaskKind::vec_se, TaskKind::vec_curlfree, TaskKind::vec_divfree})
    CHECK(check_kernel_equivariance(task_kernel(t), 50, rng) < 1e-10);
  CHECK(check_kernel_equivariance(KernelSpec::se(1.0, 0.7), 50, rng) < 1e-10);
  KernelSpec ard = KernelSpec::se(1.0, 1.0, 2, 2);
  ard.ard_lengthscales = {0.5, 2.0};
  CHECK(check_kernel_equivariance(ard, 50, rng) > 1e-3);
}

TEST_CASE("exact score is equivariant for equivariant data and limit") {
  const DiffusionSchedule s;
  ExactGaussianScore score({task_kernel(TaskKind::vec_curlfree), MeanSpec::zero(2), 0.0},
                           KernelSpec::se(1.0, 2.0, 2, 2), MeanSpec::zero(2), s);
  RngStream rng(3);
  EquivarianceProbe probe;
  probe.trials = 20;
  probe.points = 4;
  auto f = [&](double t, const PointSet& x, const Vector& y) { return score.evaluate(t, x, y); };
  CHECK(check_score_equivariance(f, 2, 2, probe, rng) < 1e-9);
  CHECK(check_permutation_equivariance(f, 2, 2, probe, rng) < 1e-9);
}

TEST_CASE("field actions and permutations") {
  PointSet x(2, 2);
  x << 1.0, 0.0, 0.0, 1.0;
  Vector y(4);
  y << 1.0, 0.0, 0.0, 2.0;
  const GroupElement g = GroupElement::rotation2d(M_PI / 2);
  const Field f = act_on_field(g, x, y, Representation::identity);
  CHECK(std::abs(f.x(0, 1) - 1.0) < 1e-15);
  CHECK(std::abs(f.y(1) - 1.0) < 1e-15);
  CHECK(std::abs(f.y(2) + 2.0) < 1e-15);
  const Field s = act_on_field(g, x, y, Representation::trivial);
  CHECK(s.y == y);
  const Matrix r = stacked_representation(g, 2, Representation::identity, 2);
  CHECK((r * y - f.y).norm() < 1e-15);
  const std::vector<Eigen::Index> perm = {1, 0};
  CHECK(permute_points(x, perm)(0, 1) == 1.0);
  CHECK(permute_outputs(y, perm, 2)(1) == 2.0);
  RngStream rng(4);
  auto p = random_permutation(6, rng);
  std::sort(p.begin(), p.end());
  for (Eigen::Index i = 0; i < 6; ++i) CHECK(p[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("gp samples of an invariant process are invariant in law") {
  const KernelSpec k = task_kernel(TaskKind::vec_divfree);
  PointSet x(3, 2);
  x << 0.0, 0.0, 1.0, 0.5, -0.5, 1.5;
  FieldSampler sampler = [&](const PointSet& pts, std::uint64_t seed, std::size_t n) {
    RngStream rng(seed);
    Matrix out(pts.rows() * 2, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) out.col(static_cast<Eigen::Index>(i)) = gp_sample(k, MeanSpec::zero(2), pts, 0.0, rng);
    return out;
  };
  RngStream rng(5);
  const GroupElement g = random_group_element(2, rng);
  const InvarianceReport r = check_distributional_invariance(sampler, x, g, Representation::identity, 2, 4000, 1, 2);
  CHECK(r.max_z() < 4.5);
  // Negative control: pulling back with the wrong representation breaks invariance.
  const InvarianceReport wrong = check_distributional_invariance(sampler, x, g, Representation::trivial, 2, 4000, 1, 2);
  CHECK(wrong.max_z() > 4.5);
}
