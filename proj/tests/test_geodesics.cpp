#include <catch_amalgamated.hpp>

#include "gaugeflow/geodesics.hpp"

using namespace gaugeflow;
using Catch::Matchers::WithinRel;

TEST_CASE("U(1) geodesics: energy pi n^2, all minima") {
  const auto recs = enumerate_geodesics(Group::U1, 30.0, 32);
  // pi n^2 <= 30  ->  |n| <= 3
  REQUIRE(recs.size() == 7);
  for (const auto& r : recs) {
    CHECK_THAT(r.energy, WithinRel(std::numbers::pi * r.class_label * r.class_label, 1e-12));
    CHECK(r.index == 0);
    CHECK(r.orbit_dim == 0);
  }
  CHECK(recs[0].class_label == 0);
}

TEST_CASE("SU(2) geodesics: energy 2 pi k^2, index 2(2k-1) on S^2 orbits") {
  const auto recs = enumerate_geodesics(Group::SU2, 60.0, 64);
  REQUIRE(recs.size() == 4);
  for (int k = 0; k < 4; ++k) {
    CHECK(recs[k].class_label == k);
    CHECK_THAT(recs[k].energy + 1.0, WithinRel(2.0 * std::numbers::pi * k * k + 1.0, 1e-12));
    CHECK(recs[k].orbit_dim == (k ? 2 : 0));
    CHECK(recs[k].index == (k ? 2 * (2 * k - 1) : 0));
  }
}

TEST_CASE("connections only over closed geodesics") {
  const SphereGrid g(8, 16);
  CHECK_THROWS_AS(ym_connection_from_geodesic(g, Group::U1, {0.5, 0, 0}), ClosureViolation);
  CHECK_NOTHROW(ym_connection_from_geodesic(g, Group::SU2, class_generator(Group::SU2, 1)));
}

TEST_CASE("reduced Hessian: symmetric, index equals the loop index") {
  const SphereGrid g(16, 64);
  for (auto [grp, label] : {std::pair{Group::U1, 1}, std::pair{Group::SU2, 0}, std::pair{Group::SU2, 1}}) {
    const Coords eta = class_generator(grp, label);
    const ReducedHessian h = ym_hessian_reduced(ym_connection_from_geodesic(g, grp, eta), 8);
    CHECK((h.matrix - h.matrix.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * h.matrix.cwiseAbs().maxCoeff());
    const IndexNullity ym = spectrum_counts(h.matrix);
    const IndexNullity lp = index_nullity(GroupLoop::one_parameter(grp, 64, eta));
    CHECK(ym.index == lp.index);
  }
}

TEST_CASE("reduced Hessian needs a stationary point") {
  const SphereGrid g(16, 32);
  CHECK_THROWS_AS(ym_hessian_reduced(random_connection(g, Group::SU2, 1, 1, 2.0, 0.1), 4), InvalidInput);
}
