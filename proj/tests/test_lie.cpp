#include <random>

#include <catch_amalgamated.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "gaugeflow/lie.hpp"

using namespace gaugeflow;
using Catch::Matchers::WithinAbs;

namespace {

Coords random_coords(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return {u(rng), u(rng), u(rng)};
}

}  // namespace

TEST_CASE("basis is orthonormal for -Re tr(XY)") {
  for (Group g : {Group::U1, Group::SU2})
    for (int a = 0; a < algebra_dim(g); ++a)
      for (int b = 0; b < algebra_dim(g); ++b) {
        const double ip = -(basis_element(g, a) * basis_element(g, b)).trace().real();
        CHECK_THAT(ip, WithinAbs(a == b ? 1.0 : 0.0, 1e-15));
      }
}

TEST_CASE("closed-form exp agrees with the matrix exponential") {
  std::mt19937_64 rng(1);
  for (Group g : {Group::U1, Group::SU2})
    for (int rep = 0; rep < 50; ++rep) {
      const Coords c = random_coords(rng, 3.0);
      const AlgebraElement x = AlgebraElement::from_coords(g, c);
      const Matrix ref = x.matrix.exp();
      CHECK((exp_map(x).matrix - ref).norm() < 1e-12);
      CHECK(exp_map(x).unitarity_defect() < 1e-13);
    }
}

TEST_CASE("log inverts exp inside the injectivity radius") {
  std::mt19937_64 rng(2);
  for (Group g : {Group::U1, Group::SU2})
    for (int rep = 0; rep < 50; ++rep) {
      const Coords c = random_coords(rng, 1.2);
      const Coords back = log_coords(exp_coords(g, c.data()));
      for (int a = 0; a < algebra_dim(g); ++a) CHECK_THAT(back[a], WithinAbs(c[a], 1e-12));
    }
}

TEST_CASE("log near the cut locus throws") {
  const Coords u1{std::numbers::pi, 0.0, 0.0};
  CHECK_THROWS_AS(log_coords(exp_coords(Group::U1, u1.data())), CutLocusError);
  // -1 in SU(2): exp of pi * sqrt2 along e_2
  const Coords su2{0.0, 0.0, std::numbers::pi * std::numbers::sqrt2};
  CHECK_THROWS_AS(log_coords(exp_coords(Group::SU2, su2.data())), CutLocusError);
}

TEST_CASE("coordinate bracket matches the matrix commutator") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 20; ++rep) {
    const Coords x = random_coords(rng, 2.0), y = random_coords(rng, 2.0);
    double out[3];
    bracket_coords(Group::SU2, x.data(), y.data(), out);
    const AlgebraElement X = AlgebraElement::from_coords(Group::SU2, x);
    const AlgebraElement Y = AlgebraElement::from_coords(Group::SU2, y);
    const Coords ref = bracket(X, Y).coords();
    for (int a = 0; a < 3; ++a) CHECK_THAT(out[a], WithinAbs(ref[a], 1e-13));
  }
  const Coords a{1.0, 0.0, 0.0}, b{2.0, 0.0, 0.0};
  double out[3] = {7, 7, 7};
  bracket_coords(Group::U1, a.data(), b.data(), out);
  CHECK(out[0] == 0.0);
}

TEST_CASE("adjoint action preserves the inner product") {
  std::mt19937_64 rng(4);
  const Coords h = random_coords(rng, 2.0), x = random_coords(rng, 1.0), y = random_coords(rng, 1.0);
  const GroupElement g = exp_coords(Group::SU2, h.data());
  const AlgebraElement X = AlgebraElement::from_coords(Group::SU2, x);
  const AlgebraElement Y = AlgebraElement::from_coords(Group::SU2, y);
  CHECK_THAT(inner(adjoint_action(g, X), adjoint_action(g, Y)), WithinAbs(inner(X, Y), 1e-13));
}

TEST_CASE("mixing groups is rejected") {
  const AlgebraElement a = AlgebraElement::zero(Group::U1), b = AlgebraElement::zero(Group::SU2);
  CHECK_THROWS_AS(a + b, GroupMismatch);
  CHECK_THROWS_AS(parse_group("SO3"), InvalidInput);
}
