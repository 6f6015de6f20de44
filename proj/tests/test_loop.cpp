#include <random>

#include <catch_amalgamated.hpp>

#include "gaugeflow/loop_flow.hpp"

using namespace gaugeflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

// Smooth based loop x = exp(t eta) exp(zeta), zeta a few random Fourier modes.
GroupLoop smooth_loop(Group g, int n, std::uint64_t seed, const Coords& eta, double amp = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  AlgebraLoop zeta(g, n);
  const int d = algebra_dim(g);
  for (int k = 1; k <= 3; ++k) {
    double ca[3], sa[3];
    for (int a = 0; a < 3; ++a) {
      ca[a] = nd(rng) * amp / k;
      sa[a] = nd(rng) * amp / k;
    }
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      for (int a = 0; a < d; ++a) zeta.at(j)[a] += ca[a] * (1.0 - std::cos(k * t)) + sa[a] * std::sin(k * t);
    }
  }
  return right_exp(GroupLoop::one_parameter(g, n, eta), zeta);
}

}  // namespace

TEST_CASE("spectral derivatives of trigonometric samples") {
  const int n = 32;
  const Spectral sp(n);
  std::vector<double> f(n), d(n), dd(n);
  for (int j = 0; j < n; ++j) f[j] = std::sin(3.0 * j * 2.0 * std::numbers::pi / n);
  sp.derivative(f, d);
  sp.second_derivative(f, dd);
  for (int j = 0; j < n; ++j) {
    const double t = j * 2.0 * std::numbers::pi / n;
    CHECK_THAT(d[j], WithinAbs(3.0 * std::cos(3.0 * t), 1e-12));
    CHECK_THAT(dd[j], WithinAbs(-9.0 * std::sin(3.0 * t), 1e-11));
  }
  // the Nyquist mode (-1)^j has no real first derivative
  for (int j = 0; j < n; ++j) f[j] = j % 2 ? -1.0 : 1.0;
  sp.derivative(f, d);
  for (double v : d) CHECK_THAT(v, WithinAbs(0.0, 1e-12));
  CHECK_THROWS_AS(Spectral(12), InvalidInput);
}

TEST_CASE("energy of a one-parameter loop is pi |eta|^2") {
  const GroupLoop u1 = GroupLoop::one_parameter(Group::U1, 64, {2.0, 0.0, 0.0});
  CHECK_THAT(loop_energy(u1), WithinRel(4.0 * std::numbers::pi, 1e-12));
  // closes when |eta| / sqrt2 is an integer
  const double s = 2.0 * std::numbers::sqrt2;
  const Coords eta{0.6 * s, -0.8 * s, 0.0};
  const GroupLoop su2 = GroupLoop::one_parameter(Group::SU2, 64, eta);
  CHECK_THAT(loop_energy(su2), WithinRel(std::numbers::pi * s * s, 1e-12));
}

TEST_CASE("basepoint normalization is idempotent and keeps energy") {
  const GroupLoop x = left_translate(exp_coords(Group::SU2, std::array<double, 3>{0.4, 0.1, -0.7}.data()),
                                     smooth_loop(Group::SU2, 64, 5, {0, 0, std::numbers::sqrt2}));
  const GroupLoop y = basepoint_normalize(x);
  CHECK(y.samples[0].distance_to_identity() == 0.0);
  CHECK(loop_distance(basepoint_normalize(y), y) < 1e-14);
  CHECK_THAT(loop_energy(y), WithinRel(loop_energy(x), 1e-12));
}

TEST_CASE("heat flow is monotone and reaches a geodesic") {
  for (Group g : {Group::U1, Group::SU2}) {
    const GroupLoop x0 = smooth_loop(g, 32, 9, g == Group::U1 ? Coords{1, 0, 0} : Coords{0, 0, std::numbers::sqrt2});
    const double dt = x0.dt();
    const LoopTrajectory tr = heat_flow_run(x0, 6.0, 0.1 * dt * dt, {});
    CHECK(tr.violations == 0);
    CHECK(tr.max_increase <= 1e-9);
    CHECK(tr.energies.back() < tr.energies.front());
    CHECK(tr.gradient_max.back() < 0.1 * tr.gradient_max.front());
  }
}

TEST_CASE("discrete energy gradient against central differences") {
  // every nodal direction, including grid-scale ones
  for (Group g : {Group::U1, Group::SU2}) {
    const int n = 16;
    const GroupLoop x = smooth_loop(g, n, 4, g == Group::U1 ? Coords{2, 0, 0} : Coords{0, 0, std::numbers::sqrt2});
    const AlgebraLoop grad = loop_energy_gradient(x);
    const double h = 1e-6;
    for (size_t q = 0; q < grad.c.size(); ++q) {
      AlgebraLoop v(g, n);
      v.c[q] = h;
      const double ep = loop_energy(right_exp(x, v));
      v.c[q] = -h;
      const double em = loop_energy(right_exp(x, v));
      CHECK_THAT(grad.c[q] * x.dt(), WithinAbs((ep - em) / (2 * h), 1e-7));
    }
  }
}

TEST_CASE("heat flow keeps the U(1) winding") {
  for (int n : {1, 2, 3}) {
    const GroupLoop x0 = smooth_loop(Group::U1, 64, 40 + n, {double(n), 0, 0}, 0.2);
    const double dt = x0.dt();
    const LoopTrajectory tr = heat_flow_run(x0, 10.0, 0.1 * dt * dt, {});
    CHECK_THAT(tr.energies.back(), WithinRel(std::numbers::pi * n * n, 1e-6));
    CHECK(tr.violations == 0);
  }
}

TEST_CASE("heat flow step above the stability limit is rejected") {
  const GroupLoop x = GroupLoop::one_parameter(Group::U1, 32, {1, 0, 0});
  CHECK_THROWS_AS(heat_flow_step(x, 1.0), CflViolation);
}

TEST_CASE("loop Hessian is the second variation of E") {
  // Oracle: central differences of loop_energy(x exp(s xi + s' zeta)).
  for (Group g : {Group::U1, Group::SU2}) {
    const int n = 32, d = algebra_dim(g);
    const GroupLoop x = smooth_loop(g, n, 21, g == Group::U1 ? Coords{1, 0, 0} : Coords{0, 0, std::numbers::sqrt2}, 0.2);
    const Eigen::MatrixXd H = loop_hessian_matrix(x).matrix;
    CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    std::mt19937_64 rng(33);
    std::normal_distribution<double> nd(0.0, 1.0);
    const double dt = x.dt();
    for (int rep = 0; rep < 3; ++rep) {
      // smooth directions so the spectral truncation does not matter
      AlgebraLoop xi(g, n), zeta(g, n);
      for (int a = 0; a < d; ++a) {
        const double p = nd(rng), q = nd(rng), r = nd(rng), s = nd(rng);
        for (int j = 0; j < n; ++j) {
          const double t = j * dt;
          xi.at(j)[a] = p * std::cos(t) + q * std::sin(2 * t);
          zeta.at(j)[a] = r * std::sin(t) + s * std::cos(3 * t);
        }
      }
      const double h = 1e-3;
      auto E = [&](double a, double b) {
        AlgebraLoop v(g, n);
        for (size_t q = 0; q < v.c.size(); ++q) v.c[q] = a * xi.c[q] + b * zeta.c[q];
        return loop_energy(right_exp(x, v));
      };
      const double fd = (E(h, h) - E(h, -h) - E(-h, h) + E(-h, -h)) / (4 * h * h);
      Eigen::Map<const Eigen::VectorXd> vx(xi.c.data(), n * d), vz(zeta.c.data(), n * d);
      const double form = vx.dot(H * vz) * dt;
      CHECK_THAT(form, WithinAbs(fd, 1e-5 * std::max(1.0, std::abs(fd))));
    }
  }
}

TEST_CASE("index of closed geodesics") {
  // U(1) is flat: every geodesic is a minimum.
  for (int n : {0, 1, 2}) {
    const IndexNullity r = index_nullity(GroupLoop::one_parameter(Group::U1, 32, {double(n), 0, 0}));
    CHECK(r.index == 0);
  }
  // SU(2) = S^3: t -> exp(t k diag(i,-i)) has index 2(2k-1) in the based loop space.
  for (int k : {1, 2}) {
    const IndexNullity r = index_nullity(GroupLoop::one_parameter(Group::SU2, 64, {0, 0, std::numbers::sqrt2 * k}));
    CHECK(r.index == 2 * (2 * k - 1));
  }
  CHECK(index_nullity(GroupLoop::one_parameter(Group::SU2, 32, {0, 0, 0})).index == 0);
  CHECK_THROWS_AS(index_nullity(smooth_loop(Group::SU2, 32, 3, {0, 0, 0})), InvalidInput);
}
