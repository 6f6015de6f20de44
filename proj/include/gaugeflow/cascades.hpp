#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gaugeflow/morse.hpp"

namespace gaugeflow {

// Numerical cascade counting on analytic surfaces. Points are Vec3 in the
// surface's coordinate representation: ambient coordinates on the unit
// sphere, (phi, theta, 0) on a torus.

using Vec3 = Eigen::Vector3d;

inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * std::numbers::pi);
  return a;
}

struct Surface {
  enum class Kind { Sphere, Torus };
  Kind kind = Kind::Sphere;
  double R = 2.0, a = 1.0;  // torus radii
  bool flat = false;        // flat torus metric dphi^2 + dtheta^2

  // Metric diagonal in coordinates (torus only).
  std::array<double, 2> metric(const Vec3& p) const {
    if (flat) return {1.0, 1.0};
    const double w = R + a * std::cos(p[1]);
    return {w * w, a * a};
  }

  Vec3 retract(const Vec3& p) const {
    if (kind == Kind::Sphere) return p.normalized();
    return Vec3(wrap_angle(p[0]), wrap_angle(p[1]), 0.0);
  }

  double inner(const Vec3& p, const Vec3& u, const Vec3& v) const {
    if (kind == Kind::Sphere) return u.dot(v);
    const auto g = metric(p);
    return g[0] * u[0] * v[0] + g[1] * u[1] * v[1];
  }

  /// Orthonormal tangent frame at p.
  std::array<Vec3, 2> frame(const Vec3& p) const {
    if (kind == Kind::Sphere) {
      const Vec3 seed = std::abs(p[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
      const Vec3 e1 = (seed - seed.dot(p) * p).normalized();
      return {e1, p.cross(e1)};
    }
    const auto g = metric(p);
    return {Vec3(1.0 / std::sqrt(g[0]), 0.0, 0.0), Vec3(0.0, 1.0 / std::sqrt(g[1]), 0.0)};
  }

  /// Riemannian distance; exact on the sphere, metric-at-p approximation on
  /// the torus (accurate at the landing scale, monotone beyond it).
  double dist(const Vec3& p, const Vec3& q) const {
    if (kind == Kind::Sphere) return 2.0 * std::asin(std::min(1.0, 0.5 * (p - q).norm()));
    const auto g = metric(p);
    const double dp = wrap_angle(q[0] - p[0]), dq = wrap_angle(q[1] - p[1]);
    return std::sqrt(g[0] * dp * dp + g[1] * dq * dq);
  }

  /// Riemannian gradient of F by central differences.
  Vec3 gradient(const std::function<double(const Vec3&)>& F, const Vec3& p, double eps = 1e-6) const {
    Vec3 d;
    for (int k = 0; k < 3; ++k) {
      if (kind == Kind::Torus && k == 2) {
        d[k] = 0.0;
        continue;
      }
      Vec3 a = p, b = p;
      a[k] += eps;
      b[k] -= eps;
      d[k] = (F(a) - F(b)) / (2.0 * eps);
    }
    if (kind == Kind::Sphere) return d - d.dot(p) * p;
    const auto g = metric(p);
    return Vec3(d[0] / g[0], d[1] / g[1], 0.0);
  }
};

/// A critical manifold of f: a point, or a circle carrying h = cos(s - h_phase).
struct CriticalSet {
  std::string name;
  int ind_f = 0;
  double f_value = 0.0;
  bool circle = false;
  Vec3 point = Vec3::Zero();
  std::function<Vec3(double)> at;               // circle parametrization
  std::function<double(const Vec3&)> param;     // nearest circle parameter
  std::function<Vec3(double)> normal;           // unit normal inside the surface
  double h_phase = 0.0;
};

struct SurfaceFixture {
  std::string name;
  Surface surface;
  std::function<double(const Vec3&)> f;
  std::function<Vec3(const Vec3&)> grad;
  std::vector<CriticalSet> sets;

  struct GenRef {
    int set = 0;
    bool h_max = false;  // on a circle: the maximum of h
  };
  std::vector<GenRef> refs;  // generator id -> location, filled by finalize()

  void finalize() {
    refs.clear();
    for (int s = 0; s < static_cast<int>(sets.size()); ++s) {
      if (sets[s].circle) {
        refs.push_back({s, true});
        refs.push_back({s, false});
      } else {
        refs.push_back({s, false});
      }
    }
  }

  std::vector<Generator> generators() const {
    std::vector<Generator> out;
    for (int id = 0; id < static_cast<int>(refs.size()); ++id) {
      const CriticalSet& c = sets[refs[id].set];
      Generator g;
      g.id = id;
      g.manifold = refs[id].set;
      g.ind_f = c.ind_f;
      g.ind_h = (c.circle && refs[id].h_max) ? 1 : 0;
      g.action = c.f_value;
      g.h_value = c.circle ? (refs[id].h_max ? 1.0 : -1.0) : 0.0;
      g.name = c.circle ? c.name + (refs[id].h_max ? ".hmax" : ".hmin") : c.name;
      out.push_back(g);
    }
    return out;
  }

  // Position of a generator; circle generators sit at the critical points of h.
  Vec3 position(int id) const {
    const CriticalSet& c = sets.at(refs.at(id).set);
    if (!c.circle) return c.point;
    return c.at(refs[id].h_max ? c.h_phase : c.h_phase + std::numbers::pi);
  }

  double dist_to_set(int s, const Vec3& p) const {
    const CriticalSet& c = sets[s];
    if (!c.circle) return surface.dist(p, c.point);
    return surface.dist(c.at(c.param(p)), p);
  }
};

struct ShootingOptions {
  double delta_land = 1e-3;
  double step = 1e-3;
  int seeds = 720;
  double seed_radius = 1e-2;
  double s_max = 100.0;
  int record_stride = 10;

  ShootingOptions refined() const {
    ShootingOptions o = *this;
    o.step *= 0.5;
    o.seeds *= 2;
    o.record_stride *= 2;
    return o;
  }
};

struct FlowEnd {
  bool landed = false;
  int set = -1;
  Vec3 point = Vec3::Zero();
  double time = 0.0;
};

/// RK4 for dp/ds = sign * grad(p) until p is within delta_land of a critical
/// set other than `exclude`.
inline FlowEnd integrate_flow(const SurfaceFixture& fx, const std::function<Vec3(const Vec3&)>& grad,
                              Vec3 p, double sign, int exclude, const ShootingOptions& opt,
                              std::vector<Vec3>* path = nullptr) {
  const Surface& S = fx.surface;
  const double h = opt.step;
  FlowEnd end;
  auto rhs = [&](const Vec3& q) -> Vec3 { return sign * grad(S.retract(q)); };
  const int n_max = static_cast<int>(opt.s_max / h);
  for (int k = 0; k < n_max; ++k) {
    const Vec3 k1 = rhs(p);
    const Vec3 k2 = rhs(p + 0.5 * h * k1);
    const Vec3 k3 = rhs(p + 0.5 * h * k2);
    const Vec3 k4 = rhs(p + h * k3);
    p = S.retract(p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    if (path && (k + 1) % opt.record_stride == 0) path->push_back(p);
    for (int s = 0; s < static_cast<int>(fx.sets.size()); ++s) {
      if (s == exclude) continue;
      if (fx.dist_to_set(s, p) < opt.delta_land) {
        end.landed = true;
        end.set = s;
        end.point = p;
        end.time = (k + 1) * h;
        if (path) path->push_back(p);
        return end;
      }
    }
  }
  end.point = p;
  end.time = n_max * h;
  return end;
}

/// Eigen-directions of the linearized gradient at an isolated critical
/// point: first = descending (Hessian < 0), second = ascending.
inline std::pair<std::vector<Vec3>, std::vector<Vec3>> split_directions(
    const SurfaceFixture& fx, const std::function<Vec3(const Vec3&)>& grad, const Vec3& p) {
  const Surface& S = fx.surface;
  const auto e = S.frame(p);
  const double eps = 1e-5;
  Eigen::Matrix2d J;
  for (int b = 0; b < 2; ++b) {
    const Vec3 dg = grad(S.retract(p + eps * e[b])) - grad(S.retract(p - eps * e[b]));
    for (int a = 0; a < 2; ++a) J(a, b) = S.inner(p, e[a], dg) / (2.0 * eps);
  }
  J = 0.5 * (J + J.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(J);
  std::vector<Vec3> down, up;
  for (int q = 0; q < 2; ++q) {
    const Vec3 v = es.eigenvectors()(0, q) * e[0] + es.eigenvectors()(1, q) * e[1];
    (es.eigenvalues()[q] < 0.0 ? down : up).push_back(v);
  }
  return {down, up};
}

struct CascadeShot {
  int count = 0;
  int flagged = 0;  // seeds that did not land, or stopped on an intermediate level
  std::string method;
  int seeds_used = 0;
  int parity() const { return count & 1; }
};

namespace detail {

// Whether the level of set s lies strictly between two action values.
inline bool intermediate(const SurfaceFixture& fx, int s, double lo, double hi) {
  const double v = fx.sets[s].f_value;
  return v > lo + 1e-12 && v < hi - 1e-12;
}

inline int circle_dim(const CriticalSet& c) { return c.circle ? 1 : 0; }

}  // namespace detail

/// Mod 2 count of cascade lines from generator x- to x+ (ids into
/// fx.generators()), Ind(x-) - Ind(x+) = 1, with at most one f-cascade.
inline CascadeShot count_cascade_lines(const SurfaceFixture& fx, int xm, int xp,
                                       const ShootingOptions& opt = {}) {
  const auto gens = fx.generators();
  const Generator& gm = gens.at(xm);
  const Generator& gp = gens.at(xp);
  if (gm.ind() - gp.ind() != 1)
    throw InvalidInput("count_cascade_lines: index difference must be 1 (got " +
                       std::to_string(gm.ind() - gp.ind()) + ")");
  const int sm = fx.refs[xm].set, sp = fx.refs[xp].set;
  const CriticalSet& Cm = fx.sets[sm];
  const CriticalSet& Cp = fx.sets[sp];
  const double pi = std::numbers::pi;
  CascadeShot out;

  if (sm == sp) {
    // m = 0: flow lines of h on the circle from its maximum to its minimum.
    out.method = "h-arcs";
    const double target = Cm.h_phase + pi;
    for (double side : {-1.0, 1.0}) {
      double s = Cm.h_phase + side * opt.seed_radius;
      const int n_max = static_cast<int>(opt.s_max / opt.step);
      bool hit = false;
      for (int k = 0; k < n_max && !hit; ++k) {
        auto r = [&](double x) { return std::sin(x - Cm.h_phase); };
        const double k1 = r(s), k2 = r(s + 0.5 * opt.step * k1), k3 = r(s + 0.5 * opt.step * k2),
                     k4 = r(s + opt.step * k3);
        s += opt.step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
        hit = std::abs(wrap_angle(s - target)) < opt.delta_land;
      }
      ++out.seeds_used;
      if (hit) ++out.count;
      else ++out.flagged;
    }
    return out;
  }
  if (!(Cm.f_value > Cp.f_value)) {
    out.method = "energy";
    return out;
  }

  const auto grad = fx.grad;
  const int dim_u = gm.ind_h + Cm.ind_f - 1;
  const int normal_p = 2 - detail::circle_dim(Cp);
  const int dim_s = (detail::circle_dim(Cp) - gp.ind_h) + (normal_p - Cp.ind_f) - 1;
  const double lo = Cp.f_value, hi = Cm.f_value;

  // Seed families leaving x- along the unstable directions of f.
  auto forward_families = [&](const ShootingOptions& o) {
    std::vector<std::vector<Vec3>> fam;
    if (!Cm.circle) {
      const auto [down, up] = split_directions(fx, grad, Cm.point);
      if (down.size() == 2) {
        const auto e = fx.surface.frame(Cm.point);
        std::vector<Vec3> ring;
        for (int s = 0; s < o.seeds; ++s) {
          const double al = 2.0 * pi * s / o.seeds;
          ring.push_back(fx.surface.retract(Cm.point + o.seed_radius * (std::cos(al) * e[0] + std::sin(al) * e[1])));
        }
        fam.push_back(ring);
      } else {
        for (const Vec3& v : down)
          for (double sg : {-1.0, 1.0}) fam.push_back({fx.surface.retract(Cm.point + sg * o.seed_radius * v)});
      }
      return fam;
    }
    if (Cm.ind_f == 0) return fam;
    for (double sg : {-1.0, 1.0}) {
      std::vector<Vec3> line;
      if (gm.ind_h == 1) {
        // W^u_h(x-) is the circle minus the minimum of h: open interval.
        for (int s = 0; s < o.seeds; ++s) {
          const double ang = Cm.h_phase - pi + 2.0 * pi * (s + 0.5) / o.seeds;
          line.push_back(fx.surface.retract(Cm.at(ang) + sg * o.seed_radius * Cm.normal(ang)));
        }
      } else {
        const double ang = Cm.h_phase + pi;
        line.push_back(fx.surface.retract(Cm.at(ang) + sg * o.seed_radius * Cm.normal(ang)));
      }
      fam.push_back(line);
    }
    return fam;
  };

  if (dim_u == 1 && Cp.circle && gp.ind_h == 1) {
    // Landing must hit the single point W^s_h(x+) = {x+}: count sign changes
    // of the landing parameter relative to x+ along each seed family.
    out.method = "forward-sign-change";
    const bool periodic = !Cm.circle;
    for (const auto& line : forward_families(opt)) {
      std::vector<double> g(line.size(), std::numeric_limits<double>::quiet_NaN());
      for (size_t q = 0; q < line.size(); ++q) {
        const FlowEnd end = integrate_flow(fx, grad, line[q], -1.0, sm, opt);
        ++out.seeds_used;
        if (!end.landed || detail::intermediate(fx, end.set, lo, hi)) {
          ++out.flagged;
          continue;
        }
        if (end.set == sp) g[q] = wrap_angle(Cp.param(end.point) - Cp.h_phase);
      }
      const size_t n = g.size();
      const size_t pairs = periodic ? n : n - 1;
      for (size_t q = 0; q < pairs; ++q) {
        const double a = g[q], b = g[(q + 1) % n];
        if (std::isnan(a) || std::isnan(b)) continue;
        if (std::abs(a) > 0.5 * pi || std::abs(b) > 0.5 * pi) continue;  // wrap at the far side
        if ((a < 0.0) != (b < 0.0)) ++out.count;
      }
    }
    return out;
  }

  if (dim_s == 0) {
    // Isolated ascending seeds from x+; the landing condition on C- is open.
    out.method = "backward";
    std::vector<Vec3> seeds;
    if (!Cp.circle) {
      const auto [down, up] = split_directions(fx, grad, Cp.point);
      for (const Vec3& v : up)
        for (double sg : {-1.0, 1.0}) seeds.push_back(fx.surface.retract(Cp.point + sg * opt.seed_radius * v));
    } else {
      const double ang = Cp.h_phase + (gp.ind_h == 1 ? 0.0 : pi);
      for (double sg : {-1.0, 1.0})
        seeds.push_back(fx.surface.retract(Cp.at(ang) + sg * opt.seed_radius * Cp.normal(ang)));
    }
    for (const Vec3& s : seeds) {
      const FlowEnd end = integrate_flow(fx, grad, s, 1.0, sp, opt);
      ++out.seeds_used;
      if (!end.landed || detail::intermediate(fx, end.set, lo, hi)) {
        ++out.flagged;
        continue;
      }
      if (end.set != sm) continue;
      if (!Cm.circle) {
        ++out.count;
        continue;
      }
      const double off = wrap_angle(Cm.param(end.point) - Cm.h_phase);
      if (gm.ind_h == 1) {
        if (std::abs(std::abs(off) - pi) < opt.delta_land) ++out.flagged;  // at the h minimum
        else ++out.count;
      } else if (std::abs(off - pi) < opt.delta_land || std::abs(off + pi) < opt.delta_land) {
        ++out.flagged;
      }
    }
    return out;
  }

  if (dim_u == 0) {
    out.method = "forward";
    for (const auto& line : forward_families(opt))
      for (const Vec3& s : line) {
        const FlowEnd end = integrate_flow(fx, grad, s, -1.0, sm, opt);
        ++out.seeds_used;
        if (!end.landed || detail::intermediate(fx, end.set, lo, hi)) {
          ++out.flagged;
          continue;
        }
        if (end.set != sp) continue;
        if (!Cp.circle) {
          ++out.count;
          continue;
        }
        const double off = wrap_angle(Cp.param(end.point) - Cp.h_phase);
        if (gp.ind_h == 0) {
          if (std::abs(off) < opt.delta_land) ++out.flagged;  // at the h maximum
          else ++out.count;
        } else if (std::abs(off) < opt.delta_land) {
          ++out.flagged;
        }
      }
    return out;
  }
  throw InvalidInput("count_cascade_lines: configuration needs more than one cascade");
}

// ---------------------------------------------------------------------------
// Fixtures.

inline SurfaceFixture sphere_height_fixture() {
  SurfaceFixture fx;
  fx.name = "sphere-height";
  fx.f = [](const Vec3& p) { return p[2]; };
  fx.grad = [](const Vec3& p) { return Vec3(Vec3::UnitZ() - p[2] * p); };
  CriticalSet s{"south", 0, -1.0};
  s.point = -Vec3::UnitZ();
  CriticalSet n{"north", 2, 1.0};
  n.point = Vec3::UnitZ();
  fx.sets = {s, n};
  fx.finalize();
  return fx;
}

/// f = z^2: two maxima at the poles, the equator a Morse-Bott minimum with
/// h = cos(phi - phase).
inline SurfaceFixture sphere_z2_fixture(double phase = 0.0) {
  SurfaceFixture fx;
  fx.name = "sphere-z2";
  fx.f = [](const Vec3& p) { return p[2] * p[2]; };
  fx.grad = [](const Vec3& p) { return Vec3(2.0 * p[2] * (Vec3::UnitZ() - p[2] * p)); };
  CriticalSet n{"north", 2, 1.0};
  n.point = Vec3::UnitZ();
  CriticalSet s{"south", 2, 1.0};
  s.point = -Vec3::UnitZ();
  CriticalSet eq{"equator", 0, 0.0, true};
  eq.at = [](double a) { return Vec3(std::cos(a), std::sin(a), 0.0); };
  eq.param = [](const Vec3& p) { return std::atan2(p[1], p[0]); };
  eq.normal = [](double) { return Vec3(Vec3::UnitZ()); };
  eq.h_phase = phase;
  fx.sets = {n, s, eq};
  fx.finalize();
  return fx;
}

/// Flat torus, f = sin(theta): circles theta = pi/2 (index 1) and -pi/2
/// (index 0) with h-phases chosen apart so landings are transverse.
inline SurfaceFixture flat_torus_fixture(double top_phase = 0.0, double bottom_phase = 1.0) {
  SurfaceFixture fx;
  fx.name = "torus-flat";
  fx.surface.kind = Surface::Kind::Torus;
  fx.surface.flat = true;
  fx.f = [](const Vec3& p) { return std::sin(p[1]); };
  fx.grad = [](const Vec3& p) { return Vec3(0.0, std::cos(p[1]), 0.0); };
  auto circle = [](const std::string& name, int ind, double fval, double theta, double phase) {
    CriticalSet c{name, ind, fval, true};
    c.at = [theta](double a) { return Vec3(wrap_angle(a), theta, 0.0); };
    c.param = [](const Vec3& p) { return p[0]; };
    c.normal = [](double) { return Vec3(0.0, 1.0, 0.0); };
    c.h_phase = phase;
    return c;
  };
  const double h = 0.5 * std::numbers::pi;
  fx.sets = {circle("top", 1, 1.0, h, top_phase), circle("bottom", 0, -1.0, -h, bottom_phase)};
  fx.finalize();
  return fx;
}

/// Embedded torus (R, a) around the z axis, f = x cos(alpha) + z sin(alpha).
/// Standing upright (alpha = 0) the two saddles are joined by flow lines
/// along the inner equator; the tilt separates them.
inline SurfaceFixture tilted_torus_fixture(double alpha = 0.3, double R = 2.0, double a = 1.0) {
  SurfaceFixture fx;
  fx.name = "torus-tilted";
  fx.surface.kind = Surface::Kind::Torus;
  fx.surface.R = R;
  fx.surface.a = a;
  const double ca = std::cos(alpha), sa = std::sin(alpha);
  fx.f = [=](const Vec3& p) { return (R + a * std::cos(p[1])) * std::cos(p[0]) * ca + a * std::sin(p[1]) * sa; };
  fx.grad = [=](const Vec3& p) {
    const double w = R + a * std::cos(p[1]);
    const double fphi = -w * std::sin(p[0]) * ca;
    const double fth = -a * std::sin(p[1]) * std::cos(p[0]) * ca + a * std::cos(p[1]) * sa;
    return Vec3(fphi / (w * w), fth / (a * a), 0.0);
  };
  const double pi = std::numbers::pi;
  auto point = [&](const std::string& name, int ind, double phi, double th) {
    CriticalSet c{name, ind, fx.f(Vec3(phi, th, 0.0))};
    c.point = Vec3(wrap_angle(phi), wrap_angle(th), 0.0);
    return c;
  };
  fx.sets = {point("min", 0, pi, -alpha), point("saddle-low", 1, pi, pi - alpha),
             point("saddle-high", 1, 0.0, pi + alpha), point("max", 2, 0.0, alpha)};
  fx.finalize();
  return fx;
}

/// f = z^2 + eps x: maxima near the poles, saddle (1,0,0), minimum (-1,0,0).
inline SurfaceFixture perturbed_sphere_fixture(double eps = 0.3) {
  SurfaceFixture fx;
  fx.name = "sphere-perturbed";
  fx.f = [=](const Vec3& p) { return p[2] * p[2] + eps * p[0]; };
  fx.grad = [=](const Vec3& p) {
    const Vec3 d(eps, 0.0, 2.0 * p[2]);
    return Vec3(d - d.dot(p) * p);
  };
  const double zc = std::sqrt(1.0 - 0.25 * eps * eps);
  auto point = [&](const std::string& name, int ind, const Vec3& q) {
    CriticalSet c{name, ind, fx.f(q)};
    c.point = q;
    return c;
  };
  fx.sets = {point("min", 0, Vec3(-1, 0, 0)), point("saddle", 1, Vec3(1, 0, 0)),
             point("north", 2, Vec3(0.5 * eps, 0.0, zc)), point("south", 2, Vec3(0.5 * eps, 0.0, -zc))};
  fx.finalize();
  return fx;
}

/// f- = f + delta |grad f|^2 on the same surface. The added term is
/// nonnegative and vanishes to second order on Crit f, so both functions
/// share critical points and critical values, and f- >= f.
inline SurfaceFixture raised_fixture(const SurfaceFixture& base, double delta) {
  SurfaceFixture fx = base;
  fx.name = base.name + "-raised";
  const Surface S = base.surface;
  auto psi = [S, g = base.grad, delta](const Vec3& p) {
    const Vec3 q = S.retract(p);
    const Vec3 v = g(q);
    return delta * S.inner(q, v, v);
  };
  fx.f = [f = base.f, psi](const Vec3& p) { return f(p) + psi(p); };
  fx.grad = [S, g = base.grad, psi](const Vec3& p) {
    // psi is evaluated off the surface by the difference stencil; retract
    // keeps it a function on the surface.
    return Vec3(g(p) + S.gradient(psi, p, 1e-5));
  };
  fx.finalize();
  return fx;
}

// ---------------------------------------------------------------------------
// Complexes and hybrid counts on fixtures.

struct FixtureComplex {
  ChainComplexMod2 complex;
  CascadeCountTable counts;
  int flagged = 0;
};

inline FixtureComplex fixture_complex(const SurfaceFixture& fx, const ShootingOptions& opt = {}) {
  FixtureComplex out;
  const auto gens = fx.generators();
  for (const Generator& a : gens)
    for (const Generator& b : gens) {
      if (a.ind() - b.ind() != 1) continue;
      const CascadeShot shot = count_cascade_lines(fx, a.id, b.id, opt);
      out.flagged += shot.flagged;
      out.counts.push_back({a.id, b.id, shot.count, "shooting:" + shot.method});
    }
  out.complex = boundary_from_counts(gens, out.counts);
  return out;
}

namespace detail {

// Polyline of a 1-dimensional stable or unstable manifold branch.
inline std::vector<Vec3> branch(const SurfaceFixture& fx, const Vec3& from, const Vec3& dir, double sign,
                                int exclude, const ShootingOptions& opt, bool* landed) {
  std::vector<Vec3> path{from};
  const Vec3 start = fx.surface.retract(from + opt.seed_radius * dir);
  path.push_back(start);
  const FlowEnd end = integrate_flow(fx, fx.grad, start, sign, exclude, opt, &path);
  *landed = end.landed;
  return path;
}

// Planar chart for crossing tests: unwrapped angles on the torus,
// stereographic projection from `pole` on the sphere.
inline std::vector<Eigen::Vector2d> planar(const Surface& S, const std::vector<Vec3>& path, const Vec3& pole) {
  std::vector<Eigen::Vector2d> out;
  if (S.kind == Surface::Kind::Torus) {
    Eigen::Vector2d acc(path[0][0], path[0][1]);
    out.push_back(acc);
    for (size_t q = 1; q < path.size(); ++q) {
      acc += Eigen::Vector2d(wrap_angle(path[q][0] - path[q - 1][0]), wrap_angle(path[q][1] - path[q - 1][1]));
      out.push_back(acc);
    }
    return out;
  }
  const Vec3 seed = std::abs(pole[0]) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 e1 = (seed - seed.dot(pole) * pole).normalized(), e2 = pole.cross(e1);
  for (const Vec3& p : path) {
    const double den = 1.0 - p.dot(pole);
    out.emplace_back(p.dot(e1) / den, p.dot(e2) / den);
  }
  return out;
}

inline bool segments_cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                           const Eigen::Vector2d& d) {
  auto orient = [](const Eigen::Vector2d& p, const Eigen::Vector2d& q, const Eigen::Vector2d& r) {
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
  };
  const double o1 = orient(a, b, c), o2 = orient(a, b, d), o3 = orient(c, d, a), o4 = orient(c, d, b);
  return ((o1 > 0) != (o2 > 0)) && ((o3 > 0) != (o4 > 0)) && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

// Crossings between two polylines; on the torus the second segment is
// shifted by the lattice vector bringing it next to the first.
inline int crossings(const Surface& S, const std::vector<Eigen::Vector2d>& u,
                     const std::vector<Eigen::Vector2d>& v, size_t skip_u, size_t skip_v) {
  const double tp = 2.0 * std::numbers::pi;
  int n = 0;
  for (size_t i = skip_u; i + 1 < u.size(); ++i)
    for (size_t j = skip_v; j + 1 < v.size(); ++j) {
      Eigen::Vector2d c = v[j], d = v[j + 1];
      if (S.kind == Surface::Kind::Torus) {
        const Eigen::Vector2d mid = 0.5 * (u[i] + u[i + 1]) - 0.5 * (c + d);
        const Eigen::Vector2d shift(tp * std::round(mid[0] / tp), tp * std::round(mid[1] / tp));
        c += shift;
        d += shift;
      }
      const Eigen::Vector2d lo = u[i].cwiseMin(u[i + 1]), hi = u[i].cwiseMax(u[i + 1]);
      if (std::max(c[0], d[0]) < lo[0] || std::min(c[0], d[0]) > hi[0] || std::max(c[1], d[1]) < lo[1] ||
          std::min(c[1], d[1]) > hi[1])
        continue;
      if (segments_cross(u[i], u[i + 1], c, d)) ++n;
    }
  return n;
}

}  // namespace detail

/// Mod 2 count of hybrid lines x- -> x+: points p in W^u(x-; f-) whose
/// f+-flow converges to x+. Both fixtures must be Morse on the same surface.
inline CascadeShot count_hybrid(const SurfaceFixture& fm, const SurfaceFixture& fp, int xm, int xp,
                                const ShootingOptions& opt = {}) {
  const auto gm = fm.generators().at(xm);
  const auto gp = fp.generators().at(xp);
  if (gm.ind() != gp.ind()) throw InvalidInput("count_hybrid: generators must have equal index");
  for (const auto* fx : {&fm, &fp})
    for (const auto& c : fx->sets)
      if (c.circle) throw InvalidInput("count_hybrid: fixtures must be Morse");
  const int sm = fm.refs[xm].set, sp = fp.refs[xp].set;
  const Vec3 pm = fm.sets[sm].point, pp = fp.sets[sp].point;
  const bool same = fm.surface.dist(pm, pp) < opt.delta_land;
  CascadeShot out;
  const int k = gm.ind();

  if (k == 2 || k == 0) {
    // The side with the point-like manifold is tested against the other
    // side's basin.
    out.method = same ? "stationary" : "basin";
    if (same) {
      out.count = 1;
      return out;
    }
    const Vec3 start = k == 2 ? pp : pm;
    const SurfaceFixture& flow = k == 2 ? fm : fp;
    const Vec3 g = flow.grad(start);
    if (flow.surface.inner(start, g, g) < 1e-18) return out;  // critical for the other function
    const FlowEnd end = integrate_flow(flow, flow.grad, start, k == 2 ? 1.0 : -1.0, -1, opt);
    ++out.seeds_used;
    if (!end.landed) ++out.flagged;
    else if (end.set == (k == 2 ? sm : sp)) out.count = 1;
    return out;
  }

  out.method = "curve-crossing";
  const auto dm = split_directions(fm, fm.grad, pm).first;  // unstable of f-
  const auto dp = split_directions(fp, fp.grad, pp).second; // stable of f+
  if (dm.size() != 1 || dp.size() != 1) throw NumericalFailure("count_hybrid: saddle is degenerate");
  std::vector<std::vector<Vec3>> um, sp_;
  for (double sg : {-1.0, 1.0}) {
    bool ok = false;
    um.push_back(detail::branch(fm, pm, sg * dm[0], -1.0, sm, opt, &ok));
    out.flagged += ok ? 0 : 1;
    sp_.push_back(detail::branch(fp, pp, sg * dp[0], 1.0, sp, opt, &ok));
    out.flagged += ok ? 0 : 1;
    out.seeds_used += 2;
  }
  Vec3 pole = Vec3::UnitZ();
  if (fm.surface.kind == Surface::Kind::Sphere) {
    // Pole as far as possible from every traced point.
    double best = -1.0;
    for (int q = 0; q < 27; ++q) {
      const Vec3 c(q % 3 - 1.0, (q / 3) % 3 - 1.0, q / 9 - 1.0);
      if (c.norm() == 0.0) continue;
      const Vec3 cand = c.normalized();
      double m = 4.0;
      for (const auto* set : {&um, &sp_})
        for (const auto& path : *set)
          for (const Vec3& p : path) m = std::min(m, (p - cand).norm());
      if (m > best) {
        best = m;
        pole = cand;
      }
    }
  }
  // With a shared saddle the branches meet at their first point: that
  // stationary solution is counted once, the first segments are skipped.
  const size_t skip = same ? 1 : 0;
  if (same) out.count = 1;
  for (const auto& a : um)
    for (const auto& b : sp_)
      out.count += detail::crossings(fm.surface, detail::planar(fm.surface, a, pole),
                                     detail::planar(fm.surface, b, pole), skip, skip);
  return out;
}

struct FixtureTheta {
  ThetaMatrix theta;
  CascadeCountTable counts;
  int flagged = 0;
};

inline FixtureTheta fixture_theta(const SurfaceFixture& fm, const SurfaceFixture& fp,
                                  const ChainComplexMod2& cm, const ChainComplexMod2& cp,
                                  const ShootingOptions& opt = {}) {
  FixtureTheta out;
  for (const Generator& a : cm.generators)
    for (const Generator& b : cp.generators) {
      if (a.ind() != b.ind()) continue;
      const CascadeShot shot = count_hybrid(fm, fp, a.id, b.id, opt);
      out.flagged += shot.flagged;
      out.counts.push_back({a.id, b.id, shot.count, "shooting:" + shot.method});
    }
  out.theta = theta_from_counts(cm, cp, out.counts);
  return out;
}

}  // namespace gaugeflow
