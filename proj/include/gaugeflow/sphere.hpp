#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "gaugeflow/loop.hpp"
#include "gaugeflow/loop_flow.hpp"

namespace gaugeflow {

// Radial-gauge connections on S^2. Row i is the parallel r = i pi / N_r,
// column j the meridian t = 2 pi j / N_t. Row 0 is the north pole, row N_r
// the south pole, where u(pi, t) = xi(t) is the holonomy generator.
//
// Radial derivatives live on the half nodes r_{i+1/2}:
//   w_{i+1/2} = (u_{i+1} - u_i) / (h lambda_{i+1/2}),  h = 2 sin(dr / 2),
// and the energy is the midpoint sum 1/2 sum lambda_{i+1/2} |w|^2 h dt.
// With this spacing ell_{i+1} - ell_i = h lambda_{i+1/2} / 2 holds exactly,
// so w(ell eta) = eta / 2 and the energy splitting is exact on the grid.
struct SphereGrid {
  int n_r = 0;
  int n_t = 0;
  std::vector<double> lambda;       // sin r_i, exact zeros at the poles
  std::vector<double> ell;          // (1 - cos r_i) / 2, ell(pi) = 1
  std::vector<double> lambda_half;  // sin r_{i+1/2}, i = 0..n_r-1

  SphereGrid() = default;
  SphereGrid(int nr, int nt) : n_r(nr), n_t(nt) {
    if (nr < 2) throw InvalidInput("SphereGrid: N_r must be >= 2");
    if (!is_power_of_two(nt) || nt < 4) throw InvalidInput("SphereGrid: N_t must be a power of two >= 4");
    lambda.resize(nr + 1);
    ell.resize(nr + 1);
    lambda_half.resize(nr);
    for (int i = 0; i <= nr; ++i) {
      const double r = i * dr();
      lambda[i] = std::sin(r);
      const double s = std::sin(0.5 * r);
      ell[i] = s * s;
    }
    lambda[0] = 0.0;
    lambda[nr] = 0.0;
    ell[0] = 0.0;
    ell[nr] = 1.0;
    for (int i = 0; i < nr; ++i) lambda_half[i] = std::sin((i + 0.5) * dr());
  }

  double dr() const { return std::numbers::pi / n_r; }
  double dt() const { return 2.0 * std::numbers::pi / n_t; }
  double h() const { return 2.0 * std::sin(0.5 * dr()); }
  double r(int i) const { return i * dr(); }

  bool operator==(const SphereGrid& o) const { return n_r == o.n_r && n_t == o.n_t; }
};

/// Algebra-valued grid data in coordinates, data[((i * n_t) + j) * d + a].
struct NodeField {
  SphereGrid grid;
  Group group = Group::U1;
  int rows = 0;
  std::vector<double> data;

  NodeField() = default;
  NodeField(const SphereGrid& g, Group grp, int n_rows)
      : grid(g), group(grp), rows(n_rows),
        data(static_cast<size_t>(n_rows) * g.n_t * algebra_dim(grp), 0.0) {}

  int dim() const { return algebra_dim(group); }
  size_t offset(int i, int j) const { return (static_cast<size_t>(i) * grid.n_t + j) * dim(); }
  double* at(int i, int j) { return data.data() + offset(i, j); }
  const double* at(int i, int j) const { return data.data() + offset(i, j); }

  AlgebraElement element(int i, int j) const {
    return AlgebraElement::from_coords(group, std::span<const double>(at(i, j), dim()));
  }

  AlgebraLoop row(int i) const {
    AlgebraLoop l(group, grid.n_t);
    std::copy(at(i, 0), at(i, 0) + static_cast<size_t>(grid.n_t) * dim(), l.c.begin());
    return l;
  }
  void set_row(int i, const AlgebraLoop& l) {
    if (l.n != grid.n_t || l.group != group) throw InvalidInput("row shape mismatch");
    std::copy(l.c.begin(), l.c.end(), at(i, 0));
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data) m = std::max(m, std::abs(v));
    return m;
  }
};

struct RadialGaugeField : NodeField {
  RadialGaugeField() = default;
  RadialGaugeField(const SphereGrid& g, Group grp) : NodeField(g, grp, g.n_r + 1) {}
  AlgebraLoop xi() const { return row(grid.n_r); }
};

struct GaugePotentialField : NodeField {
  GaugePotentialField() = default;
  GaugePotentialField(const SphereGrid& g, Group grp) : NodeField(g, grp, g.n_r + 1) {}
};

/// Half-node field, row i sits at r_{i+1/2}.
struct CurvatureField : NodeField {
  CurvatureField() = default;
  CurvatureField(const SphereGrid& g, Group grp) : NodeField(g, grp, g.n_r) {}
};

struct ConnectionDecomposition {
  AlgebraLoop xi;
  RadialGaugeField m;
};

using FieldPerturbation = std::function<RadialGaugeField(const RadialGaugeField&)>;

inline constexpr double kDefaultClosureTol = 1e-6;

namespace detail {

// out(i, ., a) = d/dt in(i, ., a) for every row and component.
inline void t_derivative(const Spectral& sp, const NodeField& in, NodeField& out) {
  const int nt = in.grid.n_t, d = in.dim();
  std::vector<double> f(nt), g(nt);
  for (int i = 0; i < in.rows; ++i)
    for (int a = 0; a < d; ++a) {
      for (int j = 0; j < nt; ++j) f[j] = in.at(i, j)[a];
      sp.derivative(f, g);
      for (int j = 0; j < nt; ++j) out.at(i, j)[a] = g[j];
    }
}

inline void check_same(const NodeField& a, const NodeField& b) {
  if (a.group != b.group) throw GroupMismatch();
  if (!(a.grid == b.grid) || a.rows != b.rows) throw InvalidInput("field shapes differ");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Curvature and energy.

inline CurvatureField curvature_density(const RadialGaugeField& u) {
  const SphereGrid& g = u.grid;
  CurvatureField w(g, u.group);
  const int d = u.dim();
  const double h = g.h();
  for (int i = 0; i < g.n_r; ++i) {
    const double inv = 1.0 / (h * g.lambda_half[i]);
    for (int j = 0; j < g.n_t; ++j)
      for (int a = 0; a < d; ++a) w.at(i, j)[a] = (u.at(i + 1, j)[a] - u.at(i, j)[a]) * inv;
  }
  return w;
}

inline double ym_energy(const CurvatureField& w) {
  const SphereGrid& g = w.grid;
  const int d = w.dim();
  double acc = 0.0;
  for (int i = 0; i < g.n_r; ++i) {
    double row = 0.0;
    for (int j = 0; j < g.n_t; ++j)
      for (int a = 0; a < d; ++a) row += w.at(i, j)[a] * w.at(i, j)[a];
    acc += g.lambda_half[i] * row;
  }
  return 0.5 * acc * g.h() * g.dt();
}

/// 1/2 int lambda^{-1} |d_r u|^2 dr dt. Same sum as ym_energy(curvature_density(u)).
inline double ym_energy(const RadialGaugeField& u) {
  const SphereGrid& g = u.grid;
  const int d = u.dim();
  const double h = g.h();
  double acc = 0.0;
  for (int i = 0; i < g.n_r; ++i) {
    const double inv = 1.0 / (h * g.lambda_half[i]);
    double row = 0.0;
    for (int j = 0; j < g.n_t; ++j)
      for (int a = 0; a < d; ++a) {
        const double w = (u.at(i + 1, j)[a] - u.at(i, j)[a]) * inv;
        row += w * w;
      }
    acc += g.lambda_half[i] * row;
  }
  return 0.5 * acc * h * g.dt();
}

// ---------------------------------------------------------------------------
// Holonomy.

/// Geometric midpoint transport x_{j+1} = x_j exp(dt xi(t_{j+1/2})); returns
/// N_t + 1 samples, the last one being the monodromy x(2 pi).
inline std::vector<GroupElement> transport(const AlgebraLoop& xi) {
  const int n = xi.n, d = xi.dim();
  const Spectral sp(n);
  AlgebraLoop half(xi.group, n);
  std::vector<double> f(n), g(n);
  for (int a = 0; a < d; ++a) {
    f = xi.component(a);
    sp.half_shift(f, g);
    half.set_component(a, g);
  }
  const double dt = 2.0 * std::numbers::pi / n;
  std::vector<GroupElement> x(n + 1, GroupElement::identity(xi.group));
  for (int j = 0; j < n; ++j) {
    Coords v{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) v[a] = dt * half.at(j)[a];
    x[j + 1] = keep_unitary(x[j] * exp_coords(xi.group, v.data()));
  }
  return x;
}

inline GroupElement monodromy(const AlgebraLoop& xi) { return transport(xi).back(); }

/// U(1) bundle degree (1 / 2 pi) sum xi_j dt; the raw sum must lie within 0.1
/// of an integer.
inline int winding(const AlgebraLoop& xi) {
  if (xi.group != Group::U1) throw InvalidInput("winding is defined for U(1) only");
  double acc = 0.0;
  for (double v : xi.c) acc += v;
  const double raw = acc / xi.n;  // sum * dt / (2 pi)
  const double n = std::round(raw);
  if (std::abs(raw - n) >= 0.1) throw NumericalFailure("winding: integral is not quantized");
  return static_cast<int>(n);
}

/// Phi(u): the based loop solving x^{-1} dx/dt = u(pi, t).
inline GroupLoop holonomy(const RadialGaugeField& u, double tol_closure = kDefaultClosureTol) {
  const std::vector<GroupElement> x = transport(u.xi());
  const double gap = x.back().distance_to_identity();
  if (gap > tol_closure)
    throw ClosureViolation("holonomy: monodromy misses the identity by " + std::to_string(gap));
  GroupLoop loop(u.group, u.grid.n_t);
  for (int j = 0; j < u.grid.n_t; ++j) loop.samples[j] = x[j];
  loop.based = true;
  return loop;
}

// ---------------------------------------------------------------------------
// Decomposition u = ell xi + m.

inline ConnectionDecomposition decompose(const RadialGaugeField& u) {
  const SphereGrid& g = u.grid;
  const int d = u.dim();
  ConnectionDecomposition out{u.xi(), RadialGaugeField(g, u.group)};
  for (int i = 1; i < g.n_r; ++i)
    for (int j = 0; j < g.n_t; ++j)
      for (int a = 0; a < d; ++a) {
        const double target = u.at(i, j)[a];
        const double p = g.ell[i] * out.xi.at(j)[a];
        double m = target - p;
        // build_connection evaluates m + ell * xi; nudge m so that sum
        // reproduces the stored value bit for bit where that is possible.
        for (int guard = 0; guard < 64 && m + p != target; ++guard)
          m = std::nextafter(m, (m + p < target) ? HUGE_VAL : -HUGE_VAL);
        out.m.at(i, j)[a] = m;
      }
  // Row 0 of m: u(0) - 0 * xi. Row 0 of u may be nonzero after a
  // loop-dependent gauge transformation; keep it in m so the split stays exact.
  for (int j = 0; j < g.n_t; ++j)
    for (int a = 0; a < d; ++a) out.m.at(0, j)[a] = u.at(0, j)[a];
  return out;
}

inline RadialGaugeField build_connection(const AlgebraLoop& xi, const RadialGaugeField& m,
                                         double tol_closure = kDefaultClosureTol) {
  const SphereGrid& g = m.grid;
  if (xi.group != m.group) throw GroupMismatch();
  if (xi.n != g.n_t) throw InvalidInput("build_connection: xi has the wrong sample count");
  const int d = m.dim();
  for (int j = 0; j < g.n_t; ++j)
    for (int a = 0; a < d; ++a)
      if (m.at(0, j)[a] != 0.0 || m.at(g.n_r, j)[a] != 0.0)
        throw InvalidInput("build_connection: m must vanish on the pole rows");
  const double gap = monodromy(xi).distance_to_identity();
  if (gap > tol_closure)
    throw ClosureViolation("build_connection: xi does not close (gap " + std::to_string(gap) + ")");
  RadialGaugeField u(g, m.group);
  for (int i = 0; i <= g.n_r; ++i)
    for (int j = 0; j < g.n_t; ++j)
      for (int a = 0; a < d; ++a) u.at(i, j)[a] = m.at(i, j)[a] + g.ell[i] * xi.at(j)[a];
  return u;
}

// ---------------------------------------------------------------------------
// Closure projection.

/// Corrects xi so that the holonomy closes. The correction is the smallest
/// L2 loop delta(t) = -Ad_{x(t)^{-1}} log(M) / (2 pi), which for U(1) is the
/// constant shift; it is iterated to convergence and spread over the sphere
/// as ell(r) delta(t).
inline RadialGaugeField project_closure(const RadialGaugeField& u, double tol = 1e-12,
                                        int max_iter = 50) {
  const SphereGrid& g = u.grid;
  const int d = u.dim();
  RadialGaugeField v = u;
  for (int iter = 0; iter <= max_iter; ++iter) {
    const std::vector<GroupElement> x = transport(v.xi());
    const GroupElement& M = x.back();
    const double gap = M.distance_to_identity();
    if (iter == 0 && gap >= 0.5)
      throw ClosureViolation("project_closure: monodromy too far from the identity");
    if (gap <= tol) return v;
    if (iter == max_iter) break;
    const Coords c = log_coords(M);
    const AlgebraElement logm = AlgebraElement::from_coords(u.group, c);
    for (int j = 0; j < g.n_t; ++j) {
      const Coords delta = AlgebraElement::project_coords(
          u.group, x[j].matrix.adjoint() * logm.matrix * x[j].matrix);
      for (int i = 1; i <= g.n_r; ++i)
        for (int a = 0; a < d; ++a) v.at(i, j)[a] -= g.ell[i] * delta[a] / (2.0 * std::numbers::pi);
    }
  }
  throw ConvergenceFailure("project_closure: no convergence in " + std::to_string(max_iter) +
                           " iterations");
}

// ---------------------------------------------------------------------------
// Gauge potential and the flow vector field.
//
// The L2 gradient of YM in radial gauge has a dr-component
// lambda^{-1} nabla_t w which radial gauge cannot absorb; Psi with
// d_r Psi = lambda^{-1} (d_t w + [u, w]) cancels it. On the grid
//   Psi_{i+1} = Psi_i + (h / lambda_{i+1/2}) (d_t w + [ubar, w])_{i+1/2},
// with ubar the half-node average. The dt-component left over is
//   F = lambda d_r(lambda^{-1} d_r u) + d_t Psi + [u, Psi],
// and along it dYM/ds = -|F|^2 in the L2 metric, exactly on the grid.

struct FlowEvaluation {
  RadialGaugeField velocity;   // F, zero on row 0
  GaugePotentialField psi;
  double gradient_norm = 0.0;  // sqrt(dissipation rate)
  double energy = 0.0;
};

inline FlowEvaluation flow_vector(const RadialGaugeField& u, const Spectral& sp,
                                  const FieldPerturbation& pert = {}) {
  const SphereGrid& g = u.grid;
  const int d = u.dim();
  const int nr = g.n_r, nt = g.n_t;
  const double h = g.h(), dt = g.dt();
  FlowEvaluation ev{RadialGaugeField(g, u.group), GaugePotentialField(g, u.group), 0.0, 0.0};

  const CurvatureField w = curvature_density(u);
  ev.energy = ym_energy(w);
  CurvatureField wt(g, u.group);
  detail::t_derivative(sp, w, wt);

  double diss = 0.0;
  double tmp[3], ubar[3];
  for (int i = 0; i < nr; ++i) {
    const double f = h / g.lambda_half[i];
    double row = 0.0;
    for (int j = 0; j < nt; ++j) {
      for (int a = 0; a < d; ++a) ubar[a] = 0.5 * (u.at(i, j)[a] + u.at(i + 1, j)[a]);
      bracket_coords(u.group, ubar, w.at(i, j), tmp);
      for (int a = 0; a < d; ++a) {
        const double gcov = wt.at(i, j)[a] + tmp[a];
        row += gcov * gcov;
        ev.psi.at(i + 1, j)[a] = ev.psi.at(i, j)[a] + f * gcov;
      }
    }
    diss += f * row * dt;
  }

  GaugePotentialField psit(g, u.group);
  detail::t_derivative(sp, ev.psi, psit);
  for (int i = 1; i <= nr; ++i) {
    const double coef = i < nr ? g.lambda[i] / h : 0.0;
    double row = 0.0;
    for (int j = 0; j < nt; ++j) {
      bracket_coords(u.group, u.at(i, j), ev.psi.at(i, j), tmp);
      for (int a = 0; a < d; ++a) {
        const double lu = i < nr ? coef * (w.at(i, j)[a] - w.at(i - 1, j)[a]) : 0.0;
        row += lu * lu;
        ev.velocity.at(i, j)[a] = lu + psit.at(i, j)[a] + tmp[a];
      }
    }
    if (i < nr) diss += h / g.lambda[i] * row * dt;
  }

  if (pert) {
    const RadialGaugeField gv = pert(u);
    detail::check_same(gv, u);
    for (size_t q = static_cast<size_t>(nt) * d; q < ev.velocity.data.size(); ++q)
      ev.velocity.data[q] -= gv.data[q];
  }
  ev.gradient_norm = std::sqrt(diss);
  return ev;
}

inline FlowEvaluation flow_vector(const RadialGaugeField& u, const FieldPerturbation& pert = {}) {
  return flow_vector(u, Spectral(u.grid.n_t), pert);
}

/// Exact linearization of the flow vector field at u (without perturbation):
/// J v = L v + d_t Psi'(v) + [v, Psi(u)] + [u, Psi'(v)],
/// Psi'(v) accumulating (h / lambda)(d_t w_v + [ubar, w_v] + [vbar, w_u]).
inline RadialGaugeField flow_jacobian_apply(const RadialGaugeField& u, const FlowEvaluation& ev,
                                            const CurvatureField& wu, const RadialGaugeField& v,
                                            const Spectral& sp) {
  const SphereGrid& g = u.grid;
  const int d = u.dim(), nr = g.n_r, nt = g.n_t;
  const double h = g.h();
  const CurvatureField wv = curvature_density(v);
  CurvatureField wvt(g, u.group);
  detail::t_derivative(sp, wv, wvt);
  GaugePotentialField dpsi(g, u.group);
  double t1[3], t2[3], ubar[3], vbar[3];
  for (int i = 0; i < nr; ++i) {
    const double f = h / g.lambda_half[i];
    for (int j = 0; j < nt; ++j) {
      for (int a = 0; a < d; ++a) {
        ubar[a] = 0.5 * (u.at(i, j)[a] + u.at(i + 1, j)[a]);
        vbar[a] = 0.5 * (v.at(i, j)[a] + v.at(i + 1, j)[a]);
      }
      bracket_coords(u.group, ubar, wv.at(i, j), t1);
      bracket_coords(u.group, vbar, wu.at(i, j), t2);
      for (int a = 0; a < d; ++a)
        dpsi.at(i + 1, j)[a] = dpsi.at(i, j)[a] + f * (wvt.at(i, j)[a] + t1[a] + t2[a]);
    }
  }
  GaugePotentialField dpsit(g, u.group);
  detail::t_derivative(sp, dpsi, dpsit);
  RadialGaugeField out(g, u.group);
  for (int i = 1; i <= nr; ++i) {
    const double coef = i < nr ? g.lambda[i] / h : 0.0;
    for (int j = 0; j < nt; ++j) {
      bracket_coords(u.group, v.at(i, j), ev.psi.at(i, j), t1);
      bracket_coords(u.group, u.at(i, j), dpsi.at(i, j), t2);
      for (int a = 0; a < d; ++a) {
        const double lv = i < nr ? coef * (wv.at(i, j)[a] - wv.at(i - 1, j)[a]) : 0.0;
        out.at(i, j)[a] = lv + dpsit.at(i, j)[a] + t1[a] + t2[a];
      }
    }
  }
  return out;
}

inline GaugePotentialField compute_gauge_potential(const RadialGaugeField& u) {
  return flow_vector(u).psi;
}

// ---------------------------------------------------------------------------
// Linearly implicit stepping.
//
// The Psi terms carry lambda^{-2} d_t^2 near the poles, far stiffer than the
// radial diffusion, so both are treated implicitly: the operator is frozen
// at the row-averaged field ubar(r) and is then diagonal in the Fourier
// index. One dense LU of size N_r * dim g per wavenumber.

class ImplicitSolver {
 public:
  ImplicitSolver(const RadialGaugeField& u, double ds) : grid_(u.grid), group_(u.group), ds_(ds) {
    const int nr = grid_.n_r, nt = grid_.n_t, d = algebra_dim(group_);
    ubar_.assign(static_cast<size_t>(nr + 1) * 3, 0.0);
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j < nt; ++j)
        for (int a = 0; a < d; ++a) ubar_[i * 3 + a] += u.at(i, j)[a] / nt;
    const int n = nr * d;
    for (int q = 0; q <= nt / 2; ++q) {
      const double kappa = (2 * q == nt) ? 0.0 : static_cast<double>(q);
      Eigen::MatrixXcd m(n, n);
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(n), col(n);
      for (int c = 0; c < n; ++c) {
        e[c] = 1.0;
        apply(kappa, e, col);
        m.col(c) = -ds * col;
        m(c, c) += 1.0;
        e[c] = 0.0;
      }
      lu_.emplace_back(m);
    }
  }

  double ds() const { return ds_; }

  /// (I - ds A)^{-1} applied to rows 1..N_r; row 0 of the result is zero.
  RadialGaugeField solve(const RadialGaugeField& rhs) const {
    const int nr = grid_.n_r, nt = grid_.n_t, d = algebra_dim(group_);
    Eigen::FFT<double> fft;
    std::vector<std::vector<std::complex<double>>> spec(static_cast<size_t>(nr) * d);
    std::vector<double> f(nt);
    for (int i = 1; i <= nr; ++i)
      for (int a = 0; a < d; ++a) {
        for (int j = 0; j < nt; ++j) f[j] = rhs.at(i, j)[a];
        fft.fwd(spec[(i - 1) * d + a], f);
      }
    const int n = nr * d;
    Eigen::VectorXcd b(n);
    for (int q = 0; q <= nt / 2; ++q) {
      for (int c = 0; c < n; ++c) b[c] = spec[c][q];
      const Eigen::VectorXcd x = lu_[q].solve(b);
      for (int c = 0; c < n; ++c) {
        spec[c][q] = x[c];
        if (q > 0 && 2 * q < nt) spec[c][nt - q] = std::conj(x[c]);
      }
    }
    RadialGaugeField out(grid_, group_);
    std::vector<double> res;
    for (int c = 0; c < n; ++c) {
      spec[c][0] = spec[c][0].real();
      spec[c][nt / 2] = spec[c][nt / 2].real();
      fft.inv(res, spec[c]);
      const int i = c / d + 1, a = c % d;
      for (int j = 0; j < nt; ++j) out.at(i, j)[a] = res[j];
    }
    return out;
  }

 private:
  // Linearized velocity for a single Fourier mode exp(i kappa t), unknowns
  // v_1..v_{N_r} (v_0 = 0) stacked as (i - 1) * d + a.
  void apply(double kappa, const Eigen::VectorXcd& v, Eigen::VectorXcd& out) const {
    const int nr = grid_.n_r, d = algebra_dim(group_);
    const double h = grid_.h();
    const std::complex<double> ik(0.0, kappa);
    auto vin = [&](int i, int a) -> std::complex<double> { return i == 0 ? 0.0 : v[(i - 1) * d + a]; };
    std::vector<std::complex<double>> w(static_cast<size_t>(nr) * d), psi(static_cast<size_t>(nr + 1) * d, 0.0);
    for (int i = 0; i < nr; ++i)
      for (int a = 0; a < d; ++a) w[i * d + a] = (vin(i + 1, a) - vin(i, a)) / (h * grid_.lambda_half[i]);
    for (int i = 0; i < nr; ++i) {
      double mid[3];
      for (int a = 0; a < 3; ++a) mid[a] = 0.5 * (ubar_[i * 3 + a] + ubar_[(i + 1) * 3 + a]);
      const Eigen::Matrix3d ad = ad_matrix(group_, mid);
      const double f = h / grid_.lambda_half[i];
      for (int a = 0; a < d; ++a) {
        std::complex<double> gcov = ik * w[i * d + a];
        for (int b = 0; b < d; ++b) gcov += ad(a, b) * w[i * d + b];
        psi[(i + 1) * d + a] = psi[i * d + a] + f * gcov;
      }
    }
    for (int i = 1; i <= nr; ++i) {
      const Eigen::Matrix3d ad = ad_matrix(group_, &ubar_[i * 3]);
      for (int a = 0; a < d; ++a) {
        std::complex<double> val = ik * psi[i * d + a];
        for (int b = 0; b < d; ++b) val += ad(a, b) * psi[i * d + b];
        if (i < nr) val += grid_.lambda[i] / h * (w[i * d + a] - w[(i - 1) * d + a]);
        out[(i - 1) * d + a] = val;
      }
    }
  }

  SphereGrid grid_;
  Group group_;
  double ds_;
  std::vector<double> ubar_;
  std::vector<Eigen::PartialPivLU<Eigen::MatrixXcd>> lu_;
};

struct ImplicitVelocity {
  RadialGaugeField du;
  int iterations = 0;
  double residual = 0.0;
};

/// Solves (I - ds J) du = F(u) with J the exact Jacobian at u, by restarted
/// GMRES right-preconditioned with the frozen Fourier solver. For U(1) the
/// preconditioner is exact and one iteration suffices.
inline ImplicitVelocity implicit_velocity(const RadialGaugeField& u, const FlowEvaluation& ev,
                                          double ds, const ImplicitSolver& precond,
                                          const Spectral& sp, double tol = 1e-10,
                                          int restart = 40, int max_restarts = 5) {
  const SphereGrid& g = u.grid;
  const size_t off = static_cast<size_t>(g.n_t) * u.dim();
  const size_t n = u.data.size() - off;
  const CurvatureField wu = curvature_density(u);
  auto to_vec = [&](const RadialGaugeField& f) {
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(f.data.data() + off, static_cast<Eigen::Index>(n)));
  };
  auto to_field = [&](const Eigen::VectorXd& x) {
    RadialGaugeField f(g, u.group);
    std::copy(x.data(), x.data() + n, f.data.begin() + static_cast<std::ptrdiff_t>(off));
    return f;
  };
  auto op = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    const RadialGaugeField fx = to_field(x);
    return x - ds * to_vec(flow_jacobian_apply(u, ev, wu, fx, sp));
  };
  auto pre = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return to_vec(precond.solve(to_field(x))); };

  const Eigen::VectorXd b = to_vec(ev.velocity);
  const double bnorm = b.norm();
  ImplicitVelocity out;
  if (bnorm == 0.0) {
    out.du = RadialGaugeField(g, u.group);
    return out;
  }
  Eigen::VectorXd x = pre(b);
  Eigen::VectorXd r = b - op(x);
  for (int cycle = 0; cycle < max_restarts; ++cycle) {
    double beta = r.norm();
    out.residual = beta / bnorm;
    if (out.residual <= tol) break;
    std::vector<Eigen::VectorXd> V{r / beta}, Z;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs = Eigen::VectorXd::Zero(restart), sn = Eigen::VectorXd::Zero(restart);
    Eigen::VectorXd gv = Eigen::VectorXd::Zero(restart + 1);
    gv[0] = beta;
    int k = 0;
    for (; k < restart; ++k) {
      Z.push_back(pre(V[k]));
      Eigen::VectorXd w = op(Z[k]);
      ++out.iterations;
      for (int q = 0; q <= k; ++q) {
        H(q, k) = w.dot(V[q]);
        w -= H(q, k) * V[q];
      }
      H(k + 1, k) = w.norm();
      for (int q = 0; q < k; ++q) {
        const double t = cs[q] * H(q, k) + sn[q] * H(q + 1, k);
        H(q + 1, k) = -sn[q] * H(q, k) + cs[q] * H(q + 1, k);
        H(q, k) = t;
      }
      const double den = std::hypot(H(k, k), H(k + 1, k));
      cs[k] = H(k, k) / den;
      sn[k] = H(k + 1, k) / den;
      const double hk1 = H(k + 1, k);
      H(k, k) = den;
      H(k + 1, k) = 0.0;
      gv[k + 1] = -sn[k] * gv[k];
      gv[k] = cs[k] * gv[k];
      if (std::abs(gv[k + 1]) <= tol * bnorm || hk1 == 0.0) {
        ++k;
        break;
      }
      V.push_back(w / hk1);
    }
    const Eigen::VectorXd y =
        H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(gv.head(k));
    for (int q = 0; q < k; ++q) x += y[q] * Z[q];
    r = b - op(x);
    out.residual = r.norm() / bnorm;
  }
  out.du = to_field(x);
  return out;
}

namespace detail {

// Adds ds * du on rows 1..N_r; row 0 stays zero. Closure is restored by the
// projection in ym_flow_run, not here.
inline RadialGaugeField apply_increment(const RadialGaugeField& u, const RadialGaugeField& du,
                                        double ds) {
  const SphereGrid& g = u.grid;
  const int d = u.dim(), nt = g.n_t;
  RadialGaugeField v = u;
  for (size_t q = static_cast<size_t>(nt) * d; q < v.data.size(); ++q) v.data[q] += ds * du.data[q];
  for (int q = 0; q < nt * d; ++q) v.data[q] = 0.0;
  return v;
}

}  // namespace detail

/// One linearly implicit Euler step u + ds (I - ds J)^{-1} F(u), J the
/// Jacobian at u. Row 0 is re-zeroed. The step does not preserve closure by
/// itself; callers project (ym_flow_run does so every project_every steps).
inline RadialGaugeField ym_flow_step(const RadialGaugeField& u, double ds,
                                     const FieldPerturbation& pert = {},
                                     const ImplicitSolver* solver = nullptr) {
  if (!(ds > 0.0)) throw InvalidInput("ym_flow_step: ds must be positive");
  const Spectral sp(u.grid.n_t);
  const FlowEvaluation ev = flow_vector(u, sp, pert);
  const ImplicitVelocity iv = solver ? implicit_velocity(u, ev, ds, *solver, sp)
                                     : implicit_velocity(u, ev, ds, ImplicitSolver(u, ds), sp);
  return detail::apply_increment(u, iv.du, ds);
}

struct YmFlowOptions {
  int project_every = 1;     // closure projection period K
  int refresh_every = 16;    // implicit operator rebuild period
  double eps_mono = 1e-9;    // allowed energy increase per accepted step
  double stop_gradient = 0;  // stop when the gradient norm falls below this
  int max_halvings = 30;
  int record_every = 1;
  int holonomy_every = 0;  // 0: only the final holonomy
  double tol_closure = kDefaultClosureTol;
  FieldPerturbation perturbation;
  std::function<void(double, const RadialGaugeField&)> observer;
  int observe_every = 0;
};

struct YmTrajectory {
  std::vector<double> s;
  std::vector<double> energies;
  std::vector<double> gradient_norms;
  std::vector<double> step_sizes;
  std::vector<double> holonomy_s;
  std::vector<GroupLoop> holonomies;
  RadialGaugeField final_field;
  int accepted = 0;
  int rejected = 0;
  long krylov_iterations = 0;
  double max_increase = -HUGE_VAL;  // largest E_{k+1} - E_k over accepted steps
  double max_closure_gap = 0.0;
  bool converged = false;
};

/// Flow over [0, S_total] with step-size control: a step whose energy rises
/// by more than eps_mono is retried with half the step.
inline YmTrajectory ym_flow_run(const RadialGaugeField& u0, double s_total, double ds0,
                                const YmFlowOptions& opt = {}) {
  if (!(ds0 > 0.0) || !(s_total >= 0.0)) throw InvalidInput("ym_flow_run: bad time parameters");
  const Spectral sp(u0.grid.n_t);
  YmTrajectory tr;
  RadialGaugeField u = u0;
  for (int j = 0; j < u.grid.n_t; ++j)
    for (int a = 0; a < u.dim(); ++a) u.at(0, j)[a] = 0.0;

  FlowEvaluation ev = flow_vector(u, sp, opt.perturbation);
  double s = 0.0, ds = ds0;
  int since_refresh = 0, since_project = 0, step = 0;
  std::unique_ptr<ImplicitSolver> solver;

  auto record = [&]() {
    tr.s.push_back(s);
    tr.energies.push_back(ev.energy);
    tr.gradient_norms.push_back(ev.gradient_norm);
  };
  auto snapshot = [&]() {
    tr.holonomy_s.push_back(s);
    tr.holonomies.push_back(holonomy(u, opt.tol_closure));
  };
  record();
  if (opt.holonomy_every > 0) snapshot();
  if (opt.observer) opt.observer(s, u);

  while (s < s_total - 1e-12) {
    if (opt.stop_gradient > 0.0 && ev.gradient_norm < opt.stop_gradient) {
      tr.converged = true;
      break;
    }
    const double want = std::min(ds, s_total - s);
    double try_ds = want;
    bool ok = false;
    RadialGaugeField next;
    FlowEvaluation next_ev;
    for (int halving = 0; halving <= opt.max_halvings; ++halving) {
      if (!solver || solver->ds() != try_ds || since_refresh >= opt.refresh_every) {
        solver = std::make_unique<ImplicitSolver>(u, try_ds);
        since_refresh = 0;
      }
      const ImplicitVelocity iv = implicit_velocity(u, ev, try_ds, *solver, sp);
      tr.krylov_iterations += iv.iterations;
      next = detail::apply_increment(u, iv.du, try_ds);
      if (opt.project_every > 0 && since_project + 1 >= opt.project_every) {
        // a step too large for the projection to repair is rejected like an energy rise
        try {
          next = project_closure(next);
        } catch (const NumericalFailure&) {
          ++tr.rejected;
          try_ds *= 0.5;
          continue;
        }
      }
      next_ev = flow_vector(next, sp, opt.perturbation);
      if (std::isfinite(next_ev.energy) && next_ev.energy <= ev.energy + opt.eps_mono) {
        ok = true;
        break;
      }
      ++tr.rejected;
      try_ds *= 0.5;
    }
    if (!ok) throw ConvergenceFailure("ym_flow_run: step rejected after repeated halving");
    tr.max_increase = std::max(tr.max_increase, next_ev.energy - ev.energy);
    u = std::move(next);
    ev = std::move(next_ev);
    s += try_ds;
    ++step;
    ++tr.accepted;
    ++since_refresh;
    since_project = (since_project + 1 >= opt.project_every) ? 0 : since_project + 1;
    // recover toward the requested step after a rejection
    ds = (try_ds < want) ? std::min(ds0, 2.0 * try_ds) : ds;
    tr.step_sizes.push_back(try_ds);
    tr.max_closure_gap = std::max(tr.max_closure_gap, monodromy(u.xi()).distance_to_identity());
    if (step % std::max(1, opt.record_every) == 0) record();
    if (opt.holonomy_every > 0 && step % opt.holonomy_every == 0) snapshot();
    if (opt.observer && opt.observe_every > 0 && step % opt.observe_every == 0) opt.observer(s, u);
  }
  if (opt.stop_gradient > 0.0 && ev.gradient_norm < opt.stop_gradient) tr.converged = true;
  if (tr.s.back() != s) record();
  tr.final_field = u;
  if (opt.holonomy_every == 0 || tr.holonomy_s.back() != s) snapshot();
  if (opt.observer) opt.observer(s, u);
  return tr;
}

// ---------------------------------------------------------------------------
// Residual gauge action and test data.

/// u -> g^{-1} u g + g^{-1} dg/dt on every row. For non-constant g row 0
/// becomes g^{-1} dg/dt: the result is the same connection in a gauge that is
/// singular at the north pole. Energy is unchanged and Phi(u) -> g(0)^{-1} Phi(u) g.
inline RadialGaugeField gauge_transform_loopwise(const RadialGaugeField& u, const GroupLoop& g) {
  if (g.group != u.group) throw GroupMismatch();
  if (g.size() != u.grid.n_t) throw InvalidInput("gauge loop has the wrong sample count");
  const AlgebraLoop mc = loop_derivative(g);
  RadialGaugeField v(u.grid, u.group);
  const int d = u.dim();
  for (int j = 0; j < u.grid.n_t; ++j) {
    const Matrix& gm = g.samples[j].matrix;
    for (int i = 0; i <= u.grid.n_r; ++i) {
      const Coords c = AlgebraElement::project_coords(u.group, gm.adjoint() * u.element(i, j).matrix * gm);
      for (int a = 0; a < d; ++a) v.at(i, j)[a] = c[a] + mc.at(j)[a];
    }
  }
  return v;
}

/// Representative generator of a bundle class: U(1) n -> i n; SU(2) k -> k diag(i, -i).
inline Coords class_generator(Group g, int label) {
  if (g == Group::U1) return {static_cast<double>(label), 0.0, 0.0};
  if (label < 0) throw InvalidInput("SU(2) class label must be >= 0");
  return {0.0, 0.0, std::numbers::sqrt2 * label};
}

/// ell(r) eta on the grid.
inline RadialGaugeField geodesic_connection(const SphereGrid& grid, Group g, const Coords& eta) {
  RadialGaugeField u(grid, g);
  for (int i = 0; i <= grid.n_r; ++i)
    for (int j = 0; j < grid.n_t; ++j)
      for (int a = 0; a < u.dim(); ++a) u.at(i, j)[a] = grid.ell[i] * eta[a];
  return u;
}

/// Seeded smooth connection around the geodesic connection of a class. The
/// random data are coefficients of a continuous field, drawn in a fixed order,
/// so the same seed gives the same field sampled on any grid:
///   u = ell eta + sum_k ell^{1 + k/2} c_k(t) + sum_{p,k} sin^{2+k}(r) cos(p r) m_pk(t),
/// c_k, m_pk trigonometric of degree k with amplitude ~ amplitude (1 + k + p)^-smoothness.
/// The holonomy generator is then corrected by project_closure.
inline RadialGaugeField random_connection(const SphereGrid& grid, Group g, std::uint64_t seed,
                                          int class_label, double smoothness, double amplitude) {
  constexpr int kModes = 4, kRadial = 3;
  const Coords eta = class_generator(g, class_label);
  const int d = algebra_dim(g);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // xi modes k = 1..kModes, (cos, sin) x d
  std::vector<double> xc(kModes * 2 * 3), mc(kRadial * (kModes + 1) * 2 * 3);
  for (double& v : xc) v = normal(rng);
  for (double& v : mc) v = normal(rng);

  RadialGaugeField u = geodesic_connection(grid, g, eta);
  if (amplitude == 0.0) return u;
  for (int j = 0; j < grid.n_t; ++j) {
    const double t = j * grid.dt();
    for (int i = 1; i <= grid.n_r; ++i) {
      const double ell = grid.ell[i];
      const double lam = grid.lambda[i];
      for (int a = 0; a < d; ++a) {
        double val = 0.0;
        for (int k = 1; k <= kModes; ++k) {
          const double w = amplitude * std::pow(1.0 + k, -smoothness);
          const double prof = std::pow(ell, 1.0 + 0.5 * k);
          val += prof * w * (xc[((k - 1) * 2 + 0) * 3 + a] * std::cos(k * t) +
                             xc[((k - 1) * 2 + 1) * 3 + a] * std::sin(k * t));
        }
        for (int p = 0; p < kRadial; ++p)
          for (int k = 0; k <= kModes; ++k) {
            const double w = amplitude * std::pow(1.0 + k + p, -smoothness);
            const double prof = std::pow(lam, 2 + k) * std::cos(p * grid.r(i));
            const size_t base = ((p * (kModes + 1) + k) * 2) * 3;
            val += prof * w * (mc[base + a] * std::cos(k * t) + (k > 0 ? mc[base + 3 + a] * std::sin(k * t) : 0.0));
          }
        u.at(i, j)[a] += val;
      }
    }
  }
  return project_closure(u);
}

/// Class label of a near-geodesic holonomy: U(1) winding of nu, SU(2)
/// round(|mean nu| / sqrt 2).
inline int class_label(const GroupLoop& x) {
  const AlgebraLoop nu = loop_derivative(x);
  if (x.group == Group::U1) return winding(nu);
  Coords mean{0.0, 0.0, 0.0};
  for (int j = 0; j < nu.n; ++j)
    for (int a = 0; a < 3; ++a) mean[a] += nu.at(j)[a] / nu.n;
  const double norm = std::sqrt(mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]);
  return static_cast<int>(std::lround(norm / std::numbers::sqrt2));
}

}  // namespace gaugeflow
