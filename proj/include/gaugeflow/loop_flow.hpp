#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "gaugeflow/loop.hpp"

namespace gaugeflow {

/// Caller-supplied gradient of a loop perturbation V+, left-trivialized
/// (x^{-1} grad V at each sample, in algebra coordinates).
using LoopPerturbation = std::function<AlgebraLoop(const GroupLoop&)>;

/// E = 1/2 sum_j |nu_j|^2 dt on [0, 2 pi).
inline double loop_energy(const AlgebraLoop& nu) {
  const double dt = 2.0 * std::numbers::pi / nu.n;
  double acc = 0.0;
  for (double v : nu.c) acc += v * v;
  return 0.5 * acc * dt;
}

inline double loop_energy(const GroupLoop& x, const Spectral& sp) {
  return loop_energy(loop_derivative(x, sp));
}

inline double loop_energy(const GroupLoop& x) { return loop_energy(loop_derivative(x)); }

/// L2 norm sqrt(sum |v_j|^2 dt).
inline double l2_norm(const AlgebraLoop& v) { return std::sqrt(2.0 * loop_energy(v)); }

inline bool is_geodesic(const GroupLoop& x, double tol) {
  const Spectral sp(x.size());
  return derivative(loop_derivative(x, sp), sp).max_abs() < tol;
}

/// Gradient of the discrete energy in the chart xi -> x exp(xi), per unit dt:
///   g_l = P(-M_l nu_l - (D(nu x^dagger))_l x_l),  M = x^dagger D x, nu = P(M).
/// In the continuum this is -d_t nu. The explicit flow has to use this and not
/// the spectral d_t nu: for winding >= 2 the entrywise derivative aliases the
/// top modes and d_t nu is anti-diffusive there.
inline AlgebraLoop loop_energy_gradient(const GroupLoop& x, const Spectral& sp) {
  const int n = x.size();
  const int m = matrix_size(x.group);
  auto entry_derivative = [&](const std::vector<Matrix>& in) {
    std::vector<Matrix> out(n, Matrix::Zero(m, m));
    std::vector<double> re(n), im(n), dre(n), dim_(n);
    for (int p = 0; p < m; ++p)
      for (int q = 0; q < m; ++q) {
        for (int j = 0; j < n; ++j) {
          re[j] = in[j](p, q).real();
          im[j] = in[j](p, q).imag();
        }
        sp.derivative(re, dre);
        sp.derivative(im, dim_);
        for (int j = 0; j < n; ++j) out[j](p, q) = Complex(dre[j], dim_[j]);
      }
    return out;
  };
  std::vector<Matrix> xs(n);
  for (int j = 0; j < n; ++j) xs[j] = x.samples[j].matrix;
  const std::vector<Matrix> dx = entry_derivative(xs);
  std::vector<Matrix> M(n), nu(n), y(n);
  for (int j = 0; j < n; ++j) {
    M[j] = xs[j].adjoint() * dx[j];
    nu[j] = AlgebraElement::from_coords(x.group, AlgebraElement::project_coords(x.group, M[j])).matrix;
    y[j] = nu[j] * xs[j].adjoint();
  }
  const std::vector<Matrix> dy = entry_derivative(y);
  AlgebraLoop g(x.group, n);
  for (int j = 0; j < n; ++j) {
    const Coords c = AlgebraElement::project_coords(x.group, -M[j] * nu[j] - dy[j] * xs[j]);
    for (int a = 0; a < g.dim(); ++a) g.at(j)[a] = c[a];
  }
  return g;
}

inline AlgebraLoop loop_energy_gradient(const GroupLoop& x) { return loop_energy_gradient(x, Spectral(x.size())); }

// ---------------------------------------------------------------------------
// Heat flow.

struct HeatFlowOptions {
  double c_cfl = 0.2;
  double eps_mono = 1e-9;
  int record_every = 1;
  double stop_gradient = 0.0;  // stop once ||d_t nu||_inf falls below this
  LoopPerturbation perturbation;
};

struct LoopTrajectory {
  std::vector<double> s;
  std::vector<GroupLoop> loops;
  std::vector<double> energies;
  std::vector<double> gradient_norms;  // ||d_t nu||_{L2}
  std::vector<double> gradient_max;    // ||d_t nu||_inf
  int steps = 0;
  double max_increase = 0.0;
  int violations = 0;
};

/// Wavenumber cutoff of the heat flow (two-thirds rule).
inline int heat_flow_cutoff(int n) { return n / 3; }

/// x_j <- x_j exp(-ds Pg_j - ds grad V_j), g the discrete energy gradient and
/// P the projection onto wavenumbers <= N/3. Without P the sampled energy has
/// negative curvature in the aliased top modes near winding loops and the
/// flow unwinds them. Multiplicative, so samples stay on the group.
inline GroupLoop heat_flow_step(const GroupLoop& x, double ds, const LoopPerturbation& pert = {},
                                double c_cfl = 0.2) {
  const double dt = x.dt();
  if (!(ds > 0.0) || ds > c_cfl * dt * dt * (1.0 + 1e-12))
    throw CflViolation("heat_flow_step: ds exceeds c_cfl * dt^2");
  const Spectral sp(x.size());
  const AlgebraLoop g = loop_energy_gradient(x, sp);
  AlgebraLoop eta(x.group, x.size());
  std::vector<double> f(x.size());
  for (int a = 0; a < g.dim(); ++a) {
    sp.low_pass(g.component(a), f, heat_flow_cutoff(x.size()));
    for (double& v : f) v = -v;
    eta.set_component(a, f);
  }
  if (pert) {
    const AlgebraLoop gv = pert(x);
    for (size_t q = 0; q < eta.c.size(); ++q) eta.c[q] -= gv.c[q];
  }
  GroupLoop y = right_exp(x, eta, ds);
  y.based = false;
  return y;
}

inline LoopTrajectory heat_flow_run(const GroupLoop& x0, double s_total, double ds,
                                    const HeatFlowOptions& opt = {}) {
  const Spectral sp(x0.size());
  LoopTrajectory tr;
  auto record = [&](double s, const GroupLoop& x) {
    const AlgebraLoop nu = loop_derivative(x, sp);
    const AlgebraLoop g = derivative(nu, sp);
    tr.s.push_back(s);
    tr.loops.push_back(x);
    tr.energies.push_back(loop_energy(nu));
    tr.gradient_norms.push_back(l2_norm(g));
    tr.gradient_max.push_back(g.max_abs());
  };
  GroupLoop x = x0;
  record(0.0, x);
  double e_prev = tr.energies.back();
  const int n_steps = static_cast<int>(std::ceil(s_total / ds - 1e-9));
  for (int k = 1; k <= n_steps; ++k) {
    x = heat_flow_step(x, ds, opt.perturbation, opt.c_cfl);
    ++tr.steps;
    const double e = loop_energy(x, sp);
    if (e - e_prev > tr.max_increase) tr.max_increase = e - e_prev;
    if (e > e_prev + opt.eps_mono) ++tr.violations;
    e_prev = e;
    const bool stop = opt.stop_gradient > 0.0 &&
                      derivative(loop_derivative(x, sp), sp).max_abs() < opt.stop_gradient;
    if (stop || k % opt.record_every == 0 || k == n_steps) record(k * ds, x);
    if (stop) break;
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Hessian.

struct LoopHessianMatrix {
  Eigen::MatrixXd matrix;  // acts on coefficients xi[j*d + a]
  GroupLoop base;
};

/// Hessian of E in the chart xi -> x exp(xi), written as an operator for the
/// L2 pairing sum <.,.> dt:
///   H xi = -xi'' - [nu, xi'] - 1/2 [nu', xi].
/// Its quadratic form is int |xi'|^2 + <xi', [nu, xi]>.
inline LoopHessianMatrix loop_hessian_matrix(const GroupLoop& x) {
  const int n = x.size();
  const int d = algebra_dim(x.group);
  const Spectral sp(n);
  const AlgebraLoop nu = loop_derivative(x, sp);
  const Eigen::MatrixXd d1 = sp.derivative_matrix();
  const Eigen::MatrixXd d2 = sp.second_derivative_matrix();
  const int dim = n * d;
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(dim, dim);
  for (int j = 0; j < n; ++j)
    for (int l = 0; l < n; ++l)
      for (int a = 0; a < d; ++a) {
        D(j * d + a, l * d + a) = d1(j, l);
        H(j * d + a, l * d + a) = -d2(j, l);
      }
  if (x.group != Group::U1) {
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(dim, dim);
    for (int j = 0; j < n; ++j) C.block(j * d, j * d, d, d) = ad_matrix(x.group, nu.at(j)).topLeftCorner(d, d);
    const Eigen::MatrixXd DC = D.transpose() * C;
    H += 0.5 * (DC + DC.transpose());
  }
  H = 0.5 * (H + H.transpose());
  return {H, x};
}

struct IndexNullity {
  int index = 0;
  int nullity = 0;
  double tol_zero = 0.0;
  Eigen::VectorXd eigenvalues;
};

/// Eigenvalue counts with a relative zero threshold. Throws when an
/// eigenvalue sits in the ambiguous band (tol/10, 10 tol].
inline IndexNullity spectrum_counts(const Eigen::MatrixXd& h, double tol_zero = -1.0) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalFailure("eigen decomposition failed");
  IndexNullity r;
  r.eigenvalues = es.eigenvalues();
  const double scale = r.eigenvalues.size() ? r.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  r.tol_zero = tol_zero > 0.0 ? tol_zero : 1e-6 * scale;
  for (int q = 0; q < r.eigenvalues.size(); ++q) {
    const double v = r.eigenvalues[q];
    const double a = std::abs(v);
    if (a > 0.1 * r.tol_zero && a <= 10.0 * r.tol_zero)
      throw NumericalFailure("index_nullity: eigenvalue " + std::to_string(v) +
                             " too close to the zero threshold");
    if (a <= r.tol_zero) ++r.nullity;
    else if (v < 0.0) ++r.index;
  }
  return r;
}

inline IndexNullity index_nullity(const GroupLoop& x, double tol_zero = -1.0) {
  if (!is_geodesic(x, 1e-5)) throw InvalidInput("index_nullity: loop is not near-critical");
  return spectrum_counts(loop_hessian_matrix(x).matrix, tol_zero);
}

}  // namespace gaugeflow
