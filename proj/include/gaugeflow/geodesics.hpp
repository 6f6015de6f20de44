#pragma once

#include <cmath>
#include <map>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "gaugeflow/loop_flow.hpp"
#include "gaugeflow/sphere.hpp"

namespace gaugeflow {

/// A closed based geodesic t -> exp(t eta), exp(2 pi eta) = 1.
struct GeodesicRecord {
  Group group = Group::U1;
  Coords eta{0.0, 0.0, 0.0};
  double energy = 0.0;  // 1/2 * 2 pi * |eta|^2
  int orbit_dim = 0;    // dimension of the conjugacy orbit of eta
  int index = 0;
  int nullity = 0;
  int class_label = 0;
};

inline double geodesic_energy(Group g, const Coords& eta) {
  return std::numbers::pi * inner_coords(g, eta.data(), eta.data());
}

/// Geodesics with energy <= max_energy, ordered by energy (ties by label).
/// Index and nullity come from the loop Hessian at n_t samples.
inline std::vector<GeodesicRecord> enumerate_geodesics(Group g, double max_energy, int n_t = 128) {
  if (!(max_energy >= 0.0)) throw InvalidInput("enumerate_geodesics: max_energy must be >= 0");
  std::vector<int> labels;
  if (g == Group::U1) {
    const int nmax = static_cast<int>(std::floor(std::sqrt(max_energy / std::numbers::pi)));
    labels.push_back(0);
    for (int n = 1; n <= nmax; ++n) {
      labels.push_back(-n);
      labels.push_back(n);
    }
  } else {
    const int kmax = static_cast<int>(std::floor(std::sqrt(max_energy / (2.0 * std::numbers::pi))));
    for (int k = 0; k <= kmax; ++k) labels.push_back(k);
  }
  std::vector<GeodesicRecord> out;
  for (int label : labels) {
    GeodesicRecord r;
    r.group = g;
    r.class_label = label;
    r.eta = class_generator(g, label);
    r.energy = geodesic_energy(g, r.eta);
    if (r.energy > max_energy) continue;  // rounding at the boundary
    r.orbit_dim = (g == Group::SU2 && label != 0) ? 2 : 0;
    const IndexNullity in = index_nullity(GroupLoop::one_parameter(g, n_t, r.eta));
    r.index = in.index;
    r.nullity = in.nullity;
    out.push_back(r);
  }
  return out;
}

/// u = ell(r) eta, the Yang-Mills connection over the geodesic.
inline RadialGaugeField ym_connection_from_geodesic(const SphereGrid& grid, Group g, const Coords& eta) {
  Coords scaled{0.0, 0.0, 0.0};
  for (int a = 0; a < algebra_dim(g); ++a) scaled[a] = 2.0 * std::numbers::pi * eta[a];
  const double gap = exp_coords(g, scaled.data()).distance_to_identity();
  if (gap > 1e-10)
    throw ClosureViolation("ym_connection_from_geodesic: exp(2 pi eta) != 1 (gap " + std::to_string(gap) + ")");
  return geodesic_connection(grid, g, eta);
}

// ---------------------------------------------------------------------------
// Reduced Hessian.

struct ReducedHessian {
  Eigen::MatrixXd matrix;
  int loop_block = 0;  // leading coordinates: zeta modes
  int m_block = 0;     // trailing coordinates: delta m modes
  double step = 0.0;
};

/// Second derivative of ym_energy in the chart
///   c -> ell * nu(x* exp(zeta(c))) + m* + dm(c),
/// with x* = Phi(u*), m* the non-harmonic part of u*,
///   zeta = sum_k a_k (1 - cos kt) e_a + b_k sin kt e_a   (based, closes exactly),
///   dm   = sum_p c_p sin(r) sin(p r) e_a                 (zero at both poles),
/// k, p = 1..n_modes. Central differences with step `step`; the diagonal uses
/// the 2h stencil so every entry comes from the same four-point formula.
inline ReducedHessian ym_hessian_reduced(const RadialGaugeField& ustar, int n_modes = 16,
                                         double step = 1e-3) {
  if (n_modes < 1) throw InvalidInput("ym_hessian_reduced: n_modes must be >= 1");
  const SphereGrid& grid = ustar.grid;
  const Spectral sp(grid.n_t);
  const FlowEvaluation ev = flow_vector(ustar, sp);
  if (ev.gradient_norm >= 1e-6)
    throw InvalidInput("ym_hessian_reduced: base point is not stationary (gradient " +
                       std::to_string(ev.gradient_norm) + ")");
  if (2 * n_modes >= grid.n_t) throw InvalidInput("ym_hessian_reduced: n_modes too large for N_t");

  const Group grp = ustar.group;
  const int d = algebra_dim(grp), nt = grid.n_t, nr = grid.n_r;
  const GroupLoop xstar = holonomy(ustar);
  RadialGaugeField mstar = decompose(ustar).m;

  const int nz = 2 * n_modes * d, nm = n_modes * d, dim = nz + nm;

  // Basis samples.
  std::vector<double> zc(static_cast<size_t>(2 * n_modes) * nt);  // [mode][j]
  for (int k = 1; k <= n_modes; ++k)
    for (int j = 0; j < nt; ++j) {
      const double t = j * grid.dt();
      zc[(2 * (k - 1)) * nt + j] = 1.0 - std::cos(k * t);
      zc[(2 * (k - 1) + 1) * nt + j] = std::sin(k * t);
    }
  std::vector<double> mc(static_cast<size_t>(n_modes) * (nr + 1));
  for (int p = 1; p <= n_modes; ++p)
    for (int i = 0; i <= nr; ++i)
      mc[(p - 1) * (nr + 1) + i] = (i == 0 || i == nr) ? 0.0 : grid.lambda[i] * std::sin(p * grid.r(i));

  auto xi_raw = [&](const std::vector<std::pair<int, double>>& zdisp) {
    if (zdisp.empty()) return loop_derivative(xstar, sp);
    AlgebraLoop z(grp, nt);
    for (const auto& [q, s] : zdisp) {
      const int mode = q / d, a = q % d;
      for (int j = 0; j < nt; ++j) z.at(j)[a] += s * zc[static_cast<size_t>(mode) * nt + j];
    }
    return loop_derivative(right_exp(xstar, z), sp);
  };
  // Single displacements recur in every row of the stencil.
  std::map<std::pair<int, double>, AlgebraLoop> cache;
  auto xi_of = [&](const std::vector<std::pair<int, double>>& zdisp) -> AlgebraLoop {
    if (zdisp.size() > 1) return xi_raw(zdisp);
    const auto key = zdisp.empty() ? std::make_pair(-1, 0.0) : zdisp[0];
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, xi_raw(zdisp)).first;
    return it->second;
  };

  RadialGaugeField work(grid, grp);
  auto energy = [&](const AlgebraLoop& xi, const std::vector<std::pair<int, double>>& mdisp) {
    for (int i = 0; i <= nr; ++i)
      for (int j = 0; j < nt; ++j)
        for (int a = 0; a < d; ++a) work.at(i, j)[a] = grid.ell[i] * xi.at(j)[a] + mstar.at(i, j)[a];
    for (const auto& [q, s] : mdisp) {
      const int p = q / d, a = q % d;
      for (int i = 1; i < nr; ++i) {
        const double v = s * mc[static_cast<size_t>(p) * (nr + 1) + i];
        for (int j = 0; j < nt; ++j) work.at(i, j)[a] += v;
      }
    }
    return ym_energy(work);
  };

  // Split displacements into their zeta and dm parts.
  using Disp = std::vector<std::pair<int, double>>;
  auto eval = [&](int p, double sp_, int q, double sq) {
    Disp z, m;
    auto add = [&](int idx, double s) {
      if (idx < 0 || s == 0.0) return;
      if (idx < nz) z.emplace_back(idx, s);
      else m.emplace_back(idx - nz, s);
    };
    add(p, sp_);
    add(q, sq);
    return energy(xi_of(z), m);
  };

  const double hstep = step;
  ReducedHessian out;
  out.loop_block = nz;
  out.m_block = nm;
  out.step = hstep;
  out.matrix = Eigen::MatrixXd::Zero(dim, dim);
  const double e0 = eval(-1, 0.0, -1, 0.0);
  for (int p = 0; p < dim; ++p) {
    const double fp = eval(p, 2 * hstep, -1, 0.0), fm = eval(p, -2 * hstep, -1, 0.0);
    out.matrix(p, p) = (fp - 2.0 * e0 + fm) / (4.0 * hstep * hstep);
    for (int q = p + 1; q < dim; ++q) {
      const double fpp = eval(p, hstep, q, hstep), fpm = eval(p, hstep, q, -hstep);
      const double fmp = eval(p, -hstep, q, hstep), fmm = eval(p, -hstep, q, -hstep);
      const double v = (fpp - fpm - fmp + fmm) / (4.0 * hstep * hstep);
      out.matrix(p, q) = v;
      out.matrix(q, p) = v;
    }
  }
  return out;
}

}  // namespace gaugeflow
