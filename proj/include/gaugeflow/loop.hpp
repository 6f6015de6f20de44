#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <functional>
#include <vector>

#include "gaugeflow/lie.hpp"
#include "gaugeflow/spectral.hpp"

namespace gaugeflow {

/// Algebra-valued loop in orthonormal coordinates: value(j)[a] = c[j*d + a].
struct AlgebraLoop {
  Group group = Group::U1;
  int n = 0;
  std::vector<double> c;

  AlgebraLoop() = default;
  AlgebraLoop(Group g, int n_samples)
      : group(g), n(n_samples), c(static_cast<size_t>(n_samples) * algebra_dim(g), 0.0) {}

  int dim() const { return algebra_dim(group); }
  double* at(int j) { return c.data() + static_cast<size_t>(j) * dim(); }
  const double* at(int j) const { return c.data() + static_cast<size_t>(j) * dim(); }

  static AlgebraLoop constant(Group g, int n_samples, const Coords& v) {
    AlgebraLoop l(g, n_samples);
    for (int j = 0; j < n_samples; ++j)
      for (int a = 0; a < l.dim(); ++a) l.at(j)[a] = v[a];
    return l;
  }

  AlgebraElement element(int j) const {
    return AlgebraElement::from_coords(group, std::span<const double>(at(j), dim()));
  }

  // Samples of component a as a contiguous vector.
  std::vector<double> component(int a) const {
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) out[j] = at(j)[a];
    return out;
  }
  void set_component(int a, const std::vector<double>& v) {
    for (int j = 0; j < n; ++j) at(j)[a] = v[j];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : c) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Loop sampled at t_j = 2 pi j / N, j = 0..N-1.
struct GroupLoop {
  Group group = Group::U1;
  std::vector<GroupElement> samples;
  bool based = false;

  GroupLoop() = default;
  GroupLoop(Group g, int n) : group(g), samples(n, GroupElement::identity(g)), based(true) {}

  int size() const { return static_cast<int>(samples.size()); }
  double dt() const { return 2.0 * std::numbers::pi / size(); }

  static GroupLoop constant(Group g, int n, const GroupElement& h) {
    GroupLoop x(g, n);
    for (auto& s : x.samples) s = h;
    x.based = h.distance_to_identity() == 0.0;
    return x;
  }

  /// One-parameter subgroup t -> exp(t eta).
  static GroupLoop one_parameter(Group g, int n, const Coords& eta) {
    GroupLoop x(g, n);
    for (int j = 0; j < n; ++j) {
      const double t = 2.0 * std::numbers::pi * j / n;
      const Coords v{t * eta[0], t * eta[1], t * eta[2]};
      x.samples[j] = exp_coords(g, v.data());
    }
    x.based = true;
    return x;
  }

  void validate() const {
    if (!is_power_of_two(size())) throw InvalidInput("loop sample count must be a power of two");
    for (const auto& s : samples) {
      if (s.group != group) throw GroupMismatch();
      if (s.unitarity_defect() > 1e-10) throw InvalidInput("loop sample is not unitary");
    }
  }
};

/// Left translation (h.x)(t) = h x(t).
inline GroupLoop left_translate(const GroupElement& h, const GroupLoop& x) {
  GroupLoop y = x;
  for (auto& s : y.samples) s = keep_unitary(h * s);
  y.based = false;
  return y;
}

/// x(0)^{-1} x, the based representative of the left-translation orbit.
inline GroupLoop basepoint_normalize(const GroupLoop& x) {
  GroupLoop y = left_translate(x.samples.at(0).inverse(), x);
  y.samples[0] = GroupElement::identity(x.group);
  y.based = true;
  return y;
}

/// Right multiplication x_j exp(xi_j).
inline GroupLoop right_exp(const GroupLoop& x, const AlgebraLoop& xi, double scale = 1.0) {
  GroupLoop y = x;
  const int d = algebra_dim(x.group);
  for (int j = 0; j < x.size(); ++j) {
    Coords v{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a) v[a] = scale * xi.at(j)[a];
    y.samples[j] = keep_unitary(x.samples[j] * exp_coords(x.group, v.data()));
  }
  y.based = x.based && std::all_of(xi.at(0), xi.at(0) + d, [](double v) { return v == 0.0; });
  return y;
}

/// nu = x^{-1} dx/dt, spectral differentiation of the matrix entries followed
/// by projection onto the algebra.
inline AlgebraLoop loop_derivative(const GroupLoop& x, const Spectral& sp) {
  const int n = x.size();
  const int m = matrix_size(x.group);
  std::vector<Matrix> dx(n, Matrix::Zero(m, m));
  std::vector<double> re(n), im(n), dre(n), dim_(n);
  for (int p = 0; p < m; ++p)
    for (int q = 0; q < m; ++q) {
      for (int j = 0; j < n; ++j) {
        re[j] = x.samples[j].matrix(p, q).real();
        im[j] = x.samples[j].matrix(p, q).imag();
      }
      sp.derivative(re, dre);
      sp.derivative(im, dim_);
      for (int j = 0; j < n; ++j) dx[j](p, q) = Complex(dre[j], dim_[j]);
    }
  AlgebraLoop nu(x.group, n);
  for (int j = 0; j < n; ++j) {
    const Coords c = AlgebraElement::project_coords(x.group, x.samples[j].matrix.adjoint() * dx[j]);
    for (int a = 0; a < nu.dim(); ++a) nu.at(j)[a] = c[a];
  }
  return nu;
}

inline AlgebraLoop loop_derivative(const GroupLoop& x) {
  return loop_derivative(x, Spectral(x.size()));
}

/// Componentwise spectral derivative of an algebra loop.
inline AlgebraLoop derivative(const AlgebraLoop& v, const Spectral& sp) {
  AlgebraLoop out(v.group, v.n);
  std::vector<double> d(v.n);
  for (int a = 0; a < v.dim(); ++a) {
    sp.derivative(v.component(a), d);
    out.set_component(a, d);
  }
  return out;
}

/// Max-norm distance between two loops sample by sample.
inline double loop_distance(const GroupLoop& x, const GroupLoop& y) {
  if (x.size() != y.size()) throw InvalidInput("loops have different sample counts");
  double m = 0.0;
  for (int j = 0; j < x.size(); ++j)
    m = std::max(m, (x.samples[j].matrix - y.samples[j].matrix).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace gaugeflow
