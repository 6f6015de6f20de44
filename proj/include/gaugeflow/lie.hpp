#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "gaugeflow/errors.hpp"

namespace gaugeflow {

/// Matrix groups supported by the library. Both are realized as unitary
/// matrices; U(1) as 1x1, SU(2) as 2x2 with unit determinant.
enum class Group { U1, SU2 };

constexpr int algebra_dim(Group g) { return g == Group::U1 ? 1 : 3; }
constexpr int matrix_size(Group g) { return g == Group::U1 ? 1 : 2; }

inline std::string group_name(Group g) { return g == Group::U1 ? "U1" : "SU2"; }

inline Group parse_group(std::string_view s) {
  if (s == "U1" || s == "u1" || s == "U(1)") return Group::U1;
  if (s == "SU2" || s == "su2" || s == "SU(2)") return Group::SU2;
  throw InvalidInput("unknown group '" + std::string(s) + "'");
}

using Matrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

/// Algebra coordinates in the orthonormal basis returned by basis_element().
/// Only the first algebra_dim(g) entries are meaningful.
using Coords = std::array<double, 3>;

/// Orthonormal basis of the Lie algebra for <X,Y> = -Re tr(XY):
/// u(1): {i}; su(2): {i sigma_a / sqrt 2}.
inline Matrix basis_element(Group g, int a) {
  const Complex I(0.0, 1.0);
  if (g == Group::U1) {
    Matrix m(1, 1);
    m(0, 0) = I;
    return m;
  }
  const double s = 1.0 / std::numbers::sqrt2;
  Matrix m = Matrix::Zero(2, 2);
  switch (a) {
    case 0:  // i sigma_x
      m(0, 1) = I * s;
      m(1, 0) = I * s;
      break;
    case 1:  // i sigma_y
      m(0, 1) = Complex(s, 0.0);
      m(1, 0) = Complex(-s, 0.0);
      break;
    default:  // i sigma_z
      m(0, 0) = I * s;
      m(1, 1) = -I * s;
      break;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Coordinate kernels. These are the hot paths used by the grid solvers.

inline double inner_coords(Group g, const double* x, const double* y) {
  double acc = 0.0;
  for (int a = 0; a < algebra_dim(g); ++a) acc += x[a] * y[a];
  return acc;
}

/// out = [x, y]. In the orthonormal su(2) basis [e_a, e_b] = -sqrt2 eps_abc e_c.
inline void bracket_coords(Group g, const double* x, const double* y, double* out) {
  if (g == Group::U1) {
    out[0] = 0.0;
    return;
  }
  const double k = -std::numbers::sqrt2;
  const double c0 = x[1] * y[2] - x[2] * y[1];
  const double c1 = x[2] * y[0] - x[0] * y[2];
  const double c2 = x[0] * y[1] - x[1] * y[0];
  out[0] = k * c0;
  out[1] = k * c1;
  out[2] = k * c2;
}

/// Matrix of ad_x acting on coordinates (top-left algebra_dim block is used).
inline Eigen::Matrix3d ad_matrix(Group g, const double* x) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  if (g == Group::U1) return m;
  const double k = -std::numbers::sqrt2;
  // [x, y]_c = k (x cross y)_c
  m(0, 1) = -k * x[2];
  m(0, 2) = k * x[1];
  m(1, 0) = k * x[2];
  m(1, 2) = -k * x[0];
  m(2, 0) = -k * x[1];
  m(2, 1) = k * x[0];
  return m;
}

// ---------------------------------------------------------------------------

struct GroupElement;

struct AlgebraElement {
  Group group = Group::U1;
  Matrix matrix = Matrix::Zero(1, 1);

  static AlgebraElement zero(Group g) {
    return {g, Matrix::Zero(matrix_size(g), matrix_size(g))};
  }

  static AlgebraElement from_coords(Group g, std::span<const double> c) {
    AlgebraElement x = zero(g);
    for (int a = 0; a < algebra_dim(g); ++a) x.matrix += c[a] * basis_element(g, a);
    return x;
  }

  static AlgebraElement from_coords(Group g, const Coords& c) {
    return from_coords(g, std::span<const double>(c.data(), 3));
  }

  /// Orthogonal projection coordinates: c_a = -Re tr(e_a M). For a matrix
  /// that is not in the algebra this is the coordinate vector of its
  /// anti-Hermitian (traceless) part.
  Coords coords() const { return project_coords(group, matrix); }

  static Coords project_coords(Group g, const Matrix& m) {
    Coords c{0.0, 0.0, 0.0};
    if (g == Group::U1) {
      c[0] = m(0, 0).imag();
      return c;
    }
    const double s = 1.0 / std::numbers::sqrt2;
    // -Re tr(e_a M) written out for the Pauli basis.
    c[0] = s * (m(0, 1).imag() + m(1, 0).imag());
    c[1] = s * (m(0, 1).real() - m(1, 0).real());
    c[2] = s * (m(0, 0).imag() - m(1, 1).imag());
    return c;
  }

  AlgebraElement operator+(const AlgebraElement& o) const {
    if (o.group != group) throw GroupMismatch();
    return {group, matrix + o.matrix};
  }
  AlgebraElement operator-(const AlgebraElement& o) const {
    if (o.group != group) throw GroupMismatch();
    return {group, matrix - o.matrix};
  }
  AlgebraElement operator*(double s) const { return {group, matrix * s}; }
};

struct GroupElement {
  Group group = Group::U1;
  Matrix matrix = Matrix::Identity(1, 1);

  static GroupElement identity(Group g) {
    return {g, Matrix::Identity(matrix_size(g), matrix_size(g))};
  }

  GroupElement inverse() const { return {group, matrix.adjoint()}; }

  GroupElement operator*(const GroupElement& o) const {
    if (o.group != group) throw GroupMismatch();
    return {group, matrix * o.matrix};
  }

  /// ||g^dagger g - 1|| (Frobenius).
  double unitarity_defect() const {
    const auto n = matrix.rows();
    return (matrix.adjoint() * matrix - Matrix::Identity(n, n)).norm();
  }

  /// ||g - 1|| (Frobenius).
  double distance_to_identity() const {
    const auto n = matrix.rows();
    return (matrix - Matrix::Identity(n, n)).norm();
  }

  /// Nearest unitary (polar factor); for SU(2) the determinant is then
  /// rescaled back to 1.
  GroupElement reunitarized() const {
    Eigen::JacobiSVD<Matrix> svd(matrix, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix u = svd.matrixU() * svd.matrixV().adjoint();
    if (group == Group::SU2) {
      const Complex det = u.determinant();
      u /= std::sqrt(det);
    }
    return {group, u};
  }
};

inline constexpr double kUnitarityTolerance = 1e-12;

inline GroupElement keep_unitary(GroupElement g) {
  if (g.unitarity_defect() > kUnitarityTolerance) return g.reunitarized();
  return g;
}

// ---------------------------------------------------------------------------
// Matrix-level operations from the public surface.

inline AlgebraElement bracket(const AlgebraElement& x, const AlgebraElement& y) {
  if (x.group != y.group) throw GroupMismatch();
  return {x.group, x.matrix * y.matrix - y.matrix * x.matrix};
}

/// <X, Y> = -Re tr(XY). With u(1) as 1x1 matrices, <in, in> = n^2.
inline double inner(const AlgebraElement& x, const AlgebraElement& y) {
  if (x.group != y.group) throw GroupMismatch();
  return -(x.matrix * y.matrix).trace().real();
}

inline double norm(const AlgebraElement& x) { return std::sqrt(std::max(0.0, inner(x, x))); }

inline AlgebraElement adjoint_action(const GroupElement& g, const AlgebraElement& x) {
  if (x.group != g.group) throw GroupMismatch();
  return {x.group, g.matrix * x.matrix * g.matrix.adjoint()};
}

/// Exponential from coordinates (closed form, unitary up to rounding).
inline GroupElement exp_coords(Group g, const double* c) {
  if (g == Group::U1) {
    Matrix m(1, 1);
    m(0, 0) = std::polar(1.0, c[0]);
    return {g, m};
  }
  // X = i (v . sigma), v = c / sqrt2
  const double s = 1.0 / std::numbers::sqrt2;
  const double vx = c[0] * s, vy = c[1] * s, vz = c[2] * s;
  const double theta = std::sqrt(vx * vx + vy * vy + vz * vz);
  const double cs = std::cos(theta);
  const double sinc = theta < 1e-8 ? 1.0 - theta * theta / 6.0 : std::sin(theta) / theta;
  const Complex I(0.0, 1.0);
  Matrix m(2, 2);
  m(0, 0) = Complex(cs, 0.0) + I * sinc * vz;
  m(1, 1) = Complex(cs, 0.0) - I * sinc * vz;
  m(0, 1) = I * sinc * Complex(vx, -vy);
  m(1, 0) = I * sinc * Complex(vx, vy);
  return {g, m};
}

inline GroupElement exp_map(const AlgebraElement& x) {
  const Coords c = x.coords();
  return exp_coords(x.group, c.data());
}

/// Principal logarithm, in coordinates. Throws CutLocusError within
/// `cut_tol` of the cut locus (eigenvalue -1).
inline Coords log_coords(const GroupElement& g, double cut_tol = 1e-6) {
  Coords c{0.0, 0.0, 0.0};
  if (g.group == Group::U1) {
    const double theta = std::arg(g.matrix(0, 0));
    if (std::numbers::pi - std::abs(theta) < cut_tol)
      throw CutLocusError("log_map: U(1) element at the cut locus");
    c[0] = theta;
    return c;
  }
  const Matrix& m = g.matrix;
  const double cosv = 0.5 * (m(0, 0) + m(1, 1)).real();
  // anti-Hermitian part = i sin(theta) (n . sigma)
  const Matrix a = 0.5 * (m - m.adjoint());
  const double sx = a(1, 0).imag() + a(0, 1).imag();
  const double sy = a(0, 1).real() - a(1, 0).real();
  const double sz = a(0, 0).imag() - a(1, 1).imag();
  const double sxh = 0.5 * sx, syh = 0.5 * sy, szh = 0.5 * sz;
  const double sinv = std::sqrt(sxh * sxh + syh * syh + szh * szh);
  const double theta = std::atan2(sinv, cosv);
  if (std::numbers::pi - theta < cut_tol)
    throw CutLocusError("log_map: SU(2) element at the cut locus");
  const double scale = sinv < 1e-300 ? 1.0 : theta / sinv;
  c[0] = std::numbers::sqrt2 * sxh * scale;
  c[1] = std::numbers::sqrt2 * syh * scale;
  c[2] = std::numbers::sqrt2 * szh * scale;
  return c;
}

inline AlgebraElement log_map(const GroupElement& g, double cut_tol = 1e-6) {
  return AlgebraElement::from_coords(g.group, log_coords(g, cut_tol));
}

}  // namespace gaugeflow
