#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "gaugeflow/errors.hpp"

namespace gaugeflow {

// Mod 2 chain complexes of Morse-Bott functions with cascades, and the
// degree-preserving comparison map between two of them.

struct Generator {
  int id = 0;
  int manifold = 0;  // critical manifold id
  int ind_f = 0;
  int ind_h = 0;
  double action = 0.0;  // value of f
  double h_value = 0.0;
  std::string name;

  int ind() const { return ind_f + ind_h; }
};

// ---------------------------------------------------------------------------
// Dense F2 matrices. Small: generator counts here are in the tens.

struct F2Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> a;

  F2Matrix() = default;
  F2Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0) {}

  static F2Matrix identity(int n) {
    F2Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.set(i, i, 1);
    return m;
  }

  std::uint8_t operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }
  void set(int i, int j, int v) { a[static_cast<size_t>(i) * cols + j] = static_cast<std::uint8_t>(v & 1); }
  void flip(int i, int j) { a[static_cast<size_t>(i) * cols + j] ^= 1; }

  bool is_zero() const {
    return std::all_of(a.begin(), a.end(), [](std::uint8_t v) { return v == 0; });
  }
  bool operator==(const F2Matrix& o) const { return rows == o.rows && cols == o.cols && a == o.a; }

  F2Matrix operator*(const F2Matrix& o) const {
    if (cols != o.rows) throw InvalidInput("F2Matrix: shape mismatch in product");
    F2Matrix m(rows, o.cols);
    for (int i = 0; i < rows; ++i)
      for (int k = 0; k < cols; ++k)
        if ((*this)(i, k))
          for (int j = 0; j < o.cols; ++j) m.a[static_cast<size_t>(i) * o.cols + j] ^= o(k, j);
    return m;
  }

  F2Matrix operator+(const F2Matrix& o) const {
    if (rows != o.rows || cols != o.cols) throw InvalidInput("F2Matrix: shape mismatch in sum");
    F2Matrix m = *this;
    for (size_t q = 0; q < a.size(); ++q) m.a[q] ^= o.a[q];
    return m;
  }

  F2Matrix permuted(const std::vector<int>& row_perm, const std::vector<int>& col_perm) const {
    F2Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) m.set(i, j, (*this)(row_perm[i], col_perm[j]));
    return m;
  }
};

/// Rank by Gaussian elimination.
inline int f2_rank(F2Matrix m) {
  int rank = 0;
  for (int c = 0; c < m.cols && rank < m.rows; ++c) {
    int piv = -1;
    for (int r = rank; r < m.rows; ++r)
      if (m(r, c)) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    if (piv != rank)
      for (int j = 0; j < m.cols; ++j) {
        const auto t = m(piv, j);
        m.set(piv, j, m(rank, j));
        m.set(rank, j, t);
      }
    for (int r = 0; r < m.rows; ++r)
      if (r != rank && m(r, c))
        for (int j = 0; j < m.cols; ++j) m.a[static_cast<size_t>(r) * m.cols + j] ^= m(rank, j);
    ++rank;
  }
  return rank;
}

/// Basis of ker m as the columns of the returned matrix.
inline F2Matrix f2_kernel(const F2Matrix& m) {
  F2Matrix e = m;
  std::vector<int> pivot_col;
  int rank = 0;
  for (int c = 0; c < e.cols && rank < e.rows; ++c) {
    int piv = -1;
    for (int r = rank; r < e.rows; ++r)
      if (e(r, c)) {
        piv = r;
        break;
      }
    if (piv < 0) continue;
    if (piv != rank)
      for (int j = 0; j < e.cols; ++j) {
        const auto t = e(piv, j);
        e.set(piv, j, e(rank, j));
        e.set(rank, j, t);
      }
    for (int r = 0; r < e.rows; ++r)
      if (r != rank && e(r, c))
        for (int j = 0; j < e.cols; ++j) e.a[static_cast<size_t>(r) * e.cols + j] ^= e(rank, j);
    pivot_col.push_back(c);
    ++rank;
  }
  std::vector<int> is_pivot(m.cols, -1);
  for (int r = 0; r < rank; ++r) is_pivot[pivot_col[r]] = r;
  std::vector<int> free_cols;
  for (int c = 0; c < m.cols; ++c)
    if (is_pivot[c] < 0) free_cols.push_back(c);
  F2Matrix k(m.cols, static_cast<int>(free_cols.size()));
  for (size_t q = 0; q < free_cols.size(); ++q) {
    const int f = free_cols[q];
    k.set(f, static_cast<int>(q), 1);
    for (int r = 0; r < rank; ++r)
      if (e(r, f)) k.set(pivot_col[r], static_cast<int>(q), 1);
  }
  return k;
}

inline F2Matrix hcat(const F2Matrix& x, const F2Matrix& y) {
  if (x.rows != y.rows) throw InvalidInput("hcat: row mismatch");
  F2Matrix m(x.rows, x.cols + y.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) m.set(i, j, x(i, j));
    for (int j = 0; j < y.cols; ++j) m.set(i, x.cols + j, y(i, j));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Complexes.

/// Mod 2 count of a moduli space, with where it came from.
struct CascadeCount {
  int from = 0;  // generator id x-
  int to = 0;    // generator id x+
  int count = 0;
  std::string provenance = "analytic";  // or "shooting"
};
using CascadeCountTable = std::vector<CascadeCount>;

struct ChainComplexMod2 {
  std::vector<Generator> generators;
  // Generator positions (into `generators`) of each degree, in insertion order.
  std::map<int, std::vector<int>> degree;
  // boundary[k]: C_k -> C_{k-1}; rows index degree k-1, columns degree k.
  std::map<int, F2Matrix> boundary;

  int max_degree() const { return degree.empty() ? -1 : degree.rbegin()->first; }
  int rank(int k) const {
    auto it = degree.find(k);
    return it == degree.end() ? 0 : static_cast<int>(it->second.size());
  }
  const Generator& generator(int pos) const { return generators.at(pos); }

  F2Matrix boundary_matrix(int k) const {
    auto it = boundary.find(k);
    if (it != boundary.end()) return it->second;
    return F2Matrix(rank(k - 1), rank(k));
  }
};

namespace detail {

inline std::map<int, std::pair<int, int>> locate(const ChainComplexMod2& c) {
  std::map<int, std::pair<int, int>> where;  // id -> (degree, row/col)
  for (const auto& [k, list] : c.degree)
    for (size_t q = 0; q < list.size(); ++q) where[c.generators[list[q]].id] = {k, static_cast<int>(q)};
  return where;
}

}  // namespace detail

/// Assembles the boundary from mod 2 counts and checks d^2 = 0.
inline ChainComplexMod2 boundary_from_counts(const std::vector<Generator>& gens,
                                             const CascadeCountTable& counts) {
  ChainComplexMod2 c;
  c.generators = gens;
  std::map<int, int> seen;
  for (size_t q = 0; q < gens.size(); ++q) {
    if (gens[q].ind() < 0) throw InvalidInput("generator '" + gens[q].name + "' has negative index");
    if (!seen.emplace(gens[q].id, 0).second)
      throw InvalidInput("duplicate generator id " + std::to_string(gens[q].id));
    c.degree[gens[q].ind()].push_back(static_cast<int>(q));
  }
  for (const auto& [k, list] : c.degree)
    if (k > 0) c.boundary[k] = F2Matrix(c.rank(k - 1), c.rank(k));
  const auto where = detail::locate(c);
  for (const CascadeCount& n : counts) {
    const auto a = where.find(n.from), b = where.find(n.to);
    if (a == where.end() || b == where.end()) throw InvalidInput("count refers to an unknown generator");
    const int ka = a->second.first, kb = b->second.first;
    if (ka - kb != 1)
      throw InvalidInput("count between generators " + std::to_string(n.from) + " and " +
                         std::to_string(n.to) + " whose index difference is not 1");
    if (n.count & 1) c.boundary[ka].flip(b->second.second, a->second.second);
  }
  for (const auto& [k, dk] : c.boundary) {
    auto next = c.boundary.find(k - 1);
    if (next == c.boundary.end()) continue;
    const F2Matrix sq = next->second * dk;
    for (int i = 0; i < sq.rows; ++i)
      for (int j = 0; j < sq.cols; ++j)
        if (sq(i, j)) {
          const Generator& top = c.generators[c.degree.at(k)[j]];
          const Generator& bottom = c.generators[c.degree.at(k - 2)[i]];
          throw InvalidInput("boundary squares to nonzero: <d d " + top.name + ", " + bottom.name + "> = 1");
        }
  }
  return c;
}

/// Betti numbers b_0..b_max mod 2.
inline std::vector<int> homology_mod2(const ChainComplexMod2& c) {
  const int top = c.max_degree();
  std::vector<int> b(std::max(0, top + 1), 0);
  long euler_gens = 0, euler_betti = 0;
  for (int k = 0; k <= top; ++k) {
    const int rk = k > 0 ? f2_rank(c.boundary_matrix(k)) : 0;
    const int rk1 = f2_rank(c.boundary_matrix(k + 1));
    b[k] = c.rank(k) - rk - rk1;
    euler_gens += (k % 2 ? -1 : 1) * c.rank(k);
    euler_betti += (k % 2 ? -1 : 1) * b[k];
  }
  if (euler_gens != euler_betti) throw NumericalFailure("homology_mod2: Euler characteristic mismatch");
  return b;
}

// ---------------------------------------------------------------------------
// Comparison map Theta: C^- -> C^+.

struct ThetaMatrix {
  // blocks[k]: rows index degree-k generators of C^+, columns those of C^-.
  std::map<int, F2Matrix> blocks;
  // Orderings after action_order_and_invert (positions within the degree).
  std::map<int, std::vector<int>> row_order;
  std::map<int, std::vector<int>> col_order;

  F2Matrix block(int k, int rows, int cols) const {
    auto it = blocks.find(k);
    return it == blocks.end() ? F2Matrix(rows, cols) : it->second;
  }
};

inline ThetaMatrix theta_from_counts(const ChainComplexMod2& cm, const ChainComplexMod2& cp,
                                     const CascadeCountTable& hybrid) {
  ThetaMatrix t;
  std::map<int, bool> degrees;
  for (const auto& kv : cm.degree) degrees[kv.first] = true;
  for (const auto& kv : cp.degree) degrees[kv.first] = true;
  for (const auto& kv : degrees) t.blocks[kv.first] = F2Matrix(cp.rank(kv.first), cm.rank(kv.first));
  const auto wm = detail::locate(cm), wp = detail::locate(cp);
  for (const CascadeCount& n : hybrid) {
    const auto a = wm.find(n.from);
    const auto b = wp.find(n.to);
    if (a == wm.end() || b == wp.end()) throw InvalidInput("hybrid count refers to an unknown generator");
    if (a->second.first != b->second.first)
      throw InvalidInput("hybrid count between generators of different index (" +
                         std::to_string(n.from) + " -> " + std::to_string(n.to) + ")");
    if (n.count & 1) t.blocks[a->second.first].flip(b->second.second, a->second.second);
  }
  return t;
}

struct ChainMapReport {
  bool ok = true;
  std::map<int, bool> per_degree;
  // (degree k, C^- generator id in degree k, C^+ generator id in degree k-1)
  std::vector<std::tuple<int, int, int>> offending;
};

/// Checks Theta_{k-1} d^-_k = d^+_k Theta_k in every degree.
inline ChainMapReport verify_chain_map(const ThetaMatrix& theta, const ChainComplexMod2& cm,
                                       const ChainComplexMod2& cp) {
  ChainMapReport r;
  const int top = std::max(cm.max_degree(), cp.max_degree());
  for (int k = 1; k <= top; ++k) {
    const F2Matrix tk = theta.block(k, cp.rank(k), cm.rank(k));
    const F2Matrix tk1 = theta.block(k - 1, cp.rank(k - 1), cm.rank(k - 1));
    const F2Matrix lhs = tk1 * cm.boundary_matrix(k);
    const F2Matrix rhs = cp.boundary_matrix(k) * tk;
    const F2Matrix diff = lhs + rhs;
    const bool ok = diff.is_zero();
    r.per_degree[k] = ok;
    r.ok = r.ok && ok;
    for (int i = 0; i < diff.rows; ++i)
      for (int j = 0; j < diff.cols; ++j)
        if (diff(i, j))
          r.offending.emplace_back(k, cm.generators[cm.degree.at(k)[j]].id,
                                   cp.generators[cp.degree.at(k - 1)[i]].id);
  }
  if (top >= 0 && !r.per_degree.count(0)) r.per_degree[0] = true;
  return r;
}

struct TriangularityViolation : InvalidInput {
  int degree, row, col;
  TriangularityViolation(int k, int i, int j, const std::string& what)
      : InvalidInput(what), degree(k), row(i), col(j) {}
};

struct InversionResult {
  ThetaMatrix ordered;                 // Theta in action order, unit upper triangular
  std::map<int, F2Matrix> inverse;     // per degree, same ordering
  std::map<int, bool> homology_iso;    // induced map on H_k bijective
  bool all_iso = true;
};

namespace detail {

// Positions within degree k sorted by (action, manifold, h_value), stable.
inline std::vector<int> action_order(const ChainComplexMod2& c, int k, double scale) {
  const int n = c.rank(k);
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  auto gen = [&](int q) -> const Generator& { return c.generators[c.degree.at(k)[q]]; };
  std::stable_sort(p.begin(), p.end(), [&](int x, int y) {
    const Generator &a = gen(x), &b = gen(y);
    if (scale * a.action != scale * b.action) return scale * a.action < scale * b.action;
    if (a.manifold != b.manifold) return a.manifold < b.manifold;
    return a.h_value < b.h_value;
  });
  return p;
}

// Inverse of a unit upper triangular matrix by back substitution.
inline F2Matrix unit_upper_inverse(const F2Matrix& u) {
  const int n = u.rows;
  F2Matrix inv = F2Matrix::identity(n);
  for (int col = 0; col < n; ++col)
    for (int i = col - 1; i >= 0; --i) {
      int acc = 0;
      for (int j = i + 1; j <= col; ++j) acc ^= u(i, j) & inv(j, col);
      inv.set(i, col, acc);
    }
  return inv;
}

}  // namespace detail

/// Orders both bases by action (C^+ actions scaled by energy_scale so paired
/// generators have equal action), checks that Theta is unit upper
/// triangular, inverts it and checks the induced map on homology.
inline InversionResult action_order_and_invert(const ThetaMatrix& theta, const ChainComplexMod2& cm,
                                               const ChainComplexMod2& cp, double energy_scale = 1.0,
                                               double action_tol = 1e-9) {
  InversionResult res;
  const int top = std::max(cm.max_degree(), cp.max_degree());
  for (int k = 0; k <= top; ++k) {
    const int n = cm.rank(k);
    if (cp.rank(k) != n)
      throw InvalidInput("action_order_and_invert: degree " + std::to_string(k) + " ranks differ");
    const std::vector<int> pm = detail::action_order(cm, k, 1.0);
    const std::vector<int> pp = detail::action_order(cp, k, energy_scale);
    for (int q = 0; q < n; ++q) {
      const double am = cm.generators[cm.degree.at(k)[pm[q]]].action;
      const double ap = energy_scale * cp.generators[cp.degree.at(k)[pp[q]]].action;
      if (std::abs(am - ap) > action_tol * std::max(1.0, std::abs(am)))
        throw InvalidInput("action_order_and_invert: paired generators in degree " + std::to_string(k) +
                           " have different actions");
    }
    const F2Matrix t = theta.block(k, n, n).permuted(pp, pm);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const int want = i == j ? 1 : 0;
        if (t(i, j) != want) {
          const int id_p = cp.generators[cp.degree.at(k)[pp[i]]].id;
          const int id_m = cm.generators[cm.degree.at(k)[pm[j]]].id;
          throw TriangularityViolation(
              k, i, j,
              "Theta is not unit upper triangular in degree " + std::to_string(k) + ": entry (" +
                  std::to_string(i) + "," + std::to_string(j) + ") = " + std::to_string(t(i, j)) +
                  " between C- generator " + std::to_string(id_m) + " and C+ generator " + std::to_string(id_p));
        }
      }
    res.ordered.blocks[k] = t;
    res.ordered.row_order[k] = pp;
    res.ordered.col_order[k] = pm;
    res.inverse[k] = detail::unit_upper_inverse(t);
    if (!(res.inverse[k] * t == F2Matrix::identity(n)))
      throw NumericalFailure("action_order_and_invert: back substitution failed");
  }

  // Induced map on homology: Theta maps Z^-_k into Z^+_k; it is an
  // isomorphism iff the images of a basis of H^-_k stay independent modulo
  // B^+_k and the dimensions agree.
  const std::vector<int> bm = homology_mod2(cm), bp = homology_mod2(cp);
  for (int k = 0; k <= top; ++k) {
    const int betti_m = k < static_cast<int>(bm.size()) ? bm[k] : 0;
    const int betti_p = k < static_cast<int>(bp.size()) ? bp[k] : 0;
    const F2Matrix tk = theta.block(k, cp.rank(k), cm.rank(k));
    const F2Matrix zm = f2_kernel(cm.boundary_matrix(k));
    const F2Matrix bplus = cp.boundary_matrix(k + 1);
    const int rb = f2_rank(bplus);
    const int r_img = f2_rank(hcat(bplus, tk * zm)) - rb;  // dim of image in H^+_k
    const bool iso = betti_m == betti_p && r_img == betti_p;
    res.homology_iso[k] = iso;
    res.all_iso = res.all_iso && iso;
  }
  return res;
}

}  // namespace gaugeflow
