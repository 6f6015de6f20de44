#include <random>

#include <catch_amalgamated.hpp>

#include "gaugeflow/morse.hpp"

using namespace gaugeflow;

namespace {

Generator gen(int id, int ind, double action, int manifold = -1) {
  Generator g;
  g.id = id;
  g.manifold = manifold < 0 ? id : manifold;
  g.ind_f = ind;
  g.action = action;
  g.name = "g" + std::to_string(id);
  return g;
}

F2Matrix from_rows(std::initializer_list<std::initializer_list<int>> rows) {
  const int r = static_cast<int>(rows.size()), c = static_cast<int>(rows.begin()->size());
  F2Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    int j = 0;
    for (int v : row) m.set(i, j++, v);
    ++i;
  }
  return m;
}

}  // namespace

TEST_CASE("F2 rank and kernel") {
  const F2Matrix m = from_rows({{1, 1, 0}, {0, 1, 1}, {1, 0, 1}});  // rows sum to zero
  CHECK(f2_rank(m) == 2);
  const F2Matrix z = f2_kernel(m);
  CHECK(z.cols == 1);
  CHECK((m * z).is_zero());
  CHECK(f2_rank(F2Matrix::identity(5)) == 5);
}

TEST_CASE("unit upper triangular inverse by hand") {
  const F2Matrix u = from_rows({{1, 1, 0}, {0, 1, 1}, {0, 0, 1}});
  const F2Matrix inv = from_rows({{1, 1, 1}, {0, 1, 1}, {0, 0, 1}});
  CHECK(u * inv == F2Matrix::identity(3));
  CHECK(detail::unit_upper_inverse(u) == inv);
}

TEST_CASE("homology of cell structures") {
  // S^2: one 0-cell, one 2-cell
  const auto s2 = boundary_from_counts({gen(0, 0, 0.0), gen(1, 2, 1.0)}, {});
  CHECK(homology_mod2(s2) == std::vector<int>{1, 0, 1});
  // T^2 minimal: all boundary counts even
  const auto t2 = boundary_from_counts({gen(0, 0, 0), gen(1, 1, 1), gen(2, 1, 1.5), gen(3, 2, 2)},
                                       {{1, 0, 2}, {2, 0, 2}, {3, 1, 2}, {3, 2, 2}});
  CHECK(homology_mod2(t2) == std::vector<int>{1, 2, 1});
  // RP^2: cells e0, e1, e2 with d e1 = 2 e0, d e2 = 2 e1; mod 2 homology (1,1,1)
  const auto rp2 = boundary_from_counts({gen(0, 0, 0), gen(1, 1, 1), gen(2, 2, 2)}, {{1, 0, 2}, {2, 1, 2}});
  CHECK(homology_mod2(rp2) == std::vector<int>{1, 1, 1});
  // height function on S^2 with an extra cancelling pair: max, saddle, two minima
  const auto pair = boundary_from_counts({gen(0, 0, 0), gen(1, 0, 0.2), gen(2, 1, 0.5), gen(3, 2, 1)},
                                         {{2, 0, 1}, {2, 1, 1}, {3, 2, 2}});
  CHECK(homology_mod2(pair) == std::vector<int>{1, 0, 1});
}

TEST_CASE("boundary_from_counts rejects bad input") {
  CHECK_THROWS_AS(boundary_from_counts({gen(0, 0, 0), gen(1, 2, 1)}, {{1, 0, 1}}), InvalidInput);
  CHECK_THROWS_AS(boundary_from_counts({gen(0, 0, 0), gen(0, 1, 1)}, {}), InvalidInput);
  CHECK_THROWS_AS(boundary_from_counts({gen(0, 0, 0)}, {{5, 0, 1}}), InvalidInput);
  // d^2 != 0: a 2-cell whose boundary is a single 1-cell with a single endpoint
  try {
    boundary_from_counts({gen(0, 0, 0), gen(1, 1, 1), gen(2, 2, 2)}, {{1, 0, 1}, {2, 1, 1}});
    FAIL("expected a throw");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("g2") != std::string::npos);
  }
}

TEST_CASE("unit upper triangular comparison map inverts and is an isomorphism") {
  const std::vector<Generator> g = {gen(0, 0, 0), gen(1, 1, 1), gen(2, 1, 1.5), gen(3, 2, 2)};
  const CascadeCountTable d = {{1, 0, 2}, {2, 0, 2}, {3, 1, 2}, {3, 2, 2}};
  const auto cm = boundary_from_counts(g, d), cp = boundary_from_counts(g, d);
  const ThetaMatrix th = theta_from_counts(cm, cp, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}, {2, 1, 1}, {3, 3, 1}});
  CHECK(verify_chain_map(th, cm, cp).ok);
  const InversionResult inv = action_order_and_invert(th, cm, cp);
  CHECK(inv.all_iso);
  for (const auto& [k, m] : inv.inverse) CHECK(m * inv.ordered.blocks.at(k) == F2Matrix::identity(m.rows));
}

TEST_CASE("subdiagonal entry is reported with its witness") {
  const std::vector<Generator> g = {gen(0, 1, 1.0), gen(1, 1, 2.0)};
  const auto cm = boundary_from_counts(g, {}), cp = boundary_from_counts(g, {});
  // maps the higher-action generator of C- onto the lower one of C+
  const ThetaMatrix th = theta_from_counts(cm, cp, {{0, 0, 1}, {1, 1, 1}, {0, 1, 1}});
  try {
    action_order_and_invert(th, cm, cp);
    FAIL("expected TriangularityViolation");
  } catch (const TriangularityViolation& e) {
    CHECK(e.degree == 1);
    CHECK(e.row == 1);
    CHECK(e.col == 0);
  }
}

TEST_CASE("random maps with a subdiagonal one never certify") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> bit(0, 1);
  const int n = 5;
  std::vector<Generator> g;
  for (int q = 0; q < n; ++q) g.push_back(gen(q, 0, q));
  const auto c = boundary_from_counts(g, {});
  for (int rep = 0; rep < 50; ++rep) {
    CascadeCountTable t;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) t.push_back({j, i, i == j ? 1 : (i < j ? bit(rng) : 0)});
    const int i = 1 + rep % (n - 1);
    t.push_back({i - 1, i, 1});  // one entry below the diagonal
    CHECK_THROWS_AS(action_order_and_invert(theta_from_counts(c, c, t), c, c), TriangularityViolation);
  }
}

TEST_CASE("chain map failure names the offending pair") {
  const std::vector<Generator> g = {gen(0, 0, 0), gen(1, 1, 1)};
  const auto cm = boundary_from_counts(g, {{1, 0, 1}});
  const auto cp = boundary_from_counts(g, {{1, 0, 1}});
  const ThetaMatrix th = theta_from_counts(cm, cp, {{1, 1, 1}});  // misses degree 0
  const ChainMapReport r = verify_chain_map(th, cm, cp);
  CHECK_FALSE(r.ok);
  REQUIRE(r.offending.size() == 1);
  CHECK(r.offending[0] == std::tuple<int, int, int>{1, 1, 0});
}
