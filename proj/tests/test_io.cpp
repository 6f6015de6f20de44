#include <catch_amalgamated.hpp>

#include "gaugeflow/config.hpp"
#include "gaugeflow/io.hpp"
#include "gaugeflow/sphere.hpp"

using namespace gaugeflow;

TEST_CASE("shortest round-trip formatting") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) CHECK(parse_double(fmt(v)) == v);
  CHECK(fmt(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("1.0x"), InvalidInput);
}

TEST_CASE("field checkpoint restores bit-exactly") {
  const RadialGaugeField u = random_connection(SphereGrid(8, 16), Group::SU2, 3, 1, 2.0, 0.1);
  const std::string text = field_checkpoint(u, 1.25, 3);
  CHECK(text.find("energy_identity_C = 0.5") != std::string::npos);
  const RadialGaugeField v = read_field_checkpoint(text);
  CHECK(v.grid == u.grid);
  CHECK(v.data == u.data);
  CHECK(field_checkpoint(v, 1.25, 3) == text);
}

TEST_CASE("loop checkpoint restores bit-exactly") {
  const GroupLoop x = GroupLoop::one_parameter(Group::SU2, 16, {0.1, 0.7, -0.3});
  const GroupLoop y = read_loop_checkpoint(loop_checkpoint(x));
  REQUIRE(y.size() == x.size());
  for (int j = 0; j < x.size(); ++j) CHECK(y.samples[j].matrix == x.samples[j].matrix);
}

TEST_CASE("complex and theta JSON round trip") {
  std::vector<Generator> g(3);
  for (int q = 0; q < 3; ++q) {
    g[q].id = q;
    g[q].manifold = q;
    g[q].ind_f = q;
    g[q].action = q * 0.5;
    g[q].name = "c" + std::to_string(q);
  }
  const auto c = boundary_from_counts(g, {{1, 0, 2}, {2, 1, 2}});
  const auto back = complex_from_json(nlohmann::json::parse(complex_json(c).dump()));
  CHECK(homology_mod2(back) == homology_mod2(c));
  CHECK(back.boundary_matrix(2) == c.boundary_matrix(2));
  const auto th = theta_from_counts(c, c, {{0, 0, 1}, {1, 1, 1}, {2, 2, 1}});
  const auto th2 = theta_from_json(nlohmann::json::parse(theta_json(th).dump()));
  for (const auto& [k, m] : th.blocks) CHECK(th2.blocks.at(k) == m);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(
      "# comment\n"
      "kind = flow-ym\n"
      "group = SU2   # trailing comment\n"
      "class = 1\n"
      "n_t = 128\n"
      "seed = 42\n");
  CHECK(c.kind == "flow-ym");
  CHECK(c.group == Group::SU2);
  CHECK(c.n_t == 128);
  REQUIRE(c.seed.has_value());
  CHECK(*c.seed == 42);
  CHECK_NOTHROW(validate(c));

  CHECK_THROWS_AS(parse_config("kind = flow-ym\nkind = morse\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("colour = blue\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("n_t = 1.5\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("just words\n"), InvalidInput);
  CHECK_THROWS_AS(parse_config("seed = -3\n"), InvalidInput);
  CHECK_THROWS_AS(validate(parse_config("n_t = 100\n")), InvalidInput);
  CHECK_THROWS_AS(validate(parse_config("kind = nonsense\n")), InvalidInput);
}
