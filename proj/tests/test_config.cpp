#include "chainmpc/config.hpp"

#include <doctest.h>

#include <string>

using namespace chainmpc;

TEST_CASE("default configuration values") {
  const RunConfig c = default_config();
  CHECK(c.sim.ocp.N == 30);
  CHECK(c.sim.ocp.Ts == 0.01);
  CHECK(c.sim.plant_dt == 0.005);
  CHECK(c.sim.duration == 12.0);
  CHECK(c.sim.ocp.nominal.m1 == 0.457);
  CHECK(c.sim.ocp.nominal.l2 == 0.942);
  CHECK(c.sim.ocp.nominal.J1 == 0.123);
  CHECK(c.sim.ocp.boxes.fR_max == 20.0);
  CHECK(c.sim.ocp.eps_s == 1e-12);
  CHECK(c.sim.ocp.uncertainty.bounds(dp::l1) == 0.24);
  CHECK(c.mc.box.bounds == c.sim.ocp.uncertainty.bounds);
  CHECK(c.mc.eps_tol == 1e-3);
  CHECK(rad2deg(c.sim.ocp.dphi_min) == doctest::Approx(30.0));
  CHECK(rad2deg(c.sim.e_phi0(0)) == doctest::Approx(-8.0));
  CHECK(c.sim.ellipse.zc == 1.05);
}

TEST_CASE("weights given per pair are expanded") {
  const RunConfig c = parse_config(R"({"ocp": {"Q": [5, 1, 0.1, 0.1], "Q_N": [50, 10]}})");
  CHECK(c.sim.ocp.Q(0) == 5.0);
  CHECK(c.sim.ocp.Q(1) == 5.0);
  CHECK(c.sim.ocp.Q(3) == 1.0);
  CHECK(c.sim.ocp.Q(7) == 0.1);
  CHECK(c.sim.ocp.Q_N(1) == 50.0);
  CHECK(c.sim.ocp.Q_N(2) == 10.0);
  const RunConfig full = parse_config(R"({"ocp": {"Q": [1, 2, 3, 4, 5, 6, 7, 8]}})");
  CHECK(full.sim.ocp.Q(6) == 7.0);
  CHECK_THROWS_AS(parse_config(R"({"ocp": {"Q": [1, 2, 3]}})"), ConfigError);
}

TEST_CASE("unknown keys and wrong types name the key") {
  try {
    parse_config(R"({"ocp": {"Nx": 3}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("ocp.Nx") != std::string::npos);
  }
  try {
    parse_config(R"({"simulation": {"duration": "long"}})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("simulation.duration") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"ocp": {"N": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"montecarlo": {"controllers": ["robust"]}})"), ConfigError);
}

TEST_CASE("dumped configuration parses back to the same document") {
  RunConfig c = default_config();
  c.sim.ocp.N = 12;
  c.mc.seed = 77;
  c.sim.p_true(2) = 0.1;
  c.sim.ellipse.ax = 0.5;
  const std::string text = dump_config(c);
  const RunConfig back = parse_config(text);
  CHECK(dump_config(back) == text);
  CHECK(back.sim.ocp.N == 12);
  CHECK(back.mc.seed == 77);
  CHECK(back.sim.p_true(2) == 0.1);
}

TEST_CASE("uncertainty section drives both the controller and the sampler") {
  const RunConfig c = parse_config(R"({"uncertainty": {"delta_m_max": [0.1, 0.1]}})");
  CHECK(c.sim.ocp.uncertainty.bounds(dp::m1) == 0.1);
  CHECK(c.mc.box.bounds(dp::m2) == 0.1);
  CHECK(c.mc.box.bounds(dp::J1) == 0.25);
}
