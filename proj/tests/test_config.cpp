#include "doctest.h"

#include <sstream>

#include "horolab/config.hpp"

using namespace horolab;

TEST_CASE("defaults and dump round trip") {
  Config c;
  CHECK_NOTHROW(c.validate());
  c.set("tol.tol_eq", "2.5e-8");
  c.set("metric.ode_steps", "128");
  c.set("seeds.default", "42");
  std::istringstream is(c.dump());
  const Config back = Config::parse(is);
  CHECK(back.tol_eq == 2.5e-8);
  CHECK(back.ode_steps == 128);
  CHECK(back.seed == 42);
  CHECK(back.dump() == c.dump());
  CHECK(back.metric_options().newton_tol == back.ode_tol);
}

TEST_CASE("comments and blanks") {
  std::istringstream is("# header\n\n  enum.max_ball_size = 5000   # trailing\ngroup.preset=bolza\n");
  const Config c = Config::parse(is);
  CHECK(c.max_ball_size == 5000);
  CHECK(c.fuchsian_options().max_ball_size == 5000);
  CHECK(c.make_group().generator_count() == 4);
}

TEST_CASE("errors name the key") {
  Config c;
  try {
    c.set("tol.nonsense", "1");
    FAIL("no throw");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("tol.nonsense") != std::string::npos);
  }
  CHECK_THROWS_AS(c.set("metric.ode_steps", "many"), ConfigError);
  std::istringstream neg("tol.tol_det = -1\n");
  CHECK_THROWS_AS(Config::parse(neg), ConfigError);
  std::istringstream zero("tol.ode_tol = 0\n");
  CHECK_THROWS_AS(Config::parse(zero), ConfigError);
  std::istringstream junk("just words\n");
  CHECK_THROWS_AS(Config::parse(junk), ConfigError);
  CHECK_THROWS_AS(Config::load_file("/nonexistent/horolab.conf"), ConfigError);
  Config g;
  g.group_preset = "klein";
  CHECK_THROWS(g.make_group());
  g.group_preset = "file:/nonexistent/group.txt";
  CHECK_THROWS(g.make_group());
}
