#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "sublab/config.hpp"
#include "sublab/errors.hpp"

using namespace sublab;
using nlohmann::json;

namespace {

double eval(const std::string& s, std::vector<double> x = {0.0, 0.0, 0.0}, double t = 0.0) {
  return Expression::parse(s, {"x", "y", "z"})(x, t);
}

json minimal_problem() {
  return json::parse(R"({
    "frame": "heisenberg",
    "box": {"lower": [-1, -1, -1], "upper": [1, 1, 1]},
    "dims": [5, 5, 5],
    "T": 0.01,
    "initial": "1 + x*y"
  })");
}

}  // namespace

TEST_CASE("expression arithmetic and precedence") {
  CHECK(eval("1 + 2 * 3") == 7.0);
  CHECK(eval("(1 + 2) * 3") == 9.0);
  CHECK(eval("2 ^ 3 ^ 2") == 512.0);
  CHECK(eval("-2 ^ 2") == -4.0);
  CHECK(eval("8 / 4 / 2") == 1.0);
  CHECK(eval("1 - 2 - 3") == -4.0);
  CHECK(eval("2e-1 * 10") == doctest::Approx(2.0));
  CHECK(eval("pi") == std::numbers::pi);
  CHECK(eval("e") == std::numbers::e);
}

TEST_CASE("expression variables, time and functions") {
  CHECK(eval("x + 2*y + 3*z", {1.0, 2.0, 3.0}) == 14.0);
  CHECK(eval("t * x", {2.0, 0.0, 0.0}, 0.5) == 1.0);
  CHECK(eval("exp(-t) * cos(x + z)", {0.3, 0.0, 0.4}, 0.2) == doctest::Approx(std::exp(-0.2) * std::cos(0.7)));
  CHECK(eval("min(x, y) + max(x, y)", {1.0, -4.0, 0.0}) == -3.0);
  CHECK(eval("sqrt(abs(x))", {-9.0, 0.0, 0.0}) == 3.0);
  CHECK(eval("tanh(0) + log(1) + sin(0) + tan(0)") == 0.0);
}

TEST_CASE("expression errors carry positions") {
  auto pos_of = [](const std::string& s) {
    try {
      Expression::parse(s, {"x", "y", "z"});
    } catch (const ParseError& e) {
      return static_cast<long>(e.position());
    }
    return -1L;
  };
  CHECK(pos_of("1 + w") == 4);
  CHECK(pos_of("foo(x)") == 0);
  CHECK(pos_of("(1 + x") == 6);
  CHECK(pos_of("1 +") == 3);
  CHECK(pos_of("x y") == 2);
  CHECK(pos_of("max(1)") >= 5);
  CHECK(pos_of("x + 1") == -1);
}

TEST_CASE("problem config defaults and overrides") {
  json j = minimal_problem();
  ProblemConfig pc = problem_from_json(j);
  CHECK(pc.frame.dim == 3);
  CHECK(pc.problem.lattice.size() == 125);
  CHECK(pc.scheme.mode == TimeMode::explicit_euler);
  CHECK(pc.scheme.stencil == StencilKind::nested);
  CHECK(pc.problem.boundary_kind == BoundaryKind::dirichlet);
  CHECK_FALSE(pc.exact.has_value());

  j["scheme"] = {{"mode", "implicit"}, {"stencil", "monotone"}, {"max_iters", 7}};
  j["tau"] = 0.001;
  j["boundary_kind"] = "periodic";
  j["exact"] = "1 + x*y";
  pc = problem_from_json(j);
  CHECK(pc.scheme.mode == TimeMode::implicit_euler);
  CHECK(pc.scheme.stencil == StencilKind::monotone);
  CHECK(pc.scheme.max_iters == 7);
  CHECK(pc.scheme.tau == 0.001);
  CHECK(pc.problem.boundary_kind == BoundaryKind::periodic);
  REQUIRE(pc.exact.has_value());
  const std::vector<double> p{0.5, 0.5, 0.0};
  CHECK((*pc.exact)(p, 0.0) == 1.25);
}

TEST_CASE("problem config rejections") {
  auto with = [](const char* key, json v) {
    json j = minimal_problem();
    j[key] = std::move(v);
    return j;
  };
  CHECK_THROWS_AS(problem_from_json(with("colour", "red")), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("dims", {5, 5})), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("tau", "soon")), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("tau", -1.0)), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("boundary_kind", "neumann")), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("scheme", {{"mode", "rk4"}})), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("flux", {{"kind", "matrix"}, {"matrix", {{1, 0}, {0, 1}}}})), ConfigError);
  CHECK_THROWS_AS(problem_from_json(with("initial", "1 + q")), ParseError);
  CHECK_THROWS_AS(problem_from_json(with("frame", "no_such_frame")), ConfigError);
  json missing = minimal_problem();
  missing.erase("T");
  CHECK_THROWS_AS(problem_from_json(missing), ConfigError);
}

TEST_CASE("sweep config validation") {
  json j = json::parse(R"({"frame": "heisenberg", "rhos": [0.1]})");
  SweepConfig c = sweep_from_json(j);
  CHECK(c.epsilons == std::vector<double>{0.0});
  CHECK(c.center == std::vector<double>{0.0, 0.0, 0.0});
  CHECK(c.harnack_factor == 2.0);
  j["time_factor"] = 4.0;
  CHECK_THROWS_AS(sweep_from_json(j), ConfigError);
  j.erase("time_factor");
  j["rhos"] = json::array();
  CHECK_THROWS_AS(sweep_from_json(j), ConfigError);
  j["rhos"] = {0.1};
  j["factors"] = {{"harnak", 2.0}};
  CHECK_THROWS_AS(sweep_from_json(j), ConfigError);
}
