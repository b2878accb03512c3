#include <cmath>
#include <sstream>

#include "doctest.h"
#include "sublab/errors.hpp"
#include "sublab/lattice.hpp"

using namespace sublab;

TEST_CASE("ravel and unravel are inverse") {
  Lattice lat(Box({0, 0, 0}, {1, 2, 3}), {3, 4, 5});
  CHECK(lat.size() == 60);
  std::size_t m[3];
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat.unravel(i, m);
    CHECK(lat.ravel(m) == i);
  }
  CHECK(lat.stride(2) == 1);
  CHECK(lat.stride(0) == 20);
}

TEST_CASE("quadrature weights integrate constants and linear functions exactly") {
  Lattice lat(Box({-1, 0}, {1, 0.5}), {9, 5});
  GridFunction one(lat, 1.0);
  CHECK(one.integral() == doctest::Approx(1.0).epsilon(1e-14));
  auto lin = GridFunction::sample(lat, [](std::span<const double> x) { return 3 * x[0] + x[1]; });
  CHECK(lin.integral() == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("multilinear interpolation is exact for multilinear data") {
  Lattice lat(Box({0, 0}, {1, 1}), {5, 7});
  auto f = [](std::span<const double> x) { return 1 + 2 * x[0] - x[1] + 0.5 * x[0] * x[1]; };
  auto g = GridFunction::sample(lat, f);
  std::vector<double> p{0.37, 0.91};
  CHECK(g.interpolate(p) == doctest::Approx(f(p)).epsilon(1e-14));
  std::vector<double> corner{1.0, 1.0};
  CHECK(g.interpolate(corner) == doctest::Approx(f(corner)));
  std::vector<double> out{1.5, 0.0};
  CHECK_THROWS_AS(g.interpolate(out), DomainError);
}

TEST_CASE("binary round trip is bit-identical") {
  Lattice lat(Box({-0.5, 0}, {0.5, 1}), {4, 3});
  auto g = GridFunction::sample(lat, [](std::span<const double> x) { return std::sin(x[0]) * std::exp(x[1]); });
  std::stringstream ss;
  write_binary(ss, g);
  GridFunction back = read_grid_function(ss);
  CHECK(back.lattice() == lat);
  CHECK(back.values() == g.values());

  SpaceTimeGridFunction st({g, g, g}, 0.25, 0.125);
  std::stringstream s2;
  write_binary(s2, st);
  auto st2 = read_space_time(s2);
  CHECK(st2.slice_count() == 3);
  CHECK(st2.t0() == 0.25);
  CHECK(st2.tau() == 0.125);
  CHECK(st2.slice(2).values() == g.values());
}

TEST_CASE("binary header layout") {
  Lattice lat(Box({0}, {1}), {2});
  GridFunction g(lat, 7.0);
  std::stringstream ss;
  write_binary(ss, g);
  std::string s = ss.str();
  CHECK(s.size() == 4 + 4 + 4 + 8 + 8 + 8 + 2 * 8);
  CHECK(s.substr(0, 4) == "SLGF");
}

TEST_CASE("csv output") {
  Lattice lat(Box({0, 0}, {1, 1}), {2, 2});
  GridFunction g(lat, 0.5);
  std::ostringstream os;
  write_csv(os, g);
  CHECK(os.str() == "x,y,value\n0,0,0.5\n0,1,0.5\n1,0,0.5\n1,1,0.5\n");
}

TEST_CASE("lattice around a center keeps the spacing") {
  std::vector<double> c{0.0, 0.0};
  std::vector<std::size_t> n{2, 3};
  std::vector<double> h{0.25, 0.125};
  Lattice lat = Lattice::around(c, n, h);
  CHECK(lat.dims() == std::vector<std::size_t>{5, 7});
  CHECK(lat.point(lat.nearest(c)) == c);
  CHECK(lat.coordinate(1, 6) == 0.375);
}

TEST_CASE("invalid boxes") {
  CHECK_THROWS_AS(Box({0, 1}, {1, 1}), DomainError);
  CHECK_THROWS_AS(Lattice(Box({0}, {1}), {1}), DomainError);
}
