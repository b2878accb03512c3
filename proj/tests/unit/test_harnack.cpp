#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "sublab/errors.hpp"
#include "sublab/frame_io.hpp"
#include "sublab/harnack.hpp"

using namespace sublab;

namespace {

EpsilonFamily family(const std::string& name, double eps) { return rescale(builtin_frame(name).table(), eps); }

Lattice square(std::size_t n, double half) {
  std::vector<std::size_t> dims{n, n};
  return Lattice(Box({-half, -half}, {half, half}), dims);
}

DistanceField disk_field(std::size_t n = 41, double half = 1.0) {
  std::vector<double> o{0.0, 0.0};
  return distance_field(family("euclid2", 0.0), o, square(n, half), 1, 30);
}

SpaceTimeGridFunction constant(const Lattice& lat, std::size_t slices, double tau, double c) {
  return SpaceTimeGridFunction(std::vector<GridFunction>(slices, GridFunction(lat, c)), 0.0, tau);
}

SpaceTimeGridFunction random_positive(const Lattice& lat, std::size_t slices, double tau, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.5, 2.0);
  std::vector<GridFunction> s;
  for (std::size_t k = 0; k < slices; ++k) {
    GridFunction g(lat);
    for (double& v : g.values()) v = unif(rng);
    s.push_back(g);
  }
  return SpaceTimeGridFunction(s, 0.0, tau);
}

bool subset(const std::vector<char>& a, const std::vector<char>& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !b[i]) return false;
  return true;
}

}  // namespace

TEST_CASE("cylinder masks on a commuting frame") {
  DistanceField f = disk_field();
  const Lattice& lat = f.lattice();
  const double rho = 0.2, h = lat.spacing(0);
  const double tau = rho * rho / 8;
  const std::size_t slices = 81;  // t in [0, 10 rho^2]
  CylinderSet c = make_cylinders(f, 10 * rho * rho, rho, lat, 0.0, tau, slices);

  // Time layering: Qplus has 9 slices, Qminus 9, Q 73.
  auto slices_of = [&](const std::vector<char>& m) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < slices; ++k)
      n += std::any_of(m.begin() + k * lat.size(), m.begin() + (k + 1) * lat.size(), [](char v) { return v; });
    return n;
  };
  CHECK(slices_of(c.Qplus) == 9);
  CHECK(slices_of(c.Qminus) == 9);
  CHECK(slices_of(c.Q) == 73);
  CHECK(slices_of(c.Dplus) == 5);
  CHECK(slices_of(c.Dminus) == 5);

  // Per-slice node counts against the disk area, up to a boundary layer.
  auto per_slice = [&](Region r) { return double(c.count(r)) / double(slices_of(c.mask(r))); };
  for (auto [region, radius] : {std::pair{Region::Qplus, rho}, std::pair{Region::Q, 3 * rho},
                                std::pair{Region::Dplus, rho / 2}}) {
    const double area = M_PI * radius * radius / (h * h);
    const double layer = 2 * M_PI * radius / h;
    CHECK(std::abs(per_slice(region) - area) <= layer);
  }

  CHECK(subset(c.Qplus, c.Q));
  CHECK(subset(c.Qminus, c.Q));
  CHECK(subset(c.Dplus, c.Qplus));
  CHECK(subset(c.Dminus, c.Qminus));
  for (std::size_t i = 0; i < c.Qplus.size(); ++i) CHECK_FALSE((c.Qplus[i] && c.Qminus[i]));
}

TEST_CASE("cylinder masks grow with rho") {
  DistanceField f = distance_field(family("heisenberg", 0.1), std::vector<double>{0.0, 0.0, 0.0},
                                   Lattice(Box({-0.6, -0.6, -0.08}, {0.6, 0.6, 0.08}), std::vector<std::size_t>{17, 17, 17}), 2, 30);
  const double tbar = 0.2;
  CylinderSet a = make_cylinders(f, tbar, 0.1, f.lattice(), 0.0, 0.005, 41);
  CylinderSet b = make_cylinders(f, tbar, 0.12, f.lattice(), 0.0, 0.005, 41);
  // Q and Qplus end at tbar, so they nest; Qminus, Dplus and Dminus sit in
  // time windows that move with rho. Their spatial footprints still nest.
  for (Region r : {Region::Q, Region::Qplus}) CHECK(subset(a.mask(r), b.mask(r)));
  const std::size_t N = f.lattice().size();
  auto footprint = [&](const CylinderSet& c, Region r) {
    std::vector<char> s(N, 0);
    const auto& m = c.mask(r);
    for (std::size_t i = 0; i < m.size(); ++i) s[i % N] |= m[i];
    return s;
  };
  for (Region r : {Region::Qminus, Region::Dplus, Region::Dminus}) CHECK(subset(footprint(a, r), footprint(b, r)));
  CHECK(a.count(Region::Q) < b.count(Region::Q));
}

TEST_CASE("cylinder errors") {
  DistanceField f = disk_field(21, 0.5);
  const Lattice& lat = f.lattice();
  CHECK_THROWS_AS(make_cylinders(f, 1.0, 0.2, lat, 0.0, 0.01, 101), BallEscapesBox);
  CHECK_THROWS_AS(make_cylinders(f, 0.05, 0.1, lat, 0.0, 0.01, 101), DomainError);  // starts before t0
  CHECK_THROWS_AS(make_cylinders(f, 2.0, 0.1, lat, 0.0, 0.01, 101), DomainError);   // ends after the grid
  CHECK_THROWS_AS(make_cylinders(f, 0.5, 0.1, lat, 0.0, 0.01, 101, 0.004), DomainError);
  CHECK_NOTHROW(make_cylinders(f, 0.5, 0.1, lat, 0.0, 0.01, 101));
}

TEST_CASE("harnack quotient") {
  DistanceField f = disk_field(21, 1.0);
  const Lattice& lat = f.lattice();
  const double rho = 0.2, tau = 0.01;
  CylinderSet c = make_cylinders(f, 0.4, rho, lat, 0.0, tau, 41);

  CHECK(harnack_quotient(constant(lat, 41, tau, 1.0), c, 0.0, 1.0) == 1.0);

  auto u = random_positive(lat, 41, tau, 5);
  const double q = harnack_quotient(u, c, 0.0, 1.0);
  auto scaled = u;
  for (std::size_t k = 0; k < scaled.slice_count(); ++k)
    for (double& v : scaled.slice(k).values()) v *= 4.0;
  CHECK(harnack_quotient(scaled, c, 0.0, 1.0) == q);
  for (std::size_t k = 0; k < scaled.slice_count(); ++k)
    for (double& v : scaled.slice(k).values()) v *= 0.75;  // 3 u
  CHECK(harnack_quotient(scaled, c, 0.0, 1.0) == doctest::Approx(q).epsilon(1e-15));

  // Raising u on Qminus never lowers the quotient; the offset lowers it.
  auto raised = u;
  const std::size_t N = lat.size();
  for (std::size_t idx = 0; idx < c.Qminus.size(); ++idx)
    if (c.Qminus[idx]) raised.slice(idx / N)[idx % N] += 0.3;
  CHECK(harnack_quotient(raised, c, 0.0, 1.0) >= q);
  CHECK(harnack_quotient(u, c, 1.0, 0.5) < q);

  // A zero on Qplus: finite with k > 0, degenerate with k = 0.
  auto zero = u;
  for (std::size_t idx = 0; idx < c.Qplus.size(); ++idx)
    if (c.Qplus[idx]) {
      zero.slice(idx / N)[idx % N] = 0.0;
      break;
    }
  const double with_k = harnack_quotient(zero, c, 1.0, 1.0);
  CHECK(std::isfinite(with_k));
  CHECK(with_k > 0.0);
  CHECK_THROWS_AS(harnack_quotient(zero, c, 0.0, 1.0), DegenerateRatio);

  auto negative = u;
  for (std::size_t idx = 0; idx < c.Q.size(); ++idx)
    if (c.Q[idx]) {
      negative.slice(idx / N)[idx % N] = -1e-9;
      break;
    }
  CHECK_THROWS_AS(harnack_quotient(negative, c, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(harnack_quotient(constant(square(11, 1.0), 41, tau, 1.0), c, 0.0, 1.0), DimensionMismatch);
}

TEST_CASE("maximum principle margin") {
  // Linear heat with data <= 1.
  std::vector<std::size_t> dims{9, 9, 9};
  Lattice lat(Box({-1, -1, -1}, {1, 1, 1}), dims);
  auto heat = make_problem(family("heisenberg", 0.2), lat, 0.1, [](std::span<const double> x, double) {
    return std::cos(x[0]) * std::cos(x[1]) * std::cos(x[2]);
  });
  SchemeConfig sc;
  sc.stencil = StencilKind::monotone;
  auto u = solve(heat, sc);
  CHECK(max_principle_margin(u, 1.0, 0.0, 0.0) <= 0.0);

  // Manufactured x^2 + 2t: the interior max sits below the parabolic boundary max.
  const SpaceTimeFunction quad = [](std::span<const double> x, double t) { return x[0] * x[0] + 2 * t; };
  auto q = solve(make_problem(family("heisenberg", 0.0), lat, 0.1, quad), SchemeConfig{});
  const double M = 1.0 + 2 * q.t_end();
  CHECK(max_principle_margin(q, M, 0.0, 0.0) <= 0.0);

  auto bad = q;
  bad.slice(3)[lat.size() / 2] = M + 0.5;
  CHECK(max_principle_margin(bad, M, 0.0, 0.0) == doctest::Approx(0.5));
  CHECK(max_principle_margin(bad, M, 1.0, 0.6) <= 0.0);
}

TEST_CASE("log oscillation") {
  DistanceField f = disk_field(21, 1.0);
  const Lattice& lat = f.lattice();
  const double tau = 0.01;
  CylinderSet c = make_cylinders(f, 0.4, 0.2, lat, 0.0, tau, 41);
  LogOscillationOptions exact;
  exact.offset = 0.0;

  CHECK(log_oscillation(constant(lat, 41, tau, 2.5), c, 0.0) == 0.0);
  CHECK(log_oscillation(constant(lat, 41, tau, 2.5), c, 1.0) == 0.0);

  auto u = random_positive(lat, 41, tau, 9);
  const double v = log_oscillation(u, c, 0.0, exact);
  CHECK(v > 0.0);
  auto doubled = u;
  for (std::size_t k = 0; k < u.slice_count(); ++k)
    for (double& x : doubled.slice(k).values()) x *= 2.0;
  CHECK(log_oscillation(doubled, c, 0.0, exact) == v);
  LogOscillationOptions with_offset, offset2;
  with_offset.offset = 1e-3;
  offset2.offset = 2e-3;
  CHECK(log_oscillation(doubled, c, 0.0, offset2) == log_oscillation(u, c, 0.0, with_offset));

  // Seeded subsampling tracks the exact double sum.
  LogOscillationOptions sampled = exact;
  sampled.pair_budget = 10;
  sampled.samples = 400000;
  const double s1 = log_oscillation(u, c, 0.0, sampled);
  CHECK(s1 == log_oscillation(u, c, 0.0, sampled));
  CHECK(s1 == doctest::Approx(v).epsilon(0.02));

  auto neg = constant(lat, 41, tau, -1.0);
  CHECK_THROWS_AS(log_oscillation(neg, c, 0.0), DomainError);
}

TEST_CASE("axis weights") {
  std::vector<double> o{0.0, 0.0, 0.0};
  CHECK(axis_weights(builtin_frame("heisenberg").table(), o) == std::vector<int>{1, 1, 2});
  std::vector<double> o2{0.0, 0.0};
  CHECK(axis_weights(builtin_frame("euclid2").table(), o2) == std::vector<int>{1, 1});
}

TEST_CASE("sweep on a commuting frame is exactly uniform") {
  SweepConfig cfg;
  cfg.table = builtin_frame("euclid2").table();
  cfg.center = {0.0, 0.0};
  cfg.epsilons = {0.0, 0.25, 0.5};
  cfg.rhos = {0.1};
  cfg.volume_samples = 20000;
  cfg.ensemble_size = 8;
  cfg.heat_nodes = 21;
  cfg.workers = 2;
  SweepReport rep = epsilon_sweep(cfg);
  REQUIRE(rep.complete);
  REQUIRE(rep.rows.size() == 3);
  for (const SweepRow& r : rep.rows) {
    CHECK(r.harnack_quotient == rep.rows[0].harnack_quotient);
    CHECK(r.doubling_ratio == rep.rows[0].doubling_ratio);
    CHECK(r.poincare_estimate == rep.rows[0].poincare_estimate);
    CHECK(r.max_principle_margin <= 0.0);
  }
  CHECK(rep.pass());
  CHECK(rep.groups[0].harnack_spread == 1.0);

  // Single epsilon: trivially uniform.
  cfg.epsilons = {0.3};
  cfg.workers = 1;
  SweepReport one = epsilon_sweep(cfg);
  CHECK(one.pass());

  std::ostringstream a, b;
  write_sweep_csv(a, rep);
  write_sweep_csv(b, epsilon_sweep([&] {
                    SweepConfig c2 = cfg;
                    c2.epsilons = {0.0, 0.25, 0.5};
                    c2.workers = 1;
                    return c2;
                  }()));
  CHECK(a.str() == b.str());
}

TEST_CASE("sweep records failing rows and continues") {
  SweepConfig cfg;
  cfg.table = builtin_frame("euclid2").table();
  cfg.center = {0.0, 0.0};
  cfg.epsilons = {0.0};
  cfg.rhos = {0.1, -1.0};
  cfg.volume_samples = 20000;
  cfg.ensemble_size = 4;
  cfg.heat_nodes = 15;
  SweepReport rep = epsilon_sweep(cfg);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].error.empty());
  CHECK_FALSE(rep.rows[1].error.empty());
  CHECK_FALSE(rep.complete);
  CHECK_FALSE(rep.pass());
}
