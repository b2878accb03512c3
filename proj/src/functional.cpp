#include "sublab/functional.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sublab/errors.hpp"

namespace sublab {

namespace {

double trapezoid_time_weight(std::size_t k, std::size_t count, double tau) {
  return (k == 0 || k + 1 == count) ? 0.5 * tau : tau;
}

double slice_norm(const GridFunction& u, double p) {
  if (std::isinf(p)) {
    double m = 0.0;
    for (double v : u.values()) m = std::max(m, std::abs(v));
    return m;
  }
  const Lattice& lat = u.lattice();
  double s = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) s += lat.quadrature_weight(i) * std::pow(std::abs(u[i]), p);
  return std::pow(s, 1.0 / p);
}

void check_exponent(double e, const char* name) {
  if (!(e >= 1.0)) throw DomainError(std::string("exponent ") + name + " must be >= 1");
}

}  // namespace

double lpq_norm(const SpaceTimeGridFunction& u, double p, double q) {
  check_exponent(p, "p");
  check_exponent(q, "q");
  const std::size_t count = u.slice_count();
  if (std::isinf(q)) {
    double m = 0.0;
    for (std::size_t k = 0; k < count; ++k) m = std::max(m, slice_norm(u.slice(k), p));
    return m;
  }
  double s = 0.0;
  for (std::size_t k = 0; k < count; ++k)
    s += trapezoid_time_weight(k, count, u.tau()) * std::pow(slice_norm(u.slice(k), p), q);
  return std::pow(s, 1.0 / q);
}

SpaceTimeGridFunction steklov(const SpaceTimeGridFunction& u, double h) {
  const double steps = h / u.tau();
  const double rounded = std::round(steps);
  if (!(h > 0.0) || rounded < 1.0 || std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps))
    throw DomainError("steklov: h must be a positive multiple of tau");
  const std::size_t k = static_cast<std::size_t>(rounded);
  if (k + 2 > u.slice_count()) throw DomainError("steklov: h leaves fewer than two slices");
  std::vector<GridFunction> out;
  const std::size_t count = u.slice_count() - k;
  const std::size_t size = u.lattice().size();
  for (std::size_t j = 0; j < count; ++j) {
    GridFunction g(u.lattice());
    for (std::size_t s = 0; s <= k; ++s) {
      double w = (s == 0 || s == k) ? 0.5 : 1.0;
      const GridFunction& src = u.slice(j + s);
      for (std::size_t i = 0; i < size; ++i) g[i] += w * src[i];
    }
    for (std::size_t i = 0; i < size; ++i) g[i] /= static_cast<double>(k);
    out.push_back(std::move(g));
  }
  return SpaceTimeGridFunction(std::move(out), u.t0(), u.tau());
}

double compute_theta(double p, double q, double alpha, double beta, double N) {
  for (auto [e, name] : {std::pair{p, "p"}, {q, "q"}, {alpha, "alpha"}, {beta, "beta"}}) check_exponent(e, name);
  if (!(N > 2.0)) throw DomainError("compute_theta: N must exceed 2");
  double theta = std::min({1.0 - 2.0 / p, 1.0 - 2.0 * (N / (2.0 * p) + 1.0 / q), 1.0 - 1.0 / alpha,
                           1.0 - (N / (2.0 * alpha) + 1.0 / beta)});
  if (!(theta > 0.0))
    throw DomainError("compute_theta: exponents leave no admissible theta (theta = " + std::to_string(theta) + ")");
  return theta;
}

StructureDiagnostic validate_structure(const StructureParams& sp, double M) {
  StructureDiagnostic d;
  auto fail = [&](const std::string& what) {
    d.valid = false;
    d.violations.push_back(what);
  };
  if (!(sp.a > 0.0)) fail("a > 0");
  if (!(sp.abar >= sp.a)) fail("abar >= a");
  const std::pair<double, const char*> norms[] = {{sp.norm_b, "norm_b"}, {sp.norm_c, "norm_c"},
                                                  {sp.norm_d, "norm_d"}, {sp.norm_e, "norm_e"},
                                                  {sp.norm_f, "norm_f"}, {sp.norm_g, "norm_g"},
                                                  {sp.norm_h, "norm_h"}};
  for (const auto& [v, name] : norms)
    if (!(v >= 0.0)) fail(std::string(name) + " >= 0");
  if (!(sp.N > 2.0)) fail("N > 2");
  if (!(sp.p > 2.0)) fail("p > 2");
  if (!(sp.q >= 1.0)) fail("q >= 1");
  if (!(sp.alpha > 1.0)) fail("alpha > 1");
  if (!(sp.beta >= 1.0)) fail("beta >= 1");
  const double lhs1 = sp.N / (2.0 * sp.p) + 1.0 / sp.q;
  const double lhs2 = sp.N / (2.0 * sp.alpha) + 1.0 / sp.beta;
  if (!(lhs1 < 0.5)) fail("N/(2p) + 1/q < 1/2");
  if (!(lhs2 < 1.0)) fail("N/(2alpha) + 1/beta < 1");
  if (!(sp.theta > 0.0 && sp.theta <= 1.0)) fail("0 < theta <= 1");
  // Rounding slack so a theta from compute_theta re-validates.
  constexpr double slack = 1e-12;
  if (!(lhs1 <= 0.5 * (1.0 - sp.theta) + slack)) fail("N/(2p) + 1/q <= (1 - theta)/2");
  if (!(lhs2 <= 1.0 - sp.theta + slack)) fail("N/(2alpha) + 1/beta <= 1 - theta");
  if (!(2.0 / sp.p <= 1.0 - sp.theta + slack)) fail("2/p <= 1 - theta");
  if (!(1.0 / sp.alpha <= 1.0 - sp.theta + slack)) fail("1/alpha <= 1 - theta");
  d.kappa = (sp.norm_b + sp.norm_d) * std::abs(M) + sp.norm_f + sp.norm_g;
  d.k = sp.norm_f + sp.norm_g + sp.norm_h;
  return d;
}

std::vector<GridFunction> horizontal_gradient(const EpsilonFamily& family, const GridFunction& u) {
  const Lattice& lat = u.lattice();
  const std::size_t n = lat.dim();
  if (n != family.dim()) throw DimensionMismatch("horizontal_gradient: lattice and frame dimensions differ");
  const std::size_t p = family.size();
  const FieldEvaluator& eval = family.rescaled_evaluator();
  std::vector<GridFunction> out(p, GridFunction(lat));
  std::vector<double> x(n), frame(n * p), du(n);
  std::vector<std::size_t> multi(n);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat.unravel(i, multi.data());
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t s = lat.stride(k);
      const double h = lat.spacing(k);
      if (multi[k] == 0) du[k] = (u[i + s] - u[i]) / h;
      else if (multi[k] + 1 == lat.dims()[k]) du[k] = (u[i] - u[i - s]) / h;
      else du[k] = (u[i + s] - u[i - s]) / (2.0 * h);
    }
    lat.point(i, x.data());
    eval.evaluate(x, frame.data());
    for (std::size_t j = 0; j < p; ++j) {
      double v = 0.0;
      for (std::size_t k = 0; k < n; ++k) v += frame[j * n + k] * du[k];
      out[j][i] = v;
    }
  }
  return out;
}

GridFunction gradient_energy(const EpsilonFamily& family, const GridFunction& u) {
  auto grad = horizontal_gradient(family, u);
  GridFunction e(u.lattice());
  for (const auto& g : grad)
    for (std::size_t i = 0; i < e.size(); ++i) e[i] += g[i] * g[i];
  return e;
}

double lipschitz_constant(const EpsilonFamily& family, const DistanceField& field) {
  GridFunction e = gradient_energy(family, field.values);
  return std::sqrt(e.max());
}

GridFunction cutoff(const DistanceField& field, double r) {
  if (!(r > 0.0)) throw DomainError("cutoff: r must be positive");
  if (field.boundary_min() < 2.0 * r) throw BallEscapesBox("cutoff: B(x0, 2r) reaches the box boundary");
  GridFunction phi(field.lattice());
  for (std::size_t i = 0; i < phi.size(); ++i) phi[i] = std::clamp(2.0 - field.values[i] / r, 0.0, 1.0);
  return phi;
}

double poincare_ratio(const EpsilonFamily& family, const GridFunction& u, const DistanceField& field, double r) {
  const Lattice& lat = field.lattice();
  if (!(u.lattice() == lat)) throw DimensionMismatch("poincare_ratio: u and the field use different lattices");
  if (!(r > 0.0)) throw DomainError("poincare_ratio: r must be positive");
  if (field.boundary_min() < 2.0 * r) throw BallEscapesBox("poincare_ratio: B(x0, 2r) reaches the box boundary");
  double vol = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (field.values[i] < r) {
      double w = lat.quadrature_weight(i);
      vol += w;
      mass += w * u[i];
    }
  if (!(vol > 0.0)) throw DegenerateRatio("poincare_ratio: B(x0, r) contains no nodes");
  const double mean = mass / vol;
  double num = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (field.values[i] < r) num += lat.quadrature_weight(i) * (u[i] - mean) * (u[i] - mean);
  GridFunction e = gradient_energy(family, u);
  double den = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (field.values[i] < 2.0 * r) den += lat.quadrature_weight(i) * e[i];
  if (!(den > 0.0)) throw DegenerateRatio("poincare_ratio: Xu vanishes on B(x0, 2r)");
  return num / (r * r * den);
}

std::vector<TestFunction> poincare_ensemble(std::span<const double> x0, std::span<const double> half_widths,
                                            std::size_t size, std::uint64_t seed) {
  const std::size_t n = x0.size();
  std::vector<double> center(x0.begin(), x0.end()), scale(half_widths.begin(), half_widths.end());
  std::vector<TestFunction> tests;
  // Coordinate functions first, then seeded random members.
  for (std::size_t k = 0; k < n && tests.size() < size; ++k)
    tests.push_back([k, c = center[k]](std::span<const double> x) { return x[k] - c; });
  for (std::size_t m = tests.size(); m < size; ++m) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(m)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    if (m % 2 == 0) {
      // a . y + y^T B y
      std::vector<double> lin(n), quad(n * n);
      for (double& c : lin) c = normal(rng);
      for (double& c : quad) c = normal(rng);
      tests.push_back([=](std::span<const double> x) {
        double v = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double yi = (x[i] - center[i]) / scale[i];
          v += lin[i] * yi;
          for (std::size_t j = 0; j < n; ++j) v += quad[i * n + j] * yi * (x[j] - center[j]) / scale[j];
        }
        return v;
      });
    } else {
      std::uniform_real_distribution<double> freq(-M_PI, M_PI), phase(0.0, 2.0 * M_PI);
      std::vector<double> k(n);
      for (double& c : k) c = freq(rng);
      double ph = phase(rng);
      tests.push_back([=](std::span<const double> x) {
        double a = ph;
        for (std::size_t i = 0; i < n; ++i) a += k[i] * (x[i] - center[i]) / scale[i];
        return std::sin(a);
      });
    }
  }
  return tests;
}

PoincareEstimate poincare_constant_estimate(const EpsilonFamily& family, const DistanceField& field, double r,
                                            std::span<const TestFunction> tests) {
  PoincareEstimate est;
  for (std::size_t m = 0; m < tests.size(); ++m) {
    GridFunction u = GridFunction::sample(field.lattice(), tests[m]);
    double ratio;
    try {
      ratio = poincare_ratio(family, u, field, r);
    } catch (const DegenerateRatio&) {
      continue;
    }
    ++est.members;
    if (ratio > est.value || est.members == 1) {
      est.value = ratio;
      est.best_member = m;
    }
  }
  if (est.members == 0) throw DegenerateRatio("poincare_constant_estimate: every test function is constant on the ball");
  return est;
}

PoincareEstimate poincare_constant_estimate(const EpsilonFamily& family, std::span<const double> x0, double r,
                                            std::size_t ensemble_size, std::uint64_t seed,
                                            const WindowOptions& opts) {
  DistanceField field = fitted_field(family, x0, 2.0 * r, opts);
  const Box& box = field.lattice().box();
  std::vector<double> hw(x0.size());
  for (std::size_t k = 0; k < hw.size(); ++k) hw[k] = box.half_width(k);
  auto tests = poincare_ensemble(x0, hw, ensemble_size, seed);
  return poincare_constant_estimate(family, field, r, tests);
}

double sobolev_ratio(const EpsilonFamily& family, const GridFunction& u, double p, double N) {
  if (!(p >= 1.0 && p < N)) throw DomainError("sobolev_ratio: need 1 <= p < N");
  const Lattice& lat = u.lattice();
  double umax = 0.0;
  for (double v : u.values()) umax = std::max(umax, std::abs(v));
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (lat.is_boundary(i) && std::abs(u[i]) > 1e-12 * umax)
      throw DomainError("sobolev_ratio: u must vanish on the box boundary");
  const double s = N * p / (N - p);
  GridFunction e = gradient_energy(family, u);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    double w = lat.quadrature_weight(i);
    num += w * std::pow(std::abs(u[i]), s);
    den += w * std::pow(e[i], 0.5 * p);
  }
  if (!(den > 0.0)) throw DegenerateRatio("sobolev_ratio: Xu vanishes identically");
  return std::pow(num, 1.0 / s) / std::pow(den, 1.0 / p);
}

}  // namespace sublab
