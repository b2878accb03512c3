#include "sublab/harnack.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <ostream>
#include <random>
#include <thread>

#include "sublab/errors.hpp"

namespace sublab {

const std::vector<char>& CylinderSet::mask(Region r) const {
  switch (r) {
    case Region::Q: return Q;
    case Region::Qplus: return Qplus;
    case Region::Qminus: return Qminus;
    case Region::Dplus: return Dplus;
    case Region::Dminus: return Dminus;
  }
  return Q;
}

std::size_t CylinderSet::count(Region r) const {
  const auto& m = mask(r);
  return static_cast<std::size_t>(std::count(m.begin(), m.end(), char{1}));
}

CylinderSet make_cylinders(const DistanceField& field, double tbar, double rho, const Lattice& lattice, double t0,
                           double tau, std::size_t slices, double R) {
  if (!(rho > 0.0)) throw DomainError("rho must be positive");
  if (!(rho < 20.0 * R)) throw DomainError("rho must be smaller than 20 R");
  if (lattice.dim() != field.origin.size()) throw DimensionMismatch("cylinder lattice and field dimensions differ");
  if (slices == 0 || !(tau > 0.0)) throw DomainError("empty time grid");
  const double outer = 3.0 * rho;
  if (!(field.boundary_min() > outer))
    throw BallEscapesBox("B(x, 3 rho) reaches the distance-field boundary");

  // Spatial distances of the lattice nodes.
  const std::size_t N = lattice.size();
  std::vector<double> d(N);
  const bool same = lattice == field.lattice();
  std::vector<double> x(lattice.dim());
  for (std::size_t i = 0; i < N; ++i) {
    if (same) {
      d[i] = field.values[i];
    } else {
      lattice.point(i, x.data());
      d[i] = field.value_at(x);
    }
    if (lattice.is_boundary(i) && d[i] <= outer) throw BallEscapesBox("B(x, 3 rho) reaches the lattice boundary");
  }

  const double tol = 1e-9 * tau;
  const double t_end = t0 + tau * static_cast<double>(slices - 1);
  const double r2 = rho * rho;
  if (tbar - 9.0 * r2 < t0 - tol || tbar > t_end + tol)
    throw DomainError("cylinder time window [" + std::to_string(tbar - 9.0 * r2) + ", " + std::to_string(tbar) +
                      "] leaves the grid [" + std::to_string(t0) + ", " + std::to_string(t_end) + "]");

  CylinderSet c;
  c.center = field.origin;
  c.tbar = tbar;
  c.rho = rho;
  c.nodes = N;
  c.slices = slices;
  for (auto* m : {&c.Q, &c.Qplus, &c.Qminus, &c.Dplus, &c.Dminus}) m->assign(N * slices, 0);
  auto in_time = [&](double t, double lo, double hi) { return t >= lo - tol && t <= hi + tol; };
  for (std::size_t k = 0; k < slices; ++k) {
    const double t = t0 + tau * static_cast<double>(k);
    const bool tq = in_time(t, tbar - 9.0 * r2, tbar);
    const bool tp = in_time(t, tbar - r2, tbar);
    const bool tm = in_time(t, tbar - 8.0 * r2, tbar - 7.0 * r2);
    const bool tdp = in_time(t, tbar - r2, tbar - 0.5 * r2);
    const bool tdm = in_time(t, tbar - 7.5 * r2, tbar - 7.0 * r2);
    if (!(tq || tp || tm || tdp || tdm)) continue;
    for (std::size_t i = 0; i < N; ++i) {
      const std::size_t idx = k * N + i;
      c.Q[idx] = tq && d[i] <= outer;
      c.Qplus[idx] = tp && d[i] <= rho;
      c.Qminus[idx] = tm && d[i] <= rho;
      c.Dplus[idx] = tdp && d[i] <= 0.5 * rho;
      c.Dminus[idx] = tdm && d[i] <= 0.5 * rho;
    }
  }
  return c;
}

CylinderSet make_cylinders(const DistanceField& field, double tbar, double rho, const SpaceTimeGridFunction& grid,
                           double R) {
  return make_cylinders(field, tbar, rho, grid.lattice(), grid.t0(), grid.tau(), grid.slice_count(), R);
}

namespace {

void check_shape(const SpaceTimeGridFunction& u, const CylinderSet& cyl) {
  if (u.lattice().size() != cyl.nodes || u.slice_count() != cyl.slices)
    throw DimensionMismatch("cylinder masks do not match the space-time grid");
}

double value(const SpaceTimeGridFunction& u, std::size_t idx, std::size_t N) { return u.slice(idx / N)[idx % N]; }

}  // namespace

double harnack_quotient(const SpaceTimeGridFunction& u, const CylinderSet& cyl, double k, double theta) {
  check_shape(u, cyl);
  const std::size_t N = cyl.nodes;
  for (std::size_t idx = 0; idx < cyl.Q.size(); ++idx)
    if (cyl.Q[idx] && value(u, idx, N) < 0.0)
      throw DomainError("u is negative inside Q at slice " + std::to_string(idx / N) + ", node " +
                        std::to_string(idx % N));
  const double offset = std::pow(cyl.rho, theta) * k;
  double top = -kInfinity, bottom = kInfinity;
  for (std::size_t idx = 0; idx < cyl.Q.size(); ++idx) {
    if (cyl.Qminus[idx]) top = std::max(top, value(u, idx, N));
    if (cyl.Qplus[idx]) bottom = std::min(bottom, value(u, idx, N) + offset);
  }
  if (top == -kInfinity) throw DomainError("Qminus contains no grid nodes");
  if (bottom == kInfinity) throw DomainError("Qplus contains no grid nodes");
  if (!(bottom > 0.0)) throw DegenerateRatio("min over Qplus of u + rho^theta k vanishes");
  return top / bottom;
}

double max_principle_margin(const SpaceTimeGridFunction& u, double M, double kappa, double C_cap) {
  const Lattice& lat = u.lattice();
  const double bound = M + C_cap * kappa;
  double margin = -kInfinity;
  for (const auto& s : u.slices())
    for (std::size_t i = 0; i < lat.size(); ++i)
      if (!lat.is_boundary(i)) margin = std::max(margin, s[i] - bound);
  return margin;
}

double log_oscillation(const SpaceTimeGridFunction& u, const CylinderSet& cyl, double k,
                       const LogOscillationOptions& opts) {
  check_shape(u, cyl);
  const std::size_t N = cyl.nodes;
  const auto qw = u.lattice().quadrature_weights();
  struct Node {
    double ubar, weight;
  };
  std::vector<Node> plus, minus;
  for (std::size_t idx = 0; idx < cyl.Q.size(); ++idx) {
    if (!cyl.Qplus[idx] && !cyl.Qminus[idx]) continue;
    const double ub = value(u, idx, N) + k + opts.offset;
    if (!(ub > 0.0)) throw DomainError("u + k + offset must be positive on Qplus and Qminus");
    // Uniform time steps: spatial weights suffice.
    Node nd{ub, qw[idx % N]};
    if (cyl.Qplus[idx]) plus.push_back(nd);
    if (cyl.Qminus[idx]) minus.push_back(nd);
  }
  if (plus.empty() || minus.empty()) throw DomainError("Qplus and Qminus must contain grid nodes");

  auto term = [](double ub_y, double ub_x) {
    const double q = ub_y / ub_x;
    return q > 1.0 ? std::sqrt(std::log(q)) : 0.0;
  };
  const double pairs = static_cast<double>(plus.size()) * static_cast<double>(minus.size());
  if (pairs <= static_cast<double>(opts.pair_budget)) {
    double wp = 0.0, wm = 0.0, sum = 0.0;
    for (const Node& m : minus) wm += m.weight;
    for (const Node& p : plus) {
      wp += p.weight;
      double inner = 0.0;
      for (const Node& m : minus) inner += m.weight * term(m.ubar, p.ubar);
      sum += p.weight * inner;
    }
    return sum / (wp * wm);
  }
  std::vector<double> wp, wm;
  for (const Node& p : plus) wp.push_back(p.weight);
  for (const Node& m : minus) wm.push_back(m.weight);
  std::discrete_distribution<std::size_t> pick_plus(wp.begin(), wp.end()), pick_minus(wm.begin(), wm.end());
  std::mt19937_64 rng(opts.seed);
  double sum = 0.0;
  for (std::size_t s = 0; s < opts.samples; ++s) {
    const Node& p = plus[pick_plus(rng)];
    const Node& m = minus[pick_minus(rng)];
    sum += term(m.ubar, p.ubar);
  }
  return sum / static_cast<double>(opts.samples);
}

// ---------------------------------------------------------------------------

bool SweepReport::pass() const {
  if (!complete) return false;
  return std::all_of(groups.begin(), groups.end(), [](const SweepGroup& g) {
    return g.harnack_pass && g.poincare_pass && g.doubling_pass && g.max_principle_pass;
  });
}

std::vector<int> axis_weights(const CommutatorTable& table, std::span<const double> x) {
  const std::size_t n = table.dim();
  std::vector<int> w(n, 0);
  for (const auto& e : table.entries()) {
    auto v = e.field.at(x);
    for (std::size_t k = 0; k < n; ++k)
      if (std::abs(v[k]) > 1e-12 && (w[k] == 0 || e.degree < w[k])) w[k] = e.degree;
  }
  for (std::size_t k = 0; k < n; ++k)
    if (w[k] == 0) throw HormanderFailure("no table entry moves along axis " + std::to_string(k));
  return w;
}

namespace {

/// Lattice around B(c, 3 rho) with a field on it that clears 3 rho.
DistanceField heat_field(const EpsilonFamily& family, const SweepConfig& cfg, double rho) {
  const double outer = 3.0 * rho;
  Lattice window = fit_window(family, cfg.center, outer, cfg.window);
  Box box = window.box();
  const std::size_t n = family.dim();
  for (int attempt = 0; attempt < 8; ++attempt) {
    Lattice lat(box, std::vector<std::size_t>(n, cfg.heat_nodes));
    DistanceField f = distance_field(family, cfg.center, lat, cfg.window.move_budget, cfg.window.relax_sweeps);
    if (f.boundary_min() > outer) return f;
    for (std::size_t k = 0; k < n; ++k) {
      const double mid = 0.5 * (box.lower[k] + box.upper[k]);
      const double half = 0.625 * (box.upper[k] - box.lower[k]);
      box.lower[k] = mid - half;
      box.upper[k] = mid + half;
    }
  }
  throw BallEscapesBox("could not fit a heat window around B(x, 3 rho)");
}

}  // namespace

HeatSolution sweep_heat_solution(const SweepConfig& cfg, double epsilon, double rho) {
  EpsilonFamily family = rescale(cfg.table, epsilon);
  HeatSolution h{heat_field(family, cfg, rho), {}, {}, {}, 0.0};
  const std::vector<int> w = axis_weights(cfg.table, cfg.center);
  std::vector<double> widths(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) widths[k] = cfg.bump_width * std::pow(rho, w[k]);
  const std::vector<double> c = cfg.center;
  const double floor = cfg.bump_floor;
  SpaceTimeFunction datum = [c, widths, floor](std::span<const double> x, double) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double z = (x[k] - c[k]) / widths[k];
      s += z * z;
    }
    return floor + std::exp(-s);
  };
  const double T = cfg.time_factor * rho * rho;
  h.problem = make_problem(std::move(family), h.field.lattice(), T, datum);
  SchemeConfig scheme;
  scheme.stencil = StencilKind::monotone;
  scheme.cfl_safety = cfg.cfl_safety;
  // Store heat_slices slices at t = j T / heat_slices, whatever the grid.
  const double limit = cfg.cfl_safety * cfl_limit(h.problem, scheme.stencil);
  const auto per_slice = static_cast<std::size_t>(std::ceil(T / (limit * static_cast<double>(cfg.heat_slices))));
  scheme.output_every = std::max<std::size_t>(1, per_slice);
  scheme.tau = T / static_cast<double>(scheme.output_every * cfg.heat_slices);
  h.u = solve(h.problem, scheme);
  h.cylinders = make_cylinders(h.field, h.u.t_end(), rho, h.u);
  h.M = std::max(h.problem.initial.max(), floor + 1.0);
  return h;
}

SweepRow sweep_row(const SweepConfig& cfg, double epsilon, double rho) {
  SweepRow row;
  row.epsilon = epsilon;
  row.rho = rho;
  EpsilonFamily family = rescale(cfg.table, epsilon);

  row.doubling_ratio = doubling_ratio(family, cfg.center, rho, cfg.volume_samples, cfg.seed, cfg.window).ratio;
  row.poincare_estimate =
      poincare_constant_estimate(family, cfg.center, rho, cfg.ensemble_size, cfg.seed, cfg.window).value;

  HeatSolution h = sweep_heat_solution(cfg, epsilon, rho);
  row.harnack_quotient = harnack_quotient(h.u, h.cylinders, 0.0, 1.0);
  row.max_principle_margin = max_principle_margin(h.u, h.M, 0.0, 0.0);
  LogOscillationOptions lo;
  lo.seed = cfg.seed;
  row.log_oscillation = log_oscillation(h.u, h.cylinders, 0.0, lo);
  return row;
}

SweepReport epsilon_sweep(const SweepConfig& cfg) {
  if (cfg.epsilons.empty() || cfg.rhos.empty()) throw ConfigError("sweep needs at least one epsilon and one rho");
  SweepReport report;
  for (double rho : cfg.rhos)
    for (double eps : cfg.epsilons) {
      SweepRow r;
      r.epsilon = eps;
      r.rho = rho;
      report.rows.push_back(r);
    }

  std::size_t workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, report.rows.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < report.rows.size(); i = next++) {
      SweepRow& r = report.rows[i];
      try {
        r = sweep_row(cfg, r.epsilon, r.rho);
      } catch (const std::exception& e) {
        r.error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  report.complete = std::all_of(report.rows.begin(), report.rows.end(), [](const SweepRow& r) { return r.error.empty(); });
  for (double rho : cfg.rhos) {
    SweepGroup g;
    g.rho = rho;
    std::vector<double> h, p, ds, dl;
    bool mp = true;
    for (const SweepRow& r : report.rows) {
      if (r.rho != rho || !r.error.empty()) continue;
      h.push_back(r.harnack_quotient);
      p.push_back(r.poincare_estimate);
      (r.epsilon < rho ? ds : dl).push_back(r.doubling_ratio);
      mp = mp && r.max_principle_margin <= 0.0;
    }
    g.harnack_spread = h.empty() ? kInfinity : spread(h);
    g.poincare_spread = p.empty() ? kInfinity : spread(p);
    g.doubling_spread_small = ds.empty() ? 1.0 : spread(ds);
    g.doubling_spread_large = dl.empty() ? 1.0 : spread(dl);
    g.harnack_pass = g.harnack_spread <= cfg.harnack_factor;
    g.poincare_pass = g.poincare_spread <= cfg.poincare_factor;
    g.doubling_pass = g.doubling_spread_small <= cfg.doubling_factor && g.doubling_spread_large <= cfg.doubling_factor;
    g.max_principle_pass = mp && !h.empty();
    report.groups.push_back(g);
  }
  return report;
}

void write_sweep_csv(std::ostream& out, const SweepReport& report) {
  out << "epsilon,rho,harnack_quotient,doubling_ratio,poincare_estimate,max_principle_margin,log_oscillation,error\n";
  const auto old = out.precision(17);
  for (const SweepRow& r : report.rows) {
    out << r.epsilon << ',' << r.rho << ',' << r.harnack_quotient << ',' << r.doubling_ratio << ','
        << r.poincare_estimate << ',' << r.max_principle_margin << ',' << r.log_oscillation << ',';
    std::string e = r.error;
    std::replace(e.begin(), e.end(), '"', '\'');
    if (!e.empty()) out << '"' << e << '"';
    out << '\n';
  }
  out.precision(old);
}

}  // namespace sublab
