#include "sublab/pde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCore>

#include "sublab/errors.hpp"

namespace sublab {

void DiscreteOperator::apply(std::span<const double> u, std::span<double> out) const {
  const std::size_t rows = interior.size();
  for (std::size_t i = 0; i < rows; ++i) {
    if (!interior[i]) {
      out[i] = 0.0;
      continue;
    }
    double s = 0.0;
    for (std::size_t e = row_start[i]; e < row_start[i + 1]; ++e) s += weights[e] * (u[cols[e]] - u[i]);
    out[i] = s + offset[i] - ghost_mass[i] * u[i];
  }
}

double DiscreteOperator::off_diagonal_mass(std::size_t row) const {
  double m = std::abs(ghost_mass_abs[row]);
  for (std::size_t e = row_start[row]; e < row_start[row + 1]; ++e) m += std::abs(weights[e]);
  return m;
}

namespace {

constexpr double kTiny = 1e-300;

/// Per-problem field data shared by the stencils.
struct FieldData {
  std::size_t n = 0;
  std::vector<PolyVectorField> fields;  // nonzero rescaled fields
  std::vector<std::size_t> family_index;
  std::vector<Polynomial> divergence;
  FieldEvaluator eval;
  FieldEvaluator drift_eval;  // X_i b_i + div(b_i) b_i

  explicit FieldData(const EpsilonFamily& family) : n(family.dim()) {
    const auto& all = family.rescaled();
    std::vector<PolyVectorField> drift;
    for (std::size_t i = 0; i < all.size(); ++i) {
      if (all[i].is_zero()) continue;
      fields.push_back(all[i]);
      family_index.push_back(i);
      divergence.push_back(all[i].divergence());
      std::vector<Polynomial> comp;
      for (std::size_t k = 0; k < n; ++k) comp.push_back(all[i].apply(all[i][k]) + divergence.back() * all[i][k]);
      drift.emplace_back(std::move(comp));
    }
    eval = FieldEvaluator(fields);
    drift_eval = FieldEvaluator(drift);
  }
  std::size_t count() const { return fields.size(); }
};

/// Node neighbours with Dirichlet ghosts or periodic wrap.
class Neighbours {
 public:
  Neighbours(const Lattice& lat, bool periodic) : lat_(lat), periodic_(periodic), n_(lat.dim()) {}

  /// Flat index of node + offset, or -1 - ghost id when it leaves the box.
  long long shift(std::size_t node, const int* offset) {
    std::size_t multi[16];
    lat_.unravel(node, multi);
    bool outside = false;
    long long ext_key = 0;
    std::size_t target[16];
    for (std::size_t k = 0; k < n_; ++k) {
      long long d = static_cast<long long>(lat_.dims()[k]);
      long long v = static_cast<long long>(multi[k]) + offset[k];
      if (periodic_) {
        v = ((v % d) + d) % d;
      } else if (v < 0 || v >= d) {
        outside = true;
      }
      ext_key = ext_key * (d + 4) + (v + 2);
      target[k] = static_cast<std::size_t>(std::max<long long>(v, 0));
    }
    if (!outside) return static_cast<long long>(lat_.ravel(target));
    auto [it, fresh] = ghost_ids_.try_emplace(ext_key, ghost_points_.size() / n_);
    if (fresh) {
      for (std::size_t k = 0; k < n_; ++k)
        ghost_points_.push_back(lat_.box().lower[k] +
                                (static_cast<double>(multi[k]) + offset[k]) * lat_.spacing(k));
    }
    return -1 - static_cast<long long>(it->second);
  }

  std::vector<double> take_ghost_points() { return std::move(ghost_points_); }

 private:
  const Lattice& lat_;
  bool periodic_;
  std::size_t n_;
  std::unordered_map<long long, std::size_t> ghost_ids_;
  std::vector<double> ghost_points_;
};

bool is_interior(const Lattice& lat, std::size_t node, bool periodic) { return periodic || !lat.is_boundary(node); }

/// s(x, t, u) * a(x, t) for every node: p x p row-major per node (p = field count).
std::vector<double> flux_coefficients(const ParabolicProblem& problem, const FieldData& fd, double t,
                                      const GridFunction& u) {
  const Lattice& lat = problem.lattice;
  const std::size_t p = fd.count();
  const std::size_t P = problem.family.size();
  std::vector<double> coef(lat.size() * p * p, 0.0);
  std::vector<double> x(lat.dim()), full(P * P);
  const FluxSpec& flux = problem.flux;
  for (std::size_t node = 0; node < lat.size(); ++node) {
    double* c = coef.data() + node * p * p;
    double s = 1.0;
    if (flux.kind == FluxSpec::Kind::model)
      s = std::clamp(1.0 + 0.5 * flux.amplitude * std::sin(u[node]), flux.a, flux.abar);
    if (flux.kind == FluxSpec::Kind::matrix) {
      lat.point(node, x.data());
      flux.matrix(x, t, full.data());
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) c[i * p + j] = full[fd.family_index[i] * P + fd.family_index[j]];
    } else {
      for (std::size_t i = 0; i < p; ++i) c[i * p + i] = s;
    }
  }
  return coef;
}

struct RowBuilder {
  std::vector<std::pair<long long, double>> terms;
  void add(long long col, double w) {
    if (w != 0.0) terms.emplace_back(col, w);
  }
};

void finish_row(RowBuilder& rb, std::size_t row, DiscreteOperator& op, std::vector<std::size_t>& ghost_cols,
                std::vector<double>& ghost_weights) {
  std::sort(rb.terms.begin(), rb.terms.end());
  for (std::size_t a = 0; a < rb.terms.size();) {
    long long col = rb.terms[a].first;
    double w = 0.0;
    for (; a < rb.terms.size() && rb.terms[a].first == col; ++a) w += rb.terms[a].second;
    if (w == 0.0 || col == static_cast<long long>(row)) continue;
    if (col >= 0) {
      op.cols.push_back(static_cast<std::size_t>(col));
      op.weights.push_back(w);
    } else {
      ghost_cols.push_back(static_cast<std::size_t>(-1 - col));
      ghost_weights.push_back(w);
    }
  }
  rb.terms.clear();
}

struct GhostTerms {
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> ids;
  std::vector<double> weights;
  std::vector<double> points;  // n per ghost
};

struct Assembled {
  DiscreteOperator op;
  GhostTerms ghosts;
};

Assembled assemble(const ParabolicProblem& problem, StencilKind stencil, double t, const GridFunction& u) {
  const Lattice& lat = problem.lattice;
  const std::size_t n = lat.dim();
  const std::size_t N = lat.size();
  const bool periodic = problem.boundary_kind == BoundaryKind::periodic;
  FieldData fd(problem.family);
  const std::size_t p = fd.count();
  std::vector<double> coef = flux_coefficients(problem, fd, t, u);

  // Field values, divergences and drifts at every node.
  std::vector<double> b(N * p * n), drift(N * p * n), div(N * p);
  std::vector<double> x(n);
  for (std::size_t node = 0; node < N; ++node) {
    lat.point(node, x.data());
    fd.eval.evaluate(x, b.data() + node * p * n);
    fd.drift_eval.evaluate(x, drift.data() + node * p * n);
    for (std::size_t i = 0; i < p; ++i) div[node * p + i] = fd.divergence[i](x);
  }

  Assembled out;
  DiscreteOperator& op = out.op;
  op.row_start.assign(1, 0);
  op.interior.resize(N);
  op.offset.assign(N, 0.0);
  op.ghost_mass.assign(N, 0.0);
  op.ghost_mass_abs.assign(N, 0.0);
  out.ghosts.row_start.assign(1, 0);
  Neighbours nb(lat, periodic);
  RowBuilder rb;
  std::vector<int> off(n, 0);

  if (stencil == StencilKind::nested) {
    // c_il(y) = sum_j coef_ij(y) b_jl(y): A_i(y) = sum_l c_il(y) D_l u(y).
    std::vector<double> c(N * p * n, 0.0);
    for (std::size_t node = 0; node < N; ++node)
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          double a = coef[node * p * p + i * p + j];
          if (a == 0.0) continue;
          for (std::size_t l = 0; l < n; ++l) c[(node * p + i) * n + l] += a * b[(node * p + j) * n + l];
        }
    auto add_flux = [&](std::size_t y, std::size_t i, double alpha) {
      for (std::size_t l = 0; l < n; ++l) {
        double w = alpha * c[(y * p + i) * n + l] / (2.0 * lat.spacing(l));
        if (w == 0.0) continue;
        off.assign(n, 0);
        off[l] = 1;
        rb.add(nb.shift(y, off.data()), w);
        off[l] = -1;
        rb.add(nb.shift(y, off.data()), -w);
      }
    };
    for (std::size_t node = 0; node < N; ++node) {
      op.interior[node] = is_interior(lat, node, periodic);
      if (op.interior[node]) {
        for (std::size_t i = 0; i < p; ++i) {
          for (std::size_t k = 0; k < n; ++k) {
            double bk = b[(node * p + i) * n + k];
            if (bk == 0.0) continue;
            for (int sgn : {1, -1}) {
              off.assign(n, 0);
              off[k] = sgn;
              long long y = nb.shift(node, off.data());
              add_flux(static_cast<std::size_t>(y), i, sgn * bk / (2.0 * lat.spacing(k)));
            }
          }
          if (div[node * p + i] != 0.0) add_flux(node, i, div[node * p + i]);
        }
      }
      finish_row(rb, node, op, out.ghosts.ids, out.ghosts.weights);
      op.row_start.push_back(op.cols.size());
      out.ghosts.row_start.push_back(out.ghosts.ids.size());
    }
  } else {
    // Diagonal coefficients only.
    std::vector<double> sigma(N * p);
    for (std::size_t node = 0; node < N; ++node)
      for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j)
          if (i != j && coef[node * p * p + i * p + j] != 0.0)
            throw ConfigError("the monotone stencil needs a diagonal flux matrix");
        sigma[node * p + i] = coef[node * p * p + i * p + i];
      }
    std::vector<double> w(n), beta(n);
    std::vector<int> lo(n), corner(n);
    for (std::size_t node = 0; node < N; ++node) {
      op.interior[node] = is_interior(lat, node, periodic);
      if (op.interior[node]) {
        std::fill(beta.begin(), beta.end(), 0.0);
        for (std::size_t i = 0; i < p; ++i) {
          const double* bi = b.data() + (node * p + i) * n;
          const double s = sigma[node * p + i];
          // X_i sigma by centered differences.
          double xs = 0.0;
          for (std::size_t k = 0; k < n; ++k) {
            if (bi[k] == 0.0) continue;
            off.assign(n, 0);
            off[k] = 1;
            auto up = static_cast<std::size_t>(nb.shift(node, off.data()));
            off[k] = -1;
            auto dn = static_cast<std::size_t>(nb.shift(node, off.data()));
            xs += bi[k] * (sigma[up * p + i] - sigma[dn * p + i]) / (2.0 * lat.spacing(k));
          }
          for (std::size_t k = 0; k < n; ++k) beta[k] += s * drift[(node * p + i) * n + k] + xs * bi[k];

          // Second difference along b_i, split over lattice offsets.
          std::size_t dom = 0;
          for (std::size_t k = 0; k < n; ++k) {
            w[k] = bi[k] / lat.spacing(k);
            if (std::abs(w[k]) > std::abs(w[dom])) dom = k;
          }
          const double vd = w[dom];
          if (std::abs(vd) < kTiny || s == 0.0) continue;
          std::vector<std::size_t> frac_axes;
          std::vector<double> frac;
          for (std::size_t k = 0; k < n; ++k) {
            if (k == dom) {
              lo[k] = 1;
              continue;
            }
            double r = w[k] / vd;
            double f = std::floor(r);
            lo[k] = static_cast<int>(f);
            if (r - f > 0.0) {
              frac_axes.push_back(k);
              frac.push_back(r - f);
            }
          }
          const double scale = s * vd * vd;
          for (std::size_t mask = 0; mask < (std::size_t{1} << frac_axes.size()); ++mask) {
            double lambda = 1.0;
            corner = lo;
            for (std::size_t a = 0; a < frac_axes.size(); ++a) {
              if (mask >> a & 1u) {
                corner[frac_axes[a]] += 1;
                lambda *= frac[a];
              } else {
                lambda *= 1.0 - frac[a];
              }
            }
            if (lambda == 0.0) continue;
            rb.add(nb.shift(node, corner.data()), scale * lambda);
            for (int& v : corner) v = -v;
            rb.add(nb.shift(node, corner.data()), scale * lambda);
          }
        }
        for (std::size_t k = 0; k < n; ++k) {
          if (beta[k] == 0.0) continue;
          off.assign(n, 0);
          off[k] = beta[k] > 0.0 ? 1 : -1;
          rb.add(nb.shift(node, off.data()), std::abs(beta[k]) / lat.spacing(k));
        }
      }
      finish_row(rb, node, op, out.ghosts.ids, out.ghosts.weights);
      op.row_start.push_back(op.cols.size());
      out.ghosts.row_start.push_back(out.ghosts.ids.size());
    }
  }
  out.ghosts.points = nb.take_ghost_points();
  for (std::size_t node = 0; node < N; ++node)
    for (std::size_t e = out.ghosts.row_start[node]; e < out.ghosts.row_start[node + 1]; ++e) {
      op.ghost_mass[node] += out.ghosts.weights[e];
      op.ghost_mass_abs[node] += std::abs(out.ghosts.weights[e]);
    }
  return out;
}

/// Sets op.offset from boundary data at time t.
void refresh_ghosts(Assembled& a, const ParabolicProblem& problem, double t) {
  const std::size_t n = problem.lattice.dim();
  const std::size_t count = a.ghosts.points.size() / n;
  if (count && !problem.boundary) throw ConfigError("the nested stencil needs boundary data outside the box");
  std::vector<double> values(count);
  for (std::size_t g = 0; g < count; ++g)
    values[g] = problem.boundary(std::span<const double>(a.ghosts.points.data() + g * n, n), t);
  std::fill(a.op.offset.begin(), a.op.offset.end(), 0.0);
  for (std::size_t node = 0; node + 1 < a.ghosts.row_start.size(); ++node)
    for (std::size_t e = a.ghosts.row_start[node]; e < a.ghosts.row_start[node + 1]; ++e)
      a.op.offset[node] += a.ghosts.weights[e] * values[a.ghosts.ids[e]];
}

bool time_dependent_operator(const ParabolicProblem& problem) {
  return problem.flux.kind != FluxSpec::Kind::linear;
}

bool nonlinear(const ParabolicProblem& problem) {
  return problem.flux.kind == FluxSpec::Kind::model || problem.source.c || problem.source.d;
}

void check_problem(const ParabolicProblem& problem) {
  if (problem.lattice.dim() != problem.family.dim())
    throw DimensionMismatch("problem lattice and frame dimensions differ");
  if (!(problem.initial.lattice() == problem.lattice))
    throw DimensionMismatch("initial data does not match the problem lattice");
  if (!(problem.T > 0.0)) throw DomainError("T must be positive");
  if (problem.boundary_kind == BoundaryKind::dirichlet && !problem.boundary)
    throw ConfigError("Dirichlet problems need boundary data");
  if (problem.flux.kind == FluxSpec::Kind::matrix && !problem.flux.matrix)
    throw ConfigError("matrix flux needs a coefficient function");
  if (!(problem.flux.a > 0.0 && problem.flux.abar >= problem.flux.a))
    throw ConfigError("flux ellipticity window must satisfy 0 < a <= abar");
}

}  // namespace

DiscreteOperator assemble_operator(const ParabolicProblem& problem, StencilKind stencil, double t,
                                   const GridFunction& u) {
  check_problem(problem);
  Assembled a = assemble(problem, stencil, t, u);
  if (!a.ghosts.points.empty()) refresh_ghosts(a, problem, t);
  return std::move(a.op);
}

GridFunction discretize_divergence_form(const ParabolicProblem& problem, const GridFunction& u, double t,
                                        StencilKind stencil) {
  DiscreteOperator op = assemble_operator(problem, stencil, t, u);
  GridFunction out(u.lattice());
  op.apply(u.values(), out.values());
  return out;
}

GridFunction evaluate_source(const ParabolicProblem& problem, const GridFunction& u, double t) {
  const Lattice& lat = u.lattice();
  GridFunction out(lat);
  if (problem.source.is_zero()) return out;
  GridFunction energy;
  if (problem.source.c) energy = gradient_energy(problem.family, u);
  std::vector<double> x(lat.dim());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat.point(i, x.data());
    double v = 0.0;
    if (problem.source.c) v += problem.source.c(x, t) * std::sqrt(energy[i]);
    if (problem.source.d) v += problem.source.d(x, t) * u[i];
    if (problem.source.g) v += problem.source.g(x, t);
    out[i] = v;
  }
  return out;
}

double cfl_limit(const ParabolicProblem& problem, StencilKind stencil) {
  check_problem(problem);
  ParabolicProblem bound = problem;
  // Model fluxes are bounded by abar.
  if (bound.flux.kind == FluxSpec::Kind::model) {
    bound.flux.kind = FluxSpec::Kind::matrix;
    const std::size_t P = problem.family.size();
    const double abar = problem.flux.abar;
    bound.flux.matrix = [P, abar](std::span<const double>, double, double* a) {
      std::fill(a, a + P * P, 0.0);
      for (std::size_t i = 0; i < P; ++i) a[i * P + i] = abar;
    };
  }
  const int samples = time_dependent_operator(bound) ? 5 : 1;
  double mass = 0.0;
  for (int s = 0; s < samples; ++s) {
    double t = samples == 1 ? 0.0 : problem.T * s / (samples - 1);
    Assembled a = assemble(bound, stencil, t, problem.initial);
    for (std::size_t i = 0; i < problem.lattice.size(); ++i)
      if (a.op.interior[i]) mass = std::max(mass, a.op.off_diagonal_mass(i));
  }
  if (!(mass > 0.0)) return std::numeric_limits<double>::infinity();
  return 1.0 / mass;
}

namespace {

void impose_boundary(const ParabolicProblem& problem, const DiscreteOperator& op, GridFunction& u, double t) {
  if (problem.boundary_kind == BoundaryKind::periodic) return;
  const Lattice& lat = problem.lattice;
  std::vector<double> x(lat.dim());
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (!op.interior[i]) {
      lat.point(i, x.data());
      u[i] = problem.boundary(x, t);
    }
}

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

SpMat implicit_matrix(const DiscreteOperator& op, double tau) {
  const std::size_t N = op.interior.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(op.cols.size() + N);
  for (std::size_t i = 0; i < N; ++i) {
    auto r = static_cast<Eigen::Index>(i);
    if (!op.interior[i]) {
      trip.emplace_back(r, r, 1.0);
      continue;
    }
    double diag = 1.0 + tau * op.ghost_mass[i];
    for (std::size_t e = op.row_start[i]; e < op.row_start[i + 1]; ++e) {
      diag += tau * op.weights[e];
      trip.emplace_back(r, static_cast<Eigen::Index>(op.cols[e]), -tau * op.weights[e]);
    }
    trip.emplace_back(r, r, diag);
  }
  SpMat m(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(N));
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

/// BiCGSTAB followed by iterative refinement until the true max-norm
/// residual is below `target` (raised to a rounding floor when needed).
/// Returns the final max-norm residual.
double solve_linear(const SpMat& m, const Eigen::VectorXd& rhs, Eigen::VectorXd& x, double rel_tol, double target,
                    int max_iters, std::size_t& iterations) {
  Eigen::BiCGSTAB<SpMat> solver;
  solver.setMaxIterations(std::max(max_iters, 1) * 10);
  solver.compute(m);
  double norm_m = 0.0;
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    double row = 0.0;
    for (SpMat::InnerIterator it(m, i); it; ++it) row += std::abs(it.value());
    norm_m = std::max(norm_m, row);
  }
  solver.setTolerance(rel_tol);
  for (int round = 0; round < 8; ++round) {
    const Eigen::VectorXd r = rhs - m * x;
    const double res = r.lpNorm<Eigen::Infinity>();
    const double floor =
        16.0 * std::numeric_limits<double>::epsilon() * (rhs.lpNorm<Eigen::Infinity>() + norm_m * x.lpNorm<Eigen::Infinity>());
    if (round > 0 && res <= std::max(target, floor)) return res;
    const Eigen::VectorXd d = solver.solve(r);
    if (solver.info() != Eigen::Success)
      throw ConvergenceFailure("linear solve stalled at relative residual " + std::to_string(solver.error()),
                               static_cast<int>(solver.iterations()));
    iterations += static_cast<std::size_t>(solver.iterations());
    x += d;
    solver.setTolerance(std::max(rel_tol, 1e-6));
  }
  const double res = (rhs - m * x).lpNorm<Eigen::Infinity>();
  throw ConvergenceFailure("linear solve residual " + std::to_string(res) + " above target " + std::to_string(target),
                           0);
}

}  // namespace

SpaceTimeGridFunction solve(const ParabolicProblem& problem, const SchemeConfig& scheme, SolveStats* stats) {
  check_problem(problem);
  if (!(scheme.cfl_safety > 0.0 && scheme.cfl_safety <= 1.0)) throw ConfigError("cfl_safety must lie in (0, 1]");
  if (scheme.output_every == 0) throw ConfigError("output_every must be >= 1");
  const bool explicit_mode = scheme.mode == TimeMode::explicit_euler;
  double tau = scheme.tau;
  if (explicit_mode || !(tau > 0.0)) {
    const double limit = cfl_limit(problem, scheme.stencil);
    if (!(tau > 0.0)) tau = scheme.cfl_safety * limit;
    else if (tau > scheme.cfl_safety * limit)
      throw CflViolation("tau = " + std::to_string(tau) + " exceeds cfl_safety * cfl_limit = " +
                         std::to_string(scheme.cfl_safety * limit));
  }
  const auto steps = static_cast<std::size_t>(std::ceil(problem.T / tau - 1e-9));
  tau = problem.T / static_cast<double>(steps);
  if (steps % scheme.output_every != 0)
    throw ConfigError("output_every must divide the step count (" + std::to_string(steps) + ")");

  SolveStats st;
  st.steps = steps;
  st.tau = tau;
  const Lattice& lat = problem.lattice;
  const std::size_t N = lat.size();
  GridFunction u = problem.initial;
  std::vector<GridFunction> slices{u};

  const bool reassemble = time_dependent_operator(problem);
  Assembled cached;
  bool have_cached = false;
  auto operator_at = [&](double t, const GridFunction& state) -> Assembled& {
    if (!have_cached || reassemble) {
      cached = assemble(problem, scheme.stencil, t, state);
      have_cached = true;
    }
    if (!cached.ghosts.points.empty()) refresh_ghosts(cached, problem, t);
    return cached;
  };

  GridFunction lu(lat);
  for (std::size_t step = 0; step < steps; ++step) {
    const double t0 = static_cast<double>(step) * tau;
    const double t1 = static_cast<double>(step + 1) * tau;
    if (explicit_mode) {
      Assembled& a = operator_at(t0, u);
      a.op.apply(u.values(), lu.values());
      GridFunction src = evaluate_source(problem, u, t0);
      GridFunction next(lat);
      for (std::size_t i = 0; i < N; ++i) next[i] = a.op.interior[i] ? u[i] + tau * (lu[i] + src[i]) : 0.0;
      impose_boundary(problem, a.op, next, t1);
      u = std::move(next);
    } else {
      GridFunction iterate = u;
      const bool picard = nonlinear(problem);
      const int picard_limit = picard ? scheme.max_iters : 1;
      bool converged = false;
      for (int it = 0; it < picard_limit; ++it) {
        Assembled& a = operator_at(t1, iterate);
        SpMat m = implicit_matrix(a.op, tau);
        GridFunction src = evaluate_source(problem, iterate, t1);
        Eigen::VectorXd rhs(static_cast<Eigen::Index>(N));
        GridFunction bnd = iterate;
        impose_boundary(problem, a.op, bnd, t1);
        for (std::size_t i = 0; i < N; ++i)
          rhs(static_cast<Eigen::Index>(i)) = a.op.interior[i] ? u[i] + tau * (src[i] + a.op.offset[i]) : bnd[i];
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(iterate.values().data(), static_cast<Eigen::Index>(N));
        const double target = scheme.linear_solver_tol / static_cast<double>(steps);
        const double res = solve_linear(m, rhs, x, scheme.linear_solver_tol, target, scheme.max_iters,
                                        st.linear_iterations);
        st.max_linear_residual = std::max(st.max_linear_residual, res);
        double change = 0.0, scale = 1.0;
        for (std::size_t i = 0; i < N; ++i) {
          change = std::max(change, std::abs(x(static_cast<Eigen::Index>(i)) - iterate[i]));
          scale = std::max(scale, std::abs(x(static_cast<Eigen::Index>(i))));
          iterate[i] = x(static_cast<Eigen::Index>(i));
        }
        ++st.picard_iterations;
        if (!picard || change <= scheme.linear_solver_tol * scale) {
          converged = true;
          break;
        }
      }
      if (!converged)
        throw ConvergenceFailure("Picard iteration at step " + std::to_string(step) + " did not converge",
                                 scheme.max_iters);
      u = std::move(iterate);
    }
    if ((step + 1) % scheme.output_every == 0) slices.push_back(u);
    if (!u.all_finite()) throw NonFiniteState("solution became non-finite at step " + std::to_string(step + 1));
  }
  if (stats) *stats = st;
  return SpaceTimeGridFunction(std::move(slices), 0.0, tau * static_cast<double>(scheme.output_every));
}

double weak_residual(const SpaceTimeGridFunction& u, const ParabolicProblem& problem,
                     const SpaceTimeGridFunction& phi) {
  const Lattice& lat = u.lattice();
  if (!(phi.lattice() == lat) || phi.slice_count() != u.slice_count())
    throw DimensionMismatch("weak_residual: phi and u use different grids");
  if (std::abs(phi.tau() - u.tau()) > 1e-12 * u.tau()) throw DimensionMismatch("weak_residual: time steps differ");
  const std::size_t S = u.slice_count();
  double pmax = 0.0;
  for (const auto& s : phi.slices()) pmax = std::max({pmax, s.max(), -s.min()});
  const double zero = 1e-14 * pmax;
  auto vanishes = [&](const GridFunction& g) {
    return std::all_of(g.values().begin(), g.values().end(), [&](double v) { return std::abs(v) <= zero; });
  };
  if (!vanishes(phi.slice(0)) || !vanishes(phi.slice(S - 1)))
    throw DomainError("weak_residual: phi must vanish at the first and last time");
  // phi must vanish on the boundary and on the layer next to it.
  std::vector<std::size_t> multi(lat.dim());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    lat.unravel(i, multi.data());
    bool near = false;
    for (std::size_t k = 0; k < lat.dim(); ++k) near = near || multi[k] < 2 || multi[k] + 2 >= lat.dims()[k];
    if (!near) continue;
    for (const auto& s : phi.slices())
      if (std::abs(s[i]) > zero) throw DomainError("weak_residual: phi must vanish near the spatial boundary");
  }

  FieldData fd(problem.family);
  const std::size_t p = fd.count();
  const double tau = u.tau();
  const auto weights = lat.quadrature_weights();
  double total = 0.0;
  for (std::size_t n = 0; n + 1 < S; ++n) {
    const double t = u.time(n);
    const GridFunction& un = u.slice(n);
    auto gu = horizontal_gradient(problem.family, un);
    auto gp = horizontal_gradient(problem.family, phi.slice(n));
    std::vector<double> coef = flux_coefficients(problem, fd, t, un);
    GridFunction src = evaluate_source(problem, un, t);
    double sum = 0.0;
    for (std::size_t i = 0; i < lat.size(); ++i) {
      double v = -u.slice(n + 1)[i] * (phi.slice(n + 1)[i] - phi.slice(n)[i]) / tau;
      for (std::size_t a = 0; a < p; ++a) {
        double A = 0.0;
        for (std::size_t b2 = 0; b2 < p; ++b2) A += coef[i * p * p + a * p + b2] * gu[fd.family_index[b2]][i];
        v += gp[fd.family_index[a]][i] * A;
      }
      v -= phi.slice(n)[i] * src[i];
      sum += weights[i] * v;
    }
    total += tau * sum;
  }
  return total;
}

ParabolicProblem make_problem(EpsilonFamily family, Lattice lattice, double T, const SpaceTimeFunction& data) {
  ParabolicProblem prob;
  prob.family = std::move(family);
  prob.initial = GridFunction::sample(lattice, [&](std::span<const double> x) { return data(x, 0.0); });
  prob.lattice = std::move(lattice);
  prob.T = T;
  prob.boundary = data;
  return prob;
}

}  // namespace sublab
