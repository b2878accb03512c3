#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sublab/frames.hpp"
#include "sublab/functional.hpp"
#include "sublab/lattice.hpp"

namespace sublab {

using SpaceTimeFunction = std::function<double(std::span<const double> x, double t)>;

/// A_i(x, t, u, xi) = s(x, t, u) * sum_j a_ij xi_j.
struct FluxSpec {
  enum class Kind { linear, matrix, model };
  Kind kind = Kind::linear;
  /// kind == matrix: a_ij(x, t) written into a p x p row-major buffer.
  std::function<void(std::span<const double> x, double t, double* a)> matrix;
  /// Ellipticity window [a, abar]; the model flux is clamp(1 + amplitude/2 sin u, a, abar).
  double a = 1.0;
  double abar = 1.0;
  double amplitude = 1.0;
};

/// B = c |Xu| + d u + g; empty functions are zero.
struct SourceSpec {
  SpaceTimeFunction c, d, g;
  bool is_zero() const { return !c && !d && !g; }
};

enum class BoundaryKind { dirichlet, periodic };

struct ParabolicProblem {
  EpsilonFamily family;
  Lattice lattice;
  double T = 1.0;
  GridFunction initial;
  /// Dirichlet data, also sampled one step outside the box by the nested stencil.
  SpaceTimeFunction boundary;
  BoundaryKind boundary_kind = BoundaryKind::dirichlet;
  FluxSpec flux;
  SourceSpec source;
  StructureParams structure;
};

enum class StencilKind { nested, monotone };
enum class TimeMode { explicit_euler, implicit_euler };

struct SchemeConfig {
  TimeMode mode = TimeMode::explicit_euler;
  StencilKind stencil = StencilKind::nested;
  double tau = 0.0;  // <= 0 selects cfl_safety * cfl_limit
  double cfl_safety = 0.9;
  // Each implicit step solves until the max-norm residual is at most
  // linear_solver_tol / steps (or a rounding floor), so the summed solve
  // error stays below linear_solver_tol when |(I - tau L)^-1| <= 1.
  double linear_solver_tol = 1e-12;
  int max_iters = 500;
  std::size_t output_every = 1;  // keep every k-th step (the last step is always kept)
};

/// Sparse operator in difference form on interior rows:
/// (L u)_i = sum_k w_k (u[col_k] - u_i) + offset_i - ghost_mass_i u_i,
/// where ghost terms are nodes outside the box fed by boundary data.
/// Boundary rows are empty.
struct DiscreteOperator {
  std::vector<std::size_t> row_start;
  std::vector<std::size_t> cols;
  std::vector<double> weights;
  std::vector<double> offset;          // sum of ghost weight * boundary value
  std::vector<double> ghost_mass;      // sum of ghost weights
  std::vector<double> ghost_mass_abs;  // sum of |ghost weights|
  std::vector<char> interior;

  void apply(std::span<const double> u, std::span<double> out) const;
  /// Sum of |off-diagonal weights| over the row, ghosts included.
  double off_diagonal_mass(std::size_t row) const;
};

/// -sum_i X_i^*(A_i(x, t, u, Xu)) on the lattice.
DiscreteOperator assemble_operator(const ParabolicProblem& problem, StencilKind stencil, double t,
                                   const GridFunction& u);

/// Operator values on interior nodes (boundary nodes hold 0).
GridFunction discretize_divergence_form(const ParabolicProblem& problem, const GridFunction& u, double t,
                                        StencilKind stencil = StencilKind::nested);

/// B(x, t, u, Xu) at every node.
GridFunction evaluate_source(const ParabolicProblem& problem, const GridFunction& u, double t);

/// 1 / max Gershgorin off-diagonal mass over nodes and 5 time samples in [0, T].
double cfl_limit(const ParabolicProblem& problem, StencilKind stencil = StencilKind::nested);

struct SolveStats {
  std::size_t steps = 0;
  double tau = 0.0;
  std::size_t linear_iterations = 0;  // total over all steps
  std::size_t picard_iterations = 0;
  double max_linear_residual = 0.0;  // max-norm, over all solves
};

SpaceTimeGridFunction solve(const ParabolicProblem& problem, const SchemeConfig& scheme, SolveStats* stats = nullptr);

/// sum_n tau sum_x w_x (-u phi_t + X phi . A - phi B) at the later time level.
/// phi must vanish on the spatial boundary, on the first slice and on the last.
double weak_residual(const SpaceTimeGridFunction& u, const ParabolicProblem& problem,
                     const SpaceTimeGridFunction& phi);

/// Problem with `initial` sampled from f(x, 0) and boundary data f.
ParabolicProblem make_problem(EpsilonFamily family, Lattice lattice, double T, const SpaceTimeFunction& data);

}  // namespace sublab
