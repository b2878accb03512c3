#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sublab/functional.hpp"
#include "sublab/metric.hpp"
#include "sublab/pde.hpp"

namespace sublab {

enum class Region { Q, Qplus, Qminus, Dplus, Dminus };

/// Node masks over a space-time grid (index slice * lattice.size() + node):
///   Q      = B(x, 3 rho)   x [t - 9 rho^2, t]
///   Qplus  = B(x, rho)     x [t - rho^2, t]
///   Qminus = B(x, rho)     x [t - 8 rho^2, t - 7 rho^2]
///   Dplus  = B(x, rho/2)   x [t - rho^2, t - rho^2/2]
///   Dminus = B(x, rho/2)   x [t - 15 rho^2/2, t - 7 rho^2]
/// Balls and time intervals are closed.
struct CylinderSet {
  std::vector<double> center;
  double tbar = 0.0;
  double rho = 0.0;
  std::size_t nodes = 0;   // lattice size
  std::size_t slices = 0;
  std::vector<char> Q, Qplus, Qminus, Dplus, Dminus;

  const std::vector<char>& mask(Region r) const;
  std::size_t count(Region r) const;
};

/// Space-time grid of `slices` slices at t0 + k tau on `lattice`. The ball
/// centre is the field origin. Throws BallEscapesBox if B(x, 3 rho) reaches
/// the lattice or field boundary, DomainError if the time window leaves the
/// grid or rho >= 20 R.
CylinderSet make_cylinders(const DistanceField& field, double tbar, double rho, const Lattice& lattice, double t0,
                           double tau, std::size_t slices, double R = kInfinity);
CylinderSet make_cylinders(const DistanceField& field, double tbar, double rho, const SpaceTimeGridFunction& grid,
                           double R = kInfinity);

/// max_{Qminus} u / min_{Qplus} (u + rho^theta k). Requires u >= 0 on Q.
double harnack_quotient(const SpaceTimeGridFunction& u, const CylinderSet& cyl, double k, double theta);

/// max over spatially interior nodes of u - (M + C_cap kappa).
double max_principle_margin(const SpaceTimeGridFunction& u, double M, double kappa, double C_cap);

struct LogOscillationOptions {
  double offset = 1e-12;               // u_bar = u + k + offset
  std::size_t pair_budget = 20000000;  // exact double sum up to this many pairs
  std::size_t samples = 4000000;       // seeded pairs beyond the budget
  std::uint64_t seed = 1;
};

/// Weighted double average over (x,t) in Qplus, (y,s) in Qminus of
/// sqrt((log u_bar(y,s) - log u_bar(x,t))^+).
double log_oscillation(const SpaceTimeGridFunction& u, const CylinderSet& cyl, double k,
                       const LogOscillationOptions& opts = {});

// ---------------------------------------------------------------------------
// Epsilon sweep

struct SweepConfig {
  CommutatorTable table;
  std::vector<double> center;
  std::vector<double> epsilons;
  std::vector<double> rhos;
  // Heat problem: explicit monotone scheme on heat_nodes^n over a window
  // around B(center, 3 rho), run to T = tbar = time_factor * rho^2.
  std::size_t heat_nodes = 17;
  std::size_t heat_slices = 200;  // stored time slices, evenly spaced in [0, T]
  double time_factor = 10.0;
  double cfl_safety = 0.9;
  // Datum floor + exp(-sum_k ((x_k - c_k) / (width rho^{w_k}))^2), w_k the
  // homogeneous weight of axis k.
  double bump_floor = 0.1;
  double bump_width = 1.0;
  // Metric quantities.
  std::size_t volume_samples = 200000;
  std::size_t ensemble_size = 16;
  std::uint64_t seed = 1;
  WindowOptions window;
  // Uniformity factors at fixed rho.
  double harnack_factor = 2.0;
  double poincare_factor = 2.0;
  double doubling_factor = 1.25;
  std::size_t workers = 0;  // 0 = hardware concurrency
};

struct SweepRow {
  double epsilon = 0.0;
  double rho = 0.0;
  double harnack_quotient = 0.0;
  double doubling_ratio = 0.0;
  double poincare_estimate = 0.0;
  double max_principle_margin = 0.0;
  double log_oscillation = 0.0;
  std::string error;  // empty on success
};

struct SweepGroup {
  double rho = 0.0;
  double harnack_spread = 0.0;
  double poincare_spread = 0.0;
  double doubling_spread_small = 1.0;  // epsilon < rho
  double doubling_spread_large = 1.0;  // epsilon >= rho
  bool harnack_pass = false;
  bool poincare_pass = false;
  bool doubling_pass = false;
  bool max_principle_pass = false;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // rho-major, epsilon-minor
  std::vector<SweepGroup> groups;
  bool complete = false;  // every row succeeded
  bool pass() const;
};

/// Per-axis homogeneous weights at x: the smallest degree among table
/// entries with a nonzero component along the axis.
std::vector<int> axis_weights(const CommutatorTable& table, std::span<const double> x);

/// One (epsilon, rho) row; throws on failure.
/// The heat run behind one sweep row: field on the heat window, problem,
/// solution to T = tbar and the cylinders at (center, tbar, rho).
struct HeatSolution {
  DistanceField field;
  ParabolicProblem problem;
  SpaceTimeGridFunction u;
  CylinderSet cylinders;
  double M = 0.0;  // bound on the initial and boundary data
};

HeatSolution sweep_heat_solution(const SweepConfig& config, double epsilon, double rho);

SweepRow sweep_row(const SweepConfig& config, double epsilon, double rho);

SweepReport epsilon_sweep(const SweepConfig& config);

void write_sweep_csv(std::ostream& out, const SweepReport& report);

}  // namespace sublab
