#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sublab/frames.hpp"
#include "sublab/lattice.hpp"
#include "sublab/metric.hpp"

namespace sublab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Norms and averages

/// (int (int |u|^p dx)^{q/p} dt)^{1/q} by trapezoid quadrature in space and
/// time. p or q = infinity is the lattice max.
double lpq_norm(const SpaceTimeGridFunction& u, double p, double q);

/// Forward time average u_h(t) = (1/h) int_0^h u(t + s) ds, h a multiple of
/// tau, trapezoid in time. The result has slice_count - h/tau slices.
SpaceTimeGridFunction steklov(const SpaceTimeGridFunction& u, double h);

// ---------------------------------------------------------------------------
// Structure conditions

/// Largest theta with N/2p + 1/q <= (1 - theta)/2 and N/2alpha + 1/beta <=
/// 1 - theta (plus 2/p, 1/alpha <= ...). Throws DomainError if theta <= 0.
double compute_theta(double p, double q, double alpha, double beta, double N);

struct StructureParams {
  double a = 1.0;
  double abar = 1.0;
  double norm_b = 0.0, norm_c = 0.0, norm_e = 0.0, norm_f = 0.0, norm_h = 0.0;
  double p = kInfinity, q = kInfinity;
  double norm_d = 0.0, norm_g = 0.0;
  double alpha = kInfinity, beta = kInfinity;
  double N = 4.0;
  double theta = 1.0;
};

struct StructureDiagnostic {
  bool valid = true;
  std::vector<std::string> violations;
  double kappa = 0.0;  // (|b| + |d|) |M| + |f| + |g|
  double k = 0.0;      // |f| + |g| + |h|
};

StructureDiagnostic validate_structure(const StructureParams& sp, double M = 0.0);

// ---------------------------------------------------------------------------
// Horizontal derivatives

/// X_i u for every rescaled field X^eps_i (p components; at eps = 0 the
/// bracket components vanish). Centered differences in the interior,
/// one-sided on the boundary.
std::vector<GridFunction> horizontal_gradient(const EpsilonFamily& family, const GridFunction& u);

/// Pointwise |Xu|^2 summed over components.
GridFunction gradient_energy(const EpsilonFamily& family, const GridFunction& u);

/// C_L: max over nodes of |X d| for the distance field d.
double lipschitz_constant(const EpsilonFamily& family, const DistanceField& field);

/// phi = clamp(2 - d / r, 0, 1). Throws BallEscapesBox unless B(x0, 2r) fits.
GridFunction cutoff(const DistanceField& field, double r);

// ---------------------------------------------------------------------------
// Poincare and Sobolev ratios

/// int_{B(x0,r)} |u - u_B|^2 / (r^2 int_{B(x0,2r)} |Xu|^2), x0 = field origin.
/// Throws DegenerateRatio when the denominator vanishes.
double poincare_ratio(const EpsilonFamily& family, const GridFunction& u, const DistanceField& field, double r);

using TestFunction = std::function<double(std::span<const double>)>;

/// Test ensemble around x0: the n coordinate functions, then seeded random
/// polynomials of degree <= 2 and random Fourier modes in coordinates
/// normalized by `half_widths`.
std::vector<TestFunction> poincare_ensemble(std::span<const double> x0, std::span<const double> half_widths,
                                            std::size_t size, std::uint64_t seed);

struct PoincareEstimate {
  double value = 0.0;           // max ratio over the ensemble
  std::size_t members = 0;      // members with a nonzero denominator
  std::size_t best_member = 0;
};

/// Max of poincare_ratio over `tests` on the given field.
PoincareEstimate poincare_constant_estimate(const EpsilonFamily& family, const DistanceField& field, double r,
                                            std::span<const TestFunction> tests);

/// Fits a window around B(x0, 2r), builds the field and evaluates a seeded
/// ensemble of `ensemble_size` test functions.
PoincareEstimate poincare_constant_estimate(const EpsilonFamily& family, std::span<const double> x0, double r,
                                            std::size_t ensemble_size, std::uint64_t seed,
                                            const WindowOptions& opts = {});

/// ||u||_{Np/(N-p)} / ||Xu||_p. Requires 1 <= p < N and u = 0 on the boundary.
double sobolev_ratio(const EpsilonFamily& family, const GridFunction& u, double p, double N);

}  // namespace sublab
