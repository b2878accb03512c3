#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <vector>

#include "sublab/frames.hpp"
#include "sublab/lattice.hpp"

namespace sublab {

// ---------------------------------------------------------------------------
// Exponential map

/// Phi(u) = exp(sum_j u_j Y_{i_j} + sum_k v_k Y_{j_k})(x), with I = index and
/// J = complement(family, index). v may be empty (treated as zero).
std::vector<double> exp_map(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index,
                            std::span<const double> v, std::span<const double> u);

/// det of the u-Jacobian of exp_map by central differences.
double exp_jacobian(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index,
                    std::span<const double> v, std::span<const double> u);

struct JacobianReport {
  IndexTuple index;
  double lambda = 0.0;
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  std::size_t samples = 0;
  bool pass = false;
};

/// Samples |u_j| <= c1 r^{d(i_j)}, |v_k| <= c2 r^{d(j_k)} and reports the
/// range of |J Phi| / |lambda_I(x)| for I = best_index(x, r).
JacobianReport jacobian_bound_check(const EpsilonFamily& family, std::span<const double> x, double r, double c1,
                                    double c2, std::size_t samples, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Distance fields

/// Cost of the bracket loop that displaces by |w| along a degree-d bracket.
double loop_constant(int degree);

/// Length of a short admissible move by `delta` anchored at the midpoint
/// `mid`: min |c| + sum_k loop_constant(d_k) |w_k|^{1/d_k} subject to
/// X^eps(mid) c + Y_hi(mid) w = delta, where Y_hi are the unscaled brackets.
/// Returns +infinity when delta is not realizable.
class MoveCost {
 public:
  explicit MoveCost(const EpsilonFamily& family);
  double operator()(std::span<const double> mid, std::span<const double> delta) const;

 private:
  double solve(const double* f, std::size_t fcols, const double* g, const double* delta) const;

  std::size_t dim_;
  std::size_t generators_;
  bool scaled_brackets_;
  FieldEvaluator rescaled_;
  FieldEvaluator brackets_;
  std::vector<int> degrees_;
  std::vector<double> kappa_;
};

struct DistanceField {
  std::vector<double> origin;
  double epsilon = 0.0;
  int move_budget = 1;
  GridFunction values;

  const Lattice& lattice() const { return values.lattice(); }
  /// Interpolated distance; +infinity outside the lattice box.
  double value_at(std::span<const double> y) const;
  /// Smallest field value on the lattice boundary.
  double boundary_min() const;
};

/// Dijkstra on the lattice with moves |o_k| <= move_budget lattice steps,
/// priced by MoveCost, followed by up to `relax_sweeps` semi-Lagrangian
/// sweeps that let frame-realizable moves end between nodes (interpolated).
/// Throws DisconnectedField if some node is unreachable.
DistanceField distance_field(const EpsilonFamily& family, std::span<const double> origin, const Lattice& lattice,
                             int move_budget, int relax_sweeps = 0);
/// Isotropic spacing h over `box` (the box is trimmed to a whole number of steps).
DistanceField distance_field(const EpsilonFamily& family, std::span<const double> origin, const Box& box, double h,
                             int move_budget, int relax_sweeps = 0);

void write_binary(std::ostream& out, const DistanceField& field);
DistanceField read_distance_field(std::istream& in);

struct WindowOptions {
  std::size_t coarse_nodes = 17;  // per axis
  std::size_t fine_nodes = 33;    // per axis
  int move_budget = 2;
  int relax_sweeps = 30;
  double nsw_margin = 1.2;
  double fit_margin = 1.1;
};

/// Lattice centered at x fitted to the ball B(x, r): a coarse field over the
/// box spanned by |Y_j(x)| r^{d(j)} measures the ball extents, which are then
/// padded by `fit_margin`.
Lattice fit_window(const EpsilonFamily& family, std::span<const double> x, double r,
                   const WindowOptions& opts = {});

// ---------------------------------------------------------------------------
// Ball volumes

struct VolumeEstimate {
  double mean = 0.0;
  double half_width = 0.0;  // 95% confidence
  std::size_t samples = 0;
};

/// Monte-Carlo measure of {y : field(y) < r} from uniform samples in the
/// field's box. Samples are drawn in chunks of 65536 with one PRNG stream per
/// chunk (seed, chunk id), so results do not depend on evaluation order.
VolumeEstimate ball_volume(const DistanceField& field, double r, std::size_t samples, std::uint64_t seed);
/// Trapezoid quadrature of the ball indicator on the field lattice.
double ball_volume_quadrature(const DistanceField& field, double r);

/// Distance field on a window fitted to B(x, r); the window grows by 1.25
/// per axis until the ball clears the boundary.
DistanceField fitted_field(const EpsilonFamily& family, std::span<const double> x, double r,
                           const WindowOptions& opts = {});

struct BallMeasurement {
  DistanceField field;
  VolumeEstimate volume;
};

/// fit_window + distance_field + ball_volume.
BallMeasurement measure_ball(const EpsilonFamily& family, std::span<const double> x, double r, std::size_t samples,
                             std::uint64_t seed, const WindowOptions& opts = {});

struct DoublingResult {
  VolumeEstimate small;
  VolumeEstimate large;
  double ratio = 0.0;       // |B(x, 2r)| / |B(x, r)|
  double half_width = 0.0;  // first-order propagated 95% half-width of ratio
};

DoublingResult doubling_ratio(const EpsilonFamily& family, std::span<const double> x, double r,
                              std::size_t samples, std::uint64_t seed, const WindowOptions& opts = {});

// ---------------------------------------------------------------------------
// Inclusion and sandwich checks

struct InclusionReport {
  std::size_t inner_samples = 0;
  std::size_t inner_failures = 0;
  double inner_max_distance = 0.0;  // max d(x, Phi(u)) / r
  std::size_t outer_samples = 0;
  std::size_t outer_failures = 0;
  double inner_pass_rate() const { return inner_samples ? 1.0 - double(inner_failures) / inner_samples : 1.0; }
  double outer_pass_rate() const { return outer_samples ? 1.0 - double(outer_failures) / outer_samples : 1.0; }
};

/// Inner: Phi(Q(c1 r)) lies in {field <= r}. Outer: every sampled node of
/// {field < r} is reached, within one lattice step per axis, by Phi over
/// Q(c1 r / c2) (Gauss-Newton preimage search, v = 0).
InclusionReport ball_inclusion_check(const EpsilonFamily& family, std::span<const double> x, double r, double c1,
                                     double c2, std::size_t samples, const DistanceField& field,
                                     std::uint64_t seed = 1);

struct SandwichRow {
  double epsilon = 0.0;
  double r = 0.0;
  double volume = 0.0;
  double ci = 0.0;
  double lambda = 0.0;
  double ratio = 0.0;
};

struct SandwichReport {
  std::vector<SandwichRow> rows;
  double spread = 0.0;                // max/min ratio over all rows
  double spread_small_eps = 0.0;      // rows with epsilon < r
  double spread_large_eps = 0.0;      // rows with epsilon >= r
  bool pass = false;
};

SandwichReport nsw_sandwich_check(const CommutatorTable& table, std::span<const double> x,
                                  std::span<const double> radii, std::span<const double> epsilons,
                                  std::size_t samples, std::uint64_t seed, double max_spread = 32.0,
                                  double max_regime_spread = 8.0, const WindowOptions& opts = {});

/// max/min of the values (1 for a single value, +inf if min <= 0).
double spread(std::span<const double> values);

}  // namespace sublab
