#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sublab {

/// Axis-aligned box, lower < upper componentwise.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi);
  static Box centered(std::span<const double> center, std::span<const double> half_widths);

  std::size_t dim() const noexcept { return lower.size(); }
  bool contains(std::span<const double> x) const;
  double half_width(std::size_t axis) const { return 0.5 * (upper[axis] - lower[axis]); }
  double min_half_width() const;
  double volume() const;

  bool operator==(const Box&) const = default;
};

/// Regular lattice over a box: dims[k] >= 2 nodes per axis including both
/// faces. Flat indices are row-major with the last axis fastest.
class Lattice {
 public:
  Lattice() = default;
  Lattice(Box box, std::vector<std::size_t> dims);

  /// Lattice with nodes center + i*h_k, |i| <= half_counts[k].
  static Lattice around(std::span<const double> center, std::span<const std::size_t> half_counts,
                        std::span<const double> spacing);

  const Box& box() const noexcept { return box_; }
  std::size_t dim() const noexcept { return dims_.size(); }
  const std::vector<std::size_t>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return size_; }
  double spacing(std::size_t axis) const { return spacing_[axis]; }
  const std::vector<double>& spacing() const noexcept { return spacing_; }
  std::size_t stride(std::size_t axis) const { return strides_[axis]; }

  double coordinate(std::size_t axis, std::size_t i) const;
  void unravel(std::size_t index, std::size_t* multi) const;
  std::size_t ravel(const std::size_t* multi) const;
  void point(std::size_t index, double* x) const;
  std::vector<double> point(std::size_t index) const;
  bool is_boundary(std::size_t index) const;

  /// Index of the node nearest to x (x clamped to the box).
  std::size_t nearest(std::span<const double> x) const;

  /// Trapezoid weight of the node: the volume of its dual cell clipped to
  /// the box. Weights sum to the box volume.
  double quadrature_weight(std::size_t index) const;
  std::vector<double> quadrature_weights() const;

  bool operator==(const Lattice& other) const { return box_ == other.box_ && dims_ == other.dims_; }

 private:
  Box box_;
  std::vector<std::size_t> dims_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  std::size_t size_ = 0;
};

/// Nodal values on a lattice.
class GridFunction {
 public:
  GridFunction() = default;
  explicit GridFunction(Lattice lattice, double fill = 0.0);
  GridFunction(Lattice lattice, std::vector<double> values);

  static GridFunction sample(const Lattice& lattice, const std::function<double(std::span<const double>)>& f);

  const Lattice& lattice() const noexcept { return lattice_; }
  std::size_t size() const noexcept { return values_.size(); }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Multilinear interpolation; throws DomainError outside the box.
  double interpolate(std::span<const double> x) const;
  /// Trapezoid-rule integral over the box.
  double integral() const;
  double max() const;
  double min() const;
  bool all_finite() const;

 private:
  Lattice lattice_;
  std::vector<double> values_;
};

/// Time-ordered slices on one lattice; slice k sits at t0 + k*tau.
class SpaceTimeGridFunction {
 public:
  SpaceTimeGridFunction() = default;
  SpaceTimeGridFunction(std::vector<GridFunction> slices, double t0, double tau);

  const Lattice& lattice() const { return slices_.front().lattice(); }
  std::size_t slice_count() const noexcept { return slices_.size(); }
  const GridFunction& slice(std::size_t k) const { return slices_[k]; }
  GridFunction& slice(std::size_t k) { return slices_[k]; }
  const std::vector<GridFunction>& slices() const noexcept { return slices_; }
  double t0() const noexcept { return t0_; }
  double tau() const noexcept { return tau_; }
  double time(std::size_t k) const { return t0_ + static_cast<double>(k) * tau_; }
  double t_end() const { return time(slices_.size() - 1); }

 private:
  std::vector<GridFunction> slices_;
  double t0_ = 0.0;
  double tau_ = 1.0;
};

/// CSV with a header row `x,y,...,value` (or `t,x,...` for space-time);
/// numbers printed with 17 significant digits.
void write_csv(std::ostream& out, const GridFunction& u, std::span<const std::string> names = {});
void write_csv(std::ostream& out, const SpaceTimeGridFunction& u, std::span<const std::string> names = {});

/// Binary layouts are described in docs/formats.md.
void write_binary(std::ostream& out, const GridFunction& u);
GridFunction read_grid_function(std::istream& in);
void write_binary(std::ostream& out, const SpaceTimeGridFunction& u);
SpaceTimeGridFunction read_space_time(std::istream& in);

namespace binary {
void write_lattice(std::ostream& out, const Lattice& lattice);
Lattice read_lattice(std::istream& in);
void write_f64(std::ostream& out, double v);
double read_f64(std::istream& in);
void write_u32(std::ostream& out, std::uint32_t v);
std::uint32_t read_u32(std::istream& in);
void write_u64(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64(std::istream& in);
void expect_magic(std::istream& in, const char (&magic)[5]);
}  // namespace binary

}  // namespace sublab
