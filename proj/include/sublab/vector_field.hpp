#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sublab/polynomial.hpp"

namespace sublab {

/// Vector field sum_k components[k] * d/dx_k with polynomial coefficients.
class PolyVectorField {
 public:
  PolyVectorField() = default;
  explicit PolyVectorField(std::vector<Polynomial> components);

  static PolyVectorField zero(std::size_t dim);
  /// The coordinate field d/dx_axis.
  static PolyVectorField coordinate(std::size_t dim, std::size_t axis);

  std::size_t dim() const noexcept { return components_.size(); }
  const Polynomial& operator[](std::size_t k) const { return components_[k]; }
  const std::vector<Polynomial>& components() const noexcept { return components_; }
  bool is_zero() const;
  int degree() const;

  void evaluate(std::span<const double> x, std::span<double> out) const;
  std::vector<double> at(std::span<const double> x) const;

  /// Lebesgue divergence sum_k d(components[k])/dx_k.
  Polynomial divergence() const;

  /// Applies the field to a scalar polynomial: sum_k a_k d_k f.
  Polynomial apply(const Polynomial& f) const;

  PolyVectorField scaled(double s) const;
  PolyVectorField& operator+=(const PolyVectorField& other);
  PolyVectorField operator-() const { return scaled(-1.0); }
  friend PolyVectorField operator+(PolyVectorField a, const PolyVectorField& b) { return a += b; }

  bool operator==(const PolyVectorField& other) const = default;

 private:
  std::vector<Polynomial> components_;
};

/// [V, W] with components sum_j (V_j d_j W_k - W_j d_j V_k).
PolyVectorField lie_bracket(const PolyVectorField& v, const PolyVectorField& w);

/// Evaluates a fixed set of fields at many points, sharing the power table.
class FieldEvaluator {
 public:
  FieldEvaluator() = default;
  explicit FieldEvaluator(std::span<const PolyVectorField> fields);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }

  /// Writes field j at x into out[j * dim + k] (column-major n x count).
  void evaluate(std::span<const double> x, double* out) const;

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::size_t stride_ = 1;
  std::vector<CompiledPolynomial> compiled_;  // field-major
};

}  // namespace sublab
