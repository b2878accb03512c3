#include "sublab/vector_field.hpp"

#include <algorithm>

#include "sublab/errors.hpp"

namespace sublab {

PolyVectorField::PolyVectorField(std::vector<Polynomial> components) : components_(std::move(components)) {
  for (const auto& c : components_)
    if (c.dim() != components_.size())
      throw DimensionMismatch("vector field component dimension differs from field dimension");
}

PolyVectorField PolyVectorField::zero(std::size_t dim) {
  return PolyVectorField(std::vector<Polynomial>(dim, Polynomial(dim)));
}

PolyVectorField PolyVectorField::coordinate(std::size_t dim, std::size_t axis) {
  std::vector<Polynomial> c(dim, Polynomial(dim));
  c.at(axis) = Polynomial::constant(dim, 1.0);
  return PolyVectorField(std::move(c));
}

bool PolyVectorField::is_zero() const {
  return std::all_of(components_.begin(), components_.end(), [](const Polynomial& p) { return p.is_zero(); });
}

int PolyVectorField::degree() const {
  int d = 0;
  for (const auto& c : components_) d = std::max(d, c.degree());
  return d;
}

void PolyVectorField::evaluate(std::span<const double> x, std::span<double> out) const {
  for (std::size_t k = 0; k < components_.size(); ++k) out[k] = components_[k](x);
}

std::vector<double> PolyVectorField::at(std::span<const double> x) const {
  std::vector<double> out(dim());
  evaluate(x, out);
  return out;
}

Polynomial PolyVectorField::divergence() const {
  Polynomial div(dim());
  for (std::size_t k = 0; k < dim(); ++k) div += components_[k].derivative(k);
  return div;
}

Polynomial PolyVectorField::apply(const Polynomial& f) const {
  if (f.dim() != dim()) throw DimensionMismatch("field and function dimensions differ");
  Polynomial out(dim());
  for (std::size_t j = 0; j < dim(); ++j) {
    if (components_[j].is_zero()) continue;
    out += components_[j] * f.derivative(j);
  }
  return out;
}

PolyVectorField PolyVectorField::scaled(double s) const {
  PolyVectorField out = *this;
  for (auto& c : out.components_) c *= s;
  return out;
}

PolyVectorField& PolyVectorField::operator+=(const PolyVectorField& other) {
  if (other.dim() != dim()) throw DimensionMismatch("vector field dimensions differ");
  for (std::size_t k = 0; k < dim(); ++k) components_[k] += other.components_[k];
  return *this;
}

PolyVectorField lie_bracket(const PolyVectorField& v, const PolyVectorField& w) {
  if (v.dim() != w.dim()) throw DimensionMismatch("lie_bracket: fields have different dimensions");
  const std::size_t n = v.dim();
  std::vector<Polynomial> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(v.apply(w[k]) - w.apply(v[k]));
  return PolyVectorField(std::move(out));
}

FieldEvaluator::FieldEvaluator(std::span<const PolyVectorField> fields) : count_(fields.size()) {
  if (!fields.empty()) dim_ = fields.front().dim();
  int max_degree = 0;
  for (const auto& f : fields) {
    if (f.dim() != dim_) throw DimensionMismatch("FieldEvaluator: mixed dimensions");
    for (const auto& c : f.components()) {
      compiled_.emplace_back(c);
      max_degree = std::max(max_degree, compiled_.back().max_degree());
    }
  }
  stride_ = static_cast<std::size_t>(max_degree) + 1;
}

void FieldEvaluator::evaluate(std::span<const double> x, double* out) const {
  // Small fixed buffer covers every frame this library is used with.
  double stack_powers[64];
  std::vector<double> heap_powers;
  double* powers = stack_powers;
  if (dim_ * stride_ > 64) {
    heap_powers.resize(dim_ * stride_);
    powers = heap_powers.data();
  }
  for (std::size_t k = 0; k < dim_; ++k) {
    double* row = powers + k * stride_;
    row[0] = 1.0;
    for (std::size_t e = 1; e < stride_; ++e) row[e] = row[e - 1] * x[k];
  }
  for (std::size_t i = 0; i < compiled_.size(); ++i) out[i] = compiled_[i].evaluate(powers, stride_);
}

}  // namespace sublab
