#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sublab {

using Exponents = std::vector<int>;

/// Multivariate polynomial in canonical form: distinct exponent tuples, no
/// zero coefficients.
class Polynomial {
 public:
  explicit Polynomial(std::size_t dim = 0) : dim_(dim) {}

  static Polynomial constant(std::size_t dim, double value);
  static Polynomial variable(std::size_t dim, std::size_t axis);
  static Polynomial monomial(double coefficient, Exponents exponents);

  std::size_t dim() const noexcept { return dim_; }
  const std::map<Exponents, double>& terms() const noexcept { return terms_; }
  bool is_zero() const noexcept { return terms_.empty(); }
  int degree() const;

  double operator()(std::span<const double> x) const;

  Polynomial derivative(std::size_t axis) const;

  /// Adds `coefficient * x^exponents`, dropping the term if it cancels.
  void add_term(const Exponents& exponents, double coefficient);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  Polynomial operator-() const { return *this * -1.0; }

  bool operator==(const Polynomial& other) const = default;

  /// Renders in the grammar accepted by `parse_polynomial`.
  std::string to_string(std::span<const std::string> names) const;
  std::string to_string() const;

 private:
  std::size_t dim_;
  std::map<Exponents, double> terms_;
};

/// Default variable names: x, y, z for dim <= 3, otherwise x1..xn.
std::vector<std::string> default_variable_names(std::size_t dim);

/// Parses a polynomial string.
///
/// Grammar (whitespace ignored):
///   expr   := ['+'|'-'] term (('+'|'-') term)*
///   term   := factor (('*' factor) | ('/' number))*
///   factor := number | name ['^' int] | '(' expr ')' ['^' int]
///
/// `name` is one of `names` or, for any dim, `x1`..`xn` (1-based). Numbers
/// accept decimal and exponent notation. Throws ParseError with the offset
/// of the offending character.
Polynomial parse_polynomial(const std::string& text, std::size_t dim,
                            std::span<const std::string> names);
Polynomial parse_polynomial(const std::string& text, std::size_t dim);

/// Flat term list for repeated evaluation in inner loops.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p);

  /// `powers[axis * stride + e]` must hold x[axis]^e for e <= max_degree().
  double evaluate(const double* powers, std::size_t stride) const;
  int max_degree() const noexcept { return max_degree_; }

 private:
  std::size_t dim_ = 0;
  int max_degree_ = 0;
  std::vector<double> coefficients_;
  std::vector<int> exponents_;  // term-major, dim_ entries per term
};

}  // namespace sublab
