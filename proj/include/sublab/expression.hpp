#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sublab {

/// Scalar expression in space variables and t, e.g. "0.1 + exp(-(x^2 + y^2))".
///
/// Grammar: + - * / ^ (right associative), unary minus, parentheses,
/// numbers, the constants pi and e, and the functions sin cos tan exp log
/// sqrt abs tanh (one argument) and min max (two arguments).
class Expression {
 public:
  Expression() = default;
  /// Throws ParseError with the offending position.
  static Expression parse(const std::string& text, const std::vector<std::string>& variables);

  double operator()(std::span<const double> x, double t) const;
  const std::string& text() const noexcept { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace sublab
