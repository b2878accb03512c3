#include "sublab/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sublab/errors.hpp"

namespace sublab {

Polynomial Polynomial::constant(std::size_t dim, double value) {
  Polynomial p(dim);
  p.add_term(Exponents(dim, 0), value);
  return p;
}

Polynomial Polynomial::variable(std::size_t dim, std::size_t axis) {
  if (axis >= dim) throw DimensionMismatch("variable axis out of range");
  Exponents e(dim, 0);
  e[axis] = 1;
  Polynomial p(dim);
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::monomial(double coefficient, Exponents exponents) {
  Polynomial p(exponents.size());
  p.add_term(exponents, coefficient);
  return p;
}

int Polynomial::degree() const {
  int d = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int k : e) s += k;
    d = std::max(d, s);
  }
  return d;
}

void Polynomial::add_term(const Exponents& exponents, double coefficient) {
  if (exponents.size() != dim_) throw DimensionMismatch("exponent tuple has wrong length");
  if (coefficient == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(exponents, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second == 0.0) terms_.erase(it);
  }
}

double Polynomial::operator()(std::span<const double> x) const {
  if (x.size() < dim_) throw DimensionMismatch("evaluation point has too few coordinates");
  double sum = 0.0;
  for (const auto& [e, c] : terms_) {
    double t = c;
    for (std::size_t k = 0; k < dim_; ++k)
      for (int j = 0; j < e[k]; ++j) t *= x[k];
    sum += t;
  }
  return sum;
}

Polynomial Polynomial::derivative(std::size_t axis) const {
  if (axis >= dim_) throw DimensionMismatch("derivative axis out of range");
  Polynomial out(dim_);
  for (const auto& [e, c] : terms_) {
    if (e[axis] == 0) continue;
    Exponents d = e;
    d[axis] -= 1;
    out.add_term(d, c * e[axis]);
  }
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.dim_ != dim_) throw DimensionMismatch("polynomial dimensions differ");
  for (const auto& [e, c] : other.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  if (other.dim_ != dim_) throw DimensionMismatch("polynomial dimensions differ");
  for (const auto& [e, c] : other.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= s;
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("polynomial dimensions differ");
  Polynomial out(a.dim());
  for (const auto& [ea, ca] : a.terms()) {
    for (const auto& [eb, cb] : b.terms()) {
      Exponents e(a.dim());
      for (std::size_t k = 0; k < e.size(); ++k) e[k] = ea[k] + eb[k];
      out.add_term(e, ca * cb);
    }
  }
  return out;
}

std::vector<std::string> default_variable_names(std::size_t dim) {
  static const char* xyz[] = {"x", "y", "z"};
  std::vector<std::string> names;
  for (std::size_t k = 0; k < dim; ++k)
    names.push_back(dim <= 3 ? std::string(xyz[k]) : "x" + std::to_string(k + 1));
  return names;
}

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    char s[32];
    std::snprintf(s, sizeof s, "%.*g", prec, v);
    if (std::strtod(s, nullptr) == v) return s;
  }
  return buf;
}

}  // namespace

std::string Polynomial::to_string(std::span<const std::string> names) const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  // Highest total degree first reads more naturally; ties keep map order.
  std::vector<std::pair<Exponents, double>> ordered(terms_.begin(), terms_.end());
  std::stable_sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    int da = 0, db = 0;
    for (int k : a.first) da += k;
    for (int k : b.first) db += k;
    return da > db;
  });
  for (const auto& [e, c] : ordered) {
    double mag = std::abs(c);
    if (first) {
      if (c < 0) os << "-";
    } else {
      os << (c < 0 ? " - " : " + ");
    }
    first = false;
    bool constant = std::all_of(e.begin(), e.end(), [](int k) { return k == 0; });
    bool wrote = false;
    if (mag != 1.0 || constant) {
      os << format_number(mag);
      wrote = true;
    }
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (e[k] == 0) continue;
      if (wrote) os << "*";
      os << names[k];
      if (e[k] > 1) os << "^" << e[k];
      wrote = true;
    }
  }
  return os.str();
}

std::string Polynomial::to_string() const {
  auto names = default_variable_names(dim_);
  return to_string(names);
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, std::size_t dim, std::span<const std::string> names)
      : text_(text), dim_(dim), names_(names) {}

  Polynomial parse() {
    skip();
    if (pos_ == text_.size()) throw ParseError("empty polynomial", pos_);
    Polynomial p = expr();
    skip();
    if (pos_ != text_.size()) throw ParseError(std::string("unexpected '") + text_[pos_] + "'", pos_);
    return p;
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Polynomial expr() {
    Polynomial sum(dim_);
    bool negate = false;
    if (accept('-')) negate = true;
    else accept('+');
    Polynomial t = term();
    sum += negate ? -t : t;
    while (true) {
      if (accept('+')) sum += term();
      else if (accept('-')) sum -= term();
      else break;
    }
    return sum;
  }

  Polynomial term() {
    Polynomial p = factor();
    while (true) {
      if (accept('*')) {
        p = p * factor();
      } else if (accept('/')) {
        skip();
        std::size_t at = pos_;
        double d = number();
        if (d == 0.0) throw ParseError("division by zero", at);
        p *= 1.0 / d;
      } else {
        break;
      }
    }
    return p;
  }

  Polynomial factor() {
    skip();
    if (pos_ >= text_.size()) throw ParseError("expected a factor", pos_);
    char c = text_[pos_];
    Polynomial base(dim_);
    if (c == '(') {
      ++pos_;
      base = expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return Polynomial::constant(dim_, number());
    } else if (std::isalpha(static_cast<unsigned char>(c))) {
      base = Polynomial::variable(dim_, variable());
    } else {
      throw ParseError(std::string("unexpected '") + c + "'", pos_);
    }
    if (accept('^')) {
      skip();
      std::size_t at = pos_;
      std::size_t end = pos_;
      while (end < text_.size() && std::isdigit(static_cast<unsigned char>(text_[end]))) ++end;
      if (end == at) throw ParseError("expected a nonnegative integer exponent", at);
      int e = std::stoi(text_.substr(at, end - at));
      pos_ = end;
      Polynomial out = Polynomial::constant(dim_, 1.0);
      for (int k = 0; k < e; ++k) out = out * base;
      return out;
    }
    return base;
  }

  double number() {
    skip();
    std::size_t at = pos_;
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr == begin) throw ParseError("expected a number", at);
    pos_ += static_cast<std::size_t>(ptr - begin);
    return v;
  }

  std::size_t variable() {
    std::size_t at = pos_;
    std::size_t end = pos_;
    while (end < text_.size() && std::isalnum(static_cast<unsigned char>(text_[end]))) ++end;
    std::string name = text_.substr(at, end - at);
    pos_ = end;
    for (std::size_t k = 0; k < names_.size() && k < dim_; ++k)
      if (names_[k] == name) return k;
    if (name.size() > 1 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return std::isdigit(static_cast<unsigned char>(ch)); })) {
      std::size_t k = std::stoul(name.substr(1));
      if (k >= 1 && k <= dim_) return k - 1;
    }
    throw ParseError("unknown variable '" + name + "'", at);
  }

  const std::string& text_;
  std::size_t dim_;
  std::span<const std::string> names_;
  std::size_t pos_ = 0;
};

}  // namespace

Polynomial parse_polynomial(const std::string& text, std::size_t dim, std::span<const std::string> names) {
  return Parser(text, dim, names).parse();
}

Polynomial parse_polynomial(const std::string& text, std::size_t dim) {
  auto names = default_variable_names(dim);
  return parse_polynomial(text, dim, names);
}

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : dim_(p.dim()) {
  for (const auto& [e, c] : p.terms()) {
    coefficients_.push_back(c);
    for (int k : e) {
      exponents_.push_back(k);
      max_degree_ = std::max(max_degree_, k);
    }
  }
}

double CompiledPolynomial::evaluate(const double* powers, std::size_t stride) const {
  double sum = 0.0;
  const int* e = exponents_.data();
  for (double c : coefficients_) {
    double t = c;
    for (std::size_t k = 0; k < dim_; ++k, ++e)
      if (*e) t *= powers[k * stride + static_cast<std::size_t>(*e)];
    sum += t;
  }
  return sum;
}

}  // namespace sublab
