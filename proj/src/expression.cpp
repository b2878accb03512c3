#include "sublab/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <numbers>

#include "sublab/errors.hpp"

namespace sublab {

struct Expression::Node {
  enum class Kind { number, variable, time, neg, add, sub, mul, div, pow, call1, call2 } kind;
  double value = 0.0;
  std::size_t index = 0;
  double (*f1)(double) = nullptr;
  double (*f2)(double, double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(std::span<const double> x, double t) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::variable: return x[index];
      case Kind::time: return t;
      case Kind::neg: return -a->eval(x, t);
      case Kind::add: return a->eval(x, t) + b->eval(x, t);
      case Kind::sub: return a->eval(x, t) - b->eval(x, t);
      case Kind::mul: return a->eval(x, t) * b->eval(x, t);
      case Kind::div: return a->eval(x, t) / b->eval(x, t);
      case Kind::pow: return std::pow(a->eval(x, t), b->eval(x, t));
      case Kind::call1: return f1(a->eval(x, t));
      case Kind::call2: return f2(a->eval(x, t), b->eval(x, t));
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind k, NodePtr a = nullptr, NodePtr b = nullptr) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

const std::map<std::string, double (*)(double)>& unary_functions() {
  static const std::map<std::string, double (*)(double)> f{
      {"sin", [](double v) { return std::sin(v); }},   {"cos", [](double v) { return std::cos(v); }},
      {"tan", [](double v) { return std::tan(v); }},   {"exp", [](double v) { return std::exp(v); }},
      {"log", [](double v) { return std::log(v); }},   {"sqrt", [](double v) { return std::sqrt(v); }},
      {"abs", [](double v) { return std::abs(v); }},   {"tanh", [](double v) { return std::tanh(v); }}};
  return f;
}

const std::map<std::string, double (*)(double, double)>& binary_functions() {
  static const std::map<std::string, double (*)(double, double)> f{
      {"min", [](double a, double b) { return std::min(a, b); }},
      {"max", [](double a, double b) { return std::max(a, b); }}};
  return f;
}

class Parser {
 public:
  Parser(const std::string& s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const { throw ParseError(why, pos_); }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr n = term();
    for (;;) {
      if (accept('+')) n = make(Kind::add, n, term());
      else if (accept('-')) n = make(Kind::sub, n, term());
      else return n;
    }
  }
  NodePtr term() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = make(Kind::mul, n, unary());
      else if (accept('/')) n = make(Kind::div, n, unary());
      else return n;
    }
  }
  NodePtr unary() {
    if (accept('-')) return make(Kind::neg, unary());
    if (accept('+')) return unary();
    NodePtr base = atom();
    if (accept('^')) return make(Kind::pow, base, unary());
    return base;
  }
  NodePtr atom() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of expression");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - begin);
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::number;
      n->value = v;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      const std::string name = s_.substr(start, pos_ - start);
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        if (auto it = unary_functions().find(name); it != unary_functions().end()) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call1;
          n->f1 = it->second;
          n->a = expr();
          if (!accept(')')) fail("expected ')' after the argument of " + name);
          return n;
        }
        if (auto it = binary_functions().find(name); it != binary_functions().end()) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call2;
          n->f2 = it->second;
          n->a = expr();
          if (!accept(',')) fail(name + " takes two arguments");
          n->b = expr();
          if (!accept(')')) fail("expected ')' after the arguments of " + name);
          return n;
        }
        pos_ = start;
        fail("unknown function '" + name + "'");
      }
      for (std::size_t k = 0; k < vars_.size(); ++k)
        if (vars_[k] == name) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::variable;
          n->index = k;
          return n;
        }
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::number;
      if (name == "t") n->kind = Kind::time;
      else if (name == "pi") n->value = std::numbers::pi;
      else if (name == "e") n->value = std::numbers::e;
      else {
        pos_ = start;
        fail("unknown variable '" + name + "'");
      }
      return n;
    }
    fail("unexpected character '" + std::string(1, c) + "'");
  }

  const std::string& s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(const std::string& text, const std::vector<std::string>& variables) {
  Expression e;
  e.text_ = text;
  e.root_ = Parser(text, variables).parse();
  return e;
}

double Expression::operator()(std::span<const double> x, double t) const {
  if (!root_) throw DomainError("evaluating an empty expression");
  return root_->eval(x, t);
}

}  // namespace sublab
