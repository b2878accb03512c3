#include "sublab/frames.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/LU>
#include <Eigen/QR>

#include "sublab/errors.hpp"

namespace sublab {

CommutatorTable::CommutatorTable(std::vector<PolyVectorField> generators, std::vector<CommutatorEntry> entries,
                                 int step)
    : generators_(std::move(generators)), entries_(std::move(entries)), step_(step) {}

std::vector<int> CommutatorTable::degrees() const {
  std::vector<int> d;
  d.reserve(entries_.size());
  for (const auto& e : entries_) d.push_back(e.degree);
  return d;
}

CommutatorTable enumerate_commutators(std::vector<PolyVectorField> generators, int step) {
  if (step < 1) throw DomainError("enumerate_commutators: step must be >= 1");
  if (generators.empty()) throw DomainError("enumerate_commutators: no generators");
  const std::size_t n = generators.front().dim();
  for (const auto& g : generators)
    if (g.dim() != n) throw DimensionMismatch("enumerate_commutators: generators have different dimensions");

  std::vector<CommutatorEntry> entries;
  for (std::size_t i = 0; i < generators.size(); ++i)
    entries.push_back({generators[i], 1, {static_cast<int>(i)}});

  auto known = [&](const PolyVectorField& f) {
    PolyVectorField neg = -f;
    return std::any_of(entries.begin(), entries.end(),
                       [&](const CommutatorEntry& e) { return e.field == f || e.field == neg; });
  };

  std::vector<std::size_t> previous(generators.size());
  std::iota(previous.begin(), previous.end(), 0);
  for (int degree = 2; degree <= step; ++degree) {
    std::vector<CommutatorEntry> fresh;
    for (std::size_t i = 0; i < generators.size(); ++i) {
      for (std::size_t k : previous) {
        const CommutatorEntry& y = entries[k];
        if (degree == 2 && static_cast<int>(i) >= y.word.front()) continue;
        PolyVectorField b = lie_bracket(generators[i], y.field);
        if (b.is_zero() || known(b)) continue;
        bool dup = std::any_of(fresh.begin(), fresh.end(),
                               [&](const CommutatorEntry& e) { return e.field == b || e.field == -b; });
        if (dup) continue;
        std::vector<int> word{static_cast<int>(i)};
        word.insert(word.end(), y.word.begin(), y.word.end());
        fresh.push_back({std::move(b), degree, std::move(word)});
      }
    }
    previous.clear();
    for (auto& e : fresh) {
      previous.push_back(entries.size());
      entries.push_back(std::move(e));
    }
    if (previous.empty()) break;
  }
  return CommutatorTable(std::move(generators), std::move(entries), step);
}

int hormander_rank(const CommutatorTable& table, std::span<const double> x) {
  const std::size_t n = table.dim();
  Eigen::MatrixXd m(n, table.size());
  for (std::size_t j = 0; j < table.size(); ++j) {
    auto v = table[j].field.at(x);
    for (std::size_t k = 0; k < n; ++k) m(k, j) = v[k];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(m);
  qr.setThreshold(1e-12);
  return static_cast<int>(qr.rank());
}

EpsilonFamily::EpsilonFamily(CommutatorTable table, double epsilon) : table_(std::move(table)), epsilon_(epsilon) {
  const std::size_t m = table_.generator_count();
  const std::size_t p = table_.size();
  for (std::size_t i = 0; i < p; ++i) {
    const auto& e = table_[i];
    if (i < m) rescaled_.push_back(e.field);
    else rescaled_.push_back(e.field.scaled(std::pow(epsilon_, e.degree - 1)));
  }
  extended_ = rescaled_;
  degrees_eps_.assign(p, 1);
  for (std::size_t i = m; i < p; ++i) {
    extended_.push_back(table_[i].field);
    degrees_eps_.push_back(table_[i].degree);
  }
  extended_eval_ = FieldEvaluator(extended_);
  rescaled_eval_ = FieldEvaluator(rescaled_);
}

Eigen::MatrixXd EpsilonFamily::extended_frame(std::span<const double> x) const {
  Eigen::MatrixXd m(dim(), extended_size());
  extended_eval_.evaluate(x, m.data());
  return m;
}

Eigen::MatrixXd EpsilonFamily::rescaled_frame(std::span<const double> x) const {
  Eigen::MatrixXd m(dim(), size());
  rescaled_eval_.evaluate(x, m.data());
  return m;
}

EpsilonFamily rescale(const CommutatorTable& table, double epsilon, double epsilon_max) {
  if (!(epsilon_max > 0.0 && epsilon_max <= 1.0)) throw DomainError("rescale: epsilon_max must lie in (0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= epsilon_max))
    throw DomainError("rescale: epsilon " + std::to_string(epsilon) + " outside [0, epsilon_max]");
  return EpsilonFamily(table, epsilon);
}

IndexTuple make_index(const EpsilonFamily& family, std::vector<int> indices) {
  if (indices.size() != family.dim()) throw DimensionMismatch("index tuple must have n entries");
  IndexTuple t;
  for (std::size_t a = 0; a < indices.size(); ++a) {
    int i = indices[a];
    if (i < 0 || static_cast<std::size_t>(i) >= family.extended_size())
      throw DomainError("index " + std::to_string(i) + " outside the extended family");
    for (std::size_t b = 0; b < a; ++b)
      if (indices[b] == i) throw DomainError("index tuple has repeated entries");
    t.degree_sum += family.degrees_eps()[static_cast<std::size_t>(i)];
  }
  t.indices = std::move(indices);
  return t;
}

void for_each_increasing_tuple(std::size_t count, std::size_t n,
                               const std::function<void(std::span<const int>)>& visit) {
  if (n == 0 || n > count) return;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    visit(idx);
    std::size_t k = n;
    while (k > 0 && static_cast<std::size_t>(idx[k - 1]) == count - n + k - 1) --k;
    if (k == 0) return;
    ++idx[k - 1];
    for (std::size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
}

namespace {

double determinant(const Eigen::MatrixXd& m) {
  switch (m.rows()) {
    case 1:
      return m(0, 0);
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default:
      return m.fullPivLu().determinant();
  }
}

double tuple_det(const Eigen::MatrixXd& frame, std::span<const int> idx) {
  Eigen::MatrixXd m(frame.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = frame.col(idx[j]);
  return determinant(m);
}

}  // namespace

double lambda_det(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index) {
  if (index.indices.size() != family.dim()) throw DimensionMismatch("lambda_det: index tuple must have n entries");
  return tuple_det(family.extended_frame(x), index.indices);
}

IndexTuple best_index(const EpsilonFamily& family, std::span<const double> x, double r, double c2) {
  if (!(c2 > 0.0 && c2 < 1.0)) throw DomainError("best_index: C2 must lie in (0, 1)");
  if (!(r > 0.0)) throw DomainError("best_index: r must be positive");
  const Eigen::MatrixXd frame = family.extended_frame(x);
  const auto& deg = family.degrees_eps();
  std::vector<int> best;
  double best_weight = 0.0;
  for_each_increasing_tuple(family.extended_size(), family.dim(), [&](std::span<const int> idx) {
    int d = 0;
    for (int i : idx) d += deg[static_cast<std::size_t>(i)];
    double w = std::abs(tuple_det(frame, idx)) * std::pow(r, d);
    if (w > best_weight) {
      best_weight = w;
      best.assign(idx.begin(), idx.end());
    }
  });
  if (best.empty()) throw HormanderFailure("best_index: every lambda_I vanishes at the requested point");
  return make_index(family, std::move(best));
}

double volume_polynomial(const EpsilonFamily& family, std::span<const double> x, double r) {
  if (!(r > 0.0)) throw DomainError("volume_polynomial: r must be positive");
  const Eigen::MatrixXd frame = family.extended_frame(x);
  const auto& deg = family.degrees_eps();
  double sum = 0.0;
  for_each_increasing_tuple(family.extended_size(), family.dim(), [&](std::span<const int> idx) {
    int d = 0;
    for (int i : idx) d += deg[static_cast<std::size_t>(i)];
    sum += std::abs(tuple_det(frame, idx)) * std::pow(r, d);
  });
  return sum;
}

std::vector<int> complement(const EpsilonFamily& family, const IndexTuple& index) {
  std::vector<int> rest;
  for (int i = 0; i < static_cast<int>(family.extended_size()); ++i)
    if (std::find(index.indices.begin(), index.indices.end(), i) == index.indices.end()) rest.push_back(i);
  return rest;
}

}  // namespace sublab
