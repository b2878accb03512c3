#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sublab/vector_field.hpp"

namespace sublab {

/// One enumerated commutator: the field, its degree, and the generator word
/// it was built from ([X_a, [X_b, X_c]] has word {a, b, c}).
struct CommutatorEntry {
  PolyVectorField field;
  int degree = 1;
  std::vector<int> word;
};

/// Generators followed by their nonvanishing iterated brackets up to `step`.
/// Entry k < m is generator k with degree 1.
class CommutatorTable {
 public:
  CommutatorTable() = default;
  CommutatorTable(std::vector<PolyVectorField> generators, std::vector<CommutatorEntry> entries, int step);

  std::size_t dim() const noexcept { return generators_.empty() ? 0 : generators_.front().dim(); }
  std::size_t generator_count() const noexcept { return generators_.size(); }
  std::size_t size() const noexcept { return entries_.size(); }
  int step() const noexcept { return step_; }

  const std::vector<PolyVectorField>& generators() const noexcept { return generators_; }
  const std::vector<CommutatorEntry>& entries() const noexcept { return entries_; }
  const CommutatorEntry& operator[](std::size_t k) const { return entries_[k]; }
  std::vector<int> degrees() const;

 private:
  std::vector<PolyVectorField> generators_;
  std::vector<CommutatorEntry> entries_;
  int step_ = 1;
};

/// Enumerates X^(1)..X^(step). Degree 2 uses [X_i, X_j] for i < j; degree
/// j > 2 uses [X_i, Y] for each generator i (outer) and degree-(j-1) entry Y
/// (inner). Brackets that vanish identically, or equal +/- an earlier entry,
/// are not stored.
CommutatorTable enumerate_commutators(std::vector<PolyVectorField> generators, int step);

/// Rank of the matrix whose columns are all table entries evaluated at x.
int hormander_rank(const CommutatorTable& table, std::span<const double> x);

/// The rescaled family X^eps (p fields) and its extension Y^eps (2p - m
/// fields) with degrees d_eps.
class EpsilonFamily {
 public:
  EpsilonFamily() = default;
  EpsilonFamily(CommutatorTable table, double epsilon);

  double epsilon() const noexcept { return epsilon_; }
  const CommutatorTable& table() const noexcept { return table_; }
  std::size_t dim() const noexcept { return table_.dim(); }
  std::size_t generator_count() const noexcept { return table_.generator_count(); }
  /// p: number of table entries (= number of rescaled fields).
  std::size_t size() const noexcept { return rescaled_.size(); }
  std::size_t extended_size() const noexcept { return extended_.size(); }

  const std::vector<PolyVectorField>& rescaled() const noexcept { return rescaled_; }
  const std::vector<PolyVectorField>& extended() const noexcept { return extended_; }
  const std::vector<int>& degrees_eps() const noexcept { return degrees_eps_; }

  /// n x (2p - m) matrix whose columns are the extended fields at x.
  Eigen::MatrixXd extended_frame(std::span<const double> x) const;
  /// n x p matrix whose columns are the rescaled fields at x.
  Eigen::MatrixXd rescaled_frame(std::span<const double> x) const;

  const FieldEvaluator& extended_evaluator() const noexcept { return extended_eval_; }
  const FieldEvaluator& rescaled_evaluator() const noexcept { return rescaled_eval_; }

 private:
  CommutatorTable table_;
  double epsilon_ = 0.0;
  std::vector<PolyVectorField> rescaled_;
  std::vector<PolyVectorField> extended_;
  std::vector<int> degrees_eps_;
  FieldEvaluator extended_eval_;
  FieldEvaluator rescaled_eval_;
};

/// Builds the family for `epsilon` in [0, epsilon_max], epsilon_max <= 1.
EpsilonFamily rescale(const CommutatorTable& table, double epsilon, double epsilon_max = 1.0);

/// An n-tuple of distinct 0-based indices into the extended family.
struct IndexTuple {
  std::vector<int> indices;
  int degree_sum = 0;

  bool operator==(const IndexTuple&) const = default;
};

IndexTuple make_index(const EpsilonFamily& family, std::vector<int> indices);

/// Calls `visit` with every increasing n-tuple of [0, count).
void for_each_increasing_tuple(std::size_t count, std::size_t n,
                               const std::function<void(std::span<const int>)>& visit);

/// det(Y^eps_{i_1}(x), ..., Y^eps_{i_n}(x)).
double lambda_det(const EpsilonFamily& family, std::span<const double> x, const IndexTuple& index);

/// The tuple maximizing |lambda_I(x)| r^{d_eps(I)} over increasing tuples;
/// ties go to the lexicographically smallest tuple. Satisfies the
/// C2-maximality condition for every C2 in (0, 1). Throws HormanderFailure
/// when every lambda_I(x) vanishes.
IndexTuple best_index(const EpsilonFamily& family, std::span<const double> x, double r, double c2 = 0.5);

/// Sum over increasing tuples of |lambda_I(x)| r^{d_eps(I)}.
double volume_polynomial(const EpsilonFamily& family, std::span<const double> x, double r);

/// Indices of the extended family not in `index`, increasing.
std::vector<int> complement(const EpsilonFamily& family, const IndexTuple& index);

}  // namespace sublab
