#pragma once

#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace rnpint {

/// Coefficient tensor for M datasets, p covariates and K basis functions,
/// plus the partition of datasets per covariate.
///
/// Equal labels within a covariate mean the coefficient vectors are
/// structurally identical: they were produced by the same shared updates
/// and are bit-identical. Labels are the only notion of equality used by
/// the fitting and evaluation code.
class CoefficientState {
 public:
  CoefficientState() = default;
  CoefficientState(std::size_t datasets, std::size_t covariates, int dimension);

  std::size_t datasets() const { return datasets_; }
  std::size_t covariates() const { return covariates_; }
  int dimension() const { return dimension_; }

  Eigen::VectorXd coef(std::size_t m, std::size_t j) const { return coef_.col(column(m, j)); }
  int label(std::size_t j, std::size_t m) const { return labels_[j * datasets_ + m]; }
  /// True when the coefficient vector has any nonzero entry.
  bool is_active(std::size_t m, std::size_t j) const { return active_[column(m, j)] != 0; }
  /// Number of active covariates in dataset m.
  std::size_t active_count(std::size_t m) const { return active_count_[m]; }

  /// Adds `increment` to the shared coefficient vector of every dataset in `subset`.
  /// The subset must lie inside one group of covariate j. A proper subset is split
  /// off into a new group; a zero increment changes nothing.
  void add(std::size_t j, DatasetMask subset, const Eigen::VectorXd& increment);

  /// Builds a state from independently estimated vectors: zero vectors share
  /// one label, every other vector gets its own.
  static CoefficientState from_independent(const std::vector<std::vector<Eigen::VectorXd>>& coef);
  /// Every dataset gets the same vector and the same label for each covariate.
  static CoefficientState from_shared(std::size_t datasets,
                                      const std::vector<Eigen::VectorXd>& coef);

  /// Labels agree with bit-level equality of the vectors.
  bool audit() const;

  friend bool operator==(const CoefficientState& a, const CoefficientState& b);

 private:
  Eigen::Index column(std::size_t m, std::size_t j) const {
    return static_cast<Eigen::Index>(m * covariates_ + j);
  }
  void set(std::size_t m, std::size_t j, const Eigen::VectorXd& value);

  std::size_t datasets_ = 0;
  std::size_t covariates_ = 0;
  int dimension_ = 0;
  Eigen::MatrixXd coef_;          // K x (M*p), column m*p + j
  std::vector<int> labels_;       // j*M + m
  std::vector<int> next_label_;   // per covariate
  std::vector<char> active_;      // m*p + j
  std::vector<std::size_t> active_count_;
};

/// One candidate update for covariate j shared by the datasets in `subset`.
struct IncrementProposal {
  std::size_t j = 0;
  DatasetMask subset = 0;
  Eigen::VectorXd gamma;
  double objective_value = 0.0;
};

/// Groups of datasets with identical coefficient vectors for covariate j,
/// ordered by smallest member.
std::vector<DatasetMask> partition_of(const CoefficientState& state, std::size_t j);

/// Every nonempty subset of every group: groups in the given order, subsets in
/// ascending bitmask order within a group.
std::vector<DatasetMask> enumerate_candidates(const std::vector<DatasetMask>& partition);

/// The group of `partition` that contains every member of `subset`, or 0 when
/// the subset is empty or crosses groups.
DatasetMask enclosing_group(const std::vector<DatasetMask>& partition, DatasetMask subset);

CoefficientState apply_increment(CoefficientState state, const IncrementProposal& proposal,
                                 double step);

/// sum over covariates s and pairs m1 < m2 of [labels equal].
std::size_t count_equal_pairs(const CoefficientState& state);

}  // namespace rnpint
