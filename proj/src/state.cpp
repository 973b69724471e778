#include "rnpint/state.hpp"

#include <algorithm>
#include <cstring>
#include <map>

namespace rnpint {

CoefficientState::CoefficientState(std::size_t datasets, std::size_t covariates, int dimension)
    : datasets_(datasets),
      covariates_(covariates),
      dimension_(dimension),
      coef_(Eigen::MatrixXd::Zero(dimension, static_cast<Eigen::Index>(datasets * covariates))),
      labels_(datasets * covariates, 0),
      next_label_(covariates, 1),
      active_(datasets * covariates, 0),
      active_count_(datasets, 0) {
  if (datasets == 0 || datasets > kMaxDatasets)
    throw Error("number of datasets must be between 1 and " + std::to_string(kMaxDatasets));
  if (covariates == 0) throw Error("at least one covariate is required");
  if (dimension < 1) throw Error("basis dimension must be at least 1");
}

void CoefficientState::set(std::size_t m, std::size_t j, const Eigen::VectorXd& value) {
  const auto col = column(m, j);
  coef_.col(col) = value;
  const bool now_active = (value.array() != 0.0).any();
  const bool was_active = active_[col] != 0;
  if (now_active != was_active) {
    active_[col] = now_active ? 1 : 0;
    if (now_active) ++active_count_[m];
    else --active_count_[m];
  }
}

void CoefficientState::add(std::size_t j, DatasetMask subset, const Eigen::VectorXd& increment) {
  if (j >= covariates_) throw Error("covariate index out of range");
  if (increment.size() != dimension_) throw Error("increment has the wrong dimension");
  if (subset == 0 || (subset >> datasets_) != 0) throw Error("invalid dataset subset");

  const auto groups = partition_of(*this, j);
  const DatasetMask group = enclosing_group(groups, subset);
  if (group == 0) throw Error("subset " + mask_to_string(subset) + " crosses groups");
  if ((increment.array() == 0.0).all()) return;

  std::size_t first = 0;
  while (!mask_contains(subset, first)) ++first;
  // One arithmetic operation shared by all members keeps them bit-identical.
  const Eigen::VectorXd updated = coef_.col(column(first, j)) + increment;
  const int fresh = subset != group ? next_label_[j]++ : -1;
  for (std::size_t m = 0; m < datasets_; ++m) {
    if (!mask_contains(subset, m)) continue;
    set(m, j, updated);
    if (fresh >= 0) labels_[j * datasets_ + m] = fresh;
  }
}

CoefficientState CoefficientState::from_independent(
    const std::vector<std::vector<Eigen::VectorXd>>& coef) {
  if (coef.empty() || coef.front().empty()) throw Error("empty coefficient set");
  const auto M = coef.size();
  const auto p = coef.front().size();
  const auto K = static_cast<int>(coef.front().front().size());
  CoefficientState out(M, p, K);
  for (std::size_t j = 0; j < p; ++j) {
    int next = 1;
    for (std::size_t m = 0; m < M; ++m) {
      if (coef[m].size() != p) throw Error("ragged coefficient set");
      out.set(m, j, coef[m][j]);
      out.labels_[j * M + m] = out.is_active(m, j) ? next++ : 0;
    }
    out.next_label_[j] = next;
  }
  return out;
}

CoefficientState CoefficientState::from_shared(std::size_t datasets,
                                               const std::vector<Eigen::VectorXd>& coef) {
  if (coef.empty()) throw Error("empty coefficient set");
  CoefficientState out(datasets, coef.size(), static_cast<int>(coef.front().size()));
  for (std::size_t j = 0; j < coef.size(); ++j)
    for (std::size_t m = 0; m < datasets; ++m) out.set(m, j, coef[j]);
  return out;
}

bool CoefficientState::audit() const {
  const auto bytes = sizeof(double) * static_cast<std::size_t>(dimension_);
  for (std::size_t j = 0; j < covariates_; ++j) {
    for (std::size_t a = 0; a < datasets_; ++a) {
      for (std::size_t b = a + 1; b < datasets_; ++b) {
        const bool same_label = label(j, a) == label(j, b);
        const bool same_bits =
            std::memcmp(coef_.col(column(a, j)).data(), coef_.col(column(b, j)).data(), bytes) == 0;
        if (same_label && !same_bits) return false;
        // Distinct labels with identical bits only happen for all-zero vectors
        // created by from_independent, which is fine; shared updates never collide.
      }
    }
  }
  return true;
}

bool operator==(const CoefficientState& a, const CoefficientState& b) {
  if (a.datasets_ != b.datasets_ || a.covariates_ != b.covariates_ ||
      a.dimension_ != b.dimension_)
    return false;
  const auto bytes = sizeof(double) * static_cast<std::size_t>(a.coef_.size());
  return std::memcmp(a.coef_.data(), b.coef_.data(), bytes) == 0 && a.labels_ == b.labels_;
}

std::vector<DatasetMask> partition_of(const CoefficientState& state, std::size_t j) {
  if (j >= state.covariates()) throw Error("covariate index out of range");
  std::vector<DatasetMask> groups;
  std::vector<int> seen;
  for (std::size_t m = 0; m < state.datasets(); ++m) {
    const int label = state.label(j, m);
    const auto it = std::find(seen.begin(), seen.end(), label);
    if (it == seen.end()) {
      seen.push_back(label);
      groups.push_back(DatasetMask{1} << m);
    } else {
      groups[static_cast<std::size_t>(it - seen.begin())] |= DatasetMask{1} << m;
    }
  }
  return groups;
}

std::vector<DatasetMask> enumerate_candidates(const std::vector<DatasetMask>& partition) {
  std::vector<DatasetMask> out;
  for (DatasetMask group : partition) {
    // (sub - group) & group steps through the submasks of group in increasing order.
    for (DatasetMask sub = (0u - group) & group; sub != 0; sub = (sub - group) & group)
      out.push_back(sub);
  }
  return out;
}

DatasetMask enclosing_group(const std::vector<DatasetMask>& partition, DatasetMask subset) {
  if (subset == 0) return 0;
  for (DatasetMask group : partition)
    if ((subset & group) == subset) return group;
  return 0;
}

CoefficientState apply_increment(CoefficientState state, const IncrementProposal& proposal,
                                 double step) {
  state.add(proposal.j, proposal.subset, step * proposal.gamma);
  return state;
}

std::size_t count_equal_pairs(const CoefficientState& state) {
  std::size_t count = 0;
  for (std::size_t j = 0; j < state.covariates(); ++j)
    for (std::size_t a = 0; a < state.datasets(); ++a)
      for (std::size_t b = a + 1; b < state.datasets(); ++b)
        if (state.label(j, a) == state.label(j, b)) ++count;
  return count;
}

}  // namespace rnpint
