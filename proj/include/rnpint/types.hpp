#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rnpint {

/// Raised for every contract violation detected by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Outcome { continuous, survival };

/// One cohort. For survival outcomes `y` holds log observed time and
/// `delta` the event indicators.
struct Dataset {
  std::string id;
  Eigen::VectorXd y;
  std::optional<Eigen::VectorXi> delta;
  Eigen::MatrixXd X;
  std::vector<std::string> covariate_names;

  std::size_t rows() const { return static_cast<std::size_t>(y.size()); }
  std::size_t covariates() const { return static_cast<std::size_t>(X.cols()); }
  bool is_survival() const { return delta.has_value(); }
};

/// Bitmask over dataset indices; bit m set means dataset m is a member.
using DatasetMask = std::uint32_t;

inline constexpr std::size_t kMaxDatasets = 12;

inline int mask_size(DatasetMask mask) { return __builtin_popcount(mask); }

inline bool mask_contains(DatasetMask mask, std::size_t m) {
  return (mask >> m) & 1u;
}

std::string mask_to_string(DatasetMask mask);

/// Checks shapes, finiteness and delta coding shared by all fitting entry points.
void validate_datasets(const std::vector<Dataset>& data);

/// Row subset of a dataset, keeping the original order.
Dataset subset_rows(const Dataset& data, const std::vector<Eigen::Index>& rows);

/// Stable sort of rows by ascending response (required for survival fits).
Dataset sort_by_response(const Dataset& data);

bool is_sorted_by_response(const Dataset& data);

}  // namespace rnpint
