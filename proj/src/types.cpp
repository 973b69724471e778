#include "rnpint/types.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rnpint {

std::string mask_to_string(DatasetMask mask) {
  std::string out = "{";
  bool first = true;
  for (std::size_t m = 0; m < 32; ++m) {
    if (!mask_contains(mask, m)) continue;
    if (!first) out += ",";
    out += std::to_string(m + 1);
    first = false;
  }
  return out + "}";
}

void validate_datasets(const std::vector<Dataset>& data) {
  if (data.empty()) throw Error("no datasets supplied");
  if (data.size() > kMaxDatasets)
    throw Error("at most " + std::to_string(kMaxDatasets) + " datasets are supported");
  const auto p = data.front().covariates();
  const bool survival = data.front().is_survival();
  for (const auto& d : data) {
    if (d.rows() == 0) throw Error("dataset '" + d.id + "' is empty");
    if (static_cast<std::size_t>(d.X.rows()) != d.rows())
      throw Error("dataset '" + d.id + "': response and covariate row counts differ");
    if (d.covariates() != p)
      throw Error("dataset '" + d.id + "' has " + std::to_string(d.covariates()) +
                  " covariates, expected " + std::to_string(p));
    if (p == 0) throw Error("datasets have no covariates");
    if (d.is_survival() != survival)
      throw Error("datasets mix survival and continuous outcomes");
    if (!d.y.allFinite() || !d.X.allFinite())
      throw Error("dataset '" + d.id + "' contains non-finite values");
    if (d.delta) {
      if (d.delta->size() != d.y.size())
        throw Error("dataset '" + d.id + "': delta length differs from response length");
      for (Eigen::Index i = 0; i < d.delta->size(); ++i)
        if ((*d.delta)(i) != 0 && (*d.delta)(i) != 1)
          throw Error("dataset '" + d.id + "': delta must be 0 or 1");
    }
  }
}

Dataset subset_rows(const Dataset& data, const std::vector<Eigen::Index>& rows) {
  Dataset out;
  out.id = data.id;
  out.covariate_names = data.covariate_names;
  const auto n = static_cast<Eigen::Index>(rows.size());
  out.y.resize(n);
  out.X.resize(n, data.X.cols());
  if (data.delta) out.delta = Eigen::VectorXi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    out.y(i) = data.y(rows[i]);
    out.X.row(i) = data.X.row(rows[i]);
    if (data.delta) (*out.delta)(i) = (*data.delta)(rows[i]);
  }
  return out;
}

Dataset sort_by_response(const Dataset& data) {
  std::vector<Eigen::Index> order(data.rows());
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return data.y(a) < data.y(b); });
  return subset_rows(data, order);
}

bool is_sorted_by_response(const Dataset& data) {
  for (Eigen::Index i = 1; i < data.y.size(); ++i)
    if (data.y(i) < data.y(i - 1)) return false;
  return true;
}

}  // namespace rnpint
