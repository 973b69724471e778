#include "rnpint/loss.hpp"

#include <cmath>
#include <vector>

namespace rnpint {

void LossSpec::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw Error("Cauchy scale c must be positive");
}

double rho(double r, const LossSpec& spec) {
  if (spec.kind == LossKind::least_squares) return r * r;
  const double z = r / spec.c;
  return std::log1p(z * z);
}

double psi(double r, const LossSpec& spec) {
  if (spec.kind == LossKind::least_squares) return 2.0 * r;
  return 2.0 * r / (r * r + spec.c * spec.c);
}

Eigen::VectorXd km_weights(std::span<const SurvivalRecord> records) {
  const auto n = records.size();
  if (n == 0) throw Error("Kaplan-Meier weights need at least one record");
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  double survival = 1.0;  // prod_{k<i} ((n-k)/(n-k+1))^delta_k
  for (std::size_t i = 0; i < n; ++i) {
    if (records[i].delta != 0 && records[i].delta != 1)
      throw Error("event indicator must be 0 or 1");
    if (i > 0 && records[i].y < records[i - 1].y)
      throw Error("survival records must be sorted ascending by y");
    const double at_risk = static_cast<double>(n - i);  // n - i + 1 in 1-based terms
    w(static_cast<Eigen::Index>(i)) = records[i].delta / at_risk * survival;
    if (records[i].delta == 1) survival *= (at_risk - 1.0) / at_risk;
  }
  return w;
}

Eigen::VectorXd km_weights(const Eigen::VectorXd& y, const Eigen::VectorXi& delta) {
  if (y.size() != delta.size()) throw Error("response and event indicator lengths differ");
  std::vector<SurvivalRecord> records(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) records[static_cast<std::size_t>(i)] = {y(i), delta(i)};
  return km_weights(records);
}

double dataset_loss(const Eigen::VectorXd& residuals, const Eigen::VectorXd* weights,
                    const LossSpec& spec) {
  if (weights && weights->size() != residuals.size())
    throw Error("weights and residuals differ in length");
  double total = 0.0;
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double w = weights ? (*weights)(i) : 1.0;
    if (w == 0.0) continue;
    total += w * rho(residuals(i), spec);
  }
  return total;
}

Eigen::VectorXd loss_gradient(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& block,
                              const Eigen::VectorXd* weights, const LossSpec& spec) {
  if (block.rows() != residuals.size()) throw Error("design block and residuals differ in rows");
  if (weights && weights->size() != residuals.size())
    throw Error("weights and residuals differ in length");
  Eigen::VectorXd scale(residuals.size());
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double w = weights ? (*weights)(i) : 1.0;
    scale(i) = w == 0.0 ? 0.0 : -w * psi(residuals(i), spec);
  }
  return block.transpose() * scale;
}

}  // namespace rnpint
