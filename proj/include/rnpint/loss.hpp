#pragma once

#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <span>

namespace rnpint {

enum class LossKind { cauchy, least_squares };

struct LossSpec {
  LossKind kind = LossKind::cauchy;
  double c = 1.0;  // Cauchy scale

  void validate() const;
};

/// rho_c(r) = log(1 + (r/c)^2) for Cauchy, r^2 for least squares.
double rho(double r, const LossSpec& spec);

/// Influence function, the derivative of rho.
double psi(double r, const LossSpec& spec);

struct SurvivalRecord {
  double y = 0.0;  // log of the observed time
  int delta = 1;   // 1 = event observed
};

/// Kaplan-Meier weights, aligned with records sorted ascending by y.
Eigen::VectorXd km_weights(std::span<const SurvivalRecord> records);
Eigen::VectorXd km_weights(const Eigen::VectorXd& y, const Eigen::VectorXi& delta);

/// sum_i w_i rho(r_i), with w_i = 1 when no weights are given.
double dataset_loss(const Eigen::VectorXd& residuals, const Eigen::VectorXd* weights,
                    const LossSpec& spec);

/// Gradient of dataset_loss(r - block * gamma) with respect to gamma at gamma = 0.
Eigen::VectorXd loss_gradient(const Eigen::VectorXd& residuals, const Eigen::MatrixXd& block,
                              const Eigen::VectorXd* weights, const LossSpec& spec);

}  // namespace rnpint
