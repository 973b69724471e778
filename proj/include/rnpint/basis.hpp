#pragma once

#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <span>
#include <utility>
#include <vector>

namespace rnpint {

/// Spline expansion settings.
///
/// The expansion is the cubic B-spline basis on `n_inner_knots` equally
/// spaced interior knots with its first function dropped, so it has
/// `n_inner_knots + degree` columns. Dropping one function loses nothing
/// once columns are centered, because the full basis sums to one.
/// In parametric mode the expansion is the raw covariate (one column).
struct BasisConfig {
  int degree = 3;
  int n_inner_knots = 3;
  bool parametric = false;

  int dimension() const { return parametric ? 1 : n_inner_knots + degree; }
  void validate() const;
};

/// Full clamped knot sequence of one covariate.
struct KnotVector {
  int degree = 3;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> knots;

  std::vector<double> interior() const;
  /// Number of functions in the full (uncentered, intercept-carrying) basis.
  int basis_size() const { return static_cast<int>(knots.size()) - degree - 1; }

  friend bool operator==(const KnotVector&, const KnotVector&) = default;
};

KnotVector build_knots(std::span<const double> x_pooled, const BasisConfig& config);

/// Cox-de Boor evaluation of every function of the full basis, n x basis_size().
/// Inputs outside the boundary knots are clamped.
Eigen::MatrixXd evaluate_bspline(std::span<const double> x, const KnotVector& knots);

/// Uncentered expansion: n x config.dimension().
Eigen::MatrixXd expand(std::span<const double> x, const KnotVector& knots,
                       const BasisConfig& config);

/// Column centering. Returns the centered block and the subtracted means.
std::pair<Eigen::MatrixXd, Eigen::RowVectorXd> center(const Eigen::MatrixXd& block);

/// Knots and centering constants needed to expand new covariate values the
/// same way the training data were expanded.
struct BasisTransform {
  BasisConfig config;
  std::vector<KnotVector> knots;                      // [j]
  std::vector<std::vector<Eigen::RowVectorXd>> means;  // [m][j]

  std::size_t covariates() const { return knots.size(); }
  std::size_t datasets() const { return means.size(); }
  int dimension() const { return config.dimension(); }

  /// Centered design block of dataset m's centering for covariate j.
  Eigen::MatrixXd apply(std::size_t m, std::size_t j, const Eigen::VectorXd& x) const;
};

/// Centered design blocks of a set of datasets plus the transform that made them.
struct BasisExpansion {
  BasisTransform transform;
  std::vector<std::vector<Eigen::MatrixXd>> blocks;  // [m][j], n^m x K

  const Eigen::MatrixXd& block(std::size_t m, std::size_t j) const { return blocks[m][j]; }
};

/// Knots from the pooled covariate range across all matrices, centering per matrix.
BasisExpansion build_expansion(const std::vector<Eigen::MatrixXd>& X, const BasisConfig& config);

}  // namespace rnpint
