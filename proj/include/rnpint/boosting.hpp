#pragma once

#include "rnpint/basis.hpp"
#include "rnpint/loss.hpp"
#include "rnpint/state.hpp"
#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <vector>

namespace rnpint {

struct FitConfig {
  LossSpec loss;
  double lambda = 0.0;
  double step = 0.1;       // shrinkage v
  int iterations = 300;    // T
  BasisConfig basis;
  Outcome outcome = Outcome::continuous;
  // The stopping score places lambda * pen_c inside the sum over datasets
  // (contributing M times); false counts it once, as the selection objective does.
  bool penalty_inside_sum = true;

  void validate() const;
};

/// One dataset as seen by the boosting engine. Rows with zero weight are
/// dropped up front; `sample_size` still counts them for the BIC term.
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BoostingData {
  std::vector<RowMatrix> blocks;  // [j]
  Eigen::VectorXd response;
  Eigen::VectorXd weights;  // empty means unit weights
  std::size_t sample_size = 0;

  const Eigen::VectorXd* weight_ptr() const { return weights.size() ? &weights : nullptr; }
};

struct BoostingProblem {
  std::vector<BoostingData> datasets;
  std::size_t covariates = 0;
  int dimension = 0;
};

/// Kaplan-Meier weights for survival data (which must be sorted by response),
/// weights 1/n otherwise.
BoostingProblem make_problem(const BasisExpansion& expansion, const std::vector<Dataset>& data);

struct IncrementSolution {
  Eigen::VectorXd gamma;
  double loss_before = 0.0;  // summed over the subset at gamma = 0
  double loss_after = 0.0;   // summed over the subset at gamma
  int sweeps = 0;
  bool jitter = false;
  std::vector<double> path;  // subset objective after each sweep
};

/// Common increment for covariate j shared by the datasets in `subset`:
/// weighted least squares in closed form, or IRLS with step-halving for
/// the Cauchy loss.
IncrementSolution solve_increment(const BoostingProblem& problem,
                                  const std::vector<Eigen::VectorXd>& residuals, std::size_t j,
                                  DatasetMask subset, const LossSpec& spec);

/// Selection objective or stopping score split into its three parts.
struct ObjectiveParts {
  double loss = 0.0;
  double complexity = 0.0;   // BIC term summed over datasets
  double commonality = 0.0;  // lambda * pen_c, times M when placed inside the sum

  double total() const { return loss + complexity + commonality; }
};

double pen_c(std::size_t equal_pairs, std::size_t datasets, std::size_t covariates);
double pen_c(const CoefficientState& state);

/// (log n / n) * number of active covariates.
double bic_term(std::size_t sample_size, std::size_t active_covariates);

struct TraceRow {
  int t = 0;
  double score = 0.0;
  std::size_t j = 0;
  DatasetMask subset = 0;
  double objective = 0.0;
};

struct FitResult {
  CoefficientState final_state;
  int t_star = 0;  // number of updates applied to reach final_state
  std::vector<TraceRow> trace;
  std::vector<Eigen::VectorXd> fitted_values;  // filled by the dataset-level wrappers
};

/// Boosting engine state: coefficients, residuals and per-dataset losses.
class Booster {
 public:
  Booster(const BoostingProblem& problem, FitConfig config);

  const CoefficientState& state() const { return state_; }
  const std::vector<Eigen::VectorXd>& residuals() const { return residuals_; }
  const BoostingProblem& problem() const { return *problem_; }
  const FitConfig& config() const { return config_; }

  /// F(G, gamma; j) for a solved candidate, evaluated at the unshrunk increment.
  ObjectiveParts objective(std::size_t j, DatasetMask subset,
                           const IncrementSolution& solution) const;
  /// S at the current coefficients.
  ObjectiveParts score() const;

  /// Best candidate for one covariate (smallest bitmask on ties).
  IncrementProposal best_for(std::size_t j) const;
  /// Best candidate over all covariates (smallest j, then smallest bitmask on ties).
  IncrementProposal best_proposal() const;
  /// Applies step * gamma of the proposal and updates residuals.
  void apply(const IncrementProposal& proposal);
  /// best_proposal followed by apply.
  IncrementProposal step();

  /// Largest deviation between maintained and recomputed residuals.
  double residual_drift() const;

 private:
  const BoostingProblem* problem_;
  FitConfig config_;
  CoefficientState state_;
  std::vector<Eigen::VectorXd> residuals_;
  std::vector<double> losses_;

  // Solutions depend only on the residuals of their own subset, so they stay
  // valid until an update touches one of those datasets.
  struct CachedSolution {
    DatasetMask subset = 0;
    IncrementSolution solution;
  };
  mutable std::vector<std::vector<CachedSolution>> cache_;  // [j]
  const IncrementSolution& solution_for(std::size_t j, DatasetMask subset) const;
};

/// Runs `config.iterations` steps and returns the state with the smallest
/// stopping score (first one on ties).
FitResult fit(const BoostingProblem& problem, const FitConfig& config);

}  // namespace rnpint
