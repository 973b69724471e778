#pragma once

#include "rnpint/methods.hpp"
#include "rnpint/simgen.hpp"
#include "rnpint/state.hpp"
#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <optional>
#include <utility>
#include <vector>

namespace rnpint {

struct EvalReport {
  bool has_truth = true;  // false when fitted to data without known components
  double tp_ind = 0.0;
  double fp_ind = 0.0;
  double tp_var = 0.0;
  double fp_var = 0.0;
  double rmise = 0.0;
  std::optional<double> mae;      // continuous outcomes
  std::optional<double> cstat;    // survival outcomes
  std::optional<double> logrank;  // survival outcomes
};

struct PairCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
};

/// Commonality identification over the first `signal_range` covariates.
/// A pair of datasets is estimated to share covariate j when both vectors are
/// zero or both carry the same group label.
PairCounts pair_metrics(const CoefficientState& estimate, const TruthTable& truth,
                        std::size_t signal_range);

/// Truth expressed as an estimate: one label per distinct true component.
CoefficientState truth_as_estimate(const TruthTable& truth, std::size_t covariates);

/// Variable selection over all covariates of every dataset.
PairCounts var_metrics(const CoefficientState& estimate, const TruthTable& truth);

/// sqrt( sum_m 1/n^m sum_j sum_i (fhat - f)^2 ) with both sides centered per
/// dataset and covariate. Each entry of `estimated` / `actual` is n^m x p.
double rmise(const std::vector<Eigen::MatrixXd>& estimated, const std::vector<Eigen::MatrixXd>& actual);

/// Estimated and true component values of a model at the training points.
std::vector<Eigen::MatrixXd> estimated_components(const Model& model, const std::vector<Dataset>& data);
std::vector<Eigen::MatrixXd> true_components(const TruthTable& truth, const std::vector<Dataset>& data);

/// sum_m (1/n^m) sum_i |yhat - y|.
double mae(const std::vector<Eigen::VectorXd>& predictions, const std::vector<Eigen::VectorXd>& y);

/// Harrell-type concordance of risk scores against (y, delta); ties in score
/// count one half. Empty when no pair is comparable.
std::optional<double> cstat(const Eigen::VectorXd& risk, const Eigen::VectorXd& y,
                            const Eigen::VectorXi& delta);

/// Two-sample log-rank chi-square statistic between subjects with score above
/// the median and the rest.
double logrank(const Eigen::VectorXd& scores, const Eigen::VectorXd& y, const Eigen::VectorXi& delta);

/// Log-rank chi-square statistic for an explicit two-group split.
double logrank_groups(const std::vector<bool>& in_first, const Eigen::VectorXd& y,
                      const Eigen::VectorXi& delta);

/// All simulation metrics for a fitted model: identification and selection
/// from the coefficients, RMISE on the training points, and MAE or C-statistic
/// and median-split log-rank statistic (both averaged over datasets) on the test data.
EvalReport evaluate(const Model& model, const TruthTable& truth, const std::vector<Dataset>& train,
                    const std::vector<Dataset>& test);

/// Prediction metrics only (MAE, or C-statistic and log-rank) for data
/// without known components.
EvalReport evaluate_predictions(const Model& model, const std::vector<Dataset>& test);

}  // namespace rnpint
