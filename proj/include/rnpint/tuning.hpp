#pragma once

#include "rnpint/methods.hpp"
#include "rnpint/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace rnpint {

/// p * {2^-6, 2^-5, ..., 2^-1} for p covariates. The commonality penalty is
/// averaged over covariates, so lambda is quoted per covariate.
std::vector<double> default_grid(std::size_t covariates);

/// Fixed lambda used when no tuning is requested: p / 8.
double default_lambda(std::size_t covariates);

struct TuneSpec {
  std::vector<double> lambda_grid;  // empty means default_grid(p)
  int folds = 5;
  double c = 1.0;
  std::uint64_t seed = 0;
  int threads = 1;

  void validate() const;
};

/// fold[m][i] is the fold of row i of dataset m.
using FoldAssignment = std::vector<std::vector<int>>;

/// Shuffles each dataset and deals its rows into `folds` folds whose sizes
/// differ by at most one.
FoldAssignment cv_split(const std::vector<std::size_t>& sizes, int folds, std::uint64_t seed);

/// Training (`in_fold == false`) or validation rows of fold k for every dataset.
std::vector<Dataset> fold_data(const std::vector<Dataset>& data, const FoldAssignment& assignment,
                               int fold, bool in_fold);

/// Validation score: summed per-dataset MAE for continuous data; for survival,
/// the Kaplan-Meier weighted absolute error on log time, which only counts events.
double validation_score(const Model& model, const std::vector<Dataset>& validation);

struct CvPoint {
  double lambda = 0.0;
  double mean_score = 0.0;
  std::vector<double> fold_scores;
};

struct TuneResult {
  double best_lambda = 0.0;
  std::vector<CvPoint> curve;  // one entry per grid value, in grid order
};

/// Cross-validated grid search. The smallest mean score wins; ties go to the
/// smaller lambda, then to the earlier grid entry.
TuneResult tune_lambda(const std::vector<Dataset>& data, Method method, const FitConfig& base,
                       const TuneSpec& spec);

/// lambda,fold,score rows.
void write_cv_folds(std::ostream& out, const TuneResult& result);
/// lambda,mean_score rows.
void write_cv_curve(std::ostream& out, const TuneResult& result);

}  // namespace rnpint
