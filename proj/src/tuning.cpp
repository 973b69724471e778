#include "rnpint/tuning.hpp"

#include "rnpint/loss.hpp"
#include "rnpint/metrics.hpp"
#include "rnpint/parallel.hpp"
#include "rnpint/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

namespace rnpint {

namespace {

constexpr std::uint64_t kFoldStream = 0x63765f73706c6974;  // "cv_split"

}  // namespace

std::vector<double> default_grid(std::size_t covariates) {
  std::vector<double> grid;
  for (int e = -6; e <= -1; ++e) grid.push_back(std::ldexp(static_cast<double>(covariates), e));
  return grid;
}

double default_lambda(std::size_t covariates) { return static_cast<double>(covariates) / 8.0; }

void TuneSpec::validate() const {
  if (folds < 2) throw Error("at least two folds are required");
  for (double l : lambda_grid)
    if (!(l > 0.0) || !std::isfinite(l)) throw Error("lambda grid values must be positive");
  if (!(c > 0.0)) throw Error("Cauchy scale must be positive");
}

FoldAssignment cv_split(const std::vector<std::size_t>& sizes, int folds, std::uint64_t seed) {
  if (folds < 2) throw Error("at least two folds are required");
  auto rng = make_rng(seed, kFoldStream);
  FoldAssignment out;
  for (std::size_t m = 0; m < sizes.size(); ++m) {
    const auto n = sizes[m];
    if (n < static_cast<std::size_t>(folds))
      throw Error("dataset " + std::to_string(m) + " has " + std::to_string(n) +
                  " rows, fewer than " + std::to_string(folds) + " folds");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<int> fold(n);
    for (std::size_t pos = 0; pos < n; ++pos)
      fold[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(folds));
    out.push_back(std::move(fold));
  }
  return out;
}

std::vector<Dataset> fold_data(const std::vector<Dataset>& data, const FoldAssignment& assignment,
                               int fold, bool in_fold) {
  if (assignment.size() != data.size()) throw Error("fold assignment has the wrong number of datasets");
  std::vector<Dataset> out;
  for (std::size_t m = 0; m < data.size(); ++m) {
    if (assignment[m].size() != data[m].rows()) throw Error("fold assignment has the wrong length");
    std::vector<Eigen::Index> rows;
    for (std::size_t i = 0; i < assignment[m].size(); ++i)
      if ((assignment[m][i] == fold) == in_fold) rows.push_back(static_cast<Eigen::Index>(i));
    out.push_back(subset_rows(data[m], rows));
  }
  return out;
}

double validation_score(const Model& model, const std::vector<Dataset>& validation) {
  const auto predictions = predict(model, validation);
  if (!validation.front().is_survival()) {
    std::vector<Eigen::VectorXd> y;
    for (const auto& d : validation) y.push_back(d.y);
    return mae(predictions, y);
  }
  double total = 0.0;
  for (std::size_t m = 0; m < validation.size(); ++m) {
    const Dataset& d = validation[m];
    const auto n = static_cast<Eigen::Index>(d.rows());
    std::vector<Eigen::Index> order(d.rows());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return d.y(a) < d.y(b); });
    Eigen::VectorXd y(n);
    Eigen::VectorXi delta(n);
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      y(pos) = d.y(order[pos]);
      delta(pos) = (*d.delta)(order[pos]);
    }
    const Eigen::VectorXd w = km_weights(y, delta);
    for (Eigen::Index pos = 0; pos < n; ++pos)
      total += w(pos) * std::abs(predictions[m](order[pos]) - y(pos));
  }
  return total;
}

TuneResult tune_lambda(const std::vector<Dataset>& data, Method method, const FitConfig& base,
                       const TuneSpec& spec) {
  spec.validate();
  validate_datasets(data);
  const std::vector<double> lambdas =
      spec.lambda_grid.empty() ? default_grid(data.front().covariates()) : spec.lambda_grid;
  std::vector<std::size_t> sizes;
  for (const auto& d : data) sizes.push_back(d.rows());
  const FoldAssignment assignment = cv_split(sizes, spec.folds, spec.seed);

  const auto grid = lambdas.size();
  const auto folds = static_cast<std::size_t>(spec.folds);
  std::vector<double> scores(grid * folds);
  parallel_for(grid * folds, worker_count(spec.threads), [&](std::size_t cell) {
    const std::size_t g = cell / folds;
    const int k = static_cast<int>(cell % folds);
    FitConfig config = base;
    config.lambda = lambdas[g];
    config.loss.c = spec.c;
    const Model model = fit_method(method, fold_data(data, assignment, k, false), config);
    scores[cell] = validation_score(model, fold_data(data, assignment, k, true));
  });

  TuneResult result;
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid; ++g) {
    CvPoint point;
    point.lambda = lambdas[g];
    point.fold_scores.assign(scores.begin() + static_cast<std::ptrdiff_t>(g * folds),
                             scores.begin() + static_cast<std::ptrdiff_t>((g + 1) * folds));
    point.mean_score = std::accumulate(point.fold_scores.begin(), point.fold_scores.end(), 0.0) /
                       static_cast<double>(folds);
    result.curve.push_back(std::move(point));
    const auto& cur = result.curve.back();
    const auto& top = result.curve[best];
    if (cur.mean_score < top.mean_score || (cur.mean_score == top.mean_score && cur.lambda < top.lambda))
      best = g;
  }
  result.best_lambda = result.curve[best].lambda;
  return result;
}

void write_cv_folds(std::ostream& out, const TuneResult& result) {
  out << "lambda,fold,score\n";
  char line[96];
  for (const auto& point : result.curve)
    for (std::size_t k = 0; k < point.fold_scores.size(); ++k) {
      std::snprintf(line, sizeof line, "%.17g,%zu,%.17g\n", point.lambda, k, point.fold_scores[k]);
      out << line;
    }
}

void write_cv_curve(std::ostream& out, const TuneResult& result) {
  out << "lambda,mean_score\n";
  char line[64];
  for (const auto& point : result.curve) {
    std::snprintf(line, sizeof line, "%.17g,%.17g\n", point.lambda, point.mean_score);
    out << line;
  }
}

}  // namespace rnpint
