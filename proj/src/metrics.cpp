#include "rnpint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rnpint {

PairCounts pair_metrics(const CoefficientState& estimate, const TruthTable& truth,
                        std::size_t signal_range) {
  if (estimate.datasets() != truth.datasets()) throw Error("estimate and truth differ in dataset count");
  if (signal_range > estimate.covariates()) throw Error("signal range exceeds the number of covariates");
  PairCounts out;
  for (std::size_t j = 0; j < signal_range; ++j) {
    for (std::size_t a = 0; a < estimate.datasets(); ++a) {
      for (std::size_t b = a + 1; b < estimate.datasets(); ++b) {
        const bool both_zero = !estimate.is_active(a, j) && !estimate.is_active(b, j);
        const bool same = both_zero || estimate.label(j, a) == estimate.label(j, b);
        if (!same) continue;
        if (truth.at(a, j) == truth.at(b, j)) ++out.tp;
        else ++out.fp;
      }
    }
  }
  return out;
}

CoefficientState truth_as_estimate(const TruthTable& truth, std::size_t covariates) {
  // Datasets with equal nonzero components share one update of a distinct value.
  const auto M = truth.datasets();
  CoefficientState state(M, covariates, 1);
  for (std::size_t j = 0; j < covariates; ++j) {
    DatasetMask done = 0;
    double value = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      const Component f = truth.at(m, j);
      if (mask_contains(done, m) || f.is_zero()) continue;
      DatasetMask members = 0;
      for (std::size_t k = m; k < M; ++k)
        if (truth.at(k, j) == f) members |= DatasetMask{1} << k;
      done |= members;
      state.add(j, members, Eigen::VectorXd::Constant(1, value += 1.0));
    }
  }
  return state;
}

PairCounts var_metrics(const CoefficientState& estimate, const TruthTable& truth) {
  if (estimate.datasets() != truth.datasets()) throw Error("estimate and truth differ in dataset count");
  PairCounts out;
  for (std::size_t m = 0; m < estimate.datasets(); ++m)
    for (std::size_t j = 0; j < estimate.covariates(); ++j) {
      if (!estimate.is_active(m, j)) continue;
      if (truth.at(m, j).is_zero()) ++out.fp;
      else ++out.tp;
    }
  return out;
}

double rmise(const std::vector<Eigen::MatrixXd>& estimated, const std::vector<Eigen::MatrixXd>& actual) {
  if (estimated.size() != actual.size()) throw Error("estimated and true components differ in dataset count");
  double total = 0.0;
  for (std::size_t m = 0; m < estimated.size(); ++m) {
    const auto& fhat = estimated[m];
    const auto& f = actual[m];
    if (fhat.rows() != f.rows() || fhat.cols() != f.cols())
      throw Error("estimated and true components differ in shape");
    if (fhat.rows() == 0) continue;
    const Eigen::MatrixXd diff =
        (fhat.rowwise() - fhat.colwise().mean()) - (f.rowwise() - f.colwise().mean());
    total += diff.squaredNorm() / static_cast<double>(fhat.rows());
  }
  return std::sqrt(total);
}

std::vector<Eigen::MatrixXd> estimated_components(const Model& model, const std::vector<Dataset>& data) {
  if (data.size() != model.datasets()) throw Error("data has the wrong number of datasets");
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t m = 0; m < data.size(); ++m) {
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(data[m].X.rows(), data[m].X.cols());
    for (std::size_t j = 0; j < model.covariates(); ++j)
      if (model.coefficients.is_active(m, j))
        values.col(static_cast<Eigen::Index>(j)) =
            component(model, m, j, data[m].X.col(static_cast<Eigen::Index>(j)));
    out.push_back(std::move(values));
  }
  return out;
}

std::vector<Eigen::MatrixXd> true_components(const TruthTable& truth, const std::vector<Dataset>& data) {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t m = 0; m < data.size(); ++m) {
    Eigen::MatrixXd values = Eigen::MatrixXd::Zero(data[m].X.rows(), data[m].X.cols());
    const auto range = std::min<std::size_t>(truth.signal_range(), data[m].covariates());
    for (std::size_t j = 0; j < range; ++j) {
      const Component f = truth.at(m, j);
      for (Eigen::Index i = 0; i < values.rows(); ++i)
        values(i, static_cast<Eigen::Index>(j)) = f(data[m].X(i, static_cast<Eigen::Index>(j)));
    }
    out.push_back(std::move(values));
  }
  return out;
}

double mae(const std::vector<Eigen::VectorXd>& predictions, const std::vector<Eigen::VectorXd>& y) {
  if (predictions.size() != y.size()) throw Error("predictions and responses differ in dataset count");
  double total = 0.0;
  for (std::size_t m = 0; m < y.size(); ++m) {
    if (predictions[m].size() != y[m].size()) throw Error("predictions and responses differ in length");
    if (y[m].size() == 0) continue;
    total += (predictions[m] - y[m]).cwiseAbs().sum() / static_cast<double>(y[m].size());
  }
  return total;
}

std::optional<double> cstat(const Eigen::VectorXd& risk, const Eigen::VectorXd& y,
                            const Eigen::VectorXi& delta) {
  if (risk.size() != y.size() || delta.size() != y.size())
    throw Error("scores and survival records differ in length");
  double concordant = 0.0;
  std::size_t comparable = 0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (delta(i) != 1) continue;
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      if (!(y(i) < y(k))) continue;
      ++comparable;
      if (risk(i) > risk(k)) concordant += 1.0;
      else if (risk(i) == risk(k)) concordant += 0.5;
    }
  }
  if (comparable == 0) return std::nullopt;
  return concordant / static_cast<double>(comparable);
}

double logrank_groups(const std::vector<bool>& in_first, const Eigen::VectorXd& y,
                      const Eigen::VectorXi& delta) {
  const auto n = static_cast<std::size_t>(y.size());
  if (in_first.size() != n || static_cast<std::size_t>(delta.size()) != n)
    throw Error("groups and survival records differ in length");
  std::size_t first = static_cast<std::size_t>(std::count(in_first.begin(), in_first.end(), true));
  if (first == 0 || first == n) throw Error("log-rank test needs two nonempty groups");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return y(static_cast<Eigen::Index>(a)) < y(static_cast<Eigen::Index>(b));
  });

  double at_risk = static_cast<double>(n);
  double at_risk_first = static_cast<double>(first);
  double observed_minus_expected = 0.0;
  double variance = 0.0;
  std::size_t pos = 0;
  while (pos < n) {
    const double time = y(static_cast<Eigen::Index>(order[pos]));
    double deaths = 0.0, deaths_first = 0.0, leaving = 0.0, leaving_first = 0.0;
    while (pos < n && y(static_cast<Eigen::Index>(order[pos])) == time) {
      const auto i = order[pos];
      const bool grp = in_first[i];
      if (delta(static_cast<Eigen::Index>(i)) == 1) {
        deaths += 1.0;
        if (grp) deaths_first += 1.0;
      }
      leaving += 1.0;
      if (grp) leaving_first += 1.0;
      ++pos;
    }
    if (deaths > 0.0) {
      const double share = at_risk_first / at_risk;
      observed_minus_expected += deaths_first - deaths * share;
      if (at_risk > 1.0)
        variance += deaths * share * (1.0 - share) * (at_risk - deaths) / (at_risk - 1.0);
    }
    at_risk -= leaving;
    at_risk_first -= leaving_first;
  }
  if (variance <= 0.0) return 0.0;
  return observed_minus_expected * observed_minus_expected / variance;
}

double logrank(const Eigen::VectorXd& scores, const Eigen::VectorXd& y, const Eigen::VectorXi& delta) {
  if (scores.size() != y.size()) throw Error("scores and survival records differ in length");
  if (scores.size() == 0) throw Error("log-rank test needs data");
  std::vector<double> sorted(scores.data(), scores.data() + scores.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  std::vector<bool> high(n);
  for (std::size_t i = 0; i < n; ++i) high[i] = scores(static_cast<Eigen::Index>(i)) > median;
  return logrank_groups(high, y, delta);
}

EvalReport evaluate(const Model& model, const TruthTable& truth, const std::vector<Dataset>& train,
                    const std::vector<Dataset>& test) {
  EvalReport report;
  const auto range = std::min(truth.signal_range(), model.covariates());
  const PairCounts ind = pair_metrics(model.coefficients, truth, range);
  const PairCounts var = var_metrics(model.coefficients, truth);
  report.tp_ind = static_cast<double>(ind.tp);
  report.fp_ind = static_cast<double>(ind.fp);
  report.tp_var = static_cast<double>(var.tp);
  report.fp_var = static_cast<double>(var.fp);
  report.rmise = rmise(estimated_components(model, train), true_components(truth, train));

  if (test.empty()) return report;
  const EvalReport predictive = evaluate_predictions(model, test);
  report.mae = predictive.mae;
  report.cstat = predictive.cstat;
  report.logrank = predictive.logrank;
  return report;
}

EvalReport evaluate_predictions(const Model& model, const std::vector<Dataset>& test) {
  EvalReport report;
  report.has_truth = false;
  const auto predictions = predict(model, test);
  if (!test.front().is_survival()) {
    std::vector<Eigen::VectorXd> y;
    for (const auto& d : test) y.push_back(d.y);
    report.mae = mae(predictions, y);
    return report;
  }
  double c_total = 0.0, lr_total = 0.0;
  std::size_t c_count = 0, lr_count = 0;
  for (std::size_t m = 0; m < test.size(); ++m) {
    // Short predicted survival means high risk.
    const Eigen::VectorXd risk = -predictions[m];
    if (auto c = cstat(risk, test[m].y, *test[m].delta)) {
      c_total += *c;
      ++c_count;
    }
    const bool split = risk.size() > 1 && risk.maxCoeff() > risk.minCoeff();
    if (split) {
      lr_total += logrank(risk, test[m].y, *test[m].delta);
      ++lr_count;
    }
  }
  if (c_count) report.cstat = c_total / static_cast<double>(c_count);
  if (lr_count) report.logrank = lr_total / static_cast<double>(lr_count);
  return report;
}

}  // namespace rnpint
