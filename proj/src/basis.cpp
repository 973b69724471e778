#include "rnpint/basis.hpp"

#include <algorithm>
#include <cmath>

namespace rnpint {

void BasisConfig::validate() const {
  if (parametric) return;
  if (degree != 3) throw Error("spline basis must be cubic (degree 3)");
  if (n_inner_knots < 0) throw Error("number of inner knots must be nonnegative");
}

std::vector<double> KnotVector::interior() const {
  if (knots.empty()) return {};
  return {knots.begin() + degree + 1, knots.end() - degree - 1};
}

KnotVector build_knots(std::span<const double> x_pooled, const BasisConfig& config) {
  config.validate();
  if (x_pooled.empty()) throw Error("cannot place knots on an empty covariate");
  for (double v : x_pooled)
    if (!std::isfinite(v)) throw Error("covariate contains non-finite values");
  const auto [lo, hi] = std::minmax_element(x_pooled.begin(), x_pooled.end());
  if (!(*hi > *lo)) throw Error("degenerate covariate");

  KnotVector out;
  out.degree = config.degree;
  out.lower = *lo;
  out.upper = *hi;
  if (config.parametric) return out;

  const int order = config.degree + 1;
  out.knots.assign(order, out.lower);
  const double width = out.upper - out.lower;
  for (int k = 1; k <= config.n_inner_knots; ++k)
    out.knots.push_back(out.lower + width * k / (config.n_inner_knots + 1));
  out.knots.insert(out.knots.end(), order, out.upper);
  return out;
}

namespace {

// Index s with knots[s] <= x < knots[s+1], restricted to the valid spans.
int find_span(double x, const KnotVector& kv) {
  const int last = kv.basis_size() - 1;
  if (x >= kv.knots[last + 1]) return last;
  const auto it = std::upper_bound(kv.knots.begin() + kv.degree, kv.knots.begin() + last + 1, x);
  return static_cast<int>(it - kv.knots.begin()) - 1;
}

}  // namespace

Eigen::MatrixXd evaluate_bspline(std::span<const double> x, const KnotVector& kv) {
  if (kv.knots.empty()) throw Error("knot vector has no spline knots");
  const int p = kv.degree;
  const auto& t = kv.knots;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), kv.basis_size());
  std::vector<double> N(p + 1), left(p + 1), right(p + 1);

  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = std::clamp(x[i], kv.lower, kv.upper);
    const int span = find_span(u, kv);
    N[0] = 1.0;
    for (int d = 1; d <= p; ++d) {
      left[d] = u - t[span + 1 - d];
      right[d] = t[span + d] - u;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        const double temp = N[r] / (right[r + 1] + left[d - r]);
        N[r] = saved + right[r + 1] * temp;
        saved = left[d - r] * temp;
      }
      N[d] = saved;
    }
    for (int r = 0; r <= p; ++r) out(static_cast<Eigen::Index>(i), span - p + r) = N[r];
  }
  return out;
}

Eigen::MatrixXd expand(std::span<const double> x, const KnotVector& knots,
                       const BasisConfig& config) {
  config.validate();
  if (config.parametric) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) out(static_cast<Eigen::Index>(i), 0) = x[i];
    return out;
  }
  const Eigen::MatrixXd full = evaluate_bspline(x, knots);
  return full.rightCols(full.cols() - 1);
}

std::pair<Eigen::MatrixXd, Eigen::RowVectorXd> center(const Eigen::MatrixXd& block) {
  if (block.rows() < 2) throw Error("centering needs at least two rows");
  Eigen::RowVectorXd means = block.colwise().mean();
  Eigen::MatrixXd centered = block.rowwise() - means;
  return {std::move(centered), std::move(means)};
}

Eigen::MatrixXd BasisTransform::apply(std::size_t m, std::size_t j, const Eigen::VectorXd& x) const {
  if (m >= means.size() || j >= knots.size()) throw Error("basis transform index out of range");
  Eigen::MatrixXd raw = expand({x.data(), static_cast<std::size_t>(x.size())}, knots[j], config);
  raw.rowwise() -= means[m][j];
  return raw;
}

BasisExpansion build_expansion(const std::vector<Eigen::MatrixXd>& X, const BasisConfig& config) {
  config.validate();
  if (X.empty()) throw Error("no covariate matrices supplied");
  const auto p = X.front().cols();
  Eigen::Index total = 0;
  for (const auto& x : X) {
    if (x.cols() != p) throw Error("covariate matrices differ in column count");
    total += x.rows();
  }

  BasisExpansion out;
  out.transform.config = config;
  out.transform.knots.reserve(static_cast<std::size_t>(p));
  std::vector<double> pooled(static_cast<std::size_t>(total));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::size_t pos = 0;
    for (const auto& x : X)
      for (Eigen::Index i = 0; i < x.rows(); ++i) pooled[pos++] = x(i, j);
    out.transform.knots.push_back(build_knots(pooled, config));
  }

  out.transform.means.resize(X.size());
  out.blocks.resize(X.size());
  for (std::size_t m = 0; m < X.size(); ++m) {
    out.transform.means[m].reserve(static_cast<std::size_t>(p));
    out.blocks[m].reserve(static_cast<std::size_t>(p));
    for (Eigen::Index j = 0; j < p; ++j) {
      const Eigen::VectorXd col = X[m].col(j);
      auto [centered, means] =
          center(expand({col.data(), static_cast<std::size_t>(col.size())},
                        out.transform.knots[static_cast<std::size_t>(j)], config));
      out.blocks[m].push_back(std::move(centered));
      out.transform.means[m].push_back(std::move(means));
    }
  }
  return out;
}

}  // namespace rnpint
