#include "rnpint/basis.hpp"

#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <random>

using namespace rnpint;

namespace {

std::span<const double> view(const std::vector<double>& v) { return {v.data(), v.size()}; }

// Direct Cox-de Boor recursion, written independently of the library.
double bspline_ref(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) {
    const double last = t.back();
    // The closed right end belongs to the last nonempty span.
    if (x == last) return t[i] < t[i + 1] && t[i + 1] == last ? 1.0 : 0.0;
    return t[i] <= x && x < t[i + 1] ? 1.0 : 0.0;
  }
  double a = 0.0, b = 0.0;
  if (t[i + p] > t[i]) a = (x - t[i]) / (t[i + p] - t[i]) * bspline_ref(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1]) b = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * bspline_ref(t, i + 1, p - 1, x);
  return a + b;
}

}  // namespace

TEST_CASE("build_knots places equally spaced interior knots") {
  BasisConfig config;
  config.n_inner_knots = 6;
  const std::vector<double> x{0.0, 0.3, 1.0, 0.5};
  const KnotVector kv = build_knots(view(x), config);
  const auto inner = kv.interior();
  REQUIRE(inner.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(inner[k] == doctest::Approx((k + 1) / 7.0).epsilon(1e-15));
  CHECK(kv.knots.size() == 6 + 8);
  for (int k = 0; k < 4; ++k) {
    CHECK(kv.knots[k] == 0.0);
    CHECK(kv.knots[kv.knots.size() - 1 - k] == 1.0);
  }
}

TEST_CASE("build_knots without interior knots") {
  BasisConfig config;
  config.n_inner_knots = 0;
  const std::vector<double> x{-2.0, 0.0, 2.0};
  const KnotVector kv = build_knots(view(x), config);
  CHECK(kv.interior().empty());
  CHECK(kv.knots == std::vector<double>{-2, -2, -2, -2, 2, 2, 2, 2});
}

TEST_CASE("build_knots rejects degenerate input") {
  BasisConfig config;
  const std::vector<double> constant{1.0, 1.0, 1.0};
  CHECK_THROWS_WITH_AS(build_knots(view(constant), config), "degenerate covariate", Error);
  CHECK_THROWS_AS(build_knots(view(std::vector<double>{}), config), Error);
  CHECK_THROWS_AS(build_knots(view(std::vector<double>{0.0, NAN}), config), Error);
}

TEST_CASE("default basis has dimension six") {
  BasisConfig config;
  CHECK(config.dimension() == 6);
  config.parametric = true;
  CHECK(config.dimension() == 1);
}

TEST_CASE("B-spline evaluation matches the recursion and sums to one") {
  BasisConfig config;
  config.n_inner_knots = 4;
  const std::vector<double> range{-1.5, 2.5};
  const KnotVector kv = build_knots(view(range), config);
  std::vector<double> x;
  for (int i = 0; i <= 200; ++i) x.push_back(-1.5 + 4.0 * i / 200.0);
  const Eigen::MatrixXd B = evaluate_bspline(view(x), kv);
  REQUIRE(B.cols() == kv.basis_size());
  for (Eigen::Index i = 0; i < B.rows(); ++i) {
    CHECK(B.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (Eigen::Index k = 0; k < B.cols(); ++k)
      CHECK(B(i, k) == doctest::Approx(bspline_ref(kv.knots, static_cast<int>(k), 3, x[i])).epsilon(1e-12));
  }
}

TEST_CASE("expand returns n x K and clamps out-of-range inputs") {
  BasisConfig config;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  std::vector<double> x(100);
  for (auto& v : x) v = z(rng);
  const KnotVector kv = build_knots(view(x), config);
  const Eigen::MatrixXd block = expand(view(x), kv, config);
  CHECK(block.rows() == 100);
  CHECK(block.cols() == 6);

  const std::vector<double> outside{kv.lower - 5.0, kv.upper + 5.0};
  const std::vector<double> edges{kv.lower, kv.upper};
  CHECK(expand(view(outside), kv, config) == expand(view(edges), kv, config));

  CHECK(expand(view(x), kv, config) == block);  // deterministic
}

TEST_CASE("parametric mode is the identity map") {
  BasisConfig config;
  config.parametric = true;
  const std::vector<double> x{1.0, 2.0, 3.0};
  const KnotVector kv = build_knots(view(x), config);
  const Eigen::MatrixXd block = expand(view(x), kv, config);
  REQUIRE(block.cols() == 1);
  CHECK(block(0, 0) == 1.0);
  CHECK(block(1, 0) == 2.0);
  CHECK(block(2, 0) == 3.0);
}

TEST_CASE("center subtracts column means") {
  Eigen::MatrixXd col(3, 1);
  col << 1, 2, 3;
  auto [centered, means] = center(col);
  CHECK(centered(0, 0) == -1.0);
  CHECK(centered(1, 0) == 0.0);
  CHECK(centered(2, 0) == 1.0);
  CHECK(means(0) == 2.0);

  auto [again, zero] = center(centered);
  CHECK(again == centered);
  CHECK(zero(0) == 0.0);

  CHECK_THROWS_AS(center(Eigen::MatrixXd::Ones(1, 3)), Error);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  Eigen::MatrixXd block(100, 6);
  for (Eigen::Index i = 0; i < block.size(); ++i) block(i) = u(rng);
  auto [c, m] = center(block);
  CHECK(c.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("expansion shares knots across datasets and centers per dataset") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<Eigen::MatrixXd> X;
  for (int m = 0; m < 3; ++m) {
    Eigen::MatrixXd x(40 + 10 * m, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng) * (m + 1) / 3.0;
    X.push_back(x);
  }
  const BasisExpansion ex = build_expansion(X, BasisConfig{});
  for (std::size_t j = 0; j < 4; ++j) {
    std::vector<double> pooled;
    for (const auto& x : X)
      for (Eigen::Index i = 0; i < x.rows(); ++i) pooled.push_back(x(i, static_cast<Eigen::Index>(j)));
    CHECK(ex.transform.knots[j] == build_knots(view(pooled), BasisConfig{}));
    for (std::size_t m = 0; m < 3; ++m) {
      const auto& block = ex.blocks[m][j];
      CHECK(block.rows() == X[m].rows());
      CHECK(block.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
      // Replaying the transform reproduces the training block.
      const Eigen::MatrixXd replay = ex.transform.apply(m, j, X[m].col(static_cast<Eigen::Index>(j)));
      CHECK((replay - block).cwiseAbs().maxCoeff() < 1e-14);
    }
  }
}

TEST_CASE("dropping the first basis function loses nothing after centering") {
  // The full basis sums to one, so its centered columns are linearly
  // dependent; the kept columns span the same space.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(80);
  for (auto& v : x) v = u(rng);
  BasisConfig config;
  const KnotVector kv = build_knots(view(x), config);
  const Eigen::MatrixXd full = center(evaluate_bspline(view(x), kv)).first;
  const Eigen::MatrixXd kept = center(expand(view(x), kv, config)).first;
  const Eigen::VectorXd first = full.col(0);
  const Eigen::VectorXd coef = kept.colPivHouseholderQr().solve(first);
  CHECK((kept * coef - first).norm() < 1e-10);
}
