#include "fixtures.hpp"
#include "rnpint/boosting.hpp"
#include "rnpint/loss.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace rnpint;

namespace {

const LossSpec kCauchy{LossKind::cauchy, 1.0};
const LossSpec kSquares{LossKind::least_squares, 1.0};

// One dataset, one covariate block, unit weights.
BoostingProblem single_block(const Eigen::MatrixXd& phi, const Eigen::VectorXd& r) {
  BoostingProblem problem;
  problem.covariates = 1;
  problem.dimension = static_cast<int>(phi.cols());
  BoostingData d;
  d.blocks.push_back(phi);
  d.response = r;
  d.sample_size = static_cast<std::size_t>(r.size());
  problem.datasets.push_back(std::move(d));
  return problem;
}

double cauchy_sum(const Eigen::VectorXd& phi, const Eigen::VectorXd& r, double g) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) s += std::log1p(std::pow(r(i) - phi(i) * g, 2));
  return s;
}

FitConfig config_with(double lambda, int iterations = 300) {
  FitConfig c;
  c.lambda = lambda;
  c.iterations = iterations;
  return c;
}

}  // namespace

TEST_CASE("solve_increment: zero residuals give a zero increment") {
  const auto data = fixtures::additive_data(2, 30, 2, 0.0, 1);
  auto fx = fixtures::make(data);
  std::vector<Eigen::VectorXd> zero(2, Eigen::VectorXd::Zero(30));
  for (const LossSpec& spec : {kCauchy, kSquares}) {
    const auto sol = solve_increment(fx.problem, zero, 0, 0b11, spec);
    CHECK(sol.gamma.isZero());
  }
}

TEST_CASE("solve_increment: scalar least squares") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  Eigen::MatrixXd phi(25, 1);
  Eigen::VectorXd r(25);
  for (int i = 0; i < 25; ++i) {
    phi(i, 0) = z(rng);
    r(i) = 1.5 * phi(i, 0) + z(rng);
  }
  const auto problem = single_block(phi, r);
  const auto sol = solve_increment(problem, {r}, 0, 0b1, kSquares);
  const double expected = phi.col(0).dot(r) / phi.col(0).squaredNorm();
  CHECK(sol.gamma(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("solve_increment: Cauchy fit with a gross outlier matches a grid search") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> z;
  Eigen::MatrixXd phi(40, 1);
  Eigen::VectorXd r(40);
  for (int i = 0; i < 40; ++i) {
    phi(i, 0) = z(rng);
    r(i) = 2.0 * phi(i, 0) + 0.3 * z(rng);
  }
  r(7) = 500.0;
  const auto problem = single_block(phi, r);
  const auto sol = solve_increment(problem, {r}, 0, 0b1, kCauchy);

  double best_g = 0.0, best = std::numeric_limits<double>::infinity();
  for (long k = -100000; k <= 100000; ++k) {
    const double g = k * 1e-4;
    const double v = cauchy_sum(phi.col(0), r, g);
    if (v < best) {
      best = v;
      best_g = g;
    }
  }
  CHECK(std::abs(sol.gamma(0) - best_g) < 1e-3);
  // Least squares is dragged by the outlier.
  const auto ls = solve_increment(problem, {r}, 0, 0b1, kSquares);
  CHECK(std::abs(ls.gamma(0) - best_g) > 0.1);
}

TEST_CASE("solve_increment: IRLS sweeps never increase the objective") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  std::cauchy_distribution<double> heavy;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 30 + rep % 11, K = 1 + rep % 6;
    Eigen::MatrixXd phi(n, K);
    Eigen::VectorXd r(n), w(n);
    for (Eigen::Index i = 0; i < phi.size(); ++i) phi(i) = z(rng);
    for (int i = 0; i < n; ++i) {
      r(i) = phi.row(i).sum() + heavy(rng);
      w(i) = 1.0 / n;
    }
    auto problem = single_block(phi, r);
    if (rep % 2) problem.datasets[0].weights = w;
    const auto sol = solve_increment(problem, {r}, 0, 0b1, LossSpec{LossKind::cauchy, 0.5 + rep % 3});
    double previous = sol.loss_before;
    for (double v : sol.path) {
      CHECK(v <= previous);
      previous = v;
    }
    CHECK(sol.loss_after <= sol.loss_before);
    CHECK(sol.sweeps <= 50);
  }
}

TEST_CASE("solve_increment: singular Gram matrix gets ridge jitter") {
  Eigen::MatrixXd phi(10, 2);
  for (int i = 0; i < 10; ++i) phi(i, 0) = phi(i, 1) = i - 4.5;
  Eigen::VectorXd r = phi.col(0);
  const auto sol = solve_increment(single_block(phi, r), {r}, 0, 0b1, kSquares);
  CHECK(sol.jitter);
  CHECK(sol.gamma.allFinite());
  CHECK((phi * sol.gamma - r).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("pen_c") {
  CHECK(pen_c(6, 3, 2) == 0.0);
  CHECK(pen_c(0, 3, 2) == 1.0);
  CHECK(pen_c(1, 3, 2) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(pen_c(0, 1, 10) == 0.0);
  CoefficientState s(3, 2, 6);
  CHECK(pen_c(s) == 0.0);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(6);
  e(0) = 1.0;
  for (std::size_t j = 0; j < 2; ++j) {
    s.add(j, 0b001, e);
    s.add(j, 0b010, e);
  }
  CHECK(pen_c(s) == 1.0);
}

TEST_CASE("bic_term") {
  CHECK(bic_term(100, 0) == 0.0);
  CHECK(bic_term(100, 3) == doctest::Approx(0.1382).epsilon(1e-3));
  CHECK(bic_term(100, 3) == doctest::Approx(3.0 * std::log(100.0) / 100.0));
  CHECK(bic_term(57, 4) - bic_term(57, 3) == doctest::Approx(std::log(57.0) / 57.0));
}

TEST_CASE("objective: null model with lambda 0") {
  const auto data = fixtures::additive_data(3, 40, 3, 0.5, 8);
  auto fx = fixtures::make(data);
  Booster booster(fx.problem, config_with(0.0));
  IncrementSolution zero = solve_increment(fx.problem, booster.residuals(), 0, 0b111, kCauchy);
  zero.gamma.setZero();
  zero.loss_after = zero.loss_before;
  double null_loss = 0.0;
  for (const auto& d : fx.problem.datasets) null_loss += dataset_loss(d.response, d.weight_ptr(), kCauchy);
  const ObjectiveParts parts = booster.objective(0, 0b111, zero);
  CHECK(parts.total() == doctest::Approx(null_loss).epsilon(1e-12));
  CHECK(parts.complexity == 0.0);
  CHECK(booster.score().total() == doctest::Approx(null_loss).epsilon(1e-12));
}

TEST_CASE("objective decomposes into reproducible parts") {
  const auto data = fixtures::additive_data(3, 40, 3, 0.5, 9, 1.0);
  auto fx = fixtures::make(data);
  const double lambda = 0.7;
  Booster booster(fx.problem, config_with(lambda));
  for (int t = 0; t < 4; ++t) booster.step();

  for (std::size_t j = 0; j < 3; ++j) {
    for (DatasetMask subset : enumerate_candidates(partition_of(booster.state(), j))) {
      const auto sol = solve_increment(fx.problem, booster.residuals(), j, subset, kCauchy);
      const ObjectiveParts parts = booster.objective(j, subset, sol);

      const CoefficientState after = apply_increment(booster.state(), {j, subset, sol.gamma, 0.0}, 1.0);
      double loss = 0.0, complexity = 0.0;
      for (std::size_t m = 0; m < 3; ++m) {
        const auto& d = fx.problem.datasets[m];
        Eigen::VectorXd r = booster.residuals()[m];
        if (mask_contains(subset, m)) r -= d.blocks[j] * sol.gamma;
        loss += dataset_loss(r, d.weight_ptr(), kCauchy);
        complexity += bic_term(d.sample_size, after.active_count(m));
      }
      CHECK(parts.loss == doctest::Approx(loss).epsilon(1e-10));
      CHECK(parts.complexity == doctest::Approx(complexity).epsilon(1e-14));
      CHECK(parts.commonality == doctest::Approx(lambda * pen_c(after)).epsilon(1e-14));
      CHECK(parts.total() == doctest::Approx(loss + complexity + lambda * pen_c(after)).epsilon(1e-10));
    }
  }
}

TEST_CASE("objective: a huge lambda makes the full group dominate") {
  const auto data = fixtures::additive_data(3, 40, 4, 0.5, 10, 2.0);
  auto fx = fixtures::make(data);
  Booster booster(fx.problem, config_with(1e6));
  for (std::size_t j = 0; j < 4; ++j) {
    const auto full = solve_increment(fx.problem, booster.residuals(), j, 0b111, kCauchy);
    const double full_value = booster.objective(j, 0b111, full).total();
    for (DatasetMask subset : {1u, 2u, 3u, 4u, 5u, 6u}) {
      const auto sol = solve_increment(fx.problem, booster.residuals(), j, subset, kCauchy);
      CHECK(booster.objective(j, subset, sol).total() > full_value);
    }
  }
}

TEST_CASE("boost step picks the exhaustive argmin") {
  const auto data = fixtures::additive_data(3, 50, 5, 0.1, 12);
  auto fx = fixtures::make(data);
  Booster booster(fx.problem, config_with(1.0));
  for (int t = 0; t < 3; ++t) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_j = 0;
    DatasetMask best_subset = 0;
    for (std::size_t j = 0; j < 5; ++j)
      for (DatasetMask subset : enumerate_candidates(partition_of(booster.state(), j))) {
        const auto sol = solve_increment(fx.problem, booster.residuals(), j, subset, kCauchy);
        const double v = booster.objective(j, subset, sol).total();
        if (v < best) {
          best = v;
          best_j = j;
          best_subset = subset;
        }
      }
    const IncrementProposal step = booster.step();
    CHECK(step.j == best_j);
    CHECK(step.subset == best_subset);
    CHECK(step.objective_value == best);
    if (t == 0) {
      CHECK(step.j == 0);
      CHECK(step.subset == 0b111);
    }
  }
}

TEST_CASE("boost step breaks ties by the smaller covariate") {
  auto data = fixtures::additive_data(2, 40, 3, 0.2, 13);
  for (auto& d : data) {
    d.X.col(2) = d.X.col(0);
  }
  auto fx = fixtures::make(data);
  Booster booster(fx.problem, config_with(0.5));
  const auto a = booster.best_for(0);
  const auto b = booster.best_for(2);
  REQUIRE(a.objective_value == b.objective_value);
  CHECK(booster.best_proposal().j == 0);
}

TEST_CASE("boost step keeps residuals in sync") {
  const auto data = fixtures::additive_data(3, 40, 4, 0.5, 14, 1.5);
  auto fx = fixtures::make(data);
  Booster booster(fx.problem, config_with(0.1));
  for (int t = 0; t < 30; ++t) {
    booster.step();
    CHECK(booster.residual_drift() < 1e-8);
    CHECK(booster.state().audit());
  }
}

TEST_CASE("stopping score places the penalty inside or outside the sum") {
  const auto data = fixtures::additive_data(3, 40, 3, 0.5, 15, 1.5);
  auto fx = fixtures::make(data);
  FitConfig inside = config_with(2.0);
  FitConfig outside = inside;
  outside.penalty_inside_sum = false;
  Booster a(fx.problem, inside), b(fx.problem, outside);
  // Force a split so that pen_c > 0.
  Eigen::VectorXd g = Eigen::VectorXd::Ones(fx.problem.dimension);
  a.apply({1, 0b001, g, 0.0});
  b.apply({1, 0b001, g, 0.0});
  const double pc = pen_c(a.state());
  CHECK(pc > 0.0);
  CHECK(a.score().commonality == doctest::Approx(3.0 * 2.0 * pc));
  CHECK(b.score().commonality == doctest::Approx(2.0 * pc));
  CHECK(a.score().loss == b.score().loss);
}

TEST_CASE("fit returns the first minimizer of the stopping score") {
  const auto data = fixtures::additive_data(3, 40, 4, 0.0, 16);
  auto fx = fixtures::make(data);
  const FitResult r = fit(fx.problem, config_with(1.0, 60));
  REQUIRE(r.trace.size() == 60);
  double best = std::numeric_limits<double>::infinity();
  int first = 0;
  for (const auto& row : r.trace)
    if (row.score < best) {
      best = row.score;
      first = row.t;
    }
  CHECK(r.t_star == first);
  for (const auto& row : r.trace) CHECK(r.trace[static_cast<std::size_t>(r.t_star - 1)].score <= row.score);
  // Noiseless strong signal: S falls over the first iterations.
  for (int t = 1; t < 5; ++t) CHECK(r.trace[t].score < r.trace[t - 1].score);

  // The returned state is the one after t* updates.
  Booster replay(fx.problem, config_with(1.0, 60));
  for (int t = 0; t < r.t_star; ++t) replay.step();
  CHECK(replay.state() == r.final_state);
}

TEST_CASE("fit with one iteration") {
  const auto data = fixtures::additive_data(2, 30, 3, 0.5, 17);
  auto fx = fixtures::make(data);
  const FitResult r = fit(fx.problem, config_with(1.0, 1));
  CHECK(r.t_star == 1);
  CHECK(r.trace.size() == 1);
}

TEST_CASE("fit is deterministic") {
  const auto data = fixtures::additive_data(3, 40, 4, 1.0, 18, 1.0);
  auto fx = fixtures::make(data);
  const FitResult a = fit(fx.problem, config_with(0.5, 40));
  const FitResult b = fit(fx.problem, config_with(0.5, 40));
  CHECK(a.final_state == b.final_state);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t t = 0; t < a.trace.size(); ++t) {
    CHECK(a.trace[t].score == b.trace[t].score);
    CHECK(a.trace[t].objective == b.trace[t].objective);
  }
}

TEST_CASE("a huge lambda keeps every covariate in one group") {
  const auto data = fixtures::additive_data(3, 50, 5, 0.5, 19, 1.5);
  auto fx = fixtures::make(data);
  const FitResult r = fit(fx.problem, config_with(1e6, 60));
  for (const auto& row : r.trace) CHECK(row.subset == 0b111);
  for (std::size_t j = 0; j < 5; ++j) CHECK(partition_of(r.final_state, j).size() == 1);
}

TEST_CASE("config validation") {
  FitConfig c;
  c.step = 0.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.step = 1.0;
  CHECK_NOTHROW(c.validate());
  c.iterations = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c.iterations = 1;
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("survival problems use Kaplan-Meier weights and drop censored rows") {
  auto data = fixtures::additive_data(1, 6, 2, 0.5, 20);
  data[0].delta = (Eigen::VectorXi(6) << 1, 0, 1, 1, 0, 1).finished();
  data[0] = sort_by_response(data[0]);
  auto fx = fixtures::make(data);
  const auto& d = fx.problem.datasets[0];
  const Eigen::VectorXd w = km_weights(data[0].y, *data[0].delta);
  CHECK(d.sample_size == 6);
  CHECK(d.response.size() == (w.array() > 0.0).count());
  CHECK(d.weights.sum() == doctest::Approx(w.sum()));

  auto unsorted = data;
  std::swap(unsorted[0].y(0), unsorted[0].y(5));
  CHECK_THROWS_AS(make_problem(fx.expansion, unsorted), Error);
}
