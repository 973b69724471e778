#include "rnpint/simgen.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace rnpint;

namespace {

ScenarioSpec small_spec(int scenario, std::uint64_t seed = 1) {
  ScenarioSpec s;
  s.scenario = scenario;
  s.p = 20;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("component closed forms") {
  const double x = 0.7;
  CHECK(Component{ComponentKind::linear, 2.0}(x) == 2.0 * x);
  CHECK(Component{ComponentKind::quadratic, 1.0}(x) == doctest::Approx(x * x - 1.0));
  CHECK(Component{ComponentKind::sine, 3.0}(x) == doctest::Approx(3.0 * std::sin(x)));
  CHECK(Component{ComponentKind::sigmoid, 1.0}(x) == doctest::Approx(6.0 / (1.0 + std::exp(-2.0 * x)) - 3.0));
  CHECK(Component{ComponentKind::bump, 1.0}(x) == doctest::Approx(3.0 * std::exp(-x * x / 4.0) - std::sqrt(6.0)));
  CHECK(Component{ComponentKind::bump, -1.0}(x) == doctest::Approx(-3.0 * std::exp(-x * x / 4.0) + std::sqrt(6.0)));
  CHECK(Component{}(x) == 0.0);
}

TEST_CASE("truth tables") {
  SUBCASE("scenario 1") {
    const TruthTable t = truth(1);
    CHECK(t.signal_range() == 6);
    CHECK(t.at(0, 3)(1.0) == doctest::Approx(6.0 / (1.0 + std::exp(-2.0)) - 3.0));
    CHECK(t.at(2, 2) == t.at(0, 2));
    CHECK(t.at(2, 2)(0.5) == doctest::Approx(3.0 * std::sin(0.5)));
    CHECK(t.at(2, 5)(1.0) == -2.0);
    CHECK(t.at(1, 2).is_zero());
    CHECK(t.at(0, 30).is_zero());
  }
  SUBCASE("scenario 2 is shared") {
    const TruthTable t = truth(2);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(t.at(0, j) == t.at(1, j));
      CHECK(t.at(1, j) == t.at(2, j));
      CHECK_FALSE(t.at(0, j).is_zero());
    }
    CHECK(t.at(0, 2)(1.0) == doctest::Approx(2.0 * std::sin(1.0)));
  }
  SUBCASE("scenario 3") {
    const TruthTable t = truth(3);
    CHECK(t.at(1, 1)(2.0) == doctest::Approx(2.0 * 3.0));
    CHECK(t.at(1, 2)(1.0) == doctest::Approx(4.0 * std::sin(1.0)));
    CHECK(t.at(2, 2)(1.0) == doctest::Approx(-std::sin(1.0)));
    CHECK(t.at(2, 3)(1.0) == doctest::Approx(-6.0 / (1.0 + std::exp(-2.0)) + 3.0));
    CHECK(t.at(2, 0)(1.0) == 2.0);
    CHECK(t.at(1, 0).is_zero());
  }
  SUBCASE("scenario 4") {
    const TruthTable t = truth(4);
    CHECK(t.signal_range() == 9);
    CHECK(t.at(0, 8)(2.0) == 3.0);
    CHECK(t.at(1, 8)(2.0) == -3.0);
    CHECK(t.at(2, 8)(2.0) == 6.0);
    CHECK(t.at(1, 6)(1.0) == -1.0);
    CHECK(t.at(2, 6)(1.0) == 2.0);
  }
  SUBCASE("equal pairs with both-zero pairs counted") {
    CHECK(truth(1).equal_pairs() == 7);
    CHECK(truth(2).equal_pairs() == 18);
    CHECK(truth(3).equal_pairs() == 0);
    CHECK(truth(4).equal_pairs() == 8);
  }
  SUBCASE("nonzero components") {
    CHECK(truth(1).nonzero_count() == 12);
    CHECK(truth(2).nonzero_count() == 18);
    CHECK(truth(3).nonzero_count() == 14);
    CHECK(truth(4).nonzero_count() == 18);
  }
  CHECK_THROWS_AS(truth(5), Error);
}

TEST_CASE("spec validation") {
  ScenarioSpec s = small_spec(4);
  s.p = 8;
  CHECK_THROWS_AS(s.validate(), Error);
  s.p = 9;
  CHECK_NOTHROW(s.validate());
  s.scenario = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = small_spec(1);
  s.p = 5;
  CHECK_THROWS_AS(s.validate(), Error);
}

TEST_CASE("AR(1) covariates") {
  auto rng = make_rng(11, 0);
  const Eigen::MatrixXd X = gen_covariates(100000, 5, 0.5, rng);
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
  for (int j = 0; j < 5; ++j) {
    CHECK(std::abs(mean(j)) < 0.02);
    CHECK(std::abs(cov(j, j) - 1.0) < 0.02);
    for (int k = j + 1; k < 5 && k - j <= 3; ++k) {
      const double corr = cov(j, k) / std::sqrt(cov(j, j) * cov(k, k));
      CHECK(std::abs(corr - std::pow(0.5, k - j)) < 0.02);
    }
  }
}

TEST_CASE("error regimes") {
  auto rng = make_rng(12, 0);
  int contaminated = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    bool c = false;
    draw_error(ErrorRegime::mix7030, rng, &c);
    contaminated += c;
  }
  CHECK(std::abs(contaminated / static_cast<double>(draws) - 0.3) < 0.02);

  // Normal errors: mean 0, variance 1.
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double e = draw_error(ErrorRegime::normal, rng);
    sum += e;
    sq += e * e;
  }
  CHECK(std::abs(sum / draws) < 0.02);
  CHECK(std::abs(sq / draws - 1.0) < 0.02);

  // Cauchy errors: quartiles at -1 and 1.
  int inside = 0;
  for (int i = 0; i < draws; ++i) inside += std::abs(draw_error(ErrorRegime::cauchy, rng)) < 1.0;
  CHECK(std::abs(inside / static_cast<double>(draws) - 0.5) < 0.01);

  CHECK(parse_regime("mix7030") == ErrorRegime::mix7030);
  CHECK(regime_name(ErrorRegime::cauchy) == "cauchy");
  CHECK_THROWS_AS(parse_regime("laplace"), Error);
}

TEST_CASE("continuous responses") {
  const ScenarioSpec spec = small_spec(1, 3);
  const SimulatedData a = simulate(spec);
  REQUIRE(a.datasets.size() == 3);
  for (std::size_t m = 0; m < 3; ++m) {
    const Dataset& d = a.datasets[m];
    CHECK(d.rows() == 100);
    CHECK(d.covariates() == 20);
    CHECK_FALSE(d.is_survival());
    // Residual y - signal has unit variance under normal errors.
    const Eigen::VectorXd e = d.y - signal(a.truth, m, d.X);
    const double var = (e.array() - e.mean()).square().sum() / 99.0;
    CHECK(var > 0.6);
    CHECK(var < 1.5);
  }
  SUBCASE("bit reproducible, streams independent") {
    const SimulatedData b = simulate(spec);
    const SimulatedData c = simulate(spec, 1);
    for (std::size_t m = 0; m < 3; ++m) {
      CHECK(a.datasets[m].X == b.datasets[m].X);
      CHECK(a.datasets[m].y == b.datasets[m].y);
      CHECK(a.datasets[m].X != c.datasets[m].X);
    }
  }
  SUBCASE("unbalanced sizes") {
    ScenarioSpec u = spec;
    u.sizes = {130, 110, 60};
    const SimulatedData d = simulate(u);
    CHECK(d.datasets[0].rows() == 130);
    CHECK(d.datasets[1].rows() == 110);
    CHECK(d.datasets[2].rows() == 60);
  }
}

TEST_CASE("zero truth gives standard normal responses") {
  TruthTable zero;
  zero.scenario = 2;
  zero.components.assign(3, std::vector<Component>(6));
  ScenarioSpec spec = small_spec(2);
  spec.sizes = {20000, 20000, 20000};
  auto rng = make_rng(13, 0);
  const Dataset d = gen_response(spec, zero, 0, gen_covariates(20000, 6, 0.5, rng), 0.0, rng);
  CHECK(std::abs(d.y.mean()) < 0.03);
  CHECK(std::abs((d.y.array() - d.y.mean()).square().mean() - 1.0) < 0.03);
}

TEST_CASE("survival responses") {
  ScenarioSpec spec = small_spec(2, 4);
  spec.outcome = Outcome::survival;
  const TruthTable t = truth(2);
  const Calibration cal = calibrate_censoring(spec, t);
  CHECK(cal.upper > 0.0);
  CHECK(std::abs(cal.rate - 0.2) <= 0.005);

  SUBCASE("validation batch lands in the target band") {
    const double rate = censoring_rate(spec, t, cal.upper, 50000, 999);
    CHECK(rate >= 0.18);
    CHECK(rate <= 0.22);
  }
  SUBCASE("monotone in the censoring bound") {
    double previous = 1.0;
    for (double u : {0.5, 2.0, 8.0, 32.0, 1e6}) {
      const double rate = censoring_rate(spec, t, u, 20000, 5);
      CHECK(rate <= previous);
      previous = rate;
    }
    CHECK(previous < 0.01);
  }
  SUBCASE("deterministic calibration") {
    ScenarioSpec other = spec;
    other.seed = 77;  // data seed does not enter calibration
    CHECK(calibrate_censoring(other, t).upper == cal.upper);
  }
  SUBCASE("generated data") {
    const SimulatedData s = simulate(spec);
    CHECK(s.censor_upper == cal.upper);
    std::size_t events = 0, total = 0;
    for (const auto& d : s.datasets) {
      REQUIRE(d.is_survival());
      CHECK(is_sorted_by_response(d));
      CHECK(d.y.maxCoeff() <= std::log(cal.upper));
      events += static_cast<std::size_t>(d.delta->sum());
      total += d.rows();
    }
    const double censored = 1.0 - static_cast<double>(events) / static_cast<double>(total);
    CHECK(censored > 0.1);
    CHECK(censored < 0.3);
  }
}
