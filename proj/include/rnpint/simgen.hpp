#pragma once

#include "rnpint/types.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace rnpint {

enum class ErrorRegime { normal, mix7030, cauchy };

std::string regime_name(ErrorRegime regime);
ErrorRegime parse_regime(const std::string& text);

struct ScenarioSpec {
  int scenario = 1;
  std::vector<std::size_t> sizes{100, 100, 100};  // n^m; M = sizes.size()
  std::size_t p = 200;
  double rho = 0.5;
  ErrorRegime error = ErrorRegime::normal;
  Outcome outcome = Outcome::continuous;
  double target_censoring = 0.20;
  std::uint64_t seed = 1;
  std::uint64_t calibration_seed = 20240601;

  std::size_t datasets() const { return sizes.size(); }
  void validate() const;
};

enum class ComponentKind { zero, linear, quadratic, sine, sigmoid, bump };

/// scale * base(x) where base is x, x^2 - 1, sin x, 6/(1+e^{-2x}) - 3 or
/// 3 e^{-x^2/4} - sqrt(6).
struct Component {
  ComponentKind kind = ComponentKind::zero;
  double scale = 0.0;

  double operator()(double x) const;
  bool is_zero() const { return kind == ComponentKind::zero || scale == 0.0; }
  std::string tag() const;

  friend bool operator==(const Component& a, const Component& b) {
    if (a.is_zero() || b.is_zero()) return a.is_zero() && b.is_zero();
    return a.kind == b.kind && a.scale == b.scale;
  }
};

/// True component functions f_j^m. Covariates beyond the listed ones are zero.
struct TruthTable {
  int scenario = 0;
  std::vector<std::vector<Component>> components;  // [m][j] for j < signal_range()

  std::size_t datasets() const { return components.size(); }
  std::size_t signal_range() const { return components.empty() ? 0 : components.front().size(); }
  /// f_j^m; zero for j outside the signal range.
  Component at(std::size_t m, std::size_t j) const;
  /// Pairs m1 < m2 with equal components, summed over the signal range.
  std::size_t equal_pairs() const;
  /// Number of nonzero (m, j) components.
  std::size_t nonzero_count() const;
};

/// Truth for scenario 1-4 with three datasets.
TruthTable truth(int scenario);

/// One draw of the error regime; `contaminated` reports whether the Cauchy
/// branch was taken.
double draw_error(ErrorRegime regime, std::mt19937_64& rng, bool* contaminated = nullptr);

/// Rows i.i.d. N(0, Sigma) with Sigma_jk = rho^|j-k|, by the AR(1) recursion.
Eigen::MatrixXd gen_covariates(std::size_t n, std::size_t p, double rho, std::mt19937_64& rng);

/// sum_j f_j^m(x_ij) for dataset m.
Eigen::VectorXd signal(const TruthTable& truth, std::size_t m, const Eigen::MatrixXd& X);

/// Continuous or right-censored AFT response (y = log min(T, C)).
/// `censor_upper` is the upper end u of the uniform censoring distribution.
Dataset gen_response(const ScenarioSpec& spec, const TruthTable& truth, std::size_t m,
                     Eigen::MatrixXd X, double censor_upper, std::mt19937_64& rng);

struct Calibration {
  double upper = 0.0;  // u
  double rate = 0.0;   // censoring rate on the calibration batch
  int steps = 0;
};

/// Bisection on log u until the censoring rate of a 5e4-sample batch is within
/// 0.005 of the target (and in any case inside [target - 0.02, target + 0.02]).
/// Results are cached per scenario, error regime, sizes and calibration seed.
Calibration calibrate_censoring(const ScenarioSpec& spec, const TruthTable& truth);

/// Censoring rate for a given u on a fresh batch drawn with `seed`.
double censoring_rate(const ScenarioSpec& spec, const TruthTable& truth, double censor_upper,
                      std::size_t samples, std::uint64_t seed);

struct SimulatedData {
  std::vector<Dataset> datasets;
  TruthTable truth;
  double censor_upper = 0.0;
};

/// Generates the datasets of `spec`. `stream` separates independent draws
/// from the same seed (0 = training, 1 = test). Survival datasets are
/// returned sorted by response.
SimulatedData simulate(const ScenarioSpec& spec, std::uint64_t stream = 0);

/// Deterministic 64-bit generator seeded from (seed, stream).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream);

}  // namespace rnpint
