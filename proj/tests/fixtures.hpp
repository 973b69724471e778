#pragma once

#include "rnpint/basis.hpp"
#include "rnpint/boosting.hpp"
#include "rnpint/types.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace fixtures {

using namespace rnpint;

/// M datasets of n rows and p uniform(-2, 2) covariates; y_m = f(x_0) + noise.
inline std::vector<Dataset> additive_data(std::size_t M, Eigen::Index n, Eigen::Index p, double noise,
                                          std::uint64_t seed, double shift_per_dataset = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::normal_distribution<double> z;
  std::vector<Dataset> out;
  for (std::size_t m = 0; m < M; ++m) {
    Dataset d;
    d.id = "d" + std::to_string(m);
    d.X.resize(n, p);
    for (Eigen::Index i = 0; i < d.X.size(); ++i) d.X(i) = u(rng);
    d.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      d.y(i) = 2.0 * std::sin(1.5 * d.X(i, 0)) + shift_per_dataset * static_cast<double>(m) * d.X(i, 1) +
               noise * z(rng);
    for (Eigen::Index j = 0; j < p; ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
    out.push_back(std::move(d));
  }
  return out;
}

inline std::vector<Eigen::MatrixXd> matrices(const std::vector<Dataset>& data) {
  std::vector<Eigen::MatrixXd> X;
  for (const auto& d : data) X.push_back(d.X);
  return X;
}

struct Problem {
  BasisExpansion expansion;
  BoostingProblem problem;
};

inline Problem make(const std::vector<Dataset>& data, const BasisConfig& basis = {}) {
  Problem out;
  out.expansion = build_expansion(matrices(data), basis);
  out.problem = make_problem(out.expansion, data);
  return out;
}

}  // namespace fixtures
