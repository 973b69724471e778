#include "rnpint/boosting.hpp"

#include <Eigen/Cholesky>

#include <cassert>
#include <cmath>
#include <limits>

namespace rnpint {

namespace {

constexpr int kMaxSweeps = 50;
constexpr int kMaxHalvings = 30;
constexpr double kSweepTolerance = 1e-6;
constexpr double kJitter = 1e-8;

// Sum of log1p(z_i^2) over a run of rows, evaluated as the log of a product
// renormalized every few factors.
class LogProduct {
 public:
  void add(double factor) {
    product_ *= factor;
    if (++pending_ == 8) flush();
  }
  double value() {
    flush();
    return sum_;
  }

 private:
  void flush() {
    if (pending_ == 0) return;
    int exponent = 0;
    const double mantissa = std::frexp(product_, &exponent);
    sum_ += std::log(mantissa) + exponent * kLn2;
    product_ = 1.0;
    pending_ = 0;
  }
  static constexpr double kLn2 = 0.693147180559945309417;
  double product_ = 1.0;
  double sum_ = 0.0;
  int pending_ = 0;
};

// Loss of one dataset at gamma. When `G` is given, also accumulates the
// reweighted normal equations at gamma.
double sweep_rows(const RowMatrix& block, const double* r, const double* w, bool uniform,
                  const double* g, int dim, bool cauchy, double c, double* G, double* b) {
  const Eigen::Index n = block.rows();
  const Eigen::Map<const Eigen::VectorXd> res(r, n);
  const Eigen::Map<const Eigen::VectorXd> gamma(g, dim);
  const Eigen::ArrayXd e = (res - block * gamma).array();
  const Eigen::ArrayXd wt = w ? Eigen::ArrayXd(Eigen::Map<const Eigen::ArrayXd>(w, n)) : Eigen::ArrayXd::Ones(n);
  double loss = 0.0;
  Eigen::ArrayXd omega;
  if (cauchy) {
    const Eigen::ArrayXd z2 = (e / c).square();
    if (uniform) {
      LogProduct product;
      for (Eigen::Index i = 0; i < n; ++i) product.add(1.0 + z2(i));
      loss = (n ? wt(0) : 0.0) * product.value();
    } else {
      for (Eigen::Index i = 0; i < n; ++i)
        if (wt(i) != 0.0) loss += wt(i) * std::log1p(z2(i));
    }
    if (G) omega = 2.0 * wt / (e.square() + c * c);
  } else {
    loss = (wt * e.square()).sum();
    if (G) omega = wt;
  }
  if (!G) return loss;
  Eigen::Map<Eigen::MatrixXd> gram(G, dim, dim);
  Eigen::Map<Eigen::VectorXd> rhs(b, dim);
  const RowMatrix scaled = omega.matrix().asDiagonal() * block;
  gram.noalias() += block.transpose() * scaled;
  rhs.noalias() += scaled.transpose() * res;
  return loss;
}

bool uniform_weights(const BoostingData& d) {
  if (d.weights.size() == 0) return true;
  return (d.weights.array() == d.weights(0)).all();
}

// Loss of the subset at gamma, optionally with the normal equations.
double sweep(const BoostingProblem& problem, const std::vector<Eigen::VectorXd>& residuals,
             std::size_t j, DatasetMask subset, const Eigen::VectorXd& gamma, const LossSpec& spec,
             Eigen::MatrixXd* gram, Eigen::VectorXd* rhs) {
  const auto K = static_cast<int>(gamma.size());
  const bool cauchy = spec.kind == LossKind::cauchy;
  double* G = nullptr;
  double* b = nullptr;
  if (gram) {
    gram->setZero(K, K);
    rhs->setZero(K);
    G = gram->data();
    b = rhs->data();
  }
  double total = 0.0;
  for (std::size_t m = 0; m < problem.datasets.size(); ++m) {
    if (!mask_contains(subset, m)) continue;
    const auto& d = problem.datasets[m];
    const double* w = d.weights.size() ? d.weights.data() : nullptr;
    const bool uniform = uniform_weights(d);
    const auto& block = d.blocks[j];
    if (block.rows() == 0) continue;
    const double* r = residuals[m].data();
    total += sweep_rows(block, r, w, uniform, gamma.data(), K, cauchy, spec.c, G, b);
  }
  return total;
}

Eigen::VectorXd solve_normal(Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs, bool& jitter) {
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success) {
    Eigen::VectorXd x = llt.solve(rhs);
    if (x.allFinite()) return x;
  }
  jitter = true;
  Eigen::MatrixXd full = gram;
  full.diagonal().array() += kJitter;
  return full.ldlt().solve(rhs);
}

}  // namespace

void FitConfig::validate() const {
  loss.validate();
  basis.validate();
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw Error("lambda must be nonnegative");
  if (!(step > 0.0 && step <= 1.0)) throw Error("step size must lie in (0, 1]");
  if (iterations < 1) throw Error("number of iterations must be at least 1");
}

BoostingProblem make_problem(const BasisExpansion& expansion, const std::vector<Dataset>& data) {
  validate_datasets(data);
  if (expansion.blocks.size() != data.size()) throw Error("expansion and data differ in dataset count");
  BoostingProblem problem;
  problem.covariates = data.front().covariates();
  problem.dimension = expansion.transform.dimension();
  problem.datasets.reserve(data.size());

  for (std::size_t m = 0; m < data.size(); ++m) {
    const auto& d = data[m];
    BoostingData out;
    out.sample_size = d.rows();
    if (!d.is_survival()) {
      out.blocks.assign(expansion.blocks[m].begin(), expansion.blocks[m].end());
      out.response = d.y;
      // Mean loss per dataset, matching the scale of Kaplan-Meier weights.
      out.weights = Eigen::VectorXd::Constant(d.y.size(), 1.0 / static_cast<double>(d.y.size()));
    } else {
      if (!is_sorted_by_response(d))
        throw Error("survival dataset '" + d.id + "' must be sorted by response");
      const Eigen::VectorXd w = km_weights(d.y, *d.delta);
      std::vector<Eigen::Index> keep;
      for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w(i) > 0.0) keep.push_back(i);
      const auto n = static_cast<Eigen::Index>(keep.size());
      out.response.resize(n);
      out.weights.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        out.response(i) = d.y(keep[i]);
        out.weights(i) = w(keep[i]);
      }
      out.blocks.reserve(problem.covariates);
      for (const auto& block : expansion.blocks[m]) {
        RowMatrix kept(n, block.cols());
        for (Eigen::Index i = 0; i < n; ++i) kept.row(i) = block.row(keep[i]);
        out.blocks.push_back(std::move(kept));
      }
    }
    problem.datasets.push_back(std::move(out));
  }
  return problem;
}

IncrementSolution solve_increment(const BoostingProblem& problem,
                                  const std::vector<Eigen::VectorXd>& residuals, std::size_t j,
                                  DatasetMask subset, const LossSpec& spec) {
  const auto M = problem.datasets.size();
  if (j >= problem.covariates) throw Error("covariate index out of range");
  if (subset == 0 || (subset >> M) != 0) throw Error("invalid dataset subset");
  const int K = problem.dimension;

  IncrementSolution out;
  out.gamma = Eigen::VectorXd::Zero(K);
  Eigen::MatrixXd gram, next_gram;
  Eigen::VectorXd rhs, next_rhs;
  out.loss_before = sweep(problem, residuals, j, subset, out.gamma, spec, &gram, &rhs);

  if (spec.kind == LossKind::least_squares) {
    out.gamma = solve_normal(gram, rhs, out.jitter);
    out.loss_after = sweep(problem, residuals, j, subset, out.gamma, spec, nullptr, nullptr);
    out.sweeps = 1;
    out.path.push_back(out.loss_after);
    return out;
  }

  // Cauchy: iteratively reweighted least squares with weights from the current gamma.
  double current = out.loss_before;
  for (int iteration = 0; iteration < kMaxSweeps; ++iteration) {
    Eigen::VectorXd proposal = solve_normal(gram, rhs, out.jitter);
    double candidate = sweep(problem, residuals, j, subset, proposal, spec, &next_gram, &next_rhs);
    int halvings = 0;
    while (!(candidate <= current) && halvings < kMaxHalvings) {
      proposal = 0.5 * (proposal + out.gamma);
      candidate = sweep(problem, residuals, j, subset, proposal, spec, &next_gram, &next_rhs);
      ++halvings;
    }
    ++out.sweeps;
    if (!(candidate <= current)) {
      out.path.push_back(current);
      break;
    }
    const double change = (proposal - out.gamma).cwiseAbs().maxCoeff();
    out.gamma = std::move(proposal);
    current = candidate;
    std::swap(gram, next_gram);
    std::swap(rhs, next_rhs);
    out.path.push_back(current);
    if (change < kSweepTolerance) break;
  }
  out.loss_after = current;
  return out;
}

double pen_c(std::size_t equal_pairs, std::size_t datasets, std::size_t covariates) {
  if (datasets < 2) return 0.0;
  const double pairs = 0.5 * static_cast<double>(datasets) * static_cast<double>(datasets - 1);
  return 1.0 - static_cast<double>(equal_pairs) / (pairs * static_cast<double>(covariates));
}

double pen_c(const CoefficientState& state) {
  return pen_c(count_equal_pairs(state), state.datasets(), state.covariates());
}

double bic_term(std::size_t sample_size, std::size_t active_covariates) {
  if (sample_size == 0) return 0.0;
  const double n = static_cast<double>(sample_size);
  return std::log(n) / n * static_cast<double>(active_covariates);
}

Booster::Booster(const BoostingProblem& problem, FitConfig config)
    : problem_(&problem),
      config_(std::move(config)),
      state_(problem.datasets.size(), problem.covariates, problem.dimension),
      cache_(problem.covariates) {
  config_.validate();
  residuals_.reserve(problem.datasets.size());
  losses_.reserve(problem.datasets.size());
  for (const auto& d : problem.datasets) {
    if (d.blocks.size() != problem.covariates) throw Error("dataset has the wrong number of blocks");
    residuals_.push_back(d.response);
    losses_.push_back(dataset_loss(d.response, d.weight_ptr(), config_.loss));
  }
}

ObjectiveParts Booster::objective(std::size_t j, DatasetMask subset,
                                  const IncrementSolution& solution) const {
  const auto M = state_.datasets();
  const bool moves = (solution.gamma.array() != 0.0).any();
  ObjectiveParts parts;
  for (std::size_t m = 0; m < M; ++m) {
    const auto& d = problem_->datasets[m];
    std::size_t active = state_.active_count(m);
    if (mask_contains(subset, m)) {
      if (moves && !state_.is_active(m, j)) ++active;
    } else {
      parts.loss += losses_[m];
    }
    parts.complexity += bic_term(d.sample_size, active);
  }
  parts.loss += solution.loss_after;

  std::size_t equal = count_equal_pairs(state_);
  if (moves) {
    const DatasetMask group = enclosing_group(partition_of(state_, j), subset);
    const auto inside = static_cast<std::size_t>(mask_size(subset));
    equal -= inside * (static_cast<std::size_t>(mask_size(group)) - inside);
  }
  parts.commonality = config_.lambda * pen_c(equal, M, state_.covariates());
  return parts;
}

ObjectiveParts Booster::score() const {
  const auto M = state_.datasets();
  ObjectiveParts parts;
  for (std::size_t m = 0; m < M; ++m) {
    parts.loss += losses_[m];
    parts.complexity += bic_term(problem_->datasets[m].sample_size, state_.active_count(m));
  }
  const double penalty = config_.lambda * pen_c(state_);
  parts.commonality = config_.penalty_inside_sum ? static_cast<double>(M) * penalty : penalty;
  return parts;
}

IncrementProposal Booster::best_for(std::size_t j) const {
  IncrementProposal best;
  best.j = j;
  best.objective_value = std::numeric_limits<double>::infinity();
  for (DatasetMask subset : enumerate_candidates(partition_of(state_, j))) {
    const IncrementSolution& solution = solution_for(j, subset);
    const double value = objective(j, subset, solution).total();
    if (value < best.objective_value ||
        (value == best.objective_value && subset < best.subset) || best.subset == 0) {
      best.subset = subset;
      best.gamma = solution.gamma;
      best.objective_value = value;
    }
  }
  return best;
}

const IncrementSolution& Booster::solution_for(std::size_t j, DatasetMask subset) const {
  auto& entries = cache_[j];
  for (const auto& entry : entries)
    if (entry.subset == subset) return entry.solution;
  entries.push_back({subset, solve_increment(*problem_, residuals_, j, subset, config_.loss)});
  return entries.back().solution;
}

IncrementProposal Booster::best_proposal() const {
  IncrementProposal best;
  for (std::size_t j = 0; j < state_.covariates(); ++j) {
    IncrementProposal candidate = best_for(j);
    if (best.subset == 0 || candidate.objective_value < best.objective_value) best = std::move(candidate);
  }
  return best;
}

void Booster::apply(const IncrementProposal& proposal) {
  const Eigen::VectorXd increment = config_.step * proposal.gamma;
  state_.add(proposal.j, proposal.subset, increment);
  if ((increment.array() != 0.0).any()) {
    for (auto& entries : cache_)
      std::erase_if(entries, [&](const CachedSolution& e) { return (e.subset & proposal.subset) != 0; });
  }
  for (std::size_t m = 0; m < state_.datasets(); ++m) {
    if (!mask_contains(proposal.subset, m)) continue;
    const auto& d = problem_->datasets[m];
    residuals_[m].noalias() -= d.blocks[proposal.j] * increment;
    losses_[m] = dataset_loss(residuals_[m], d.weight_ptr(), config_.loss);
  }
#ifndef NDEBUG
  assert(state_.audit());
  assert(residual_drift() < 1e-8);
#endif
}

IncrementProposal Booster::step() {
  IncrementProposal proposal = best_proposal();
  apply(proposal);
  return proposal;
}

double Booster::residual_drift() const {
  double drift = 0.0;
  for (std::size_t m = 0; m < state_.datasets(); ++m) {
    const auto& d = problem_->datasets[m];
    Eigen::VectorXd fresh = d.response;
    for (std::size_t j = 0; j < state_.covariates(); ++j)
      if (state_.is_active(m, j)) fresh.noalias() -= d.blocks[j] * state_.coef(m, j);
    if (fresh.size()) drift = std::max(drift, (fresh - residuals_[m]).cwiseAbs().maxCoeff());
  }
  return drift;
}

FitResult fit(const BoostingProblem& problem, const FitConfig& config) {
  Booster booster(problem, config);
  FitResult result;
  result.trace.reserve(static_cast<std::size_t>(config.iterations));
  double best = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= config.iterations; ++t) {
    const IncrementProposal proposal = booster.step();
    const double score = booster.score().total();
    result.trace.push_back({t, score, proposal.j, proposal.subset, proposal.objective_value});
    if (score < best || result.t_star == 0) {
      best = score;
      result.t_star = t;
      result.final_state = booster.state();
    }
  }
  return result;
}

}  // namespace rnpint
