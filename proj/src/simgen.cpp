#include "rnpint/simgen.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <tuple>

namespace rnpint {

namespace {

constexpr std::size_t kCalibrationSamples = 50000;
constexpr int kMaxBisection = 60;
constexpr double kCalibrationTolerance = 0.005;

Component lin(double a) { return {ComponentKind::linear, a}; }
Component quad(double a) { return {ComponentKind::quadratic, a}; }
Component sine(double a) { return {ComponentKind::sine, a}; }
Component sigm(double a) { return {ComponentKind::sigmoid, a}; }
Component bump(double a) { return {ComponentKind::bump, a}; }
const Component zero{};

}  // namespace

std::string regime_name(ErrorRegime regime) {
  switch (regime) {
    case ErrorRegime::normal: return "normal";
    case ErrorRegime::mix7030: return "mix7030";
    case ErrorRegime::cauchy: return "cauchy";
  }
  throw Error("unknown error regime");
}

ErrorRegime parse_regime(const std::string& text) {
  if (text == "normal" || text == "1") return ErrorRegime::normal;
  if (text == "mix7030" || text == "mix" || text == "2") return ErrorRegime::mix7030;
  if (text == "cauchy" || text == "3") return ErrorRegime::cauchy;
  throw Error("unknown error regime '" + text + "'");
}

void ScenarioSpec::validate() const {
  if (scenario < 1 || scenario > 4) throw Error("scenario must be 1, 2, 3 or 4");
  if (sizes.size() != 3) throw Error("scenario truth is defined for exactly three datasets");
  for (auto n : sizes)
    if (n < 2) throw Error("every dataset needs at least two rows");
  const std::size_t needed = scenario == 4 ? 9 : 6;
  if (p < needed) throw Error("p must be at least " + std::to_string(needed) + " for this scenario");
  if (!(std::abs(rho) < 1.0)) throw Error("AR correlation must lie in (-1, 1)");
  if (!(target_censoring > 0.0 && target_censoring < 1.0))
    throw Error("target censoring rate must lie in (0, 1)");
}

double Component::operator()(double x) const {
  switch (kind) {
    case ComponentKind::zero: return 0.0;
    case ComponentKind::linear: return scale * x;
    case ComponentKind::quadratic: return scale * (x * x - 1.0);
    case ComponentKind::sine: return scale * std::sin(x);
    case ComponentKind::sigmoid: return scale * (6.0 / (1.0 + std::exp(-2.0 * x)) - 3.0);
    case ComponentKind::bump: return scale * (3.0 * std::exp(-x * x / 4.0) - std::sqrt(6.0));
  }
  return 0.0;
}

std::string Component::tag() const {
  switch (kind) {
    case ComponentKind::zero: return "zero";
    case ComponentKind::linear: return "linear";
    case ComponentKind::quadratic: return "quadratic";
    case ComponentKind::sine: return "sine";
    case ComponentKind::sigmoid: return "sigmoid";
    case ComponentKind::bump: return "bump";
  }
  return "zero";
}

Component TruthTable::at(std::size_t m, std::size_t j) const {
  if (m >= components.size()) throw Error("dataset index out of range");
  return j < components[m].size() ? components[m][j] : zero;
}

std::size_t TruthTable::equal_pairs() const {
  std::size_t count = 0;
  for (std::size_t j = 0; j < signal_range(); ++j)
    for (std::size_t a = 0; a < datasets(); ++a)
      for (std::size_t b = a + 1; b < datasets(); ++b)
        if (components[a][j] == components[b][j]) ++count;
  return count;
}

std::size_t TruthTable::nonzero_count() const {
  std::size_t count = 0;
  for (const auto& row : components)
    for (const auto& c : row)
      if (!c.is_zero()) ++count;
  return count;
}

TruthTable truth(int scenario) {
  TruthTable t;
  t.scenario = scenario;
  switch (scenario) {
    case 1:
      t.components = {
          {lin(1), zero, sine(3), sigm(1), zero, lin(2)},
          {lin(1), quad(1), zero, zero, bump(1), zero},
          {lin(1), quad(1), sine(3), zero, bump(1), lin(-2)},
      };
      break;
    case 2: {
      const std::vector<Component> row{lin(1), quad(1), sine(2), sigm(1), bump(1), lin(2)};
      t.components = {row, row, row};
      break;
    }
    case 3:
      t.components = {
          {lin(1), quad(1), sine(2), sigm(1), bump(1), lin(2)},
          {zero, quad(2), sine(4), zero, bump(-1), lin(4)},
          {lin(2), zero, sine(-1), sigm(-1), zero, lin(-2)},
      };
      break;
    case 4:
      t.components = {
          {lin(1), zero, lin(1), lin(1), lin(2), lin(2), zero, zero, lin(1.5)},
          {lin(1), lin(1), zero, lin(1), zero, zero, lin(-1), lin(2), lin(-1.5)},
          {lin(1), lin(1), lin(1), zero, zero, lin(-2), lin(2), zero, lin(3)},
      };
      break;
    default: throw Error("scenario must be 1, 2, 3 or 4");
  }
  return t;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

double draw_error(ErrorRegime regime, std::mt19937_64& rng, bool* contaminated) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::cauchy_distribution<double> cauchy(0.0, 1.0);
  bool heavy = regime == ErrorRegime::cauchy;
  if (regime == ErrorRegime::mix7030) heavy = std::bernoulli_distribution(0.3)(rng);
  if (contaminated) *contaminated = heavy;
  return heavy ? cauchy(rng) : normal(rng);
}

Eigen::MatrixXd gen_covariates(std::size_t n, std::size_t p, double rho, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const double innovation = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = normal(rng);
    for (Eigen::Index j = 1; j < X.cols(); ++j) X(i, j) = rho * X(i, j - 1) + innovation * normal(rng);
  }
  return X;
}

Eigen::VectorXd signal(const TruthTable& truth, std::size_t m, const Eigen::MatrixXd& X) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(X.rows());
  const auto range = std::min<std::size_t>(truth.signal_range(), static_cast<std::size_t>(X.cols()));
  for (std::size_t j = 0; j < range; ++j) {
    const Component f = truth.at(m, j);
    if (f.is_zero()) continue;
    for (Eigen::Index i = 0; i < X.rows(); ++i) out(i) += f(X(i, static_cast<Eigen::Index>(j)));
  }
  return out;
}

Dataset gen_response(const ScenarioSpec& spec, const TruthTable& truth, std::size_t m,
                     Eigen::MatrixXd X, double censor_upper, std::mt19937_64& rng) {
  Dataset out;
  out.id = "dataset" + std::to_string(m + 1);
  for (Eigen::Index j = 0; j < X.cols(); ++j) out.covariate_names.push_back("x" + std::to_string(j + 1));
  const Eigen::VectorXd mean = signal(truth, m, X);
  out.y.resize(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out.y(i) = mean(i) + draw_error(spec.error, rng);

  if (spec.outcome == Outcome::survival) {
    if (!(censor_upper > 0.0)) throw Error("censoring upper bound must be positive");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    out.delta = Eigen::VectorXi(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      // Work on the log scale so heavy-tailed errors cannot overflow exp().
      const double log_time = out.y(i);
      const double log_censor = std::log(censor_upper) + std::log(unit(rng));
      (*out.delta)(i) = log_time <= log_censor ? 1 : 0;
      out.y(i) = std::min(log_time, log_censor);
    }
  }
  out.X = std::move(X);
  return out;
}

namespace {

struct CalibrationBatch {
  std::vector<double> log_time;
  std::vector<double> log_uniform;
};

CalibrationBatch draw_batch(const ScenarioSpec& spec, const TruthTable& truth, std::size_t samples,
                            std::uint64_t seed) {
  auto rng = make_rng(seed, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t width = truth.signal_range();
  std::size_t total = 0;
  for (auto n : spec.sizes) total += n;
  CalibrationBatch batch;
  batch.log_time.reserve(samples);
  batch.log_uniform.reserve(samples);
  for (std::size_t m = 0; m < spec.datasets(); ++m) {
    // Samples per dataset in proportion to its size, so the batch mirrors the pooled data.
    const std::size_t share = samples * spec.sizes[m] / total;
    const Eigen::MatrixXd X = gen_covariates(share, width, spec.rho, rng);
    const Eigen::VectorXd mean = signal(truth, m, X);
    for (std::size_t i = 0; i < share; ++i) {
      batch.log_time.push_back(mean(static_cast<Eigen::Index>(i)) + draw_error(spec.error, rng));
      batch.log_uniform.push_back(std::log(unit(rng)));
    }
  }
  return batch;
}

double batch_rate(const CalibrationBatch& batch, double log_upper) {
  std::size_t censored = 0;
  for (std::size_t i = 0; i < batch.log_time.size(); ++i)
    if (log_upper + batch.log_uniform[i] < batch.log_time[i]) ++censored;
  return static_cast<double>(censored) / static_cast<double>(batch.log_time.size());
}

}  // namespace

double censoring_rate(const ScenarioSpec& spec, const TruthTable& truth, double censor_upper,
                      std::size_t samples, std::uint64_t seed) {
  return batch_rate(draw_batch(spec, truth, samples, seed), std::log(censor_upper));
}

Calibration calibrate_censoring(const ScenarioSpec& spec, const TruthTable& truth) {
  spec.validate();
  using Key = std::tuple<int, int, std::vector<std::size_t>, std::uint64_t, double, double>;
  static std::map<Key, Calibration> cache;
  static std::mutex mutex;
  const Key key{truth.scenario, static_cast<int>(spec.error), spec.sizes, spec.calibration_seed,
                spec.rho, spec.target_censoring};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  const CalibrationBatch batch = draw_batch(spec, truth, kCalibrationSamples, spec.calibration_seed);
  const double target = spec.target_censoring;
  // Censoring rate decreases in u; bracket on the log scale.
  double lo = -60.0, hi = 60.0;
  if (batch_rate(batch, lo) < target || batch_rate(batch, hi) > target)
    throw Error("could not bracket the censoring target");
  Calibration result;
  for (int step = 1; step <= kMaxBisection; ++step) {
    const double mid = 0.5 * (lo + hi);
    const double rate = batch_rate(batch, mid);
    result = {std::exp(mid), rate, step};
    if (std::abs(rate - target) <= kCalibrationTolerance) break;
    if (rate > target) lo = mid;
    else hi = mid;
  }
  if (std::abs(result.rate - target) > 0.02)
    throw Error("censoring calibration did not converge within " + std::to_string(kMaxBisection) +
                " bisection steps");
  std::lock_guard lock(mutex);
  cache.emplace(key, result);
  return result;
}

SimulatedData simulate(const ScenarioSpec& spec, std::uint64_t stream) {
  spec.validate();
  SimulatedData out;
  out.truth = truth(spec.scenario);
  if (spec.outcome == Outcome::survival) out.censor_upper = calibrate_censoring(spec, out.truth).upper;
  auto rng = make_rng(spec.seed, stream);
  for (std::size_t m = 0; m < spec.datasets(); ++m) {
    Eigen::MatrixXd X = gen_covariates(spec.sizes[m], spec.p, spec.rho, rng);
    Dataset d = gen_response(spec, out.truth, m, std::move(X), out.censor_upper, rng);
    out.datasets.push_back(spec.outcome == Outcome::survival ? sort_by_response(d) : std::move(d));
  }
  return out;
}

}  // namespace rnpint
