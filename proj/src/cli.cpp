#include "rnpint/cli.hpp"

#include "rnpint/io.hpp"
#include "rnpint/metrics.hpp"
#include "rnpint/methods.hpp"
#include "rnpint/parallel.hpp"
#include "rnpint/simgen.hpp"
#include "rnpint/tuning.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace rnpint {

namespace {

namespace fs = std::filesystem;

struct RunConfig {
  std::string method = "rnp_int";
  std::vector<std::string> methods;
  int scenario = 0;
  std::string error = "normal";
  std::string outcome = "continuous";
  std::vector<std::string> input;
  std::string out = ".";
  std::string prefix = "sim";
  std::optional<std::uint64_t> seed;
  int replicates = 1;
  std::size_t p = 200;
  std::vector<std::size_t> sizes{100, 100, 100};
  std::vector<std::size_t> test_sizes;
  double rho = 0.5;
  double censoring = 0.2;
  std::uint64_t stream = 0;
  std::optional<double> lambda;
  bool tune = false;
  std::vector<double> grid;
  int folds = 5;
  double c = 1.0;
  double step = 0.1;
  int iterations = 300;
  int inner_knots = 3;
  std::string standardize;
  std::size_t screen = 0;
  double holdout = 0.0;
  int threads = 1;
  int grid_points = 100;

  Outcome outcome_kind() const {
    if (outcome == "continuous") return Outcome::continuous;
    if (outcome == "survival") return Outcome::survival;
    throw Error("unknown outcome '" + outcome + "' (expected continuous or survival)");
  }

  std::uint64_t seed_or_default() const { return seed.value_or(1); }

  ScenarioSpec scenario_spec(std::uint64_t s) const {
    ScenarioSpec spec;
    spec.scenario = scenario;
    spec.sizes = sizes;
    spec.p = p;
    spec.rho = rho;
    spec.error = parse_regime(error);
    spec.outcome = outcome_kind();
    spec.target_censoring = censoring;
    spec.seed = s;
    spec.validate();
    return spec;
  }

  FitConfig fit_config() const {
    FitConfig config;
    config.loss.c = c;
    config.step = step;
    config.iterations = iterations;
    config.basis.n_inner_knots = inner_knots;
    config.outcome = outcome_kind();
    return config;
  }

  TuneSpec tune_spec(std::uint64_t s) const {
    TuneSpec spec;
    spec.lambda_grid = grid;
    spec.folds = folds;
    spec.c = c;
    spec.seed = s;
    spec.threads = threads;
    return spec;
  }

  std::vector<Method> method_list() const {
    std::vector<Method> out_methods;
    for (const auto& m : methods.empty() ? std::vector<std::string>{method} : methods)
      out_methods.push_back(parse_method(m));
    return out_methods;
  }

  void validate() const {
    outcome_kind();
    parse_regime(error);
    method_list();
    if (replicates < 1) throw Error("replicates must be at least 1");
    if (!(holdout >= 0.0 && holdout < 1.0)) throw Error("holdout must lie in [0, 1)");
    if (!(c > 0.0)) throw Error("c must be positive");
    if (lambda && !(*lambda >= 0.0)) throw Error("lambda must be nonnegative");
    if (!standardize.empty()) parse_scale_mode(standardize);
    if (grid_points < 2) throw Error("grid-points must be at least 2");
  }
};

// Config file entries become leading "--key=value" arguments so that flags
// given on the command line, which come later, take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::vector<std::string> from_file;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file name");
      path = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
      continue;
    }
    for (const auto& [key, value] : read_config_file(path)) {
      std::string name = key;
      for (char& ch : name)
        if (ch == '_') ch = '-';
      from_file.push_back("--" + name + "=" + value);
    }
  }
  if (from_file.empty() || rest.empty()) return rest;
  std::vector<std::string> out{rest.front()};
  out.insert(out.end(), from_file.begin(), from_file.end());
  out.insert(out.end(), rest.begin() + 1, rest.end());
  return out;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream file(path);
  if (!file) throw Error(path.string() + ": cannot open for writing");
  return file;
}

std::vector<Dataset> prepare(std::vector<Dataset> data) {
  for (auto& d : data)
    if (d.is_survival() && !is_sorted_by_response(d)) d = sort_by_response(d);
  return data;
}

struct LoadedData {
  std::vector<Dataset> data;
  std::optional<TruthTable> truth;
};

LoadedData load_or_simulate(const RunConfig& rc) {
  if (!rc.input.empty()) {
    if (rc.scenario != 0) throw Error("give either --input or --scenario, not both");
    return {prepare(load_csv(rc.input, rc.outcome_kind())), std::nullopt};
  }
  if (rc.scenario == 0) throw Error("either --input or --scenario is required");
  SimulatedData sim = simulate(rc.scenario_spec(rc.seed_or_default()), rc.stream);
  return {std::move(sim.datasets), std::move(sim.truth)};
}

double resolve_lambda(const RunConfig& rc, Method method, const std::vector<Dataset>& train,
                      std::uint64_t seed, TuneResult* curve = nullptr) {
  if (rc.tune) {
    TuneResult result = tune_lambda(train, method, rc.fit_config(), rc.tune_spec(seed));
    const double best = result.best_lambda;
    if (curve) *curve = std::move(result);
    return best;
  }
  return rc.lambda.value_or(default_lambda(train.front().covariates()));
}

// Standardization and screening fitted on `train` and replayed on `test`.
void preprocess(const RunConfig& rc, std::vector<Dataset>& train, std::vector<Dataset>* test,
                ScreeningResult* ranking = nullptr) {
  if (!rc.standardize.empty()) {
    const ScaleTransform t = fit_scaling(train, parse_scale_mode(rc.standardize));
    train = t.apply(train);
    if (test) *test = t.apply(*test);
  }
  if (rc.screen > 0) {
    ScreeningResult s = screen_covariates(train, std::min(rc.screen, train.front().covariates()));
    if (test) {
      std::vector<Eigen::Index> keep;
      for (const auto& name : s.data.front().covariate_names) {
        const auto& names = train.front().covariate_names;
        keep.push_back(std::find(names.begin(), names.end(), name) - names.begin());
      }
      for (auto& d : *test) {
        Dataset reduced = d;
        reduced.X = d.X(Eigen::all, keep);
        reduced.covariate_names = s.data.front().covariate_names;
        d = std::move(reduced);
      }
    }
    train = s.data;
    if (ranking) *ranking = std::move(s);
  }
}

int cmd_simulate(const RunConfig& rc, std::ostream& out) {
  if (rc.scenario == 0) throw Error("--scenario is required");
  const auto seed = rc.seed_or_default();
  const ScenarioSpec spec = rc.scenario_spec(seed);
  const SimulatedData sim = simulate(spec, rc.stream);
  Metadata meta;
  meta.method = "simulate";
  meta.seed = seed;
  const fs::path dir(rc.out);
  for (std::size_t m = 0; m < sim.datasets.size(); ++m) {
    const fs::path path = dir / (rc.prefix + "_" + std::to_string(m + 1) + ".csv");
    auto file = open_output(path);
    write_dataset_csv(file, sim.datasets[m], meta);
    out << path.string() << '\n';
  }
  const fs::path truth_path = dir / (rc.prefix + "_truth.csv");
  auto file = open_output(truth_path);
  write_truth(file, sim.truth, meta);
  out << truth_path.string() << '\n';
  if (spec.outcome == Outcome::survival)
    out << "censor_upper=" << format_double(sim.censor_upper) << '\n';
  return 0;
}

int cmd_fit(const RunConfig& rc, std::ostream& out) {
  LoadedData loaded = load_or_simulate(rc);
  ScreeningResult ranking;
  preprocess(rc, loaded.data, nullptr, &ranking);
  const Method method = rc.method_list().front();
  const auto seed = rc.seed_or_default();
  const double lambda = resolve_lambda(rc, method, loaded.data, seed);
  FitConfig config = rc.fit_config();
  config.lambda = lambda;
  const Model model = fit_method(method, loaded.data, config);
  const Metadata meta = Metadata::from(method_name(method), seed, model.config);

  const fs::path dir(rc.out);
  {
    auto file = open_output(dir / "coefficients.csv");
    write_coefficients(file, model, meta);
  }
  {
    auto file = open_output(dir / "trace.csv");
    write_trace(file, model, meta);
  }
  {
    auto file = open_output(dir / "grid.csv");
    write_function_grid(file, model, meta, rc.grid_points);
  }
  if (rc.screen > 0) {
    auto file = open_output(dir / "ranking.csv");
    write_ranking(file, ranking, meta);
  }
  out << "method=" << method_name(method) << " lambda=" << format_double(model.config.lambda);
  for (std::size_t f = 0; f < model.fits.size(); ++f) out << " t_star=" << model.fits[f].t_star;
  for (std::size_t m = 0; m < model.datasets(); ++m)
    out << " selected_" << (m + 1) << '=' << model.coefficients.active_count(m);
  out << '\n';
  return 0;
}

int cmd_tune(const RunConfig& rc, std::ostream& out) {
  LoadedData loaded = load_or_simulate(rc);
  preprocess(rc, loaded.data, nullptr);
  const Method method = rc.method_list().front();
  const auto seed = rc.seed_or_default();
  const TuneResult result = tune_lambda(loaded.data, method, rc.fit_config(), rc.tune_spec(seed));
  FitConfig config = rc.fit_config();
  config.lambda = result.best_lambda;
  const Metadata meta = Metadata::from(method_name(method), seed, configure(method, config));
  const std::string header =
      meta.line() + (loaded.data.front().is_survival() ? " cv_score=km_weighted_abs_error_events" : " cv_score=mae");
  const fs::path dir(rc.out);
  {
    auto file = open_output(dir / "cv_folds.csv");
    file << header << '\n';
    write_cv_folds(file, result);
  }
  {
    auto file = open_output(dir / "cv_curve.csv");
    file << header << '\n';
    write_cv_curve(file, result);
  }
  out << "best_lambda=" << format_double(result.best_lambda) << '\n';
  return 0;
}

std::vector<std::size_t> test_sizes(const RunConfig& rc) {
  return rc.test_sizes.empty() ? rc.sizes : rc.test_sizes;
}

struct Job {
  std::size_t replicate = 0;
  std::size_t method = 0;
};

struct JobResult {
  EvalReport report;
  double lambda = 0.0;
};

// Random split of every dataset with a `holdout` share of rows held out.
std::pair<std::vector<Dataset>, std::vector<Dataset>> holdout_split(const std::vector<Dataset>& data,
                                                                    double holdout, std::uint64_t seed) {
  auto rng = make_rng(seed, 2);
  std::vector<Dataset> train, test;
  for (const auto& d : data) {
    const auto n = d.rows();
    const auto n_test = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(n)));
    if (n_test == 0 || n_test >= n) throw Error("holdout leaves an empty training or test set in '" + d.id + "'");
    std::vector<Eigen::Index> order(n);
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    std::vector<Eigen::Index> te(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Eigen::Index> tr(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(te.begin(), te.end());
    std::sort(tr.begin(), tr.end());
    train.push_back(subset_rows(d, tr));
    test.push_back(subset_rows(d, te));
  }
  return {std::move(train), std::move(test)};
}

JobResult run_job(const RunConfig& rc, Method method, std::uint64_t seed,
                  const std::vector<Dataset>* input) {
  std::vector<Dataset> train, test;
  std::optional<TruthTable> truth;
  if (input) {
    std::tie(train, test) = holdout_split(*input, rc.holdout, seed);
  } else {
    const ScenarioSpec spec = rc.scenario_spec(seed);
    SimulatedData sim = simulate(spec, 0);
    ScenarioSpec test_spec = spec;
    test_spec.sizes = test_sizes(rc);
    train = std::move(sim.datasets);
    truth = std::move(sim.truth);
    test = simulate(test_spec, 1).datasets;
  }
  if (input) preprocess(rc, train, &test);
  JobResult result;
  result.lambda = resolve_lambda(rc, method, train, seed);
  FitConfig config = rc.fit_config();
  config.lambda = result.lambda;
  const Model model = fit_method(method, train, config);
  result.report = truth ? evaluate(model, *truth, train, test) : evaluate_predictions(model, test);
  return result;
}

std::vector<JobResult> run_jobs(const RunConfig& rc, const std::vector<Method>& methods,
                                const std::vector<Dataset>* input) {
  const auto base = rc.seed_or_default();
  std::vector<Job> jobs;
  for (int r = 0; r < rc.replicates; ++r)
    for (std::size_t k = 0; k < methods.size(); ++k) jobs.push_back({static_cast<std::size_t>(r), k});
  std::vector<JobResult> results(jobs.size());
  RunConfig inner = rc;
  inner.threads = 1;
  parallel_for(jobs.size(), worker_count(rc.threads), [&](std::size_t i) {
    results[i] = run_job(inner, methods[jobs[i].method], base + jobs[i].replicate, input);
  });
  return results;
}

std::string mean_sd(const std::vector<double>& values) {
  if (values.empty()) return "NA";
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f (%.2f)", mean, sd);
  return buf;
}

void write_summary(std::ostream& file, const std::vector<Method>& methods, const std::vector<JobResult>& results,
                   int replicates) {
  file << "method,replicates,TP-ind,FP-ind,TP-var,FP-var,RMISE,MAE,Cstat,logrank\n";
  for (std::size_t k = 0; k < methods.size(); ++k) {
    std::vector<double> cols[8];
    for (int r = 0; r < replicates; ++r) {
      const EvalReport& e = results[static_cast<std::size_t>(r) * methods.size() + k].report;
      if (e.has_truth) {
        cols[0].push_back(e.tp_ind);
        cols[1].push_back(e.fp_ind);
        cols[2].push_back(e.tp_var);
        cols[3].push_back(e.fp_var);
        cols[4].push_back(e.rmise);
      }
      if (e.mae) cols[5].push_back(*e.mae);
      if (e.cstat) cols[6].push_back(*e.cstat);
      if (e.logrank) cols[7].push_back(*e.logrank);
    }
    file << method_name(methods[k]) << ',' << replicates;
    for (const auto& c : cols) file << ',' << mean_sd(c);
    file << '\n';
  }
}

int cmd_evaluate(const RunConfig& rc, std::ostream& out) {
  if (rc.scenario == 0) throw Error("--scenario is required");
  RunConfig single = rc;
  single.replicates = 1;
  const auto methods = rc.method_list();
  const auto results = run_jobs(single, methods, nullptr);
  const fs::path path = fs::path(rc.out) / "eval.csv";
  auto file = open_output(path);
  FitConfig config = rc.fit_config();
  config.lambda = rc.lambda.value_or(default_lambda(rc.p));
  file << Metadata::from("evaluate", rc.seed_or_default(), config).line() << (rc.tune ? " lambda_source=cv" : "")
       << '\n';
  write_eval_header(file);
  for (std::size_t k = 0; k < methods.size(); ++k)
    write_eval_row(file, {method_name(methods[k]), std::to_string(rc.scenario), rc.error, 1}, results[k].report);
  out << path.string() << '\n';
  return 0;
}

int cmd_bench(const RunConfig& rc, std::ostream& out) {
  if (!rc.seed) throw Error("--seed is required for bench");
  const auto methods = rc.method_list();
  std::optional<std::vector<Dataset>> input;
  if (!rc.input.empty()) {
    if (rc.scenario != 0) throw Error("give either --input or --scenario, not both");
    if (rc.holdout <= 0.0) throw Error("bench on input files needs --holdout");
    input = prepare(load_csv(rc.input, rc.outcome_kind()));
  } else if (rc.scenario == 0) {
    throw Error("either --input or --scenario is required");
  }
  const auto results = run_jobs(rc, methods, input ? &*input : nullptr);

  std::string names;
  for (Method m : methods) names += (names.empty() ? "" : "+") + method_name(m);
  FitConfig config = rc.fit_config();
  std::size_t p = input ? input->front().covariates() : rc.p;
  if (rc.screen > 0) p = std::min(p, rc.screen);
  config.lambda = rc.lambda.value_or(default_lambda(p));
  const std::string header = Metadata::from(names, *rc.seed, config).line() + (rc.tune ? " lambda_source=cv" : "");
  const std::string scenario = input ? "data" : std::to_string(rc.scenario);
  const std::string error = input ? "NA" : rc.error;

  const fs::path dir(rc.out);
  {
    auto file = open_output(dir / "bench_replicates.csv");
    file << header << '\n';
    write_eval_header(file);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto r = static_cast<int>(i / methods.size());
      write_eval_row(file, {method_name(methods[i % methods.size()]), scenario, error, r + 1}, results[i].report);
    }
  }
  {
    auto file = open_output(dir / "bench_lambda.csv");
    file << header << "\nmethod,replicate,seed,lambda\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto r = i / methods.size();
      file << method_name(methods[i % methods.size()]) << ',' << (r + 1) << ',' << (*rc.seed + r) << ','
           << format_double(results[i].lambda) << '\n';
    }
  }
  const fs::path summary = dir / "bench_summary.csv";
  {
    auto file = open_output(summary);
    file << header << '\n';
    write_summary(file, methods, results, rc.replicates);
  }
  out << summary.string() << '\n';
  return 0;
}

template <typename T>
CLI::Option* add_list(CLI::App* app, const std::string& name, std::vector<T>& target, const std::string& help) {
  return app->add_option(name, target, help)->delimiter(',');
}

void add_common(CLI::App* app, RunConfig& rc) {
  app->add_option("--out", rc.out, "Output directory");
  app->add_option("--seed", rc.seed, "Random seed");
  app->add_option("--threads", rc.threads, "Worker threads (0 = all cores)");
}

void add_data(CLI::App* app, RunConfig& rc) {
  add_list(app, "--input", rc.input, "Comma-separated CSV files, one per dataset");
  app->add_option("--scenario", rc.scenario, "Simulation scenario (1-4)")->check(CLI::Range(1, 4));
  app->add_option("--error", rc.error, "Error regime: normal, mix7030 or cauchy");
  app->add_option("--outcome", rc.outcome, "continuous or survival");
  app->add_option("--p", rc.p, "Number of covariates (simulation)");
  add_list(app, "--sizes", rc.sizes, "Dataset sizes (simulation)");
  app->add_option("--rho", rc.rho, "AR(1) correlation (simulation)");
  app->add_option("--censoring", rc.censoring, "Target censoring rate (simulation)");
}

void add_fit(CLI::App* app, RunConfig& rc) {
  app->add_option("--lambda", rc.lambda, "Commonality penalty weight (default p/8)");
  app->add_flag("--tune", rc.tune, "Choose lambda by cross-validation");
  add_list(app, "--grid", rc.grid, "Lambda grid for cross-validation (default p * 2^-6..2^-1)");
  app->add_option("--folds", rc.folds, "Cross-validation folds");
  app->add_option("--c", rc.c, "Cauchy scale");
  app->add_option("--step", rc.step, "Shrinkage step v");
  app->add_option("--iterations", rc.iterations, "Boosting iterations T");
  app->add_option("--inner-knots", rc.inner_knots, "Interior knots per covariate");
  app->add_option("--standardize", rc.standardize, "zscore or unit_range, fitted on training data");
  app->add_option("--screen", rc.screen, "Keep the top k covariates by marginal screening");
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Robust nonparametric integrative boosting"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for all subcommands");

  auto* simulate_cmd = app.add_subcommand("simulate", "Write simulated datasets and a truth sidecar");
  add_common(simulate_cmd, rc);
  add_data(simulate_cmd, rc);
  simulate_cmd->add_option("--prefix", rc.prefix, "File name prefix");
  simulate_cmd->add_option("--stream", rc.stream, "Random stream (0 = training, 1 = test)");

  auto* fit_cmd = app.add_subcommand("fit", "Fit one method; write coefficients, trace and function grids");
  add_common(fit_cmd, rc);
  add_data(fit_cmd, rc);
  add_fit(fit_cmd, rc);
  fit_cmd->add_option("--method", rc.method, "Method, e.g. rnp_int or RNP-Int");
  fit_cmd->add_option("--grid-points", rc.grid_points, "Points per function grid");

  auto* tune_cmd = app.add_subcommand("tune", "Cross-validate lambda; write the CV curve");
  add_common(tune_cmd, rc);
  add_data(tune_cmd, rc);
  add_fit(tune_cmd, rc);
  tune_cmd->add_option("--method", rc.method, "Method");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "Fit and evaluate methods on one simulated replicate");
  add_common(evaluate_cmd, rc);
  add_data(evaluate_cmd, rc);
  add_fit(evaluate_cmd, rc);
  add_list(evaluate_cmd, "--methods", rc.methods, "Comma-separated methods");
  evaluate_cmd->add_option("--method", rc.method, "Method (when --methods is absent)");
  add_list(evaluate_cmd, "--test-sizes", rc.test_sizes, "Test dataset sizes (default: training sizes)");

  auto* bench_cmd = app.add_subcommand("bench", "Replicated method comparison with mean (sd) summaries");
  add_common(bench_cmd, rc);
  add_data(bench_cmd, rc);
  add_fit(bench_cmd, rc);
  add_list(bench_cmd, "--methods", rc.methods, "Comma-separated methods");
  bench_cmd->add_option("--method", rc.method, "Method (when --methods is absent)");
  bench_cmd->add_option("--replicates", rc.replicates, "Replicates; replicate r uses seed + r - 1");
  bench_cmd->add_option("--holdout", rc.holdout, "Held-out share per replicate for input files");
  add_list(bench_cmd, "--test-sizes", rc.test_sizes, "Test dataset sizes (default: training sizes)");

  try {
    std::vector<std::string> argv = expand_config(args);
    std::reverse(argv.begin(), argv.end());
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  try {
    rc.validate();
    if (simulate_cmd->parsed()) return cmd_simulate(rc, out);
    if (fit_cmd->parsed()) return cmd_fit(rc, out);
    if (tune_cmd->parsed()) return cmd_tune(rc, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(rc, out);
    return cmd_bench(rc, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace rnpint
