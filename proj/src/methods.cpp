#include "rnpint/methods.hpp"

#include <algorithm>
#include <cctype>

namespace rnpint {

namespace {

std::vector<Eigen::MatrixXd> covariate_matrices(const std::vector<Dataset>& data) {
  std::vector<Eigen::MatrixXd> X;
  X.reserve(data.size());
  for (const auto& d : data) X.push_back(d.X);
  return X;
}

void require_sorted_survival(const std::vector<Dataset>& data) {
  for (const auto& d : data)
    if (d.is_survival() && !is_sorted_by_response(d))
      throw Error("survival dataset '" + d.id + "' must be sorted by response");
}

void fill_fitted(Model& model, const std::vector<Dataset>& data) {
  auto fitted = predict(model, data);
  if (model.fits.size() == fitted.size()) {
    for (std::size_t m = 0; m < fitted.size(); ++m) model.fits[m].fitted_values = {fitted[m]};
  } else {
    model.fits.front().fitted_values = std::move(fitted);
  }
}

}  // namespace

MethodSpec make_method(Method method) {
  switch (method) {
    case Method::rnp_int: return {method, LossKind::cauchy, false, Integration::joint};
    case Method::nrnp_int: return {method, LossKind::least_squares, false, Integration::joint};
    case Method::rp_int: return {method, LossKind::cauchy, true, Integration::joint};
    case Method::nrp_int: return {method, LossKind::least_squares, true, Integration::joint};
    case Method::rnp_meta: return {method, LossKind::cauchy, false, Integration::per_dataset};
    case Method::rnp_pool: return {method, LossKind::cauchy, false, Integration::pooled};
  }
  throw Error("unknown method");
}

std::string method_name(Method method) {
  switch (method) {
    case Method::rnp_int: return "RNP-Int";
    case Method::nrnp_int: return "NRNP-Int";
    case Method::rp_int: return "RP-Int";
    case Method::nrp_int: return "NRP-Int";
    case Method::rnp_meta: return "RNP-Meta";
    case Method::rnp_pool: return "RNP-Pool";
  }
  throw Error("unknown method");
}

const std::vector<Method>& all_methods() {
  static const std::vector<Method> methods{Method::rnp_int, Method::nrnp_int, Method::rp_int,
                                           Method::nrp_int, Method::rnp_meta, Method::rnp_pool};
  return methods;
}

Method parse_method(std::string_view text) {
  auto normalize = [](std::string_view s) {
    std::string out;
    for (char ch : s)
      out += ch == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return out;
  };
  const std::string key = normalize(text);
  for (Method m : all_methods())
    if (normalize(method_name(m)) == key) return m;
  throw Error("unknown method '" + std::string(text) + "'");
}

FitConfig configure(Method method, FitConfig base) {
  const MethodSpec spec = make_method(method);
  base.loss.kind = spec.loss;
  base.basis.parametric = spec.parametric;
  if (spec.integration != Integration::joint) base.lambda = 0.0;
  return base;
}

Model fit_integrative(const std::vector<Dataset>& data, const FitConfig& config) {
  config.validate();
  validate_datasets(data);
  require_sorted_survival(data);
  const BasisExpansion expansion = build_expansion(covariate_matrices(data), config.basis);
  const BoostingProblem problem = make_problem(expansion, data);

  Model model;
  model.config = config;
  model.method = config.loss.kind == LossKind::cauchy
                     ? (config.basis.parametric ? Method::rp_int : Method::rnp_int)
                     : (config.basis.parametric ? Method::nrp_int : Method::nrnp_int);
  model.basis = expansion.transform;
  model.fits.push_back(fit(problem, config));
  model.coefficients = model.fits.front().final_state;
  fill_fitted(model, data);
  return model;
}

Model fit_meta(const std::vector<Dataset>& data, const FitConfig& config) {
  config.validate();
  validate_datasets(data);
  require_sorted_survival(data);
  const BasisExpansion expansion = build_expansion(covariate_matrices(data), config.basis);

  FitConfig single = config;
  single.lambda = 0.0;
  Model model;
  model.method = Method::rnp_meta;
  model.config = single;
  model.basis = expansion.transform;
  std::vector<std::vector<Eigen::VectorXd>> coef;
  for (std::size_t m = 0; m < data.size(); ++m) {
    BasisExpansion one;
    one.transform = expansion.transform;
    one.transform.means = {expansion.transform.means[m]};
    one.blocks = {expansion.blocks[m]};
    const BoostingProblem problem = make_problem(one, {data[m]});
    model.fits.push_back(fit(problem, single));
    const auto& state = model.fits.back().final_state;
    std::vector<Eigen::VectorXd> row;
    for (std::size_t j = 0; j < state.covariates(); ++j) row.push_back(state.coef(0, j));
    coef.push_back(std::move(row));
  }
  model.coefficients = CoefficientState::from_independent(coef);
  fill_fitted(model, data);
  return model;
}

Dataset stack_datasets(const std::vector<Dataset>& data) {
  validate_datasets(data);
  Dataset out;
  out.id = "pooled";
  out.covariate_names = data.front().covariate_names;
  Eigen::Index total = 0;
  for (const auto& d : data) total += static_cast<Eigen::Index>(d.rows());
  out.y.resize(total);
  out.X.resize(total, static_cast<Eigen::Index>(data.front().covariates()));
  if (data.front().is_survival()) out.delta = Eigen::VectorXi(total);
  Eigen::Index pos = 0;
  for (const auto& d : data) {
    const auto n = static_cast<Eigen::Index>(d.rows());
    out.y.segment(pos, n) = d.y;
    out.X.middleRows(pos, n) = d.X;
    if (d.delta) out.delta->segment(pos, n) = *d.delta;
    pos += n;
  }
  return out.is_survival() ? sort_by_response(out) : out;
}

Model fit_pool(const std::vector<Dataset>& data, const FitConfig& config) {
  config.validate();
  validate_datasets(data);
  const Dataset pooled = stack_datasets(data);
  const BasisExpansion expansion = build_expansion({pooled.X}, config.basis);
  const BoostingProblem problem = make_problem(expansion, {pooled});

  FitConfig single = config;
  single.lambda = 0.0;
  Model model;
  model.method = Method::rnp_pool;
  model.config = single;
  model.basis = expansion.transform;
  model.basis.means.assign(data.size(), expansion.transform.means.front());
  model.fits.push_back(fit(problem, single));
  const auto& state = model.fits.back().final_state;
  std::vector<Eigen::VectorXd> shared;
  for (std::size_t j = 0; j < state.covariates(); ++j) shared.push_back(state.coef(0, j));
  model.coefficients = CoefficientState::from_shared(data.size(), shared);
  model.fits.front().fitted_values = predict(model, data);
  return model;
}

Model fit_method(Method method, const std::vector<Dataset>& data, const FitConfig& base) {
  const FitConfig config = configure(method, base);
  Model model;
  switch (make_method(method).integration) {
    case Integration::joint: model = fit_integrative(data, config); break;
    case Integration::per_dataset: model = fit_meta(data, config); break;
    case Integration::pooled: model = fit_pool(data, config); break;
  }
  model.method = method;
  return model;
}

Eigen::VectorXd component(const Model& model, std::size_t m, std::size_t j,
                          const Eigen::VectorXd& x) {
  if (!model.coefficients.is_active(m, j)) return Eigen::VectorXd::Zero(x.size());
  return model.basis.apply(m, j, x) * model.coefficients.coef(m, j);
}

std::vector<Eigen::VectorXd> predict(const Model& model, const std::vector<Dataset>& data) {
  if (data.size() != model.datasets()) throw Error("prediction data has the wrong number of datasets");
  std::vector<Eigen::VectorXd> out;
  out.reserve(data.size());
  for (std::size_t m = 0; m < data.size(); ++m) {
    if (data[m].covariates() != model.covariates())
      throw Error("dataset '" + data[m].id + "' has the wrong number of covariates");
    Eigen::VectorXd yhat = Eigen::VectorXd::Zero(data[m].X.rows());
    for (std::size_t j = 0; j < model.covariates(); ++j)
      if (model.coefficients.is_active(m, j))
        yhat += component(model, m, j, data[m].X.col(static_cast<Eigen::Index>(j)));
    out.push_back(std::move(yhat));
  }
  return out;
}

}  // namespace rnpint
