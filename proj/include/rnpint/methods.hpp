#pragma once

#include "rnpint/basis.hpp"
#include "rnpint/boosting.hpp"
#include "rnpint/state.hpp"
#include "rnpint/types.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace rnpint {

enum class Method { rnp_int, nrnp_int, rp_int, nrp_int, rnp_meta, rnp_pool };

enum class Integration { joint, per_dataset, pooled };

struct MethodSpec {
  Method method = Method::rnp_int;
  LossKind loss = LossKind::cauchy;
  bool parametric = false;
  Integration integration = Integration::joint;
};

MethodSpec make_method(Method method);

/// Display name, e.g. "RNP-Int".
std::string method_name(Method method);
/// Accepts the display name or its snake_case form ("rnp_int"), case-insensitively.
Method parse_method(std::string_view text);
const std::vector<Method>& all_methods();

/// Copy of `base` with the loss kind and basis mode of `method`. Per-dataset
/// and pooled methods have no commonality penalty, so lambda is reset to 0.
FitConfig configure(Method method, FitConfig base);

/// A fitted model of any method, reported per dataset.
struct Model {
  Method method = Method::rnp_int;
  FitConfig config;
  BasisTransform basis;
  /// Per-dataset coefficients with group labels; pooled fits share one label,
  /// per-dataset fits give every nonzero vector its own label.
  CoefficientState coefficients;
  /// One result for joint and pooled fits, one per dataset for meta fits.
  std::vector<FitResult> fits;

  std::size_t datasets() const { return coefficients.datasets(); }
  std::size_t covariates() const { return coefficients.covariates(); }
};

/// Algorithm for RNP-Int and its nonrobust / parametric variants (joint integration).
Model fit_integrative(const std::vector<Dataset>& data, const FitConfig& config);
/// Separate sparse boosting per dataset on a shared basis.
Model fit_meta(const std::vector<Dataset>& data, const FitConfig& config);
/// Sparse boosting on the row-stacked data.
Model fit_pool(const std::vector<Dataset>& data, const FitConfig& config);

/// Dispatches on the method; `base` is adjusted with configure().
Model fit_method(Method method, const std::vector<Dataset>& data, const FitConfig& base);

/// sum_j f_j^m(x_ij) per dataset, using the training knots and centering.
std::vector<Eigen::VectorXd> predict(const Model& model, const std::vector<Dataset>& data);

/// Estimated component f_j^m at arbitrary points.
Eigen::VectorXd component(const Model& model, std::size_t m, std::size_t j,
                          const Eigen::VectorXd& x);

/// Datasets stacked row-wise into one, sorted by response when survival.
Dataset stack_datasets(const std::vector<Dataset>& data);

}  // namespace rnpint
