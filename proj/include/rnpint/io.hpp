#pragma once

#include "rnpint/metrics.hpp"
#include "rnpint/methods.hpp"
#include "rnpint/simgen.hpp"
#include "rnpint/types.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace rnpint {

inline constexpr const char* kVersion = "0.1.0";

/// Job parameters written as the first line of every output file:
/// "# method=... seed=... lambda=... c=... v=... T=... K=... version=..."
struct Metadata {
  std::string method = "none";
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double c = 1.0;
  double step = 0.1;
  int iterations = 300;
  int dimension = 6;
  std::string version = kVersion;

  static Metadata from(const std::string& method, std::uint64_t seed, const FitConfig& config);
  std::string line() const;
};

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

/// Reads one dataset per path. Columns: `y` (or `time`, stored as log time),
/// `delta` for survival outcomes, then covariates. Lines starting with '#'
/// are skipped. Covariates are reordered to the name order of the first file.
std::vector<Dataset> load_csv(const std::vector<std::string>& paths, Outcome outcome);
/// Parses CSV text; `source` names the input in diagnostics.
Dataset parse_csv(std::istream& in, const std::string& source, Outcome outcome);

void write_dataset_csv(std::ostream& out, const Dataset& data, const Metadata& meta);

/// covariate,dataset,group_label,k,value for every nonzero coefficient vector.
void write_coefficients(std::ostream& out, const Model& model, const Metadata& meta);
/// fit,t,S,j_hat,subset_bitmask,objective_F; meta fits number their datasets in `fit`.
void write_trace(std::ostream& out, const Model& model, const Metadata& meta);
/// covariate,dataset,x,fhat on `points` equispaced points over the knot range
/// of every selected (dataset, covariate).
void write_function_grid(std::ostream& out, const Model& model, const Metadata& meta,
                         int points = 100);
/// m,j,tag,scale for every nonzero true component.
void write_truth(std::ostream& out, const TruthTable& truth, const Metadata& meta);
/// Identifies one evaluated fit in report rows.
struct EvalKey {
  std::string method;
  std::string scenario;  // scenario number, or "data" for input files
  std::string error;     // error regime, or "NA"
  int replicate = 0;
};

/// Header of write_eval_row.
void write_eval_header(std::ostream& out);
void write_eval_row(std::ostream& out, const EvalKey& key, const EvalReport& report);

enum class ScaleMode { zscore, unit_range };

ScaleMode parse_scale_mode(const std::string& text);

/// Per-dataset, per-covariate affine map x -> (x - shift) / scale.
struct ScaleTransform {
  ScaleMode mode = ScaleMode::zscore;
  std::vector<Eigen::RowVectorXd> shift;  // [m]
  std::vector<Eigen::RowVectorXd> scale;  // [m]

  std::vector<Dataset> apply(const std::vector<Dataset>& data) const;
};

/// Fits the transform on `train`; zscore uses the sample standard deviation.
ScaleTransform fit_scaling(const std::vector<Dataset>& train, ScaleMode mode);

struct ScreeningEntry {
  std::size_t index = 0;
  std::string name;
  double score = 0.0;  // marginal spline loss reduction summed over datasets
  int rank = 0;        // 1-based
};

struct ScreeningResult {
  std::vector<Dataset> data;           // selected covariates, original order
  std::vector<ScreeningEntry> ranking;  // all covariates, best first
};

/// Marginal screening: each covariate alone is fitted by (weighted) least
/// squares on its cubic spline basis, per dataset. Ties keep the smaller index.
ScreeningResult screen_covariates(const std::vector<Dataset>& data, std::size_t top_k,
                                  const BasisConfig& basis = {});

void write_ranking(std::ostream& out, const ScreeningResult& result, const Metadata& meta);

/// Flat "key = value" file; '#' starts a comment. Later keys override earlier ones.
std::map<std::string, std::string> read_config_file(const std::string& path);

}  // namespace rnpint
