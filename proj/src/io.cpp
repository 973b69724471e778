#include "rnpint/io.hpp"

#include "rnpint/basis.hpp"
#include "rnpint/loss.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace rnpint {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_number(const std::string& token, double& value) {
  if (token.empty()) return false;
  const char* begin = token.data();
  const char* end = begin + token.size();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  return ec == std::errc() && ptr == end;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

}  // namespace

std::string format_double(double value) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw Error("cannot format number");
  return std::string(buf, ptr);
}

Metadata Metadata::from(const std::string& method, std::uint64_t seed, const FitConfig& config) {
  Metadata m;
  m.method = method;
  m.seed = seed;
  m.lambda = config.lambda;
  m.c = config.loss.c;
  m.step = config.step;
  m.iterations = config.iterations;
  m.dimension = config.basis.dimension();
  return m;
}

std::string Metadata::line() const {
  return "# method=" + method + " seed=" + std::to_string(seed) + " lambda=" + format_double(lambda) +
         " c=" + format_double(c) + " v=" + format_double(step) + " T=" + std::to_string(iterations) +
         " K=" + std::to_string(dimension) + " version=" + version;
}

Dataset parse_csv(std::istream& in, const std::string& source, Outcome outcome) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    header = split(t);
    break;
  }
  if (header.empty()) throw Error(source + ": empty file");

  int y_col = -1, delta_col = -1;
  bool log_time = false;
  std::vector<int> x_cols;
  Dataset out;
  out.id = source;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto& name = header[c];
    if (name.empty()) throw Error(where(source, line_no) + "empty column name");
    if (std::count(header.begin(), header.end(), name) > 1)
      throw Error(where(source, line_no) + "duplicate column '" + name + "'");
    if (name == "y" || name == "time") {
      if (y_col >= 0) throw Error(where(source, line_no) + "both 'y' and 'time' columns present");
      y_col = static_cast<int>(c);
      log_time = name == "time";
    } else if (name == "delta") {
      delta_col = static_cast<int>(c);
    } else {
      x_cols.push_back(static_cast<int>(c));
      out.covariate_names.push_back(name);
    }
  }
  if (y_col < 0) throw Error(where(source, line_no) + "missing response column 'y' or 'time'");
  if (outcome == Outcome::survival && delta_col < 0)
    throw Error(where(source, line_no) + "survival data needs a 'delta' column");
  if (outcome == Outcome::continuous && delta_col >= 0)
    throw Error(where(source, line_no) + "'delta' column in continuous data");
  if (outcome == Outcome::continuous && log_time)
    throw Error(where(source, line_no) + "'time' column in continuous data");
  if (x_cols.empty()) throw Error(where(source, line_no) + "no covariate columns");

  std::vector<double> y, x;
  std::vector<int> delta;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto fields = split(t);
    if (fields.size() != header.size())
      throw Error(where(source, line_no) + "expected " + std::to_string(header.size()) + " fields, found " +
                  std::to_string(fields.size()));
    std::vector<double> values(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      if (!parse_number(fields[c], values[c]))
        throw Error(where(source, line_no) + "cannot parse '" + fields[c] + "' in column '" + header[c] + "'");
      if (!std::isfinite(values[c]))
        throw Error(where(source, line_no) + "non-finite value in column '" + header[c] + "'");
    }
    double response = values[static_cast<std::size_t>(y_col)];
    if (log_time) {
      if (!(response > 0.0)) throw Error(where(source, line_no) + "time must be positive");
      response = std::log(response);
    }
    y.push_back(response);
    if (delta_col >= 0) {
      const double d = values[static_cast<std::size_t>(delta_col)];
      if (d != 0.0 && d != 1.0)
        throw Error(where(source, line_no) + "delta must be 0 or 1 (got " + fields[static_cast<std::size_t>(delta_col)] + ")");
      delta.push_back(static_cast<int>(d));
    }
    for (int c : x_cols) x.push_back(values[static_cast<std::size_t>(c)]);
  }
  if (y.empty()) throw Error(source + ": no data rows");

  const auto n = static_cast<Eigen::Index>(y.size());
  const auto p = static_cast<Eigen::Index>(x_cols.size());
  out.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
  out.X = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(x.data(), n, p);
  if (delta_col >= 0) out.delta = Eigen::Map<Eigen::VectorXi>(delta.data(), n);
  return out;
}

std::vector<Dataset> load_csv(const std::vector<std::string>& paths, Outcome outcome) {
  if (paths.empty()) throw Error("no input files");
  std::vector<Dataset> out;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open");
    out.push_back(parse_csv(in, path, outcome));
  }
  const auto& canonical = out.front().covariate_names;
  for (std::size_t m = 1; m < out.size(); ++m) {
    auto& d = out[m];
    if (d.covariate_names == canonical) continue;
    std::vector<std::string> a = canonical, b = d.covariate_names;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) throw Error(d.id + ": covariate names differ from " + out.front().id);
    Eigen::MatrixXd X(d.X.rows(), d.X.cols());
    for (std::size_t j = 0; j < canonical.size(); ++j) {
      const auto it = std::find(d.covariate_names.begin(), d.covariate_names.end(), canonical[j]);
      X.col(static_cast<Eigen::Index>(j)) = d.X.col(it - d.covariate_names.begin());
    }
    d.X = std::move(X);
    d.covariate_names = canonical;
  }
  validate_datasets(out);
  return out;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const Metadata& meta) {
  out << meta.line() << '\n' << 'y';
  if (data.delta) out << ",delta";
  for (Eigen::Index j = 0; j < data.X.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    out << ',' << (k < data.covariate_names.size() ? data.covariate_names[k] : "x" + std::to_string(k + 1));
  }
  out << '\n';
  for (Eigen::Index i = 0; i < data.y.size(); ++i) {
    out << format_double(data.y(i));
    if (data.delta) out << ',' << (*data.delta)(i);
    for (Eigen::Index j = 0; j < data.X.cols(); ++j) out << ',' << format_double(data.X(i, j));
    out << '\n';
  }
}

void write_coefficients(std::ostream& out, const Model& model, const Metadata& meta) {
  out << meta.line() << "\ncovariate,dataset,group_label,k,value\n";
  const auto& state = model.coefficients;
  for (std::size_t j = 0; j < state.covariates(); ++j)
    for (std::size_t m = 0; m < state.datasets(); ++m) {
      if (!state.is_active(m, j)) continue;
      const Eigen::VectorXd coef = state.coef(m, j);
      for (Eigen::Index k = 0; k < coef.size(); ++k)
        out << j << ',' << m << ',' << state.label(j, m) << ',' << k << ',' << format_double(coef(k)) << '\n';
    }
}

void write_trace(std::ostream& out, const Model& model, const Metadata& meta) {
  out << meta.line() << "\nfit,t,S,j_hat,subset_bitmask,objective_F\n";
  for (std::size_t f = 0; f < model.fits.size(); ++f)
    for (const auto& row : model.fits[f].trace)
      out << f << ',' << row.t << ',' << format_double(row.score) << ',' << row.j << ',' << row.subset << ','
          << format_double(row.objective) << '\n';
}

void write_function_grid(std::ostream& out, const Model& model, const Metadata& meta, int points) {
  if (points < 2) throw Error("function grid needs at least two points");
  out << meta.line() << "\ncovariate,dataset,x,fhat\n";
  for (std::size_t j = 0; j < model.covariates(); ++j) {
    const auto& kv = model.basis.knots[j];
    Eigen::VectorXd x(points);
    for (int i = 0; i < points; ++i) x(i) = kv.lower + (kv.upper - kv.lower) * i / (points - 1);
    for (std::size_t m = 0; m < model.datasets(); ++m) {
      if (!model.coefficients.is_active(m, j)) continue;
      const Eigen::VectorXd f = component(model, m, j, x);
      for (int i = 0; i < points; ++i)
        out << j << ',' << m << ',' << format_double(x(i)) << ',' << format_double(f(i)) << '\n';
    }
  }
}

void write_truth(std::ostream& out, const TruthTable& truth, const Metadata& meta) {
  out << meta.line() << "\nm,j,tag,scale\n";
  for (std::size_t m = 0; m < truth.datasets(); ++m)
    for (std::size_t j = 0; j < truth.signal_range(); ++j) {
      const Component f = truth.at(m, j);
      if (f.is_zero()) continue;
      out << m << ',' << j << ',' << f.tag() << ',' << format_double(f.scale) << '\n';
    }
}

void write_eval_header(std::ostream& out) {
  out << "method,scenario,error,replicate,TP-ind,FP-ind,TP-var,FP-var,RMISE,MAE,Cstat,logrank\n";
}

void write_eval_row(std::ostream& out, const EvalKey& key, const EvalReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  auto truth = [&](double v) { return r.has_truth ? format_double(v) : std::string("NA"); };
  out << key.method << ',' << key.scenario << ',' << key.error << ',' << key.replicate << ','
      << truth(r.tp_ind) << ',' << truth(r.fp_ind) << ',' << truth(r.tp_var) << ',' << truth(r.fp_var) << ','
      << truth(r.rmise) << ',' << opt(r.mae) << ',' << opt(r.cstat) << ',' << opt(r.logrank) << '\n';
}

ScaleMode parse_scale_mode(const std::string& text) {
  if (text == "zscore") return ScaleMode::zscore;
  if (text == "unit_range") return ScaleMode::unit_range;
  throw Error("unknown scaling mode '" + text + "' (expected zscore or unit_range)");
}

ScaleTransform fit_scaling(const std::vector<Dataset>& train, ScaleMode mode) {
  ScaleTransform t;
  t.mode = mode;
  for (const auto& d : train) {
    if (d.X.rows() < 2) throw Error("dataset '" + d.id + "' needs at least two rows to rescale");
    Eigen::RowVectorXd shift(d.X.cols()), scale(d.X.cols());
    for (Eigen::Index j = 0; j < d.X.cols(); ++j) {
      const auto col = d.X.col(j);
      if (mode == ScaleMode::zscore) {
        shift(j) = col.mean();
        scale(j) = std::sqrt((col.array() - shift(j)).square().sum() / static_cast<double>(col.size() - 1));
      } else {
        shift(j) = col.minCoeff();
        scale(j) = col.maxCoeff() - shift(j);
      }
      if (!(scale(j) > 0.0)) {
        const auto k = static_cast<std::size_t>(j);
        const std::string name = k < d.covariate_names.size() ? d.covariate_names[k] : std::to_string(k);
        throw Error("constant covariate '" + name + "' in dataset '" + d.id + "'");
      }
    }
    t.shift.push_back(std::move(shift));
    t.scale.push_back(std::move(scale));
  }
  return t;
}

std::vector<Dataset> ScaleTransform::apply(const std::vector<Dataset>& data) const {
  if (data.size() != shift.size()) throw Error("scaling was fitted on a different number of datasets");
  std::vector<Dataset> out = data;
  for (std::size_t m = 0; m < out.size(); ++m) {
    if (out[m].X.cols() != shift[m].size()) throw Error("scaling was fitted on a different number of covariates");
    out[m].X = ((out[m].X.rowwise() - shift[m]).array().rowwise() / scale[m].array()).matrix();
  }
  return out;
}

ScreeningResult screen_covariates(const std::vector<Dataset>& data, std::size_t top_k,
                                  const BasisConfig& basis) {
  validate_datasets(data);
  const auto p = data.front().covariates();
  if (top_k > p) throw Error("top_k exceeds the number of covariates");

  std::vector<Eigen::VectorXd> weights;
  for (const auto& d : data) {
    if (!d.is_survival()) {
      weights.push_back(Eigen::VectorXd::Constant(d.y.size(), 1.0 / static_cast<double>(d.y.size())));
      continue;
    }
    std::vector<Eigen::Index> order(d.rows());
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return d.y(a) < d.y(b); });
    Eigen::VectorXd ys(d.y.size());
    Eigen::VectorXi ds(d.y.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
      ys(static_cast<Eigen::Index>(pos)) = d.y(order[pos]);
      ds(static_cast<Eigen::Index>(pos)) = (*d.delta)(order[pos]);
    }
    const Eigen::VectorXd ws = km_weights(ys, ds);
    Eigen::VectorXd w(d.y.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) w(order[pos]) = ws(static_cast<Eigen::Index>(pos));
    weights.push_back(std::move(w));
  }

  std::vector<ScreeningEntry> ranking(p);
  for (std::size_t j = 0; j < p; ++j) {
    ranking[j].index = j;
    const auto& names = data.front().covariate_names;
    ranking[j].name = j < names.size() ? names[j] : "x" + std::to_string(j + 1);
    for (std::size_t m = 0; m < data.size(); ++m) {
      const auto& d = data[m];
      const Eigen::VectorXd& w = weights[m];
      const double wsum = w.sum();
      if (!(wsum > 0.0)) continue;
      const Eigen::VectorXd col = d.X.col(static_cast<Eigen::Index>(j));
      const std::span<const double> xs(col.data(), static_cast<std::size_t>(col.size()));
      const double lo = col.minCoeff(), hi = col.maxCoeff();
      if (!(hi > lo)) continue;
      const Eigen::MatrixXd raw = expand(xs, build_knots(xs, basis), basis);
      // Weighted centering removes the intercept from both sides.
      const Eigen::RowVectorXd xbar = (w.transpose() * raw) / wsum;
      const Eigen::MatrixXd B = raw.rowwise() - xbar;
      const Eigen::VectorXd yc = d.y.array() - w.dot(d.y) / wsum;
      const double null_loss = w.dot(yc.cwiseAbs2());
      Eigen::MatrixXd gram = B.transpose() * w.asDiagonal() * B;
      gram.diagonal().array() += 1e-10;
      const Eigen::VectorXd coef = gram.ldlt().solve(B.transpose() * w.asDiagonal() * yc);
      const Eigen::VectorXd resid = yc - B * coef;
      ranking[j].score += null_loss - w.dot(resid.cwiseAbs2());
    }
  }
  std::stable_sort(ranking.begin(), ranking.end(),
                   [](const ScreeningEntry& a, const ScreeningEntry& b) { return a.score > b.score; });
  std::vector<Eigen::Index> keep;
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    ranking[r].rank = static_cast<int>(r + 1);
    if (r < top_k) keep.push_back(static_cast<Eigen::Index>(ranking[r].index));
  }
  std::sort(keep.begin(), keep.end());

  ScreeningResult result;
  result.ranking = std::move(ranking);
  for (const auto& d : data) {
    Dataset reduced = d;
    reduced.X = d.X(Eigen::all, keep);
    reduced.covariate_names.clear();
    for (auto j : keep) {
      const auto k = static_cast<std::size_t>(j);
      reduced.covariate_names.push_back(k < d.covariate_names.size() ? d.covariate_names[k] : "x" + std::to_string(k + 1));
    }
    result.data.push_back(std::move(reduced));
  }
  return result;
}

void write_ranking(std::ostream& out, const ScreeningResult& result, const Metadata& meta) {
  out << meta.line() << "\nrank,index,name,marginal_spline_loss_reduction\n";
  for (const auto& e : result.ranking)
    out << e.rank << ',' << e.index << ',' << e.name << ',' << format_double(e.score) << '\n';
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    const std::string t = trim(line.substr(0, hash));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(where(path, line_no) + "expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (key.empty()) throw Error(where(path, line_no) + "empty key");
    out[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

}  // namespace rnpint
