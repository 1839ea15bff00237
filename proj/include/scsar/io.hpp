#pragma once

// Data ingestion and report emission: CSV dataset loading with strict
// missing-value rejection, the Table-style text report, the full-precision
// JSON report, and the memberships / trace CSV artifacts.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "scsar/cluster.hpp"
#include "scsar/concentration.hpp"
#include "scsar/csv.hpp"
#include "scsar/dataset.hpp"
#include "scsar/likelihood.hpp"
#include "scsar/stats.hpp"

namespace scsar {

struct DatasetSchema {
  std::string id_col = "id";
  std::string x_col = "xcoord";
  std::string y_col = "ycoord";
  std::string response_col = "response";
  // Empty: every remaining column, in file order.
  std::vector<std::string> covariate_cols;
  bool add_intercept = true;
};

inline Dataset load_dataset(std::istream& in, const DatasetSchema& schema = {}) {
  const CsvTable table = read_csv(in);
  const int id_c = table.require(schema.id_col);
  const int x_c = table.require(schema.x_col);
  const int y_c = table.require(schema.y_col);
  const int resp_c = table.require(schema.response_col);

  std::vector<int> cov_cols;
  std::vector<std::string> cov_names;
  if (schema.covariate_cols.empty()) {
    for (int c = 0; c < table.n_cols(); ++c) {
      if (c == id_c || c == x_c || c == y_c || c == resp_c) continue;
      cov_cols.push_back(c);
      cov_names.push_back(table.header[c]);
    }
  } else {
    for (const std::string& name : schema.covariate_cols) {
      cov_cols.push_back(table.require(name));
      cov_names.push_back(name);
    }
  }

  const int n = table.n_rows();
  if (n < 1) throw IoFailure("dataset: no data rows");
  const int extra = static_cast<int>(cov_cols.size());
  const int p = (schema.add_intercept ? 1 : 0) + extra;
  if (p < 1) throw IoFailure("dataset: no covariate columns and intercept suppressed");

  Dataset d;
  d.coords.resize(n, 2);
  d.y.resize(n);
  d.X.resize(n, p);
  std::vector<std::string> ids(n);
  for (int r = 0; r < n; ++r) {
    ids[r] = table.rows[r][id_c];
    d.coords(r, 0) = parse_numeric_cell(table, r, x_c);
    d.coords(r, 1) = parse_numeric_cell(table, r, y_c);
    d.y(r) = parse_numeric_cell(table, r, resp_c);
    int col = 0;
    if (schema.add_intercept) d.X(r, col++) = 1.0;
    for (int c : cov_cols) d.X(r, col++) = parse_numeric_cell(table, r, c);
  }
  d.index = UnitIndexMap(std::move(ids));  // throws DuplicateUnitId
  if (schema.add_intercept) d.names.push_back("intercept");
  d.names.insert(d.names.end(), cov_names.begin(), cov_names.end());
  d.validate();
  return d;
}

inline Dataset load_dataset_file(const std::string& path, const DatasetSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoFailure("cannot open " + path);
  return load_dataset(in, schema);
}

// Grouped size-class CSV: region_id,class_rank,farm_count,total_output.
// class_rank orders classes within a region; regions keep file order.
inline std::vector<GroupedDistribution> read_grouped_csv(std::istream& in) {
  const CsvTable table = read_csv(in);
  const int region_c = table.require("region_id");
  const int rank_c = table.require("class_rank");
  const int count_c = table.require("farm_count");
  const int output_c = table.require("total_output");

  std::vector<GroupedDistribution> out;
  std::vector<std::vector<std::pair<double, GroupedClass>>> ranked;
  std::unordered_map<std::string, size_t> where;
  for (int r = 0; r < table.n_rows(); ++r) {
    const std::string& region = table.rows[r][region_c];
    auto [it, inserted] = where.emplace(region, out.size());
    if (inserted) {
      out.push_back({region, {}});
      ranked.emplace_back();
    }
    GroupedClass cls{parse_numeric_cell(table, r, count_c),
                     parse_numeric_cell(table, r, output_c)};
    ranked[it->second].emplace_back(parse_numeric_cell(table, r, rank_c), cls);
  }
  for (size_t g = 0; g < out.size(); ++g) {
    std::stable_sort(ranked[g].begin(), ranked[g].end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (auto& [rank, cls] : ranked[g]) out[g].classes.push_back(cls);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string starred(double est, const std::optional<double>& se) {
  std::string s = fixed2(est);
  if (se && *se > 0.0) s += significance_stars(normal_two_sided_p(est / *se));
  return s;
}

inline std::string se_cell(const std::optional<double>& se) {
  if (!se) return "(n/a)";
  return "(" + fixed2(*se) + ")";
}

// Coefficient labels of a fit, aligned with fit.theta.
inline std::vector<std::string> coef_names(const ClusterFit& fit,
                                           const std::vector<std::string>& x_names) {
  std::vector<std::string> names = x_names;
  for (int c : fit.slx_lag_cols) names.push_back("W." + x_names[c]);
  return names;
}

inline int linear_parameter_count(const ClusterFit& fit) {
  // Nested non-spatial model: the X coefficients plus sigma2.
  return static_cast<int>(fit.theta.size() - fit.slx_lag_cols.size()) + 1;
}

}  // namespace detail

// Human-readable journal-style regression table: one column for the
// pooled fit and one per cluster, coefficient rows with standard errors in
// parentheses underneath, then the summary block.
inline void write_report_text(std::ostream& os, const Dataset& dataset,
                              const FitResult& result, const ClusterFit& pooled,
                              const EngineConfig& config) {
  const int k = result.assignment.k;
  std::vector<const ClusterFit*> fits;
  fits.push_back(&pooled);
  for (const ClusterFit& f : result.fits) fits.push_back(&f);

  std::vector<std::string> headers{"Pooled"};
  for (int j = 1; j <= k; ++j) headers.push_back("Cluster " + std::to_string(j));

  // Row label order: the X columns, then any SLX lag rows, then the spatial
  // parameter.
  std::vector<std::string> labels = dataset.names;
  if (config.family == ModelFamily::slx) {
    for (int c = 0; c < dataset.p(); ++c) {
      for (const ClusterFit* f : fits) {
        if (std::find(f->slx_lag_cols.begin(), f->slx_lag_cols.end(), c) !=
            f->slx_lag_cols.end()) {
          labels.push_back("W." + dataset.names[c]);
          break;
        }
      }
    }
  }
  const bool spatial = is_spatial_family(config.family);
  const std::string spatial_label = config.family == ModelFamily::sem ? "lambda" : "rho";
  if (spatial) labels.push_back(spatial_label);

  struct Line {
    std::string label;
    std::vector<std::string> cells;
  };
  std::vector<Line> lines;

  for (const std::string& label : labels) {
    Line est{label, {}};
    Line se{"", {}};
    for (const ClusterFit* f : fits) {
      if (spatial && label == spatial_label) {
        est.cells.push_back(detail::starred(f->spatial_param, f->spatial_se));
        se.cells.push_back(f->degraded_to_nonspatial ? "" : detail::se_cell(f->spatial_se));
        continue;
      }
      const std::vector<std::string> names = detail::coef_names(*f, dataset.names);
      const auto it = std::find(names.begin(), names.end(), label);
      if (it == names.end()) {
        est.cells.push_back("");
        se.cells.push_back("");
        continue;
      }
      const int idx = static_cast<int>(it - names.begin());
      std::optional<double> se_v;
      if (f->theta_se && idx < f->theta_se->size()) se_v = (*f->theta_se)(idx);
      est.cells.push_back(detail::starred(f->theta(idx), se_v));
      se.cells.push_back(detail::se_cell(se_v));
    }
    lines.push_back(est);
    lines.push_back(se);
  }

  std::vector<Line> summary;
  auto add_summary = [&](const std::string& label, auto value_of) {
    Line l{label, {}};
    for (const ClusterFit* f : fits) l.cells.push_back(value_of(*f));
    summary.push_back(l);
  };
  add_summary("Num. obs.", [](const ClusterFit& f) { return std::to_string(f.n_units); });
  add_summary("Parameters", [](const ClusterFit& f) {
    return std::to_string(scsar::detail::free_parameter_count(f));
  });
  add_summary("Log Likelihood", [](const ClusterFit& f) { return detail::fixed2(f.loglik); });
  add_summary("AIC (Linear model)", [](const ClusterFit& f) {
    return detail::fixed2(2.0 * detail::linear_parameter_count(f) - 2.0 * f.loglik_linear);
  });
  add_summary("AIC (Spatial model)", [&](const ClusterFit& f) {
    if (config.family == ModelFamily::ols) return std::string();
    return detail::fixed2(2.0 * scsar::detail::free_parameter_count(f) - 2.0 * f.loglik);
  });
  add_summary("LR test: statistic", [&](const ClusterFit& f) {
    if (!is_spatial_family(f.family)) return std::string();
    return detail::fixed2(lr_test(f).statistic);
  });
  add_summary("LR test: p-value", [&](const ClusterFit& f) {
    if (!is_spatial_family(f.family)) return std::string();
    return detail::fixed2(lr_test(f).p_value);
  });

  size_t label_w = 0;
  for (const Line& l : lines) label_w = std::max(label_w, l.label.size());
  for (const Line& l : summary) label_w = std::max(label_w, l.label.size());
  std::vector<size_t> col_w(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) {
    col_w[c] = headers[c].size();
    for (const Line& l : lines) col_w[c] = std::max(col_w[c], l.cells[c].size());
    for (const Line& l : summary) col_w[c] = std::max(col_w[c], l.cells[c].size());
  }

  auto print_line = [&](const Line& l) {
    os << std::left << std::setw(static_cast<int>(label_w)) << l.label;
    for (size_t c = 0; c < l.cells.size(); ++c)
      os << "  " << std::right << std::setw(static_cast<int>(col_w[c])) << l.cells[c];
    os << '\n';
  };

  size_t total_w = label_w;
  for (size_t w : col_w) total_w += w + 2;
  const std::string rule(total_w, '-');

  os << "Family " << to_string(config.family) << ", K = " << k << ", phi = " << config.phi
     << '\n';
  os << rule << '\n';
  print_line({std::string(), headers});
  os << rule << '\n';
  for (const Line& l : lines) print_line(l);
  os << rule << '\n';
  for (const Line& l : summary) print_line(l);
  os << rule << '\n';
  os << "Statistical significance: ***pv<0.001; **pv<0.01; *pv<0.05\n";
  os << "Converged by " << to_string(result.converged_by) << " after " << result.iterations
     << " iteration(s); AIC " << detail::fixed2(result.aic) << ", BIC "
     << detail::fixed2(result.bic) << '\n';
  for (const std::string& wmsg : result.warnings) os << "note: " << wmsg << '\n';
}

inline nlohmann::json fit_json(const ClusterFit& f, const std::vector<std::string>& x_names) {
  nlohmann::json j;
  j["family"] = to_string(f.family);
  j["spatial_param"] = f.spatial_param;
  j["theta"] = std::vector<double>(f.theta.data(), f.theta.data() + f.theta.size());
  j["coef_names"] = detail::coef_names(f, x_names);
  if (f.theta_se)
    j["theta_se"] = std::vector<double>(f.theta_se->data(), f.theta_se->data() + f.theta_se->size());
  else
    j["theta_se"] = nullptr;
  if (f.spatial_se)
    j["spatial_se"] = *f.spatial_se;
  else
    j["spatial_se"] = nullptr;
  j["sigma2"] = f.sigma2;
  j["loglik"] = f.loglik;
  j["loglik_linear"] = f.loglik_linear;
  j["log_det"] = f.log_det;
  j["n_units"] = f.n_units;
  j["degraded_to_nonspatial"] = f.degraded_to_nonspatial;
  j["slx_lag_cols"] = f.slx_lag_cols;
  j["aic_linear"] = 2.0 * detail::linear_parameter_count(f) - 2.0 * f.loglik_linear;
  j["aic_model"] = 2.0 * scsar::detail::free_parameter_count(f) - 2.0 * f.loglik;
  if (is_spatial_family(f.family)) {
    const LrTest t = lr_test(f);
    j["lr_statistic"] = t.statistic;
    j["lr_p_value"] = t.p_value;
  } else {
    j["lr_statistic"] = nullptr;
    j["lr_p_value"] = nullptr;
  }
  return j;
}

inline nlohmann::json report_json(const Dataset& dataset, const FitResult& result,
                                  const ClusterFit& pooled, const EngineConfig& config) {
  nlohmann::json j;
  j["family"] = to_string(config.family);
  j["k"] = config.k;
  j["phi"] = config.phi;
  j["eta"] = config.eta;
  j["max_itr"] = config.max_itr;
  j["seed"] = config.seed;
  j["n"] = dataset.n();
  j["p"] = dataset.p();
  j["pooled"] = fit_json(pooled, dataset.names);
  nlohmann::json clusters = nlohmann::json::array();
  for (const ClusterFit& f : result.fits) clusters.push_back(fit_json(f, dataset.names));
  j["clusters"] = clusters;
  std::vector<int> labels1(result.assignment.labels);
  for (int& l : labels1) ++l;
  j["assignment"] = labels1;
  j["cluster_sizes"] = result.assignment.sizes();
  j["objective_trace"] = result.objective_trace;
  j["penalized_objective"] = result.penalized_objective;
  j["total_loglik"] = result.total_loglik;
  j["iterations"] = result.iterations;
  j["converged_by"] = to_string(result.converged_by);
  j["n_parameters"] = result.n_parameters;
  j["aic"] = result.aic;
  j["bic"] = result.bic;
  j["warnings"] = result.warnings;
  return j;
}

inline void write_memberships_csv(std::ostream& os, const Dataset& dataset,
                                  const ClusterAssignment& assignment) {
  os << "unit_id,cluster\n";
  for (int i = 0; i < dataset.n(); ++i)
    os << dataset.index.id(i) << ',' << assignment.labels[i] + 1 << '\n';
}

inline void write_trace_csv(std::ostream& os, const FitResult& result) {
  os << "iteration,penalized_objective\n";
  os << std::setprecision(17);
  for (size_t r = 0; r < result.objective_trace.size(); ++r)
    os << r + 1 << ',' << result.objective_trace[r] << '\n';
}

// Writes report.txt, report.json, memberships.csv, trace.csv under out_dir.
inline void emit_report(const std::string& out_dir, const Dataset& dataset,
                        const FitResult& result, const ClusterFit& pooled,
                        const EngineConfig& config) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir + ": " + ec.message());

  auto open = [&](const std::string& name) {
    std::ofstream os(fs::path(out_dir) / name, std::ios::binary);
    if (!os) throw IoFailure("cannot write " + name + " under " + out_dir);
    return os;
  };
  {
    std::ofstream os = open("report.txt");
    write_report_text(os, dataset, result, pooled, config);
  }
  {
    std::ofstream os = open("report.json");
    os << report_json(dataset, result, pooled, config).dump(2) << '\n';
  }
  {
    std::ofstream os = open("memberships.csv");
    write_memberships_csv(os, dataset, result.assignment);
  }
  {
    std::ofstream os = open("trace.csv");
    write_trace_csv(os, result);
  }
}

}  // namespace scsar
