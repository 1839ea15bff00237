#pragma once

// CLI dispatcher: fit (single estimation), grid (selection), gini (grouped
// concentration pipeline), synth (synthetic data generation + optional fit).

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "scsar/cluster.hpp"
#include "scsar/concentration.hpp"
#include "scsar/io.hpp"
#include "scsar/selection.hpp"
#include "scsar/synthesis.hpp"
#include "scsar/weights.hpp"

namespace scsar {
namespace cli {

struct DataFlags {
  std::string data_path;
  DatasetSchema schema;
  std::string covariates;  // comma list; empty = all remaining columns
  std::string adjacency_path;
  int knn = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data_path, "dataset CSV")->required();
    cmd->add_option("--id-col", schema.id_col, "unit id column (default id)");
    cmd->add_option("--x-col", schema.x_col, "x coordinate column (default xcoord)");
    cmd->add_option("--y-col", schema.y_col, "y coordinate column (default ycoord)");
    cmd->add_option("--response", schema.response_col, "response column (default response)");
    cmd->add_option("--covariates", covariates,
                    "comma-separated covariate columns (default: all remaining)");
    cmd->add_flag_function(
        "--no-intercept", [this](int64_t) { schema.add_intercept = false; },
        "do not prepend an intercept column");
    cmd->add_option("--adjacency", adjacency_path, "adjacency-list file (two ids per line)");
    cmd->add_option("--knn", knn, "derive W from k nearest neighbours instead");
  }

  Dataset load() {
    if (!covariates.empty()) {
      std::stringstream ss(covariates);
      std::string tok;
      while (std::getline(ss, tok, ',')) schema.covariate_cols.push_back(tok);
    }
    return load_dataset_file(data_path, schema);
  }

  SpatialWeights weights(const Dataset& d) {
    if (!adjacency_path.empty() && knn > 0)
      throw ConfigError("--adjacency and --knn are mutually exclusive");
    if (!adjacency_path.empty()) {
      std::ifstream in(adjacency_path);
      if (!in) throw IoFailure("cannot open " + adjacency_path);
      return SpatialWeights::from_adjacency_stream(in, d.index);
    }
    if (knn > 0) {
      bool dup = false;
      SpatialWeights w = SpatialWeights::from_knn(d.coords, knn, &dup);
      if (dup)
        std::cerr << "warning: duplicated coordinates; k-NN ties resolved by index order\n";
      return w;
    }
    throw ConfigError("one of --adjacency or --knn is required");
  }
};

struct EngineFlags {
  std::string family = "sar";
  double phi = 0.5;
  double eta = 1e-6;
  int max_itr = 100;
  int min_cluster_size = 0;
  bool prev_labels = false;
  bool retain_intercept_lag = false;
  std::vector<unsigned> seeds{1, 2, 3, 4, 5};

  void attach(CLI::App* cmd, bool with_family = true) {
    if (with_family)
      cmd->add_option("--family", family, "ols|sar|sem|slx (default sar)");
    cmd->add_option("--phi", phi, "spatial penalty weight (default 0.5)");
    cmd->add_option("--eta", eta, "relative log-likelihood tolerance (default 1e-6)");
    cmd->add_option("--max-itr", max_itr, "iteration cap (default 100)");
    cmd->add_option("--min-cluster-size", min_cluster_size,
                    "minimum cluster size (default P+3, SLX 2P+2)");
    cmd->add_flag("--prev-labels", prev_labels,
                  "step B penalty on pre-sweep labels (fidelity variant)");
    cmd->add_flag("--retain-intercept-lag", retain_intercept_lag,
                  "SLX: keep the lag of constant columns");
    cmd->add_option("--seeds", seeds, "initialization seeds (default 1 2 3 4 5)")
        ->delimiter(',');
  }

  EngineConfig config(int k) const {
    EngineConfig cfg;
    cfg.family = family_from_string(family);
    cfg.k = k;
    cfg.phi = phi;
    cfg.eta = eta;
    cfg.max_itr = max_itr;
    cfg.min_cluster_size = min_cluster_size;
    cfg.use_previous_labels = prev_labels;
    cfg.retain_intercept_lag = retain_intercept_lag;
    return cfg;
  }
};

// Best-of-seeds single estimation plus the pooled comparison fit.
struct BestRun {
  FitResult result;
  ClusterFit pooled;
  unsigned seed = 0;
};

inline BestRun best_of_seeds(const Dataset& d, const SpatialWeights& w, EngineConfig cfg,
                             const std::vector<unsigned>& seeds) {
  std::optional<BestRun> best;
  for (unsigned seed : seeds) {
    cfg.seed = seed;
    FitResult r = run(d, w, cfg);
    if (!best || r.penalized_objective > best->result.penalized_objective) {
      best = BestRun{std::move(r), {}, seed};
    }
  }
  FitOptions opts;
  opts.retain_intercept_lag = cfg.retain_intercept_lag;
  best->pooled = fit_family(cfg.family, d.y, d.X, w, opts);
  return std::move(*best);
}

inline int cmd_fit(DataFlags& data, EngineFlags& engine, int k, const std::string& out_dir) {
  const Dataset d = data.load();
  const SpatialWeights w = data.weights(d);
  EngineConfig cfg = engine.config(k);
  cfg.validate(d.n(), d.p());
  const BestRun best = best_of_seeds(d, w, cfg, engine.seeds);
  cfg.seed = best.seed;
  emit_report(out_dir, d, best.result, best.pooled, cfg);
  std::cout << "fit: seed " << best.seed << ", objective " << std::setprecision(10)
            << best.result.penalized_objective << ", sizes";
  for (int s : best.result.assignment.sizes()) std::cout << ' ' << s;
  std::cout << ", report in " << out_dir << '\n';
  return 0;
}

inline int cmd_grid(DataFlags& data, EngineFlags& engine, const std::vector<int>& ks,
                    const std::vector<double>& phis, const std::string& out_dir,
                    bool refit, int force_k, double force_phi) {
  const Dataset d = data.load();
  const SpatialWeights w = data.weights(d);
  const EngineConfig defaults = engine.config(1);
  const SelectionGrid grid =
      grid_search(d, w, defaults.family, ks, phis, engine.seeds, defaults);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "grid.csv", std::ios::binary);
    if (!os) throw IoFailure("cannot write grid.csv");
    write_grid_csv(os, grid);
  }
  {
    nlohmann::json j;
    j["chosen_k"] = grid.chosen.k;
    j["chosen_phi"] = grid.chosen.phi;
    j["fallback_used"] = grid.chosen.fallback_used;
    j["ambiguous"] = grid.chosen.ambiguous;
    std::ofstream os(fs::path(out_dir) / "selection.json", std::ios::binary);
    if (!os) throw IoFailure("cannot write selection.json");
    os << j.dump(2) << '\n';
  }
  std::cout << "grid: chosen k=" << grid.chosen.k << " phi=" << grid.chosen.phi
            << (grid.chosen.fallback_used ? " (fallback)" : "")
            << (grid.chosen.ambiguous ? " (ambiguous)" : "") << '\n';

  if (refit) {
    const int k = force_k > 0 ? force_k : grid.chosen.k;
    const double phi = force_phi >= 0.0 ? force_phi : grid.chosen.phi;
    EngineConfig cfg = engine.config(k);
    cfg.phi = phi;
    const BestRun best = best_of_seeds(d, w, cfg, engine.seeds);
    cfg.seed = best.seed;
    emit_report(out_dir, d, best.result, best.pooled, cfg);
    std::cout << "refit: k=" << k << " phi=" << phi << ", report in " << out_dir << '\n';
  }
  return 0;
}

inline int cmd_gini(const std::string& grouped_path, const std::string& out_dir) {
  std::ifstream in(grouped_path);
  if (!in) throw IoFailure("cannot open " + grouped_path);
  const std::vector<GroupedDistribution> regions = read_grouped_csv(in);

  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir);
  std::ofstream os(fs::path(out_dir) / "gini.csv", std::ios::binary);
  if (!os) throw IoFailure("cannot write gini.csv");
  os << std::setprecision(17);
  os << "region_id,gini\n";
  for (const GroupedDistribution& r : regions) os << r.region_id << ',' << gini_grouped(r) << '\n';
  std::cout << "gini: " << regions.size() << " regions, wrote " << out_dir << "/gini.csv\n";
  return 0;
}

// Plain key = value synthetic spec: rows, cols, family, k, seed, and per
// cluster `clusterJ.spatial`, `clusterJ.theta` (comma list), `clusterJ.sigma`.
inline SyntheticSpec parse_synth_spec(std::istream& in) {
  int rows = 0, cols = 0, k = 0;
  unsigned seed = 1;
  std::string family = "sar";
  std::map<int, ClusterGroundTruth> clusters;

  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IoFailure("spec line " + std::to_string(line_no) + ": expected key = value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto as_double = [&](const std::string& v) {
      try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
      } catch (const std::exception&) {
        throw IoFailure("spec line " + std::to_string(line_no) + ": bad number '" + v + "'");
      }
    };

    if (key == "rows") rows = static_cast<int>(as_double(value));
    else if (key == "cols") cols = static_cast<int>(as_double(value));
    else if (key == "k") k = static_cast<int>(as_double(value));
    else if (key == "seed") seed = static_cast<unsigned>(as_double(value));
    else if (key == "family") family = value;
    else if (key.rfind("cluster", 0) == 0) {
      const auto dot = key.find('.');
      if (dot == std::string::npos)
        throw IoFailure("spec line " + std::to_string(line_no) + ": bad key " + key);
      const int idx = std::stoi(key.substr(7, dot - 7));
      ClusterGroundTruth& c = clusters[idx];
      const std::string field = key.substr(dot + 1);
      if (field == "spatial") c.spatial_param = as_double(value);
      else if (field == "sigma") c.sigma = as_double(value);
      else if (field == "theta") {
        std::vector<double> vals;
        std::stringstream ss(value);
        std::string tok;
        while (std::getline(ss, tok, ',')) vals.push_back(as_double(trim(tok)));
        c.theta = Eigen::Map<Eigen::VectorXd>(vals.data(), vals.size());
      } else {
        throw IoFailure("spec line " + std::to_string(line_no) + ": unknown field " + field);
      }
    } else {
      throw IoFailure("spec line " + std::to_string(line_no) + ": unknown key " + key);
    }
  }
  if (rows < 1 || cols < 1) throw ConfigError("synth spec: rows and cols must be >= 1");
  if (k < 1) throw ConfigError("synth spec: k must be >= 1");

  std::vector<ClusterGroundTruth> per_cluster;
  const ModelFamily fam = family_from_string(family);
  for (int j = 1; j <= k; ++j) {
    auto it = clusters.find(j);
    if (it == clusters.end()) throw ConfigError("synth spec: missing cluster" + std::to_string(j));
    it->second.family = fam;
    per_cluster.push_back(it->second);
  }
  return banded_lattice_spec(rows, cols, std::move(per_cluster), seed);
}

inline void write_synth_outputs(const std::string& out_dir, const SyntheticData& data) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoFailure("cannot create " + out_dir);

  {
    std::ofstream os(fs::path(out_dir) / "data.csv", std::ios::binary);
    if (!os) throw IoFailure("cannot write data.csv");
    os << std::setprecision(17);
    os << "id,xcoord,ycoord,response";
    for (size_t c = 1; c < data.dataset.names.size(); ++c) os << ',' << data.dataset.names[c];
    os << '\n';
    for (int i = 0; i < data.dataset.n(); ++i) {
      os << data.dataset.index.id(i) << ',' << data.dataset.coords(i, 0) << ','
         << data.dataset.coords(i, 1) << ',' << data.dataset.y(i);
      for (int c = 1; c < data.dataset.p(); ++c) os << ',' << data.dataset.X(i, c);
      os << '\n';
    }
  }
  {
    std::ofstream os(fs::path(out_dir) / "adjacency.txt", std::ios::binary);
    if (!os) throw IoFailure("cannot write adjacency.txt");
    os << "# one edge per line\n";
    for (auto [i, j] : data.weights.edges())
      os << data.dataset.index.id(i) << ' ' << data.dataset.index.id(j) << '\n';
  }
  {
    std::ofstream os(fs::path(out_dir) / "truth.csv", std::ios::binary);
    if (!os) throw IoFailure("cannot write truth.csv");
    write_memberships_csv(os, data.dataset, data.truth);
  }
}

inline int cmd_synth(const std::string& spec_path, const std::string& out_dir, bool do_fit,
                     EngineFlags& engine) {
  std::ifstream in(spec_path);
  if (!in) throw IoFailure("cannot open " + spec_path);
  const SyntheticSpec spec = parse_synth_spec(in);
  const SyntheticData data = generate(spec);
  write_synth_outputs(out_dir, data);
  std::cout << "synth: n=" << data.dataset.n() << " p=" << data.dataset.p() << " k="
            << spec.partition.k << ", wrote " << out_dir << '\n';

  if (do_fit) {
    EngineConfig cfg = engine.config(spec.partition.k);
    cfg.family = spec.per_cluster.front().family;
    cfg.validate(data.dataset.n(), data.dataset.p());
    const BestRun best = best_of_seeds(data.dataset, data.weights, cfg, engine.seeds);
    cfg.seed = best.seed;
    emit_report(out_dir, data.dataset, best.result, best.pooled, cfg);
    const double ari = score_recovery(data.truth, best.result.assignment);
    std::cout << "synth fit: seed " << best.seed << ", ARI vs truth " << std::setprecision(4)
              << ari << ", report in " << out_dir << '\n';
  }
  return 0;
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Spatially-clustered spatial regression (SAR/SEM/SLX/OLS)"};
  app.require_subcommand(1);

  // fit
  auto* fit = app.add_subcommand("fit", "single estimation at fixed K and phi");
  cli::DataFlags fit_data;
  cli::EngineFlags fit_engine;
  int fit_k = 1;
  std::string fit_out = "out";
  fit_data.attach(fit);
  fit_engine.attach(fit);
  fit->add_option("--k", fit_k, "number of clusters")->required();
  fit->add_option("--out", fit_out, "output directory")->required();

  // grid
  auto* grid = app.add_subcommand("grid", "grid search over K and phi with the elbow rule");
  cli::DataFlags grid_data;
  cli::EngineFlags grid_engine;
  std::vector<int> grid_ks{2, 3, 4};
  std::vector<double> grid_phis{0.5, 0.75, 1.0};
  std::string grid_out = "out";
  bool grid_refit = false;
  int grid_force_k = 0;
  double grid_force_phi = -1.0;
  grid_data.attach(grid);
  grid_engine.attach(grid);
  grid->add_option("--ks", grid_ks, "candidate K values (default 2 3 4)")->delimiter(',');
  grid->add_option("--phis", grid_phis, "candidate phi values (default 0.5 0.75 1)")
      ->delimiter(',');
  grid->add_option("--out", grid_out, "output directory")->required();
  grid->add_flag("--refit", grid_refit, "fit and report at the chosen (K, phi)");
  grid->add_option("--force-k", grid_force_k, "override the chosen K for --refit");
  grid->add_option("--force-phi", grid_force_phi, "override the chosen phi for --refit");

  // gini
  auto* gini = app.add_subcommand("gini", "grouped-data Gini index per region");
  std::string gini_grouped_path, gini_out = "out";
  gini->add_option("--grouped", gini_grouped_path,
                   "CSV: region_id,class_rank,farm_count,total_output")
      ->required();
  gini->add_option("--out", gini_out, "output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic data (and optionally fit it)");
  std::string synth_spec_path, synth_out = "out";
  bool synth_fit = false;
  cli::EngineFlags synth_engine;
  synth->add_option("--spec", synth_spec_path, "key = value spec file")->required();
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_flag("--fit", synth_fit, "fit the generated data with the spec's family and K");
  synth_engine.attach(synth, /*with_family=*/false);

  try {
    app.parse(argc, argv);
    if (fit->parsed()) return cli::cmd_fit(fit_data, fit_engine, fit_k, fit_out);
    if (grid->parsed())
      return cli::cmd_grid(grid_data, grid_engine, grid_ks, grid_phis, grid_out, grid_refit,
                           grid_force_k, grid_force_phi);
    if (gini->parsed()) return cli::cmd_gini(gini_grouped_path, gini_out);
    if (synth->parsed()) return cli::cmd_synth(synth_spec_path, synth_out, synth_fit, synth_engine);
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace scsar
