#pragma once

// Grid search over (K, phi) with multi-seed restarts, and the elbow rule for
// picking the reported configuration: phi by minimal BIC, then K by maximal
// discrete second difference of BIC along the chosen phi.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "scsar/cluster.hpp"

namespace scsar {

struct GridEntry {
  int k = 0;
  double phi = 0.0;
  unsigned seed = 0;
  bool ok = false;
  std::string error;
  double bic = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  double total_loglik = std::numeric_limits<double>::quiet_NaN();
  double penalized_objective = -std::numeric_limits<double>::infinity();
  std::vector<int> cluster_sizes;
  StopRule converged_by = StopRule::max_itr;
};

struct ChosenCell {
  int k = 0;
  double phi = 0.0;
  bool fallback_used = false;  // elbow undefined, fell back to min BIC
  bool ambiguous = false;      // tie among second differences
};

struct SelectionGrid {
  std::vector<GridEntry> entries;  // one per (k, phi, seed)
  std::vector<GridEntry> best;     // per (k, phi), best seed by penalized objective
  ChosenCell chosen;
};

inline ChosenCell choose_elbow(const SelectionGrid& grid);

inline SelectionGrid grid_search(const Dataset& dataset, const SpatialWeights& w,
                                 ModelFamily family, const std::vector<int>& ks,
                                 const std::vector<double>& phis,
                                 const std::vector<unsigned>& seeds,
                                 const EngineConfig& defaults = {}) {
  if (ks.empty() || phis.empty() || seeds.empty())
    throw ConfigError("grid_search: empty K, phi, or seed grid");

  SelectionGrid grid;
  for (int k : ks)
    for (double phi : phis) {
      GridEntry cell_best;
      bool have_best = false;
      for (unsigned seed : seeds) {
        GridEntry e;
        e.k = k;
        e.phi = phi;
        e.seed = seed;
        EngineConfig cfg = defaults;
        cfg.family = family;
        cfg.k = k;
        cfg.phi = phi;
        cfg.seed = seed;
        try {
          const FitResult r = run(dataset, w, cfg);
          e.ok = true;
          e.bic = r.bic;
          e.aic = r.aic;
          e.total_loglik = r.total_loglik;
          e.penalized_objective = r.penalized_objective;
          e.cluster_sizes = r.assignment.sizes();
          e.converged_by = r.converged_by;
        } catch (const Error& err) {
          e.ok = false;
          e.error = err.what();
        }
        grid.entries.push_back(e);
        if (e.ok && (!have_best || e.penalized_objective > cell_best.penalized_objective)) {
          cell_best = e;
          have_best = true;
        }
      }
      if (!have_best) cell_best = grid.entries.back();  // all seeds failed
      grid.best.push_back(cell_best);
    }
  grid.chosen = choose_elbow(grid);
  return grid;
}

inline ChosenCell choose_elbow(const SelectionGrid& grid) {
  // BIC per (phi, k) from the per-cell best entries.
  std::map<double, std::map<int, double>> bic;
  for (const GridEntry& e : grid.best)
    if (e.ok) bic[e.phi][e.k] = e.bic;
  if (bic.empty()) throw ConfigError("choose_elbow: no successful grid cells");

  auto global_min = [&]() {
    ChosenCell c;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [phi, by_k] : bic)
      for (const auto& [k, b] : by_k)
        if (b < best) {
          best = b;
          c.k = k;
          c.phi = phi;
        }
    c.fallback_used = true;
    return c;
  };

  // phi* = argmin over phi of the min-over-K BIC (ties toward smaller phi).
  double phi_star = 0.0;
  double phi_best = std::numeric_limits<double>::infinity();
  for (const auto& [phi, by_k] : bic) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& [k, b] : by_k) m = std::min(m, b);
    if (m < phi_best) {
      phi_best = m;
      phi_star = phi;
    }
  }

  const auto& along = bic[phi_star];
  if (along.size() < 3) return global_min();

  std::vector<std::pair<int, double>> seq(along.begin(), along.end());  // sorted by K
  ChosenCell chosen;
  chosen.phi = phi_star;
  double best_dd = -std::numeric_limits<double>::infinity();
  int ties = 0;
  for (size_t i = 1; i + 1 < seq.size(); ++i) {
    const double dd = seq[i - 1].second - 2.0 * seq[i].second + seq[i + 1].second;
    if (dd > best_dd + 1e-9) {
      best_dd = dd;
      chosen.k = seq[i].first;
      ties = 1;
    } else if (dd > best_dd - 1e-9) {
      ++ties;  // tie: keep the smaller K already chosen
    }
  }
  chosen.ambiguous = ties > 1;
  return chosen;
}

inline void write_grid_csv(std::ostream& os, const SelectionGrid& grid) {
  os << "k,phi,seed,bic,aic,loglik,sizes,converged_by\n";
  for (const GridEntry& e : grid.entries) {
    os << e.k << ',' << e.phi << ',' << e.seed << ',';
    if (e.ok) {
      os << e.bic << ',' << e.aic << ',' << e.total_loglik << ',';
      for (size_t i = 0; i < e.cluster_sizes.size(); ++i)
        os << (i ? "|" : "") << e.cluster_sizes[i];
      os << ',' << to_string(e.converged_by);
    } else {
      os << ",,,," << "error: " << e.error;
    }
    os << '\n';
  }
}

}  // namespace scsar
