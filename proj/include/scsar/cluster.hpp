#pragma once

// Alternating estimation: group-wise maximum likelihood (step A) and
// Potts-penalized membership reassignment (step B), iterated to convergence.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "scsar/dataset.hpp"
#include "scsar/errors.hpp"
#include "scsar/likelihood.hpp"
#include "scsar/weights.hpp"

namespace scsar {

// Hard partition of the N units into clusters 0..k-1. External surfaces
// (reports, CSV) print 1-based cluster ids.
struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;

  int n() const { return static_cast<int>(labels.size()); }

  std::vector<int> sizes() const {
    std::vector<int> s(k, 0);
    for (int l : labels) s.at(l)++;
    return s;
  }

  std::vector<std::vector<int>> members() const {
    std::vector<std::vector<int>> m(k);
    for (int i = 0; i < n(); ++i) m.at(labels[i]).push_back(i);
    return m;
  }

  void validate() const {
    if (k < 1) throw ConfigError("assignment: k must be >= 1");
    for (int l : labels)
      if (l < 0 || l >= k) throw IndexOutOfRange("label " + std::to_string(l));
  }

  bool operator==(const ClusterAssignment& o) const {
    return k == o.k && labels == o.labels;
  }
};

enum class StopRule { membership_fixed, loglik_tol, max_itr };

inline std::string to_string(StopRule s) {
  switch (s) {
    case StopRule::membership_fixed: return "membership_fixed";
    case StopRule::loglik_tol: return "loglik_tol";
    case StopRule::max_itr: return "max_itr";
  }
  return "?";
}

struct EngineConfig {
  ModelFamily family = ModelFamily::sar;
  int k = 1;
  double phi = 0.5;
  int max_itr = 100;
  double eta = 1e-6;
  unsigned seed = 1;
  // 0 resolves to the family default: P+3, or 2P+2 for SLX.
  int min_cluster_size = 0;
  // Step B evaluates the penalty on pre-sweep labels instead of in-place
  // updated ones (fidelity variant; forfeits per-move monotonicity).
  bool use_previous_labels = false;
  bool retain_intercept_lag = false;
  int kmeans_restarts = 10;
  int kmeans_max_iter = 100;

  int resolved_min_size(int p) const {
    if (min_cluster_size > 0) return min_cluster_size;
    return family == ModelFamily::slx ? 2 * p + 2 : p + 3;
  }

  void validate(int n, int p) const {
    if (k < 1) throw ConfigError("k must be >= 1");
    if (k > n) throw KExceedsN("k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
    if (phi < 0.0) throw ConfigError("phi must be >= 0");
    if (max_itr < 1) throw ConfigError("max_itr must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    const long need = static_cast<long>(k) * resolved_min_size(p);
    if (need > n)
      throw ConfigError("K * min_cluster_size = " + std::to_string(need) +
                        " exceeds N = " + std::to_string(n));
  }
};

struct MoveRecord {
  int unit = 0;
  int from = 0;
  int to = 0;
  double delta = 0.0;  // objective change of the accepted move at fixed fits
};

struct FitResult {
  ClusterAssignment assignment;
  std::vector<ClusterFit> fits;
  std::vector<double> objective_trace;  // Q after each iteration's step B
  double penalized_objective = 0.0;
  double total_loglik = 0.0;
  int iterations = 0;
  StopRule converged_by = StopRule::max_itr;
  double aic = 0.0;
  double bic = 0.0;
  int n_parameters = 0;
  std::vector<std::string> warnings;
};

namespace detail {

// Portable bounded draw from the standard-specified mt19937 stream (library
// distributions are not bit-stable across standard libraries).
inline int draw_below(std::mt19937& rng, int bound) {
  return static_cast<int>(rng() % static_cast<unsigned>(bound));
}

inline std::vector<int> sample_distinct(std::mt19937& rng, int n, int k) {
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) std::swap(pool[i], pool[i + draw_below(rng, n - i)]);
  pool.resize(k);
  return pool;
}

}  // namespace detail

// Lloyd's k-means on the planar coordinates; seeded centers at random
// distinct units, best of `restarts` restarts by within-cluster sum of
// squares. Deterministic given the seed.
inline ClusterAssignment initialize(const Dataset& dataset, int k, unsigned seed,
                                    int restarts = 10, int max_iter = 100) {
  const int n = dataset.n();
  if (k < 1) throw ConfigError("initialize: k must be >= 1");
  if (k > n) throw KExceedsN("k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));

  const Eigen::MatrixX2d& c = dataset.coords;
  std::mt19937 rng(seed);
  std::vector<int> best_labels;
  double best_wcss = std::numeric_limits<double>::infinity();

  std::vector<int> labels(n), prev(n);
  Eigen::MatrixX2d centers(k, 2);
  for (int rs = 0; rs < restarts; ++rs) {
    const std::vector<int> picks = detail::sample_distinct(rng, n, k);
    for (int j = 0; j < k; ++j) centers.row(j) = c.row(picks[j]);

    auto assign = [&]() {
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        double best = (c.row(i) - centers.row(0)).squaredNorm();
        for (int j = 1; j < k; ++j) {
          const double d = (c.row(i) - centers.row(j)).squaredNorm();
          if (d < best) {
            best = d;
            arg = j;
          }
        }
        labels[i] = arg;
      }
    };

    assign();
    for (int it = 0; it < max_iter; ++it) {
      prev = labels;
      // Recompute centers; an emptied cluster is reseated at the unit
      // farthest from its current center (ties toward the smallest index).
      std::vector<int> count(k, 0);
      Eigen::MatrixX2d sum = Eigen::MatrixX2d::Zero(k, 2);
      for (int i = 0; i < n; ++i) {
        sum.row(labels[i]) += c.row(i);
        count[labels[i]]++;
      }
      for (int j = 0; j < k; ++j) {
        if (count[j] > 0) {
          centers.row(j) = sum.row(j) / count[j];
        } else {
          int arg = 0;
          double worst = -1.0;
          for (int i = 0; i < n; ++i) {
            const double d = (c.row(i) - centers.row(labels[i])).squaredNorm();
            if (d > worst) {
              worst = d;
              arg = i;
            }
          }
          centers.row(j) = c.row(arg);
          labels[arg] = j;
        }
      }
      assign();
      if (labels == prev) break;
    }

    double wcss = 0.0;
    for (int i = 0; i < n; ++i) wcss += (c.row(i) - centers.row(labels[i])).squaredNorm();
    if (wcss < best_wcss) {
      best_wcss = wcss;
      best_labels = labels;
    }
  }

  ClusterAssignment out;
  out.labels = std::move(best_labels);
  out.k = k;
  return out;
}

// Count of i's neighbours currently carrying the candidate label (the caller
// multiplies by phi).
inline int penalty_gain(const SpatialWeights& w, const std::vector<int>& labels,
                        int i, int candidate) {
  int g = 0;
  for (int j : w.neighbors(i))
    if (labels[j] == candidate) ++g;
  return g;
}

// Number of edges whose endpoints share a label: the sum over i<j of
// w_ij * I(k_i = k_j).
inline int same_label_edge_count(const SpatialWeights& w, const std::vector<int>& labels) {
  int s = 0;
  for (auto [i, j] : w.edges())
    if (labels[i] == labels[j]) ++s;
  return s;
}

// Penalized objective Q at fixed fits and labels: per-unit likelihood shares
// against the full W plus phi times the same-label edge count.
inline double penalized_objective_value(const Dataset& dataset, const SpatialWeights& w,
                                        const std::vector<ClusterFit>& fits,
                                        const std::vector<int>& labels, double phi) {
  double q = 0.0;
  for (int i = 0; i < dataset.n(); ++i)
    q += unit_loglik(fits[labels[i]], dataset.y, dataset.X, w, i);
  return q + phi * same_label_edge_count(w, labels);
}

// Step A: fit the configured family on every cluster's subsample with the
// restricted weight matrix. Pure; throws ClusterTooSmall when the assignment
// violates the minimum size (the engine repairs before calling).
inline std::vector<ClusterFit> step_a(const Dataset& dataset, const SpatialWeights& w,
                                      const ClusterAssignment& assignment,
                                      const EngineConfig& config, bool with_se = false) {
  const int min_size = config.resolved_min_size(dataset.p());
  const auto members = assignment.members();
  for (int j = 0; j < assignment.k; ++j)
    if (static_cast<int>(members[j].size()) < min_size)
      throw ClusterTooSmall("cluster " + std::to_string(j + 1) + " has " +
                            std::to_string(members[j].size()) + " units, needs " +
                            std::to_string(min_size));
  FitOptions opts;
  opts.compute_se = with_se;
  opts.retain_intercept_lag = config.retain_intercept_lag;
  std::vector<ClusterFit> fits;
  fits.reserve(assignment.k);
  for (int j = 0; j < assignment.k; ++j) {
    const Dataset sub = dataset.subset(members[j]);
    const SpatialWeights wj = w.restricted(members[j]);
    fits.push_back(fit_family(config.family, sub.y, sub.X, wj, opts));
  }
  return fits;
}

// Step B: sequential ascending-index sweep, labels updated in place so later
// units see earlier moves. Ties break toward the incumbent, then the smallest
// cluster id.
inline ClusterAssignment step_b(const Dataset& dataset, const SpatialWeights& w,
                                const std::vector<ClusterFit>& fits,
                                const ClusterAssignment& assignment,
                                const EngineConfig& config,
                                std::vector<MoveRecord>* moves = nullptr) {
  ClusterAssignment out = assignment;
  const std::vector<int> frozen = assignment.labels;
  const int n = dataset.n();
  for (int i = 0; i < n; ++i) {
    const std::vector<int>& pen_labels = config.use_previous_labels ? frozen : out.labels;
    const int incumbent = out.labels[i];
    double best_score = -std::numeric_limits<double>::infinity();
    double incumbent_score = 0.0;
    int best_k = incumbent;
    for (int j = 0; j < assignment.k; ++j) {
      const double score = unit_loglik(fits[j], dataset.y, dataset.X, w, i) +
                           config.phi * penalty_gain(w, pen_labels, i, j);
      if (j == incumbent) incumbent_score = score;
      if (j == incumbent ? score >= best_score : score > best_score) {
        // >= lets the incumbent claim ties against earlier candidates.
        best_score = score;
        best_k = j;
      }
    }
    if (best_k != incumbent) {
      out.labels[i] = best_k;
      if (moves) moves->push_back({i, incumbent, best_k, best_score - incumbent_score});
    }
  }
  return out;
}

namespace detail {

// Donation repair: grow the deficient cluster by units taken from the largest
// cluster — the worst-likelihood units when fits exist, else the units
// nearest the deficient cluster's coordinate centroid.
inline void repair_sizes(ClusterAssignment& assignment, const std::vector<ClusterFit>* fits,
                         const Dataset& dataset, const SpatialWeights& w,
                         int min_size, std::vector<std::string>* warnings) {
  for (;;) {
    const std::vector<int> sizes = assignment.sizes();
    int deficient = -1;
    for (int j = 0; j < assignment.k; ++j)
      if (sizes[j] < min_size && (deficient < 0 || sizes[j] < sizes[deficient]))
        deficient = j;
    if (deficient < 0) return;

    int donor = -1;
    for (int j = 0; j < assignment.k; ++j)
      if (j != deficient && (donor < 0 || sizes[j] > sizes[donor])) donor = j;
    if (donor < 0 || sizes[donor] <= min_size)
      throw ConfigError("cannot repair cluster sizes (K * min_cluster_size > N?)");

    int pick = -1;
    if (fits) {
      double worst = std::numeric_limits<double>::infinity();
      for (int i = 0; i < assignment.n(); ++i) {
        if (assignment.labels[i] != donor) continue;
        const double ll = unit_loglik((*fits)[donor], dataset.y, dataset.X, w, i);
        if (ll < worst) {
          worst = ll;
          pick = i;
        }
      }
    } else {
      Eigen::RowVector2d target;
      if (sizes[deficient] > 0) {
        target.setZero();
        for (int i = 0; i < assignment.n(); ++i)
          if (assignment.labels[i] == deficient) target += dataset.coords.row(i);
        target /= sizes[deficient];
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < assignment.n(); ++i) {
          if (assignment.labels[i] != donor) continue;
          const double d = (dataset.coords.row(i) - target).squaredNorm();
          if (d < best) {
            best = d;
            pick = i;
          }
        }
      } else {
        // Empty recipient with no fits: take the donor unit farthest from the
        // donor centroid.
        target.setZero();
        for (int i = 0; i < assignment.n(); ++i)
          if (assignment.labels[i] == donor) target += dataset.coords.row(i);
        target /= sizes[donor];
        double best = -1.0;
        for (int i = 0; i < assignment.n(); ++i) {
          if (assignment.labels[i] != donor) continue;
          const double d = (dataset.coords.row(i) - target).squaredNorm();
          if (d > best) {
            best = d;
            pick = i;
          }
        }
      }
    }
    if (pick < 0) throw ConfigError("cannot repair cluster sizes");
    assignment.labels[pick] = deficient;
    if (warnings)
      warnings->push_back("repair: moved unit " + std::to_string(pick) + " to cluster " +
                          std::to_string(deficient + 1) + " (size below " +
                          std::to_string(min_size) + ")");
  }
}

// Step A with the degeneracy-absorbing wrapper: besides the size bound, rank
// deficiency and zero residual variance on a subsample are repaired by
// donating one more unit to the failing cluster and refitting.
inline std::vector<ClusterFit> step_a_repaired(const Dataset& dataset, const SpatialWeights& w,
                                               ClusterAssignment& assignment,
                                               const EngineConfig& config, bool with_se,
                                               const std::vector<ClusterFit>* prev_fits,
                                               std::vector<std::string>& warnings) {
  const int min_size = config.resolved_min_size(dataset.p());
  repair_sizes(assignment, prev_fits, dataset, w, min_size, &warnings);

  const FitOptions opts{with_se, config.retain_intercept_lag};
  int attempts = 0;
  for (;;) {
    const auto members = assignment.members();
    std::vector<ClusterFit> fits;
    fits.reserve(assignment.k);
    bool retry = false;
    for (int j = 0; j < assignment.k && !retry; ++j) {
      const Dataset sub = dataset.subset(members[j]);
      const SpatialWeights wj = w.restricted(members[j]);
      try {
        fits.push_back(fit_family(config.family, sub.y, sub.X, wj, opts));
      } catch (const Error& e) {
        if (++attempts > 2 * assignment.n())
          throw Error(std::string("step A could not be repaired: ") + e.what());
        warnings.push_back("step A: cluster " + std::to_string(j + 1) + " degenerate (" +
                           e.what() + "), growing it by one unit");
        // Grow cluster j with the donor unit whose response is farthest from
        // j's mean response; this adds variance and breaks exact collinearity
        // ties, which worst-likelihood donation cannot do for a degenerate
        // recipient.
        std::vector<int> sizes = assignment.sizes();
        int donor = -1;
        for (int d = 0; d < assignment.k; ++d)
          if (d != j && (donor < 0 || sizes[d] > sizes[donor])) donor = d;
        if (donor < 0 || sizes[donor] <= min_size)
          throw Error(std::string("step A could not be repaired: ") + e.what());
        double target = 0.0;
        if (!members[j].empty()) {
          for (int u : members[j]) target += dataset.y(u);
          target /= static_cast<double>(members[j].size());
        }
        int pick = -1;
        double best = -1.0;
        for (int i = 0; i < assignment.n(); ++i) {
          if (assignment.labels[i] != donor) continue;
          const double gap = std::abs(dataset.y(i) - target);
          if (gap > best) {
            best = gap;
            pick = i;
          }
        }
        assignment.labels[pick] = j;
        retry = true;
      }
    }
    if (!retry) return fits;
  }
}

inline int free_parameter_count(const ClusterFit& fit) {
  int p = static_cast<int>(fit.theta.size()) + 1;  // theta + sigma2
  if (is_spatial_family(fit.family) && !fit.degraded_to_nonspatial) ++p;
  return p;
}

}  // namespace detail

// Full alternating run: k-means initialization, then step A / step B until
// the membership is fixed, the relative log-likelihood change falls below
// eta, or max_itr is reached.
inline FitResult run(const Dataset& dataset, const SpatialWeights& w,
                     const EngineConfig& config) {
  dataset.validate();
  if (w.n() != dataset.n()) throw LengthMismatch("run: weights order vs dataset size");
  config.validate(dataset.n(), dataset.p());

  FitResult res;
  ClusterAssignment assignment =
      initialize(dataset, config.k, config.seed, config.kmeans_restarts, config.kmeans_max_iter);

  std::vector<ClusterFit> fits;
  double prev_ll = 0.0;
  StopRule stop = StopRule::max_itr;
  int r = 0;
  while (r < config.max_itr) {
    ++r;
    fits = detail::step_a_repaired(dataset, w, assignment, config, false,
                                   fits.empty() ? nullptr : &fits, res.warnings);
    double total_ll = 0.0;
    for (const ClusterFit& f : fits) total_ll += f.loglik;

    ClusterAssignment next = step_b(dataset, w, fits, assignment, config);
    detail::repair_sizes(next, &fits, dataset, w, config.resolved_min_size(dataset.p()),
                         &res.warnings);

    const double q = penalized_objective_value(dataset, w, fits, next.labels, config.phi);
    if (!res.objective_trace.empty() &&
        q < res.objective_trace.back() - 1e-9 * std::max(1.0, std::abs(q)))
      res.warnings.push_back("objective decreased at iteration " + std::to_string(r));
    res.objective_trace.push_back(q);

    const bool changed = !(next.labels == assignment.labels);
    assignment = next;
    if (!changed) {
      stop = StopRule::membership_fixed;
      break;
    }
    if (r >= 2 && std::abs((total_ll - prev_ll) / prev_ll) <= config.eta) {
      stop = StopRule::loglik_tol;
      break;
    }
    prev_ll = total_ll;
  }

  // Final fits on the final assignment, now with standard errors.
  res.fits = detail::step_a_repaired(dataset, w, assignment, config, true,
                                     fits.empty() ? nullptr : &fits, res.warnings);
  res.assignment = assignment;
  res.iterations = r;
  res.converged_by = stop;
  res.total_loglik = 0.0;
  res.n_parameters = 0;
  for (const ClusterFit& f : res.fits) {
    res.total_loglik += f.loglik;
    res.n_parameters += detail::free_parameter_count(f);
  }
  res.penalized_objective =
      penalized_objective_value(dataset, w, res.fits, assignment.labels, config.phi);
  res.aic = 2.0 * res.n_parameters - 2.0 * res.total_loglik;
  res.bic = res.n_parameters * std::log(static_cast<double>(dataset.n())) -
            2.0 * res.total_loglik;
  return res;
}

}  // namespace scsar
