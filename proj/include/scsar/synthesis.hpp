#pragma once

// Synthetic data-generating processes with known ground truth: per cluster
// the structural equation is solved exactly on the restricted weight matrix,
// so cross-cluster edges carry no signal. Serves as the oracle layer for the
// recovery tests.

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "scsar/cluster.hpp"
#include "scsar/dataset.hpp"
#include "scsar/errors.hpp"
#include "scsar/weights.hpp"

namespace scsar {

struct ClusterGroundTruth {
  ModelFamily family = ModelFamily::sar;
  double spatial_param = 0.0;
  // OLS/SAR/SEM: length P (intercept first). SLX: [beta (P), theta_lag (P-1)],
  // lags applying to the non-intercept columns.
  Eigen::VectorXd theta;
  double sigma = 1.0;
};

struct SyntheticSpec {
  SpatialWeights weights;
  Eigen::MatrixX2d coords;
  ClusterAssignment partition;
  std::vector<ClusterGroundTruth> per_cluster;
  unsigned seed = 1;

  int p() const {
    if (per_cluster.empty()) throw ConfigError("synthetic spec: no clusters");
    const ClusterGroundTruth& c0 = per_cluster.front();
    if (c0.family == ModelFamily::slx) {
      const int len = static_cast<int>(c0.theta.size());
      if (len % 2 == 0) throw ConfigError("SLX truth needs length 2P-1");
      return (len + 1) / 2;
    }
    return static_cast<int>(c0.theta.size());
  }
};

struct SyntheticData {
  Dataset dataset;
  SpatialWeights weights;
  ClusterAssignment truth;
  Eigen::VectorXd noise;  // the drawn epsilon, in unit order
};

// Ground-truth partition as contiguous row bands of a rook lattice, the
// geometry where the spatial penalty aids recovery.
inline SyntheticSpec banded_lattice_spec(int rows, int cols,
                                         std::vector<ClusterGroundTruth> clusters,
                                         unsigned seed) {
  if (clusters.empty()) throw ConfigError("banded_lattice_spec: no clusters");
  const int k = static_cast<int>(clusters.size());
  if (k > rows) throw ConfigError("banded_lattice_spec: more bands than rows");
  SyntheticSpec spec;
  spec.weights = SpatialWeights::lattice(rows, cols);
  spec.coords = lattice_coords(rows, cols);
  spec.partition.k = k;
  spec.partition.labels.resize(rows * cols);
  for (int r = 0; r < rows; ++r) {
    const int band = std::min(k - 1, r * k / rows);
    for (int c = 0; c < cols; ++c) spec.partition.labels[r * cols + c] = band;
  }
  spec.per_cluster = std::move(clusters);
  spec.seed = seed;
  return spec;
}

inline SyntheticData generate(const SyntheticSpec& spec) {
  const int n = spec.weights.n();
  if (spec.partition.n() != n) throw LengthMismatch("generate: partition length vs n");
  spec.partition.validate();
  if (static_cast<int>(spec.per_cluster.size()) != spec.partition.k)
    throw LengthMismatch("generate: per-cluster params vs k");
  if (spec.coords.rows() != n) throw LengthMismatch("generate: coords vs n");
  const int p = spec.p();
  for (const ClusterGroundTruth& c : spec.per_cluster) {
    if (!(c.sigma > 0.0)) throw ConfigError("generate: sigma must be > 0");
    if (c.family != spec.per_cluster.front().family)
      throw ConfigError("generate: clusters must share a family");
  }

  std::mt19937 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Draw order is fixed (X column-wise, then epsilon cluster by cluster in
  // ascending member order) so the realization depends only on the seed, not
  // on the edge set.
  Eigen::MatrixXd X = Eigen::MatrixXd::Ones(n, p);
  for (int c = 1; c < p; ++c)
    for (int i = 0; i < n; ++i) X(i, c) = normal(rng);

  Eigen::VectorXd y(n), noise(n);
  const auto members = spec.partition.members();
  for (int j = 0; j < spec.partition.k; ++j) {
    const ClusterGroundTruth& truth = spec.per_cluster[j];
    const std::vector<int>& mem = members[j];
    if (mem.empty()) throw ConfigError("generate: empty ground-truth cluster");
    const int nk = static_cast<int>(mem.size());

    Eigen::VectorXd eps(nk);
    for (int r = 0; r < nk; ++r) eps(r) = truth.sigma * normal(rng);

    Eigen::MatrixXd Xk(nk, p);
    for (int r = 0; r < nk; ++r) Xk.row(r) = X.row(mem[r]);
    const SpatialWeights wk = spec.weights.restricted(mem);

    Eigen::VectorXd yk;
    switch (truth.family) {
      case ModelFamily::ols:
        yk = Xk * truth.theta + eps;
        break;
      case ModelFamily::sar: {
        if (!wk.admissible(truth.spatial_param))
          throw SpatialParamOutOfRange("cluster " + std::to_string(j + 1));
        if (truth.spatial_param == 0.0) {
          yk = Xk * truth.theta + eps;
        } else {
          const Eigen::MatrixXd s =
              Eigen::MatrixXd::Identity(nk, nk) - truth.spatial_param * wk.dense();
          yk = s.partialPivLu().solve(Xk * truth.theta + eps);
        }
        break;
      }
      case ModelFamily::sem: {
        if (!wk.admissible(truth.spatial_param))
          throw SpatialParamOutOfRange("cluster " + std::to_string(j + 1));
        if (truth.spatial_param == 0.0) {
          yk = Xk * truth.theta + eps;
        } else {
          const Eigen::MatrixXd s =
              Eigen::MatrixXd::Identity(nk, nk) - truth.spatial_param * wk.dense();
          yk = Xk * truth.theta + s.partialPivLu().solve(eps);
        }
        break;
      }
      case ModelFamily::slx: {
        const Eigen::VectorXd beta = truth.theta.head(p);
        const Eigen::VectorXd theta_lag = truth.theta.tail(p - 1);
        const Eigen::MatrixXd wx = wk.lag_matrix(Xk.rightCols(p - 1));
        yk = Xk * beta + wx * theta_lag + eps;
        break;
      }
    }
    for (int r = 0; r < nk; ++r) {
      y(mem[r]) = yk(r);
      noise(mem[r]) = eps(r);
    }
  }

  SyntheticData out;
  std::vector<std::string> ids(n);
  const int width = static_cast<int>(std::to_string(n).size());
  for (int i = 0; i < n; ++i) {
    std::string s = std::to_string(i);
    ids[i] = "u" + std::string(width - static_cast<int>(s.size()), '0') + s;
  }
  out.dataset.index = UnitIndexMap(std::move(ids));
  out.dataset.coords = spec.coords;
  out.dataset.y = std::move(y);
  out.dataset.X = std::move(X);
  out.dataset.names.push_back("intercept");
  for (int c = 1; c < p; ++c) out.dataset.names.push_back("x" + std::to_string(c));
  out.weights = spec.weights;
  out.truth = spec.partition;
  out.noise = std::move(noise);
  return out;
}

// Adjusted Rand index between two partitions (contingency-table form),
// label-permutation invariant, in [-1, 1].
inline double score_recovery(const ClusterAssignment& truth, const ClusterAssignment& estimate) {
  if (truth.n() != estimate.n()) throw LengthMismatch("score_recovery: partition lengths");
  const int n = truth.n();
  if (n == 0) throw LengthMismatch("score_recovery: empty partitions");

  Eigen::MatrixXd table = Eigen::MatrixXd::Zero(truth.k, estimate.k);
  for (int i = 0; i < n; ++i) table(truth.labels[i], estimate.labels[i]) += 1.0;

  auto choose2 = [](double m) { return m * (m - 1.0) / 2.0; };
  double index = 0.0;
  for (int a = 0; a < truth.k; ++a)
    for (int b = 0; b < estimate.k; ++b) index += choose2(table(a, b));
  double sum_rows = 0.0, sum_cols = 0.0;
  for (int a = 0; a < truth.k; ++a) sum_rows += choose2(table.row(a).sum());
  for (int b = 0; b < estimate.k; ++b) sum_cols += choose2(table.col(b).sum());
  const double total = choose2(static_cast<double>(n));
  const double expected = (total > 0.0) ? sum_rows * sum_cols / total : 0.0;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  if (std::abs(max_index - expected) < 1e-12) return 1.0;  // both partitions trivial
  return (index - expected) / (max_index - expected);
}

}  // namespace scsar
