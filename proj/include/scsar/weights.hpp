#pragma once

// Symmetric binary contiguity structure with zero diagonal, plus the cached
// spectrum that backs log|det(I - rho*W)| in the spatial likelihoods.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scsar/errors.hpp"

namespace scsar {

// Bijection between external unit identifiers and 0-based row indices.
class UnitIndexMap {
 public:
  UnitIndexMap() = default;

  explicit UnitIndexMap(std::vector<std::string> ids) : ids_(std::move(ids)) {
    position_.reserve(ids_.size());
    for (int i = 0; i < static_cast<int>(ids_.size()); ++i) {
      auto [it, inserted] = position_.emplace(ids_[i], i);
      if (!inserted) throw DuplicateUnitId(ids_[i]);
    }
  }

  int size() const { return static_cast<int>(ids_.size()); }
  const std::vector<std::string>& ids() const { return ids_; }

  const std::string& id(int i) const {
    if (i < 0 || i >= size()) throw IndexOutOfRange("unit index " + std::to_string(i));
    return ids_[i];
  }

  bool contains(const std::string& id) const { return position_.count(id) > 0; }

  int index_of(const std::string& id) const {
    auto it = position_.find(id);
    if (it == position_.end()) throw UnknownUnitId(id);
    return it->second;
  }

 private:
  std::vector<std::string> ids_;
  std::unordered_map<std::string, int> position_;
};

class SpatialWeights {
 public:
  SpatialWeights() = default;

  explicit SpatialWeights(int n) : n_(n), adj_(static_cast<size_t>(std::max(n, 0))) {
    if (n < 1) throw Error("SpatialWeights: n must be >= 1");
  }

  // Edges are unordered unit pairs; duplicates collapse, self-loops reject.
  SpatialWeights(int n, const std::vector<std::pair<int, int>>& edges)
      : SpatialWeights(n) {
    std::vector<std::pair<int, int>> es;
    es.reserve(edges.size());
    for (auto [i, j] : edges) {
      if (i < 0 || i >= n || j < 0 || j >= n)
        throw IndexOutOfRange("edge (" + std::to_string(i) + ", " + std::to_string(j) + ")");
      if (i == j) throw SelfLoop(std::to_string(i));
      es.emplace_back(std::min(i, j), std::max(i, j));
    }
    std::sort(es.begin(), es.end());
    es.erase(std::unique(es.begin(), es.end()), es.end());
    edges_ = std::move(es);
    for (auto [i, j] : edges_) {
      adj_[i].push_back(j);
      adj_[j].push_back(i);
    }
    for (auto& nb : adj_) std::sort(nb.begin(), nb.end());
  }

  static SpatialWeights from_adjacency_list(
      const std::vector<std::pair<std::string, std::string>>& pairs,
      const UnitIndexMap& ids) {
    std::vector<std::pair<int, int>> edges;
    edges.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
      const int i = ids.index_of(a);
      const int j = ids.index_of(b);
      if (i == j) throw SelfLoop(a);
      edges.emplace_back(i, j);
    }
    return SpatialWeights(ids.size(), edges);
  }

  // Plain-text adjacency format: one edge per line, two whitespace-separated
  // ids; '#'-prefixed lines are comments. Order-insensitive, dedup-safe.
  static SpatialWeights from_adjacency_stream(std::istream& in, const UnitIndexMap& ids) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ls(line);
      std::string a, b, extra;
      if (!(ls >> a >> b))
        throw IoFailure("adjacency line " + std::to_string(line_no) + ": expected two unit ids");
      if (ls >> extra)
        throw IoFailure("adjacency line " + std::to_string(line_no) + ": trailing tokens");
      pairs.emplace_back(std::move(a), std::move(b));
    }
    return from_adjacency_list(pairs, ids);
  }

  // Union-symmetrized k-nearest-neighbour graph on planar coordinates. Ties
  // and duplicated coordinates resolve by index order; the latter sets the
  // optional warning flag instead of failing.
  static SpatialWeights from_knn(const Eigen::MatrixX2d& coords, int k,
                                 bool* duplicate_coords = nullptr) {
    const int n = static_cast<int>(coords.rows());
    if (k < 1 || k >= n)
      throw KTooLarge("k=" + std::to_string(k) + " with n=" + std::to_string(n) +
                      " (need 1 <= k < n)");
    for (int i = 0; i < n; ++i)
      if (!std::isfinite(coords(i, 0)) || !std::isfinite(coords(i, 1)))
        throw Error("from_knn: non-finite coordinate at row " + std::to_string(i));

    if (duplicate_coords) *duplicate_coords = false;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::pair<double, int>> dist(n);
    for (int i = 0; i < n; ++i) {
      int m = 0;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const double dx = coords(i, 0) - coords(j, 0);
        const double dy = coords(i, 1) - coords(j, 1);
        const double d2 = dx * dx + dy * dy;
        if (duplicate_coords && d2 == 0.0) *duplicate_coords = true;
        dist[m++] = {d2, j};
      }
      std::partial_sort(dist.begin(), dist.begin() + k, dist.begin() + m);
      for (int r = 0; r < k; ++r) edges.emplace_back(i, dist[r].second);
    }
    return SpatialWeights(n, edges);
  }

  // Rook-contiguity lattice; unit (r, c) has row-major index r*cols + c.
  static SpatialWeights lattice(int rows, int cols) {
    if (rows < 1 || cols < 1) throw Error("lattice: rows and cols must be >= 1");
    std::vector<std::pair<int, int>> edges;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const int u = r * cols + c;
        if (c + 1 < cols) edges.emplace_back(u, u + 1);
        if (r + 1 < rows) edges.emplace_back(u, u + cols);
      }
    return SpatialWeights(rows * cols, edges);
  }

  int n() const { return n_; }
  int edge_count() const { return static_cast<int>(edges_.size()); }
  bool has_edges() const { return !edges_.empty(); }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }
  const std::vector<int>& neighbors(int i) const {
    if (i < 0 || i >= n_) throw IndexOutOfRange("unit index " + std::to_string(i));
    return adj_[i];
  }
  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  bool operator==(const SpatialWeights& o) const { return n_ == o.n_ && edges_ == o.edges_; }

  // Principal submatrix on the given unit subset, re-indexed 0..m-1 in the
  // subset's ascending order. Units whose neighbours all fall outside the
  // subset become isolated.
  SpatialWeights restricted(std::vector<int> members) const {
    if (members.empty()) throw EmptySubset();
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    std::vector<int> pos(n_, -1);
    for (int r = 0; r < static_cast<int>(members.size()); ++r) {
      const int u = members[r];
      if (u < 0 || u >= n_) throw IndexOutOfRange("member " + std::to_string(u));
      pos[u] = r;
    }
    std::vector<std::pair<int, int>> edges;
    for (auto [i, j] : edges_)
      if (pos[i] >= 0 && pos[j] >= 0) edges.emplace_back(pos[i], pos[j]);
    return SpatialWeights(static_cast<int>(members.size()), edges);
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n_, n_);
    for (auto [i, j] : edges_) {
      m(i, j) = 1.0;
      m(j, i) = 1.0;
    }
    return m;
  }

  // Spectrum of the 0/1 matrix, ascending. Lazily computed and cached; the
  // first call must happen before the object is shared across threads.
  const Eigen::VectorXd& spectrum() const {
    if (!spectrum_) {
      if (!has_edges()) {
        spectrum_ = Eigen::VectorXd::Zero(n_);
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense(), Eigen::EigenvaluesOnly);
        spectrum_ = solver.eigenvalues();
      }
    }
    return *spectrum_;
  }

  // Open interval of spatial parameters keeping I - rho*W nonsingular:
  // (1/lambda_min, 1/lambda_max). Degenerates to {0} on an edgeless graph.
  std::pair<double, double> admissible_interval() const {
    if (!has_edges()) return {0.0, 0.0};
    const Eigen::VectorXd& ev = spectrum();
    const double lo = ev(0);            // < 0 for any graph with an edge
    const double hi = ev(ev.size() - 1);  // > 0 likewise
    return {1.0 / lo, 1.0 / hi};
  }

  bool admissible(double rho) const {
    if (!has_edges()) return rho == 0.0;
    // Every factor 1 - rho*lambda_i must stay off zero; the extremes bound
    // the rest. The guard absorbs eigensolver roundoff at the boundary.
    const Eigen::VectorXd& ev = spectrum();
    const double worst =
        std::min(1.0 - rho * ev(0), 1.0 - rho * ev(ev.size() - 1));
    return worst > 1e-10;
  }

  // log|det(I - rho*W)| via the cached spectrum: sum_i log(1 - rho*lambda_i).
  double log_det(double rho) const {
    if (!admissible(rho))
      throw SpatialParamOutOfRange("rho=" + std::to_string(rho));
    if (!has_edges()) return 0.0;
    const Eigen::VectorXd& ev = spectrum();
    double s = 0.0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) s += std::log1p(-rho * ev(i));
    return s;
  }

  // Spatial lag W*v (binary weights: sum over neighbours).
  Eigen::VectorXd lag(const Eigen::VectorXd& v) const {
    if (v.size() != n_) throw LengthMismatch("lag: vector size vs n");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(n_);
    for (auto [i, j] : edges_) {
      out(i) += v(j);
      out(j) += v(i);
    }
    return out;
  }

  Eigen::MatrixXd lag_matrix(const Eigen::MatrixXd& m) const {
    if (m.rows() != n_) throw LengthMismatch("lag: matrix rows vs n");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
    for (auto [i, j] : edges_) {
      out.row(i) += m.row(j);
      out.row(j) += m.row(i);
    }
    return out;
  }

  // Spatial lag of a single unit: sum of v over i's neighbours.
  double lag_at(const Eigen::VectorXd& v, int i) const {
    double s = 0.0;
    for (int j : neighbors(i)) s += v(j);
    return s;
  }

 private:
  int n_ = 0;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> adj_;
  mutable std::optional<Eigen::VectorXd> spectrum_;
};

// Row-major lattice coordinates matching SpatialWeights::lattice ordering.
inline Eigen::MatrixX2d lattice_coords(int rows, int cols) {
  Eigen::MatrixX2d coords(rows * cols, 2);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      coords(r * cols + c, 0) = static_cast<double>(c);
      coords(r * cols + c, 1) = static_cast<double>(r);
    }
  return coords;
}

}  // namespace scsar
