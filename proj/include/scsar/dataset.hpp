#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "scsar/errors.hpp"
#include "scsar/weights.hpp"

namespace scsar {

enum class ModelFamily { ols, sar, sem, slx };

inline std::string to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::ols: return "ols";
    case ModelFamily::sar: return "sar";
    case ModelFamily::sem: return "sem";
    case ModelFamily::slx: return "slx";
  }
  return "?";
}

inline ModelFamily family_from_string(const std::string& s) {
  if (s == "ols") return ModelFamily::ols;
  if (s == "sar") return ModelFamily::sar;
  if (s == "sem") return ModelFamily::sem;
  if (s == "slx") return ModelFamily::slx;
  throw ConfigError("unknown model family: " + s);
}

inline bool is_spatial_family(ModelFamily f) {
  return f == ModelFamily::sar || f == ModelFamily::sem;
}

// Cross-sectional sample: unit ids, planar coordinates, response, covariates.
// X carries an explicit intercept column when one is declared.
struct Dataset {
  UnitIndexMap index;
  Eigen::MatrixX2d coords;
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> names;  // one label per X column

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }

  void validate() const {
    if (n() < 1) throw Error("Dataset: empty sample");
    if (p() < 1) throw Error("Dataset: X must have at least one column");
    if (coords.rows() != n() || X.rows() != n() || index.size() != n())
      throw LengthMismatch("Dataset: inconsistent row counts");
    if (static_cast<int>(names.size()) != p())
      throw LengthMismatch("Dataset: names vs X columns");
    if (!y.allFinite() || !X.allFinite() || !coords.allFinite())
      throw Error("Dataset: non-finite values");
  }

  // Row subsample preserving the order of `members` (ascending callers keep
  // restricted-W indexing consistent).
  Dataset subset(const std::vector<int>& members) const {
    Dataset out;
    const int m = static_cast<int>(members.size());
    out.coords.resize(m, 2);
    out.y.resize(m);
    out.X.resize(m, p());
    std::vector<std::string> ids;
    ids.reserve(m);
    for (int r = 0; r < m; ++r) {
      const int u = members[r];
      if (u < 0 || u >= n()) throw IndexOutOfRange("subset member " + std::to_string(u));
      out.coords.row(r) = coords.row(u);
      out.y(r) = y(u);
      out.X.row(r) = X.row(u);
      ids.push_back(index.id(u));
    }
    out.index = UnitIndexMap(std::move(ids));
    out.names = names;
    return out;
  }
};

}  // namespace scsar
