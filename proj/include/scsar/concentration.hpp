#pragma once

// Grouped-data Gini index on size-class distributions, with the small-sample
// N/(N-1) correction, reported on a 0-100 scale.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "scsar/errors.hpp"

namespace scsar {

struct GroupedClass {
  double count = 0.0;         // farms in the class
  double total_output = 0.0;  // summed standard output of the class
};

// Classes ordered ascending in per-farm output (the class scheme's order).
struct GroupedDistribution {
  std::string region_id;
  std::vector<GroupedClass> classes;
};

inline double gini_grouped(const GroupedDistribution& d) {
  double n = 0.0, total = 0.0;
  for (const GroupedClass& c : d.classes) {
    if (c.count < 0.0 || c.total_output < 0.0)
      throw Error("gini_grouped: negative count or output in region " + d.region_id);
    n += c.count;
    total += c.total_output;
  }
  if (n < 2.0) throw TooFewFarms("region " + d.region_id + " has " + std::to_string(n) + " farms");
  if (!(total > 0.0)) throw ZeroTotalOutput("region " + d.region_id);

  // 1 - sum_j (Q_j + Q_{j-1}) (F_j - F_{j-1}); empty classes step neither share.
  double f_prev = 0.0, q_prev = 0.0, trapezoid = 0.0;
  for (const GroupedClass& c : d.classes) {
    if (c.count == 0.0) continue;
    const double f = f_prev + c.count / n;
    const double q = q_prev + c.total_output / total;
    trapezoid += (q + q_prev) * (f - f_prev);
    f_prev = f;
    q_prev = q;
  }
  const double gini = n / (n - 1.0) * (1.0 - trapezoid) * 100.0;
  return std::clamp(gini, 0.0, 100.0);
}

}  // namespace scsar
