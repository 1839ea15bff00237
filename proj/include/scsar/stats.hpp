#pragma once

#include <cmath>
#include <string>

namespace scsar {

// Two-sided p-value of a standard normal z statistic.
inline double normal_two_sided_p(double z) {
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// Survival function of the chi-square distribution with 1 degree of freedom.
inline double chisquare1_sf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

// Significance stars matching the reporting convention
// ***pv<0.001; **pv<0.01; *pv<0.05.
inline std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  return "";
}

}  // namespace scsar
