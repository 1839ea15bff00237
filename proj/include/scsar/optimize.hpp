#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace scsar {

struct ScalarMax {
  double x = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  int evals = 0;
};

// Bounded scalar maximization by Brent's method (parabolic interpolation
// with golden-section fallback). f must be finite on [lo, hi].
template <class F>
ScalarMax maximize_scalar(F&& f, double lo, double hi, double xtol = 1e-10,
                          int max_iter = 200) {
  constexpr double golden = 0.3819660112501051;
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());

  ScalarMax out;
  double a = lo, b = hi;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x);
  out.evals = 1;
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = sqrt_eps * std::abs(x) + xtol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a)) break;

    bool take_golden = true;
    if (std::abs(e) > tol1) {
      // Parabola through (x, fx), (w, fw), (v, fv); maximize by negation.
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_old = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_old) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
        take_golden = false;
      }
    }
    if (take_golden) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }

    const double u = x + ((std::abs(d) >= tol1) ? d : (d > 0 ? tol1 : -tol1));
    const double fu = f(u);
    ++out.evals;

    if (fu >= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu >= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu >= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }

  out.x = x;
  out.value = fx;
  return out;
}

// Newton refinement on the central-difference derivative of f, keeping the
// iterate strictly inside (lo, hi). Brent alone locates the argmax only to
// ~sqrt(eps); this drives the finite-difference gradient to the noise floor.
template <class F>
ScalarMax polish_maximum(F&& f, ScalarMax start, double lo, double hi,
                         int max_iter = 12) {
  ScalarMax cur = start;
  for (int iter = 0; iter < max_iter; ++iter) {
    double h = 1e-6 * std::max(1.0, std::abs(cur.x));
    h = std::min({h, (hi - cur.x) / 4.0, (cur.x - lo) / 4.0});
    if (!(h > 0.0)) break;
    const double fp = f(cur.x + h);
    const double fm = f(cur.x - h);
    cur.evals += 2;
    const double g1 = (fp - fm) / (2.0 * h);
    const double g2 = (fp - 2.0 * cur.value + fm) / (h * h);
    if (!std::isfinite(g1) || !std::isfinite(g2) || g2 >= 0.0) break;
    const double step = -g1 / g2;
    const double x_new = std::clamp(cur.x + step, lo + h, hi - h);
    const double f_new = f(x_new);
    ++cur.evals;
    // Tolerate roundoff-level decreases; the gradient is what is being driven
    // to zero here, the caller re-evaluates the model at the returned x.
    if (f_new < cur.value - 1e-12 * std::max(1.0, std::abs(cur.value))) break;
    const bool converged =
        std::abs(x_new - cur.x) < 1e-14 * std::max(1.0, std::abs(cur.x));
    cur.x = x_new;
    cur.value = f_new;
    if (converged) break;
  }
  return cur;
}

}  // namespace scsar
