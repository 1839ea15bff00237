#pragma once

// Log-likelihoods and maximum-likelihood fits for the four model families
// (OLS, SAR, SEM, SLX) on an arbitrary sample with its weight matrix. SAR and
// SEM profile the scalar spatial parameter: for fixed rho the coefficient and
// variance maximizers are closed-form, leaving a smooth concentrated
// likelihood maximized over the admissible interval.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "scsar/dataset.hpp"
#include "scsar/errors.hpp"
#include "scsar/optimize.hpp"
#include "scsar/stats.hpp"
#include "scsar/weights.hpp"

namespace scsar {

inline constexpr double kMinVariance = 1e-12;

// Per-cluster parameter bundle. theta holds the regression coefficients; for
// SLX it is [beta (P), theta_lag (one per slx_lag_cols entry)].
struct ClusterFit {
  ModelFamily family = ModelFamily::ols;
  double spatial_param = 0.0;  // rho (SAR) / lambda (SEM); 0 for OLS and SLX
  Eigen::VectorXd theta;
  double sigma2 = 0.0;
  double loglik = 0.0;
  double loglik_linear = 0.0;  // nested non-spatial model on the same sample
  double log_det = 0.0;        // ln|det(I - spatial_param * W)| at the optimum
  int n_units = 0;
  std::optional<Eigen::VectorXd> theta_se;
  std::optional<double> spatial_se;
  std::vector<int> slx_lag_cols;  // X columns whose lags enter the SLX design
  bool degraded_to_nonspatial = false;  // spatial family on an edgeless graph
};

struct FitOptions {
  bool compute_se = true;
  bool retain_intercept_lag = false;  // SLX: keep the lag of constant columns
};

namespace detail {

inline double gaussian_ll(int n, double sigma2, double rss) {
  return -0.5 * n * std::log(2.0 * M_PI * sigma2) - rss / (2.0 * sigma2);
}

inline void check_sample(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  if (X.rows() != y.size()) throw LengthMismatch("fit: X rows vs y size");
  if (X.cols() < 1) throw Error("fit: X must have at least one column");
}

inline void check_weights(const Eigen::VectorXd& y, const SpatialWeights& w) {
  if (w.n() != y.size()) throw LengthMismatch("fit: weights order vs sample size");
}

inline void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr,
                       Eigen::Index cols) {
  if (qr.rank() < cols)
    throw RankDeficientDesign("rank " + std::to_string(qr.rank()) + " < " +
                              std::to_string(cols) + " columns");
}

inline double checked_sigma2(double rss, int n) {
  const double s2 = rss / n;
  if (s2 < kMinVariance)
    throw MinVariance("residual variance " + std::to_string(s2) + " below guard");
  return s2;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Log-likelihood evaluators
// ---------------------------------------------------------------------------

inline double loglik_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const Eigen::VectorXd& theta, double sigma2) {
  detail::check_sample(y, X);
  if (sigma2 <= 0.0) throw Error("loglik: sigma2 must be positive");
  const Eigen::VectorXd e = y - X * theta;
  return detail::gaussian_ll(static_cast<int>(y.size()), sigma2, e.squaredNorm());
}

inline double loglik_sar(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const SpatialWeights& w, double rho,
                         const Eigen::VectorXd& theta, double sigma2) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  if (sigma2 <= 0.0) throw Error("loglik: sigma2 must be positive");
  const double ld = w.log_det(rho);  // throws SpatialParamOutOfRange
  const Eigen::VectorXd e = y - rho * w.lag(y) - X * theta;
  return detail::gaussian_ll(static_cast<int>(y.size()), sigma2, e.squaredNorm()) + ld;
}

inline double loglik_sem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const SpatialWeights& w, double lambda,
                         const Eigen::VectorXd& theta, double sigma2) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  if (sigma2 <= 0.0) throw Error("loglik: sigma2 must be positive");
  const double ld = w.log_det(lambda);
  const Eigen::VectorXd u = y - X * theta;
  const Eigen::VectorXd e = u - lambda * w.lag(u);
  return detail::gaussian_ll(static_cast<int>(y.size()), sigma2, e.squaredNorm()) + ld;
}

// theta = [beta (P), theta_lag (one per lag_cols entry)].
inline double loglik_slx(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                         const SpatialWeights& w, const Eigen::VectorXd& theta,
                         const std::vector<int>& lag_cols, double sigma2) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  if (sigma2 <= 0.0) throw Error("loglik: sigma2 must be positive");
  const int p = static_cast<int>(X.cols());
  if (theta.size() != p + static_cast<Eigen::Index>(lag_cols.size()))
    throw LengthMismatch("loglik_slx: theta size vs design width");
  Eigen::VectorXd e = y - X * theta.head(p);
  const Eigen::MatrixXd wx = w.lag_matrix(X);
  for (size_t c = 0; c < lag_cols.size(); ++c)
    e -= theta(p + static_cast<Eigen::Index>(c)) * wx.col(lag_cols[c]);
  return detail::gaussian_ll(static_cast<int>(y.size()), sigma2, e.squaredNorm());
}

// ---------------------------------------------------------------------------
// Standard errors (forward declaration; definition after the fit functions)
// ---------------------------------------------------------------------------

struct StdErrors {
  Eigen::VectorXd theta_se;
  std::optional<double> spatial_se;
};

inline std::optional<StdErrors> std_errors(const ClusterFit& fit,
                                           const Eigen::VectorXd& y,
                                           const Eigen::MatrixXd& X,
                                           const SpatialWeights& w);

namespace detail {

inline void attach_se(ClusterFit& fit, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& X, const SpatialWeights& w) {
  if (auto se = std_errors(fit, y, X, w)) {
    fit.theta_se = se->theta_se;
    fit.spatial_se = se->spatial_se;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fits
// ---------------------------------------------------------------------------

inline ClusterFit fit_ols(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const FitOptions& opts = {}) {
  detail::check_sample(y, X);
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  if (n < p + 2) throw TooFewUnits("OLS needs N >= P + 2");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  detail::check_rank(qr, p);

  ClusterFit fit;
  fit.family = ModelFamily::ols;
  fit.theta = qr.solve(y);
  const Eigen::VectorXd e = y - X * fit.theta;
  fit.sigma2 = detail::checked_sigma2(e.squaredNorm(), n);
  fit.loglik = detail::gaussian_ll(n, fit.sigma2, e.squaredNorm());
  fit.loglik_linear = fit.loglik;
  fit.n_units = n;
  if (opts.compute_se) detail::attach_se(fit, y, X, SpatialWeights(n));
  return fit;
}

namespace detail {

// Shared profile-likelihood driver for SAR and SEM. `concentrated` must
// return the maximized-over-(theta, sigma2) log-likelihood at a given scalar
// spatial parameter; `assemble` rebuilds the fit at the chosen value.
template <class Conc>
double profile_spatial(const SpatialWeights& w, Conc&& conc) {
  const auto [lo, hi] = w.admissible_interval();
  const double margin = 1e-6 * (hi - lo);
  ScalarMax best = maximize_scalar(conc, lo + margin, hi - margin);
  best = polish_maximum(conc, best, lo + margin, hi - margin);
  // The nested linear model sits at 0; prefer it on ties so nesting holds.
  if (conc(0.0) >= best.value) return 0.0;
  return best.x;
}

}  // namespace detail

inline ClusterFit fit_sar(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const SpatialWeights& w, const FitOptions& opts = {}) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  if (n < p + 3) throw TooFewUnits("SAR needs N >= P + 3");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  detail::check_rank(qr, p);

  FitOptions no_se = opts;
  no_se.compute_se = false;
  const ClusterFit linear = fit_ols(y, X, no_se);

  ClusterFit fit;
  fit.family = ModelFamily::sar;
  fit.n_units = n;
  fit.loglik_linear = linear.loglik;

  if (!w.has_edges()) {
    // Wy = 0: the likelihood no longer depends on rho; pin it at 0.
    fit.spatial_param = 0.0;
    fit.theta = linear.theta;
    fit.sigma2 = linear.sigma2;
    fit.loglik = linear.loglik;
    fit.degraded_to_nonspatial = true;
  } else {
    const Eigen::VectorXd wy = w.lag(y);
    auto conc = [&](double rho) {
      const Eigen::VectorXd z = y - rho * wy;
      const Eigen::VectorXd theta = qr.solve(z);
      const double s2 = detail::checked_sigma2((z - X * theta).squaredNorm(), n);
      return -0.5 * n * (std::log(2.0 * M_PI) + 1.0 + std::log(s2)) + w.log_det(rho);
    };
    fit.spatial_param = detail::profile_spatial(w, conc);
    const Eigen::VectorXd z = y - fit.spatial_param * wy;
    fit.theta = qr.solve(z);
    const Eigen::VectorXd e = z - X * fit.theta;
    fit.sigma2 = detail::checked_sigma2(e.squaredNorm(), n);
    fit.log_det = w.log_det(fit.spatial_param);
    fit.loglik = detail::gaussian_ll(n, fit.sigma2, e.squaredNorm()) + fit.log_det;
    if (fit.loglik < fit.loglik_linear) {
      // Numerical safety net for the nesting invariant.
      fit.spatial_param = 0.0;
      fit.theta = linear.theta;
      fit.sigma2 = linear.sigma2;
      fit.log_det = 0.0;
      fit.loglik = linear.loglik;
    }
  }
  if (opts.compute_se) detail::attach_se(fit, y, X, w);
  return fit;
}

inline ClusterFit fit_sem(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const SpatialWeights& w, const FitOptions& opts = {}) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  if (n < p + 3) throw TooFewUnits("SEM needs N >= P + 3");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    detail::check_rank(qr, p);
  }

  FitOptions no_se = opts;
  no_se.compute_se = false;
  const ClusterFit linear = fit_ols(y, X, no_se);

  ClusterFit fit;
  fit.family = ModelFamily::sem;
  fit.n_units = n;
  fit.loglik_linear = linear.loglik;

  if (!w.has_edges()) {
    fit.spatial_param = 0.0;
    fit.theta = linear.theta;
    fit.sigma2 = linear.sigma2;
    fit.loglik = linear.loglik;
    fit.degraded_to_nonspatial = true;
  } else {
    const Eigen::VectorXd wy = w.lag(y);
    const Eigen::MatrixXd wx = w.lag_matrix(X);
    auto fit_at = [&](double lambda) {
      const Eigen::VectorXd yt = y - lambda * wy;
      const Eigen::MatrixXd xt = X - lambda * wx;
      const Eigen::VectorXd theta = xt.colPivHouseholderQr().solve(yt);
      const double rss = (yt - xt * theta).squaredNorm();
      return std::make_pair(theta, rss);
    };
    auto conc = [&](double lambda) {
      const double s2 = detail::checked_sigma2(fit_at(lambda).second, n);
      return -0.5 * n * (std::log(2.0 * M_PI) + 1.0 + std::log(s2)) + w.log_det(lambda);
    };
    fit.spatial_param = detail::profile_spatial(w, conc);
    auto [theta, rss] = fit_at(fit.spatial_param);
    fit.theta = theta;
    fit.sigma2 = detail::checked_sigma2(rss, n);
    fit.log_det = w.log_det(fit.spatial_param);
    fit.loglik = detail::gaussian_ll(n, fit.sigma2, rss) + fit.log_det;
    if (fit.loglik < fit.loglik_linear) {
      fit.spatial_param = 0.0;
      fit.theta = linear.theta;
      fit.sigma2 = linear.sigma2;
      fit.log_det = 0.0;
      fit.loglik = linear.loglik;
    }
  }
  if (opts.compute_se) detail::attach_se(fit, y, X, w);
  return fit;
}

inline ClusterFit fit_slx(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                          const SpatialWeights& w, const FitOptions& opts = {}) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  const int n = static_cast<int>(y.size());
  const int p = static_cast<int>(X.cols());
  const Eigen::MatrixXd wx = w.lag_matrix(X);

  // Lags of constant columns (the intercept's lag is the degree sequence) are
  // dropped unless explicitly retained; identically-zero lags always drop.
  std::vector<int> lag_cols;
  for (int c = 0; c < p; ++c) {
    const bool constant = (X.col(c).maxCoeff() == X.col(c).minCoeff());
    if (constant && !opts.retain_intercept_lag) continue;
    if (wx.col(c).lpNorm<Eigen::Infinity>() == 0.0) continue;
    lag_cols.push_back(c);
  }
  const int width = p + static_cast<int>(lag_cols.size());
  if (n < width + 2) throw TooFewUnits("SLX needs N >= P + lags + 2");

  Eigen::MatrixXd design(n, width);
  design.leftCols(p) = X;
  for (size_t c = 0; c < lag_cols.size(); ++c)
    design.col(p + static_cast<Eigen::Index>(c)) = wx.col(lag_cols[c]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  detail::check_rank(qr, width);

  FitOptions no_se = opts;
  no_se.compute_se = false;
  const ClusterFit linear = fit_ols(y, X, no_se);

  ClusterFit fit;
  fit.family = ModelFamily::slx;
  fit.n_units = n;
  fit.slx_lag_cols = lag_cols;
  fit.theta = qr.solve(y);
  const Eigen::VectorXd e = y - design * fit.theta;
  fit.sigma2 = detail::checked_sigma2(e.squaredNorm(), n);
  fit.loglik = detail::gaussian_ll(n, fit.sigma2, e.squaredNorm());
  fit.loglik_linear = linear.loglik;
  fit.degraded_to_nonspatial = lag_cols.empty();
  if (opts.compute_se) detail::attach_se(fit, y, X, w);
  return fit;
}

inline ClusterFit fit_family(ModelFamily family, const Eigen::VectorXd& y,
                             const Eigen::MatrixXd& X, const SpatialWeights& w,
                             const FitOptions& opts = {}) {
  switch (family) {
    case ModelFamily::ols: return fit_ols(y, X, opts);
    case ModelFamily::sar: return fit_sar(y, X, w, opts);
    case ModelFamily::sem: return fit_sem(y, X, w, opts);
    case ModelFamily::slx: return fit_slx(y, X, w, opts);
  }
  throw ConfigError("unknown family");
}

// ---------------------------------------------------------------------------
// Per-unit likelihood share (membership step). The log-determinant is not
// separable across units, so it is allocated uniformly, 1/n_units per unit of
// the fit's own sample; the shares then sum exactly to the full likelihood.
// ---------------------------------------------------------------------------

inline double unit_loglik(const ClusterFit& fit, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& X, const SpatialWeights& w,
                          int i) {
  detail::check_sample(y, X);
  detail::check_weights(y, w);
  if (i < 0 || i >= y.size()) throw IndexOutOfRange("unit " + std::to_string(i));

  const int p = static_cast<int>(X.cols());
  double e = 0.0;
  switch (fit.family) {
    case ModelFamily::ols:
      e = y(i) - X.row(i).dot(fit.theta);
      break;
    case ModelFamily::sar:
      e = y(i) - fit.spatial_param * w.lag_at(y, i) - X.row(i).dot(fit.theta);
      break;
    case ModelFamily::sem: {
      const double ui = y(i) - X.row(i).dot(fit.theta);
      double lag_u = 0.0;
      for (int j : w.neighbors(i)) lag_u += y(j) - X.row(j).dot(fit.theta);
      e = ui - fit.spatial_param * lag_u;
      break;
    }
    case ModelFamily::slx: {
      e = y(i) - X.row(i).dot(fit.theta.head(p));
      for (size_t c = 0; c < fit.slx_lag_cols.size(); ++c) {
        double lag = 0.0;
        for (int j : w.neighbors(i)) lag += X(j, fit.slx_lag_cols[c]);
        e -= fit.theta(p + static_cast<Eigen::Index>(c)) * lag;
      }
      break;
    }
  }
  const double ld_share = (fit.n_units > 0) ? fit.log_det / fit.n_units : 0.0;
  return -0.5 * std::log(2.0 * M_PI * fit.sigma2) - e * e / (2.0 * fit.sigma2) + ld_share;
}

// ---------------------------------------------------------------------------
// Standard errors: inverse negative numerical Hessian of the full likelihood
// in the free parameters (spatial param, theta, sigma2), central differences.
// A singular Hessian yields missing SEs rather than an error.
// ---------------------------------------------------------------------------

inline std::optional<StdErrors> std_errors(const ClusterFit& fit,
                                           const Eigen::VectorXd& y,
                                           const Eigen::MatrixXd& X,
                                           const SpatialWeights& w) {
  const bool spatial = is_spatial_family(fit.family) && !fit.degraded_to_nonspatial;
  const int n_theta = static_cast<int>(fit.theta.size());
  const int m = n_theta + 1 + (spatial ? 1 : 0);
  const int off = spatial ? 1 : 0;  // theta offset in the parameter vector

  Eigen::VectorXd params(m);
  if (spatial) params(0) = fit.spatial_param;
  params.segment(off, n_theta) = fit.theta;
  params(m - 1) = fit.sigma2;

  auto eval = [&](const Eigen::VectorXd& pv) -> double {
    const Eigen::VectorXd theta = pv.segment(off, n_theta);
    const double sigma2 = pv(m - 1);
    switch (fit.family) {
      case ModelFamily::ols:
        return loglik_ols(y, X, theta, sigma2);
      case ModelFamily::sar:
        return spatial ? loglik_sar(y, X, w, pv(0), theta, sigma2)
                       : loglik_ols(y, X, theta, sigma2);
      case ModelFamily::sem:
        return spatial ? loglik_sem(y, X, w, pv(0), theta, sigma2)
                       : loglik_ols(y, X, theta, sigma2);
      case ModelFamily::slx:
        return loglik_slx(y, X, w, theta, fit.slx_lag_cols, sigma2);
    }
    return 0.0;
  };

  // Per-parameter steps: relative 1e-5 with absolute floor 1e-7, shrunk so
  // perturbed points stay strictly inside the parameter domain.
  Eigen::VectorXd h(m);
  for (int j = 0; j < m; ++j) h(j) = std::max(1e-5 * std::abs(params(j)), 1e-7);
  if (spatial && w.has_edges()) {
    const auto [lo, hi] = w.admissible_interval();
    h(0) = std::min({h(0), (hi - params(0)) / 2.0, (params(0) - lo) / 2.0});
  }
  h(m - 1) = std::min(h(m - 1), params(m - 1) / 2.0);
  for (int j = 0; j < m; ++j)
    if (!(h(j) > 0.0)) return std::nullopt;

  Eigen::MatrixXd hess(m, m);
  const double f0 = eval(params);
  try {
    for (int j = 0; j < m; ++j) {
      Eigen::VectorXd pp = params, pm = params;
      pp(j) += h(j);
      pm(j) -= h(j);
      hess(j, j) = (eval(pp) - 2.0 * f0 + eval(pm)) / (h(j) * h(j));
    }
    for (int j = 0; j < m; ++j)
      for (int l = j + 1; l < m; ++l) {
        Eigen::VectorXd p1 = params, p2 = params, p3 = params, p4 = params;
        p1(j) += h(j); p1(l) += h(l);
        p2(j) += h(j); p2(l) -= h(l);
        p3(j) -= h(j); p3(l) += h(l);
        p4(j) -= h(j); p4(l) -= h(l);
        hess(j, l) = hess(l, j) =
            (eval(p1) - eval(p2) - eval(p3) + eval(p4)) / (4.0 * h(j) * h(l));
      }
  } catch (const Error&) {
    return std::nullopt;
  }

  const Eigen::MatrixXd info = -hess;
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(m, m));

  StdErrors out;
  out.theta_se = Eigen::VectorXd(n_theta);
  for (int j = 0; j < n_theta; ++j) {
    const double v = cov(off + j, off + j);
    if (!(v >= 0.0)) return std::nullopt;
    out.theta_se(j) = std::sqrt(v);
  }
  if (spatial) {
    const double v = cov(0, 0);
    if (!(v >= 0.0)) return std::nullopt;
    out.spatial_se = std::sqrt(v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood-ratio test of the spatial model against its nested linear model
// (chi-square, 1 df). Defined for SAR and SEM only.
// ---------------------------------------------------------------------------

struct LrTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

inline LrTest lr_test(const ClusterFit& fit) {
  if (!is_spatial_family(fit.family))
    throw NotApplicable("LR test requires a SAR or SEM fit");
  LrTest t;
  t.statistic = std::max(0.0, 2.0 * (fit.loglik - fit.loglik_linear));
  t.p_value = chisquare1_sf(t.statistic);
  return t;
}

}  // namespace scsar
