#pragma once

// Priors for one regression block: a normal intercept, a zero-mean normal on
// the slopes conditioned on the excluded slopes being zero, and independent
// Bernoulli(pi) inclusion indicators.

#include <cstdint>
#include <vector>

#include "ncreg/regression.hpp"

namespace ncreg {

struct InterceptPrior {
  double m;
  double s2;
};

/// Normal prior on ln mu implied by a log-normal prior on mu with mean m_star
/// and standard deviation s_star: s2 = ln((s*/m*)^2 + 1), m = ln m* - s2/2.
InterceptPrior intercept_prior_from_lognormal(double m_star, double s_star);

/// c (X' D X)^{-1}. X excludes the intercept column.
Mat unit_info_slope_cov(const Mat& X_noint, const Vec& d_hat, double c);

/// Covariance of the included slopes given the excluded ones are zero:
/// S_II - S_IE S_EE^{-1} S_EI. Empty when nothing is included.
Mat conditional_vs_prior(const Mat& full_cov, const std::vector<std::uint8_t>& incl);

struct IndPrior {
  double m = 0.0;
  double s2 = 1.0;
  Mat slope_cov;
  double pi = 0.5;
  Mat slope_precision;  // inverse of slope_cov

  /// Validates dimensions and positive definiteness, caches the precision.
  static IndPrior make(double m, double s2, Mat slope_cov, double pi = 0.5);
  int slopes() const { return static_cast<int>(slope_cov.rows()); }
};

/// Unit-information prior for a design whose first column is the intercept:
/// slope covariance n (X' D X)^{-1} over the non-intercept columns.
IndPrior unit_information_prior(const Mat& design, const InterceptPrior& intercept, const Vec& d_hat,
                                double pi = 0.5);

/// log p(coef | incl) + log p(incl).
double log_prior(const ParamBlock& block, const IndPrior& prior);

/// Gradient and Hessian of log_prior in the active coordinates (intercept and
/// included slopes, in that order).
GradHess log_prior_grad_hess(const ParamBlock& block, const IndPrior& prior);

/// Prior used for tensor fits: intercepts N(m, d), slopes N(0, c I).
struct DtiPrior {
  double m_beta = 0.0;
  double m_alpha = 0.0;
  double d = 0.1;
  double c = 100.0;

  IndPrior beta_prior(int slopes) const;
  IndPrior alpha_prior(int slopes, double pi = 0.5) const;
};

/// m_beta = ln mean(y_b0), m_alpha = ln var(y_b0) (n - 1 denominator). The
/// b = 0 rows are not used in the fit itself.
DtiPrior dti_prior_from_b0(const Vec& y_b0);

}  // namespace ncreg
