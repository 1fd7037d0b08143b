#pragma once

// Heteroscedastic log-link regression for magnitude data:
//   ln mu_i = x_i' beta,   ln phi_i = z_i' alpha
// where the first column of X and Z is the intercept.

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "ncreg/likelihood.hpp"

namespace ncreg {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Column means and population standard deviations used to standardize a
/// covariate matrix, kept so coefficients can be mapped back.
struct Standardization {
  Vec mean;
  Vec scale;
};

struct StandardizedDesign {
  Mat X;  // intercept column first
  Standardization transform;
};

/// Centers and scales every column of raw (mean 0, population sd 1) and
/// prepends an intercept column. Throws std::invalid_argument naming the
/// first constant column.
StandardizedDesign standardize(const Mat& raw);

/// Maps coefficients for a standardized design back to the raw covariate
/// scale (intercept adjusted for the centering).
Vec coefficients_to_raw(const Vec& coef, const Standardization& t);

/// Response and the two designs for one voxel or series.
class ObservationSet {
 public:
  /// Validates y > 0, matching row counts, n >= column counts, finite entries
  /// and full column rank of both designs.
  ObservationSet(Vec y, Mat X, Mat Z);

  const Vec& y() const { return y_; }
  const Vec& log_y() const { return log_y_; }
  const Mat& X() const { return X_; }
  const Mat& Z() const { return Z_; }
  int n() const { return static_cast<int>(y_.size()); }
  int p() const { return static_cast<int>(X_.cols()) - 1; }
  int q() const { return static_cast<int>(Z_.cols()) - 1; }

 private:
  Vec y_;
  Vec log_y_;
  Mat X_;
  Mat Z_;
};

/// Coefficients for one link (intercept first) and inclusion indicators for
/// the slopes. Excluded slopes are held at exactly zero.
struct ParamBlock {
  Vec coef;
  std::vector<std::uint8_t> incl;

  /// All slopes included.
  static ParamBlock full(Vec coef);
  /// Intercept only; slopes excluded and zero.
  static ParamBlock intercept_only(double b0, int slopes);

  int slopes() const { return static_cast<int>(incl.size()); }
  /// Indices into coef of the intercept and included slopes.
  std::vector<int> active() const;
  bool consistent() const;
};

/// Indices into a coefficient vector (intercept first) selected by incl.
std::vector<int> active_indices(const std::vector<std::uint8_t>& incl);

/// design * coef computed from the intercept and included columns only, so an
/// excluded slope gives bit-for-bit the same result as deleting its column.
Vec linear_predictor(const Mat& design, const ParamBlock& b);

struct LinkedState {
  Vec mu;
  Vec phi;
};

LinkedState linked_state(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha);

/// Sum of per-observation log-densities; -inf if any mu_i or phi_i is not a
/// finite positive number.
double loglik(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
              const NoiseModel& model);

enum class HessKind { Observed, OuterProduct, Expected };

struct GradHess {
  Vec grad;
  Mat hess;
};

/// Per-observation derivatives of the log-likelihood with respect to the two
/// linear predictors eta_mu = ln mu and eta_phi = ln phi.
struct LinkDerivs {
  double loglik = 0.0;
  Vec g_mu;    // d l_i / d eta_mu
  Vec w_mu;    // d2 l_i / d eta_mu^2
  Vec g_phi;
  Vec w_phi;
  Vec w_cross;  // d2 l_i / d eta_mu d eta_phi
  bool finite = true;
};

/// Evaluates all per-observation link-scale terms at the given predictors.
LinkDerivs link_derivs(const Vec& y, const Vec& log_y, const Vec& eta_mu, const Vec& eta_phi,
                       const NoiseModel& model);

/// Curvature weights for the requested Hessian kind. Observed returns w,
/// OuterProduct returns -g^2, Expected returns the negative expected
/// information on the link scale (closed form for Gaussian, quadrature
/// otherwise).
Vec hessian_weights(const LinkDerivs& d, bool mean_block, HessKind kind, const Vec& eta_mu, const Vec& eta_phi,
                    const NoiseModel& model);

/// Gradient and Hessian of the log-likelihood in the intercept and included
/// slopes of beta (respectively alpha).
GradHess grad_hess_beta(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
                        const NoiseModel& model, HessKind kind);
GradHess grad_hess_alpha(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
                         const NoiseModel& model, HessKind kind);

/// Fisher information -E[d2 log p / d mu2] and -E[d2 log p / d phi2] for one
/// observation.
struct FisherInfo {
  double mu_mu;
  double phi_phi;
};

FisherInfo expected_information(double mu, double phi, const NoiseModel& model);

/// Diagonal of D-hat for the unit-information prior: the Fisher information
/// for mu times mu^2 (log link), all observations evaluated at mu = exp(m)
/// and the given phi.
Vec fisher_mu_diag(int n, double m, double phi, const NoiseModel& model);

/// Same for the variance link: Fisher information for phi times phi^2, at
/// phi = exp(m) and the given mu.
Vec fisher_phi_diag(int n, double m, double mu, const NoiseModel& model);

}  // namespace ncreg
