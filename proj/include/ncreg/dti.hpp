#pragma once

// Diffusion tensor regression: ln mu_i = beta_0 + x_i' beta(omega) with the
// tensor D = Omega' Omega in log-Cholesky coordinates omega, so every value
// of omega gives a positive definite tensor.

#include <Eigen/Dense>
#include <memory>

#include "ncreg/prior.hpp"
#include "ncreg/sampler.hpp"

namespace ncreg {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// b-values (s/mm^2) and unit gradient directions, one row per measurement.
struct GradientScheme {
  Vec b;
  Mat g;  // n x 3

  int size() const { return static_cast<int>(b.size()); }
  /// Shapes, non-negative b, unit directions (1e-6) where b > 0.
  void validate() const;
  /// Rows with b <= threshold, and the rest.
  std::vector<int> b0_rows(double threshold) const;
  std::vector<int> dw_rows(double threshold) const;
  GradientScheme subset(const std::vector<int>& rows) const;
};

/// Rows -(b gx^2, b gy^2, b gz^2, 2b gx gy, 2b gy gz, 2b gx gz); coefficient
/// order (dxx, dyy, dzz, dxy, dyz, dxz). No intercept column.
Mat dti_design(const GradientScheme& scheme);

Mat3 tensor_from_beta(const Vec6& beta);
Vec6 beta_from_tensor(const Mat3& D);

struct TensorOmega {
  Mat3 D;
  Vec6 beta;
};

/// D(omega) and beta(omega). Throws std::domain_error when |omega_k| > 300.
TensorOmega tensor_from_omega(const Vec6& omega);
Vec6 beta_from_omega(const Vec6& omega);

/// Inverse of tensor_from_omega. Throws std::domain_error unless D is
/// symmetric positive definite.
Vec6 omega_from_tensor(const Mat3& D);

/// d beta / d omega (rows follow beta, columns omega_1..omega_6).
Mat6 domega_jacobian(const Vec6& omega);

/// Floors the eigenvalues of a symmetric matrix at rel_floor times the
/// largest one. If no eigenvalue is positive the result is fallback * I.
Mat3 project_pd(const Mat3& D, double rel_floor, double fallback);

/// Eigenvalues of a symmetric 3x3 matrix in descending order (closed form).
Vec3 tensor_eigenvalues(const Mat3& D);

struct FaMd {
  double fa;
  double md;
};

/// Eigenvalues must be positive and sorted descending.
FaMd fa_md(const Vec3& eigenvalues);

/// Mean block map (beta_0, omega_1..omega_6) -> beta_0 + X beta(omega).
/// The Jacobian is the first-order one, [1, X d beta / d omega].
class LogCholeskyMap final : public BlockMap {
 public:
  explicit LogCholeskyMap(Mat design);
  int size() const override { return 7; }
  int rows() const override { return static_cast<int>(design_.rows()); }
  Vec predictor(const Vec& coef, const std::vector<int>& active) const override;
  Mat jacobian(const Vec& coef, const std::vector<int>& active) const override;

 private:
  Mat design_;
};

struct DtiFitConfig {
  SamplerConfig sampler;
  bool heteroscedastic = false;
  double b0_threshold = 50.0;  // rows with b at or below this count as b = 0
  double d = 0.1;
  double c = 100.0;
  double pi = 0.5;
};

/// Everything needed to sample one voxel: the target over (beta_0, omega)
/// and alpha, a starting state and the prior built from the b = 0 rows.
struct DtiProblem {
  Target target;
  ChainState init;
  DtiPrior prior;
  Mat design;    // diffusion-weighted rows only
  Standardization z_transform;  // variance covariates (heteroscedastic only)
};

/// Splits off the b = 0 rows for the prior, builds the design and the start
/// (least squares of ln y, projected to a positive definite tensor).
/// Throws std::invalid_argument with fewer than 2 b = 0 or 10 weighted rows.
DtiProblem dti_problem(const Vec& y, const GradientScheme& scheme, const NoiseModel& model, const DtiFitConfig& cfg);

struct TensorPosterior {
  double fa_mean = 0.0;
  double fa_sd = 0.0;
  double md_mean = 0.0;
  double md_sd = 0.0;
  double s0_mean = 0.0;
  Vec6 tensor_mean = Vec6::Zero();  // (dxx, dyy, dzz, dxy, dyz, dxz)
  Vec6 tensor_sd = Vec6::Zero();
  long nonpd_draws = 0;  // draws whose computed eigenvalues were not all positive
};

/// Summaries over retained rows of (beta_0, omega_1..omega_6).
TensorPosterior summarize_tensor_draws(const Mat& draws);

struct DtiFit {
  PosteriorDraws draws;
  TensorPosterior tensor;
  DtiPrior prior;
};

DtiFit fit_voxel(const Vec& y, const GradientScheme& scheme, const NoiseModel& model, const DtiFitConfig& cfg);

}  // namespace ncreg
