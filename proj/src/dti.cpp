#include "ncreg/dti.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ncreg {

namespace {

constexpr double kOmegaLimit = 300.0;

void check_omega(const Vec6& omega) {
  for (int k = 0; k < 6; ++k) {
    if (!std::isfinite(omega(k)) || std::abs(omega(k)) > kOmegaLimit) {
      throw std::domain_error("tensor_from_omega: omega_" + std::to_string(k + 1) + " = " +
                              std::to_string(omega(k)) +
                              " is outside [-300, 300]; check the units of b (s/mm^2) and the tensor scale");
    }
  }
}

}  // namespace

void GradientScheme::validate() const {
  if (g.rows() != b.size() || g.cols() != 3) {
    throw std::invalid_argument("gradient scheme: need one 3-vector direction per b-value");
  }
  for (int i = 0; i < size(); ++i) {
    if (!std::isfinite(b(i)) || b(i) < 0.0) {
      throw std::invalid_argument("gradient scheme: b-value " + std::to_string(i) + " must be finite and >= 0");
    }
    if (b(i) > 0.0 && std::abs(g.row(i).norm() - 1.0) > 1e-6) {
      throw std::invalid_argument("gradient scheme: direction " + std::to_string(i) + " has norm " +
                                  std::to_string(g.row(i).norm()) + ", expected 1");
    }
  }
}

std::vector<int> GradientScheme::b0_rows(double threshold) const {
  std::vector<int> rows;
  for (int i = 0; i < size(); ++i)
    if (b(i) <= threshold) rows.push_back(i);
  return rows;
}

std::vector<int> GradientScheme::dw_rows(double threshold) const {
  std::vector<int> rows;
  for (int i = 0; i < size(); ++i)
    if (b(i) > threshold) rows.push_back(i);
  return rows;
}

GradientScheme GradientScheme::subset(const std::vector<int>& rows) const {
  GradientScheme s;
  s.b.resize(static_cast<Eigen::Index>(rows.size()));
  s.g.resize(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    s.b(k) = b(rows[k]);
    s.g.row(k) = g.row(rows[k]);
  }
  return s;
}

Mat dti_design(const GradientScheme& scheme) {
  scheme.validate();
  Mat x(scheme.size(), 6);
  for (int i = 0; i < scheme.size(); ++i) {
    const double b = scheme.b(i);
    const double gx = scheme.g(i, 0), gy = scheme.g(i, 1), gz = scheme.g(i, 2);
    x.row(i) << -b * gx * gx, -b * gy * gy, -b * gz * gz, -2.0 * b * gx * gy, -2.0 * b * gy * gz, -2.0 * b * gx * gz;
  }
  return x;
}

Mat3 tensor_from_beta(const Vec6& beta) {
  Mat3 d;
  d << beta(0), beta(3), beta(5),
       beta(3), beta(1), beta(4),
       beta(5), beta(4), beta(2);
  return d;
}

Vec6 beta_from_tensor(const Mat3& D) {
  Vec6 beta;
  beta << D(0, 0), D(1, 1), D(2, 2), D(0, 1), D(1, 2), D(0, 2);
  return beta;
}

Vec6 beta_from_omega(const Vec6& omega) {
  check_omega(omega);
  const double e1 = std::exp(omega(0)), e2 = std::exp(omega(1)), e3 = std::exp(omega(2));
  const double w4 = omega(3), w5 = omega(4), w6 = omega(5);
  Vec6 beta;
  beta << e1 * e1, w4 * w4 + e2 * e2, w6 * w6 + w5 * w5 + e3 * e3, w4 * e1, w4 * w6 + w5 * e2, w6 * e1;
  return beta;
}

TensorOmega tensor_from_omega(const Vec6& omega) {
  const Vec6 beta = beta_from_omega(omega);
  return {tensor_from_beta(beta), beta};
}

Vec6 omega_from_tensor(const Mat3& D) {
  if (!D.allFinite() || (D - D.transpose()).cwiseAbs().maxCoeff() > 1e-12 * D.cwiseAbs().maxCoeff()) {
    throw std::domain_error("omega_from_tensor: tensor must be finite and symmetric");
  }
  // Omega = L' for the lower Cholesky factor L of D.
  const Eigen::LLT<Mat3> llt(D);
  if (llt.info() != Eigen::Success) throw std::domain_error("omega_from_tensor: tensor is not positive definite");
  const Mat3 l = llt.matrixL();
  if (!(l.diagonal().array() > 0.0).all()) {
    throw std::domain_error("omega_from_tensor: tensor is not positive definite");
  }
  Vec6 omega;
  omega << std::log(l(0, 0)), std::log(l(1, 1)), std::log(l(2, 2)), l(1, 0), l(2, 1), l(2, 0);
  return omega;
}

Mat6 domega_jacobian(const Vec6& omega) {
  const double e1 = std::exp(omega(0)), e2 = std::exp(omega(1)), e3 = std::exp(omega(2));
  const double w4 = omega(3), w5 = omega(4), w6 = omega(5);
  Mat6 j = Mat6::Zero();
  j(0, 0) = 2.0 * e1 * e1;
  j(1, 1) = 2.0 * e2 * e2;
  j(1, 3) = 2.0 * w4;
  j(2, 2) = 2.0 * e3 * e3;
  j(2, 4) = 2.0 * w5;
  j(2, 5) = 2.0 * w6;
  j(3, 0) = w4 * e1;
  j(3, 3) = e1;
  j(4, 1) = w5 * e2;
  j(4, 3) = w6;
  j(4, 4) = e2;
  j(4, 5) = w4;
  j(5, 0) = w6 * e1;
  j(5, 5) = e1;
  return j;
}

Mat3 project_pd(const Mat3& D, double rel_floor, double fallback) {
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(D);
  const Vec3 ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  if (!(top > 0.0)) return fallback * Mat3::Identity();
  const Vec3 floored = ev.cwiseMax(rel_floor * top);
  return es.eigenvectors() * floored.asDiagonal() * es.eigenvectors().transpose();
}

Vec3 tensor_eigenvalues(const Mat3& D) {
  Eigen::SelfAdjointEigenSolver<Mat3> es;
  es.computeDirect(D, Eigen::EigenvaluesOnly);
  const Vec3 ev = es.eigenvalues();  // ascending
  return {ev(2), ev(1), ev(0)};
}

FaMd fa_md(const Vec3& eigenvalues) {
  if (!(eigenvalues.array() > 0.0).all() || !eigenvalues.allFinite()) {
    throw std::domain_error("fa_md: eigenvalues must be finite and > 0");
  }
  if (eigenvalues(0) < eigenvalues(1) || eigenvalues(1) < eigenvalues(2)) {
    throw std::domain_error("fa_md: eigenvalues must be sorted in descending order");
  }
  const double md = eigenvalues.mean();
  const double num = (eigenvalues.array() - md).square().sum();
  const double den = eigenvalues.squaredNorm();
  return {std::min(1.0, std::sqrt(1.5 * num / den)), md};
}

LogCholeskyMap::LogCholeskyMap(Mat design) : design_(std::move(design)) {
  if (design_.cols() != 6) throw std::invalid_argument("LogCholeskyMap: design must have 6 columns");
}

namespace {

void require_full(const std::vector<int>& active) {
  if (active.size() != 7) throw std::invalid_argument("LogCholeskyMap: all seven coefficients must be active");
}

Vec6 omega_of(const Vec& coef) { return coef.segment<6>(1); }

}  // namespace

// Proposals can land far outside the range where exp(omega) is usable; they
// get a NaN predictor (log posterior -inf) instead of an exception.
bool omega_in_range(const Vec& coef) {
  return coef.allFinite() && coef.segment<6>(1).cwiseAbs().maxCoeff() <= kOmegaLimit;
}

Vec LogCholeskyMap::predictor(const Vec& coef, const std::vector<int>& active) const {
  require_full(active);
  if (!omega_in_range(coef)) return Vec::Constant(design_.rows(), std::numeric_limits<double>::quiet_NaN());
  Vec eta = design_ * beta_from_omega(omega_of(coef));
  eta.array() += coef(0);
  return eta;
}

Mat LogCholeskyMap::jacobian(const Vec& coef, const std::vector<int>& active) const {
  require_full(active);
  if (!omega_in_range(coef)) return Mat::Constant(design_.rows(), 7, std::numeric_limits<double>::quiet_NaN());
  Mat j(design_.rows(), 7);
  j.col(0).setOnes();
  j.rightCols(6) = design_ * domega_jacobian(omega_of(coef));
  return j;
}

DtiProblem dti_problem(const Vec& y, const GradientScheme& scheme, const NoiseModel& model,
                       const DtiFitConfig& cfg) {
  scheme.validate();
  if (y.size() != scheme.size()) throw std::invalid_argument("DTI fit: signal length does not match the scheme");
  const std::vector<int> b0 = scheme.b0_rows(cfg.b0_threshold);
  const std::vector<int> dw = scheme.dw_rows(cfg.b0_threshold);
  if (b0.size() < 2) throw std::invalid_argument("DTI fit: need at least two b = 0 measurements");
  if (dw.size() < 10) throw std::invalid_argument("DTI fit: need at least ten diffusion-weighted measurements");

  Vec y_b0(static_cast<Eigen::Index>(b0.size()));
  for (std::size_t k = 0; k < b0.size(); ++k) y_b0(k) = y(b0[k]);
  Vec y_dw(static_cast<Eigen::Index>(dw.size()));
  for (std::size_t k = 0; k < dw.size(); ++k) y_dw(k) = y(dw[k]);

  DtiProblem p;
  p.prior = dti_prior_from_b0(y_b0);
  p.prior.d = cfg.d;
  p.prior.c = cfg.c;
  const GradientScheme dws = scheme.subset(dw);
  p.design = dti_design(dws);

  if (!(y_dw.array() > 0.0).all() || !y_dw.allFinite()) {
    throw std::invalid_argument("DTI fit: signal must be finite and > 0");
  }
  Mat z;
  if (cfg.heteroscedastic) {
    StandardizedDesign sd = standardize(p.design);
    z = std::move(sd.X);
    p.z_transform = std::move(sd.transform);
  } else {
    z = Mat::Ones(y_dw.size(), 1);
  }
  // No rank check on [1, X]: with a single shell the intercept and the trace
  // are confounded in the likelihood and only the b = 0 prior separates them.
  const Vec log_y = y_dw.array().log().matrix();

  // Start: beta_0 at its prior mean, tensor by least squares of the
  // remaining log signal, floored to positive definite.
  Vec beta(7);
  beta(0) = p.prior.m_beta;
  const Vec6 ls = p.design.colPivHouseholderQr().solve((log_y.array() - beta(0)).matrix());
  const Mat3 d0 = project_pd(tensor_from_beta(ls), 1e-6, 1.0 / dws.b.mean());
  beta.tail<6>() = omega_from_tensor(d0);

  auto map = std::make_shared<LogCholeskyMap>(p.design);
  const Vec resid = y_dw - map->predictor(beta, {0, 1, 2, 3, 4, 5, 6}).array().exp().matrix();
  double v = resid.squaredNorm() / static_cast<double>(y_dw.size());
  if (!(v > 0.0) || !std::isfinite(v)) v = std::exp(p.prior.m_alpha);
  Vec alpha = Vec::Zero(z.cols());
  alpha(0) = std::log(v);
  p.init = {ParamBlock::full(beta), ParamBlock::full(alpha)};

  p.target.y = y_dw;
  p.target.log_y = log_y;
  p.target.noise = model;
  p.target.mean = {map, p.prior.beta_prior(6), false};
  p.target.var = {std::make_shared<LinearMap>(z), p.prior.alpha_prior(static_cast<int>(z.cols()) - 1, cfg.pi),
                  cfg.heteroscedastic};
  return p;
}

TensorPosterior summarize_tensor_draws(const Mat& draws) {
  if (draws.cols() != 7 || draws.rows() < 1) {
    throw std::invalid_argument("summarize_tensor_draws: need at least one row of (beta_0, omega_1..omega_6)");
  }
  TensorPosterior tp;
  const Eigen::Index n = draws.rows();
  Vec fa(n), md(n);
  Mat tensors(n, 6);
  Eigen::Index kept = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const Vec6 omega = draws.row(r).segment<6>(1).transpose();
    const TensorOmega t = tensor_from_omega(omega);
    tensors.row(r) = t.beta.transpose();
    const Vec3 ev = tensor_eigenvalues(t.D);
    if (!(ev(2) > 0.0)) {
      ++tp.nonpd_draws;
      continue;
    }
    const FaMd f = fa_md(ev);
    fa(kept) = f.fa;
    md(kept) = f.md;
    ++kept;
  }
  const auto mean_sd = [](const Vec& v, double& mean, double& sd) {
    mean = v.mean();
    sd = v.size() > 1 ? std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1)) : 0.0;
  };
  if (kept > 0) {
    mean_sd(fa.head(kept), tp.fa_mean, tp.fa_sd);
    mean_sd(md.head(kept), tp.md_mean, tp.md_sd);
  }
  tp.s0_mean = draws.col(0).array().exp().mean();
  for (int k = 0; k < 6; ++k) mean_sd(tensors.col(k), tp.tensor_mean(k), tp.tensor_sd(k));
  return tp;
}

DtiFit fit_voxel(const Vec& y, const GradientScheme& scheme, const NoiseModel& model, const DtiFitConfig& cfg) {
  const DtiProblem p = dti_problem(y, scheme, model, cfg);
  DtiFit fit;
  fit.draws = run_mwg(p.target, cfg.sampler, p.init);
  fit.tensor = summarize_tensor_draws(fit.draws.beta);
  fit.prior = p.prior;
  return fit;
}

}  // namespace ncreg
