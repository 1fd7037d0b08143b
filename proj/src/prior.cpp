#include "ncreg/prior.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ncreg {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

Mat submatrix(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

void split(const std::vector<std::uint8_t>& incl, std::vector<int>& in, std::vector<int>& out) {
  for (std::size_t j = 0; j < incl.size(); ++j) (incl[j] ? in : out).push_back(static_cast<int>(j));
}

}  // namespace

InterceptPrior intercept_prior_from_lognormal(double m_star, double s_star) {
  if (!(m_star > 0.0) || !(s_star > 0.0)) {
    throw std::domain_error("intercept prior: m* and s* must be > 0");
  }
  const double r = s_star / m_star;
  const double s2 = std::log1p(r * r);
  return {std::log(m_star) - 0.5 * s2, s2};
}

Mat unit_info_slope_cov(const Mat& X_noint, const Vec& d_hat, double c) {
  if (d_hat.size() != X_noint.rows()) throw std::invalid_argument("unit_info_slope_cov: weight length mismatch");
  if (!(c > 0.0)) throw std::domain_error("unit_info_slope_cov: c must be > 0");
  const Mat info = X_noint.transpose() * d_hat.asDiagonal() * X_noint;
  Eigen::LLT<Mat> llt(info);
  if (llt.info() != Eigen::Success) throw std::runtime_error("unit_info_slope_cov: information matrix is singular");
  Mat cov = c * llt.solve(Mat::Identity(info.rows(), info.cols()));
  return 0.5 * (cov + cov.transpose());
}

Mat conditional_vs_prior(const Mat& full_cov, const std::vector<std::uint8_t>& incl) {
  if (full_cov.rows() != full_cov.cols() || full_cov.rows() != static_cast<Eigen::Index>(incl.size())) {
    throw std::invalid_argument("conditional_vs_prior: covariance and indicator sizes differ");
  }
  std::vector<int> in, out;
  split(incl, in, out);
  const Mat s_ii = submatrix(full_cov, in, in);
  if (out.empty() || in.empty()) return s_ii;
  const Mat s_ie = submatrix(full_cov, in, out);
  const Mat s_ee = submatrix(full_cov, out, out);
  Mat cond = s_ii - s_ie * s_ee.llt().solve(s_ie.transpose());
  return 0.5 * (cond + cond.transpose());
}

IndPrior IndPrior::make(double m, double s2, Mat slope_cov, double pi) {
  if (!(s2 > 0.0) || !std::isfinite(m)) throw std::domain_error("prior: intercept variance must be > 0");
  if (!(pi > 0.0 && pi < 1.0)) throw std::domain_error("prior: inclusion probability must be in (0, 1)");
  if (slope_cov.rows() != slope_cov.cols()) throw std::invalid_argument("prior: slope covariance must be square");
  IndPrior p;
  p.m = m;
  p.s2 = s2;
  p.pi = pi;
  p.slope_cov = std::move(slope_cov);
  const Eigen::Index k = p.slope_cov.rows();
  if (k > 0) {
    Eigen::LLT<Mat> llt(p.slope_cov);
    if (llt.info() != Eigen::Success) throw std::domain_error("prior: slope covariance is not positive definite");
    p.slope_precision = llt.solve(Mat::Identity(k, k));
    p.slope_precision = 0.5 * (p.slope_precision + p.slope_precision.transpose()).eval();
  } else {
    p.slope_precision.resize(0, 0);
  }
  return p;
}

IndPrior unit_information_prior(const Mat& design, const InterceptPrior& intercept, const Vec& d_hat, double pi) {
  const Eigen::Index k = design.cols() - 1;
  Mat cov(0, 0);
  if (k > 0) cov = unit_info_slope_cov(design.rightCols(k), d_hat, static_cast<double>(design.rows()));
  return IndPrior::make(intercept.m, intercept.s2, std::move(cov), pi);
}

// The conditional slope density given the excluded slopes are zero has
// precision P_II, the included block of the full precision matrix. This is
// the same normal as the Schur-complement covariance in conditional_vs_prior.
double log_prior(const ParamBlock& block, const IndPrior& prior) {
  if (block.slopes() != prior.slopes() || block.coef.size() != prior.slopes() + 1) {
    throw std::invalid_argument("log_prior: block has " + std::to_string(block.slopes()) + " slopes, prior has " +
                                std::to_string(prior.slopes()));
  }
  const double e = block.coef(0) - prior.m;
  double lp = -0.5 * (kLog2Pi + std::log(prior.s2) + e * e / prior.s2);

  std::vector<int> in, out;
  split(block.incl, in, out);
  if (!in.empty()) {
    const Mat p_ii = submatrix(prior.slope_precision, in, in);
    Vec b(static_cast<Eigen::Index>(in.size()));
    for (std::size_t j = 0; j < in.size(); ++j) b(j) = block.coef(in[j] + 1);
    const Eigen::LLT<Mat> llt(p_ii);
    const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    lp += 0.5 * (log_det - static_cast<double>(in.size()) * kLog2Pi - b.dot(p_ii * b));
  }
  lp += static_cast<double>(in.size()) * std::log(prior.pi) + static_cast<double>(out.size()) * std::log1p(-prior.pi);
  return lp;
}

GradHess log_prior_grad_hess(const ParamBlock& block, const IndPrior& prior) {
  const std::vector<int> act = block.active();
  const Eigen::Index k = static_cast<Eigen::Index>(act.size());
  GradHess out{Vec::Zero(k), Mat::Zero(k, k)};
  out.grad(0) = -(block.coef(0) - prior.m) / prior.s2;
  out.hess(0, 0) = -1.0 / prior.s2;
  if (k > 1) {
    std::vector<int> slopes(act.begin() + 1, act.end());
    for (int& j : slopes) --j;
    const Mat p_ii = submatrix(prior.slope_precision, slopes, slopes);
    Vec b(k - 1);
    for (Eigen::Index j = 0; j < k - 1; ++j) b(j) = block.coef(act[j + 1]);
    out.grad.tail(k - 1) = -p_ii * b;
    out.hess.bottomRightCorner(k - 1, k - 1) = -p_ii;
  }
  return out;
}

IndPrior DtiPrior::beta_prior(int slopes) const {
  return IndPrior::make(m_beta, d, c * Mat::Identity(slopes, slopes), 0.5);
}

IndPrior DtiPrior::alpha_prior(int slopes, double pi) const {
  return IndPrior::make(m_alpha, d, c * Mat::Identity(slopes, slopes), pi);
}

DtiPrior dti_prior_from_b0(const Vec& y_b0) {
  if (y_b0.size() < 2) throw std::invalid_argument("DTI prior: need at least two b = 0 measurements");
  const double mean = y_b0.mean();
  const double var = (y_b0.array() - mean).square().sum() / static_cast<double>(y_b0.size() - 1);
  if (!(mean > 0.0)) throw std::domain_error("DTI prior: mean of b = 0 measurements must be > 0");
  if (!(var > 0.0)) throw std::domain_error("DTI prior: b = 0 measurements have zero variance");
  DtiPrior p;
  p.m_beta = std::log(mean);
  p.m_alpha = std::log(var);
  return p;
}

}  // namespace ncreg
