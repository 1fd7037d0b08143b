#include "ncreg/regression.hpp"

#include "ncreg/bessel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ncreg {

namespace {

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw std::invalid_argument(std::string(what) + " contains non-finite entries");
}

void require_full_rank(const Mat& m, const char* what) {
  Eigen::ColPivHouseholderQR<Mat> qr(m);
  if (qr.rank() < m.cols()) {
    throw std::invalid_argument(std::string(what) + " is rank deficient (rank " + std::to_string(qr.rank()) +
                                " of " + std::to_string(m.cols()) + " columns)");
  }
}

Mat columns(const Mat& m, const std::vector<int>& idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

GradHess assemble(const Mat& design, const std::vector<int>& act, const Vec& g, const Vec& w) {
  const Mat Xa = columns(design, act);
  GradHess out;
  out.grad = Xa.transpose() * g;
  out.hess = Xa.transpose() * w.asDiagonal() * Xa;
  if (!out.grad.allFinite() || !out.hess.allFinite()) {
    throw std::runtime_error("gradient or Hessian is not finite");
  }
  return out;
}

// 0 * x is NaN exactly when x is not finite; the sum vectorizes where
// isFinite().all() does not.
template <class D>
bool all_finite(const Eigen::DenseBase<D>& a) {
  return std::isfinite((a.derived().array() * 0.0).sum());
}

}  // namespace

Vec linear_predictor(const Mat& design, const ParamBlock& b) {
  const std::vector<int> act = b.active();
  if (static_cast<Eigen::Index>(act.size()) == design.cols()) return design * b.coef;
  Vec coef(static_cast<Eigen::Index>(act.size()));
  for (std::size_t j = 0; j < act.size(); ++j) coef(static_cast<Eigen::Index>(j)) = b.coef(act[j]);
  return columns(design, act) * coef;
}

StandardizedDesign standardize(const Mat& raw) {
  const Eigen::Index n = raw.rows();
  if (n < 2) throw std::invalid_argument("standardize: need at least two rows");
  StandardizedDesign out;
  out.X.resize(n, raw.cols() + 1);
  out.X.col(0).setOnes();
  out.transform.mean.resize(raw.cols());
  out.transform.scale.resize(raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double mean = raw.col(j).mean();
    const double sd = std::sqrt((raw.col(j).array() - mean).square().mean());
    if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
      throw std::invalid_argument("standardize: column " + std::to_string(j) + " is constant");
    }
    out.transform.mean(j) = mean;
    out.transform.scale(j) = sd;
    out.X.col(j + 1) = (raw.col(j).array() - mean) / sd;
  }
  return out;
}

Vec coefficients_to_raw(const Vec& coef, const Standardization& t) {
  Vec out(coef.size());
  out(0) = coef(0);
  for (Eigen::Index j = 1; j < coef.size(); ++j) {
    out(j) = coef(j) / t.scale(j - 1);
    out(0) -= out(j) * t.mean(j - 1);
  }
  return out;
}

ObservationSet::ObservationSet(Vec y, Mat X, Mat Z) : y_(std::move(y)), X_(std::move(X)), Z_(std::move(Z)) {
  if (X_.cols() < 1 || Z_.cols() < 1) throw std::invalid_argument("observation set: designs need an intercept column");
  if (X_.rows() != y_.size() || Z_.rows() != y_.size()) {
    throw std::invalid_argument("observation set: design rows do not match the response length");
  }
  if (y_.size() < std::max(X_.cols(), Z_.cols())) {
    throw std::invalid_argument("observation set: fewer observations than coefficients");
  }
  for (Eigen::Index i = 0; i < y_.size(); ++i) {
    if (!(y_(i) > 0.0) || !std::isfinite(y_(i))) {
      throw std::domain_error("observation set: y[" + std::to_string(i) + "] is not a finite positive value");
    }
  }
  require_finite(X_, "mean design");
  require_finite(Z_, "variance design");
  require_full_rank(X_, "mean design");
  require_full_rank(Z_, "variance design");
  log_y_ = y_.array().log().matrix();
}

ParamBlock ParamBlock::full(Vec coef) {
  ParamBlock b;
  b.incl.assign(static_cast<std::size_t>(std::max<Eigen::Index>(coef.size() - 1, 0)), 1);
  b.coef = std::move(coef);
  return b;
}

ParamBlock ParamBlock::intercept_only(double b0, int slopes) {
  ParamBlock b;
  b.coef = Vec::Zero(slopes + 1);
  b.coef(0) = b0;
  b.incl.assign(static_cast<std::size_t>(slopes), 0);
  return b;
}

std::vector<int> ParamBlock::active() const { return active_indices(incl); }

bool ParamBlock::consistent() const {
  if (coef.size() != slopes() + 1) return false;
  for (int j = 0; j < slopes(); ++j) {
    if (!incl[j] && coef(j + 1) != 0.0) return false;
  }
  return true;
}

std::vector<int> active_indices(const std::vector<std::uint8_t>& incl) {
  std::vector<int> idx{0};
  for (std::size_t j = 0; j < incl.size(); ++j) {
    if (incl[j]) idx.push_back(static_cast<int>(j) + 1);
  }
  return idx;
}

LinkedState linked_state(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha) {
  return {linear_predictor(obs.X(), beta).array().exp().matrix(),
          linear_predictor(obs.Z(), alpha).array().exp().matrix()};
}

LinkDerivs link_derivs(const Vec& y, const Vec& log_y, const Vec& eta_mu, const Vec& eta_phi,
                       const NoiseModel& model) {
  const Eigen::Index n = y.size();
  LinkDerivs d;
  const Eigen::ArrayXd mu = eta_mu.array().exp();
  // homoscedastic fits have a constant variance predictor: one exp instead of n
  const Eigen::ArrayXd inv_phi = n > 0 && (eta_phi.array() == eta_phi(0)).all()
                                     ? Eigen::ArrayXd::Constant(n, std::exp(-eta_phi(0)))
                                     : Eigen::ArrayXd((-eta_phi.array()).exp());
  if (!all_finite(mu) || !all_finite(inv_phi) || !(inv_phi.minCoeff() > 0.0)) {
    d.finite = false;
    d.loglik = -std::numeric_limits<double>::infinity();
    return d;
  }
  double total = 0.0;
  if (model.is_gaussian()) {
    d.g_mu.resize(n);
    d.w_mu.resize(n);
    d.g_phi.resize(n);
    d.w_phi.resize(n);
    d.w_cross.resize(n);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = mu(i), ip = inv_phi(i);
      const double e = y(i) - m;
      const double e2 = e * e * ip;
      const double g = m * e * ip;
      ss += e2;
      d.g_mu(i) = g;
      d.w_mu(i) = g - m * m * ip;
      d.g_phi(i) = 0.5 * (e2 - 1.0);
      d.w_phi(i) = -0.5 * e2;
      d.w_cross(i) = -g;
    }
    total = -0.5 * (static_cast<double>(n) * std::log(2.0 * std::numbers::pi) + eta_phi.sum() + ss);
  } else if (model.order() == 1) {
    // Rician: the NC-chi terms with nu = 0 written directly on the link scale
    d.g_mu.resize(n);
    d.w_mu.resize(n);
    d.g_phi.resize(n);
    d.w_phi.resize(n);
    d.w_cross.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yi = y(i), ip = inv_phi(i);
      const double m = std::max(mu(i), kMuFloor);
      const double z = std::max(yi * m * ip, std::numeric_limits<double>::min());
      if (!std::isfinite(z)) {
        total = -std::numeric_limits<double>::infinity();
        d.g_mu(i) = d.w_mu(i) = d.g_phi(i) = d.w_phi(i) = d.w_cross(i) = std::numeric_limits<double>::quiet_NaN();
        continue;
      }
      const BesselLogRatio br = log_bessel_i_with_ratio(0, z);
      const double omr = br.one_minus_ratio;
      const double r = br.ratio;
      const double rp = omr * (2.0 - omr) - r / z;
      const double diff = yi - m;
      const double a = 0.5 * diff * diff + yi * m * omr;
      const double yp = yi * ip;
      total += log_y(i) - eta_phi(i) - 0.5 * diff * diff * ip + br.log_i_scaled;
      const double g_mu = m * (diff - yi * omr) * ip;
      const double g_phi = a * ip - 1.0;
      d.g_mu(i) = g_mu;
      d.w_mu(i) = m * m * (yp * yp * rp - ip) + g_mu;
      d.g_phi(i) = g_phi;
      d.w_phi(i) = z * z * rp - 2.0 * a * ip + 1.0 + g_phi;
      d.w_cross(i) = -m * ((yi * r - m) + yi * z * rp) * ip;
    }
  } else {
    d.g_mu.resize(n);
    d.w_mu.resize(n);
    d.g_phi.resize(n);
    d.w_phi.resize(n);
    d.w_cross.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double m = mu(i);
      const double phi = 1.0 / inv_phi(i);
      const ObsTerms t = observation_terms_link(y(i), log_y(i), m, eta_mu(i), phi, eta_phi(i), model);
      total += t.logp;
      d.g_mu(i) = m * t.dmu.d1;
      d.w_mu(i) = m * m * t.dmu.d2 + m * t.dmu.d1;
      d.g_phi(i) = phi * t.dphi.d1;
      d.w_phi(i) = phi * phi * t.dphi.d2 + phi * t.dphi.d1;
      d.w_cross(i) = m * phi * t.dmu_dphi;
    }
  }
  d.loglik = std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
  d.finite = std::isfinite(total) && all_finite(d.g_mu) && all_finite(d.w_mu) && all_finite(d.g_phi) &&
             all_finite(d.w_phi);
  return d;
}

Vec hessian_weights(const LinkDerivs& d, bool mean_block, HessKind kind, const Vec& eta_mu, const Vec& eta_phi,
                    const NoiseModel& model) {
  const Vec& g = mean_block ? d.g_mu : d.g_phi;
  switch (kind) {
    case HessKind::Observed:
      return mean_block ? d.w_mu : d.w_phi;
    case HessKind::OuterProduct:
      return -g.array().square().matrix();
    case HessKind::Expected: {
      // Gaussian: the observed weight minus the residual term, which is
      // exactly -mu^2 / phi; the variance weight is the constant -1/2.
      if (model.is_gaussian()) {
        return mean_block ? Vec(d.w_mu - d.g_mu) : Vec(Vec::Constant(d.w_phi.size(), -0.5));
      }
      Vec w(eta_mu.size());
      for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double mu = std::exp(eta_mu(i));
        const double phi = std::exp(eta_phi(i));
        const FisherInfo f = expected_information(mu, phi, model);
        w(i) = mean_block ? -mu * mu * f.mu_mu : -phi * phi * f.phi_phi;
      }
      return w;
    }
  }
  return {};
}

double loglik(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
              const NoiseModel& model) {
  const Vec eta_mu = linear_predictor(obs.X(), beta);
  const Vec eta_phi = linear_predictor(obs.Z(), alpha);
  double total = 0.0;
  for (int i = 0; i < obs.n(); ++i) {
    const double mu = std::exp(eta_mu(i));
    const double phi = std::exp(eta_phi(i));
    if (!std::isfinite(mu) || !std::isfinite(phi) || !(phi > 0.0)) return -std::numeric_limits<double>::infinity();
    total += observation_terms_link(obs.y()(i), obs.log_y()(i), mu, eta_mu(i), phi, eta_phi(i), model).logp;
  }
  return std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
}

GradHess grad_hess_beta(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
                        const NoiseModel& model, HessKind kind) {
  const Vec eta_mu = linear_predictor(obs.X(), beta);
  const Vec eta_phi = linear_predictor(obs.Z(), alpha);
  const LinkDerivs d = link_derivs(obs.y(), obs.log_y(), eta_mu, eta_phi, model);
  if (!d.finite) throw std::runtime_error("grad_hess_beta: log-likelihood is not finite at this point");
  return assemble(obs.X(), beta.active(), d.g_mu, hessian_weights(d, true, kind, eta_mu, eta_phi, model));
}

GradHess grad_hess_alpha(const ObservationSet& obs, const ParamBlock& beta, const ParamBlock& alpha,
                         const NoiseModel& model, HessKind kind) {
  const Vec eta_mu = linear_predictor(obs.X(), beta);
  const Vec eta_phi = linear_predictor(obs.Z(), alpha);
  const LinkDerivs d = link_derivs(obs.y(), obs.log_y(), eta_mu, eta_phi, model);
  if (!d.finite) throw std::runtime_error("grad_hess_alpha: log-likelihood is not finite at this point");
  return assemble(obs.Z(), alpha.active(), d.g_phi, hessian_weights(d, false, kind, eta_mu, eta_phi, model));
}

FisherInfo expected_information(double mu, double phi, const NoiseModel& model) {
  if (!(mu > 0.0) || !(phi > 0.0)) throw std::domain_error("expected_information: mu and phi must be > 0");
  if (model.is_gaussian()) return {1.0 / phi, 0.5 / (phi * phi)};
  // The information scales as 1/phi (resp. 1/phi^2) at fixed mu / sqrt(phi),
  // so integrate on the unit-variance scale.
  const double s = mu / std::sqrt(phi);
  const int L = model.order();
  const double lo = std::max(0.0, s - 14.0);
  const double hi = s + 14.0 + 4.0 * std::sqrt(2.0 * L);
  const auto expect = [&](auto&& f) {
    const auto integrand = [&](double y) {
      if (!(y > 0.0)) return 0.0;
      const ObsTerms t = observation_terms(y, s, 1.0, model);
      return std::exp(t.logp) * f(t);
    };
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 15, 1e-12);
  };
  const double jm = expect([](const ObsTerms& t) { return -t.dmu.d2; });
  const double jp = expect([](const ObsTerms& t) { return -t.dphi.d2; });
  return {jm / phi, jp / (phi * phi)};
}

Vec fisher_mu_diag(int n, double m, double phi, const NoiseModel& model) {
  if (n < 1 || !std::isfinite(m)) throw std::domain_error("fisher_mu_diag: need n >= 1 and finite m");
  const double mu = std::exp(m);
  return Vec::Constant(n, mu * mu * expected_information(mu, phi, model).mu_mu);
}

Vec fisher_phi_diag(int n, double m, double mu, const NoiseModel& model) {
  if (n < 1 || !std::isfinite(m)) throw std::domain_error("fisher_phi_diag: need n >= 1 and finite m");
  const double phi = std::exp(m);
  return Vec::Constant(n, phi * phi * expected_information(mu, phi, model).phi_phi);
}

}  // namespace ncreg
