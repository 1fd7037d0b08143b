#include "ncreg/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "ncreg/bessel.hpp"

namespace ncreg {

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::domain_error(std::string("likelihood: ") + what + " must be finite and > 0");
  }
}

void check_params(double y, const ObsParams& p) {
  check_positive(y, "y");
  check_positive(p.mu, "mu");
  check_positive(p.phi, "phi");
  if (p.L < 1) throw std::domain_error("likelihood: L must be >= 1");
}

// Derivatives of the NC-chi log-density in a form that stays accurate when
// z = y mu / phi is tiny (L >= 2 cancellation) or huge (r -> 1). With
// r = I_L(z) / I_{L-1}(z) the usual B(z) equals r + (L-1)/z, which cancels
// the (L-1)/mu terms analytically. Logs of y, mu and phi are passed in since
// the regression code already has them.
ObsTerms ncchi_terms(double y, double log_y, double mu, double log_mu, double phi, double log_phi, int L) {
  const int nu = L - 1;
  const double inv_phi = 1.0 / phi;
  const double z = std::max(y * mu * inv_phi, std::numeric_limits<double>::min());
  const BesselLogRatio br = log_bessel_i_with_ratio(nu, z);
  const double r = br.ratio;
  const double omr = br.one_minus_ratio;
  // r'(z) = 1 - r^2 - (2 nu + 1) r / z
  const double rp = omr * (2.0 - omr) - (2.0 * nu + 1.0) * (r / z);
  const double diff = y - mu;
  const double a = 0.5 * diff * diff + y * mu * omr;
  const double yp = y * inv_phi;
  const double inv_phi2 = inv_phi * inv_phi;

  ObsTerms t{};
  // -(y^2 + mu^2) / 2phi + ln I(z) = -(y - mu)^2 / 2phi + ln(e^{-z} I(z))
  t.logp = L * log_y - log_phi - nu * log_mu - 0.5 * diff * diff * inv_phi + br.log_i_scaled;
  t.dmu.d1 = (diff - y * omr) * inv_phi;
  t.dmu.d2 = yp * yp * rp - inv_phi;
  t.dphi.d1 = a * inv_phi2 - L * inv_phi;
  t.dphi.d2 = (z * z * rp - 2.0 * a * inv_phi + L) * inv_phi2;
  t.dmu_dphi = -((y * r - mu) + y * z * rp) * inv_phi2;
  return t;
}

ObsTerms ncchi_terms(double y, double mu, double phi, int L) {
  return ncchi_terms(y, std::log(y), mu, std::log(mu), phi, std::log(phi), L);
}

ObsTerms gaussian_terms(double y, double mu, double s2, double log_s2) {
  const double e = y - mu;
  ObsTerms t{};
  t.logp = -0.5 * (std::log(2.0 * std::numbers::pi) + log_s2) - 0.5 * e * e / s2;
  t.dmu = {e / s2, -1.0 / s2};
  t.dphi = {-0.5 / s2 + 0.5 * e * e / (s2 * s2), 0.5 / (s2 * s2) - e * e / (s2 * s2 * s2)};
  t.dmu_dphi = -e / (s2 * s2);
  return t;
}

}  // namespace

NoiseModel NoiseModel::ncchi(int coils) {
  if (coils < 1) throw std::invalid_argument("noise model: coils must be >= 1");
  return {NoiseFamily::NcChi, coils};
}

NoiseModel parse_noise_model(std::string_view name, int coils) {
  if (name == "rician" || name == "rice") return NoiseModel::rician();
  if (name == "gaussian" || name == "gauss") return NoiseModel::gaussian();
  if (name == "ncchi" || name == "nc-chi") return NoiseModel::ncchi(coils);
  throw std::invalid_argument("unknown noise model '" + std::string(name) +
                              "' (expected rician, ncchi or gaussian)");
}

std::string to_string(const NoiseModel& model) {
  switch (model.family) {
    case NoiseFamily::Rician:
      return "rician";
    case NoiseFamily::Gaussian:
      return "gaussian";
    case NoiseFamily::NcChi:
      return "ncchi(L=" + std::to_string(model.coils) + ")";
  }
  return "unknown";
}

double log_density_ncchi(double y, const ObsParams& p) {
  check_params(y, p);
  return ncchi_terms(y, p.mu, p.phi, p.L).logp;
}

DerivPair dmu_ncchi(double y, const ObsParams& p) {
  check_params(y, p);
  return ncchi_terms(y, p.mu, p.phi, p.L).dmu;
}

DerivPair dphi_ncchi(double y, const ObsParams& p) {
  check_params(y, p);
  return ncchi_terms(y, p.mu, p.phi, p.L).dphi;
}

double log_density_gaussian(double y, double mu, double sigma2) {
  check_positive(sigma2, "sigma2");
  return gaussian_terms(y, mu, sigma2, std::log(sigma2)).logp;
}

DerivPair dmu_gaussian(double y, double mu, double sigma2) {
  check_positive(sigma2, "sigma2");
  return gaussian_terms(y, mu, sigma2, std::log(sigma2)).dmu;
}

DerivPair dsigma2_gaussian(double y, double mu, double sigma2) {
  check_positive(sigma2, "sigma2");
  return gaussian_terms(y, mu, sigma2, std::log(sigma2)).dphi;
}

double log_density(double y, double mu, double phi, const NoiseModel& model) {
  return observation_terms(y, mu, phi, model).logp;
}

ObsTerms observation_terms(double y, double mu, double phi, const NoiseModel& model) {
  if (model.is_gaussian()) return gaussian_terms(y, mu, phi, std::log(phi));
  return ncchi_terms(y, std::max(mu, kMuFloor), phi, model.order());
}

ObsTerms observation_terms_link(double y, double log_y, double mu, double eta_mu, double phi, double eta_phi,
                                const NoiseModel& model) {
  if (model.is_gaussian()) return gaussian_terms(y, mu, phi, eta_phi);
  if (mu < kMuFloor) {
    mu = kMuFloor;
    eta_mu = std::log(kMuFloor);
  }
  if (!std::isfinite(y * mu / phi)) {
    // Bessel argument overflows; the density is numerically zero.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {-std::numeric_limits<double>::infinity(), {nan, nan}, {nan, nan}, nan};
  }
  return ncchi_terms(y, log_y, mu, eta_mu, phi, eta_phi, model.order());
}

}  // namespace ncreg
