#pragma once

#include <string>
#include <string_view>

namespace ncreg {

enum class NoiseFamily { NcChi, Rician, Gaussian };

/// Likelihood family selector. Rician is NC-chi with a single coil.
struct NoiseModel {
  NoiseFamily family = NoiseFamily::Rician;
  int coils = 1;

  static NoiseModel rician() { return {NoiseFamily::Rician, 1}; }
  static NoiseModel gaussian() { return {NoiseFamily::Gaussian, 1}; }
  static NoiseModel ncchi(int coils);

  /// Effective NC-chi order L (1 for Rician). Meaningless for Gaussian.
  int order() const { return family == NoiseFamily::Rician ? 1 : coils; }
  bool is_gaussian() const { return family == NoiseFamily::Gaussian; }
};

NoiseModel parse_noise_model(std::string_view name, int coils = 1);
std::string to_string(const NoiseModel& model);

/// Location, per-component noise variance and coil count for one observation.
struct ObsParams {
  double mu;
  double phi;
  int L;
};

/// First and second derivative of a log-density with respect to one parameter.
struct DerivPair {
  double d1;
  double d2;
};

/// Everything the samplers need from one observation: the log-density, its
/// derivatives in mu and phi, and the mixed second derivative.
struct ObsTerms {
  double logp;
  DerivPair dmu;
  DerivPair dphi;
  double dmu_dphi;
};

/// Lower bound applied to mu inside density evaluations during sampling.
inline constexpr double kMuFloor = 1e-12;

double log_density_ncchi(double y, const ObsParams& p);
DerivPair dmu_ncchi(double y, const ObsParams& p);
DerivPair dphi_ncchi(double y, const ObsParams& p);

double log_density_gaussian(double y, double mu, double sigma2);
DerivPair dmu_gaussian(double y, double mu, double sigma2);
DerivPair dsigma2_gaussian(double y, double mu, double sigma2);

/// Family-agnostic log-density. For the Gaussian family phi is the variance.
double log_density(double y, double mu, double phi, const NoiseModel& model);

/// Fused log-density and derivatives; one Bessel evaluation per call.
ObsTerms observation_terms(double y, double mu, double phi, const NoiseModel& model);

/// observation_terms with the logarithms of y, mu and phi supplied by the
/// caller (eta_mu = ln mu, eta_phi = ln phi). Avoids recomputing them in the
/// regression inner loop.
ObsTerms observation_terms_link(double y, double log_y, double mu, double eta_mu, double phi, double eta_phi,
                                const NoiseModel& model);

}  // namespace ncreg
