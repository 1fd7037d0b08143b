#pragma once

// Modified Bessel functions of the first kind, evaluated in log space.
//
// Everything here works with exponentially scaled values e^{-z} I_nu(z), so
// ratios of neighbouring orders never overflow even for z ~ 1e6. Only
// non-negative integer orders are supported.

namespace ncreg {

/// ln(e^{-z} I_nu(z)) and the ratio r = I_{nu+1}(z) / I_nu(z) from a single
/// pass. 1 - r is kept separately because it carries all the information at
/// large z.
struct BesselLogRatio {
  double log_i_scaled;
  double ratio;
  double one_minus_ratio;
};

/// ln I_nu(z), B(z) and B'(z) for the order nu = L - 1 used by the NC-chi
/// likelihood with L coils.
struct BesselEval {
  double log_i;
  double ratio_b;
  double ratio_b_prime;
};

/// ln I_nu(z). nu must be a non-negative integer and z > 0.
double log_bessel_i(double nu, double z);

/// ln(e^{-z} I_nu(z)).
double log_bessel_i_scaled(int nu, double z);

/// I_a(z) / I_b(z) computed from scaled values.
double bessel_i_ratio(int a, int b, double z);

/// Fused evaluation used in the likelihood inner loop.
BesselLogRatio log_bessel_i_with_ratio(int nu, double z);

/// B(z) = I_1/I_0 for L = 1, (I_{L-2} + I_L) / (2 I_{L-1}) for L >= 2.
double bessel_ratio_b(int L, double z);

/// dB/dz using the order-specific closed forms minus B(z)^2.
double bessel_ratio_b_prime(int L, double z);

BesselEval bessel_eval(int L, double z);

}  // namespace ncreg
