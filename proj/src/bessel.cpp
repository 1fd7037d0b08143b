#include "ncreg/bessel.hpp"

#include <algorithm>
#include <array>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace ncreg {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr double kRescale = 1e280;
constexpr int kMaxTerms = 100000;

// Order 0 below this argument uses a piecewise Chebyshev table of
// ln(e^{-z} I_0(z)) and I_1(z) / (z I_0(z)), built once from Boost in long
// double. Both functions are analytic within 2.4 of the real axis, so degree
// 11 on width-1/4 pieces is accurate to rounding.
constexpr double kFastLimit = 40.0;
constexpr double kPieceWidth = 0.25;
constexpr int kPieces = static_cast<int>(kFastLimit / kPieceWidth);
constexpr int kCoefs = 12;

struct OrderZeroTable {
  std::array<std::array<double, kCoefs>, kPieces> log_scaled{};
  std::array<std::array<double, kCoefs>, kPieces> ratio_over_z{};
  OrderZeroTable() {
    constexpr long double pi = std::numbers::pi_v<long double>;
    std::array<long double, kCoefs> f{}, g{}, theta{};
    for (int piece = 0; piece < kPieces; ++piece) {
      const long double mid = (piece + 0.5L) * kPieceWidth;
      for (int j = 0; j < kCoefs; ++j) {
        theta[j] = pi * (j + 0.5L) / kCoefs;
        const long double z = mid + 0.5L * kPieceWidth * std::cos(theta[j]);
        const long double i0 = boost::math::cyl_bessel_i(0, z);
        const long double i1 = boost::math::cyl_bessel_i(1, z);
        f[j] = std::log(i0) - z;
        g[j] = i1 / (z * i0);
      }
      for (int k = 0; k < kCoefs; ++k) {
        long double cf = 0.0L, cg = 0.0L;
        for (int j = 0; j < kCoefs; ++j) {
          const long double c = std::cos(k * theta[j]);
          cf += f[j] * c;
          cg += g[j] * c;
        }
        const long double scale = (k == 0 ? 1.0L : 2.0L) / kCoefs;
        log_scaled[piece][k] = static_cast<double>(cf * scale);
        ratio_over_z[piece][k] = static_cast<double>(cg * scale);
      }
    }
  }
};

const OrderZeroTable& order_zero_table() {
  static const OrderZeroTable table;
  return table;
}

// Both series at once; the two recurrences are independent.
std::pair<double, double> clenshaw2(const std::array<double, kCoefs>& c, const std::array<double, kCoefs>& d,
                                    double t) {
  const double t2 = 2.0 * t;
  double b1 = 0.0, b2 = 0.0, e1 = 0.0, e2 = 0.0;
  for (int k = kCoefs - 1; k >= 1; --k) {
    const double b0 = t2 * b1 - b2 + c[k];
    const double e0 = t2 * e1 - e2 + d[k];
    b2 = b1;
    b1 = b0;
    e2 = e1;
    e1 = e0;
  }
  return {t * b1 - b2 + c[0], t * e1 - e2 + d[0]};
}

// Large-argument expansion coefficients c_k = prod_{j<=k} (4 nu^2 - (2j-1)^2) / (8j)
// for the orders used by the likelihood.
constexpr int kHankelOrders = 16;
constexpr int kHankelTerms = 64;

struct HankelTable {
  std::array<std::array<double, kHankelTerms>, kHankelOrders> c{};
  HankelTable() {
    for (int nu = 0; nu < kHankelOrders; ++nu) {
      const double mu = 4.0 * nu * nu;
      double v = 1.0;
      c[nu][0] = 1.0;
      for (int k = 1; k < kHankelTerms; ++k) {
        const double odd = 2.0 * k - 1.0;
        v *= (mu - odd * odd) / (8.0 * k);
        c[nu][k] = v;
      }
    }
  }
};

const HankelTable& hankel_table() {
  static const HankelTable table;
  return table;
}

[[noreturn, gnu::cold]] void bad_argument(double z) {
  throw std::domain_error("bessel: argument must be finite and > 0, got " + std::to_string(z));
}

inline void check_argument(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) [[unlikely]] bad_argument(z);
}

int checked_order(double nu) {
  if (!(nu >= 0.0) || nu != std::floor(nu) || nu > 1e6) {
    throw std::domain_error("bessel: order must be a non-negative integer, got " + std::to_string(nu));
  }
  return static_cast<int>(nu);
}

// Below this argument the power series is used, above it the large-z
// expansion. The nu^2/2 term keeps the asymptotic series well inside its
// useful range for higher orders.
double series_limit(int nu) {
  return std::max(20.0, 0.5 * static_cast<double>(nu) * static_cast<double>(nu));
}

// Power series sum_k a_k with a_k = q^k nu! / (k! (k+nu)!), q = z^2/4, and the
// companion sum_k a_k / (k+nu+1) that yields the next order. Sums may be
// rescaled; the common scale is returned through log_scale.
struct SeriesSums {
  double s0;
  double s1;
  double log_scale;
};

SeriesSums power_series(int nu, double z) {
  const double q = 0.25 * z * z;
  const double dnu = nu;
  double a = 1.0;
  double s0 = 1.0;
  double s1 = 1.0 / (dnu + 1.0);
  double log_scale = 0.0;
  const double peak = std::sqrt(q);
  for (int k = 1; k < kMaxTerms; ++k) {
    const double dk = k;
    a *= q / (dk * (dk + dnu));
    s0 += a;
    s1 += a / (dk + dnu + 1.0);
    if (s0 > kRescale) {
      s0 /= kRescale;
      s1 /= kRescale;
      a /= kRescale;
      log_scale += std::log(kRescale);
    }
    if (dk > peak && a < kEps * s0) break;
  }
  return {s0, s1, log_scale};
}

double log_prefactor(int nu, double z) {
  return nu == 0 ? 0.0 : nu * std::log(0.5 * z) - std::lgamma(nu + 1.0);
}

// Correction sum of the large-argument expansion,
//   e^{-z} I_nu(z) sqrt(2 pi z) = 1 + s,
// truncated at the smallest term.
double hankel_correction(int nu, double z) {
  double s = 0.0;
  double last = std::numeric_limits<double>::infinity();
  if (nu < kHankelOrders) {
    const auto& c = hankel_table().c[nu];
    const double step = -1.0 / z;
    double pw = 1.0;
    for (int k = 1; k < kHankelTerms; ++k) {
      pw *= step;
      const double term = c[k] * pw;
      const double mag = std::abs(term);
      if (mag > last) break;
      s += term;
      last = mag;
      if (mag < kEps * std::abs(1.0 + s) || term == 0.0) return s;
    }
    return s;
  }
  const double mu = 4.0 * static_cast<double>(nu) * static_cast<double>(nu);
  double term = 1.0;
  for (int k = 1; k < kMaxTerms; ++k) {
    const double odd = 2.0 * k - 1.0;
    const double next = -term * (mu - odd * odd) / (8.0 * k * z);
    const double mag = std::abs(next);
    if (mag > last) break;
    term = next;
    s += term;
    last = mag;
    if (mag < kEps * std::abs(1.0 + s) || term == 0.0) break;
  }
  return s;
}

double hankel_log_prefactor(double z) {
  return -0.5 * std::log(2.0 * std::numbers::pi * z);
}

double log_scaled_unchecked(int nu, double z) {
  if (z <= series_limit(nu)) {
    const SeriesSums s = power_series(nu, z);
    return log_prefactor(nu, z) + std::log(s.s0) + s.log_scale - z;
  }
  return hankel_log_prefactor(z) + std::log1p(hankel_correction(nu, z));
}

}  // namespace

double log_bessel_i_scaled(int nu, double z) {
  check_argument(z);
  checked_order(nu);
  return log_scaled_unchecked(nu, z);
}

double log_bessel_i(double nu, double z) {
  check_argument(z);
  return log_scaled_unchecked(checked_order(nu), z) + z;
}

double bessel_i_ratio(int a, int b, double z) {
  check_argument(z);
  checked_order(a);
  checked_order(b);
  if (a == b) return 1.0;
  if (z > series_limit(std::max(a, b))) {
    return std::exp(std::log1p(hankel_correction(a, z)) - std::log1p(hankel_correction(b, z)));
  }
  return std::exp(log_scaled_unchecked(a, z) - log_scaled_unchecked(b, z));
}

BesselLogRatio log_bessel_i_with_ratio(int nu, double z) {
  check_argument(z);
  if (nu < 0) throw std::domain_error("bessel: negative order");
  if (nu == 0 && z < kFastLimit) {
    const OrderZeroTable& tab = order_zero_table();
    const int piece = std::min(static_cast<int>(z * (1.0 / kPieceWidth)), kPieces - 1);
    const double t = (z - (piece + 0.5) * kPieceWidth) * (2.0 / kPieceWidth);
    const auto [log_scaled, ratio_over_z] = clenshaw2(tab.log_scaled[piece], tab.ratio_over_z[piece], t);
    const double r = z * ratio_over_z;
    return {log_scaled, r, 1.0 - r};
  }
  if (z <= series_limit(nu + 1)) {
    const SeriesSums s = power_series(nu, z);
    const double r = 0.5 * z * s.s1 / s.s0;
    return {log_prefactor(nu, z) + std::log(s.s0) + s.log_scale - z, r, 1.0 - r};
  }
  const double c0 = std::log1p(hankel_correction(nu, z));
  const double c1 = std::log1p(hankel_correction(nu + 1, z));
  return {hankel_log_prefactor(z) + c0, std::exp(c1 - c0), -std::expm1(c1 - c0)};
}

double bessel_ratio_b(int L, double z) {
  if (L < 1) throw std::domain_error("bessel: L must be >= 1");
  check_argument(z);
  if (L == 1) return bessel_i_ratio(1, 0, z);
  return 0.5 * (bessel_i_ratio(L - 2, L - 1, z) + bessel_i_ratio(L, L - 1, z));
}

double bessel_ratio_b_prime(int L, double z) {
  const double b = bessel_ratio_b(L, z);
  double lead = 0.0;
  if (L == 1) {
    lead = 0.5 * (1.0 + bessel_i_ratio(2, 0, z));
  } else if (L == 2) {
    lead = 0.25 * (3.0 + bessel_i_ratio(3, 1, z));
  } else {
    lead = 0.25 * (2.0 + bessel_i_ratio(L - 3, L - 1, z) + bessel_i_ratio(L + 1, L - 1, z));
  }
  return lead - b * b;
}

BesselEval bessel_eval(int L, double z) {
  if (L < 1) throw std::domain_error("bessel: L must be >= 1");
  return {log_bessel_i(L - 1, z), bessel_ratio_b(L, z), bessel_ratio_b_prime(L, z)};
}

}  // namespace ncreg
