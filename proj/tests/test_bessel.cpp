#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ncreg/bessel.hpp"
#include "oracles.hpp"

using namespace ncreg;

namespace {

std::vector<double> logspace(double lo, double hi, int n) {
  std::vector<double> out;
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < n; ++i) out.push_back(std::pow(10.0, a + (b - a) * i / (n - 1)));
  return out;
}

}  // namespace

TEST_CASE("log_bessel_i small-argument limits") {
  CHECK(log_bessel_i(0, 1e-300) == doctest::Approx(0.0).epsilon(1e-15));
  // ln I_1(z) ~ ln(z/2) as z -> 0
  CHECK(log_bessel_i(1, 1e-300) == doctest::Approx(std::log(0.5e-300)).epsilon(1e-14));
  CHECK(log_bessel_i(1, 1e-300) < -690.0);
}

TEST_CASE("log_bessel_i at z = 1 matches series") {
  const double want = std::log(1.2660658777520082);
  CHECK(oracle::log_bessel_i_series(0, 1.0) == doctest::Approx(want).epsilon(1e-15));
  CHECK(log_bessel_i(0, 1.0) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("log_bessel_i agrees with the power series oracle") {
  for (int nu = 0; nu <= 10; ++nu) {
    for (double z : logspace(1e-3, 20.0, 60)) {
      const double want = oracle::log_bessel_i_series(nu, z);
      CAPTURE(nu);
      CAPTURE(z);
      CHECK(oracle::rel_err(log_bessel_i(nu, z), want, 1e-3) <= 1e-12);
    }
  }
}

TEST_CASE("series and asymptotic branches overlap") {
  for (int nu = 0; nu <= 10; ++nu) {
    for (double z : logspace(15.0, 700.0, 80)) {
      const double want = oracle::log_bessel_i_series(nu, z);
      CAPTURE(nu);
      CAPTURE(z);
      CHECK(oracle::rel_err(log_bessel_i(nu, z), want) <= 1e-13);
    }
  }
}

TEST_CASE("log_bessel_i is finite up to 1e6") {
  for (int nu = 0; nu <= 12; ++nu) {
    for (double z : logspace(1e-6, 1e6, 50)) {
      const double v = log_bessel_i(nu, z);
      CHECK(std::isfinite(v));
      const auto fused = log_bessel_i_with_ratio(nu, z);
      CHECK(std::isfinite(fused.log_i_scaled));
      CHECK(std::isfinite(fused.ratio));
    }
  }
  // leading behaviour z - ln(2 pi z)/2 + 1/(8z)
  const double lead = 1e6 - 0.5 * std::log(2.0 * M_PI * 1e6) + 1.0 / 8e6;
  CHECK(log_bessel_i(0, 1e6) == doctest::Approx(lead).epsilon(1e-15));
}

TEST_CASE("domain errors") {
  CHECK_THROWS_AS(log_bessel_i(0, 0.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(0, -1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(-1, 1.0), std::domain_error);
  CHECK_THROWS_AS(log_bessel_i(1.5, 1.0), std::domain_error);
  CHECK_THROWS_AS(bessel_ratio_b(1, 0.0), std::domain_error);
  CHECK_THROWS_AS(bessel_ratio_b(0, 1.0), std::domain_error);
  CHECK_THROWS_AS(bessel_ratio_b_prime(2, -3.0), std::domain_error);
}

TEST_CASE("ratio B(z)") {
  CHECK(bessel_ratio_b(1, 1e-12) == doctest::Approx(0.0).epsilon(1e-10));
  const double want = static_cast<double>(oracle::bessel_i_series(1, 1.0L) / oracle::bessel_i_series(0, 1.0L));
  // I_1(1) / I_0(1) = 0.4463899658...
  CHECK(want == doctest::Approx(0.44639).epsilon(1e-5));
  CHECK(bessel_ratio_b(1, 1.0) == doctest::Approx(want).epsilon(1e-14));
  CHECK(std::abs(bessel_ratio_b(1, 1e5) - 1.0) < 1e-4);
  for (int L = 1; L <= 8; ++L) CHECK(bessel_ratio_b(L, 1e6) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("ratio B(z) against series for L >= 2") {
  for (int L = 2; L <= 6; ++L) {
    for (double z : {0.01, 0.5, 3.0, 12.0}) {
      const long double num = oracle::bessel_i_series(L - 2, z) + oracle::bessel_i_series(L, z);
      const double want = static_cast<double>(num / (2.0L * oracle::bessel_i_series(L - 1, z)));
      CHECK(oracle::rel_err(bessel_ratio_b(L, z), want) <= 1e-13);
    }
  }
}

TEST_CASE("B'(z) small-z limit and finite-difference checks") {
  CHECK(bessel_ratio_b_prime(1, 1e-10) == doctest::Approx(0.5).epsilon(1e-9));
  const auto b1 = [](double z) { return bessel_ratio_b(1, z); };
  CHECK(oracle::rel_err(bessel_ratio_b_prime(1, 1.0), oracle::derivative(b1, 1.0, 1e-3)) <= 1e-6);
  const auto b3 = [](double z) { return bessel_ratio_b(3, z); };
  CHECK(oracle::rel_err(bessel_ratio_b_prime(3, 2.0), oracle::derivative(b3, 2.0, 2e-3)) <= 1e-6);
}

TEST_CASE("B'(z) matches finite differences over orders and a wide z range") {
  for (int L = 1; L <= 8; ++L) {
    const auto b = [L](double z) { return bessel_ratio_b(L, z); };
    for (double z : logspace(1e-3, 1e4, 57)) {
      const double fd = oracle::derivative(b, z, 1e-3 * z);
      CAPTURE(L);
      CAPTURE(z);
      CHECK(oracle::rel_err(bessel_ratio_b_prime(L, z), fd) <= 1e-6);
    }
  }
}

TEST_CASE("recurrence I_{nu-1} - I_{nu+1} = (2 nu / z) I_nu") {
  for (int nu = 1; nu <= 6; ++nu) {
    for (double z : logspace(1e-2, 1e3, 41)) {
      const double lhs = bessel_i_ratio(nu - 1, nu, z) - bessel_i_ratio(nu + 1, nu, z);
      CHECK(oracle::rel_err(lhs, 2.0 * nu / z) <= 1e-10);
    }
  }
}

TEST_CASE("fused kernel agrees with the separate evaluations") {
  for (int L = 1; L <= 6; ++L) {
    for (double z : logspace(1e-4, 1e5, 37)) {
      const auto f = log_bessel_i_with_ratio(L - 1, z);
      CHECK(oracle::rel_err(f.log_i_scaled + z, log_bessel_i(L - 1, z), 1.0) <= 1e-13);
      CHECK(oracle::rel_err(f.ratio + (L - 1) / z, bessel_ratio_b(L, z)) <= 1e-12);
      CHECK(f.one_minus_ratio == doctest::Approx(1.0 - f.ratio).epsilon(1e-10));
      const auto e = bessel_eval(L, z);
      CHECK(e.ratio_b == bessel_ratio_b(L, z));
    }
  }
}

TEST_CASE("order-0 fused kernel matches the series on a dense grid below 40") {
  // Includes the piece boundaries (multiples of 1/4) and points in between.
  for (int i = 1; i <= 1600; ++i) {
    for (double z : {i * 0.025, i * 0.025 - 1e-9, i * 0.025 * 0.999}) {
      const auto f = log_bessel_i_with_ratio(0, z);
      const long double i0 = oracle::bessel_i_series(0, z);
      const long double i1 = oracle::bessel_i_series(1, z);
      const double want_log = static_cast<double>(std::log(i0) - static_cast<long double>(z));
      const double want_r = static_cast<double>(i1 / i0);
      CHECK(std::abs(f.log_i_scaled - want_log) <= 4e-15 * std::max(1.0, std::abs(want_log)));
      CHECK(oracle::rel_err(f.ratio, want_r) <= 4e-15);
    }
  }
  for (double z : {1e-300, 1e-12, 1e-6}) {
    const auto f = log_bessel_i_with_ratio(0, z);
    // I1/I0 = z/2 (1 - z^2/8 + ...), ln I0 = z^2/4 - z^4/64 + ...
    CHECK(oracle::rel_err(f.ratio, 0.5 * z * (1.0 - z * z / 8.0)) <= 1e-14);
    CHECK(f.log_i_scaled == doctest::Approx(-z + 0.25 * z * z).epsilon(1e-14));
  }
}
