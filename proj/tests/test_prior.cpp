#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <stdexcept>

#include "ncreg/prior.hpp"
#include "oracles.hpp"

using namespace ncreg;

namespace {

Mat random_spd(int k, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  Mat a(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) a(i, j) = nd(rng);
  return a * a.transpose() + 0.1 * Mat::Identity(k, k);
}

// Joint normal log-density evaluated from the covariance directly.
double mvn_logpdf(const Vec& x, const Mat& cov) {
  const Eigen::LDLT<Mat> ldlt(cov);
  const double log_det = ldlt.vectorD().array().log().sum();
  return -0.5 * (x.size() * std::log(2.0 * M_PI) + log_det + x.dot(ldlt.solve(x)));
}

}  // namespace

TEST_CASE("intercept prior from a log-normal") {
  const InterceptPrior a = intercept_prior_from_lognormal(1.0, 1e-200);
  CHECK(a.m == doctest::Approx(0.0));
  CHECK(a.s2 == doctest::Approx(0.0));

  const InterceptPrior b = intercept_prior_from_lognormal(2.0, 1.0);
  CHECK(b.s2 == doctest::Approx(std::log(1.25)).epsilon(1e-14));
  CHECK(b.s2 == doctest::Approx(0.223144).epsilon(1e-6));
  CHECK(b.m == doctest::Approx(0.581575).epsilon(1e-6));

  const double e = std::exp(1.0);
  const InterceptPrior c = intercept_prior_from_lognormal(e, e * std::sqrt(e - 1.0));
  CHECK(c.s2 == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(c.m == doctest::Approx(0.5).epsilon(1e-14));

  CHECK_THROWS_AS(intercept_prior_from_lognormal(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(intercept_prior_from_lognormal(1.0, -1.0), std::domain_error);
}

TEST_CASE("log-normal back-transform recovers m*") {
  const InterceptPrior p = intercept_prior_from_lognormal(3.0, 1.5);
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd(p.m, std::sqrt(p.s2));
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += std::exp(nd(rng));
  CHECK(std::abs(sum / n - 3.0) <= 3.0 * 1.5 / std::sqrt(n));
}

TEST_CASE("unit-information slope covariance") {
  Mat X = Mat::Zero(4, 2);
  X(0, 0) = 1.0;
  X(1, 1) = 1.0;
  const Mat cov = unit_info_slope_cov(X, Vec::Ones(4), 4.0);
  CHECK((cov - 4.0 * Mat::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);

  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Mat R(30, 3);
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 3; ++j) R(i, j) = nd(rng);
  Vec d(30);
  for (int i = 0; i < 30; ++i) d(i) = 0.5 + std::abs(nd(rng));
  const Mat c30 = unit_info_slope_cov(R, d, 30.0);
  const Mat check = c30 * (R.transpose() * d.asDiagonal() * R) / 30.0;
  CHECK((check - Mat::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((unit_info_slope_cov(R, d, 60.0) - 2.0 * c30).cwiseAbs().maxCoeff() <= 1e-12 * c30.cwiseAbs().maxCoeff());

  CHECK_THROWS_AS(unit_info_slope_cov(Mat::Zero(4, 2), Vec::Ones(4), 1.0), std::runtime_error);
}

TEST_CASE("conditional variable-selection prior") {
  std::mt19937_64 rng(1);
  const Mat s = random_spd(4, rng);
  CHECK(conditional_vs_prior(s, {1, 1, 1, 1}) == s);

  const double rho = 0.6;
  Mat two(2, 2);
  two << 1.0, rho, rho, 1.0;
  const Mat cond = conditional_vs_prior(two, {1, 0});
  REQUIRE(cond.rows() == 1);
  CHECK(cond(0, 0) == doctest::Approx(1.0 - rho * rho).epsilon(1e-14));

  CHECK(conditional_vs_prior(s, {0, 0, 0, 0}).size() == 0);

  // symmetric positive definite for random inputs and subsets
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + trial % 5;
    const Mat full = random_spd(k, rng);
    std::vector<std::uint8_t> incl(k);
    for (auto& v : incl) v = static_cast<std::uint8_t>(rng() & 1U);
    incl[trial % k] = 1;
    const Mat c = conditional_vs_prior(full, incl);
    CHECK((c - c.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Eigen::SelfAdjointEigenSolver<Mat>(c).eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("log prior") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> nd;
  const Mat cov = random_spd(4, rng);
  const IndPrior prior = IndPrior::make(0.3, 0.7, cov, 0.5);

  // indicator term is -p ln 2 when pi = 1/2
  ParamBlock none = ParamBlock::intercept_only(0.3, 4);
  CHECK(log_prior(none, prior) == doctest::Approx(-0.5 * std::log(2.0 * M_PI * 0.7) - 4.0 * std::log(2.0)).epsilon(1e-14));

  // all included: unconditioned N(0, cov)
  Vec coef(5);
  for (int j = 0; j < 5; ++j) coef(j) = nd(rng);
  const ParamBlock full = ParamBlock::full(coef);
  const double intercept = -0.5 * std::log(2.0 * M_PI * 0.7) - 0.5 * std::pow(coef(0) - 0.3, 2) / 0.7;
  CHECK(log_prior(full, prior) ==
        doctest::Approx(intercept + mvn_logpdf(coef.tail(4), cov) - 4.0 * std::log(2.0)).epsilon(1e-12));

  // subsets: Schur-complement normal, evaluated independently
  for (int trial = 0; trial < 50; ++trial) {
    ParamBlock b = full;
    for (int j = 0; j < 4; ++j) {
      b.incl[j] = static_cast<std::uint8_t>(rng() & 1U);
      if (!b.incl[j]) b.coef(j + 1) = 0.0;
    }
    std::vector<int> in;
    for (int j = 0; j < 4; ++j)
      if (b.incl[j]) in.push_back(j);
    double want = intercept - 4.0 * std::log(2.0);
    if (!in.empty()) {
      Vec x(in.size());
      for (std::size_t j = 0; j < in.size(); ++j) x(j) = b.coef(in[j] + 1);
      want += mvn_logpdf(x, conditional_vs_prior(cov, b.incl));
    }
    CHECK(oracle::rel_err(log_prior(b, prior), want, 1.0) <= 1e-10);
  }

  const IndPrior lop = IndPrior::make(0.0, 1.0, Mat::Identity(2, 2), 0.2);
  ParamBlock two = ParamBlock::intercept_only(0.0, 2);
  two.incl[1] = 1;
  two.coef(2) = 0.4;
  CHECK(log_prior(two, lop) == doctest::Approx(-std::log(2.0 * M_PI) - 0.08 + std::log(0.2) + std::log(0.8)).epsilon(1e-14));

  CHECK_THROWS_AS(log_prior(ParamBlock::intercept_only(0.0, 3), prior), std::invalid_argument);
}

TEST_CASE("log prior derivatives") {
  std::mt19937_64 rng(4);
  const IndPrior prior = IndPrior::make(-0.2, 0.5, random_spd(3, rng), 0.5);
  ParamBlock b = ParamBlock::full(Vec{{0.4, 0.1, 0.0, -0.3}});
  b.incl[1] = 0;
  const GradHess gh = log_prior_grad_hess(b, prior);
  const std::vector<int> act = b.active();
  REQUIRE(gh.grad.size() == 3);
  for (std::size_t j = 0; j < act.size(); ++j) {
    const auto f = [&](double t) {
      ParamBlock c = b;
      c.coef(act[j]) = t;
      return log_prior(c, prior);
    };
    CHECK(oracle::rel_err(gh.grad(j), oracle::derivative(f, b.coef(act[j]), 1e-3), 1e-8) <= 1e-8);
    CHECK(oracle::rel_err(gh.hess(j, j), oracle::second_derivative(f, b.coef(act[j]), 1e-2), 1e-6) <= 1e-6);
  }
}

TEST_CASE("DTI prior from b = 0 measurements") {
  CHECK_THROWS_AS(dti_prior_from_b0(Vec::Ones(4)), std::domain_error);
  CHECK_THROWS_AS(dti_prior_from_b0(Vec::Ones(1)), std::invalid_argument);

  const Vec y{{100.0, 120.0, 80.0, 100.0}};
  const DtiPrior p = dti_prior_from_b0(y);
  CHECK(p.m_beta == doctest::Approx(std::log(100.0)).epsilon(1e-15));
  CHECK(p.m_alpha == doctest::Approx(std::log(800.0 / 3.0)).epsilon(1e-15));
  CHECK(p.d == 0.1);
  CHECK(p.c == 100.0);

  const DtiPrior k = dti_prior_from_b0(7.0 * y);
  CHECK(k.m_beta - p.m_beta == doctest::Approx(std::log(7.0)).epsilon(1e-13));
  CHECK(k.m_alpha - p.m_alpha == doctest::Approx(2.0 * std::log(7.0)).epsilon(1e-13));

  const IndPrior bp = p.beta_prior(6);
  CHECK(bp.s2 == 0.1);
  CHECK(bp.slope_cov == 100.0 * Mat::Identity(6, 6));
}
