// Criteria on closed-form pieces: derivatives, density laws, tensor maps.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "criteria.hpp"
#include "ncreg/dti.hpp"
#include "ncreg/likelihood.hpp"
#include "ncreg/regression.hpp"
#include "oracles.hpp"
#include "sim.hpp"

using namespace ncreg;

namespace acceptance {

namespace {

using LD = long double;

LD oracle_log_ncchi(LD y, LD mu, LD phi, int L) {
  const LD z = y * mu / phi;
  return L * std::log(y) - std::log(phi) - (L - 1) * std::log(mu) - (y * y + mu * mu) / (2.0L * phi) +
         oracle::log_bessel_i(L - 1, z);
}

// Fourth-order central difference (Richardson on two steps) in long double.
template <class F>
LD fd(F f, LD x, LD h) {
  const auto c = [&](LD s) { return (f(x + s) - f(x - s)) / (2.0L * s); };
  return (4.0L * c(0.5L * h) - c(h)) / 3.0L;
}

double rel(double got, double want, double floor) {
  return std::abs(got - want) / std::max({std::abs(want), floor, 1e-300});
}

double norm_rel(const Mat& got, const Mat& want) { return (got - want).norm() / std::max(want.norm(), 1e-300); }

}  // namespace

bool derivatives() {
  bool pass = true;
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto log_uniform = [&](double lo, double hi) { return lo * std::pow(hi / lo, u01(rng)); };

  for (int L = 1; L <= 4; ++L) {
    double worst[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 1000; ++i) {
      const double y = log_uniform(0.05, 50.0), mu = log_uniform(0.05, 50.0), phi = log_uniform(0.01, 25.0);
      const ObsTerms t = observation_terms(y, mu, phi, NoiseModel::ncchi(L));
      const double hm = 1e-3 * mu, hp = 1e-3 * phi;
      // Error floors: a millionth of the size of the terms each derivative is made of.
      const double s_mu = y / phi + mu / phi + (L - 1) / mu;
      const double s_phi = (y * y + mu * mu) / (phi * phi) + L / phi;
      const double d1mu = static_cast<double>(fd([&](LD m) { return oracle_log_ncchi(y, m, phi, L); }, mu, hm));
      const double d1phi = static_cast<double>(fd([&](LD p) { return oracle_log_ncchi(y, mu, p, L); }, phi, hp));
      // Second derivatives difference the analytic first derivatives, which
      // are checked against the oracle above.
      const double d2mu = static_cast<double>(fd([&](LD m) { return LD(dmu_ncchi(y, {double(m), phi, L}).d1); }, mu, hm));
      const double d2phi =
          static_cast<double>(fd([&](LD p) { return LD(dphi_ncchi(y, {mu, double(p), L}).d1); }, phi, hp));
      const double dmix = static_cast<double>(fd([&](LD p) { return LD(dmu_ncchi(y, {mu, double(p), L}).d1); }, phi, hp));
      worst[0] = std::max(worst[0], rel(t.dmu.d1, d1mu, 1e-6 * s_mu));
      worst[1] = std::max(worst[1], rel(t.dmu.d2, d2mu, 1e-6 * s_mu / mu));
      worst[2] = std::max(worst[2], rel(t.dphi.d1, d1phi, 1e-6 * s_phi));
      worst[3] = std::max(worst[3], rel(t.dphi.d2, d2phi, 1e-6 * s_phi / phi));
      worst[4] = std::max(worst[4], rel(t.dmu_dphi, dmix, 1e-6 * s_mu / phi));
    }
    const double w = *std::max_element(worst, worst + 5);
    pass &= report("NC-chi L=" + std::to_string(L) + " d/dmu, d2/dmu2, d/dphi, d2/dphi2, d2/dmu dphi (1000 points)",
                   w <= 1e-5,
                   "max rel err " + fmt(worst[0]) + ", " + fmt(worst[1]) + ", " + fmt(worst[2]) + ", " +
                       fmt(worst[3]) + ", " + fmt(worst[4]));
  }

  // Chain rule through the log links: X'g and X'(D1 + D2)X for both blocks.
  {
    std::normal_distribution<double> nd;
    double wg[2] = {0, 0}, wh[2] = {0, 0};
    for (int i = 0; i < 1000; ++i) {
      const int L = 1 + i % 4, n = 25;
      const NoiseModel model = L == 1 ? NoiseModel::rician() : NoiseModel::ncchi(L);
      const Mat X = sim::random_design(n, 2, rng);
      const Mat Z = sim::random_design(n, 1, rng);
      Vec beta(3), alpha(2);
      beta << std::log(log_uniform(1.0, 20.0)), 0.3 * nd(rng), 0.3 * nd(rng);
      alpha << std::log(log_uniform(0.5, 5.0)), 0.3 * nd(rng);
      Vec y(n);
      for (int k = 0; k < n; ++k) {
        const double mu = std::exp(X.row(k).dot(beta)), phi = std::exp(Z.row(k).dot(alpha));
        y(k) = std::max(sim::ncchi_draw(mu, std::sqrt(phi), L, rng), 1e-3);
      }
      const ObservationSet obs(y, X, Z);
      const auto total = [&](const Vec& b, const Vec& a) {
        LD s = 0.0L;
        for (int k = 0; k < n; ++k)
          s += oracle_log_ncchi(y(k), std::exp(LD(X.row(k).dot(b))), std::exp(LD(Z.row(k).dot(a))), L);
        return s;
      };
      for (int blk = 0; blk < 2; ++blk) {
        const Vec& c = blk == 0 ? beta : alpha;
        const auto grad_at = [&](const Vec& v) {
          const ParamBlock pb = ParamBlock::full(blk == 0 ? v : beta), pa = ParamBlock::full(blk == 0 ? alpha : v);
          return blk == 0 ? grad_hess_beta(obs, pb, pa, model, HessKind::Observed)
                          : grad_hess_alpha(obs, pb, pa, model, HessKind::Observed);
        };
        const GradHess gh = grad_at(c);
        Vec g_fd(c.size());
        Mat h_fd(c.size(), c.size());
        for (Eigen::Index j = 0; j < c.size(); ++j) {
          const auto along = [&](LD t) {
            Vec v = c;
            v(j) = static_cast<double>(t);
            return blk == 0 ? total(v, alpha) : total(beta, v);
          };
          g_fd(j) = static_cast<double>(fd(along, c(j), 1e-3L));
          for (Eigen::Index k = 0; k < c.size(); ++k) {
            h_fd(k, j) = static_cast<double>(fd(
                [&](LD t) {
                  Vec v = c;
                  v(j) = static_cast<double>(t);
                  return LD(grad_at(v).grad(k));
                },
                c(j), 1e-4L));
          }
        }
        wg[blk] = std::max(wg[blk], norm_rel(gh.grad, g_fd));
        wh[blk] = std::max(wh[blk], norm_rel(gh.hess, h_fd));
      }
    }
    pass &= report("chain rule gradient X'g, beta and alpha blocks (1000 points)", std::max(wg[0], wg[1]) <= 1e-5,
                   "max norm-wise rel err " + fmt(wg[0]) + ", " + fmt(wg[1]));
    pass &= report("chain rule Hessian X'(D1+D2)X, beta and alpha blocks (1000 points)",
                   std::max(wh[0], wh[1]) <= 1e-5, "max norm-wise rel err " + fmt(wh[0]) + ", " + fmt(wh[1]));
  }

  // d beta / d omega against differences of D = L L' built directly.
  {
    std::normal_distribution<double> nd;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      Vec6 w;
      for (int k = 0; k < 6; ++k) w(k) = (k < 3 ? -3.0 : 0.0) + nd(rng);
      const auto beta_direct = [](const Eigen::Matrix<LD, 6, 1>& o) {
        Eigen::Matrix<LD, 3, 3> l = Eigen::Matrix<LD, 3, 3>::Zero();
        l(0, 0) = std::exp(o(0));
        l(1, 1) = std::exp(o(1));
        l(2, 2) = std::exp(o(2));
        l(1, 0) = o(3);
        l(2, 1) = o(4);
        l(2, 0) = o(5);
        const Eigen::Matrix<LD, 3, 3> d = l * l.transpose();
        Eigen::Matrix<LD, 6, 1> b;
        b << d(0, 0), d(1, 1), d(2, 2), d(0, 1), d(1, 2), d(0, 2);
        return b;
      };
      Mat6 j_fd;
      for (int k = 0; k < 6; ++k) {
        for (int r = 0; r < 6; ++r) {
          j_fd(r, k) = static_cast<double>(fd(
              [&](LD t) {
                Eigen::Matrix<LD, 6, 1> o = w.cast<LD>();
                o(k) = t;
                return beta_direct(o)(r);
              },
              LD(w(k)), 1e-4L));
        }
      }
      worst = std::max(worst, norm_rel(domega_jacobian(w), j_fd));
    }
    pass &= report("DTI Jacobian d beta / d omega (1000 points)", worst <= 1e-5, "max norm-wise rel err " + fmt(worst));
  }
  return pass;
}

bool density_laws() {
  bool pass = true;
  double worst_norm = 0.0, worst_m2 = 0.0;
  for (int L = 1; L <= 4; ++L) {
    for (double mu : {0.3, 1.0, 3.0, 10.0, 40.0}) {
      for (double phi : {0.25, 1.0, 4.0}) {
        const ObsParams p{mu, phi, L};
        const auto dens = [&](double y) { return y > 0.0 ? std::exp(log_density_ncchi(y, p)) : 0.0; };
        const double sd = std::sqrt(phi);
        const double hi = std::sqrt(mu * mu + 2.0 * L * phi) + 40.0 * sd;
        const double mid = std::max(0.0, mu - 10.0 * sd);
        const auto integral = [&](const std::function<double(double)>& f) {
          return (mid > 0.0 ? oracle::integrate(f, 0.0, mid) : 0.0) + oracle::integrate(f, mid, std::max(mid, mu) + 10.0 * sd) +
                 oracle::integrate(f, std::max(mid, mu) + 10.0 * sd, hi);
        };
        const double m0 = integral(dens);
        const double m2 = integral([&](double y) { return y * y * dens(y); });
        worst_norm = std::max(worst_norm, std::abs(m0 - 1.0));
        worst_m2 = std::max(worst_m2, std::abs(m2 - (mu * mu + 2.0 * L * phi)) / (mu * mu + 2.0 * L * phi));
      }
    }
  }
  pass &= report("NC-chi normalization, L = 1..4, 15 (mu, phi) pairs each", worst_norm <= 1e-8,
                 "max |integral - 1| = " + fmt(worst_norm));
  pass &= report("second moment mu^2 + 2 L phi", worst_m2 <= 1e-6, "max rel err " + fmt(worst_m2));

  double worst_rice = 0.0;
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const double y = 0.05 + 20.0 * u01(rng), mu = 0.05 + 20.0 * u01(rng), phi = 0.5 + 10.0 * u01(rng);
    const double lib = log_density_ncchi(y, {mu, phi, 1});
    const double ref = oracle::rice_log_density(y, mu, phi);
    worst_rice = std::max(worst_rice, std::abs(std::expm1(lib - ref)));
  }
  pass &= report("L = 1 density equals the Rice density (2000 points)", worst_rice <= 1e-12,
                 "max relative density difference " + fmt(worst_rice));
  return pass;
}

bool tensor_parameterization() {
  bool pass = true;
  std::mt19937_64 rng(808);
  std::normal_distribution<double> nd;
  double min_ev = std::numeric_limits<double>::infinity();
  double worst_rt = 0.0;
  int non_pd = 0;
  for (int i = 0; i < 10000; ++i) {
    Vec6 w;
    // Half the draws around diffusivities of tissue, half on a wide scale.
    for (int k = 0; k < 6; ++k) w(k) = i % 2 ? 2.0 * nd(rng) : (k < 3 ? -3.5 + 0.5 * nd(rng) : 0.01 * nd(rng));
    const TensorOmega t = tensor_from_omega(w);
    const double ev = Eigen::SelfAdjointEigenSolver<Mat3>(t.D).eigenvalues().minCoeff();
    if (!(ev > 0.0)) ++non_pd;
    min_ev = std::min(min_ev, ev / t.D.norm());
    // D -> omega -> D, relative to the size of D.
    const Mat3 back = tensor_from_omega(omega_from_tensor(t.D)).D;
    worst_rt = std::max(worst_rt, (back - t.D).cwiseAbs().maxCoeff() / t.D.cwiseAbs().maxCoeff());
  }
  pass &= report("10^4 random omega give positive definite tensors", non_pd == 0,
                 std::to_string(non_pd) + " not PD, smallest eigenvalue / |D| " + fmt(min_ev));
  pass &= report("tensor -> omega -> tensor round trip", worst_rt <= 1e-10, "max error " + fmt(worst_rt));

  double worst_fa = 0.0, worst_md = 0.0;
  for (int i = 0; i < 10000; ++i) {
    Mat3 a;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a(r, c) = nd(rng);
    const Mat3 D = 1e-3 * (a * a.transpose() + 0.05 * Mat3::Identity());
    const Mat3 R = Eigen::Quaterniond(nd(rng), nd(rng), nd(rng), nd(rng)).normalized().toRotationMatrix();
    const Mat3 Dr = R * D * R.transpose();
    const FaMd f0 = fa_md(tensor_eigenvalues(D)), f1 = fa_md(tensor_eigenvalues(0.5 * (Dr + Dr.transpose())));
    worst_fa = std::max(worst_fa, std::abs(f0.fa - f1.fa));
    worst_md = std::max(worst_md, std::abs(f0.md - f1.md) / f0.md);
  }
  pass &= report("FA invariant under rotation (10^4 tensors)", worst_fa <= 1e-10, "max |dFA| " + fmt(worst_fa));
  pass &= report("MD invariant under rotation", worst_md <= 1e-10, "max rel |dMD| " + fmt(worst_md));
  return pass;
}

}  // namespace acceptance
