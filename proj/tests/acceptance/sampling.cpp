// Criteria that run the samplers: exactness against a grid posterior,
// parameter recovery, and the DTI efficiency and bias comparisons.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <vector>

#include "criteria.hpp"
#include "ncreg/dti.hpp"
#include "ncreg/sampler.hpp"
#include "oracles.hpp"
#include "sim.hpp"

using namespace ncreg;

namespace acceptance {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

double sample_var(const Vec& x) {
  const double m = x.mean();
  return (x.array() - m).square().sum() / static_cast<double>(x.size() - 1);
}

// Tensor with the given eigenvalues and a random orientation.
Mat3 random_tensor(const Vec3& ev, std::mt19937_64& rng) {
  std::normal_distribution<double> nd;
  const Mat3 r = Eigen::Quaterniond(nd(rng), nd(rng), nd(rng), nd(rng)).normalized().toRotationMatrix();
  return r * ev.asDiagonal() * r.transpose();
}

}  // namespace

namespace {

struct ExactnessRun {
  oracle::RiceGrid grid;
  PosteriorDraws draws;
  double tail = 0.0;  // grid mass more than 8 core sd below the mode region
};

// Rician intercept-only data with mu = 10, priors N(2, 1) on beta_0 and
// N(3, 1) on alpha_0. The grid covers the whole prior-supported range with
// fine cells around the bulk, so a low-mu tail is part of the oracle.
ExactnessRun exactness_run(double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(303);
  const int n = 200;
  std::vector<double> y(n);
  for (double& v : y) v = sim::rician_draw(10.0, sigma, rng);
  const double mb = 2.0, vb = 1.0, ma = 3.0, va = 1.0;

  const oracle::RiceGrid coarse = oracle::rice_intercept_grid(y, mb, vb, ma, va, 0.0, 4.0, 0.0, 6.0, 120, 120);
  const double cb = coarse.mean_b(), sb = std::sqrt(coarse.var_b());
  const double ca = coarse.mean_a(), sa = std::sqrt(coarse.var_a());
  ExactnessRun r;
  r.grid = oracle::rice_intercept_grid(
      y, mb, vb, ma, va, oracle::GridAxis::composite(mb - 10.0, cb - 8 * sb, cb + 8 * sb, mb + 10.0, 200, 300),
      oracle::GridAxis::composite(ma - 10.0, ca - 8 * sa, ca + 8 * sa, ma + 10.0, 100, 200));
  for (std::size_t i = 0; i < r.grid.b.size(); ++i)
    if (r.grid.b[i] < cb - 8 * sb)
      for (std::size_t j = 0; j < r.grid.a.size(); ++j) r.tail += r.grid.mass[i * r.grid.a.size() + j];

  const Vec yv = Eigen::Map<const Vec>(y.data(), n);
  const ObservationSet obs(yv, Mat::Ones(n, 1), Mat::Ones(n, 1));
  const IndPrior bp = IndPrior::make(mb, vb, Mat(0, 0)), ap = IndPrior::make(ma, va, Mat(0, 0));
  const Target target = Target::regression(obs, bp, ap, NoiseModel::rician(), false);
  SamplerConfig cfg;
  cfg.n_burn = 1000;
  cfg.n_iter = 51000;
  cfg.seed = seed;
  r.draws = run_mwg(target, cfg, default_initial_state(obs));
  return r;
}

}  // namespace

bool sampler_exactness() {
  const char* names[4] = {"mean beta_0", "mean alpha_0", "var beta_0", "var alpha_0"};
  const auto compare = [&](const ExactnessRun& r, const std::string& label, bool scored) {
    const PosteriorDraws& d = r.draws;
    const double got[4] = {d.beta.col(0).mean(), d.alpha.col(0).mean(), sample_var(d.beta.col(0)),
                           sample_var(d.alpha.col(0))};
    const double want[4] = {r.grid.mean_b(), r.grid.mean_a(), r.grid.var_b(), r.grid.var_a()};
    bool ok = true;
    for (int k = 0; k < 4; ++k) {
      const double e = std::abs(got[k] - want[k]) / std::abs(want[k]);
      const std::string detail =
          "MwG " + fmt(got[k], "%.6g") + " vs grid " + fmt(want[k], "%.6g") + ", rel err " + fmt(e);
      if (scored) {
        ok &= report(label + " " + names[k], e <= 0.02, detail);
      } else {
        std::cout << "  info  " << label << " " << names[k] << ": " << detail << std::endl;
      }
    }
    std::cout << "  info  " << label << ": " << d.beta.rows() << " retained draws, acceptance "
              << fmt(d.accept_rate_beta) << " / " << fmt(d.accept_rate_alpha) << ", grid mass in the low-mu tail "
              << fmt(r.tail) << std::endl;
    return ok;
  };
  const bool pass = compare(exactness_run(4.0, 17), "SNR 2.5", true);
  // At SNR 2 a tail of about 1e-3 posterior mass near mu = 0 carries a fifth
  // of var(beta_0); 5e4 draws cannot resolve it, so this run is reported only.
  compare(exactness_run(5.0, 17), "SNR 2 (reported, not scored)", false);
  return pass;
}

bool parameter_recovery() {
  const int n = 500;
  Vec beta(4), alpha(3);
  // mu about 10 and sigma about 2 at the covariate means: SNR about 5.
  beta << std::log(10.0), 0.2, -0.15, 0.1;
  alpha << std::log(4.0), 0.4, -0.3;
  int good = 0;
  std::vector<std::string> misses;
  for (int rep = 0; rep < 20; ++rep) {
    std::mt19937_64 rng(stream_seed(404, static_cast<std::uint64_t>(rep)));
    const Mat X = sim::random_design(n, 3, rng);
    const Mat Z = sim::random_design(n, 2, rng);
    Vec y(n);
    for (int i = 0; i < n; ++i) {
      y(i) = sim::rician_draw(std::exp(X.row(i).dot(beta)), std::exp(0.5 * Z.row(i).dot(alpha)), rng);
    }
    const ObservationSet obs(y, X, Z);
    const Target target = Target::regression(obs, sim::vague_prior(0.0, 100.0, 3, 100.0),
                                             sim::vague_prior(0.0, 100.0, 2, 100.0), NoiseModel::rician(), false);
    SamplerConfig cfg;
    cfg.seed = stream_seed(405, static_cast<std::uint64_t>(rep));
    const PosteriorDraws d = run_mwg(target, cfg, default_initial_state(obs));
    bool all = true;
    const auto check = [&](const Mat& draws, const Vec& truth, const char* name) {
      for (Eigen::Index j = 0; j < truth.size(); ++j) {
        const double m = draws.col(j).mean(), s = std::sqrt(sample_var(draws.col(j)));
        if (std::abs(m - truth(j)) > 3.0 * s) {
          all = false;
          misses.push_back("rep " + std::to_string(rep) + " " + name + std::to_string(j) + " z=" +
                           fmt((m - truth(j)) / s, "%.2f"));
        }
      }
    };
    check(d.beta, beta, "beta");
    check(d.alpha, alpha, "alpha");
    good += all;
  }
  std::string detail = std::to_string(good) + " of 20 replications recover all 7 coefficients within 3 sd";
  for (const auto& m : misses) detail += "; " + m;
  return report("heteroscedastic Rician, n=500, p=3, q=2, SNR about 5", good >= 18, detail);
}

bool dti_efficiency() {
  // 10 b = 0 plus 3 shells of 180 directions: n = 550.
  const GradientScheme scheme = sim::multi_shell_scheme(10, {1000.0, 2000.0, 3000.0}, 180);
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  SamplerConfig cfg;
  cfg.n_iter = 6000;
  cfg.n_burn = 1000;
  DtiFitConfig fc;
  std::vector<double> if_mwg, if_rwm;
  int faster = 0, voxels = 0;
  for (int v = 0; v < 20; ++v) {
    const double md = 0.6e-3 + 0.4e-3 * u01(rng), aniso = 0.8 * u01(rng);
    const Vec3 ev(md * (1.0 + aniso), md * (1.0 - 0.5 * aniso), md * (1.0 - 0.5 * aniso));
    const Vec y = sim::dwi_signal(scheme, random_tensor(ev, rng), 1000.0, 1000.0 / (15.0 + 15.0 * u01(rng)), rng);
    const DtiProblem p = dti_problem(y, scheme, NoiseModel::rician(), fc);
    double block_if[2], per_minute[2];
    for (int s = 0; s < 2; ++s) {
      SamplerConfig c = cfg;
      c.seed = stream_seed(607, static_cast<std::uint64_t>(2 * v + s));
      const PosteriorDraws d =
          s == 0 ? run_mwg(p.target, c, p.init) : run_rwm(p.target, c, p.init, RwmCovariance::ScaledNegInvHessian);
      const EfficiencyReport r = efficiency_report(d);
      // Block inefficiency: the slowest-mixing of (beta_0, omega_1..6).
      block_if[s] = r.inefficiency.head(7).maxCoeff();
      per_minute[s] = static_cast<double>(d.beta.rows()) / block_if[s] / (std::max(r.wall_seconds, 1e-9) / 60.0);
    }
    if_mwg.push_back(block_if[0]);
    if_rwm.push_back(block_if[1]);
    faster += per_minute[0] > per_minute[1];
    ++voxels;
  }
  bool pass = report("median beta-block IF, MwG < RWM-cI", median(if_mwg) < median(if_rwm),
                     fmt(median(if_mwg)) + " vs " + fmt(median(if_rwm)));
  pass &= report("MwG independent draws per minute above RWM-cI in >= 80% of voxels", faster >= 16,
                 std::to_string(faster) + " of " + std::to_string(voxels));
  return pass;
}

bool dti_bias() {
  // Low SNR: S0 / sigma = 8, b up to 3000 where the signal sits near the
  // noise floor.
  const GradientScheme scheme = sim::multi_shell_scheme(10, {1000.0, 2000.0, 3000.0}, 60);
  std::vector<int> keep;
  for (int i = 0; i < scheme.size(); ++i)
    if (scheme.b(i) < 2500.0) keep.push_back(i);
  const GradientScheme reduced = scheme.subset(keep);
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  DtiFitConfig fc;
  fc.sampler.n_iter = 3000;
  fc.sampler.n_burn = 1000;
  int md_lower = 0;
  double gap_full = 0.0, gap_reduced = 0.0;
  for (int v = 0; v < 20; ++v) {
    const double md = 0.7e-3 + 0.2e-3 * u01(rng), aniso = 0.3 + 0.5 * u01(rng);
    const Vec3 ev(md * (1.0 + aniso), md * (1.0 - 0.5 * aniso), md * (1.0 - 0.5 * aniso));
    const Vec y = sim::dwi_signal(scheme, random_tensor(ev, rng), 1000.0, 1000.0 / 8.0, rng);
    Vec y_red(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) y_red(static_cast<Eigen::Index>(k)) = y(keep[k]);
    TensorPosterior tp[2][2];  // [full / reduced][rician / gaussian]
    for (int r = 0; r < 2; ++r) {
      for (int m = 0; m < 2; ++m) {
        fc.sampler.seed = stream_seed(708, static_cast<std::uint64_t>(4 * v + 2 * r + m));
        tp[r][m] = fit_voxel(r == 0 ? y : y_red, r == 0 ? scheme : reduced,
                             m == 0 ? NoiseModel::rician() : NoiseModel::gaussian(), fc)
                       .tensor;
      }
    }
    md_lower += tp[0][1].md_mean < tp[0][0].md_mean;
    gap_full += std::abs(tp[0][1].fa_mean - tp[0][0].fa_mean) / 20.0;
    gap_reduced += std::abs(tp[1][1].fa_mean - tp[1][0].fa_mean) / 20.0;
  }
  bool pass = report("Gaussian posterior mean MD below Rician in >= 80% of 20 voxels", md_lower >= 16,
                     std::to_string(md_lower) + " of 20");
  pass &= report("mean |FA gap| shrinks without the b = 3000 shell", gap_reduced < gap_full,
                 fmt(gap_full) + " with, " + fmt(gap_reduced) + " without");
  return pass;
}

}  // namespace acceptance
