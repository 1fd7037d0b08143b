#include "ncreg/fmri_sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>

#include "ncreg/bessel.hpp"
#include "ncreg/parallel.hpp"
#include "ncreg/prior.hpp"

namespace ncreg {

namespace {

constexpr int kMicroSteps = 16;  // paradigm built on a tr/16 grid before sampling

std::string voxel_name(const SimDesign& d, int v) {
  return "voxel " + std::to_string(v) + " (row " + std::to_string(v / d.cols) + ", col " + std::to_string(v % d.cols) +
         ")";
}

}  // namespace

SimDesign SimDesign::standard() {
  SimDesign d;
  d.regions = {{"t3", 2, 2, 6, 6, 3.0}, {"t5", 2, 12, 6, 6, 5.0}, {"t7", 12, 7, 6, 6, 7.0}};
  d.build();
  return d;
}

void SimDesign::build() {
  paradigm = block_paradigm(T, n_blocks, tr);
  nuisance.resize(T, 2);
  for (int t = 0; t < T; ++t) {
    const double s = T > 1 ? static_cast<double>(t) / (T - 1) - 0.5 : 0.0;
    nuisance(t, 0) = s;
    nuisance(t, 1) = s * s;
  }
  nuisance.col(1).array() -= nuisance.col(1).mean();
}

void SimDesign::validate() const {
  if (rows < 1 || cols < 1) throw std::invalid_argument("sim design: grid must be at least 1 x 1");
  if (T < 10) throw std::invalid_argument("sim design: need T >= 10 time points");
  if (n_blocks < 1 || T < 2 * n_blocks) throw std::invalid_argument("sim design: n_blocks must be in [1, T/2]");
  if (!(tr > 0.0)) throw std::invalid_argument("sim design: tr must be > 0");
  if (!(baseline > 0.0)) throw std::invalid_argument("sim design: baseline must be > 0");
  if (snr_levels.empty()) throw std::invalid_argument("sim design: no SNR levels");
  for (double s : snr_levels)
    if (!(s > 0.0)) throw std::invalid_argument("sim design: SNR levels must be > 0");
  if (n_datasets < 1) throw std::invalid_argument("sim design: n_datasets must be positive");
  if (paradigm.size() != T || nuisance.rows() != T) throw std::invalid_argument("sim design: call build() after changing T");
  std::vector<int> owner(static_cast<std::size_t>(voxels()), -1);
  for (std::size_t k = 0; k < regions.size(); ++k) {
    const Region& r = regions[k];
    if (r.row0 < 0 || r.col0 < 0 || r.height < 1 || r.width < 1 || r.row0 + r.height > rows ||
        r.col0 + r.width > cols) {
      throw std::invalid_argument("sim design: region '" + r.name + "' does not fit in the grid");
    }
    if (!(r.t_ratio >= 0.0) || !std::isfinite(r.t_ratio)) {
      throw std::invalid_argument("sim design: region '" + r.name + "' needs a finite t-ratio >= 0");
    }
    for (int i = r.row0; i < r.row0 + r.height; ++i)
      for (int j = r.col0; j < r.col0 + r.width; ++j) {
        int& o = owner[static_cast<std::size_t>(i * cols + j)];
        if (o >= 0) throw std::invalid_argument("sim design: regions '" + regions[o].name + "' and '" + r.name + "' overlap");
        o = static_cast<int>(k);
      }
  }
}

std::vector<double> SimDesign::t_map() const {
  std::vector<double> t(static_cast<std::size_t>(voxels()), 0.0);
  for (const Region& r : regions)
    for (int i = r.row0; i < r.row0 + r.height; ++i)
      for (int j = r.col0; j < r.col0 + r.width; ++j) t[static_cast<std::size_t>(i * cols + j)] = r.t_ratio;
  return t;
}

std::vector<double> SimDesign::t_levels() const {
  std::set<double> s{0.0};
  for (const Region& r : regions) s.insert(r.t_ratio);
  return {s.begin(), s.end()};
}

Mat SimDesign::raw_covariates() const {
  Mat x(T, 1 + nuisance.cols());
  x.col(0) = paradigm;
  x.rightCols(nuisance.cols()) = nuisance;
  return x;
}

Vec canonical_hrf(double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("canonical_hrf: dt must be > 0");
  const int n = static_cast<int>(std::floor(32.0 / dt)) + 1;
  Vec h(n);
  const double g6 = std::tgamma(6.0), g16 = std::tgamma(16.0);
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    h(k) = std::pow(t, 5.0) * std::exp(-t) / g6 - std::pow(t, 15.0) * std::exp(-t) / (6.0 * g16);
  }
  return h;
}

Vec block_paradigm(int T, int n_blocks, double tr) {
  if (T < 2 || n_blocks < 1 || T < 2 * n_blocks || !(tr > 0.0)) {
    throw std::invalid_argument("block_paradigm: need T >= 2 n_blocks >= 2 and tr > 0");
  }
  const int fine = T * kMicroSteps;
  const double cycle = static_cast<double>(fine) / n_blocks;
  Vec box(fine);
  for (int k = 0; k < fine; ++k) box(k) = std::fmod(k, cycle) >= 0.5 * cycle ? 1.0 : 0.0;
  const Vec h = canonical_hrf(tr / kMicroSteps);
  Vec conv = Vec::Zero(fine);
  for (int k = 0; k < fine; ++k)
    for (int j = 0; j < h.size() && j <= k; ++j) conv(k) += h(j) * box(k - j);
  Vec p(T);
  for (int t = 0; t < T; ++t) p(t) = conv(t * kMicroSteps);
  const double top = p.maxCoeff();
  if (!(top > 0.0)) throw std::invalid_argument("block_paradigm: blocks too short for any response");
  return p / top;
}

double rician_magnitude_snr(double s) {
  if (!(s >= 0.0) || !std::isfinite(s)) throw std::domain_error("rician_magnitude_snr: need finite s >= 0");
  const double u = 0.25 * s * s;
  double mean = std::sqrt(0.5 * std::numbers::pi);  // E[y] / sigma
  if (u > 0.0) {
    // E[y] / sigma = sqrt(pi/2) e^{-u} [(1 + 2u) I0(u) + 2u I1(u)]
    const BesselLogRatio b = log_bessel_i_with_ratio(0, u);
    mean *= std::exp(b.log_i_scaled) * ((1.0 + 2.0 * u) + 2.0 * u * b.ratio);
  }
  const double second = s * s + 2.0;
  return mean / std::sqrt(second - mean * mean);
}

double noise_variance_for_snr(double baseline, double snr, SnrDefinition def) {
  if (!(baseline > 0.0) || !(snr > 0.0)) throw std::domain_error("noise_variance_for_snr: need baseline, snr > 0");
  if (def == SnrDefinition::ComponentSd) return (baseline / snr) * (baseline / snr);
  const double floor = rician_magnitude_snr(0.0);
  if (snr <= floor) {
    throw std::domain_error("noise_variance_for_snr: magnitude SNR " + std::to_string(snr) +
                            " is below the Rayleigh limit " + std::to_string(floor));
  }
  // rician_magnitude_snr increases from 1.913 at s = 0 towards s.
  double lo = 0.0, hi = snr + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rician_magnitude_snr(mid) < snr ? lo : hi) = mid;
  }
  const double s = 0.5 * (lo + hi);
  return (baseline / s) * (baseline / s);
}

double activation_t_ratio(const SimDesign& design, double gamma, double phi) {
  if (gamma == 0.0) return 0.0;
  const Mat raw = design.raw_covariates();
  Mat x(design.T, raw.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(raw.cols()) = raw;
  // Gaussian noise with the component variance phi on the log link
  const Vec w = (design.baseline * (gamma * design.paradigm.array()).exp()).square().matrix() / phi;
  const Mat info = x.transpose() * w.asDiagonal() * x;
  const Mat cov = info.ldlt().solve(Mat::Identity(info.rows(), info.cols()));
  return gamma / std::sqrt(cov(1, 1));
}

double calibrate_effect(const SimDesign& design, double target_t, double phi) {
  if (!(target_t >= 0.0) || !std::isfinite(target_t)) throw std::domain_error("calibrate_effect: need t >= 0");
  if (target_t == 0.0) return 0.0;
  double lo = 0.0, hi = 0.01;
  while (activation_t_ratio(design, hi, phi) < target_t) {
    lo = hi;
    hi *= 2.0;
    if (hi > 10.0) {
      throw std::domain_error("calibrate_effect: t-ratio " + std::to_string(target_t) +
                              " not reachable with activation below exp(10)");
    }
  }
  for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (activation_t_ratio(design, mid, phi) < target_t ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Vec simulate_rician_series(const SimDesign& design, double gamma, double phi, Rng& rng) {
  if (!(phi > 0.0)) throw std::domain_error("simulate_rician_series: phi must be > 0");
  std::normal_distribution<double> nd;
  const double sd = std::sqrt(phi);
  Vec y(design.T);
  for (int t = 0; t < design.T; ++t) {
    const double mu = design.baseline * std::exp(gamma * design.paradigm(t));
    const double a = mu + sd * nd(rng);
    const double b = sd * nd(rng);
    y(t) = std::hypot(a, b);
  }
  return y;
}

StudyConfig StudyConfig::standard() {
  StudyConfig c;
  c.sampler.n_iter = 2000;
  c.sampler.n_burn = 500;
  c.sampler.newton_steps = 1;
  return c;
}

const StudyCell& StudyResult::cell(double snr, const std::string& model) const {
  for (const StudyCell& c : cells)
    if (c.snr == snr && c.model == model) return c;
  throw std::out_of_range("study result: no cell for SNR " + std::to_string(snr) + " and model " + model);
}

std::pair<IndPrior, IndPrior> study_priors(const Vec& y, const Mat& X, const NoiseModel& model) {
  const double mean = y.mean();
  const double var = (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
  if (!(mean > 0.0) || !(var > 0.0)) throw std::domain_error("study priors: series has no spread");
  const InterceptPrior ib = intercept_prior_from_lognormal(mean, mean);
  const IndPrior beta = unit_information_prior(X, ib, fisher_mu_diag(static_cast<int>(y.size()), ib.m, var, model));
  const InterceptPrior ia = intercept_prior_from_lognormal(var, var);
  const IndPrior alpha = IndPrior::make(ia.m, ia.s2, Mat(0, 0));
  return {beta, alpha};
}

double activation_ppm(const Vec& y, const Mat& X, const NoiseModel& model, const SamplerConfig& cfg,
                      bool variable_selection) {
  const ObservationSet obs(y, X, Mat::Ones(y.size(), 1));
  const auto [bp, ap] = study_priors(y, X, model);
  const Target target = Target::regression(obs, bp, ap, model, variable_selection);
  const PosteriorDraws d = run_mwg(target, cfg, default_initial_state(obs));
  return ppm(d.beta, 1);
}

StudyResult run_study(const SimDesign& design, const StudyConfig& cfg, const StudyProgress& progress) {
  design.validate();
  cfg.sampler.validate();
  const auto start = std::chrono::steady_clock::now();
  StudyResult res;
  res.t_levels = design.t_levels();
  const std::vector<double> tmap = design.t_map();
  const int n_snr = static_cast<int>(design.snr_levels.size());
  const int V = design.voxels();
  const int D = design.n_datasets;

  std::vector<double> phi(static_cast<std::size_t>(n_snr));
  res.effects.resize(n_snr, static_cast<Eigen::Index>(res.t_levels.size()));
  for (int s = 0; s < n_snr; ++s) {
    phi[s] = noise_variance_for_snr(design.baseline, design.snr_levels[s], design.snr_definition);
    for (std::size_t k = 0; k < res.t_levels.size(); ++k) {
      try {
        res.effects(s, static_cast<Eigen::Index>(k)) = calibrate_effect(design, res.t_levels[k], phi[s]);
      } catch (const std::domain_error& e) {
        for (int v = 0; v < V; ++v)
          if (tmap[static_cast<std::size_t>(v)] == res.t_levels[k]) {
            throw std::domain_error("SNR " + std::to_string(design.snr_levels[s]) + ", t-ratio " +
                                    std::to_string(res.t_levels[k]) + " at " + voxel_name(design, v) + ": " +
                                    e.what());
          }
      }
    }
  }
  std::vector<int> level_of(static_cast<std::size_t>(V));
  for (int v = 0; v < V; ++v) {
    level_of[static_cast<std::size_t>(v)] = static_cast<int>(
        std::find(res.t_levels.begin(), res.t_levels.end(), tmap[static_cast<std::size_t>(v)]) - res.t_levels.begin());
  }

  const StandardizedDesign sd = standardize(design.raw_covariates());
  const NoiseModel models[2] = {NoiseModel::rician(), NoiseModel::gaussian()};
  const std::string names[2] = {"rician", "gaussian"};
  for (int s = 0; s < n_snr; ++s)
    for (int m = 0; m < 2; ++m) {
      StudyCell c;
      c.snr = design.snr_levels[s];
      c.model = names[m];
      c.ppm = Mat::Constant(D, V, std::numeric_limits<double>::quiet_NaN());
      res.cells.push_back(std::move(c));
    }

  const std::size_t total = static_cast<std::size_t>(n_snr) * D * V;
  std::vector<std::vector<VoxelFailure>> task_failures(total);
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(total, cfg.workers, [&](std::size_t task) {
    const int s = static_cast<int>(task / (static_cast<std::size_t>(D) * V));
    const int d = static_cast<int>((task / V) % D);
    const int v = static_cast<int>(task % V);
    const std::uint64_t data_seed = stream_seed(stream_seed(design.seed, static_cast<std::uint64_t>(s)),
                                                static_cast<std::uint64_t>(d) * V + v);
    Rng rng(data_seed);
    const double gamma = res.effects(s, level_of[static_cast<std::size_t>(v)]);
    const Vec y = simulate_rician_series(design, gamma, phi[s], rng);
    for (int m = 0; m < 2; ++m) {
      SamplerConfig sc = cfg.sampler;
      sc.seed = stream_seed(data_seed, static_cast<std::uint64_t>(m) + 1);
      try {
        res.cells[static_cast<std::size_t>(2 * s + m)].ppm(d, v) =
            activation_ppm(y, sd.X, models[m], sc, cfg.variable_selection);
      } catch (const std::exception& e) {
        task_failures[task].push_back({design.snr_levels[s], names[m], d, v, e.what()});
      }
    }
    const std::size_t k = ++done;
    if (progress) {
      const std::lock_guard<std::mutex> lock(progress_mutex);
      progress(k, total);
    }
  });
  for (auto& f : task_failures)
    for (auto& x : f) res.failures.push_back(std::move(x));

  for (StudyCell& c : res.cells) {
    for (double thr : cfg.thresholds) {
      DetectionMap map;
      map.threshold = thr;
      map.rate = Mat::Constant(design.rows, design.cols, std::numeric_limits<double>::quiet_NaN());
      for (int v = 0; v < V; ++v) {
        int hits = 0, ok = 0;
        for (int d = 0; d < D; ++d) {
          const double p = c.ppm(d, v);
          if (std::isnan(p)) continue;
          ++ok;
          if (p > thr) ++hits;
        }
        if (ok > 0) map.rate(v / design.cols, v % design.cols) = static_cast<double>(hits) / ok;
      }
      c.maps.push_back(std::move(map));
    }
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

double region_rate(const SimDesign& design, const DetectionMap& map, double t) {
  const std::vector<double> tmap = design.t_map();
  double sum = 0.0;
  int n = 0;
  for (int v = 0; v < design.voxels(); ++v) {
    const double r = map.rate(v / design.cols, v % design.cols);
    if (tmap[static_cast<std::size_t>(v)] != t || std::isnan(r)) continue;
    sum += r;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("region_rate: no fitted voxels with t-ratio " + std::to_string(t));
  return sum / n;
}

bool MonotonicityReport::holds() const {
  return snr_inversions <= 1 && t_inversions <= 1 && rician_above_gaussian_at_lowest_snr;
}

MonotonicityReport check_monotonicity(const SimDesign& design, const StudyResult& result, double threshold) {
  const auto map_at = [&](double snr, const std::string& model) -> const DetectionMap& {
    for (const DetectionMap& m : result.cell(snr, model).maps)
      if (m.threshold == threshold) return m;
    throw std::out_of_range("check_monotonicity: threshold " + std::to_string(threshold) + " was not computed");
  };
  std::vector<double> snrs = design.snr_levels;
  std::sort(snrs.begin(), snrs.end());
  const std::vector<double>& ts = result.t_levels;
  MonotonicityReport rep;
  for (const std::string model : {"rician", "gaussian"}) {
    for (double t : ts) {
      if (t == 0.0) continue;
      for (std::size_t s = 1; s < snrs.size(); ++s) {
        ++rep.snr_comparisons;
        if (region_rate(design, map_at(snrs[s], model), t) < region_rate(design, map_at(snrs[s - 1], model), t)) {
          ++rep.snr_inversions;
        }
      }
    }
    for (double snr : snrs) {
      const DetectionMap& m = map_at(snr, model);
      for (std::size_t k = 1; k < ts.size(); ++k) {
        ++rep.t_comparisons;
        if (region_rate(design, m, ts[k]) < region_rate(design, m, ts[k - 1])) ++rep.t_inversions;
      }
    }
  }
  double rice = 0.0, gauss = 0.0;
  for (double t : ts) {
    if (t == 0.0) continue;
    rice += region_rate(design, map_at(snrs.front(), "rician"), t);
    gauss += region_rate(design, map_at(snrs.front(), "gaussian"), t);
  }
  rep.rician_above_gaussian_at_lowest_snr = rice > gauss;
  return rep;
}

void write_detection_csv(std::ostream& out, const DetectionMap& map) {
  const auto old = out.precision(6);
  for (Eigen::Index i = 0; i < map.rate.rows(); ++i) {
    for (Eigen::Index j = 0; j < map.rate.cols(); ++j) {
      if (j) out << ',';
      const double r = map.rate(i, j);
      if (std::isnan(r)) {
        out << "nan";
      } else {
        out << r;
      }
    }
    out << '\n';
  }
  out.precision(old);
}

void write_detection_pgm(std::ostream& out, const DetectionMap& map) {
  out << "P5\n" << map.rate.cols() << ' ' << map.rate.rows() << "\n255\n";
  for (Eigen::Index i = 0; i < map.rate.rows(); ++i)
    for (Eigen::Index j = 0; j < map.rate.cols(); ++j) {
      const double r = map.rate(i, j);
      const double v = std::isnan(r) ? 0.0 : std::clamp(r, 0.0, 1.0);
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * v))));
    }
}

}  // namespace ncreg
