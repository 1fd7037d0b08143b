#pragma once

// Simulated block-design fMRI on a voxel grid with Rician noise, fitted
// voxel by voxel with the Rician and Gaussian models, summarized as maps of
// how often the activation PPM exceeds a threshold.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "ncreg/regression.hpp"
#include "ncreg/sampler.hpp"

namespace ncreg {

/// Square block of voxels sharing one activation t-ratio.
struct Region {
  std::string name;
  int row0 = 0;
  int col0 = 0;
  int height = 0;
  int width = 0;
  double t_ratio = 0.0;
};

/// How a target SNR is turned into the noise level. ComponentSd: SNR =
/// baseline / sigma with sigma^2 = phi the variance of each complex
/// component. MagnitudeMoments: SNR = E[y] / sd(y) of the baseline magnitude,
/// which cannot go below sqrt(pi / (4 - pi)) = 1.913.
enum class SnrDefinition { ComponentSd, MagnitudeMoments };

struct SimDesign {
  int rows = 20;
  int cols = 20;
  int T = 160;
  int n_blocks = 8;  // on/off cycles
  double tr = 2.0;   // seconds
  double baseline = 100.0;
  std::vector<double> snr_levels{1.0, 2.0, 3.0};
  std::vector<Region> regions;  // voxels outside every region have t-ratio 0
  int n_datasets = 20;
  std::uint64_t seed = 1;
  SnrDefinition snr_definition = SnrDefinition::ComponentSd;

  Vec paradigm;  // HRF-convolved boxcar, maximum 1
  Mat nuisance;  // linear and quadratic trends

  /// 20 x 20 grid with 6 x 6 squares at t-ratios 3, 5 and 7.
  static SimDesign standard();
  /// Recomputes paradigm and nuisance from T, n_blocks and tr.
  void build();
  /// Throws std::invalid_argument naming the problem.
  void validate() const;

  int voxels() const { return rows * cols; }
  /// t-ratio of every voxel, row-major.
  std::vector<double> t_map() const;
  /// Distinct t-ratios in ascending order, always including 0.
  std::vector<double> t_levels() const;
  /// [paradigm, nuisance] without an intercept.
  Mat raw_covariates() const;
};

/// Canonical double-gamma response (peak shape 6, undershoot shape 16,
/// undershoot ratio 1/6) sampled every dt seconds over 32 s.
Vec canonical_hrf(double dt);

/// Boxcar of n_blocks off/on cycles convolved with canonical_hrf and scaled
/// to maximum 1.
Vec block_paradigm(int T, int n_blocks, double tr);

/// E[y] / sd(y) for a Rician magnitude with mu / sigma = s.
double rician_magnitude_snr(double s);

/// Component variance phi giving the target SNR at the baseline. Throws
/// std::domain_error when the target cannot be reached.
double noise_variance_for_snr(double baseline, double snr, SnrDefinition def);

/// t-ratio of the paradigm coefficient gamma in
/// ln mu_t = ln(baseline) + gamma * paradigm_t under the Gaussian
/// approximation: information X' diag(mu_t^2 / phi) X for the fitted design
/// (intercept, paradigm, trends). Magnitude data carry less information than
/// this at low SNR, so the realized t-ratio falls below the nominal one.
double activation_t_ratio(const SimDesign& design, double gamma, double phi);

/// gamma >= 0 with activation_t_ratio = target, by bisection. Throws
/// std::domain_error if the target cannot be bracketed.
double calibrate_effect(const SimDesign& design, double target_t, double phi);

/// Magnitudes |a + ib| with a ~ N(mu_t, phi), b ~ N(0, phi) (phase 0).
Vec simulate_rician_series(const SimDesign& design, double gamma, double phi, Rng& rng);

struct StudyConfig {
  SamplerConfig sampler;
  int workers = 1;
  bool variable_selection = false;
  std::vector<double> thresholds{0.95, 0.99};

  /// n_iter 2000, n_burn 500, one Newton step per proposal.
  static StudyConfig standard();
};

struct DetectionMap {
  Mat rate;  // rows x cols, fraction of datasets with PPM > threshold
  double threshold = 0.0;
};

struct VoxelFailure {
  double snr;
  std::string model;
  int dataset;
  int voxel;
  std::string what;
};

/// All results for one SNR level and one fitted model.
struct StudyCell {
  double snr = 0.0;
  std::string model;
  Mat ppm;  // n_datasets x voxels, NaN where the fit failed
  std::vector<DetectionMap> maps;  // one per threshold
};

struct StudyResult {
  std::vector<StudyCell> cells;
  std::vector<VoxelFailure> failures;
  /// gamma per (snr index, t level index) as used in the simulation.
  Mat effects;
  std::vector<double> t_levels;
  double wall_seconds = 0.0;

  const StudyCell& cell(double snr, const std::string& model) const;
};

/// Unit-information priors shared by both models: intercepts from log-normal
/// priors centered at the sample mean (mu) and sample variance (phi) of y
/// with coefficient of variation 1, slopes n (X' D X)^{-1}. X is the
/// standardized design with intercept.
std::pair<IndPrior, IndPrior> study_priors(const Vec& y, const Mat& X, const NoiseModel& model);

/// PPM of the first slope (the paradigm) for one series.
double activation_ppm(const Vec& y, const Mat& X, const NoiseModel& model, const SamplerConfig& cfg,
                      bool variable_selection);

using StudyProgress = std::function<void(std::size_t done, std::size_t total)>;

StudyResult run_study(const SimDesign& design, const StudyConfig& cfg, const StudyProgress& progress = {});

/// Mean detection rate over the voxels whose t-ratio equals t.
double region_rate(const SimDesign& design, const DetectionMap& map, double t);

struct MonotonicityReport {
  int snr_comparisons = 0;
  int snr_inversions = 0;
  int t_comparisons = 0;
  int t_inversions = 0;
  bool rician_above_gaussian_at_lowest_snr = false;
  /// At most one inversion of each kind and the Rician comparison holds.
  bool holds() const;
};

/// Checks, at one threshold: rates non-decreasing in SNR for every model and
/// active t level; non-decreasing in t at every SNR and model; summed active
/// rate of the Rician fit above the Gaussian one at the lowest SNR.
MonotonicityReport check_monotonicity(const SimDesign& design, const StudyResult& result, double threshold);

/// rows lines of cols comma-separated rates.
void write_detection_csv(std::ostream& out, const DetectionMap& map);
/// Binary 8-bit PGM (P5), grey level round(255 * rate).
void write_detection_pgm(std::ostream& out, const DetectionMap& map);

}  // namespace ncreg
