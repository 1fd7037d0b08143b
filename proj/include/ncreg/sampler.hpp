#pragma once

// Metropolis-within-Gibbs sampler with Newton-tailored multivariate-t
// proposals and joint variable-selection moves, plus random-walk Metropolis
// baselines and chain diagnostics.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncreg/prior.hpp"
#include "ncreg/regression.hpp"

namespace ncreg {

using Rng = std::mt19937_64;
using IndicatorMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Maps a block's coefficient vector to its linear predictor. Only the
/// active coordinates (intercept plus included slopes) enter.
class BlockMap {
 public:
  virtual ~BlockMap() = default;
  virtual int size() const = 0;  // number of coefficients including the intercept
  virtual int rows() const = 0;
  virtual Vec predictor(const Vec& coef, const std::vector<int>& active) const = 0;
  /// d predictor / d coef[active], rows() x active.size(). For nonlinear maps
  /// this is the first-order (Gauss-Newton) Jacobian.
  virtual Mat jacobian(const Vec& coef, const std::vector<int>& active) const = 0;
  /// J' g and J' diag(w) J for J = jacobian(coef, active).
  virtual void normal_equations(const Vec& coef, const std::vector<int>& active, const Vec& g, const Vec& w, Vec& jtg,
                                Mat& jtwj) const;
};

/// predictor = design * coef.
class LinearMap final : public BlockMap {
 public:
  explicit LinearMap(Mat design);
  int size() const override { return static_cast<int>(design_.cols()); }
  int rows() const override { return static_cast<int>(design_.rows()); }
  Vec predictor(const Vec& coef, const std::vector<int>& active) const override;
  Mat jacobian(const Vec& coef, const std::vector<int>& active) const override;
  void normal_equations(const Vec& coef, const std::vector<int>& active, const Vec& g, const Vec& w, Vec& jtg,
                        Mat& jtwj) const override;
  const Mat& design() const { return design_; }

 private:
  Mat design_;
};

struct BlockSpec {
  std::shared_ptr<const BlockMap> map;
  IndPrior prior;
  bool variable_selection = true;
};

/// Everything the samplers need: data, likelihood family and the two blocks
/// (mean link first, variance link second).
struct Target {
  Vec y;
  Vec log_y;
  NoiseModel noise;
  BlockSpec mean;
  BlockSpec var;

  static Target regression(const ObservationSet& obs, const IndPrior& beta_prior, const IndPrior& alpha_prior,
                           const NoiseModel& noise, bool variable_selection = true);
};

struct SamplerConfig {
  int n_iter = 2000;
  int n_burn = 500;
  int newton_steps = 2;
  double t_dof = 10.0;
  int vs_subset_size = 3;  // capped at the number of slopes in each block
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on inconsistent settings.
  void validate() const;
};

struct SamplerDiagnostics {
  long newton_fallbacks = 0;     // non-finite Newton runs replaced by a prior-scale proposal
  long outer_product_used = 0;   // Hessian evaluations that fell back to the outer product
  long step_halvings = 0;
  double wall_seconds = 0.0;
  std::string rwm_note;          // set when the RWM Hessian route fell back to the identity
};

struct PosteriorDraws {
  Mat beta;  // retained iterations x (1 + p)
  Mat alpha;
  IndicatorMatrix incl_beta;
  IndicatorMatrix incl_alpha;
  double accept_rate_beta = 0.0;
  double accept_rate_alpha = 0.0;
  SamplerDiagnostics diag;
};

/// Starting point for a chain; indicators all set to one.
struct ChainState {
  ParamBlock beta;
  ParamBlock alpha;
};

/// beta from least squares of ln y on X, alpha_0 from the log of the mean
/// squared residual, remaining alpha at zero, all indicators on.
ChainState default_initial_state(const ObservationSet& obs);

/// Deterministic per-stream seed (splitmix64 of the global seed and a stream
/// id such as the voxel index).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

/// A point visited by a Newton climb: log posterior, gradient and the
/// Cholesky factor of -Hessian, all in the active coordinates. ok is false
/// when any of them is non-finite or -Hessian is not positive definite.
struct NewtonPoint {
  Vec x;
  double logpost = -std::numeric_limits<double>::infinity();
  Vec grad;
  Eigen::LLT<Mat> neg_hess;
  bool ok = false;
};

using NewtonEval = std::function<NewtonPoint(const Vec&)>;

/// Up to `steps` Newton steps from start. A step is halved (at most 5 times)
/// while the log posterior decreases; if it still decreases the climb stops
/// where it is. Stops early at a point that is not ok.
NewtonPoint newton_climb(const NewtonEval& eval, NewtonPoint start, int steps, long* halvings = nullptr);

/// Multivariate t with the given location (active coordinates) and precision
/// matrix (-Hessian), i.e. scale matrix -H^{-1}.
struct TProposal {
  std::vector<int> active;
  Vec mean;
  Eigen::LLT<Mat> chol;  // of the precision
  double dof = 10.0;
  bool fallback = false;

  Vec draw(Rng& rng) const;
  double log_density(const Vec& x) const;
};

/// Draws min(subset_size, #slopes) distinct positions uniformly and flips
/// each with probability flip_prob (one half in the sampler). Unchanged when
/// there are no slopes.
std::vector<std::uint8_t> vs_indicator_proposal(const std::vector<std::uint8_t>& current, int subset_size, Rng& rng,
                                                double flip_prob = 0.5);

/// Metropolis acceptance; -inf or NaN log ratios are rejected.
bool mh_accept(double log_ratio, Rng& rng);

/// Gibbs-style MH sampler over (beta, I_beta) and (alpha, I_alpha).
class MwgSampler {
 public:
  MwgSampler(const Target& target, const SamplerConfig& cfg, const ChainState& init);

  /// One sweep: mean block then variance block. Returns acceptance flags.
  std::pair<bool, bool> sweep(Rng& rng);

  /// Tailored proposal for a block: Newton climb on the conditional log
  /// posterior from start (coordinates outside incl are zeroed) and the
  /// t scale at the terminal point.
  TProposal newton_t_proposal(bool mean_block, const Vec& start, const std::vector<std::uint8_t>& incl);

  /// Moves the state by deterministic Newton steps on one block (all
  /// indicators unchanged). Returns false if the climb hit a bad point.
  bool climb(bool mean_block, int steps);
  /// -Hessian of the joint log posterior over the active coordinates of
  /// (beta, alpha) at the current state, with the mean/variance cross terms.
  Mat joint_neg_hessian() const;

  const ChainState& state() const { return state_; }
  double log_likelihood() const { return cur_.loglik; }
  double log_posterior() const;
  const SamplerDiagnostics& diagnostics() const { return diag_; }

 private:
  struct Eval {
    NewtonPoint pt;
    Vec coef;  // full length, zeros outside the active set
    Vec eta;
    LinkDerivs d;
  };

  // Prior on the active coordinates as a normal with the Bernoulli terms
  // folded into the constant.
  struct PriorTerms {
    Vec mean;
    Mat precision;
    double log_const = 0.0;
  };

  const BlockSpec& spec(bool mean_block) const { return mean_block ? target_.mean : target_.var; }
  const ParamBlock& block(bool mean_block) const { return mean_block ? state_.beta : state_.alpha; }
  Vec expand(const Vec& active_values, const std::vector<int>& active, int size) const;
  const PriorTerms& prior_terms(bool mean_block, const std::vector<std::uint8_t>& incl);
  NewtonPoint point(bool mean_block, const Vec& coef, const Vec& eta, const LinkDerivs& d,
                    const std::vector<std::uint8_t>& incl);
  Eval evaluate(bool mean_block, const Vec& coef, const std::vector<std::uint8_t>& incl);
  NewtonPoint current_point(bool mean_block, const std::vector<std::uint8_t>& incl);
  TProposal proposal_from(bool mean_block, const Vec& start, const std::vector<std::uint8_t>& incl,
                          const Eval* start_eval);
  bool block_update(bool mean_block, Rng& rng);

  const Target& target_;
  SamplerConfig cfg_;
  ChainState state_;
  Vec eta_mu_;
  Vec eta_phi_;
  LinkDerivs cur_;
  SamplerDiagnostics diag_;
  std::unordered_map<std::uint64_t, PriorTerms> prior_cache_[2];
  PriorTerms prior_scratch_;
};

PosteriorDraws run_mwg(const Target& target, const SamplerConfig& cfg, const ChainState& init);
PosteriorDraws run_mwg(const ObservationSet& obs, const IndPrior& beta_prior, const IndPrior& alpha_prior,
                       const NoiseModel& model, const SamplerConfig& cfg);

enum class RwmCovariance { ScaledIdentity, ScaledNegInvHessian };

/// Joint-block random-walk Metropolis, no variable selection. The scale is
/// adapted during burn-in towards 0.234 acceptance and then frozen.
PosteriorDraws run_rwm(const Target& target, const SamplerConfig& cfg, const ChainState& init, RwmCovariance kind);

/// Posterior mode of the joint (beta, alpha) with all slopes included, by
/// alternating damped Newton steps. Returns false if it fails to converge.
bool find_posterior_mode(const Target& target, ChainState& state, Mat* neg_hessian = nullptr,
                         int max_iter = 200);

/// 1 + 2 sum rho_k, truncated at the first lag with rho_k < 0.05 or at
/// length / 10, floored at 1. +inf for a constant chain; throws for fewer
/// than 100 draws.
double inefficiency_factor(const Vec& chain);

/// Fraction of draws in column j that are > 0.
double ppm(const Mat& draws, int j);

struct EfficiencyReport {
  std::vector<std::string> names;
  Vec inefficiency;
  Vec draws_per_minute;  // independent draws per wall-clock minute
  double wall_seconds = 0.0;
};

EfficiencyReport efficiency_report(const PosteriorDraws& draws, const std::vector<std::string>& names = {});

/// One row per retained iteration: beta columns, alpha columns, then the
/// indicators. Values are printed with 17 significant digits.
void write_draws_csv(std::ostream& out, const PosteriorDraws& draws);
/// Flat key = value report of acceptance rates and diagnostics.
void write_diagnostics(std::ostream& out, const PosteriorDraws& draws, bool include_timing = true);

}  // namespace ncreg
