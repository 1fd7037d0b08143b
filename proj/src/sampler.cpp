#include "ncreg/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

namespace ncreg {

namespace {

constexpr double kLogPi = 1.1447298858494002;
constexpr double kTargetAccept = 0.234;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vec gather(const Vec& v, const std::vector<int>& idx) {
  Vec out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(idx[j]);
  return out;
}

Mat gather_columns(const Mat& m, const std::vector<int>& idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

Vec standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> nd;
  Vec z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = nd(rng);
  return z;
}

// Log-likelihood only, for the random-walk sampler.
double joint_loglik(const Target& t, const Vec& eta_mu, const Vec& eta_phi) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < t.y.size(); ++i) {
    const double mu = std::exp(eta_mu(i));
    const double phi = std::exp(eta_phi(i));
    if (!std::isfinite(mu) || !std::isfinite(phi) || !(phi > 0.0)) return -std::numeric_limits<double>::infinity();
    total += observation_terms_link(t.y(i), t.log_y(i), mu, eta_mu(i), phi, eta_phi(i), t.noise).logp;
  }
  return std::isfinite(total) ? total : -std::numeric_limits<double>::infinity();
}

void check_block(const BlockSpec& spec, const ParamBlock& b, Eigen::Index n, const char* what) {
  if (!spec.map) throw std::invalid_argument(std::string(what) + ": missing predictor map");
  if (spec.map->rows() != n) throw std::invalid_argument(std::string(what) + ": map rows do not match the data");
  if (b.coef.size() != spec.map->size() || !b.consistent()) {
    throw std::invalid_argument(std::string(what) + ": initial coefficients do not match the block");
  }
  if (spec.prior.slopes() != spec.map->size() - 1) {
    throw std::invalid_argument(std::string(what) + ": prior has " + std::to_string(spec.prior.slopes()) +
                                " slopes, block has " + std::to_string(spec.map->size() - 1));
  }
}

}  // namespace

LinearMap::LinearMap(Mat design) : design_(std::move(design)) {}

Vec LinearMap::predictor(const Vec& coef, const std::vector<int>& active) const {
  if (static_cast<Eigen::Index>(active.size()) == design_.cols()) return design_ * coef;
  return gather_columns(design_, active) * gather(coef, active);
}

void BlockMap::normal_equations(const Vec& coef, const std::vector<int>& active, const Vec& g, const Vec& w, Vec& jtg,
                                Mat& jtwj) const {
  const Mat J = jacobian(coef, active);
  jtg = J.transpose() * g;
  jtwj = J.transpose() * w.asDiagonal() * J;
}

void LinearMap::normal_equations(const Vec&, const std::vector<int>& active, const Vec& g, const Vec& w, Vec& jtg,
                                 Mat& jtwj) const {
  const Eigen::Index k = static_cast<Eigen::Index>(active.size());
  jtg.resize(k);
  jtwj.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto ca = design_.col(active[a]).array();
    jtg(a) = (ca * g.array()).sum();
    for (Eigen::Index b = 0; b <= a; ++b) {
      jtwj(a, b) = jtwj(b, a) = (ca * w.array() * design_.col(active[b]).array()).sum();
    }
  }
}

Mat LinearMap::jacobian(const Vec&, const std::vector<int>& active) const {
  if (static_cast<Eigen::Index>(active.size()) == design_.cols()) return design_;
  return gather_columns(design_, active);
}

Target Target::regression(const ObservationSet& obs, const IndPrior& beta_prior, const IndPrior& alpha_prior,
                          const NoiseModel& noise, bool variable_selection) {
  Target t;
  t.y = obs.y();
  t.log_y = obs.log_y();
  t.noise = noise;
  t.mean = {std::make_shared<LinearMap>(obs.X()), beta_prior, variable_selection};
  t.var = {std::make_shared<LinearMap>(obs.Z()), alpha_prior, variable_selection};
  return t;
}

void SamplerConfig::validate() const {
  if (n_iter < 1) throw std::invalid_argument("sampler config: n_iter must be positive");
  if (n_burn < 0 || n_burn >= n_iter) throw std::invalid_argument("sampler config: need 0 <= n_burn < n_iter");
  if (newton_steps < 1 || newton_steps > 10) throw std::invalid_argument("sampler config: newton_steps must be in [1, 10]");
  if (!(t_dof > 0.0)) throw std::invalid_argument("sampler config: t_dof must be > 0");
  if (vs_subset_size < 1) throw std::invalid_argument("sampler config: vs_subset_size must be positive");
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

ChainState default_initial_state(const ObservationSet& obs) {
  const Vec beta = obs.X().colPivHouseholderQr().solve(obs.log_y());
  const Vec resid = obs.y() - (obs.X() * beta).array().exp().matrix();
  double v = resid.squaredNorm() / obs.n();
  if (!(v > 0.0) || !std::isfinite(v)) v = 1e-6 * obs.y().squaredNorm() / obs.n();
  Vec alpha = Vec::Zero(obs.Z().cols());
  alpha(0) = std::log(v);
  return {ParamBlock::full(beta), ParamBlock::full(alpha)};
}

NewtonPoint newton_climb(const NewtonEval& eval, NewtonPoint start, int steps, long* halvings) {
  NewtonPoint pt = std::move(start);
  for (int s = 0; s < steps && pt.ok; ++s) {
    const Vec step = pt.neg_hess.solve(pt.grad);
    if (!step.allFinite()) break;
    double t = 1.0;
    bool moved = false;
    for (int h = 0; h <= 5; ++h) {
      NewtonPoint cand = eval(pt.x + t * step);
      if (cand.logpost >= pt.logpost) {
        pt = std::move(cand);
        moved = true;
        break;
      }
      if (h < 5) {
        t *= 0.5;
        if (halvings) ++*halvings;
      }
    }
    if (!moved) break;
  }
  return pt;
}

Vec TProposal::draw(Rng& rng) const {
  const Vec z = standard_normal(mean.size(), rng);
  std::gamma_distribution<double> chi2(0.5 * dof, 2.0);
  const double w = chi2(rng);
  const Vec v = chol.matrixU().solve(z);
  return mean + std::sqrt(dof / w) * v;
}

double TProposal::log_density(const Vec& x) const {
  const double d = static_cast<double>(mean.size());
  const Vec r = chol.matrixU() * (x - mean);
  const double q = r.squaredNorm();
  const double log_det = 2.0 * chol.matrixLLT().diagonal().array().log().sum();
  return std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) - 0.5 * d * (std::log(dof) + kLogPi) +
         0.5 * log_det - 0.5 * (dof + d) * std::log1p(q / dof);
}

std::vector<std::uint8_t> vs_indicator_proposal(const std::vector<std::uint8_t>& current, int subset_size,
                                                Rng& rng, double flip_prob) {
  std::vector<std::uint8_t> out = current;
  const int k = static_cast<int>(current.size());
  if (k == 0) return out;
  const int m = std::min(subset_size, k);
  std::vector<int> pos(static_cast<std::size_t>(k));
  std::iota(pos.begin(), pos.end(), 0);
  for (int i = 0; i < m; ++i) {
    std::uniform_int_distribution<int> pick(i, k - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  std::bernoulli_distribution flip(flip_prob);
  for (int i = 0; i < m; ++i) {
    if (flip(rng)) out[pos[i]] ^= 1;
  }
  return out;
}

bool mh_accept(double log_ratio, Rng& rng) {
  if (std::isnan(log_ratio)) return false;
  if (log_ratio >= 0.0) return true;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return std::log(u(rng)) < log_ratio;
}

MwgSampler::MwgSampler(const Target& target, const SamplerConfig& cfg, const ChainState& init)
    : target_(target), cfg_(cfg), state_(init) {
  cfg_.validate();
  if (target_.log_y.size() != target_.y.size()) throw std::invalid_argument("sampler: log_y length mismatch");
  check_block(target_.mean, state_.beta, target_.y.size(), "mean block");
  check_block(target_.var, state_.alpha, target_.y.size(), "variance block");
  eta_mu_ = target_.mean.map->predictor(state_.beta.coef, state_.beta.active());
  eta_phi_ = target_.var.map->predictor(state_.alpha.coef, state_.alpha.active());
  cur_ = link_derivs(target_.y, target_.log_y, eta_mu_, eta_phi_, target_.noise);
  if (!std::isfinite(cur_.loglik)) throw std::runtime_error("sampler: log-likelihood is not finite at the initial state");
}

Vec MwgSampler::expand(const Vec& active_values, const std::vector<int>& active, int size) const {
  Vec out = Vec::Zero(size);
  for (std::size_t j = 0; j < active.size(); ++j) out(active[j]) = active_values(static_cast<Eigen::Index>(j));
  return out;
}

const MwgSampler::PriorTerms& MwgSampler::prior_terms(bool mean_block, const std::vector<std::uint8_t>& incl) {
  const IndPrior& p = spec(mean_block).prior;
  std::uint64_t key = 0;
  const bool cacheable = incl.size() < 64;
  if (cacheable) {
    for (std::size_t j = 0; j < incl.size(); ++j) key |= static_cast<std::uint64_t>(incl[j] != 0) << j;
    const auto it = prior_cache_[mean_block].find(key);
    if (it != prior_cache_[mean_block].end()) return it->second;
  }
  const std::vector<int> act = active_indices(incl);
  const Eigen::Index k = static_cast<Eigen::Index>(act.size());
  PriorTerms t;
  t.mean = Vec::Zero(k);
  t.mean(0) = p.m;
  // log_prior at the prior mean gives the constant; the quadratic part comes
  // from its Hessian.
  ParamBlock at_mean{Vec::Zero(p.slopes() + 1), incl};
  at_mean.coef(0) = p.m;
  t.log_const = log_prior(at_mean, p);
  t.precision = -log_prior_grad_hess(at_mean, p).hess;
  if (!cacheable) {
    prior_scratch_ = std::move(t);
    return prior_scratch_;
  }
  return prior_cache_[mean_block].emplace(key, std::move(t)).first->second;
}

NewtonPoint MwgSampler::point(bool mean_block, const Vec& coef, const Vec& eta, const LinkDerivs& d,
                              const std::vector<std::uint8_t>& incl) {
  const BlockSpec& sp = spec(mean_block);
  const std::vector<int> act = active_indices(incl);
  const PriorTerms& pr = prior_terms(mean_block, incl);
  NewtonPoint pt;
  pt.x = gather(coef, act);
  const Vec dx = pt.x - pr.mean;
  const Vec pdx = pr.precision * dx;
  pt.logpost = d.loglik + pr.log_const - 0.5 * dx.dot(pdx);
  pt.ok = false;
  if (!d.finite || !std::isfinite(pt.logpost)) return pt;

  const Vec& g = mean_block ? d.g_mu : d.g_phi;
  Vec neg_w;
  if (target_.noise.is_gaussian()) {
    const Vec& eta_mu = mean_block ? eta : eta_mu_;
    const Vec& eta_phi = mean_block ? eta_phi_ : eta;
    neg_w = -hessian_weights(d, mean_block, HessKind::Expected, eta_mu, eta_phi, target_.noise);
  } else {
    neg_w = -(mean_block ? d.w_mu : d.w_phi);
  }
  Vec jtg;
  Mat nh;
  sp.map->normal_equations(coef, act, g, neg_w, jtg, nh);
  pt.grad = jtg - pdx;
  nh += pr.precision;
  bool good = nh.allFinite() && (pt.neg_hess.compute(nh), pt.neg_hess.info() == Eigen::Success);
  if (!good) {
    ++diag_.outer_product_used;
    sp.map->normal_equations(coef, act, g, g.array().square().matrix(), jtg, nh);
    nh += pr.precision;
    good = nh.allFinite() && (pt.neg_hess.compute(nh), pt.neg_hess.info() == Eigen::Success);
  }
  pt.ok = good && pt.grad.allFinite();
  return pt;
}

MwgSampler::Eval MwgSampler::evaluate(bool mean_block, const Vec& coef, const std::vector<std::uint8_t>& incl) {
  Eval e;
  e.coef = coef;
  e.eta = spec(mean_block).map->predictor(coef, active_indices(incl));
  e.d = mean_block ? link_derivs(target_.y, target_.log_y, e.eta, eta_phi_, target_.noise)
                   : link_derivs(target_.y, target_.log_y, eta_mu_, e.eta, target_.noise);
  e.pt = point(mean_block, e.coef, e.eta, e.d, incl);
  return e;
}

NewtonPoint MwgSampler::current_point(bool mean_block, const std::vector<std::uint8_t>& incl) {
  return point(mean_block, block(mean_block).coef, mean_block ? eta_mu_ : eta_phi_, cur_, incl);
}

TProposal MwgSampler::proposal_from(bool mean_block, const Vec& start, const std::vector<std::uint8_t>& incl,
                                    const Eval* start_eval) {
  const BlockSpec& sp = spec(mean_block);
  const std::vector<int> act = active_indices(incl);
  const int size = sp.map->size();
  const Vec s0 = expand(gather(start, act), act, size);

  NewtonPoint p0;
  if (start_eval) {
    p0 = start_eval->pt;
  } else if (s0 == block(mean_block).coef) {
    p0 = current_point(mean_block, incl);
  } else {
    p0 = evaluate(mean_block, s0, incl).pt;
  }
  const NewtonEval f = [&](const Vec& x) { return evaluate(mean_block, expand(x, act, size), incl).pt; };
  const NewtonPoint end = newton_climb(f, std::move(p0), cfg_.newton_steps, &diag_.step_halvings);

  TProposal prop;
  prop.active = act;
  prop.dof = cfg_.t_dof;
  if (end.ok && end.x.allFinite()) {
    prop.mean = end.x;
    prop.chol = end.neg_hess;
  } else {
    ++diag_.newton_fallbacks;
    prop.fallback = true;
    prop.mean = gather(s0, act);
    prop.chol.compute(prior_terms(mean_block, incl).precision);
  }
  return prop;
}

TProposal MwgSampler::newton_t_proposal(bool mean_block, const Vec& start, const std::vector<std::uint8_t>& incl) {
  if (start.size() != spec(mean_block).map->size() ||
      static_cast<int>(incl.size()) != spec(mean_block).map->size() - 1) {
    throw std::invalid_argument("newton_t_proposal: start or indicators have the wrong length");
  }
  return proposal_from(mean_block, start, incl, nullptr);
}

bool MwgSampler::block_update(bool mean_block, Rng& rng) {
  const BlockSpec& sp = spec(mean_block);
  const ParamBlock& cur = block(mean_block);
  std::vector<std::uint8_t> incl_p = cur.incl;
  if (sp.variable_selection && cur.slopes() > 0) incl_p = vs_indicator_proposal(cur.incl, cfg_.vs_subset_size, rng);

  const TProposal fwd = proposal_from(mean_block, cur.coef, incl_p, nullptr);
  const Vec xp = fwd.draw(rng);
  if (!xp.allFinite()) return false;
  Eval ep = evaluate(mean_block, expand(xp, fwd.active, sp.map->size()), incl_p);
  if (!std::isfinite(ep.pt.logpost)) return false;

  const bool same = incl_p == cur.incl;
  const TProposal rev = proposal_from(mean_block, ep.coef, cur.incl, same ? &ep : nullptr);
  const PriorTerms& pr = prior_terms(mean_block, cur.incl);
  const Vec dx = gather(cur.coef, rev.active) - pr.mean;
  const double lp_cur = cur_.loglik + pr.log_const - 0.5 * dx.dot(pr.precision * dx);
  const double log_ratio =
      ep.pt.logpost - lp_cur + rev.log_density(gather(cur.coef, rev.active)) - fwd.log_density(xp);
  if (!mh_accept(log_ratio, rng)) return false;

  ParamBlock& dst = mean_block ? state_.beta : state_.alpha;
  dst.coef = std::move(ep.coef);
  dst.incl = std::move(incl_p);
  (mean_block ? eta_mu_ : eta_phi_) = std::move(ep.eta);
  cur_ = std::move(ep.d);
  return true;
}

std::pair<bool, bool> MwgSampler::sweep(Rng& rng) {
  const bool a = block_update(true, rng);
  const bool b = block_update(false, rng);
  return {a, b};
}

double MwgSampler::log_posterior() const {
  return cur_.loglik + log_prior(state_.beta, target_.mean.prior) + log_prior(state_.alpha, target_.var.prior);
}

bool MwgSampler::climb(bool mean_block, int steps) {
  const ParamBlock& cur = block(mean_block);
  const std::vector<std::uint8_t> incl = cur.incl;
  const std::vector<int> act = active_indices(incl);
  const int size = spec(mean_block).map->size();
  const NewtonEval f = [&](const Vec& x) { return evaluate(mean_block, expand(x, act, size), incl).pt; };
  const NewtonPoint end = newton_climb(f, current_point(mean_block, incl), steps, &diag_.step_halvings);
  if (!end.ok) return false;
  Eval e = evaluate(mean_block, expand(end.x, act, size), incl);
  if (!e.pt.ok) return false;
  ParamBlock& dst = mean_block ? state_.beta : state_.alpha;
  dst.coef = std::move(e.coef);
  (mean_block ? eta_mu_ : eta_phi_) = std::move(e.eta);
  cur_ = std::move(e.d);
  return true;
}

Mat MwgSampler::joint_neg_hessian() const {
  const std::vector<int> ab = state_.beta.active();
  const std::vector<int> aa = state_.alpha.active();
  const Mat Jm = target_.mean.map->jacobian(state_.beta.coef, ab);
  const Mat Jv = target_.var.map->jacobian(state_.alpha.coef, aa);
  const Eigen::Index kb = Jm.cols(), ka = Jv.cols();
  Mat H(kb + ka, kb + ka);
  H.topLeftCorner(kb, kb) = Jm.transpose() * (-cur_.w_mu).asDiagonal() * Jm -
                            log_prior_grad_hess(state_.beta, target_.mean.prior).hess;
  H.bottomRightCorner(ka, ka) = Jv.transpose() * (-cur_.w_phi).asDiagonal() * Jv -
                                log_prior_grad_hess(state_.alpha, target_.var.prior).hess;
  H.topRightCorner(kb, ka) = Jm.transpose() * (-cur_.w_cross).asDiagonal() * Jv;
  H.bottomLeftCorner(ka, kb) = H.topRightCorner(kb, ka).transpose();
  return H;
}

PosteriorDraws run_mwg(const Target& target, const SamplerConfig& cfg, const ChainState& init) {
  cfg.validate();
  const auto t0 = Clock::now();
  Rng rng(cfg.seed);
  MwgSampler s(target, cfg, init);
  const int kept = cfg.n_iter - cfg.n_burn;
  const int kb = target.mean.map->size(), ka = target.var.map->size();
  PosteriorDraws out;
  out.beta.resize(kept, kb);
  out.alpha.resize(kept, ka);
  out.incl_beta.resize(kept, kb - 1);
  out.incl_alpha.resize(kept, ka - 1);
  long acc_b = 0, acc_a = 0;
  for (int it = 0; it < cfg.n_iter; ++it) {
    const auto [a, b] = s.sweep(rng);
    if (it < cfg.n_burn) continue;
    const int r = it - cfg.n_burn;
    acc_b += a;
    acc_a += b;
    const ChainState& st = s.state();
    out.beta.row(r) = st.beta.coef.transpose();
    out.alpha.row(r) = st.alpha.coef.transpose();
    for (int j = 0; j < kb - 1; ++j) out.incl_beta(r, j) = st.beta.incl[j];
    for (int j = 0; j < ka - 1; ++j) out.incl_alpha(r, j) = st.alpha.incl[j];
  }
  out.accept_rate_beta = static_cast<double>(acc_b) / kept;
  out.accept_rate_alpha = static_cast<double>(acc_a) / kept;
  out.diag = s.diagnostics();
  out.diag.wall_seconds = seconds_since(t0);
  return out;
}

PosteriorDraws run_mwg(const ObservationSet& obs, const IndPrior& beta_prior, const IndPrior& alpha_prior,
                       const NoiseModel& model, const SamplerConfig& cfg) {
  const Target t = Target::regression(obs, beta_prior, alpha_prior, model);
  return run_mwg(t, cfg, default_initial_state(obs));
}

bool find_posterior_mode(const Target& target, ChainState& state, Mat* neg_hessian, int max_iter) {
  for (auto& v : state.beta.incl) v = 1;
  for (auto& v : state.alpha.incl) v = 1;
  MwgSampler s(target, SamplerConfig{}, state);
  double prev = s.log_posterior();
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    if (!s.climb(true, 1) || !s.climb(false, 1)) return false;
    const double cur = s.log_posterior();
    if (std::abs(cur - prev) <= 1e-14 * (1.0 + std::abs(cur))) {
      converged = true;
      break;
    }
    prev = cur;
  }
  if (!converged) return false;
  state = s.state();
  if (neg_hessian) *neg_hessian = s.joint_neg_hessian();
  return true;
}

PosteriorDraws run_rwm(const Target& target, const SamplerConfig& cfg, const ChainState& init, RwmCovariance kind) {
  cfg.validate();
  const auto t0 = Clock::now();
  const int kb = target.mean.map->size(), ka = target.var.map->size();
  const int d = kb + ka;
  ChainState st = init;
  for (auto& v : st.beta.incl) v = 1;
  for (auto& v : st.alpha.incl) v = 1;

  PosteriorDraws out;
  Mat L = Mat::Identity(d, d);
  double log_scale = std::log(0.1 / std::sqrt(d));
  if (kind == RwmCovariance::ScaledNegInvHessian) {
    ChainState mode = st;
    Mat nh;
    Eigen::LLT<Mat> llt;
    if (find_posterior_mode(target, mode, &nh) && (llt.compute(nh), llt.info() == Eigen::Success)) {
      const Mat cov = llt.solve(Mat::Identity(d, d));
      L = Eigen::LLT<Mat>(0.5 * (cov + cov.transpose())).matrixL();
      log_scale = std::log(2.38 / std::sqrt(d));
      st = mode;
    } else {
      out.diag.rwm_note = "mode finding failed; using the scaled identity";
    }
  }

  const std::vector<int> all_b = st.beta.active(), all_a = st.alpha.active();
  const auto log_post = [&](const Vec& theta) {
    const ParamBlock b = ParamBlock::full(theta.head(kb));
    const ParamBlock a = ParamBlock::full(theta.tail(ka));
    const double ll = joint_loglik(target, target.mean.map->predictor(b.coef, all_b),
                                   target.var.map->predictor(a.coef, all_a));
    if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
    return ll + log_prior(b, target.mean.prior) + log_prior(a, target.var.prior);
  };

  Vec theta(d);
  theta << st.beta.coef, st.alpha.coef;
  double lp = log_post(theta);
  if (!std::isfinite(lp)) throw std::runtime_error("rwm: log posterior is not finite at the initial state");

  Rng rng(cfg.seed);
  const int kept = cfg.n_iter - cfg.n_burn;
  out.beta.resize(kept, kb);
  out.alpha.resize(kept, ka);
  out.incl_beta.setOnes(kept, kb - 1);
  out.incl_alpha.setOnes(kept, ka - 1);
  long acc = 0;
  for (int it = 0; it < cfg.n_iter; ++it) {
    const Vec prop = theta + std::exp(log_scale) * (L * standard_normal(d, rng));
    const double lp_p = log_post(prop);
    const double log_ratio = lp_p - lp;
    const bool accepted = mh_accept(log_ratio, rng);
    if (accepted) {
      theta = prop;
      lp = lp_p;
    }
    if (it < cfg.n_burn) {
      const double a = std::isnan(log_ratio) ? 0.0 : std::exp(std::min(0.0, log_ratio));
      log_scale += std::pow(it + 1.0, -0.6) * (a - kTargetAccept);
      continue;
    }
    acc += accepted;
    const int r = it - cfg.n_burn;
    out.beta.row(r) = theta.head(kb).transpose();
    out.alpha.row(r) = theta.tail(ka).transpose();
  }
  out.accept_rate_beta = out.accept_rate_alpha = static_cast<double>(acc) / kept;
  out.diag.wall_seconds = seconds_since(t0);
  return out;
}

double inefficiency_factor(const Vec& chain) {
  const Eigen::Index n = chain.size();
  if (n < 100) throw std::invalid_argument("inefficiency_factor: need at least 100 draws, got " + std::to_string(n));
  if ((chain.array() == chain(0)).all()) return std::numeric_limits<double>::infinity();
  const Vec c = chain.array() - chain.mean();
  const double c0 = c.squaredNorm() / static_cast<double>(n);
  if (!(c0 > 0.0)) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (Eigen::Index k = 1; k <= n / 10; ++k) {
    const double rho = c.head(n - k).dot(c.tail(n - k)) / static_cast<double>(n) / c0;
    if (rho < 0.05) break;
    sum += rho;
  }
  return std::max(1.0, 1.0 + 2.0 * sum);
}

double ppm(const Mat& draws, int j) {
  if (draws.rows() < 1) throw std::invalid_argument("ppm: no draws");
  if (j < 0 || j >= draws.cols()) throw std::out_of_range("ppm: column out of range");
  return static_cast<double>((draws.col(j).array() > 0.0).count()) / static_cast<double>(draws.rows());
}

EfficiencyReport efficiency_report(const PosteriorDraws& draws, const std::vector<std::string>& names) {
  const Eigen::Index kb = draws.beta.cols(), ka = draws.alpha.cols();
  EfficiencyReport rep;
  rep.wall_seconds = draws.diag.wall_seconds;
  rep.inefficiency.resize(kb + ka);
  rep.draws_per_minute.resize(kb + ka);
  const double minutes = std::max(rep.wall_seconds, 1e-9) / 60.0;
  for (Eigen::Index j = 0; j < kb + ka; ++j) {
    const Vec col = j < kb ? Vec(draws.beta.col(j)) : Vec(draws.alpha.col(j - kb));
    rep.inefficiency(j) = inefficiency_factor(col);
    rep.draws_per_minute(j) = static_cast<double>(col.size()) / rep.inefficiency(j) / minutes;
    if (static_cast<std::size_t>(j) < names.size()) {
      rep.names.push_back(names[static_cast<std::size_t>(j)]);
    } else {
      rep.names.push_back(j < kb ? "beta" + std::to_string(j) : "alpha" + std::to_string(j - kb));
    }
  }
  return rep;
}

void write_draws_csv(std::ostream& out, const PosteriorDraws& draws) {
  const Eigen::Index kb = draws.beta.cols(), ka = draws.alpha.cols();
  std::vector<std::string> head;
  for (Eigen::Index j = 0; j < kb; ++j) head.push_back("beta" + std::to_string(j));
  for (Eigen::Index j = 0; j < ka; ++j) head.push_back("alpha" + std::to_string(j));
  for (Eigen::Index j = 0; j < draws.incl_beta.cols(); ++j) head.push_back("incl_beta" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < draws.incl_alpha.cols(); ++j) head.push_back("incl_alpha" + std::to_string(j + 1));
  for (std::size_t j = 0; j < head.size(); ++j) out << (j ? "," : "") << head[j];
  out << '\n' << std::setprecision(17);
  for (Eigen::Index r = 0; r < draws.beta.rows(); ++r) {
    for (Eigen::Index j = 0; j < kb; ++j) out << (j ? "," : "") << draws.beta(r, j);
    for (Eigen::Index j = 0; j < ka; ++j) out << ',' << draws.alpha(r, j);
    for (Eigen::Index j = 0; j < draws.incl_beta.cols(); ++j) out << ',' << int(draws.incl_beta(r, j));
    for (Eigen::Index j = 0; j < draws.incl_alpha.cols(); ++j) out << ',' << int(draws.incl_alpha(r, j));
    out << '\n';
  }
}

void write_diagnostics(std::ostream& out, const PosteriorDraws& draws, bool include_timing) {
  out << std::setprecision(17);
  out << "retained_draws = " << draws.beta.rows() << '\n';
  out << "accept_rate_beta = " << draws.accept_rate_beta << '\n';
  out << "accept_rate_alpha = " << draws.accept_rate_alpha << '\n';
  out << "newton_fallbacks = " << draws.diag.newton_fallbacks << '\n';
  out << "outer_product_used = " << draws.diag.outer_product_used << '\n';
  out << "step_halvings = " << draws.diag.step_halvings << '\n';
  if (!draws.diag.rwm_note.empty()) out << "rwm_note = " << draws.diag.rwm_note << '\n';
  if (include_timing) out << "wall_seconds = " << draws.diag.wall_seconds << '\n';
}

}  // namespace ncreg
