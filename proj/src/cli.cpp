#include "ncreg/cli.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "ncreg/dti.hpp"
#include "ncreg/fmri_sim.hpp"
#include "ncreg/nifti.hpp"
#include "ncreg/parallel.hpp"

namespace ncreg::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string short_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

[[noreturn]] void config_error(const std::string& what) { throw CliError(ErrorCategory::Config, what); }

void require_path(const std::string& key, const std::string& path, bool required) {
  if (path.empty()) {
    if (required) config_error(key + " is required");
    return;
  }
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) config_error(key + ": '" + path + "' does not exist or is not a file");
}

void validate_common(const RunConfig& cfg) {
  if (cfg.out.empty()) config_error("run.out (--out) is required");
  try {
    cfg.sampler.validate();
  } catch (const std::invalid_argument& e) {
    config_error(std::string("sampler: ") + e.what());
  }
  if (cfg.workers < 0) config_error("run.workers must be >= 0");
  if (cfg.coils < 1) config_error("model.coils must be >= 1");
  if (cfg.model != "ncchi" && cfg.coils != 1) config_error("model.coils > 1 needs model.family = ncchi");
  if (!(cfg.prior_d > 0.0)) config_error("prior.d must be > 0");
  if (!(cfg.prior_c > 0.0)) config_error("prior.c must be > 0");
  if (!(cfg.prior_pi > 0.0 && cfg.prior_pi < 1.0)) config_error("prior.pi must be in (0, 1)");
  if (!(cfg.b0_threshold >= 0.0)) config_error("dti.b0_threshold must be >= 0");
  if (cfg.max_voxels < 0) config_error("compare.max_voxels must be >= 0");
  cfg.noise_model();
}

// Inputs for the DTI commands: either a 4-D volume with its gradient table,
// or a CSV voxel with columns b, gx, gy, gz, y.
void validate_dti_inputs(const RunConfig& cfg, bool allow_series) {
  if (allow_series && !cfg.series.empty()) {
    require_path("input.series", cfg.series, true);
    if (!cfg.volume.empty()) config_error("give either input.series or input.volume, not both");
    return;
  }
  require_path("input.volume", cfg.volume, true);
  require_path("input.bvals", cfg.bvals, true);
  require_path("input.bvecs", cfg.bvecs, true);
  require_path("input.mask", cfg.mask, false);
}

DtiFitConfig dti_config(const RunConfig& cfg) {
  DtiFitConfig d;
  d.sampler = cfg.sampler;
  d.heteroscedastic = cfg.hetero;
  d.b0_threshold = cfg.b0_threshold;
  d.d = cfg.prior_d;
  d.c = cfg.prior_c;
  d.pi = cfg.prior_pi;
  return d;
}

template <class F>
auto input_stage(F&& f) {
  try {
    return f();
  } catch (const NiftiError& e) {
    throw CliError(ErrorCategory::Input, e.what());
  } catch (const TextTableError& e) {
    throw CliError(ErrorCategory::Input, e.what());
  }
}

struct DwiData {
  VolumeLite volume;
  GradientScheme scheme;
  std::vector<std::size_t> voxels;  // spatial indices to fit, ascending
  bool has_volume = false;
  Vec series;  // CSV voxel
};

DwiData load_dwi(const RunConfig& cfg, std::ostream& log) {
  DwiData d;
  std::vector<std::string> warnings;
  if (!cfg.series.empty()) {
    const CsvTable t = input_stage([&] { return read_csv_table(cfg.series); });
    const int cb = t.column("b"), cx = t.column("gx"), cy = t.column("gy"), cz = t.column("gz"), cyv = t.column("y");
    if (cb < 0 || cx < 0 || cy < 0 || cz < 0 || cyv < 0) {
      throw CliError(ErrorCategory::Input, cfg.series + ": DTI voxel needs columns b, gx, gy, gz, y");
    }
    d.scheme.b = t.values.col(cb);
    d.scheme.g.resize(t.values.rows(), 3);
    d.scheme.g << t.values.col(cx), t.values.col(cy), t.values.col(cz);
    for (Eigen::Index i = 0; i < d.scheme.b.size(); ++i) {
      const double nrm = d.scheme.g.row(i).norm();
      if (d.scheme.b(i) > 0.0 && nrm > 0.0) d.scheme.g.row(i) /= nrm;
    }
    d.series = t.values.col(cyv);
    d.voxels = {0};
    return d;
  }
  d.volume = input_stage([&] { return read_nifti1(cfg.volume); });
  d.scheme = input_stage([&] { return read_gradient_table(cfg.bvals, cfg.bvecs, &warnings); });
  d.has_volume = true;
  for (const std::string& w : warnings) log << "warning: " << w << '\n';
  if (d.volume.dims[3] != d.scheme.size()) {
    throw CliError(ErrorCategory::Input, cfg.volume + " has " + std::to_string(d.volume.dims[3]) +
                                             " volumes but the gradient table has " +
                                             std::to_string(d.scheme.size()) + " rows");
  }
  try {
    d.scheme.validate();
  } catch (const std::invalid_argument& e) {
    throw CliError(ErrorCategory::Input, std::string("gradient table: ") + e.what());
  }
  const std::size_t nvox = d.volume.spatial_size();
  if (!cfg.mask.empty()) {
    const VolumeLite mask = input_stage([&] { return read_nifti1(cfg.mask); });
    for (int k = 0; k < 3; ++k) {
      if (mask.dims[static_cast<std::size_t>(k)] != d.volume.dims[static_cast<std::size_t>(k)]) {
        throw CliError(ErrorCategory::Input, "mask " + cfg.mask + " does not match the volume's spatial dimensions");
      }
    }
    for (std::size_t v = 0; v < nvox; ++v)
      if (mask.data[v] != 0.0 && !std::isnan(mask.data[v])) d.voxels.push_back(v);
  } else {
    for (std::size_t v = 0; v < nvox; ++v) d.voxels.push_back(v);
  }
  return d;
}

Vec voxel_series(const DwiData& d, std::size_t v) {
  if (!d.has_volume) return d.series;
  const int nt = d.volume.dims[3];
  Vec y(nt);
  const std::size_t stride = d.volume.spatial_size();
  for (int t = 0; t < nt; ++t) y(t) = d.volume.data[v + stride * static_cast<std::size_t>(t)];
  return y;
}

std::array<int, 3> voxel_ijk(const VolumeLite& vol, std::size_t v) {
  const int nx = vol.dims[0], ny = vol.dims[1];
  const int idx = static_cast<int>(v);
  return {idx % nx, (idx / nx) % ny, idx / (nx * ny)};
}

std::string failure_kind(const std::exception& e) {
  if (dynamic_cast<const std::invalid_argument*>(&e)) return "invalid_input";
  if (dynamic_cast<const std::domain_error*>(&e)) return "domain";
  return "numeric";
}

std::string csv_text(std::string s) {
  std::replace(s.begin(), s.end(), ',', ';');
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

fs::path make_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (ec) throw CliError(ErrorCategory::Output, "cannot create output directory '" + cfg.out + "': " + ec.message());
  return fs::path(cfg.out);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CliError(ErrorCategory::Output, "cannot create '" + path.string() + "'");
  out << content;
  if (!out) throw CliError(ErrorCategory::Output, "write to '" + path.string() + "' failed");
}

void write_volume(const fs::path& path, const VolumeLite& vol) {
  try {
    write_nifti1(path.string(), vol);
  } catch (const NiftiError& e) {
    throw CliError(ErrorCategory::Output, e.what());
  }
}

std::string timing_text(const std::vector<std::pair<std::string, double>>& rows) {
  std::ostringstream os;
  for (const auto& [k, v] : rows) os << k << " = " << v << '\n';
  return os.str();
}

// fit-dti --------------------------------------------------------------------

struct VoxelRecord {
  bool ok = false;
  TensorPosterior tensor;
  double accept_beta = 0.0;
  double accept_alpha = 0.0;
  std::string kind;
  std::string what;
};

void run_fit_dti(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = Clock::now();
  const DwiData data = load_dwi(cfg, log);
  const NoiseModel model = cfg.noise_model();
  const DtiFitConfig base = dti_config(cfg);
  const fs::path out = make_out_dir(cfg);

  const auto t_fit = Clock::now();
  std::vector<VoxelRecord> rec(data.voxels.size());
  parallel_for(data.voxels.size(), cfg.resolved_workers(), [&](std::size_t k) {
    const std::size_t v = data.voxels[k];
    VoxelRecord& r = rec[k];
    DtiFitConfig fc = base;
    fc.sampler.seed = stream_seed(cfg.seed, v);
    try {
      const DtiFit fit = fit_voxel(voxel_series(data, v), data.scheme, model, fc);
      r.tensor = fit.tensor;
      r.accept_beta = fit.draws.accept_rate_beta;
      r.accept_alpha = fit.draws.accept_rate_alpha;
      if (!std::isfinite(r.tensor.fa_mean) || !std::isfinite(r.tensor.md_mean)) {
        r.kind = "nonfinite";
        r.what = "posterior FA/MD summary is not finite";
      } else {
        r.ok = true;
      }
    } catch (const std::exception& e) {
      r.kind = failure_kind(e);
      r.what = e.what();
    }
  });
  const double fit_seconds = seconds_since(t_fit);

  VolumeLite map = data.volume;
  map.dims[3] = 1;
  map.datatype = 16;
  map.scl_slope = 1.0f;
  map.scl_inter = 0.0f;
  map.tr = 0.0f;
  map.data.assign(map.spatial_size(), std::numeric_limits<double>::quiet_NaN());
  VolumeLite fa_mean = map, fa_sd = map, md_mean = map, md_sd = map;
  std::ostringstream summary, failures;
  summary << "voxel,i,j,k,fa_mean,fa_sd,md_mean,md_sd,s0_mean,accept_beta,accept_alpha,nonpd_draws\n";
  failures << "voxel,i,j,k,kind,message\n";
  int n_fail = 0;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const std::size_t v = data.voxels[k];
    const auto ijk = voxel_ijk(map, v);
    const VoxelRecord& r = rec[k];
    const std::string where =
        std::to_string(v) + "," + std::to_string(ijk[0]) + "," + std::to_string(ijk[1]) + "," + std::to_string(ijk[2]);
    if (!r.ok) {
      ++n_fail;
      failures << where << ',' << r.kind << ',' << csv_text(r.what) << '\n';
      continue;
    }
    fa_mean.data[v] = r.tensor.fa_mean;
    fa_sd.data[v] = r.tensor.fa_sd;
    md_mean.data[v] = r.tensor.md_mean;
    md_sd.data[v] = r.tensor.md_sd;
    summary << where << ',' << num(r.tensor.fa_mean) << ',' << num(r.tensor.fa_sd) << ',' << num(r.tensor.md_mean)
            << ',' << num(r.tensor.md_sd) << ',' << num(r.tensor.s0_mean) << ',' << num(r.accept_beta) << ','
            << num(r.accept_alpha) << ',' << r.tensor.nonpd_draws << '\n';
  }
  write_volume(out / "fa_mean.nii", fa_mean);
  write_volume(out / "fa_sd.nii", fa_sd);
  write_volume(out / "md_mean.nii", md_mean);
  write_volume(out / "md_sd.nii", md_sd);
  write_file(out / "summary.csv", summary.str());
  write_file(out / "failures.csv", failures.str());
  write_file(out / "timing.txt", timing_text({{"voxels", static_cast<double>(rec.size())},
                                              {"workers", static_cast<double>(cfg.resolved_workers())},
                                              {"fit_seconds", fit_seconds},
                                              {"total_seconds", seconds_since(t0)}}));
  log << "fit-dti: " << rec.size() << " voxels, " << n_fail << " failed, " << fit_seconds << " s\n";
}

// fit-voxel ------------------------------------------------------------------

struct RegressionInput {
  ObservationSet obs;
  std::vector<std::string> beta_names;
  std::vector<std::string> alpha_names;
};

bool is_dti_table(const CsvTable& t) {
  return t.column("b") >= 0 && t.column("gx") >= 0 && t.column("gy") >= 0 && t.column("gz") >= 0;
}

// y plus x_* columns for the mean and z_* columns for the variance.
RegressionInput regression_input(const CsvTable& t, const RunConfig& cfg, std::ostream& log) {
  const int cy = t.column("y");
  if (cy < 0) throw CliError(ErrorCategory::Input, cfg.series + ": no y column");
  std::vector<int> xc, zc;
  for (std::size_t j = 0; j < t.header.size(); ++j) {
    if (t.header[j].rfind("x_", 0) == 0) xc.push_back(static_cast<int>(j));
    if (t.header[j].rfind("z_", 0) == 0) zc.push_back(static_cast<int>(j));
  }
  if (!cfg.hetero && !zc.empty()) log << "warning: hetero is off, z_ columns ignored\n";
  if (cfg.hetero && zc.empty()) zc = xc;
  if (!cfg.hetero) zc.clear();
  const auto design = [&](const std::vector<int>& cols, std::vector<std::string>& names, const char* intercept) {
    names = {intercept};
    if (cols.empty()) return Mat(Mat::Ones(t.values.rows(), 1));
    Mat raw(t.values.rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) {
      raw.col(static_cast<Eigen::Index>(j)) = t.values.col(cols[j]);
      names.push_back(t.header[static_cast<std::size_t>(cols[j])]);
    }
    try {
      return standardize(raw).X;
    } catch (const std::invalid_argument& e) {
      throw CliError(ErrorCategory::Input, cfg.series + ": " + e.what());
    }
  };
  std::vector<std::string> bn, an;
  Mat X = design(xc, bn, "beta_0");
  Mat Z = design(zc, an, "alpha_0");
  for (std::size_t j = 1; j < an.size(); ++j) an[j] = "alpha_" + an[j];
  for (std::size_t j = 1; j < bn.size(); ++j) bn[j] = "beta_" + bn[j];
  try {
    return {ObservationSet(t.values.col(cy), std::move(X), std::move(Z)), bn, an};
  } catch (const std::invalid_argument& e) {
    throw CliError(ErrorCategory::Input, cfg.series + ": " + e.what());
  }
}

void write_summary(std::ostringstream& os, const Mat& draws, const std::vector<std::string>& names) {
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const Vec c = draws.col(j);
    const double m = c.mean();
    const double sd = c.size() > 1 ? std::sqrt((c.array() - m).square().sum() / static_cast<double>(c.size() - 1)) : 0.0;
    os << names[static_cast<std::size_t>(j)] << ',' << num(m) << ',' << num(sd) << ',' << num(ppm(draws, static_cast<int>(j)))
       << '\n';
  }
}

std::vector<std::string> dti_beta_names() {
  return {"beta_0", "omega_1", "omega_2", "omega_3", "omega_4", "omega_5", "omega_6"};
}

std::vector<std::string> dti_alpha_names(int cols) {
  static const char* const names[] = {"alpha_0", "alpha_dxx", "alpha_dyy", "alpha_dzz", "alpha_dxy", "alpha_dyz", "alpha_dxz"};
  std::vector<std::string> out;
  for (int j = 0; j < cols; ++j) out.emplace_back(j < 7 ? names[j] : "alpha_" + std::to_string(j));
  return out;
}

void run_fit_voxel(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = Clock::now();
  const NoiseModel model = cfg.noise_model();
  std::optional<CsvTable> table;
  if (!cfg.series.empty()) table = input_stage([&] { return read_csv_table(cfg.series); });

  PosteriorDraws draws;
  std::vector<std::string> bn, an;
  std::optional<TensorPosterior> tensor;
  double fit_seconds = 0.0;
  std::string failure;

  if (table && !is_dti_table(*table)) {
    const RegressionInput in = regression_input(*table, cfg, log);
    IndPrior bp, ap;
    try {
      const auto pr = study_priors(in.obs.y(), in.obs.X(), model);
      bp = IndPrior::make(pr.first.m, pr.first.s2, pr.first.slope_cov, cfg.prior_pi);
      ap = IndPrior::make(pr.second.m, pr.second.s2, cfg.prior_c * Mat::Identity(in.obs.q(), in.obs.q()),
                          cfg.prior_pi);
    } catch (const std::exception& e) {
      throw CliError(ErrorCategory::Input, cfg.series + ": " + e.what());
    }
    make_out_dir(cfg);
    const Target target = Target::regression(in.obs, bp, ap, model, true);
    SamplerConfig sc = cfg.sampler;
    sc.seed = stream_seed(cfg.seed, 0);
    const auto t_fit = Clock::now();
    draws = run_mwg(target, sc, default_initial_state(in.obs));
    fit_seconds = seconds_since(t_fit);
    bn = in.beta_names;
    an = in.alpha_names;
  } else {
    const DwiData data = load_dwi(cfg, log);
    std::size_t v = 0;
    if (!table) {
      const auto& ijk = *cfg.voxel;
      for (int d = 0; d < 3; ++d) {
        if (ijk[static_cast<std::size_t>(d)] < 0 || ijk[static_cast<std::size_t>(d)] >= data.volume.dims[static_cast<std::size_t>(d)]) {
          throw CliError(ErrorCategory::Input, "voxel index " + std::to_string(ijk[static_cast<std::size_t>(d)]) +
                                                   " is outside dimension " + std::to_string(d) + " of " + cfg.volume);
        }
      }
      v = data.volume.index(ijk[0], ijk[1], ijk[2]);
    }
    make_out_dir(cfg);
    DtiFitConfig fc = dti_config(cfg);
    fc.sampler.seed = stream_seed(cfg.seed, v);
    const auto t_fit = Clock::now();
    try {
      DtiFit fit = fit_voxel(voxel_series(data, v), data.scheme, model, fc);
      draws = std::move(fit.draws);
      tensor = fit.tensor;
    } catch (const std::invalid_argument& e) {
      throw CliError(ErrorCategory::Input, std::string("voxel: ") + e.what());
    }
    fit_seconds = seconds_since(t_fit);
    bn = dti_beta_names();
    an = dti_alpha_names(static_cast<int>(draws.alpha.cols()));
  }

  const fs::path out(cfg.out);
  std::ostringstream dcsv, diag, summary;
  dcsv << "# columns:";
  for (const auto& n : bn) dcsv << ' ' << n;
  for (const auto& n : an) dcsv << ' ' << n;
  dcsv << " then beta and alpha slope indicators\n";
  write_draws_csv(dcsv, draws);
  write_diagnostics(diag, draws, false);
  summary << "parameter,mean,sd,ppm\n";
  write_summary(summary, draws.beta, bn);
  write_summary(summary, draws.alpha, an);
  if (tensor) {
    summary << "fa," << num(tensor->fa_mean) << ',' << num(tensor->fa_sd) << ",nan\n";
    summary << "md," << num(tensor->md_mean) << ',' << num(tensor->md_sd) << ",nan\n";
    diag << "nonpd_draws = " << tensor->nonpd_draws << '\n';
  }
  write_file(out / "draws.csv", dcsv.str());
  write_file(out / "diagnostics.txt", diag.str());
  write_file(out / "summary.csv", summary.str());
  write_file(out / "timing.txt",
             timing_text({{"fit_seconds", fit_seconds}, {"total_seconds", seconds_since(t0)}}));
  log << "fit-voxel: " << draws.beta.rows() << " draws, acceptance " << draws.accept_rate_beta << " / "
      << draws.accept_rate_alpha << '\n';
}

// compare-samplers -------------------------------------------------------------

struct CompareRecord {
  bool ok = false;
  std::string kind;
  std::string what;
  std::array<EfficiencyReport, 3> rep;
  std::array<double, 3> accept_beta{};
  std::array<double, 3> accept_alpha{};
};

const std::array<const char*, 3> kSamplers{"mwg", "rwm_identity", "rwm_neg_inv_hessian"};

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

void run_compare_samplers(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = Clock::now();
  DwiData data = load_dwi(cfg, log);
  if (cfg.max_voxels > 0 && static_cast<int>(data.voxels.size()) > cfg.max_voxels) {
    data.voxels.resize(static_cast<std::size_t>(cfg.max_voxels));
  }
  const NoiseModel model = cfg.noise_model();
  const DtiFitConfig base = dti_config(cfg);
  const fs::path out = make_out_dir(cfg);

  std::vector<CompareRecord> rec(data.voxels.size());
  parallel_for(data.voxels.size(), cfg.resolved_workers(), [&](std::size_t k) {
    const std::size_t v = data.voxels[k];
    CompareRecord& r = rec[k];
    try {
      const DtiProblem p = dti_problem(voxel_series(data, v), data.scheme, model, base);
      const std::uint64_t vs = stream_seed(cfg.seed, v);
      for (int s = 0; s < 3; ++s) {
        SamplerConfig sc = base.sampler;
        sc.seed = stream_seed(vs, static_cast<std::uint64_t>(s) + 1);
        const PosteriorDraws d = s == 0   ? run_mwg(p.target, sc, p.init)
                                 : s == 1 ? run_rwm(p.target, sc, p.init, RwmCovariance::ScaledIdentity)
                                          : run_rwm(p.target, sc, p.init, RwmCovariance::ScaledNegInvHessian);
        r.rep[static_cast<std::size_t>(s)] = efficiency_report(d);
        r.accept_beta[static_cast<std::size_t>(s)] = d.accept_rate_beta;
        r.accept_alpha[static_cast<std::size_t>(s)] = d.accept_rate_alpha;
      }
      r.ok = true;
    } catch (const std::exception& e) {
      r.kind = failure_kind(e);
      r.what = e.what();
    }
  });

  std::ostringstream eff, timing, failures, summary;
  eff << "voxel,sampler,parameter,inefficiency,accept_beta,accept_alpha\n";
  timing << "voxel,sampler,wall_seconds,parameter,draws_per_minute\n";
  failures << "voxel,kind,message\n";
  summary << "sampler,voxels,median_max_if_beta,median_max_if_alpha,median_accept_beta\n";
  std::array<std::vector<double>, 3> if_beta, if_alpha, acc;
  for (std::size_t k = 0; k < rec.size(); ++k) {
    const CompareRecord& r = rec[k];
    const std::size_t v = data.voxels[k];
    if (!r.ok) {
      failures << v << ',' << r.kind << ',' << csv_text(r.what) << '\n';
      continue;
    }
    for (std::size_t s = 0; s < 3; ++s) {
      const EfficiencyReport& e = r.rep[s];
      const std::vector<std::string> names = [&] {
        std::vector<std::string> n = dti_beta_names();
        for (const auto& a : dti_alpha_names(static_cast<int>(e.inefficiency.size()) - 7)) n.push_back(a);
        return n;
      }();
      for (Eigen::Index j = 0; j < e.inefficiency.size(); ++j) {
        eff << v << ',' << kSamplers[s] << ',' << names[static_cast<std::size_t>(j)] << ',' << num(e.inefficiency(j))
            << ',' << num(r.accept_beta[s]) << ',' << num(r.accept_alpha[s]) << '\n';
        timing << v << ',' << kSamplers[s] << ',' << e.wall_seconds << ',' << names[static_cast<std::size_t>(j)] << ','
               << e.draws_per_minute(j) << '\n';
      }
      if_beta[s].push_back(e.inefficiency.head(7).maxCoeff());
      if_alpha[s].push_back(e.inefficiency.tail(e.inefficiency.size() - 7).maxCoeff());
      acc[s].push_back(r.accept_beta[s]);
    }
  }
  for (std::size_t s = 0; s < 3; ++s) {
    summary << kSamplers[s] << ',' << if_beta[s].size() << ',' << num(median(if_beta[s])) << ','
            << num(median(if_alpha[s])) << ',' << num(median(acc[s])) << '\n';
  }
  write_file(out / "efficiency.csv", eff.str());
  write_file(out / "efficiency_summary.csv", summary.str());
  write_file(out / "failures.csv", failures.str());
  write_file(out / "timing.csv", timing.str());
  write_file(out / "timing.txt", timing_text({{"total_seconds", seconds_since(t0)}}));
  log << "compare-samplers: " << rec.size() << " voxels\n";
}

// simulate-fmri ----------------------------------------------------------------

void run_simulate_fmri(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = Clock::now();
  SimDesign design = SimDesign::standard();
  design.n_datasets = cfg.fmri_datasets;
  design.snr_levels = cfg.fmri_snr;
  design.seed = cfg.seed;
  try {
    design.validate();
  } catch (const std::invalid_argument& e) {
    config_error(std::string("fmri: ") + e.what());
  }
  if (cfg.is_set("model.family") || cfg.is_set("model.coils")) {
    log << "warning: simulate-fmri always fits the Rician and Gaussian models; model settings ignored\n";
  }
  StudyConfig sc = StudyConfig::standard();
  sc.sampler.n_iter = cfg.sampler.n_iter;
  sc.sampler.n_burn = cfg.sampler.n_burn;
  sc.sampler.t_dof = cfg.sampler.t_dof;
  sc.sampler.vs_subset_size = cfg.sampler.vs_subset_size;
  if (cfg.is_set("sampler.newton_steps")) sc.sampler.newton_steps = cfg.sampler.newton_steps;
  sc.sampler.seed = cfg.seed;
  sc.workers = cfg.resolved_workers();
  sc.variable_selection = cfg.fmri_variable_selection;
  sc.thresholds = cfg.fmri_thresholds;
  const fs::path out = make_out_dir(cfg);

  const std::size_t total = static_cast<std::size_t>(design.voxels()) * design.n_datasets * design.snr_levels.size();
  std::size_t last = 0;
  StudyResult res;
  try {
    res = run_study(design, sc, [&](std::size_t done, std::size_t) {
      if (done * 20 / total > last) {
        last = done * 20 / total;
        log << "simulate-fmri: " << 5 * last << "%\n" << std::flush;
      }
    });
  } catch (const std::domain_error& e) {
    config_error(std::string("fmri: ") + e.what());
  }

  std::ostringstream rates, effects, failures, mono;
  rates << "model,snr,threshold,t_ratio,rate\n";
  for (const StudyCell& c : res.cells) {
    for (const DetectionMap& m : c.maps) {
      const std::string stem = "detection_" + c.model + "_snr" + short_num(c.snr) + "_p" + short_num(m.threshold);
      std::ostringstream csv, pgm;
      write_detection_csv(csv, m);
      write_detection_pgm(pgm, m);
      write_file(out / (stem + ".csv"), csv.str());
      write_file(out / (stem + ".pgm"), pgm.str());
      for (double t : res.t_levels) {
        rates << c.model << ',' << short_num(c.snr) << ',' << short_num(m.threshold) << ',' << short_num(t) << ','
              << num(region_rate(design, m, t)) << '\n';
      }
    }
  }
  effects << "snr,t_ratio,gamma\n";
  for (Eigen::Index s = 0; s < res.effects.rows(); ++s)
    for (Eigen::Index k = 0; k < res.effects.cols(); ++k)
      effects << short_num(design.snr_levels[static_cast<std::size_t>(s)]) << ','
              << short_num(res.t_levels[static_cast<std::size_t>(k)]) << ',' << num(res.effects(s, k)) << '\n';
  failures << "snr,model,dataset,voxel,message\n";
  for (const VoxelFailure& f : res.failures)
    failures << short_num(f.snr) << ',' << f.model << ',' << f.dataset << ',' << f.voxel << ',' << csv_text(f.what)
             << '\n';
  for (double thr : sc.thresholds) {
    const MonotonicityReport r = check_monotonicity(design, res, thr);
    mono << "threshold = " << short_num(thr) << '\n'
         << "  snr_comparisons = " << r.snr_comparisons << '\n'
         << "  snr_inversions = " << r.snr_inversions << '\n'
         << "  t_comparisons = " << r.t_comparisons << '\n'
         << "  t_inversions = " << r.t_inversions << '\n'
         << "  rician_above_gaussian_at_lowest_snr = " << (r.rician_above_gaussian_at_lowest_snr ? "yes" : "no") << '\n'
         << "  holds = " << (r.holds() ? "yes" : "no") << '\n';
  }
  write_file(out / "region_rates.csv", rates.str());
  write_file(out / "effects.csv", effects.str());
  write_file(out / "failures.csv", failures.str());
  write_file(out / "monotonicity.txt", mono.str());
  write_file(out / "timing.txt", timing_text({{"study_seconds", res.wall_seconds}, {"total_seconds", seconds_since(t0)}}));
  log << "simulate-fmri: " << res.failures.size() << " failed fits, " << res.wall_seconds << " s\n";
}

}  // namespace

Command parse_command(std::string_view name) {
  if (name == "fit-dti") return Command::FitDti;
  if (name == "fit-voxel") return Command::FitVoxel;
  if (name == "compare-samplers") return Command::CompareSamplers;
  if (name == "simulate-fmri") return Command::SimulateFmri;
  throw CliError(ErrorCategory::Usage, "unknown command '" + std::string(name) + "'");
}

const char* to_string(Command c) {
  switch (c) {
    case Command::FitDti:
      return "fit-dti";
    case Command::FitVoxel:
      return "fit-voxel";
    case Command::CompareSamplers:
      return "compare-samplers";
    case Command::SimulateFmri:
      return "simulate-fmri";
  }
  return "unknown";
}

void validate(Command c, const RunConfig& cfg) {
  validate_common(cfg);
  switch (c) {
    case Command::FitDti:
      if (!cfg.series.empty()) config_error("fit-dti reads a volume; input.series is not used");
      validate_dti_inputs(cfg, false);
      break;
    case Command::FitVoxel:
      if (cfg.series.empty()) {
        validate_dti_inputs(cfg, false);
        if (!cfg.voxel) config_error("fit-voxel on a volume needs input.voxel (--voxel i,j,k)");
      } else {
        require_path("input.series", cfg.series, true);
        if (!cfg.volume.empty()) config_error("give either input.series or input.volume, not both");
      }
      break;
    case Command::CompareSamplers:
      validate_dti_inputs(cfg, true);
      break;
    case Command::SimulateFmri:
      if (cfg.fmri_datasets < 1) config_error("fmri.datasets must be >= 1");
      for (double s : cfg.fmri_snr)
        if (!(s > 0.0)) config_error("fmri.snr values must be > 0");
      for (double t : cfg.fmri_thresholds)
        if (!(t > 0.0 && t < 1.0)) config_error("fmri.thresholds must be in (0, 1)");
      break;
  }
}

void run(Command c, const RunConfig& cfg, std::ostream& log) {
  switch (c) {
    case Command::FitDti:
      run_fit_dti(cfg, log);
      break;
    case Command::FitVoxel:
      run_fit_voxel(cfg, log);
      break;
    case Command::CompareSamplers:
      run_compare_samplers(cfg, log);
      break;
    case Command::SimulateFmri:
      run_simulate_fmri(cfg, log);
      break;
  }
}

int execute(Command c, const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    validate(c, cfg);
    run(c, cfg, log);
    return 0;
  } catch (const CliError& e) {
    err << "error (" << to_string(e.category()) << "): " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    err << "error (internal): " << e.what() << '\n';
    return static_cast<int>(ErrorCategory::Internal);
  }
}

const std::vector<std::string>& timing_files() {
  static const std::vector<std::string> names{"timing.txt", "timing.csv"};
  return names;
}

}  // namespace ncreg::cli
