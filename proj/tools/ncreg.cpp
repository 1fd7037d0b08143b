#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "ncreg/cli.hpp"

namespace {

struct Flags {
  std::string config;
  std::string input;
  std::string bvals;
  std::string bvecs;
  std::string mask;
  std::string model;
  std::string coils;
  std::string iters;
  std::string burn;
  std::string seed;
  std::string workers;
  std::string hetero;
  std::string out;
  std::string voxel;
  std::string newton_steps;
  std::string max_voxels;
  std::string datasets;
  std::string snr;
  std::string thresholds;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "INI file of key = value settings under [section] headers");
  sub->add_option("--model", f.model, "noise model")->check(CLI::IsMember({"rician", "ncchi", "gaussian"}));
  sub->add_option("--coils", f.coils, "number of coils L (ncchi)");
  sub->add_option("--iters", f.iters, "total MCMC iterations");
  sub->add_option("--burn", f.burn, "burn-in iterations");
  sub->add_option("--newton-steps", f.newton_steps, "Newton steps per proposal");
  sub->add_option("--seed", f.seed, "global seed");
  sub->add_option("--workers", f.workers, "worker threads (0: available parallelism)");
  sub->add_option("--hetero", f.hetero, "heteroscedastic variance model")->check(CLI::IsMember({"on", "off"}));
  sub->add_option("--out", f.out, "output directory");
}

void add_dwi(CLI::App* sub, Flags& f) {
  sub->add_option("--input", f.input, "4-D NIfTI-1 volume, or a CSV voxel (b,gx,gy,gz,y)");
  sub->add_option("--bvals", f.bvals, "FSL bvals file");
  sub->add_option("--bvecs", f.bvecs, "FSL bvecs file");
  sub->add_option("--mask", f.mask, "NIfTI-1 mask, nonzero voxels are fitted");
}

bool is_csv(const std::string& path) { return path.size() > 4 && path.compare(path.size() - 4, 4, ".csv") == 0; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian regression for magnitude MRI data with Rician and noncentral chi noise"};
  app.require_subcommand(1);
  Flags f;

  auto* dti = app.add_subcommand("fit-dti", "tensor fit of every voxel in a mask, FA/MD maps");
  add_dwi(dti, f);
  add_common(dti, f);

  auto* voxel = app.add_subcommand("fit-voxel", "draws and diagnostics for one voxel or series");
  add_dwi(voxel, f);
  add_common(voxel, f);
  voxel->add_option("--voxel", f.voxel, "voxel indices i,j,k in the volume");

  auto* compare = app.add_subcommand("compare-samplers", "inefficiency of MwG against two random-walk samplers");
  add_dwi(compare, f);
  add_common(compare, f);
  compare->add_option("--max-voxels", f.max_voxels, "fit at most this many mask voxels (0: all)");

  auto* fmri = app.add_subcommand("simulate-fmri", "simulated block-design fMRI detection study");
  add_common(fmri, f);
  fmri->add_option("--datasets", f.datasets, "simulated datasets per SNR level");
  fmri->add_option("--snr", f.snr, "comma-separated SNR levels");
  fmri->add_option("--thresholds", f.thresholds, "comma-separated PPM thresholds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ncreg::ErrorCategory::Usage);
  }

  CLI::App* sub = app.get_subcommands().front();
  const ncreg::cli::Command command = ncreg::cli::parse_command(sub->get_name());

  std::vector<std::pair<std::string, std::string>> overrides;
  const auto flag = [&](const char* name, const char* key, const std::string& value) {
    const CLI::Option* opt = sub->get_option_no_throw(name);
    if (opt && opt->count() > 0) overrides.emplace_back(key, value);
  };
  if (const CLI::Option* opt = sub->get_option_no_throw("--input"); opt && opt->count() > 0) {
    const bool series = command != ncreg::cli::Command::FitDti && is_csv(f.input);
    overrides.emplace_back(series ? "input.series" : "input.volume", f.input);
  }
  flag("--bvals", "input.bvals", f.bvals);
  flag("--bvecs", "input.bvecs", f.bvecs);
  flag("--mask", "input.mask", f.mask);
  flag("--voxel", "input.voxel", f.voxel);
  flag("--model", "model.family", f.model);
  flag("--coils", "model.coils", f.coils);
  flag("--hetero", "model.hetero", f.hetero);
  flag("--iters", "sampler.iters", f.iters);
  flag("--burn", "sampler.burn", f.burn);
  flag("--newton-steps", "sampler.newton_steps", f.newton_steps);
  flag("--seed", "run.seed", f.seed);
  flag("--workers", "run.workers", f.workers);
  flag("--out", "run.out", f.out);
  flag("--max-voxels", "compare.max_voxels", f.max_voxels);
  flag("--datasets", "fmri.datasets", f.datasets);
  flag("--snr", "fmri.snr", f.snr);
  flag("--thresholds", "fmri.thresholds", f.thresholds);

  ncreg::RunConfig cfg;
  try {
    if (!f.config.empty()) {
      std::error_code ec;
      if (!std::filesystem::is_regular_file(f.config, ec)) {
        throw ncreg::CliError(ncreg::ErrorCategory::Config, "--config: '" + f.config + "' does not exist");
      }
    }
    cfg = ncreg::resolve_run_config(f.config, overrides);
  } catch (const ncreg::CliError& e) {
    std::cerr << "error (" << ncreg::to_string(e.category()) << "): " << e.what() << '\n';
    return e.exit_code();
  }
  return ncreg::cli::execute(command, cfg, std::cerr, std::cerr);
}
