#pragma once

// Text inputs (FSL gradient tables, CSV tables), run configuration and the
// error categories shared by the command-line tool.

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ncreg/dti.hpp"
#include "ncreg/sampler.hpp"

namespace ncreg {

/// Exit codes of the command-line tool by failure category.
enum class ErrorCategory { Internal = 1, Usage = 2, Config = 3, Input = 4, Output = 5 };

const char* to_string(ErrorCategory c);

class CliError : public std::runtime_error {
 public:
  CliError(ErrorCategory category, const std::string& what) : std::runtime_error(what), category_(category) {}
  ErrorCategory category() const { return category_; }
  int exit_code() const { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
};

/// Parse error in a text table. line and column are 1-based; column 0 means
/// the whole file.
class TextTableError : public std::runtime_error {
 public:
  TextTableError(const std::string& file, int line, int column, const std::string& what);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// FSL convention: bvals holds n numbers (any line layout), bvecs three rows
/// of n numbers. An n x 3 bvecs layout is accepted with a warning. Directions
/// with b > 0 are normalized (warning when |g| is off by more than 1e-3); a
/// zero direction with b > 0 is read as b = 0 with a warning.
GradientScheme parse_gradient_table(const std::string& bvals_text, const std::string& bvecs_text,
                                    std::vector<std::string>* warnings = nullptr,
                                    const std::string& bvals_name = "bvals", const std::string& bvecs_name = "bvecs");

GradientScheme read_gradient_table(const std::string& bvals_path, const std::string& bvecs_path,
                                   std::vector<std::string>* warnings = nullptr);

std::string read_text_file(const std::string& path);

/// Comma-separated numeric table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  Mat values;

  /// Column index of name, or -1.
  int column(const std::string& name) const;
};

CsvTable parse_csv_table(const std::string& text, const std::string& name = "csv");
CsvTable read_csv_table(const std::string& path);

/// Settings for one command. Every field has a config key (section.key) and
/// most have a flag; see apply_setting.
struct RunConfig {
  // [input]
  std::string volume;
  std::string bvals;
  std::string bvecs;
  std::string mask;
  std::string series;  // CSV voxel for fit-voxel / compare-samplers
  std::optional<std::array<int, 3>> voxel;
  // [model]
  std::string model = "rician";
  int coils = 1;
  bool hetero = false;
  // [prior]
  double prior_d = 0.1;
  double prior_c = 100.0;
  double prior_pi = 0.5;
  // [sampler]
  SamplerConfig sampler;
  // [run]
  std::uint64_t seed = 1;
  int workers = 0;  // 0: available parallelism
  std::string out;
  // [dti]
  double b0_threshold = 50.0;
  // [fmri]
  int fmri_datasets = 20;
  std::vector<double> fmri_snr{1.0, 2.0, 3.0};
  std::vector<double> fmri_thresholds{0.95, 0.99};
  bool fmri_variable_selection = false;
  // [compare]
  int max_voxels = 0;  // 0: every voxel in the mask

  std::set<std::string> explicitly_set;  // keys given in the file or by flags

  NoiseModel noise_model() const;
  int resolved_workers() const;
  bool is_set(const std::string& key) const { return explicitly_set.count(key) > 0; }
};

/// Sets section.key from its text value. Throws CliError(Config) for unknown
/// keys and unparsable values.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Keys accepted by apply_setting.
const std::vector<std::string>& config_keys();

/// Reads an INI file of key = value lines under [section] headers.
RunConfig load_run_config(const std::string& path);

/// File settings first, then overrides in order (flags win).
RunConfig resolve_run_config(const std::string& config_path,
                             const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace ncreg
