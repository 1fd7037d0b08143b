#pragma once

// Command implementations behind the ncreg tool. Each command validates its
// configuration and reads all inputs before creating the output directory,
// so a failed validation leaves nothing behind. Files whose content depends
// on wall-clock time are kept apart (timing.txt, timing.csv) so every other
// output is a function of the configuration and seed alone.

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "ncreg/io.hpp"

namespace ncreg::cli {

enum class Command { FitDti, FitVoxel, CompareSamplers, SimulateFmri };

/// "fit-dti", "fit-voxel", "compare-samplers", "simulate-fmri".
Command parse_command(std::string_view name);
const char* to_string(Command c);

/// Throws CliError(Config) naming the first problem: missing or nonexistent
/// input paths, empty output directory, out-of-range numbers.
void validate(Command c, const RunConfig& cfg);

/// Runs a validated command, writing progress and warnings to log. Throws
/// CliError; per-voxel failures are written to failures.csv instead.
void run(Command c, const RunConfig& cfg, std::ostream& log);

/// validate + run. Returns the exit code and prints "error (category): ..."
/// to err on failure.
int execute(Command c, const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Names of the output files that hold wall-clock measurements.
const std::vector<std::string>& timing_files();

}  // namespace ncreg::cli
