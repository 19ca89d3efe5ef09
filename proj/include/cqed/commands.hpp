#pragma once

// Subcommands of the command-line tool.  Each writes its result files into
// an output directory together with manifest.json, which lists every file
// with its sha256 and the config digest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cqed/config.hpp"
#include "cqed/error.hpp"

namespace cqed {

inline constexpr const char* kToolName = "cqedsim";
const char* tool_version();

// Command-line overrides; the out directory may also come from CQED_OUT_DIR
// (flag > environment > config).
struct RunOverrides {
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<OutputFormat> format;
};

ExperimentConfig apply_overrides(ExperimentConfig c, const RunOverrides& o);

struct RunResult {
  std::filesystem::path directory;
  std::vector<std::string> files;  // relative to directory, manifest last
};

// Every command validates first and throws ConfigError, SolverError or
// IoError (exit codes 2, 3, 4).
RunResult cmd_spectrum(const ExperimentConfig& c);
RunResult cmd_distribution(const ExperimentConfig& c);
RunResult cmd_detuning_sweep(const ExperimentConfig& c);
RunResult cmd_fit(const ExperimentConfig& c);
RunResult cmd_calibrate(const ExperimentConfig& c);

struct VerifyReport {
  bool config_matches = true;  // manifest digest equals the config's
  bool files_intact = true;    // every listed file present, unmodified, digest embedded
  std::vector<std::string> problems;

  bool ok() const { return config_matches && files_intact; }
};

VerifyReport cmd_verify(const ExperimentConfig& c, const std::filesystem::path& out_dir);

// Target spectra are read from the CSV layout written by cmd_spectrum
// (axis_value in MHz offset from omega_q).  ConfigError on malformed content.
Spectrum read_spectrum_csv(const std::filesystem::path& path, double omega_q);

// Machine-readable error document printed on stderr by the tool.
std::string error_json(const std::string& kind, const std::string& message, int exit_code);

int exit_code_for(ErrorKind kind);

}  // namespace cqed
