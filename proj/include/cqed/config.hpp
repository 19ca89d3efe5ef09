#pragma once

// Experiment configuration: a sectioned key=value text format with explicit
// unit suffixes, or JSON with the same sections and keys.
//
//   [system]
//   chi = 3.9 MHz          # cyclic frequencies, stored as rad/s
//   T1 = 5.5 us
//   n_th = 0.04            # dimensionless
//
// Frequency units: Hz kHz MHz GHz (multiplied by 2 pi).  Rate units: per_s,
// per_ms, per_us (not multiplied by 2 pi).  Time units: s ms us ns.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cqed/calibration.hpp"
#include "cqed/fitting.hpp"
#include "cqed/model.hpp"
#include "cqed/photon_stats.hpp"
#include "cqed/response.hpp"
#include "cqed/steady_state.hpp"

namespace cqed {

enum class OutputFormat { csv, json, both };

const char* to_string(OutputFormat f);
OutputFormat output_format_from_string(const std::string& s);

// Sweep offsets are relative to omega_q (axis omega_d) or omega_c (axis
// omega_p), in rad/s.
struct SweepSpec {
  bool present = false;
  std::string axis = "omega_d";
  double start = 0.0;
  double stop = 0.0;
  int points = 0;

  std::vector<double> offsets() const;
};

enum class SpectrumMethod { linear, nonperturbative, both };

const char* to_string(SpectrumMethod m);

struct SpectrumSpec {
  SpectrumObservable observable = SpectrumObservable::transmission;
  SpectrumMethod method = SpectrumMethod::linear;
  // One cut per (probe offset, drive amplitude) pair; empty lists mean the
  // system values.
  std::vector<double> probe_offsets;     // omega_p - omega_c
  std::vector<double> drive_amplitudes;  // Omega_d
};

enum class DistributionSource { cascade, thermal, thermal_coherent, squeezed_loss, vacuum };

const char* to_string(DistributionSource s);

struct DistributionSpec {
  DistributionSource source = DistributionSource::cascade;
  double n_th = 0.0;
  double alpha = 0.0;
  double r = 0.0;
  double l = 0.0;
  LossConvention convention = LossConvention::power;
  int dim = 16;  // analytic models only
  double klyshko_floor = 1e-12;
  // Verdict and tables use K_n for n <= klyshko_max_n; 0 keeps every n.
  int klyshko_max_n = 0;
};

struct DetuningSpec {
  std::vector<double> deltas;  // omega_s - (omega_c + chi)
};

struct FitSpec {
  std::filesystem::path target;
  std::vector<FreeParameter> free;
  NelderMeadOptions optimizer;
};

struct ExperimentConfig {
  SystemParams system;
  DriveKind drive = DriveKind::off();
  SpaceLayout layout{12, 1};
  double truncation_threshold = 1e-6;
  SolverOptions solver;
  SweepSpec sweep;
  SpectrumSpec spectrum;
  DistributionSpec distribution;
  DetuningSpec detuning;
  FitSpec fit;
  CalibrationOptions calibrate;
  int jobs = 0;  // 0: all cores
  std::uint64_t seed = 20240229;
  std::filesystem::path output_directory = "out";
  OutputFormat format = OutputFormat::both;

  // sha256 of the config bytes, lowercase hex
  std::string digest;

  // Throws ConfigError naming the offending key.
  void validate() const;
  int effective_jobs() const;
};

// Flat view of a parsed file: "section.key" -> raw value text (units kept).
using RawConfig = std::map<std::string, std::string>;

// Detects JSON by a leading '{'.  Throws ConfigError with a line number for
// malformed text, duplicate keys or keys outside a section.
RawConfig parse_raw_config(const std::string& text);

// Throws ConfigError for unknown keys, missing or wrong units and bad values.
// Relative fit targets are resolved against base_dir.
ExperimentConfig interpret_config(const RawConfig& raw, const std::filesystem::path& base_dir = {});

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});

// Reads, parses and digests a file; IoError when unreadable.
ExperimentConfig load_config(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

// Lowercase hex sha256.
std::string sha256_hex(const std::string& bytes);

}  // namespace cqed
