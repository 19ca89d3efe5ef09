// cqedsim: spectra, photon-number distributions, fits and calibration of the
// dispersive qubit-cavity system driven through a parametric amplifier.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cqed/commands.hpp"
#include "cqed/error.hpp"

namespace {

int fail(const std::string& kind, const std::string& msg, int code) {
  std::cerr << cqed::error_json(kind, msg, code) << "\n";
  return code;
}

const char* kind_name(cqed::ErrorKind k) {
  switch (k) {
    case cqed::ErrorKind::invalid_argument:
    case cqed::ErrorKind::config: return "config";
    case cqed::ErrorKind::solver: return "solver";
    case cqed::ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dispersive qubit-cavity simulator"};
  app.set_version_flag("--version", std::string(cqed::kToolName) + " " + cqed::tool_version());
  app.require_subcommand(1, 1);

  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int jobs = -1;
  std::string format;

  using Runner = std::function<cqed::RunResult(const cqed::ExperimentConfig&)>;
  const std::map<std::string, std::pair<std::string, Runner>> commands = {
      {"spectrum", {"Transmission or qubit-excitation spectra", cqed::cmd_spectrum}},
      {"distribution", {"Cavity photon-number distribution and Klyshko figures of merit", cqed::cmd_distribution}},
      {"detuning-sweep", {"Distributions and spectra over squeeze-drive detunings", cqed::cmd_detuning_sweep}},
      {"fit", {"Fit drive parameters to a target spectrum", cqed::cmd_fit}},
      {"calibrate", {"Dressed frequencies, thermal dephasing, Autler-Townes pair, Ramsey T2", cqed::cmd_calibrate}},
  };
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, entry] : commands) {
    CLI::App* s = app.add_subcommand(name, entry.first);
    s->add_option("--config", config_path, "Config file (key=value sections or JSON)")->required();
    s->add_option("--out", out_dir, "Output directory (overrides CQED_OUT_DIR and the config)");
    s->add_option("--seed", seed, "Seed for the optimizer restarts")->check(CLI::NonNegativeNumber);
    s->add_option("--jobs", jobs, "Worker threads, 0 for all cores")->check(CLI::NonNegativeNumber);
    s->add_option("--format", format, "csv, json or both")->check(CLI::IsMember({"csv", "json", "both"}));
    subs[name] = s;
  }
  CLI::App* verify = app.add_subcommand("verify", "Check output files against a config and their manifest");
  verify->add_option("--config", config_path, "Config the outputs should belong to")->required();
  verify->add_option("--out", out_dir, "Output directory to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    cqed::RunOverrides o;
    if (!out_dir.empty()) o.out_dir = out_dir;
    if (seed >= 0) o.seed = static_cast<std::uint64_t>(seed);
    if (jobs >= 0) o.jobs = jobs;
    if (!format.empty()) o.format = cqed::output_format_from_string(format);
    const cqed::ExperimentConfig cfg = cqed::apply_overrides(cqed::load_config(config_path), o);

    if (verify->parsed()) {
      const cqed::VerifyReport r = cqed::cmd_verify(cfg, cfg.output_directory);
      for (const auto& p : r.problems) std::cout << "mismatch: " << p << "\n";
      if (r.ok()) {
        std::cout << "verified " << cfg.output_directory.string() << "\n";
        return 0;
      }
      if (!r.config_matches) return fail("config", "outputs do not belong to this config", 2);
      return fail("io", "output files were modified or are missing", 4);
    }
    for (const auto& [name, s] : subs) {
      if (!s->parsed()) continue;
      const cqed::RunResult r = commands.at(name).second(cfg);
      for (const auto& f : r.files) std::cout << (r.directory / f).string() << "\n";
      return 0;
    }
  } catch (const cqed::Error& e) {
    const int code = cqed::exit_code_for(e.kind());
    return fail(kind_name(e.kind()), e.what(), code);
  } catch (const std::bad_alloc&) {
    return fail("solver", "out of memory", 3);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 1;
}
