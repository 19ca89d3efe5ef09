#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cqed/commands.hpp"
#include "cqed/config.hpp"
#include "cqed/error.hpp"

using namespace cqed;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cqed_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig with_out(ExperimentConfig c, const fs::path& dir) {
  c.output_directory = dir;
  return c;
}

std::vector<std::vector<double>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    rows.push_back(row);
  }
  return rows;
}

const char* kSmallThermal = R"(
[drive]
kind = thermal
n_th = 0.22

[truncation]
cavity = 8
threshold = 1e-3

[sweep]
axis = omega_d
start = -18 MHz
stop = 2 MHz
points = 41

[run]
jobs = 1
)";

}  // namespace

TEST(Config, UnitsAndDefaults) {
  const ExperimentConfig c = parse_config(R"(
[system]
chi = 3.8 MHz     # comment
T1 = 11 us
gamma_phi = 0.02 per_us
kappa = 500 kHz
omega_q = 8.7941 GHz
probe_offset = +3.8 MHz
)");
  EXPECT_DOUBLE_EQ(c.system.chi, mhz(3.8));
  EXPECT_DOUBLE_EQ(c.system.gamma, 1.0 / 11e-6);
  EXPECT_DOUBLE_EQ(c.system.gamma_phi, 2e4);
  EXPECT_DOUBLE_EQ(c.system.kappa, mhz(0.5));
  EXPECT_DOUBLE_EQ(c.system.omega_q, ghz(8.7941));
  EXPECT_DOUBLE_EQ(c.system.omega_p, c.system.omega_c + mhz(3.8));
  EXPECT_DOUBLE_EQ(c.system.omega_s, c.system.omega_c + c.system.chi);
  EXPECT_DOUBLE_EQ(c.system.omega_d, c.system.omega_q);
  const SystemParams t = SystemParams::table_s1();
  EXPECT_DOUBLE_EQ(c.system.kappa_e, t.kappa_e);
  EXPECT_EQ(c.drive, DriveKind::off());
  EXPECT_EQ(c.format, OutputFormat::both);
}

TEST(Config, DefaultProbeFollowsChi) {
  const ExperimentConfig c = parse_config("[system]\nchi = 2 MHz\n");
  EXPECT_DOUBLE_EQ(c.system.omega_p, c.system.omega_c - mhz(2.0));
}

TEST(Config, JsonEncodingHasTheSameSchema) {
  const ExperimentConfig a = parse_config(R"(
[system]
chi = 3.9 MHz
n_th = 0.05
[drive]
kind = squeezed
Omega_s = 4 MHz
[truncation]
cavity = 6
jpa = 4
[spectrum]
probe_offsets = -3.9, 3.9 MHz
[detuning]
deltas = 0, 0.5, 2 MHz
[calibrate]
ramsey = false
)");
  const ExperimentConfig b = parse_config(R"({
  "system": {"chi": "3.9 MHz", "n_th": 0.05},
  "drive": {"kind": "squeezed", "Omega_s": "4 MHz"},
  "truncation": {"cavity": 6, "jpa": 4},
  "spectrum": {"probe_offsets": ["-3.9 MHz", "3.9 MHz"]},
  "detuning": {"deltas": "0, 0.5 MHz, 2 MHz"},
  "calibrate": {"ramsey": false}
})");
  EXPECT_EQ(a.drive, b.drive);
  EXPECT_EQ(a.layout, b.layout);
  EXPECT_DOUBLE_EQ(a.system.n_th, b.system.n_th);
  EXPECT_DOUBLE_EQ(a.system.chi, b.system.chi);
  EXPECT_EQ(a.spectrum.probe_offsets, b.spectrum.probe_offsets);
  ASSERT_EQ(a.detuning.deltas.size(), 3u);
  EXPECT_DOUBLE_EQ(a.detuning.deltas[2], mhz(2.0));
  EXPECT_EQ(a.detuning.deltas, b.detuning.deltas);
  EXPECT_EQ(a.calibrate.simulate_ramsey, b.calibrate.simulate_ramsey);
  EXPECT_NE(a.digest, b.digest);
}

TEST(Config, DigestIsContentHash) {
  const std::string text = "[system]\nchi = 3.9 MHz\n";
  EXPECT_EQ(parse_config(text).digest, parse_config(text).digest);
  EXPECT_NE(parse_config(text).digest, parse_config(text + "\n").digest);
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(parse_config(text).digest, sha256_hex(text));
}

TEST(Config, Rejections) {
  EXPECT_THROW(parse_config("[system]\nchi = 3.9\n"), ConfigError);  // missing unit
  EXPECT_THROW(parse_config("[system]\nn_th = 0.1 MHz\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nchi = 3.9 furlongs\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("chi = 3.9 MHz\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nchi = 3.9 MHz\nchi = 4 MHz\n"), ConfigError);
  EXPECT_THROW(parse_config("[system\nchi = 3.9 MHz\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nchi\n"), ConfigError);
  EXPECT_THROW(parse_config("[system]\nkappa_e = 1 MHz\n"), ConfigError);  // kappa_e > kappa
  EXPECT_THROW(parse_config("[sweep]\nstart = 0 MHz\nstop = 1 MHz\npoints = 1\n"), ConfigError);
  EXPECT_THROW(parse_config("[sweep]\nstart = 1 MHz\nstop = 0 MHz\npoints = 5\n"), ConfigError);
  EXPECT_THROW(parse_config("[drive]\nkind = thermal\n"), ConfigError);
  EXPECT_THROW(parse_config("[drive]\nkind = squeezed\nOmega_s = 1 MHz\n"), ConfigError);  // no JPA slot
  EXPECT_THROW(parse_config("[drive]\nkind = laser\n"), ConfigError);
  EXPECT_THROW(parse_config("[truncation]\ncavity = 2.5\n"), ConfigError);
  EXPECT_THROW(parse_config("[output]\nformat = xml\n"), ConfigError);
  EXPECT_THROW(parse_config("[fit]\nparams = n_th\nn_th_lo = 0\n"), ConfigError);
  EXPECT_THROW(parse_config("{\"system\": [1, 2]}"), ConfigError);
  EXPECT_THROW(parse_config("{\"system\": {\"chi\": \"3.9 MHz\"}"), ConfigError);
  try {
    parse_config("[system]\nchi = 3.9\n");
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("system.chi"), std::string::npos);
  }
}

TEST(Config, OverridePrecedence) {
  ExperimentConfig c = parse_config("[output]\ndirectory = from_config\n");
  ::unsetenv("CQED_OUT_DIR");
  EXPECT_EQ(apply_overrides(c, {}).output_directory, fs::path("from_config"));
  ::setenv("CQED_OUT_DIR", "from_env", 1);
  EXPECT_EQ(apply_overrides(c, {}).output_directory, fs::path("from_env"));
  RunOverrides o;
  o.out_dir = "from_flag";
  o.seed = 7;
  o.jobs = 3;
  o.format = OutputFormat::csv;
  const ExperimentConfig d = apply_overrides(c, o);
  ::unsetenv("CQED_OUT_DIR");
  EXPECT_EQ(d.output_directory, fs::path("from_flag"));
  EXPECT_EQ(d.fit.optimizer.seed, 7u);
  EXPECT_EQ(d.jobs, 3);
  EXPECT_EQ(d.format, OutputFormat::csv);
}

TEST(Spectrum, EmptySweepIsAConfigError) {
  const ExperimentConfig c = with_out(parse_config("[drive]\nkind = off\n"), scratch("empty"));
  EXPECT_THROW(cmd_spectrum(c), ConfigError);
}

TEST(Spectrum, CsvRoundTripsExactly) {
  const fs::path dir = scratch("roundtrip");
  const ExperimentConfig c = with_out(parse_config(kSmallThermal), dir);
  const RunResult r = cmd_spectrum(c);
  ASSERT_EQ(r.files.back(), "manifest.json");
  SystemParams p = c.system;
  std::vector<double> grid = c.sweep.offsets();
  for (double& g : grid) g += p.omega_q;
  SweepOptions so;
  so.jobs = 1;
  const Spectrum direct = qubit_spectrum(p, c.drive, c.layout, grid, so);
  const Spectrum back = read_spectrum_csv(dir / "spectrum_0_linear.csv", p.omega_q);
  ASSERT_EQ(back.values.size(), direct.values.size());
  for (std::size_t i = 0; i < direct.values.size(); ++i) {
    EXPECT_EQ(back.values[i], direct.values[i]) << i;
    EXPECT_NEAR(back.axis[i], direct.axis[i], 1e-6);
  }
  const json doc = json::parse(read_file(dir / "spectrum.json"));
  EXPECT_EQ(doc["config_digest"], c.digest);
  EXPECT_EQ(doc["cuts"].size(), 1u);
}

TEST(Spectrum, DeterministicAcrossJobCounts) {
  ExperimentConfig c = parse_config(kSmallThermal);
  c.spectrum.method = SpectrumMethod::both;
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  c.jobs = 1;
  const RunResult ra = cmd_spectrum(with_out(c, a));
  c.jobs = 3;
  cmd_spectrum(with_out(c, b));
  for (const auto& f : ra.files) {
    if (f == "manifest.json") continue;
    EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
  }
}

TEST(Distribution, ThermalCascadeIsGeometricAndClassical) {
  const fs::path dir = scratch("thermal");
  const ExperimentConfig c = with_out(parse_config(R"(
[drive]
kind = thermal
n_th = 0.22
[truncation]
cavity = 15
threshold = 1e-8
[distribution]
source = cascade
)"),
                                      dir);
  cmd_distribution(c);
  const auto rows = csv_rows(dir / "distribution.csv");
  ASSERT_EQ(rows.size(), 15u);
  for (const auto& r : rows) {
    const double n = r[0];
    EXPECT_NEAR(r[1], std::pow(0.22, n) / std::pow(1.22, n + 1), 1e-8) << n;
  }
  const json k = json::parse(read_file(dir / "klyshko.json"));
  EXPECT_EQ(k["verdict"], "classical");
  EXPECT_NEAR(k["klyshko"][1]["value"].get<double>(), 1.5, 1e-6);
}

TEST(Distribution, SqueezedModelIsNonclassical) {
  const fs::path dir = scratch("sqz");
  cmd_distribution(with_out(parse_config("[distribution]\nsource = squeezed_loss\nr = 0.54\nl = 0.42\ndim = 24\n"
                                         "[truncation]\nthreshold = 1e-10\n"),
                            dir));
  const json k = json::parse(read_file(dir / "klyshko.json"));
  EXPECT_EQ(k["verdict"], "nonclassical");
  EXPECT_LT(k["klyshko"][1]["value"].get<double>(), 1.0);
  EXPECT_GT(k["klyshko"][0]["value"].get<double>(), 1.0);
}

TEST(Distribution, VacuumLeavesEveryFigureUndefined) {
  const fs::path dir = scratch("vac");
  cmd_distribution(with_out(parse_config("[distribution]\nsource = vacuum\ndim = 6\n"), dir));
  const auto rows = csv_rows(dir / "distribution.csv");
  EXPECT_EQ(rows[0][1], 1.0);
  const json k = json::parse(read_file(dir / "klyshko.json"));
  for (const auto& v : k["klyshko"]) EXPECT_FALSE(v["defined"].get<bool>());
  EXPECT_EQ(k["verdict"], "classical");
}

TEST(Distribution, TruncationFailureRecommendsDimension) {
  const ExperimentConfig c = with_out(parse_config(R"(
[drive]
kind = thermal
n_th = 0.22
[truncation]
cavity = 6
threshold = 1e-8
[distribution]
source = cascade
)"),
                                      scratch("trunc"));
  try {
    cmd_distribution(c);
    FAIL() << "expected a truncation error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("recommended truncation.cavity"), std::string::npos) << e.what();
  }
  const ExperimentConfig m = with_out(
      parse_config("[distribution]\nsource = thermal\nn_th = 2\ndim = 4\n[truncation]\nthreshold = 1e-8\n"),
      scratch("trunc_model"));
  EXPECT_THROW(cmd_distribution(m), ConfigError);
}

TEST(DetuningSweep, SingleDetuningMatchesSeparateCommands) {
  const std::string text = R"(
[system]
kappa_e = 0.42 MHz
[drive]
kind = squeezed
Omega_s = 2.0 MHz
[truncation]
cavity = 6
jpa = 4
threshold = 1e-2
[distribution]
source = cascade
[sweep]
axis = omega_d
start = -10 MHz
stop = 2 MHz
points = 7
[run]
jobs = 1
)";
  const fs::path s = scratch("dt_sep"), d = scratch("dt_one");
  cmd_spectrum(with_out(parse_config(text), s));
  cmd_distribution(with_out(parse_config(text), s));
  cmd_detuning_sweep(with_out(parse_config(text + "[detuning]\ndeltas = 0 MHz\n"), d));
  EXPECT_EQ(csv_rows(d / "delta_0_distribution.csv"), csv_rows(s / "distribution.csv"));
  EXPECT_EQ(csv_rows(d / "delta_0_spectrum_0_linear.csv"), csv_rows(s / "spectrum_0_linear.csv"));
  const auto summary = csv_rows(d / "summary.csv");
  ASSERT_EQ(summary.size(), 1u);
  const json k = json::parse(read_file(s / "klyshko.json"));
  EXPECT_DOUBLE_EQ(summary[0][2], k["klyshko"][1]["value"].get<double>());
}

TEST(DetuningSweep, RequiresSqueezedDrive) {
  ExperimentConfig c = parse_config("[drive]\nkind = thermal\nn_th = 0.1\n[detuning]\ndeltas = 0 MHz\n");
  EXPECT_THROW(cmd_detuning_sweep(with_out(c, scratch("dt_bad"))), ConfigError);
}

TEST(Fit, RoundTripAndDeterminism) {
  const fs::path gen = scratch("fit_gen");
  cmd_spectrum(with_out(parse_config(kSmallThermal), gen));
  const std::string fit_text = std::string(kSmallThermal) + R"(
[fit]
target = spectrum_0_linear.csv
params = n_th
n_th_lo = 0.02
n_th_hi = 0.6
n_th_initial = 0.1
restarts = 2
)";
  // the thermal value in [drive] is only a starting point once n_th is free
  const fs::path a = scratch("fit_a"), b = scratch("fit_b");
  cmd_fit(with_out(parse_config(fit_text, gen), a));
  cmd_fit(with_out(parse_config(fit_text, gen), b));
  const json rep = json::parse(read_file(a / "fit_report.json"));
  EXPECT_NEAR(rep["params"][0]["value"].get<double>() / 0.22, 1.0, 0.02);
  EXPECT_TRUE(rep["converged"].get<bool>());
  EXPECT_EQ(read_file(a / "fit_report.json"), read_file(b / "fit_report.json"));
}

TEST(Fit, MalformedTargets) {
  const fs::path dir = scratch("fit_bad");
  auto write = [&](const std::string& name, const std::string& body) {
    std::ofstream(dir / name) << body;
    return dir / name;
  };
  const double wq = SystemParams::table_s1().omega_q;
  EXPECT_THROW(read_spectrum_csv(write("t1.csv", "axis_value,re,im,magnitude\n0,1,0,1\n1,0.5,0"), wq), ConfigError);
  EXPECT_THROW(read_spectrum_csv(write("t2.csv", "# only a comment\n"), wq), ConfigError);
  EXPECT_THROW(read_spectrum_csv(write("t3.csv", "x,y\n0,1\n"), wq), ConfigError);
  EXPECT_THROW(read_spectrum_csv(write("t4.csv", "axis_value,re,im,magnitude\n0,1,0,1\n"), wq), ConfigError);
  EXPECT_THROW(read_spectrum_csv(write("t5.csv", "axis_value,re,im,magnitude\n0,1,0,1\n1,a,0,1\n"), wq),
               ConfigError);
  EXPECT_THROW(read_spectrum_csv(write("t6.csv", "axis_value,re,im,magnitude\n1,1,0,1\n0,1,0,1\n"), wq),
               ConfigError);
  EXPECT_THROW(read_spectrum_csv(dir / "missing.csv", wq), IoError);
}

TEST(Calibrate, ReportAndDegenerateDoublet) {
  const fs::path dir = scratch("cal");
  cmd_calibrate(with_out(parse_config("[calibrate]\nramsey_points = 121\nramsey_duration = 8 us\n"), dir));
  const json doc = json::parse(read_file(dir / "calibration.json"));
  EXPECT_NEAR(doc["formula"]["omega_1_plus_minus_omega_c_MHz"].get<double>(), 3.907, 5e-4);
  EXPECT_GT(doc["gamma_th_per_s"].get<double>(), 0.0);
  EXPECT_NEAR(doc["autler_townes"]["splitting_MHz"].get<double>(), 0.46, 1e-9);
  ASSERT_TRUE(doc.contains("ramsey"));
  EXPECT_GT(doc["ramsey"]["t2_simulated_us"].get<double>(), 0.0);
  EXPECT_GT(doc["ramsey"]["t2_formula_us"].get<double>(), 0.0);

  const fs::path z = scratch("cal0");
  cmd_calibrate(with_out(parse_config("[system]\nOmega_d = 0 MHz\n[calibrate]\nramsey = false\n"), z));
  const json d0 = json::parse(read_file(z / "calibration.json"));
  EXPECT_EQ(d0["formula"]["omega_0_plus_MHz"], d0["formula"]["omega_0_minus_MHz"]);
  EXPECT_FALSE(d0.contains("ramsey"));
}

TEST(Verify, DetectsForeignConfigAndTampering) {
  const fs::path dir = scratch("verify");
  const std::string text = "[distribution]\nsource = thermal\nn_th = 0.1\n[truncation]\nthreshold = 1e-10\n";
  const ExperimentConfig c = with_out(parse_config(text), dir);
  cmd_distribution(c);
  EXPECT_TRUE(cmd_verify(c, dir).ok());

  const ExperimentConfig other = parse_config(text + "# edited\n");
  const VerifyReport r = cmd_verify(other, dir);
  EXPECT_FALSE(r.config_matches);
  EXPECT_TRUE(r.files_intact);

  {
    std::ofstream f(dir / "distribution.csv", std::ios::app);
    f << "99,0\n";
  }
  const VerifyReport t = cmd_verify(c, dir);
  EXPECT_TRUE(t.config_matches);
  EXPECT_FALSE(t.files_intact);
  EXPECT_THROW(cmd_verify(c, scratch("verify_empty")), IoError);
}

TEST(Output, FormatSelection) {
  const fs::path c = scratch("fmt_csv"), j = scratch("fmt_json");
  ExperimentConfig cfg = parse_config("[distribution]\nsource = thermal\nn_th = 0.1\n[truncation]\nthreshold = 1e-10\n");
  cfg.format = OutputFormat::csv;
  const RunResult rc = cmd_distribution(with_out(cfg, c));
  cfg.format = OutputFormat::json;
  const RunResult rj = cmd_distribution(with_out(cfg, j));
  for (const auto& f : rc.files) EXPECT_TRUE(f.ends_with(".csv") || f == "manifest.json") << f;
  for (const auto& f : rj.files) EXPECT_TRUE(f.ends_with(".json")) << f;
  const json m = json::parse(read_file(c / "manifest.json"));
  EXPECT_EQ(m["tool"], "cqedsim");
  EXPECT_EQ(m["version"], tool_version());
  EXPECT_TRUE(m.contains("timestamp"));
  EXPECT_EQ(m["files"].size(), rc.files.size() - 1);
}

TEST(Errors, ExitCodesAndJson) {
  EXPECT_EQ(exit_code_for(ErrorKind::config), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::invalid_argument), 2);
  EXPECT_EQ(exit_code_for(ErrorKind::solver), 3);
  EXPECT_EQ(exit_code_for(ErrorKind::io), 4);
  const json e = json::parse(error_json("config", "bad \"key\"", 2));
  EXPECT_EQ(e["error"]["message"], "bad \"key\"");
  EXPECT_EQ(e["error"]["exit_code"], 2);
}
