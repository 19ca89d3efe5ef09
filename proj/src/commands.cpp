#include "cqed/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cqed/error.hpp"
#include "cqed/parallel.hpp"

#ifndef CQED_VERSION
#define CQED_VERSION "0.0.0"
#endif

namespace cqed {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string utc_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class OutputSet {
 public:
  OutputSet(const ExperimentConfig& c, std::string command)
      : dir_(c.output_directory), digest_(c.digest), format_(c.format), command_(std::move(command)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_)) throw IoError("cannot create output directory " + dir_.string());
  }

  bool csv() const { return format_ != OutputFormat::json; }
  bool json_out() const { return format_ != OutputFormat::csv; }

  // meta lines become "# key: value" comments after the digest line.
  void write_csv(const std::string& name, const std::vector<std::pair<std::string, std::string>>& meta,
                 const std::string& header, const std::vector<std::vector<std::string>>& rows) {
    std::string body = "# config_digest: " + digest_ + "\n# command: " + command_ + "\n";
    for (const auto& [k, v] : meta) body += "# " + k + ": " + v + "\n";
    body += header + "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) body += (i ? "," : "") + row[i];
      body += "\n";
    }
    write(name, body);
  }

  void write_json(const std::string& name, json doc) {
    doc["config_digest"] = digest_;
    doc["command"] = command_;
    write(name, doc.dump(2) + "\n");
  }

  RunResult finish(const ExperimentConfig& c, json diagnostics) {
    json m;
    m["tool"] = kToolName;
    m["version"] = tool_version();
    m["timestamp"] = utc_timestamp();
    m["command"] = command_;
    m["config_digest"] = digest_;
    m["jobs"] = c.effective_jobs();
    m["seed"] = c.seed;
    m["format"] = to_string(format_);
    json files = json::array();
    for (const auto& [name, sha] : written_) files.push_back({{"name", name}, {"sha256", sha}});
    m["files"] = files;
    m["diagnostics"] = std::move(diagnostics);
    write_raw("manifest.json", m.dump(2) + "\n");
    RunResult r;
    r.directory = dir_;
    for (const auto& w : written_) r.files.push_back(w.first);
    r.files.push_back("manifest.json");
    return r;
  }

 private:
  void write(const std::string& name, const std::string& body) {
    write_raw(name, body);
    written_.emplace_back(name, sha256_hex(body));
  }

  void write_raw(const std::string& name, const std::string& body) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body;
    out.close();
    if (!out) throw IoError("error while writing " + path.string());
  }

  fs::path dir_;
  std::string digest_;
  OutputFormat format_;
  std::string command_;
  std::vector<std::pair<std::string, std::string>> written_;
};

SweepOptions sweep_options(const ExperimentConfig& c) {
  SweepOptions o;
  o.observable = c.spectrum.observable;
  o.solver = c.solver;
  o.jobs = c.effective_jobs();
  return o;
}

std::string mhz_text(double omega) { return fmt17(to_mhz(omega)) + " MHz"; }

void require_tails(const ExperimentConfig& c, double cavity_tail, double jpa_tail, const std::string& where) {
  if (cavity_tail <= c.truncation_threshold && jpa_tail <= c.truncation_threshold) return;
  std::ostringstream msg;
  msg << where << ": truncation too small (threshold " << c.truncation_threshold << ")";
  if (cavity_tail > c.truncation_threshold)
    msg << "; cavity tail " << cavity_tail << ", recommended truncation.cavity >= " << c.layout.cavity_dim() + 2;
  if (jpa_tail > c.truncation_threshold)
    msg << "; jpa tail " << jpa_tail << ", recommended truncation.jpa >= " << c.layout.jpa_dim() + 2;
  throw ConfigError(msg.str());
}

// ---------------------------------------------------------------------------
// spectra

struct Cut {
  SpectrumMethod method;  // linear or nonperturbative
  double probe_offset;
  double Omega_d;
  Spectrum s;
};

Spectrum linear_probe_sweep(const ExperimentConfig& c, const SystemParams& p, const std::vector<double>& grid) {
  const Superoperator L = build_cascaded_generator(p, c.drive, Frame::squeeze, c.layout);
  const SteadyStateResult ss = steady_state(L, c.solver);
  Spectrum s;
  s.axis = grid;
  s.values.assign(grid.size(), cplx(0.0));
  s.diagnostics.assign(grid.size(), {});
  s.meta.frame = to_string(Frame::squeeze);
  s.meta.axis = "omega_p";
  s.meta.observable = "transmission";
  parallel_for(grid.size(), c.effective_jobs(), [&](std::size_t i) {
    try {
      s.values[i] = linear_response(L, ss.rho, grid[i] - p.omega_s, p.Omega_p, c.solver, false).amplitude;
      s.diagnostics[i] = {ss.residual, ss.tail_mass, ss.diagnostics.min_eigenvalue, 0.0};
    } catch (const Error& e) {
      rethrow_with_context(e, "omega_p offset " + mhz_text(grid[i] - p.omega_c));
    }
  });
  double m = 0.0;
  for (const auto& v : s.values) m = std::max(m, std::abs(v));
  s.normalization = m > 0.0 ? m : 1.0;
  return s;
}

Spectrum compute_cut(const ExperimentConfig& c, SpectrumMethod method, const SystemParams& p) {
  const bool drive_axis = c.sweep.axis == "omega_d";
  std::vector<double> grid = c.sweep.offsets();
  for (double& g : grid) g += drive_axis ? p.omega_q : p.omega_c;
  if (method == SpectrumMethod::linear) {
    if (drive_axis) return qubit_spectrum(p, c.drive, c.layout, grid, sweep_options(c));
    if (c.spectrum.observable != SpectrumObservable::transmission)
      throw ConfigError("spectrum: a probe sweep records transmission only");
    return linear_probe_sweep(c, p, grid);
  }
  if (c.drive.needs_jpa())
    throw ConfigError(std::string("spectrum.method: the nonperturbative probe frame cannot represent a ") +
                      to_string(c.drive.tag()) + " drive");
  if (c.spectrum.observable != SpectrumObservable::transmission)
    throw ConfigError("spectrum: the nonperturbative method records transmission only");
  const SpaceLayout lay(c.layout.cavity_dim(), 1);
  const Spectrum2D s2 = drive_axis ? probe_sweep_transmission(p, c.drive, lay, {p.omega_p}, grid, sweep_options(c))
                                   : probe_sweep_transmission(p, c.drive, lay, grid, {p.omega_d}, sweep_options(c));
  Spectrum s = drive_axis ? s2.drive_cut(0) : s2.probe_cut(0);
  double m = 0.0;
  for (const auto& v : s.values) m = std::max(m, std::abs(v));
  s.normalization = m > 0.0 ? m : 1.0;
  return s;
}

std::vector<Cut> compute_spectrum(const ExperimentConfig& c) {
  if (!c.sweep.present || c.sweep.points < 2)
    throw ConfigError("spectrum: a [sweep] section with at least 2 points is required");
  std::vector<double> offsets = c.spectrum.probe_offsets;
  if (offsets.empty()) offsets.push_back(c.system.omega_p - c.system.omega_c);
  std::vector<double> amps = c.spectrum.drive_amplitudes;
  if (amps.empty()) amps.push_back(c.system.Omega_d);
  std::vector<SpectrumMethod> methods;
  if (c.spectrum.method != SpectrumMethod::nonperturbative) methods.push_back(SpectrumMethod::linear);
  if (c.spectrum.method != SpectrumMethod::linear) methods.push_back(SpectrumMethod::nonperturbative);

  std::vector<Cut> cuts;
  for (double off : offsets)
    for (double amp : amps)
      for (SpectrumMethod m : methods) {
        SystemParams p = c.system;
        p.omega_p = p.omega_c + off;
        p.Omega_d = amp;
        Cut cut{m, off, amp, compute_cut(c, m, p)};
        double tc = 0.0, tj = 0.0;
        for (const auto& d : cut.s.diagnostics) {
          tc = std::max(tc, d.tails.cavity);
          tj = std::max(tj, d.tails.jpa);
        }
        require_tails(c, tc, tj, "spectrum");
        cuts.push_back(std::move(cut));
      }
  return cuts;
}

std::string axis_description(const ExperimentConfig& c) {
  return c.sweep.axis == "omega_d" ? "(omega_d - omega_q) / 2pi in MHz" : "(omega_p - omega_c) / 2pi in MHz";
}

json cut_diagnostics(const Cut& cut) {
  double res = 0.0, tc = 0.0, tj = 0.0, emin = 0.0;
  for (const auto& d : cut.s.diagnostics) {
    res = std::max(res, d.residual);
    tc = std::max(tc, d.tails.cavity);
    tj = std::max(tj, d.tails.jpa);
    emin = std::min(emin, d.min_eigenvalue);
  }
  return {{"max_residual", res}, {"max_tail_cavity", tc}, {"max_tail_jpa", tj}, {"min_eigenvalue", emin}};
}

// Writes one CSV per cut plus spectrum.json; returns per-cut diagnostics.
json emit_spectrum(OutputSet& out, const ExperimentConfig& c, const std::vector<Cut>& cuts,
                   const std::string& prefix) {
  json diag = json::array();
  json doc;
  doc["axis"] = c.sweep.axis;
  doc["axis_value"] = axis_description(c);
  doc["observable"] = to_string(c.spectrum.observable);
  doc["drive"] = {{"kind", to_string(c.drive.tag())}, {"value", c.drive.value()}};
  doc["truncation"] = {{"cavity", c.layout.cavity_dim()}, {"jpa", c.layout.jpa_dim()}};
  json jcuts = json::array();
  for (std::size_t k = 0; k < cuts.size(); ++k) {
    const Cut& cut = cuts[k];
    const std::string name = prefix + "spectrum_" + std::to_string(k) + "_" + to_string(cut.method) + ".csv";
    const double ref = c.sweep.axis == "omega_d" ? c.system.omega_q : c.system.omega_c;
    std::vector<std::vector<std::string>> rows;
    json pts = json::array();
    for (std::size_t i = 0; i < cut.s.axis.size(); ++i) {
      const double x = to_mhz(cut.s.axis[i] - ref);
      const cplx v = cut.s.values[i];
      rows.push_back({fmt17(x), fmt17(v.real()), fmt17(v.imag()), fmt17(std::abs(v))});
      pts.push_back({x, v.real(), v.imag(), std::abs(v)});
    }
    const json d = cut_diagnostics(cut);
    if (out.csv())
      out.write_csv(name,
                    {{"axis", axis_description(c)},
                     {"method", to_string(cut.method)},
                     {"frame", cut.s.meta.frame},
                     {"observable", cut.s.meta.observable},
                     {"probe_offset", mhz_text(cut.probe_offset)},
                     {"Omega_d", mhz_text(cut.Omega_d)},
                     {"normalization", fmt17(cut.s.normalization)}},
                    "axis_value,re,im,magnitude", rows);
    json jc = {{"index", k},
               {"method", to_string(cut.method)},
               {"frame", cut.s.meta.frame},
               {"probe_offset_MHz", to_mhz(cut.probe_offset)},
               {"Omega_d_MHz", to_mhz(cut.Omega_d)},
               {"normalization", cut.s.normalization},
               {"diagnostics", d},
               {"points", pts}};
    if (out.csv()) jc["csv"] = name;
    jcuts.push_back(jc);
    diag.push_back(d);
  }
  doc["cuts"] = jcuts;
  if (out.json_out()) out.write_json(prefix + "spectrum.json", doc);
  return diag;
}

// ---------------------------------------------------------------------------
// distributions

struct DistributionResult {
  PhotonDistribution dist;
  KlyshkoResult k;
  double mean = 0.0;
  GeometricFit geometric;
  json diagnostics;
};

PhotonDistribution cascade_distribution(const ExperimentConfig& c, const SystemParams& base, json& diag) {
  SystemParams p = base;
  p.Omega_d = 0.0;
  p.Omega_p = 0.0;
  const Superoperator L = build_cascaded_generator(p, c.drive, Frame::squeeze, c.layout);
  const SteadyStateResult ss = steady_state(L, c.solver);
  const TruncationCheck tc = check_truncation(ss, c.truncation_threshold);
  diag = {{"residual", ss.residual},
          {"tail_cavity", ss.tail_mass.cavity},
          {"tail_jpa", ss.tail_mass.jpa},
          {"min_eigenvalue", ss.diagnostics.min_eigenvalue},
          {"solver", ss.solver_stats.method},
          {"reduced_dim", ss.solver_stats.reduced_dim}};
  if (!tc.pass) {
    std::ostringstream msg;
    msg << "distribution: truncation too small (threshold " << c.truncation_threshold << "; cavity tail "
        << tc.tails.cavity << ", jpa tail " << tc.tails.jpa << "); recommended truncation.cavity = "
        << tc.recommended_cavity_dim << ", truncation.jpa = " << tc.recommended_jpa_dim;
    throw ConfigError(msg.str());
  }
  return cavity_distribution(ss.rho);
}

DistributionResult compute_distribution(const ExperimentConfig& c, const SystemParams& p) {
  DistributionResult r;
  const DistributionSpec& d = c.distribution;
  try {
    switch (d.source) {
      case DistributionSource::cascade: r.dist = cascade_distribution(c, p, r.diagnostics); break;
      case DistributionSource::thermal:
        r.dist = distribution_from_density(thermal_coherent_density({d.n_th, 0.0}, d.dim, c.truncation_threshold));
        break;
      case DistributionSource::thermal_coherent:
        r.dist = distribution_from_density(thermal_coherent_density({d.n_th, d.alpha}, d.dim, c.truncation_threshold));
        break;
      case DistributionSource::squeezed_loss:
        r.dist = distribution_from_density(
            lossy_squeezed_density({d.r, d.l, d.convention}, d.dim, c.truncation_threshold));
        break;
      case DistributionSource::vacuum: {
        r.dist.probs.assign(d.dim, 0.0);
        r.dist.probs[0] = 1.0;
        r.dist.truncation = d.dim;
        break;
      }
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("distribution: ") + e.what() + "; increase distribution.dim");
  }
  if (r.diagnostics.is_null()) r.diagnostics = json::object();
  r.k = klyshko(r.dist, d.klyshko_floor);
  if (d.klyshko_max_n > 0) {
    std::erase_if(r.k.values, [&](const KlyshkoValue& v) { return v.n > d.klyshko_max_n; });
    r.k.nonclassical = std::any_of(r.k.values.begin(), r.k.values.end(),
                                   [](const KlyshkoValue& v) { return v.defined && v.value < 1.0; });
  }
  double s = 0.0;
  for (std::size_t n = 0; n < r.dist.probs.size(); ++n) s += n * r.dist.probs[n];
  r.mean = s;
  r.geometric = best_fit_geometric(r.dist.probs);
  return r;
}

json klyshko_json(const KlyshkoResult& k) {
  json vals = json::array();
  for (const auto& v : k.values)
    vals.push_back({{"n", v.n}, {"value", v.defined ? json(v.value) : json(nullptr)}, {"defined", v.defined}});
  return vals;
}

const char* verdict(const KlyshkoResult& k) { return k.nonclassical ? "nonclassical" : "classical"; }

void emit_distribution(OutputSet& out, const ExperimentConfig& c, const DistributionResult& r,
                       const std::string& prefix, const std::vector<std::pair<std::string, std::string>>& meta) {
  std::vector<std::pair<std::string, std::string>> m = meta;
  m.emplace_back("source", to_string(c.distribution.source));
  m.emplace_back("tail_mass", fmt17(r.dist.tail_mass));
  if (out.csv()) {
    std::vector<std::vector<std::string>> rows;
    for (std::size_t n = 0; n < r.dist.probs.size(); ++n) rows.push_back({std::to_string(n), fmt17(r.dist.probs[n])});
    out.write_csv(prefix + "distribution.csv", m, "n,P_n", rows);
    std::vector<std::vector<std::string>> krows;
    for (const auto& v : r.k.values)
      krows.push_back({std::to_string(v.n), v.defined ? fmt17(v.value) : "nan", v.defined ? "1" : "0"});
    auto km = m;
    km.emplace_back("verdict", verdict(r.k));
    out.write_csv(prefix + "klyshko.csv", km, "n,K_n,defined", krows);
  }
  if (out.json_out()) {
    json doc;
    doc["source"] = to_string(c.distribution.source);
    for (const auto& [k, v] : meta) doc[k] = v;
    doc["probabilities"] = r.dist.probs;
    doc["truncation"] = r.dist.truncation;
    doc["tail_mass"] = r.dist.tail_mass;
    doc["mean_photon"] = r.mean;
    doc["klyshko"] = klyshko_json(r.k);
    doc["klyshko_floor"] = r.k.floor;
    doc["klyshko_max_n"] = c.distribution.klyshko_max_n;
    doc["nonclassical"] = r.k.nonclassical;
    doc["verdict"] = verdict(r.k);
    doc["best_fit_geometric"] = {{"nbar", r.geometric.nbar}, {"tv_distance", r.geometric.tv_distance}};
    doc["diagnostics"] = r.diagnostics;
    out.write_json(prefix + "klyshko.json", doc);
  }
}

}  // namespace

const char* tool_version() { return CQED_VERSION; }

ExperimentConfig apply_overrides(ExperimentConfig c, const RunOverrides& o) {
  if (o.out_dir) c.output_directory = *o.out_dir;
  else if (const char* env = std::getenv("CQED_OUT_DIR"); env && *env) c.output_directory = env;
  if (o.seed) {
    c.seed = *o.seed;
    c.fit.optimizer.seed = *o.seed;
  }
  if (o.jobs) {
    if (*o.jobs < 0) throw ConfigError("--jobs must be >= 0");
    c.jobs = *o.jobs;
  }
  if (o.format) c.format = *o.format;
  return c;
}

RunResult cmd_spectrum(const ExperimentConfig& c) {
  c.validate();
  const std::vector<Cut> cuts = compute_spectrum(c);
  OutputSet out(c, "spectrum");
  json diag = emit_spectrum(out, c, cuts, "");
  return out.finish(c, {{"cuts", diag}});
}

RunResult cmd_distribution(const ExperimentConfig& c) {
  c.validate();
  const DistributionResult r = compute_distribution(c, c.system);
  OutputSet out(c, "distribution");
  emit_distribution(out, c, r, "", {});
  return out.finish(c, {{"distribution", r.diagnostics}, {"tail_mass", r.dist.tail_mass}});
}

RunResult cmd_detuning_sweep(const ExperimentConfig& c) {
  c.validate();
  if (c.drive.tag() != DriveKind::Tag::squeezed) throw ConfigError("detuning-sweep: drive.kind must be squeezed");
  if (c.distribution.source != DistributionSource::cascade)
    throw ConfigError("detuning-sweep: distribution.source must be cascade");
  if (c.detuning.deltas.empty()) throw ConfigError("detuning.deltas: at least one detuning is required");
  OutputSet out(c, "detuning-sweep");
  json diag = json::array();
  json summary = json::array();
  std::vector<std::vector<std::string>> rows;
  const int kmax = 4;
  for (std::size_t i = 0; i < c.detuning.deltas.size(); ++i) {
    const double delta = c.detuning.deltas[i];
    ExperimentConfig ci = c;
    ci.system.omega_s = c.system.omega_c + c.system.chi + delta;
    const std::string prefix = "delta_" + std::to_string(i) + "_";
    const std::vector<std::pair<std::string, std::string>> meta = {{"delta", mhz_text(delta)}};
    json d;
    try {
      const DistributionResult r = compute_distribution(ci, ci.system);
      emit_distribution(out, ci, r, prefix, meta);
      d["distribution"] = r.diagnostics;
      std::vector<std::string> row = {fmt17(to_mhz(delta))};
      json ks = json::object();
      for (int n = 1; n <= kmax; ++n) {
        const KlyshkoValue* v = r.k.at(n);
        row.push_back(v ? fmt17(v->value) : "nan");
        ks["K" + std::to_string(n)] = v ? json(v->value) : json(nullptr);
      }
      row.push_back(r.k.nonclassical ? "1" : "0");
      row.push_back(fmt17(r.geometric.tv_distance));
      row.push_back(fmt17(r.geometric.nbar));
      row.push_back(fmt17(r.mean));
      rows.push_back(row);
      summary.push_back({{"delta_MHz", to_mhz(delta)},
                         {"klyshko", ks},
                         {"nonclassical", r.k.nonclassical},
                         {"verdict", verdict(r.k)},
                         {"tv_geometric", r.geometric.tv_distance},
                         {"nbar_geometric", r.geometric.nbar},
                         {"mean_photon", r.mean}});
      if (c.sweep.present) d["spectrum"] = emit_spectrum(out, ci, compute_spectrum(ci), prefix);
    } catch (const Error& e) {
      rethrow_with_context(e, "delta " + mhz_text(delta));
    }
    diag.push_back(d);
  }
  if (out.csv())
    out.write_csv("summary.csv", {}, "delta_MHz,K1,K2,K3,K4,nonclassical,tv_geometric,nbar_geometric,mean_photon",
                  rows);
  if (out.json_out()) out.write_json("summary.json", {{"detunings", summary}});
  return out.finish(c, {{"detunings", diag}});
}

Spectrum read_spectrum_csv(const fs::path& path, double omega_q) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool header = false;
  Spectrum s;
  const std::string where = path.filename().string();
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "axis_value,re,im,magnitude")
        throw ConfigError(where + ": line " + std::to_string(lineno) + ": expected header axis_value,re,im,magnitude");
      header = true;
      continue;
    }
    double f[4];
    std::size_t pos = 0;
    for (int k = 0; k < 4; ++k) {
      const std::size_t next = k < 3 ? line.find(',', pos) : line.size();
      if (next == std::string::npos)
        throw ConfigError(where + ": line " + std::to_string(lineno) + ": expected 4 columns");
      const std::string field = line.substr(pos, next - pos);
      char* end = nullptr;
      f[k] = std::strtod(field.c_str(), &end);
      if (field.empty() || *end != '\0' || !std::isfinite(f[k]))
        throw ConfigError(where + ": line " + std::to_string(lineno) + ": bad number '" + field + "'");
      pos = next + 1;
    }
    if (pos <= line.size() && line.find(',', pos) != std::string::npos)
      throw ConfigError(where + ": line " + std::to_string(lineno) + ": expected 4 columns");
    s.axis.push_back(omega_q + mhz(f[0]));
    s.values.emplace_back(f[1], f[2]);
  }
  if (!header) throw ConfigError(where + ": missing header");
  if (s.axis.size() < 2) throw ConfigError(where + ": a target spectrum needs at least 2 rows");
  for (std::size_t i = 1; i < s.axis.size(); ++i)
    if (!(s.axis[i] > s.axis[i - 1])) throw ConfigError(where + ": axis_value must increase strictly");
  s.meta.axis = "omega_d";
  double m = 0.0;
  for (const auto& v : s.values) m = std::max(m, std::abs(v));
  s.normalization = m > 0.0 ? m : 1.0;
  try {
    s.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return s;
}

RunResult cmd_fit(const ExperimentConfig& c) {
  c.validate();
  if (c.fit.target.empty()) throw ConfigError("fit.target: required");
  if (c.fit.free.empty()) throw ConfigError("fit.params: at least one free parameter is required");
  if (c.drive.tag() == DriveKind::Tag::off) throw ConfigError("fit: drive.kind must not be off");
  FitProblem pr;
  pr.observed = read_spectrum_csv(c.fit.target, c.system.omega_q);
  pr.family = c.drive.tag();
  pr.drive_value = c.drive.value();
  pr.baseline = c.system;
  pr.layout = c.layout;
  pr.free = c.fit.free;
  pr.sweep = sweep_options(c);
  pr.optimizer = c.fit.optimizer;
  FitReport rep;
  try {
    rep = fit_spectrum(pr);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("fit: ") + e.what());
  }

  auto natural = [](const std::string& name, double v) {
    return name == "n_th" || name == "p_th" || name == "n_th_cavity" ? v : to_mhz(v);
  };
  OutputSet out(c, "fit");
  json params = json::array();
  std::vector<std::vector<std::string>> rows;
  for (const auto& fp : rep.params) {
    const std::string unit = natural(fp.name, 1.0) == 1.0 ? "" : "MHz";
    params.push_back({{"name", fp.name},
                      {"value", natural(fp.name, fp.value)},
                      {"stderr", natural(fp.name, fp.stderr_estimate)},
                      {"unit", unit},
                      {"at_bound", fp.at_bound}});
    rows.push_back({fp.name, fmt17(natural(fp.name, fp.value)), fmt17(natural(fp.name, fp.stderr_estimate)), unit,
                    fp.at_bound ? "1" : "0"});
  }
  if (out.csv()) out.write_csv("fit_report.csv", {{"target", c.fit.target.filename().string()}},
                               "name,value,stderr,unit,at_bound", rows);
  if (out.json_out()) {
    json doc;
    doc["target"] = c.fit.target.filename().string();
    doc["family"] = to_string(pr.family);
    doc["params"] = params;
    doc["residual"] = rep.residual;
    doc["points"] = rep.points;
    doc["covariance_valid"] = rep.covariance_valid;
    doc["covariance"] = rep.covariance;
    doc["bound_saturated"] = rep.bound_saturated;
    doc["evaluations"] = rep.minimizer.evaluations;
    doc["converged"] = rep.minimizer.converged;
    doc["seed"] = c.fit.optimizer.seed;
    doc["objective"] = "sum of squared differences of max-normalized magnitudes, uniform weights";
    out.write_json("fit_report.json", doc);
  }
  return out.finish(c, {{"residual", rep.residual}, {"evaluations", rep.minimizer.evaluations}});
}

RunResult cmd_calibrate(const ExperimentConfig& c) {
  c.validate();
  CalibrationReport rep;
  try {
    rep = calibrate(c.system, c.calibrate);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("calibrate: ") + e.what());
  }
  OutputSet out(c, "calibrate");
  const double wc = c.system.omega_c;
  std::vector<std::pair<std::string, double>> q = {
      {"omega_0_minus_MHz", to_mhz(rep.formula.omega_0_minus)},
      {"omega_0_plus_MHz", to_mhz(rep.formula.omega_0_plus)},
      {"omega_1_minus_minus_omega_c_MHz", to_mhz(rep.formula.omega_1_minus - wc)},
      {"omega_1_plus_minus_omega_c_MHz", to_mhz(rep.formula.omega_1_plus - wc)},
      {"numeric_omega_0_minus_MHz", to_mhz(rep.numeric.omega_0_minus)},
      {"numeric_omega_0_plus_MHz", to_mhz(rep.numeric.omega_0_plus)},
      {"numeric_omega_1_minus_minus_omega_c_MHz", to_mhz(rep.numeric.omega_1_minus - wc)},
      {"numeric_omega_1_plus_minus_omega_c_MHz", to_mhz(rep.numeric.omega_1_plus - wc)},
      {"gamma_th_per_s", rep.gamma_th},
      {"autler_townes_low_minus_omega_c_MHz", to_mhz(rep.autler_townes_pair.first - wc)},
      {"autler_townes_high_minus_omega_c_MHz", to_mhz(rep.autler_townes_pair.second - wc)},
  };
  if (rep.has_ramsey) {
    q.emplace_back("ramsey_detuning_MHz", to_mhz(rep.ramsey.detuning));
    q.emplace_back("t2_formula_us", rep.ramsey.t2_formula * 1e6);
    q.emplace_back("t2_simulated_us", rep.ramsey.t2_simulated * 1e6);
    q.emplace_back("ramsey_fitted_frequency_MHz", rep.ramsey.fitted_frequency * 1e-6);
  }
  if (out.csv()) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [k, v] : q) rows.push_back({k, fmt17(v)});
    out.write_csv("calibration.csv", {}, "quantity,value", rows);
  }
  if (out.json_out()) {
    json doc;
    auto freqs = [wc](const DressedFrequencies& f) {
      return json{{"omega_0_minus_MHz", to_mhz(f.omega_0_minus)},
                  {"omega_0_plus_MHz", to_mhz(f.omega_0_plus)},
                  {"omega_1_minus_MHz", to_mhz(f.omega_1_minus)},
                  {"omega_1_plus_MHz", to_mhz(f.omega_1_plus)},
                  {"omega_1_minus_minus_omega_c_MHz", to_mhz(f.omega_1_minus - wc)},
                  {"omega_1_plus_minus_omega_c_MHz", to_mhz(f.omega_1_plus - wc)}};
    };
    doc["formula"] = freqs(rep.formula);
    doc["numeric"] = freqs(rep.numeric);
    doc["gamma_th_per_s"] = rep.gamma_th;
    doc["autler_townes"] = {{"omega_d_offset_MHz", to_mhz(-2 * c.system.chi)},
                            {"low_MHz", to_mhz(rep.autler_townes_pair.first)},
                            {"high_MHz", to_mhz(rep.autler_townes_pair.second)},
                            {"splitting_MHz", to_mhz(rep.autler_townes_pair.second - rep.autler_townes_pair.first)}};
    if (rep.has_ramsey) {
      doc["ramsey"] = {{"detuning_MHz", to_mhz(rep.ramsey.detuning)},
                       {"cavity_dim", rep.ramsey.cavity_dim},
                       {"t2_formula_us", rep.ramsey.t2_formula * 1e6},
                       {"t2_simulated_us", rep.ramsey.t2_simulated * 1e6},
                       {"fitted_frequency_MHz", rep.ramsey.fitted_frequency * 1e-6},
                       {"t2_ratio_simulated_over_formula", rep.ramsey.t2_simulated / rep.ramsey.t2_formula}};
    }
    out.write_json("calibration.json", doc);
  }
  return out.finish(c, json::object());
}

VerifyReport cmd_verify(const ExperimentConfig& c, const fs::path& out_dir) {
  VerifyReport v;
  json m;
  try {
    m = json::parse(read_file(out_dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw IoError("manifest.json: " + std::string(e.what()));
  }
  if (!m.contains("config_digest") || !m.contains("files")) throw IoError("manifest.json: missing fields");
  const std::string digest = m["config_digest"].get<std::string>();
  if (digest != c.digest) {
    v.config_matches = false;
    v.problems.push_back("manifest digest " + digest + " does not match config digest " + c.digest);
  }
  for (const auto& f : m["files"]) {
    const std::string name = f.at("name").get<std::string>();
    std::string body;
    try {
      body = read_file(out_dir / name);
    } catch (const IoError&) {
      v.files_intact = false;
      v.problems.push_back(name + ": missing");
      continue;
    }
    if (sha256_hex(body) != f.at("sha256").get<std::string>()) {
      v.files_intact = false;
      v.problems.push_back(name + ": content differs from manifest");
    }
    std::string embedded;
    if (name.size() > 4 && name.ends_with(".csv")) {
      const std::string tag = "# config_digest: ";
      if (body.rfind(tag, 0) == 0) embedded = body.substr(tag.size(), body.find('\n') - tag.size());
    } else {
      try {
        embedded = json::parse(body).value("config_digest", "");
      } catch (const json::exception&) {
      }
    }
    if (embedded.empty()) {
      v.files_intact = false;
      v.problems.push_back(name + ": no embedded config digest");
    } else if (embedded != c.digest) {
      v.config_matches = false;
      v.problems.push_back(name + ": embedded digest does not match config");
    }
  }
  return v;
}

std::string error_json(const std::string& kind, const std::string& message, int exit_code) {
  return json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", exit_code}}}}.dump();
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::solver: return 3;
    case ErrorKind::io: return 4;
  }
  return 1;
}

}  // namespace cqed
