#include "cqed/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "cqed/error.hpp"
#include "cqed/parallel.hpp"

namespace cqed {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

enum class Dim { frequency, rate, time, dimensionless, integer, boolean, text, frequency_list, text_list };

struct Quantity {
  double value;
  std::string unit;
};

Quantity split_quantity(const std::string& key, const std::string& item) {
  std::string s = trim(item);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  std::string lowered;
  for (char c : s) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc()) {
    if (lowered.rfind("inf", 0) == 0) {
      v = INFINITY;
      res.ptr = first + 3;
    } else {
      throw ConfigError(key + ": expected a number, got '" + s + "'");
    }
  }
  return {v, trim(std::string_view(res.ptr, static_cast<std::size_t>(last - res.ptr)))};
}

double frequency_scale(const std::string& key, const std::string& unit) {
  if (unit == "Hz") return kTwoPi;
  if (unit == "kHz") return kTwoPi * 1e3;
  if (unit == "MHz") return kTwoPi * 1e6;
  if (unit == "GHz") return kTwoPi * 1e9;
  if (unit.empty()) throw ConfigError(key + ": frequency needs a unit (Hz, kHz, MHz, GHz)");
  throw ConfigError(key + ": unknown frequency unit '" + unit + "'");
}

double convert(const std::string& key, const std::string& text, Dim dim) {
  const Quantity q = split_quantity(key, text);
  switch (dim) {
    case Dim::frequency:
    case Dim::frequency_list: return q.value * frequency_scale(key, q.unit);
    case Dim::rate:
      if (q.unit == "per_s") return q.value;
      if (q.unit == "per_ms") return q.value * 1e3;
      if (q.unit == "per_us") return q.value * 1e6;
      if (q.unit.empty()) throw ConfigError(key + ": rate needs a unit (per_s, per_ms, per_us)");
      throw ConfigError(key + ": unknown rate unit '" + q.unit + "'");
    case Dim::time:
      if (q.unit == "s") return q.value;
      if (q.unit == "ms") return q.value * 1e-3;
      if (q.unit == "us") return q.value * 1e-6;
      if (q.unit == "ns") return q.value * 1e-9;
      if (q.unit.empty()) throw ConfigError(key + ": time needs a unit (s, ms, us, ns)");
      throw ConfigError(key + ": unknown time unit '" + q.unit + "'");
    case Dim::dimensionless:
    case Dim::integer:
      if (!q.unit.empty()) throw ConfigError(key + ": dimensionless value takes no unit, got '" + q.unit + "'");
      if (dim == Dim::integer && (q.value != std::floor(q.value) || !std::isfinite(q.value)))
        throw ConfigError(key + ": expected an integer");
      return q.value;
    default: break;
  }
  throw ConfigError(key + ": not a numeric key");
}

std::vector<double> convert_list(const std::string& key, const std::string& text) {
  std::vector<std::string> items = split(text, ',');
  if (items.size() == 1 && items[0].empty()) return {};
  const std::string tail_unit = split_quantity(key, items.back()).unit;
  std::vector<double> out;
  for (const auto& it : items) {
    Quantity q = split_quantity(key, it);
    out.push_back(convert(key, it + (q.unit.empty() ? " " + tail_unit : ""), Dim::frequency_list));
  }
  return out;
}

bool convert_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "yes" || text == "1") return true;
  if (text == "false" || text == "no" || text == "0") return false;
  throw ConfigError(key + ": expected true or false");
}

struct KeyRule {
  Dim dim;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> apply;
};

using Setter = std::function<void(ExperimentConfig&, double)>;

KeyRule num(Dim dim, Setter set) {
  return {dim, [dim, set](ExperimentConfig& c, const std::string& key, const std::string& v) {
            set(c, convert(key, v, dim));
          }};
}

// Values that depend on other keys are collected here and resolved last.
struct Pending {
  double probe_offset = NAN;
  double squeeze_detuning = 0.0;
  double drive_detuning = 0.0;
  int cavity_dim = 12;
  int jpa_dim = 1;
  std::string drive_kind = "off";
  double drive_n_th = NAN;
  double drive_Omega_s = NAN;
  std::vector<std::string> fit_params;
  std::map<std::string, double> fit_lo, fit_hi, fit_initial;
};

std::map<std::string, KeyRule> key_rules(Pending& pend, const std::filesystem::path& base_dir) {
  std::map<std::string, KeyRule> r;
  auto sys = [&r](const std::string& k, Dim d, double SystemParams::*field) {
    r["system." + k] = num(d, [field](ExperimentConfig& c, double v) { c.system.*field = v; });
  };
  sys("omega_c", Dim::frequency, &SystemParams::omega_c);
  sys("omega_q", Dim::frequency, &SystemParams::omega_q);
  sys("chi", Dim::frequency, &SystemParams::chi);
  sys("kappa", Dim::frequency, &SystemParams::kappa);
  sys("kappa_e", Dim::frequency, &SystemParams::kappa_e);
  sys("kappa_e_prime", Dim::frequency, &SystemParams::kappa_e_prime);
  sys("n_th", Dim::dimensionless, &SystemParams::n_th);
  sys("p_th", Dim::dimensionless, &SystemParams::p_th);
  sys("gamma", Dim::rate, &SystemParams::gamma);
  sys("gamma_phi", Dim::rate, &SystemParams::gamma_phi);
  sys("Omega_p", Dim::frequency, &SystemParams::Omega_p);
  sys("Omega_d", Dim::frequency, &SystemParams::Omega_d);
  sys("anharmonicity", Dim::frequency, &SystemParams::anharmonicity);
  r["system.T1"] = num(Dim::time, [](ExperimentConfig& c, double v) {
    if (!(v > 0.0)) throw ConfigError("system.T1: must be positive");
    c.system.gamma = 1.0 / v;
  });
  r["system.probe_offset"] = num(Dim::frequency, [&pend](ExperimentConfig&, double v) { pend.probe_offset = v; });
  r["system.squeeze_detuning"] =
      num(Dim::frequency, [&pend](ExperimentConfig&, double v) { pend.squeeze_detuning = v; });
  r["system.drive_detuning"] = num(Dim::frequency, [&pend](ExperimentConfig&, double v) { pend.drive_detuning = v; });

  r["drive.kind"] = {Dim::text, [&pend](ExperimentConfig&, const std::string&, const std::string& v) {
                       pend.drive_kind = v;
                     }};
  r["drive.n_th"] = num(Dim::dimensionless, [&pend](ExperimentConfig&, double v) { pend.drive_n_th = v; });
  r["drive.Omega_s"] = num(Dim::frequency, [&pend](ExperimentConfig&, double v) { pend.drive_Omega_s = v; });

  r["truncation.cavity"] = num(Dim::integer, [&pend](ExperimentConfig&, double v) { pend.cavity_dim = int(v); });
  r["truncation.jpa"] = num(Dim::integer, [&pend](ExperimentConfig&, double v) { pend.jpa_dim = int(v); });
  r["truncation.threshold"] =
      num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.truncation_threshold = v; });

  r["solver.residual_tol"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.solver.residual_tol = v; });
  r["solver.uniqueness_floor"] =
      num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.solver.uniqueness_floor = v; });
  r["solver.iterative_threshold"] =
      num(Dim::integer, [](ExperimentConfig& c, double v) { c.solver.iterative_threshold = long(v); });
  r["solver.iterative_tol"] =
      num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.solver.iterative_tol = v; });
  r["solver.reduce_sectors"] = {Dim::boolean, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                  c.solver.reduce_sectors = convert_bool(k, v);
                                }};

  r["run.jobs"] = num(Dim::integer, [](ExperimentConfig& c, double v) { c.jobs = int(v); });
  r["run.seed"] = num(Dim::integer, [](ExperimentConfig& c, double v) {
    if (v < 0) throw ConfigError("run.seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(v);
  });

  r["sweep.axis"] = {Dim::text, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                       if (v != "omega_d" && v != "omega_p") throw ConfigError(k + ": expected omega_d or omega_p");
                       c.sweep.axis = v;
                       c.sweep.present = true;
                     }};
  r["sweep.start"] = num(Dim::frequency, [](ExperimentConfig& c, double v) {
    c.sweep.start = v;
    c.sweep.present = true;
  });
  r["sweep.stop"] = num(Dim::frequency, [](ExperimentConfig& c, double v) {
    c.sweep.stop = v;
    c.sweep.present = true;
  });
  r["sweep.points"] = num(Dim::integer, [](ExperimentConfig& c, double v) {
    c.sweep.points = int(v);
    c.sweep.present = true;
  });

  r["spectrum.observable"] = {Dim::text, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                if (v == "transmission") c.spectrum.observable = SpectrumObservable::transmission;
                                else if (v == "qubit_excitation")
                                  c.spectrum.observable = SpectrumObservable::qubit_excitation;
                                else throw ConfigError(k + ": expected transmission or qubit_excitation");
                              }};
  r["spectrum.method"] = {Dim::text, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                            if (v == "linear") c.spectrum.method = SpectrumMethod::linear;
                            else if (v == "nonperturbative") c.spectrum.method = SpectrumMethod::nonperturbative;
                            else if (v == "both") c.spectrum.method = SpectrumMethod::both;
                            else throw ConfigError(k + ": expected linear, nonperturbative or both");
                          }};
  r["spectrum.probe_offsets"] = {Dim::frequency_list,
                                 [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                   c.spectrum.probe_offsets = convert_list(k, v);
                                 }};
  r["spectrum.drive_amplitudes"] = {Dim::frequency_list,
                                    [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                      c.spectrum.drive_amplitudes = convert_list(k, v);
                                    }};

  r["distribution.source"] = {Dim::text, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                static const std::map<std::string, DistributionSource> names = {
                                    {"cascade", DistributionSource::cascade},
                                    {"thermal", DistributionSource::thermal},
                                    {"thermal_coherent", DistributionSource::thermal_coherent},
                                    {"squeezed_loss", DistributionSource::squeezed_loss},
                                    {"vacuum", DistributionSource::vacuum}};
                                auto it = names.find(v);
                                if (it == names.end()) throw ConfigError(k + ": unknown source '" + v + "'");
                                c.distribution.source = it->second;
                              }};
  r["distribution.n_th"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.distribution.n_th = v; });
  r["distribution.alpha"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.distribution.alpha = v; });
  r["distribution.r"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.distribution.r = v; });
  r["distribution.l"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.distribution.l = v; });
  r["distribution.dim"] = num(Dim::integer, [](ExperimentConfig& c, double v) { c.distribution.dim = int(v); });
  r["distribution.klyshko_floor"] =
      num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.distribution.klyshko_floor = v; });
  r["distribution.klyshko_max_n"] =
      num(Dim::integer, [](ExperimentConfig& c, double v) { c.distribution.klyshko_max_n = int(v); });
  r["distribution.loss_convention"] = {Dim::text,
                                       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                                         if (v == "power") c.distribution.convention = LossConvention::power;
                                         else if (v == "amplitude")
                                           c.distribution.convention = LossConvention::amplitude;
                                         else throw ConfigError(k + ": expected power or amplitude");
                                       }};

  r["detuning.deltas"] = {Dim::frequency_list, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                            c.detuning.deltas = convert_list(k, v);
                          }};

  r["fit.target"] = {Dim::text, [base_dir](ExperimentConfig& c, const std::string&, const std::string& v) {
                       std::filesystem::path t(v);
                       c.fit.target = t.is_absolute() || base_dir.empty() ? t : base_dir / t;
                     }};
  r["fit.params"] = {Dim::text_list, [&pend](ExperimentConfig&, const std::string&, const std::string& v) {
                       pend.fit_params = split(v, ',');
                     }};
  r["fit.restarts"] = num(Dim::integer, [](ExperimentConfig& c, double v) { c.fit.optimizer.restarts = int(v); });
  r["fit.max_iterations"] =
      num(Dim::integer, [](ExperimentConfig& c, double v) { c.fit.optimizer.max_iterations = int(v); });
  r["fit.xtol"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.fit.optimizer.xtol = v; });
  r["fit.ftol"] = num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.fit.optimizer.ftol = v; });
  r["fit.initial_step"] =
      num(Dim::dimensionless, [](ExperimentConfig& c, double v) { c.fit.optimizer.initial_step = v; });

  r["calibrate.ramsey"] = {Dim::boolean, [](ExperimentConfig& c, const std::string& k, const std::string& v) {
                             c.calibrate.simulate_ramsey = convert_bool(k, v);
                           }};
  r["calibrate.ramsey_detuning"] =
      num(Dim::frequency, [](ExperimentConfig& c, double v) { c.calibrate.ramsey_detuning = v; });
  r["calibrate.ramsey_duration"] =
      num(Dim::time, [](ExperimentConfig& c, double v) { c.calibrate.ramsey_duration = v; });
  r["calibrate.ramsey_points"] =
      num(Dim::integer, [](ExperimentConfig& c, double v) { c.calibrate.ramsey_points = int(v); });
  r["calibrate.cavity_dim"] = num(Dim::integer, [](ExperimentConfig& c, double v) { c.calibrate.cavity_dim = int(v); });

  r["output.directory"] = {Dim::text, [](ExperimentConfig& c, const std::string&, const std::string& v) {
                             c.output_directory = v;
                           }};
  r["output.format"] = {Dim::text, [](ExperimentConfig& c, const std::string&, const std::string& v) {
                          c.format = output_format_from_string(v);
                        }};
  return r;
}

// Fit parameter bounds use keys fit.<name>_lo, fit.<name>_hi, fit.<name>_initial.
bool apply_fit_bound(Pending& pend, const std::string& key, const std::string& value) {
  if (key.rfind("fit.", 0) != 0) return false;
  const std::string rest = key.substr(4);
  for (const char* suffix : {"_lo", "_hi", "_initial"}) {
    const std::string s(suffix);
    if (rest.size() > s.size() && rest.compare(rest.size() - s.size(), s.size(), s) == 0) {
      const std::string name = rest.substr(0, rest.size() - s.size());
      const bool dimless = name == "n_th" || name == "p_th" || name == "n_th_cavity";
      const double v = convert(key, value, dimless ? Dim::dimensionless : Dim::frequency);
      (s == "_lo" ? pend.fit_lo : s == "_hi" ? pend.fit_hi : pend.fit_initial)[name] = v;
      return true;
    }
  }
  return false;
}

void parse_ini(const std::string& text, RawConfig& out) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    if (section.empty()) throw ConfigError(where + ": key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!out.emplace(section + "." + key, value).second)
      throw ConfigError(where + ": duplicate key " + section + "." + key);
  }
}

std::string json_scalar(const std::string& key, const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  throw ConfigError(key + ": unsupported JSON value");
}

void parse_json(const std::string& text, RawConfig& out) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON config: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be an object of sections");
  for (const auto& [section, body] : doc.items()) {
    if (!body.is_object()) throw ConfigError("JSON section '" + section + "' must be an object");
    for (const auto& [key, v] : body.items()) {
      const std::string full = section + "." + key;
      if (v.is_array()) {
        std::string joined;
        for (std::size_t i = 0; i < v.size(); ++i) joined += (i ? ", " : "") + json_scalar(full, v[i]);
        out[full] = joined;
      } else {
        out[full] = json_scalar(full, v);
      }
    }
  }
}

}  // namespace

const char* to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::json: return "json";
    case OutputFormat::both: return "both";
  }
  return "?";
}

OutputFormat output_format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::csv;
  if (s == "json") return OutputFormat::json;
  if (s == "both") return OutputFormat::both;
  throw ConfigError("output format must be csv, json or both, got '" + s + "'");
}

const char* to_string(SpectrumMethod m) {
  switch (m) {
    case SpectrumMethod::linear: return "linear";
    case SpectrumMethod::nonperturbative: return "nonperturbative";
    case SpectrumMethod::both: return "both";
  }
  return "?";
}

const char* to_string(DistributionSource s) {
  switch (s) {
    case DistributionSource::cascade: return "cascade";
    case DistributionSource::thermal: return "thermal";
    case DistributionSource::thermal_coherent: return "thermal_coherent";
    case DistributionSource::squeezed_loss: return "squeezed_loss";
    case DistributionSource::vacuum: return "vacuum";
  }
  return "?";
}

std::vector<double> SweepSpec::offsets() const { return linspace(start, stop, points); }

void ExperimentConfig::validate() const {
  try {
    system.validate();
  } catch (const Error& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
  if (sweep.present) {
    if (sweep.points < 2) throw ConfigError("sweep.points: a sweep needs at least 2 points");
    if (!(sweep.stop > sweep.start)) throw ConfigError("sweep: stop must exceed start");
  }
  if (!(truncation_threshold > 0.0 && truncation_threshold < 1.0))
    throw ConfigError("truncation.threshold: must lie in (0, 1)");
  if (jobs < 0) throw ConfigError("run.jobs: must be >= 0");
  if (distribution.dim < 2) throw ConfigError("distribution.dim: must be >= 2");
  if (distribution.klyshko_max_n < 0) throw ConfigError("distribution.klyshko_max_n: must be >= 0");
  if (distribution.klyshko_floor < 0.0) throw ConfigError("distribution.klyshko_floor: must be >= 0");
  for (double a : spectrum.drive_amplitudes)
    if (a < 0.0) throw ConfigError("spectrum.drive_amplitudes: must be >= 0");
  if (calibrate.ramsey_points < 8) throw ConfigError("calibrate.ramsey_points: need at least 8");
  if (calibrate.cavity_dim < 2) throw ConfigError("calibrate.cavity_dim: must be >= 2");
  if (!(calibrate.ramsey_duration > 0.0)) throw ConfigError("calibrate.ramsey_duration: must be positive");
}

int ExperimentConfig::effective_jobs() const { return jobs > 0 ? jobs : default_jobs(); }

RawConfig parse_raw_config(const std::string& text) {
  RawConfig out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') parse_json(text, out);
  else parse_ini(text, out);
  return out;
}

ExperimentConfig interpret_config(const RawConfig& raw, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  c.system = SystemParams::table_s1();
  Pending pend;
  const auto rules = key_rules(pend, base_dir);
  for (const auto& [key, value] : raw) {
    auto it = rules.find(key);
    if (it != rules.end()) {
      it->second.apply(c, key, value);
    } else if (!apply_fit_bound(pend, key, value)) {
      throw ConfigError("unknown key " + key);
    }
  }

  SystemParams& p = c.system;
  p.omega_p = p.omega_c + (std::isnan(pend.probe_offset) ? -p.chi : pend.probe_offset);
  p.omega_s = p.omega_c + p.chi + pend.squeeze_detuning;
  p.omega_d = p.omega_q - pend.drive_detuning;

  if (pend.cavity_dim < 2) throw ConfigError("truncation.cavity: must be >= 2");
  if (pend.jpa_dim < 1) throw ConfigError("truncation.jpa: must be >= 1");
  c.layout = SpaceLayout(pend.cavity_dim, pend.jpa_dim);

  DriveKind::Tag tag;
  try {
    tag = drive_tag_from_string(pend.drive_kind);
  } catch (const Error&) {
    throw ConfigError("drive.kind: unknown kind '" + pend.drive_kind + "'");
  }
  try {
    switch (tag) {
      case DriveKind::Tag::off:
        if (!std::isnan(pend.drive_n_th) || !std::isnan(pend.drive_Omega_s))
          throw ConfigError("drive: kind off takes no parameters");
        c.drive = DriveKind::off();
        break;
      case DriveKind::Tag::thermal:
        if (std::isnan(pend.drive_n_th)) throw ConfigError("drive.n_th: required for a thermal drive");
        if (!std::isnan(pend.drive_Omega_s)) throw ConfigError("drive.Omega_s: not used by a thermal drive");
        c.drive = DriveKind::thermal(pend.drive_n_th);
        break;
      case DriveKind::Tag::coherent:
      case DriveKind::Tag::squeezed:
        if (std::isnan(pend.drive_Omega_s)) throw ConfigError("drive.Omega_s: required for this drive");
        if (!std::isnan(pend.drive_n_th)) throw ConfigError("drive.n_th: only used by a thermal drive");
        c.drive = tag == DriveKind::Tag::coherent ? DriveKind::coherent(pend.drive_Omega_s)
                                                  : DriveKind::squeezed(pend.drive_Omega_s);
        break;
    }
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("drive: ") + e.what());
  }
  if (c.drive.needs_jpa() && !c.layout.has_jpa())
    throw ConfigError("truncation.jpa: a coherent or squeezed drive needs a JPA dimension > 1");

  for (const auto& name : pend.fit_params) {
    if (name.empty()) continue;
    if (!pend.fit_lo.count(name) || !pend.fit_hi.count(name) || !pend.fit_initial.count(name))
      throw ConfigError("fit." + name + ": needs _lo, _hi and _initial");
    c.fit.free.push_back({name, {pend.fit_lo[name], pend.fit_hi[name]}, pend.fit_initial[name]});
  }
  for (const auto* m : {&pend.fit_lo, &pend.fit_hi, &pend.fit_initial})
    for (const auto& [name, v] : *m)
      if (std::find(pend.fit_params.begin(), pend.fit_params.end(), name) == pend.fit_params.end())
        throw ConfigError("fit." + name + ": bounds given for a parameter not listed in fit.params");
  c.fit.optimizer.seed = c.seed;

  c.validate();
  return c;
}

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentConfig c = interpret_config(parse_raw_config(text), base_dir);
  c.digest = sha256_hex(text);
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return ss.str();
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_config(text, path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.filename().string() + ": " + e.what());
  }
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw IoError("sha256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

}  // namespace cqed
