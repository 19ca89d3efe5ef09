#pragma once

// Probe transmission spectra (linear response and non-perturbative probe
// frame) and time-domain traces.

#include <string>
#include <vector>

#include "cqed/model.hpp"
#include "cqed/steady_state.hpp"

namespace cqed {

struct SpectrumMetadata {
  std::string frame;
  std::string axis;        // "omega_d" or "omega_p"
  std::string observable;  // "transmission" or "qubit_excitation"
  std::string params_digest;
};

// Per-point solver diagnostics kept alongside a spectrum.
struct PointDiagnostics {
  double residual = 0.0;
  TailReport tails;
  double min_eigenvalue = 0.0;
  double counter_rotating_ratio = 0.0;  // |<a>_-| / |<a>_+|, linear response only
};

struct Spectrum {
  std::vector<double> axis;  // rad/s
  std::vector<cplx> values;
  double normalization = 1.0;  // max |value| over the dataset
  SpectrumMetadata meta;
  std::vector<PointDiagnostics> diagnostics;

  std::vector<double> magnitudes() const;
  // |value| / normalization
  std::vector<double> normalized() const;
  // Throws InvalidArgument unless the axis is strictly monotone and values finite.
  void validate() const;
};

// values[i * drive_axis.size() + j] belongs to (probe_axis[i], drive_axis[j]).
struct Spectrum2D {
  std::vector<double> probe_axis;
  std::vector<double> drive_axis;
  std::vector<cplx> values;
  double normalization = 1.0;
  SpectrumMetadata meta;
  std::vector<PointDiagnostics> diagnostics;

  Spectrum probe_cut(std::size_t drive_index) const;
  Spectrum drive_cut(std::size_t probe_index) const;
};

struct TimeTrace {
  std::vector<double> times;  // s
  std::vector<double> values;
  std::string observable;
};

struct LinearResponse {
  cplx amplitude;          // tr(a rho_+), response at the probe frequency
  cplx counter_rotating;   // tr(a rho_-), response at the mirror sideband
  double counter_ratio = 0.0;
};

// First-order response to the probe (Omega_p / 2)(a^dag e^{-i delta t} + h.c.)
// in the frame of L0, delta = omega_p - omega_s:
//   (L0 + i delta) rho_+ = i (Omega_p / 2) [a^dag, rho0]
//   (L0 - i delta) rho_- = i (Omega_p / 2) [a, rho0]
// Throws SolverError naming delta when a shifted system is singular.  The
// mirror sideband costs a second solve and is skipped on request.
LinearResponse linear_response(const Superoperator& L0, const DensityMatrix& rho0, double delta, double Omega_p,
                               const SolverOptions& opts = {}, bool with_counter_rotating = true);

cplx linear_response_amplitude(const Superoperator& L0, const DensityMatrix& rho0, double delta, double Omega_p,
                               const SolverOptions& opts = {});

enum class SpectrumObservable { transmission, qubit_excitation };

const char* to_string(SpectrumObservable o);

struct SweepOptions {
  SpectrumObservable observable = SpectrumObservable::transmission;
  SolverOptions solver;
  int jobs = 1;
  // Throw when the counter-rotating sideband exceeds this fraction of the
  // co-rotating response; negative skips computing it.
  double counter_rotating_limit = -1.0;
};

// Qubit spectroscopy in the squeeze frame: for each omega_d the generator is
// patched, solved for its steady state, and either the linear-response
// transmission at p.omega_p or the qubit excitation is recorded.
Spectrum qubit_spectrum(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                        const std::vector<double>& omega_d_grid, const SweepOptions& opts = {});

// Steady-state <a> in the probe frame with the probe included at finite
// Omega_p.  Coherent and squeezed drives are not representable there.
cplx probe_transmission(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                        const SolverOptions& opts = {}, PointDiagnostics* diag = nullptr);

Spectrum2D probe_sweep_transmission(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                                    const std::vector<double>& omega_p_grid,
                                    const std::vector<double>& omega_d_grid, const SweepOptions& opts = {});

struct TimeEvolveOptions {
  // Reduced systems up to this size use dense propagators exp(L dt).
  long dense_threshold = 900;
  double rtol = 1e-8;
  double atol = 1e-12;
  long max_steps = 2000000;
};

// Re tr(O rho(t)) on t_grid (t_grid[0] is the time of rho0).
TimeTrace time_evolve(const Superoperator& L, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                      const Operator& observable, const TimeEvolveOptions& opts = {});

// Qubit prepared in |e>, cavity in its thermal state; records the excitation
// (sigma_z + 1)/2 with all drives off.
TimeTrace relaxation_trace(const SystemParams& p, const SpaceLayout& layout, const std::vector<double>& t_grid,
                           const TimeEvolveOptions& opts = {});

// Ramsey sequence with ideal pi/2 pulses: the qubit starts in (|g> + |e>)/sqrt2
// with the cavity thermal, evolves freely in the frame of omega_d, and the
// final pulse is folded into the observable (1 + sigma_x)/2.
TimeTrace ramsey_trace(const SystemParams& p, const SpaceLayout& layout, const std::vector<double>& t_grid,
                       const TimeEvolveOptions& opts = {});

// Uniform grid helper: n points from start to stop inclusive.
std::vector<double> linspace(double start, double stop, int n);

}  // namespace cqed
