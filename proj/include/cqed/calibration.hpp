#pragma once

// Closed-form calibration quantities of the driven dispersive system and
// their numerical counterparts.

#include <utility>
#include <vector>

#include "cqed/model.hpp"

namespace cqed {

// Lowest eigenfrequencies of H = omega_c a^dag a - chi a^dag a sigma_z
// + (Omega_d / 2) sigma_x with a resonant qubit drive (omega_d = omega_q,
// cavity undriven and in the lab frame).
struct DressedFrequencies {
  double omega_0_minus = 0.0;  // -Omega_d / 2
  double omega_0_plus = 0.0;   // +Omega_d / 2
  double omega_1_minus = 0.0;  // omega_c - sqrt(chi^2 + (Omega_d / 2)^2)
  double omega_1_plus = 0.0;
};

// Closed forms.  p.omega_d is not used; the drive is taken resonant.
DressedFrequencies dressed_eigenfrequencies(const SystemParams& p);

// Same quantities from a dense eigensolve of the probe-frame Hamiltonian
// restricted to at most one photon.
DressedFrequencies dressed_eigenfrequencies_numeric(const SystemParams& p);

// 4 kappa chi^2 n_th / (kappa^2 + chi^2)
double thermal_dephasing_rate(const SystemParams& p);

// Probe frequencies of the transitions from |e,0> to the two states that the
// qubit drive at p.omega_d makes out of |e,1> and |g,1>; ascending.  The 2x2
// block is diagonalized numerically.
std::pair<double, double> autler_townes_frequencies(const SystemParams& p);

struct RamseyComparison {
  double detuning = 0.0;          // omega_q - omega_d, rad/s
  double t2_formula = 0.0;        // 1 / (gamma/2 + gamma_phi + gamma_th)
  double t2_simulated = 0.0;      // damped-cosine fit to the simulated trace
  double fitted_frequency = 0.0;  // Hz
  int cavity_dim = 0;
};

struct CalibrationOptions {
  bool simulate_ramsey = true;
  double ramsey_detuning = mhz(0.9);
  double ramsey_duration = 12e-6;  // s
  int ramsey_points = 241;
  int cavity_dim = 8;
};

struct CalibrationReport {
  DressedFrequencies formula;
  DressedFrequencies numeric;
  double gamma_th = 0.0;
  // evaluated at omega_d = omega_q - 2 chi
  std::pair<double, double> autler_townes_pair{0.0, 0.0};
  bool has_ramsey = false;
  RamseyComparison ramsey;

  // Throws InvalidArgument unless omega_1_plus > omega_1_minus and all finite.
  void validate() const;
};

RamseyComparison compare_ramsey(const SystemParams& p, const CalibrationOptions& opts = {});

CalibrationReport calibrate(const SystemParams& p, const CalibrationOptions& opts = {});

}  // namespace cqed
