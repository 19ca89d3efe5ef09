#include "cqed/calibration.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "cqed/error.hpp"
#include "cqed/fitting.hpp"
#include "cqed/response.hpp"

namespace cqed {

namespace {

// Probe-frame Hamiltonian with the cavity in the lab frame (omega_p = 0) and
// no probe, on at most one photon.
DenseMat lab_cavity_hamiltonian(const SystemParams& p, const SpaceLayout& lay) {
  SystemParams q = p;
  q.omega_p = 0.0;
  q.Omega_p = 0.0;
  return build_system_hamiltonian(q, Frame::probe, lay).dense();
}

Eigen::Vector2d block_eigenvalues(const DenseMat& h, int i0, int i1) {
  Eigen::Matrix2cd b;
  const int idx[2] = {i0, i1};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) b(i, j) = h(idx[i], idx[j]);
  return Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd>(b).eigenvalues();
}

}  // namespace

DressedFrequencies dressed_eigenfrequencies(const SystemParams& p) {
  const double half = 0.5 * p.Omega_d;
  const double split = std::sqrt(p.chi * p.chi + half * half);
  return {-half, half, p.omega_c - split, p.omega_c + split};
}

DressedFrequencies dressed_eigenfrequencies_numeric(const SystemParams& p) {
  SystemParams q = p;
  q.omega_d = q.omega_q;
  const SpaceLayout lay(2, 1);
  const DenseMat h = lab_cavity_hamiltonian(q, lay);
  const Eigen::Vector2d e0 = block_eigenvalues(h, lay.index(0, 0, 0), lay.index(1, 0, 0));
  const Eigen::Vector2d e1 = block_eigenvalues(h, lay.index(0, 1, 0), lay.index(1, 1, 0));
  return {e0[0], e0[1], e1[0], e1[1]};
}

double thermal_dephasing_rate(const SystemParams& p) {
  const double den = p.kappa * p.kappa + p.chi * p.chi;
  return den > 0.0 ? 4.0 * p.kappa * p.chi * p.chi / den * p.n_th : 0.0;
}

std::pair<double, double> autler_townes_frequencies(const SystemParams& p) {
  const SpaceLayout lay(2, 1);
  const DenseMat h = lab_cavity_hamiltonian(p, lay);
  const Eigen::Vector2d e1 = block_eigenvalues(h, lay.index(1, 1, 0), lay.index(0, 1, 0));
  const double e0 = h(lay.index(1, 0, 0), lay.index(1, 0, 0)).real();
  return {e1[0] - e0, e1[1] - e0};
}

void CalibrationReport::validate() const {
  const double v[] = {formula.omega_0_minus, formula.omega_0_plus, formula.omega_1_minus, formula.omega_1_plus,
                      numeric.omega_0_minus, numeric.omega_0_plus, numeric.omega_1_minus, numeric.omega_1_plus,
                      gamma_th,              autler_townes_pair.first, autler_townes_pair.second};
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidArgument("calibration report: non-finite value");
  if (!(formula.omega_1_plus > formula.omega_1_minus))
    throw InvalidArgument("calibration report: omega_1+ must exceed omega_1-");
}

RamseyComparison compare_ramsey(const SystemParams& p, const CalibrationOptions& opts) {
  RamseyComparison r;
  r.detuning = opts.ramsey_detuning;
  r.cavity_dim = opts.cavity_dim;
  r.t2_formula = 1.0 / (0.5 * p.gamma + p.gamma_phi + thermal_dephasing_rate(p));
  SystemParams q = p;
  q.omega_d = q.omega_q - opts.ramsey_detuning;
  const auto times = linspace(0.0, opts.ramsey_duration, opts.ramsey_points);
  const TimeTrace tr = ramsey_trace(q, SpaceLayout(opts.cavity_dim, 1), times);
  const DampedCosineFit fit = fit_damped_cosine(tr.times, tr.values);
  r.t2_simulated = fit.decay_time;
  r.fitted_frequency = fit.frequency;
  return r;
}

CalibrationReport calibrate(const SystemParams& p, const CalibrationOptions& opts) {
  p.validate();
  CalibrationReport rep;
  rep.formula = dressed_eigenfrequencies(p);
  rep.numeric = dressed_eigenfrequencies_numeric(p);
  rep.gamma_th = thermal_dephasing_rate(p);
  SystemParams at = p;
  at.omega_d = p.omega_q - 2 * p.chi;
  rep.autler_townes_pair = autler_townes_frequencies(at);
  if (opts.simulate_ramsey) {
    rep.ramsey = compare_ramsey(p, opts);
    rep.has_ramsey = true;
  }
  rep.validate();
  return rep;
}

}  // namespace cqed
