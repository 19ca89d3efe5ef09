#pragma once

// Parameter fits of simulated spectra, multi-Lorentzian peak decomposition,
// apparent photon numbers and small curve fits for time traces.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cqed/model.hpp"
#include "cqed/response.hpp"

namespace cqed {

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
};

struct NelderMeadOptions {
  int max_iterations = 500;  // per restart
  int restarts = 3;
  std::uint64_t seed = 20240229;
  double initial_step = 0.1;  // fraction of each bound span
  double ftol = 1e-14;        // absolute spread of simplex values
  double xtol = 1e-9;         // simplex size relative to the bound span
};

struct IterationRecord {
  int restart = 0;
  int iteration = 0;
  double best = 0.0;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<IterationRecord> log;  // best value after each accepted step
};

// Nelder-Mead on the box given by bounds; trial points are projected back
// into the box.  Restart k > 0 rebuilds a simplex around the incumbent with
// steps drawn from a generator seeded by opts.seed, so results are
// reproducible.  converged is set when a restart no longer improves the
// incumbent by more than ftol.
MinimizeResult minimize_bounded(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x0, const std::vector<Bounds>& bounds,
                                const NelderMeadOptions& opts = {});

// ---------------------------------------------------------------------------
// Spectrum fits

struct FreeParameter {
  // "n_th" (thermal drive), "Omega_s", "kappa_e", "Omega_d", "Omega_p",
  // "p_th" or "n_th_cavity"; rates in rad/s
  std::string name;
  Bounds bounds;
  double initial = 0.0;
};

struct FitProblem {
  Spectrum observed;
  DriveKind::Tag family = DriveKind::Tag::thermal;
  double drive_value = 0.0;  // n_th or Omega_s unless fitted
  SystemParams baseline;
  SpaceLayout layout{12, 1};
  std::vector<FreeParameter> free;
  // Model evaluation grid; empty means the observed axis.
  std::vector<double> model_grid;
  SweepOptions sweep;
  NelderMeadOptions optimizer;
};

struct FittedParameter {
  std::string name;
  double value = 0.0;
  double stderr_estimate = 0.0;
  bool at_bound = false;
};

struct FitReport {
  std::vector<FittedParameter> params;
  double residual = 0.0;  // sum of squared normalized-magnitude differences
  int points = 0;
  std::vector<std::vector<double>> covariance;
  bool covariance_valid = false;
  bool bound_saturated = false;
  MinimizeResult minimizer;
};

// Sum of squares between the normalized magnitudes of observed and model,
// the model linearly interpolated onto the observed axis.  Throws
// InvalidArgument when the grids' ends differ by more than 10% of the
// observed span.
double spectrum_mismatch(const Spectrum& observed, const Spectrum& model);

// Model spectrum of a family at a parameter vector (same order as free).
Spectrum fit_model_spectrum(const FitProblem& problem, const std::vector<double>& x);

// Throws InvalidArgument for an ill-posed problem, SolverError when the
// optimizer has not converged after all restarts.
FitReport fit_spectrum(const FitProblem& problem);

// ---------------------------------------------------------------------------
// Lorentzian peaks

// area * (w / pi) / ((x - center)^2 + w^2), w the half-width
struct LorentzianPeak {
  double center = 0.0;
  double half_width = 0.0;
  double area = 0.0;
  bool degenerate = false;  // within half_width / 4 of a neighbour
};

struct MultiLorentzianOptions {
  bool fit_offset = true;
  NelderMeadOptions optimizer;
};

struct MultiLorentzianFit {
  std::vector<LorentzianPeak> peaks;  // sorted by center
  double offset = 0.0;
  double residual = 0.0;
  std::vector<IterationRecord> log;
};

double lorentzian(double x, const LorentzianPeak& p);

// Least-squares sum of n_peaks Lorentzians (plus an offset) to the spectrum's
// real part (qubit excitation) or magnitude (transmission).  Guesses give
// centers and half-widths; areas start from the data.  During the simplex
// stage each centre is confined between the midpoints to its neighbouring
// guesses.
MultiLorentzianFit multi_lorentzian_fit(const Spectrum& s, int n_peaks, const std::vector<LorentzianPeak>& init,
                                        const MultiLorentzianOptions& opts = {});

struct PeakIndex {
  int photon_number = -1;  // -1 when no ladder position lies within chi/2
  double offset = 0.0;     // center - (omega_q - 2 chi n)
};

std::vector<PeakIndex> index_peaks(const std::vector<LorentzianPeak>& peaks, double omega_q, double chi);

// sum n A_n / sum A_n with peaks indexed on the ladder omega_q - 2 chi n.
// Throws InvalidArgument naming any peak that cannot be indexed.
double apparent_photon_number(const std::vector<LorentzianPeak>& peaks, double omega_q, double chi);

// Guesses at omega_q - 2 chi n, n = 0 .. n_peaks-1, half-width hw.
std::vector<LorentzianPeak> ladder_guesses(double omega_q, double chi, int n_peaks, double hw);

// ---------------------------------------------------------------------------
// Time traces and distributions

struct ExponentialFit {
  double amplitude = 0.0;
  double tau = 0.0;
  double offset = 0.0;
  double residual = 0.0;
};

// y = amplitude exp(-t / tau) + offset
ExponentialFit fit_exponential(const std::vector<double>& t, const std::vector<double>& y);

struct DampedCosineFit {
  double amplitude = 0.0;
  double decay_time = 0.0;
  double frequency = 0.0;  // Hz
  double phase = 0.0;
  double offset = 0.0;
  double residual = 0.0;
};

// y = amplitude exp(-t / decay_time) cos(2 pi frequency t + phase) + offset
DampedCosineFit fit_damped_cosine(const std::vector<double>& t, const std::vector<double>& y);

struct DominantFrequency {
  double frequency = 0.0;  // Hz
  double bin_width = 0.0;  // 1 / (N dt)
  int bin = 0;
};

// Largest non-DC bin of the FFT of a uniformly sampled, mean-subtracted trace.
DominantFrequency dominant_frequency(const std::vector<double>& t, const std::vector<double>& y);

struct GeometricFit {
  double nbar = 0.0;
  double tv_distance = 0.0;
};

// Geometric law n^k / (1+n)^{k+1} closest in total-variation distance
// (1/2) sum |P_k - G_k| over the given support.
GeometricFit best_fit_geometric(const std::vector<double>& probs);

double total_variation(const std::vector<double>& p, const std::vector<double>& q);

}  // namespace cqed
