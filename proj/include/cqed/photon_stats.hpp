#pragma once

// Photon-number distributions, analytic single-mode state models and the
// Klyshko figures of merit.

#include <vector>

#include "cqed/fock.hpp"

namespace cqed {

struct PhotonDistribution {
  std::vector<double> probs;  // P_n, n = 0 .. N-1
  int truncation = 0;
  double tail_mass = 0.0;  // 1 - sum P_n

  // P_n >= -1e-10 and sum P_n <= 1 + 1e-9
  void validate() const;
};

// Diagonal of a single-mode density matrix.
PhotonDistribution distribution_from_density(const DenseMat& rho_cavity);

// Cavity marginal of a full qubit (x) cavity (x) JPA state.
PhotonDistribution cavity_distribution(const DensityMatrix& rho);

struct ThermalCoherentModel {
  double n_th = 0.0;
  cplx alpha = 0.0;
};

// How the loss ratio l maps onto the beam-splitter transmissivity eta.
//   power:     eta = 1 - l         <n> = (1 - l) sinh^2 r
//   amplitude: eta = 1 - l^2       <n> = (1 - l^2) sinh^2 r   (l = sin theta)
enum class LossConvention { power, amplitude };

const char* to_string(LossConvention c);

struct SqueezedLossModel {
  double r = 0.0;
  double l = 0.0;
  LossConvention convention = LossConvention::power;

  double transmissivity() const;
};

// Operators are exponentiated this many levels above the requested size and
// cropped afterwards.
inline constexpr int kModelBuffer = 8;

// D(alpha) rho_th D(alpha)^dag.  Throws InvalidArgument when more than
// tail_tol of the state lies above dim.
DenseMat thermal_coherent_density(const ThermalCoherentModel& m, int dim, double tail_tol = 1e-8);

// S(r)|0> on mode a, beam splitter against a vacuum ancilla, ancilla traced
// out.  Same truncation rule as thermal_coherent_density.
DenseMat lossy_squeezed_density(const SqueezedLossModel& m, int dim, double tail_tol = 1e-8);

struct KlyshkoValue {
  int n = 0;
  double value = 0.0;
  bool defined = false;
};

struct KlyshkoResult {
  std::vector<KlyshkoValue> values;  // n = 1 .. N-2
  double floor = 0.0;
  bool nonclassical = false;  // any defined K_n < 1

  // nullptr when n is out of range or K_n is undefined
  const KlyshkoValue* at(int n) const;
};

// K_n = (n+1) P_{n-1} P_{n+1} / (n P_n^2).  K_n is left undefined where
// P_n^2 < floor * (sum P)^2, so the table is the same for P and c * P.
KlyshkoResult klyshko(const PhotonDistribution& p, double floor = 1e-12);
KlyshkoResult klyshko(const std::vector<double>& probs, double floor = 1e-12);

// sum n P_n; throws InvalidArgument when tail_mass exceeds max_tail.
double mean_photon(const PhotonDistribution& p, double max_tail = 1e-6);

}  // namespace cqed
