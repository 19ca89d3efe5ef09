#include "cqed/photon_stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <unsupported/Eigen/MatrixFunctions>

#include "cqed/error.hpp"

namespace cqed {

namespace {

DenseMat dense_lowering(int dim) { return DenseMat(SparseMat(annihilation(dim))); }

void require_dim(int dim, const char* what) {
  if (dim < 2) throw InvalidArgument(std::string(what) + ": dimension must be at least 2");
}

// Crop to dim x dim, check the discarded mass and renormalize.
DenseMat crop(const DenseMat& rho, int dim, double tail_tol, const char* what) {
  DenseMat out = rho.topLeftCorner(dim, dim);
  const double kept = out.trace().real();
  const double tail = 1.0 - kept;
  if (!(tail <= tail_tol)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: truncation too small, %.3g of the state lies above dim = %d (tolerance %.3g)",
                  what, tail, dim, tail_tol);
    throw InvalidArgument(buf);
  }
  out /= kept;
  return 0.5 * (out + out.adjoint());
}

}  // namespace

void PhotonDistribution::validate() const {
  double sum = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (!std::isfinite(probs[n]) || probs[n] < -1e-10)
      throw InvalidArgument("photon distribution: invalid P_" + std::to_string(n));
    sum += probs[n];
  }
  if (sum > 1.0 + 1e-9) throw InvalidArgument("photon distribution: total probability exceeds one");
}

PhotonDistribution distribution_from_density(const DenseMat& rho_cavity) {
  if (rho_cavity.rows() != rho_cavity.cols() || rho_cavity.rows() == 0)
    throw InvalidArgument("distribution_from_density: expected a non-empty square matrix");
  PhotonDistribution d;
  d.truncation = static_cast<int>(rho_cavity.rows());
  d.probs.resize(static_cast<std::size_t>(d.truncation));
  for (int n = 0; n < d.truncation; ++n) d.probs[n] = rho_cavity(n, n).real();
  d.tail_mass = 1.0 - std::accumulate(d.probs.begin(), d.probs.end(), 0.0);
  return d;
}

PhotonDistribution cavity_distribution(const DensityMatrix& rho) {
  return distribution_from_density(partial_trace(rho, Subsystem::cavity));
}

const char* to_string(LossConvention c) { return c == LossConvention::power ? "power" : "amplitude"; }

double SqueezedLossModel::transmissivity() const {
  return convention == LossConvention::power ? 1.0 - l : 1.0 - l * l;
}

DenseMat thermal_coherent_density(const ThermalCoherentModel& m, int dim, double tail_tol) {
  require_dim(dim, "thermal_coherent_density");
  if (!(m.n_th >= 0.0) || !std::isfinite(std::abs(m.alpha)))
    throw InvalidArgument("thermal_coherent_density: n_th must be non-negative and alpha finite");
  const int big = dim + kModelBuffer;
  DenseMat rho = DenseMat::Zero(big, big);
  // untruncated weights; whatever lies above big counts towards the tail
  const double x = m.n_th / (1.0 + m.n_th);
  for (int n = 0; n < big; ++n) rho(n, n) = std::pow(x, n) / (1.0 + m.n_th);
  if (m.alpha != cplx(0.0)) {
    const DenseMat a = dense_lowering(big);
    const DenseMat D = (m.alpha * a.adjoint() - std::conj(m.alpha) * a).exp();
    rho = D * rho * D.adjoint();
  }
  return crop(rho, dim, tail_tol, "thermal_coherent_density");
}

DenseMat lossy_squeezed_density(const SqueezedLossModel& m, int dim, double tail_tol) {
  require_dim(dim, "lossy_squeezed_density");
  if (!(m.r >= 0.0) || !std::isfinite(m.r)) throw InvalidArgument("lossy_squeezed_density: r must be >= 0");
  if (!(m.l >= 0.0 && m.l <= 1.0)) throw InvalidArgument("lossy_squeezed_density: l must lie in [0, 1]");
  const int big = dim + kModelBuffer;

  // S(r)|0>, S(r) = exp((r/2)(a^2 - a^dag^2))
  DenseVec psi = DenseVec::Zero(big);
  psi[0] = 1.0;
  if (m.r > 0.0) {
    const DenseMat a = dense_lowering(big);
    const DenseMat a2 = a * a;
    psi = DenseMat((0.5 * m.r) * (a2 - a2.adjoint())).exp() * psi;
  }

  // Beam splitter exp(theta (a b^dag - a^dag b)) conserves the total photon
  // number, so |N, 0> only mixes within the block |k, N - k>.
  const double theta = std::acos(std::sqrt(std::clamp(m.transmissivity(), 0.0, 1.0)));
  // out(k, j): amplitude of |k>_a |j>_b
  DenseMat out = DenseMat::Zero(big, big);
  for (int N = 0; N < big; ++N) {
    if (psi[N] == cplx(0.0)) continue;
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N + 1, N + 1);
    for (int k = 1; k <= N; ++k) {
      // a b^dag |k, N-k> = sqrt(k (N-k+1)) |k-1, N-k+1>
      const double c = theta * std::sqrt(static_cast<double>(k) * (N - k + 1));
      G(k - 1, k) = c;
      G(k, k - 1) = -c;
    }
    const Eigen::MatrixXd U = G.exp();
    for (int k = 0; k <= N; ++k) out(k, N - k) += psi[N] * U(k, N);
  }
  const DenseMat rho = out * out.adjoint();
  return crop(rho, dim, tail_tol, "lossy_squeezed_density");
}

const KlyshkoValue* KlyshkoResult::at(int n) const {
  for (const KlyshkoValue& v : values)
    if (v.n == n) return v.defined ? &v : nullptr;
  return nullptr;
}

KlyshkoResult klyshko(const std::vector<double>& P, double floor) {
  KlyshkoResult out;
  out.floor = floor;
  const double total = std::accumulate(P.begin(), P.end(), 0.0);
  const int N = static_cast<int>(P.size());
  for (int n = 1; n + 1 < N; ++n) {
    KlyshkoValue v;
    v.n = n;
    const double pn2 = P[n] * P[n];
    v.defined = total > 0.0 && pn2 >= floor * total * total;
    if (v.defined) {
      v.value = (n + 1) * P[n - 1] * P[n + 1] / (n * pn2);
      if (v.value < 1.0) out.nonclassical = true;
    }
    out.values.push_back(v);
  }
  return out;
}

KlyshkoResult klyshko(const PhotonDistribution& p, double floor) { return klyshko(p.probs, floor); }

double mean_photon(const PhotonDistribution& p, double max_tail) {
  if (!(std::abs(p.tail_mass) <= max_tail))
    throw InvalidArgument("mean_photon: tail mass " + std::to_string(p.tail_mass) + " exceeds " +
                          std::to_string(max_tail));
  double m = 0.0;
  for (std::size_t n = 0; n < p.probs.size(); ++n) m += static_cast<double>(n) * p.probs[n];
  return m;
}

}  // namespace cqed
