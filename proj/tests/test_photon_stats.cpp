#include <gtest/gtest.h>

#include <cmath>

#include "cqed/error.hpp"
#include "cqed/photon_stats.hpp"
#include "oracles.hpp"

using namespace cqed;

namespace {

PhotonDistribution from_probs(std::vector<double> p) {
  PhotonDistribution d;
  d.truncation = static_cast<int>(p.size());
  d.probs = std::move(p);
  return d;
}

// Pure loss acting on rho through its Kraus decomposition:
//   rho'(m, m') = sum_k sqrt(C(m+k, k) C(m'+k, k)) eta^{(m+m')/2} (1-eta)^k rho(m+k, m'+k)
oracle::Mat loss_channel(const oracle::Mat& rho, double eta) {
  const int d = static_cast<int>(rho.rows());
  auto binom = [](int n, int k) { return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)); };
  oracle::Mat out = oracle::Mat::Zero(d, d);
  for (int m = 0; m < d; ++m)
    for (int mp = 0; mp < d; ++mp)
      for (int k = 0; m + k < d && mp + k < d; ++k)
        out(m, mp) += std::sqrt(binom(m + k, k) * binom(mp + k, k)) * std::pow(eta, 0.5 * (m + mp)) *
                      std::pow(1.0 - eta, k) * rho(m + k, mp + k);
  return out;
}

// Squeezed vacuum amplitudes <2n|S(r)|0> = (-tanh r)^n sqrt((2n)!) / (2^n n! sqrt(cosh r))
oracle::Mat squeezed_vacuum_density(double r, int dim) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
  for (int n = 0; 2 * n < dim; ++n)
    psi[2 * n] = std::pow(-std::tanh(r), n) *
                 std::exp(0.5 * std::lgamma(2.0 * n + 1) - n * std::log(2.0) - std::lgamma(n + 1.0)) /
                 std::sqrt(std::cosh(r));
  return psi * psi.adjoint();
}

double quadrature_variance_db(const DenseMat& rho) {
  // Var(a + a^dag) relative to vacuum (= 1), minimised over the quadrature angle
  const int d = static_cast<int>(rho.rows());
  oracle::Mat a = oracle::lowering(d);
  const cplx ma = (a * rho).trace(), maa = (a * a * rho).trace();
  const double n = (a.adjoint() * a * rho).trace().real();
  const double var_min = 1.0 + 2.0 * (n - std::norm(ma)) - 2.0 * std::abs(maa - ma * ma);
  return 10.0 * std::log10(var_min);
}

}  // namespace

TEST(Distribution, Vacuum) {
  DenseMat rho = DenseMat::Zero(5, 5);
  rho(0, 0) = 1.0;
  PhotonDistribution d = distribution_from_density(rho);
  EXPECT_EQ(d.truncation, 5);
  EXPECT_EQ(d.probs[0], 1.0);
  for (int n = 1; n < 5; ++n) EXPECT_EQ(d.probs[n], 0.0);
  EXPECT_EQ(d.tail_mass, 0.0);
  EXPECT_NO_THROW(d.validate());
}

TEST(Distribution, ValidateRejectsNegativeAndExcess) {
  EXPECT_THROW(from_probs({1.0, -1e-6}).validate(), InvalidArgument);
  EXPECT_THROW(from_probs({0.7, 0.4}).validate(), InvalidArgument);
  EXPECT_NO_THROW(from_probs({1.0, -1e-11}).validate());
  EXPECT_THROW(distribution_from_density(DenseMat::Zero(2, 3)), InvalidArgument);
}

TEST(ThermalCoherent, ZeroDisplacementIsGeometric) {
  for (double nth : {0.04, 0.22, 0.5}) {
    PhotonDistribution d = distribution_from_density(thermal_coherent_density({nth, 0.0}, 30));
    auto g = oracle::geometric(nth, 30);
    for (int n = 0; n < 30; ++n) EXPECT_NEAR(d.probs[n], g[n], 1e-10) << nth << " " << n;
  }
}

TEST(ThermalCoherent, PureCoherentIsPoisson) {
  const cplx alpha(0.49, 0.0);
  DenseMat rho = thermal_coherent_density({0.0, alpha}, 16);
  EXPECT_NEAR((rho * rho).trace().real(), 1.0, 1e-9);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
  EXPECT_LT((rho - rho.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
  auto p = oracle::poisson(std::norm(alpha), 16);
  PhotonDistribution d = distribution_from_density(rho);
  for (int n = 0; n < 16; ++n) EXPECT_NEAR(d.probs[n], p[n], 1e-10) << n;
}

TEST(ThermalCoherent, MatchesDisplacedFockMixture) {
  const double nth = 0.04;
  const cplx alpha = std::polar(0.49, 0.3);
  const int dim = 16;
  PhotonDistribution d = distribution_from_density(thermal_coherent_density({nth, alpha}, dim));
  auto w = oracle::geometric(nth, 60);
  for (int m = 0; m < dim; ++m) {
    double ref = 0.0;
    for (int n = 0; n < 60; ++n) ref += w[n] * std::norm(oracle::displaced_fock_element(m, n, alpha));
    EXPECT_NEAR(d.probs[m], ref, 1e-10) << m;
  }
}

TEST(ThermalCoherent, TruncationTooSmall) {
  try {
    thermal_coherent_density({0.22, 1.5}, 6);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("truncation"), std::string::npos);
  }
  EXPECT_THROW(thermal_coherent_density({-0.1, 0.0}, 6), InvalidArgument);
}

TEST(LossySqueezed, ZeroSqueezingIsVacuum) {
  for (double l : {0.0, 0.42, 1.0}) {
    DenseMat rho = lossy_squeezed_density({0.0, l}, 8);
    DenseMat vac = DenseMat::Zero(8, 8);
    vac(0, 0) = 1.0;
    EXPECT_LT((rho - vac).cwiseAbs().maxCoeff(), 1e-15) << l;
  }
}

TEST(LossySqueezed, LosslessMatchesClosedForm) {
  const double r = 0.54;
  PhotonDistribution d = distribution_from_density(lossy_squeezed_density({r, 0.0}, 30));
  auto ref = oracle::squeezed_vacuum(r, 30);
  for (int n = 0; n < 30; ++n) EXPECT_NEAR(d.probs[n], ref[n], 1e-10) << n;
  for (int n = 1; n < 30; n += 2) EXPECT_LT(d.probs[n], 1e-12) << n;
  EXPECT_NEAR(d.probs[2] / d.probs[0], 0.5 * std::pow(std::tanh(r), 2), 1e-10);
}

TEST(LossySqueezed, FullLossIsVacuum) {
  for (double r : {0.1, 0.54, 1.0})
    for (LossConvention c : {LossConvention::power, LossConvention::amplitude}) {
      DenseMat rho = lossy_squeezed_density({r, 1.0, c}, 36);
      DenseMat vac = DenseMat::Zero(36, 36);
      vac(0, 0) = 1.0;
      EXPECT_LT((rho - vac).cwiseAbs().maxCoeff(), 1e-10) << r;
    }
}

TEST(LossySqueezed, EnergyBookkeeping) {
  const double r = 0.54;
  for (double l : {0.1, 0.42, 0.8}) {
    PhotonDistribution p = distribution_from_density(lossy_squeezed_density({r, l, LossConvention::power}, 34));
    EXPECT_NEAR(mean_photon(p), (1 - l) * std::pow(std::sinh(r), 2), 1e-8) << l;
    PhotonDistribution a = distribution_from_density(lossy_squeezed_density({r, l, LossConvention::amplitude}, 34));
    EXPECT_NEAR(mean_photon(a), (1 - l * l) * std::pow(std::sinh(r), 2), 1e-8) << l;
  }
}

TEST(LossySqueezed, MatchesKrausLossChannel) {
  const double r = 0.54, l = 0.42;
  const int dim = 34;
  DenseMat rho = lossy_squeezed_density({r, l}, dim);
  oracle::Mat ref = loss_channel(squeezed_vacuum_density(r, 60), 1 - l).topLeftCorner(dim, dim);
  EXPECT_LT((rho - ref).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LossySqueezed, PaperModelIsNonclassical) {
  DenseMat rho = lossy_squeezed_density({0.54, 0.42}, 34);
  // "2.1-dB squeezed state"
  EXPECT_NEAR(quadrature_variance_db(rho), -2.1, 0.05);
  KlyshkoResult k = klyshko(distribution_from_density(rho));
  ASSERT_TRUE(k.at(1) && k.at(2) && k.at(3) && k.at(4));
  EXPECT_GT(k.at(1)->value, 1.0);
  EXPECT_LT(k.at(2)->value, 1.0);
  EXPECT_GT(k.at(3)->value, 1.0);
  EXPECT_LT(k.at(4)->value, 1.0);
  EXPECT_TRUE(k.nonclassical);
}

TEST(LossySqueezed, RejectsBadParameters) {
  EXPECT_THROW(lossy_squeezed_density({-0.1, 0.0}, 8), InvalidArgument);
  EXPECT_THROW(lossy_squeezed_density({0.5, 1.2}, 8), InvalidArgument);
  EXPECT_THROW(lossy_squeezed_density({1.5, 0.0}, 8), InvalidArgument);
}

TEST(Klyshko, PoissonIsUnity) {
  // floor 0: the identity holds however small P_n gets
  for (double mean : {0.05, 0.24, 1.0, 3.0}) {
    KlyshkoResult k = klyshko(oracle::poisson(mean, 10), 0.0);
    for (int n = 1; n <= 6; ++n) {
      ASSERT_NE(k.at(n), nullptr);
      EXPECT_NEAR(k.at(n)->value, 1.0, 1e-10) << mean << " " << n;
    }
  }
}

TEST(Klyshko, GeometricIsRatio) {
  for (double nbar : {0.04, 0.22, 2.0}) {
    KlyshkoResult k = klyshko(oracle::geometric(nbar, 10), 0.0);
    for (int n = 1; n <= 6; ++n) EXPECT_NEAR(k.at(n)->value, (n + 1.0) / n, 1e-10) << nbar << " " << n;
    EXPECT_FALSE(k.nonclassical);
  }
}

TEST(Klyshko, ScaleInvariant) {
  auto p = oracle::geometric(0.3, 12);
  std::vector<double> q = p;
  for (double& v : q) v *= 0.125;
  KlyshkoResult a = klyshko(p), b = klyshko(q);
  ASSERT_EQ(a.values.size(), b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    EXPECT_EQ(a.values[i].defined, b.values[i].defined);
    EXPECT_EQ(a.values[i].value, b.values[i].value);
  }
  for (double& v : q) v *= 3.7;
  KlyshkoResult c = klyshko(q);
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(c.values[i].value, a.values[i].value, 1e-15 * a.values[i].value);
}

TEST(Klyshko, FloorFlagsTinyPopulations) {
  KlyshkoResult k = klyshko(oracle::poisson(0.05, 10));
  ASSERT_NE(k.at(2), nullptr);
  EXPECT_EQ(k.at(6), nullptr);
}

TEST(Klyshko, UndefinedFlags) {
  KlyshkoResult vac = klyshko(std::vector<double>{1.0, 0.0, 0.0, 0.0});
  ASSERT_EQ(vac.values.size(), 2u);
  for (const auto& v : vac.values) EXPECT_FALSE(v.defined);
  EXPECT_FALSE(vac.nonclassical);
  // lossless squeezed vacuum: odd P_n vanish
  KlyshkoResult sq = klyshko(oracle::squeezed_vacuum(0.54, 10));
  EXPECT_EQ(sq.at(1), nullptr);
  EXPECT_EQ(sq.at(3), nullptr);
  ASSERT_NE(sq.at(2), nullptr);
  EXPECT_EQ(sq.at(2)->value, 0.0);
  EXPECT_TRUE(sq.nonclassical);
}

TEST(MeanPhoton, ThermalAndVacuum) {
  PhotonDistribution d = distribution_from_density(thermal_coherent_density({0.27, 0.0}, 40));
  EXPECT_NEAR(mean_photon(d), 0.27, 1e-8);
  EXPECT_EQ(mean_photon(from_probs({1.0, 0.0})), 0.0);
  PhotonDistribution s = distribution_from_density(lossy_squeezed_density({0.54, 0.0}, 34));
  EXPECT_NEAR(mean_photon(s), std::pow(std::sinh(0.54), 2), 1e-8);
}

TEST(MeanPhoton, RejectsTailMass) {
  PhotonDistribution d = from_probs({0.5, 0.3});
  d.tail_mass = 0.2;
  EXPECT_THROW(mean_photon(d), InvalidArgument);
}
