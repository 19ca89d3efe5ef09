#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include "cqed/calibration.hpp"
#include "cqed/error.hpp"
#include "oracles.hpp"

using namespace cqed;

namespace {

// omega_c a^dag a - chi a^dag a sigma_z + (Omega_d / 2) sigma_x on n <= 1,
// basis |g0>, |e0>, |g1>, |e1>
Eigen::Vector4d oracle_spectrum(double omega_c, double chi, double Omega_d) {
  Eigen::Matrix4d h = Eigen::Matrix4d::Zero();
  h(2, 2) = omega_c + chi;
  h(3, 3) = omega_c - chi;
  h(0, 1) = h(1, 0) = h(2, 3) = h(3, 2) = 0.5 * Omega_d;
  Eigen::Vector4d e = Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d>(h).eigenvalues();
  return e;
}

double rel(double a, double b, double scale) { return std::abs(a - b) / std::max(std::abs(b), scale); }

// Dephasing of a dispersively coupled qubit by a thermal cavity,
//   Gamma + i delta = (kappa/2) (sqrt((1 + 2i chi/kappa)^2 + 8i chi n/kappa) - 1)
// with H = -chi a^dag a sigma_z (qubit frequency 2 chi per photon).
std::complex<double> thermal_dephasing_oracle(double kappa, double chi, double n) {
  using namespace std::complex_literals;
  const std::complex<double> z = 1.0 + 2.0i * chi / kappa;
  return 0.5 * kappa * (std::sqrt(z * z + 8.0i * chi * n / kappa) - 1.0);
}

}  // namespace

TEST(DressedFrequencies, UndrivenDoublet) {
  SystemParams p = SystemParams::table_s1();
  p.Omega_d = 0.0;
  DressedFrequencies f = dressed_eigenfrequencies(p);
  EXPECT_EQ(f.omega_0_plus, 0.0);
  EXPECT_EQ(f.omega_0_minus, 0.0);
  EXPECT_DOUBLE_EQ(f.omega_1_plus, p.omega_c + p.chi);
  EXPECT_DOUBLE_EQ(f.omega_1_minus, p.omega_c - p.chi);
}

TEST(DressedFrequencies, TableValue) {
  SystemParams p = SystemParams::table_s1();
  DressedFrequencies f = dressed_eigenfrequencies(p);
  EXPECT_NEAR(to_mhz(f.omega_1_plus - p.omega_c), std::hypot(3.9, 0.23), 1e-9);
  EXPECT_NEAR(to_mhz(f.omega_1_plus - p.omega_c), 3.907, 5e-4);
  EXPECT_NEAR(to_mhz(f.omega_0_plus), 0.23, 1e-12);
}

TEST(DressedFrequencies, FormulaMatchesDiagonalization) {
  SystemParams p = SystemParams::table_s1();
  for (int k = 0; k <= 40; ++k) {
    p.Omega_d = 2 * p.chi * k / 40.0;
    DressedFrequencies f = dressed_eigenfrequencies(p);
    DressedFrequencies n = dressed_eigenfrequencies_numeric(p);
    Eigen::Vector4d o = oracle_spectrum(p.omega_c, p.chi, p.Omega_d);
    const double scale = p.chi;
    EXPECT_LT(rel(f.omega_0_minus, o[0], scale), 1e-9) << k;
    EXPECT_LT(rel(f.omega_0_plus, o[1], scale), 1e-9) << k;
    EXPECT_LT(rel(f.omega_1_minus, o[2], scale), 1e-9) << k;
    EXPECT_LT(rel(f.omega_1_plus, o[3], scale), 1e-9) << k;
    EXPECT_LT(rel(n.omega_0_minus, f.omega_0_minus, scale), 1e-9) << k;
    EXPECT_LT(rel(n.omega_0_plus, f.omega_0_plus, scale), 1e-9) << k;
    EXPECT_LT(rel(n.omega_1_minus, f.omega_1_minus, scale), 1e-9) << k;
    EXPECT_LT(rel(n.omega_1_plus, f.omega_1_plus, scale), 1e-9) << k;
  }
}

TEST(ThermalDephasing, LiteralFormula) {
  SystemParams p = SystemParams::table_s1();
  const double k = p.kappa, c = p.chi;
  EXPECT_DOUBLE_EQ(thermal_dephasing_rate(p), 4 * k * c * c / (k * k + c * c) * 0.04);
  p.n_th = 0.0;
  EXPECT_EQ(thermal_dephasing_rate(p), 0.0);
  p = SystemParams::table_s1();
  p.chi = 0.0;
  EXPECT_EQ(thermal_dephasing_rate(p), 0.0);
}

TEST(ThermalDephasing, MonotoneInPhotonNumberAndKappa) {
  SystemParams p = SystemParams::table_s1();
  double last = -1.0;
  for (double n : {0.0, 0.01, 0.04, 0.1, 0.3}) {
    p.n_th = n;
    EXPECT_GT(thermal_dephasing_rate(p), last);
    last = thermal_dephasing_rate(p);
  }
  p = SystemParams::table_s1();
  last = -1.0;
  for (double k : {0.1, 0.494, 1.0, 2.0, 3.8}) {
    p.kappa = p.kappa_e = mhz(k);
    EXPECT_GT(thermal_dephasing_rate(p), last);
    last = thermal_dephasing_rate(p);
  }
}

TEST(AutlerTownes, DegenerateWithoutDrive) {
  SystemParams p = SystemParams::table_s1();
  p.Omega_d = 0.0;
  p.omega_d = p.omega_q - 2 * p.chi;
  auto [lo, hi] = autler_townes_frequencies(p);
  EXPECT_NEAR(hi - lo, 0.0, 1e-12 * p.omega_c);
  EXPECT_NEAR(to_mhz(lo - (p.omega_c - p.chi)), 0.0, 1e-6);
}

TEST(AutlerTownes, ResonantSplittingEqualsDrive) {
  SystemParams p = SystemParams::table_s1();
  p.omega_d = p.omega_q - 2 * p.chi;
  for (double od : {0.1, 0.46, 1.0, 3.0}) {
    p.Omega_d = mhz(od);
    auto [lo, hi] = autler_townes_frequencies(p);
    EXPECT_LT(std::abs((hi - lo) - p.Omega_d) / p.Omega_d, 1e-10) << od;
    EXPECT_LT(std::abs(0.5 * (hi + lo) - (p.omega_c - p.chi)) / p.chi, 1e-9) << od;
  }
}

TEST(AutlerTownes, AvoidedCrossing) {
  SystemParams p = SystemParams::table_s1();
  for (double d : {-2.0, -0.3, 0.7, 5.0}) {
    const double delta = mhz(d);
    p.omega_d = p.omega_q - 2 * p.chi - delta;
    auto [lo, hi] = autler_townes_frequencies(p);
    EXPECT_LT(std::abs((hi - lo) - std::hypot(delta, p.Omega_d)) / p.Omega_d, 1e-9) << d;
    EXPECT_LT(std::abs(0.5 * (hi + lo) - (p.omega_c - p.chi - 0.5 * delta)) / p.chi, 1e-9) << d;
  }
}

TEST(Calibration, ReportFromTable) {
  SystemParams p = SystemParams::table_s1();
  CalibrationOptions opts;
  opts.simulate_ramsey = false;
  CalibrationReport r = calibrate(p, opts);
  EXPECT_NO_THROW(r.validate());
  EXPECT_GT(r.formula.omega_1_plus, r.formula.omega_1_minus);
  EXPECT_NEAR((r.autler_townes_pair.second - r.autler_townes_pair.first) / p.Omega_d, 1.0, 1e-10);
  EXPECT_FALSE(r.has_ramsey);
  p.Omega_d = 0.0;
  CalibrationReport z = calibrate(p, opts);
  EXPECT_EQ(z.formula.omega_0_plus, z.formula.omega_0_minus);
}

TEST(Calibration, RamseyAgainstDephasingOracle) {
  SystemParams p = SystemParams::table_s1();
  p.p_th = 0.0;
  RamseyComparison r = compare_ramsey(p);
  const std::complex<double> g = thermal_dephasing_oracle(p.kappa, p.chi, p.n_th);
  const double t2 = 1.0 / (0.5 * p.gamma + g.real());
  EXPECT_NEAR(r.t2_simulated / t2, 1.0, 0.05);
  EXPECT_NEAR(r.fitted_frequency / 0.9e6, 1.0, 0.05);
  EXPECT_DOUBLE_EQ(r.t2_formula, 1.0 / (0.5 * p.gamma + thermal_dephasing_rate(p)));
}
