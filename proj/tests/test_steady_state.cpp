#include <gtest/gtest.h>

#include <Eigen/SVD>
#include <algorithm>
#include <numeric>

#include "cqed/error.hpp"
#include "cqed/model.hpp"
#include "cqed/steady_state.hpp"
#include "oracles.hpp"

using namespace cqed;

namespace {

Superoperator cavity_generator(int dim, double kappa, double nth, double drive = 0.0) {
  SpaceLayout lay(dim, 1);
  Operator a = embed(annihilation(dim), Subsystem::cavity, lay);
  Operator s = embed(qubit_ops().lower, Subsystem::qubit, lay);
  std::vector<Channel> ch{{kappa * (1 + nth), a}, {kappa * nth, a.adjoint()}, {1.0, s}};
  return vectorize_generator(cplx(0.5 * drive) * (a + a.adjoint()), ch);
}

std::vector<double> cavity_populations(const DensityMatrix& rho) {
  DenseMat rc = partial_trace(rho, Subsystem::cavity);
  std::vector<double> p(static_cast<std::size_t>(rc.rows()));
  for (Eigen::Index n = 0; n < rc.rows(); ++n) p[n] = rc(n, n).real();
  return p;
}

}  // namespace

TEST(SteadyState, DecayOnlyVacuum) {
  SteadyStateResult r = steady_state(cavity_generator(6, 2.0, 0.0));
  EXPECT_NEAR(r.rho.matrix()(0, 0).real(), 1.0, 1e-12);
  EXPECT_LT(r.residual, 1e-12);
  EXPECT_TRUE(r.positive);
}

TEST(SteadyState, ThermalBathGeometric) {
  SteadyStateResult r = steady_state(cavity_generator(14, 3.0, 0.04));
  auto p = cavity_populations(r.rho);
  auto g = oracle::geometric(0.04, 9);
  for (int n = 0; n <= 8; ++n) EXPECT_NEAR(p[n], g[n], 1e-10) << n;
}

TEST(SteadyState, ScalingInvariance) {
  SystemParams prm = SystemParams::table_s1();
  SpaceLayout lay(5, 3);
  Superoperator L = build_cascaded_generator(prm, DriveKind::coherent(mhz(0.3)), Frame::squeeze, lay);
  DenseMat r1 = steady_state(L).rho.matrix();
  for (double c : {1e-6, 3.7, 1e5}) {
    DenseMat r2 = steady_state(c * L).rho.matrix();
    EXPECT_LT((r1 - r2).cwiseAbs().maxCoeff(), 1e-12) << c;
  }
}

TEST(SteadyState, BasisReorderingInvariance) {
  SystemParams prm = SystemParams::table_s1();
  SpaceLayout lay(4, 3);
  Superoperator L = build_cascaded_generator(prm, DriveKind::squeezed(mhz(1.0)), Frame::squeeze, lay);
  const int d = lay.total_dim();
  std::vector<int> perm(static_cast<std::size_t>(d));
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(17);
  std::shuffle(perm.begin(), perm.end(), rng);
  // P|i> = |perm[i]>; vec(P rho P^T) = (P kron P) vec(rho)
  Eigen::PermutationMatrix<Eigen::Dynamic> P(d);
  for (int i = 0; i < d; ++i) P.indices()[i] = perm[i];
  Eigen::PermutationMatrix<Eigen::Dynamic> PP(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) PP.indices()[i + j * d] = perm[i] + perm[j] * d;
  SparseMat Lp = PP * L.matrix() * PP.transpose();
  SteadyStateResult r = steady_state(L), rp = steady_state(Superoperator(lay, Lp));
  DenseMat expect = P * r.rho.matrix() * P.transpose();
  EXPECT_LT((rp.rho.matrix() - expect).cwiseAbs().maxCoeff(), 1e-11);
  EXPECT_LT(rp.residual, 1e-10);
}

TEST(SteadyState, AmbiguousWhenPopulationsDisconnected) {
  // No qubit channel: g and e populations are separately conserved.
  SpaceLayout lay(3, 1);
  Operator a = embed(annihilation(3), Subsystem::cavity, lay);
  std::vector<Channel> ch{{1.0, a}};
  Superoperator L = vectorize_generator(Operator::zero(lay), ch);
  EXPECT_THROW(steady_state(L), SolverError);
  SolverOptions opts;
  opts.reduce_sectors = false;
  try {
    steady_state(L, opts);
    FAIL() << "expected ambiguous steady state";
  } catch (const SolverError& e) {
    EXPECT_NE(std::string(e.what()).find("ambiguous"), std::string::npos);
  }
}

TEST(SteadyState, RejectsNonTracePreservingGenerator) {
  SpaceLayout lay(3, 1);
  SparseMat m(36, 36);
  m.setIdentity();
  EXPECT_THROW(steady_state(Superoperator(lay, m)), InvalidArgument);
}

TEST(SteadyState, SectorReductionMatchesFullSolve) {
  SystemParams prm = SystemParams::table_s1();
  prm.Omega_d = 0.0;
  SpaceLayout lay(5, 3);
  Superoperator L = build_cascaded_generator(prm, DriveKind::squeezed(mhz(2.0)), Frame::squeeze, lay);
  SolverOptions full;
  full.reduce_sectors = false;
  SteadyStateResult a = steady_state(L), b = steady_state(L, full);
  EXPECT_LT(a.solver_stats.reduced_dim, b.solver_stats.reduced_dim);
  EXPECT_GT(a.solver_stats.components, 1);
  EXPECT_LT((a.rho.matrix() - b.rho.matrix()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SteadyState, IterativePathAgreesWithDirect) {
  SystemParams prm = SystemParams::table_s1();
  SpaceLayout lay(4, 3);
  Superoperator L = build_cascaded_generator(prm, DriveKind::coherent(mhz(0.4)), Frame::squeeze, lay);
  SolverOptions it;
  it.iterative_threshold = 10;
  SteadyStateResult a = steady_state(L), b = steady_state(L, it);
  EXPECT_EQ(b.solver_stats.method, "bicgstab");
  EXPECT_LT((a.rho.matrix() - b.rho.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SteadyState, NullSpaceIsOneDimensional) {
  // Dense SVD oracle on a small cascade: the smallest singular value is
  // separated from the next by more than six orders of magnitude.
  SystemParams prm = SystemParams::table_s1();
  SpaceLayout lay(4, 3);
  Superoperator L = build_cascaded_generator(prm, DriveKind::squeezed(mhz(1.5)), Frame::squeeze, lay);
  Eigen::MatrixXcd dense = Eigen::MatrixXcd(L.matrix()) / L.max_abs_entry();
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(dense);
  const auto& s = svd.singularValues();
  const Eigen::Index n = s.size();
  EXPECT_GT(s[n - 2] / std::max(s[n - 1], 1e-300), 1e6);
  EXPECT_GT(steady_state(L).solver_stats.singular_value_ratio, 1e-12);
}

TEST(Truncation, VacuumPasses) {
  SteadyStateResult r = steady_state(cavity_generator(6, 2.0, 0.0));
  TruncationCheck c = check_truncation(r);
  EXPECT_TRUE(c.pass);
  EXPECT_NEAR(c.tails.cavity, 0.0, 1e-15);
}

TEST(Truncation, ThermalAtTwelveLevelsPasses) {
  SteadyStateResult r = steady_state(cavity_generator(12, 1.0, 0.22));
  TruncationCheck c = check_truncation(r);
  EXPECT_TRUE(c.pass) << c.message;
  // truncated geometric: top level holds x^11 (1 - x) / (1 - x^12), x = n/(1+n)
  const double x = 0.22 / 1.22;
  EXPECT_NEAR(c.tails.cavity, std::pow(x, 11) * (1 - x) / (1 - std::pow(x, 12)), 1e-12);
}

TEST(Truncation, CoherentFourPhotonsAtSixLevelsFails) {
  // H = (drive/2)(a + a^dag), decay kappa: |alpha|^2 = drive^2 / kappa^2 = 4
  SteadyStateResult r = steady_state(cavity_generator(6, 1.0, 0.0, 2.0));
  TruncationCheck c = check_truncation(r);
  EXPECT_FALSE(c.pass);
  EXPECT_GT(c.recommended_cavity_dim, 6);
  EXPECT_NE(c.message.find("N_c"), std::string::npos);
}

TEST(SolveShifted, MatchesDenseSolve) {
  SystemParams prm = SystemParams::table_s1();
  SpaceLayout lay(3, 2);
  Superoperator L = build_cascaded_generator(prm, DriveKind::coherent(mhz(0.2)), Frame::squeeze, lay);
  std::mt19937_64 rng(4);
  DenseVec rhs = vectorize(oracle::random_matrix(lay.total_dim(), rng));
  const cplx shift(0.0, mhz(1.3));
  DenseVec x = solve_shifted(L, shift, rhs);
  Eigen::MatrixXcd A = Eigen::MatrixXcd(L.matrix());
  A.diagonal().array() += shift;
  DenseVec ref = A.partialPivLu().solve(rhs);
  EXPECT_LT((x - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SolveShifted, SingularThrows) {
  Superoperator L = cavity_generator(4, 1.0, 0.1);
  DenseVec rhs = vectorize(DenseMat::Identity(8, 8));
  EXPECT_THROW(solve_shifted(L, 0.0, rhs), SolverError);
}

TEST(SparsityComponents, Labels) {
  SparseMat m(4, 4);
  m.insert(0, 2) = 1.0;
  m.insert(3, 3) = 1.0;
  int n = 0;
  auto lab = sparsity_components(m, &n);
  EXPECT_EQ(n, 3);
  EXPECT_EQ(lab[0], lab[2]);
  EXPECT_NE(lab[0], lab[1]);
  EXPECT_NE(lab[1], lab[3]);
}
