#include "cqed/steady_state.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <mutex>
#include <sstream>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>
#ifdef CQED_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif

#include "cqed/error.hpp"

namespace cqed {

namespace {

using Triplet = Eigen::Triplet<cplx>;

// Sparse LU behind one interface.  UMFPACK with METIS ordering and the
// symmetric strategy is several times faster than the default ordering on
// Liouvillians, whose sparsity pattern is structurally symmetric.
//
// Concurrent UMFPACK factorizations go through the system BLAS, whose
// results then vary in the last bits from run to run.  Factorizations are
// serialized so sweeps stay bit-reproducible for any job count.
class SparseLu {
 public:
  bool compute(const SparseMat& a) {
#ifdef CQED_HAVE_UMFPACK
    static std::mutex factor_mutex;
    std::lock_guard<std::mutex> lock(factor_mutex);
    umf_.umfpackControl()(UMFPACK_ORDERING) = UMFPACK_ORDERING_METIS;
    umf_.umfpackControl()(UMFPACK_STRATEGY) = UMFPACK_STRATEGY_SYMMETRIC;
    umf_.compute(a);
    return umf_.info() == Eigen::Success;
#else
    slu_.compute(a);
    return slu_.info() == Eigen::Success;
#endif
  }

  DenseVec solve(const DenseVec& b) {
#ifdef CQED_HAVE_UMFPACK
    return umf_.solve(b);
#else
    return slu_.solve(b);
#endif
  }

  static const char* name() {
#ifdef CQED_HAVE_UMFPACK
    return "umfpack";
#else
    return "sparse-lu";
#endif
  }

 private:
#ifdef CQED_HAVE_UMFPACK
  Eigen::UmfPackLU<SparseMat> umf_;
#else
  Eigen::SparseLU<SparseMat, Eigen::COLAMDOrdering<int>> slu_;
#endif
};

int find_root(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

double max_abs(const SparseMat& m) {
  double out = 0.0;
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
  return out;
}

// Restriction of m to the index set `keep`; map[i] is the reduced index or -1.
SparseMat restrict_to(const SparseMat& m, const std::vector<int>& map, long n, std::vector<Triplet>* trip_out = nullptr) {
  std::vector<Triplet> trip;
  trip.reserve(static_cast<std::size_t>(m.nonZeros()));
  for (int k = 0; k < m.outerSize(); ++k) {
    const int c = map[k];
    if (c < 0) continue;
    for (SparseMat::InnerIterator it(m, k); it; ++it) {
      const int r = map[it.row()];
      if (r >= 0) trip.emplace_back(r, c, it.value());
    }
  }
  SparseMat out(n, n);
  out.setFromTriplets(trip.begin(), trip.end());
  if (trip_out) *trip_out = std::move(trip);
  return out;
}

// Upper bound on sigma_min(A) / max|A| from inverse iteration with an existing
// factorization; tiny values mean A is numerically singular.
template <typename Solve>
double inverse_iteration_ratio(Solve&& solve, long n, double a_scale, int iterations) {
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> g;
  DenseVec x(n);
  for (long i = 0; i < n; ++i) x[i] = cplx(g(rng), g(rng));
  x.normalize();
  double sigma = std::numeric_limits<double>::infinity();
  for (int it = 0; it < iterations; ++it) {
    DenseVec y = solve(x);
    const double ny = y.norm();
    if (!std::isfinite(ny) || ny == 0.0) return 0.0;
    sigma = std::min(sigma, 1.0 / ny);
    x = y / ny;
  }
  return sigma / a_scale;
}

struct LinearSolveOutcome {
  DenseVec x;
  bool ok = false;
  std::string method;
  int iterations = 0;
  double ratio = 0.0;
};

LinearSolveOutcome solve_linear(const SparseMat& a, const DenseVec& rhs, const SolverOptions& opts, double a_scale,
                                int uniqueness_iterations) {
  LinearSolveOutcome out;
  if (a.rows() <= opts.iterative_threshold) {
    SparseLu lu;
    out.method = SparseLu::name();
    if (!lu.compute(a)) return out;
    out.x = lu.solve(rhs);
    out.ratio = inverse_iteration_ratio([&](const DenseVec& v) { return lu.solve(v); }, a.rows(), a_scale,
                                        uniqueness_iterations);
    out.ok = out.x.allFinite();
    return out;
  }
  Eigen::BiCGSTAB<SparseMat, Eigen::IncompleteLUT<cplx>> it;
  it.preconditioner().setDroptol(1e-6);
  it.preconditioner().setFillfactor(20);
  it.setTolerance(opts.iterative_tol);
  it.setMaxIterations(opts.iterative_max_iterations);
  it.compute(a);
  out.method = "bicgstab";
  if (it.info() != Eigen::Success) return out;
  out.x = it.solve(rhs);
  out.iterations = static_cast<int>(it.iterations());
  out.ok = it.info() == Eigen::Success && out.x.allFinite();
  // No cheap factorization to iterate with; the residual check stands in.
  out.ratio = 1.0;
  return out;
}

std::vector<double> marginal_populations(const DensityMatrix& rho, Subsystem slot) {
  const SpaceLayout& lay = rho.layout();
  std::vector<double> p(static_cast<std::size_t>(lay.dim(slot)), 0.0);
  for (int q = 0; q < lay.qubit_dim(); ++q)
    for (int n = 0; n < lay.cavity_dim(); ++n)
      for (int m = 0; m < lay.jpa_dim(); ++m) {
        const int i = lay.index(q, n, m);
        const int k = slot == Subsystem::qubit ? q : slot == Subsystem::cavity ? n : m;
        p[static_cast<std::size_t>(k)] += rho.matrix()(i, i).real();
      }
  return p;
}

int recommend_dim(const std::vector<double>& p, double threshold) {
  const int n = static_cast<int>(p.size());
  if (n < 2 || p.back() <= threshold) return n;
  // Extrapolate the decay of the last few levels geometrically.
  double ratio = 0.0;
  const int look = std::min(n - 1, 4);
  for (int k = n - look; k < n; ++k) {
    if (p[k - 1] > 0.0) ratio = std::max(ratio, std::max(p[k], 0.0) / p[k - 1]);
  }
  if (!(ratio > 0.0) || ratio >= 1.0) return 2 * n;
  const double extra = std::log(threshold / p.back()) / std::log(ratio);
  return n + static_cast<int>(std::ceil(extra)) + 1;
}

}  // namespace

std::vector<int> sparsity_components(const SparseMat& m, int* n_components) {
  const int n = static_cast<int>(m.rows());
  std::vector<int> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SparseMat::InnerIterator it(m, k); it; ++it) {
      const int a = find_root(parent, static_cast<int>(it.row()));
      const int b = find_root(parent, k);
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  std::vector<int> label(static_cast<std::size_t>(n), -1), root_label(static_cast<std::size_t>(n), -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    const int r = find_root(parent, i);
    if (root_label[r] < 0) root_label[r] = next++;
    label[i] = root_label[r];
  }
  if (n_components) *n_components = next;
  return label;
}

TailReport tail_populations(const DensityMatrix& rho) {
  TailReport t;
  const auto pc = marginal_populations(rho, Subsystem::cavity);
  const auto pj = marginal_populations(rho, Subsystem::jpa);
  t.cavity = rho.layout().cavity_dim() > 1 ? pc.back() : 0.0;
  t.jpa = rho.layout().jpa_dim() > 1 ? pj.back() : 0.0;
  return t;
}

SteadyStateResult steady_state(const Superoperator& L, const SolverOptions& opts) {
  const SparseMat& full = L.matrix();
  const int d = L.layout().total_dim();
  const long n_full = full.rows();
  const double scale = L.max_abs_entry();
  if (scale == 0.0) throw SolverError("ambiguous steady state: generator is identically zero");
  if (L.trace_preservation_error() > 1e-10)
    throw InvalidArgument("steady_state: generator is not trace preserving");

  SolverStats stats;
  stats.full_dim = n_full;

  // Invariant blocks: all diagonal elements rho_ii must share one block, else
  // each block conserves its own trace and the steady state is not unique.
  std::vector<int> map(static_cast<std::size_t>(n_full), -1);
  long n = 0;
  if (opts.reduce_sectors) {
    int ncomp = 0;
    const std::vector<int> label = sparsity_components(full, &ncomp);
    stats.components = ncomp;
    const int target = label[0];
    for (int i = 1; i < d; ++i)
      if (label[static_cast<std::size_t>(i) * (d + 1)] != target)
        throw SolverError("ambiguous steady state: populations split into disconnected blocks");
    for (long k = 0; k < n_full; ++k)
      if (label[k] == target) map[k] = static_cast<int>(n++);
  } else {
    stats.components = 1;
    for (long k = 0; k < n_full; ++k) map[k] = static_cast<int>(n++);
  }
  stats.reduced_dim = n;

  std::vector<Triplet> trip;
  SparseMat reduced = restrict_to(full, map, n, &trip);
  reduced /= cplx(scale);
  for (auto& t : trip) t = Triplet(t.row(), t.col(), t.value() / scale);

  // Row norms of the diagonal-element rows.
  std::vector<double> row_norm2(static_cast<std::size_t>(n), 0.0);
  for (const auto& t : trip) row_norm2[t.row()] += std::norm(t.value());
  long replaced = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    const int r = map[static_cast<std::size_t>(i) * (d + 1)];
    if (row_norm2[r] < best) {
      best = row_norm2[r];
      replaced = r;
    }
  }

  std::vector<Triplet> bordered;
  bordered.reserve(trip.size() + static_cast<std::size_t>(d));
  for (const auto& t : trip)
    if (t.row() != replaced) bordered.push_back(t);
  for (int i = 0; i < d; ++i) bordered.emplace_back(replaced, map[static_cast<std::size_t>(i) * (d + 1)], 1.0);
  SparseMat a(n, n);
  a.setFromTriplets(bordered.begin(), bordered.end());
  a.makeCompressed();
  stats.nonzeros = a.nonZeros();

  DenseVec rhs = DenseVec::Zero(n);
  rhs[replaced] = 1.0;

  LinearSolveOutcome sol = solve_linear(a, rhs, opts, 1.0, 3);
  stats.method = sol.method;
  stats.iterations = sol.iterations;
  stats.singular_value_ratio = sol.ratio;
  for (long k = 0; k < n_full; ++k)
    if (map[k] == replaced) stats.replaced_row = k;

  if (!sol.ok || sol.ratio < opts.uniqueness_floor) {
    std::ostringstream msg;
    msg << "ambiguous steady state: numerical null space has dimension > 1 (sigma ratio " << sol.ratio << ")";
    throw SolverError(msg.str());
  }

  DenseVec x_full = DenseVec::Zero(n_full);
  for (long k = 0; k < n_full; ++k)
    if (map[k] >= 0) x_full[k] = sol.x[map[k]];

  SteadyStateResult result{DensityMatrix(L.layout(), unvectorize(x_full, d)), 0.0, {}, {}, true, stats};
  result.residual = (full * x_full).cwiseAbs().maxCoeff() / scale;
  if (!(result.residual < opts.residual_tol)) {
    std::ostringstream msg;
    msg << "steady-state solve did not converge: residual " << result.residual << " (tolerance "
        << opts.residual_tol << ", method " << sol.method << ")";
    throw SolverError(msg.str());
  }
  result.diagnostics = result.rho.diagnostics();
  result.positive = result.diagnostics.min_eigenvalue >= opts.positivity_floor;
  result.tail_mass = tail_populations(result.rho);
  return result;
}

DenseVec solve_shifted(const Superoperator& L, cplx shift, const DenseVec& rhs, const SolverOptions& opts,
                       SolverStats* stats_out) {
  const SparseMat& full = L.matrix();
  const long n_full = full.rows();
  if (rhs.size() != n_full) throw InvalidArgument("solve_shifted: rhs size mismatch");
  const double scale = std::max(L.max_abs_entry(), std::abs(shift));
  if (scale == 0.0) throw SolverError("solve_shifted: singular (zero) system");

  SolverStats stats;
  stats.full_dim = n_full;
  std::vector<int> map(static_cast<std::size_t>(n_full), -1);
  long n = 0;
  if (opts.reduce_sectors) {
    int ncomp = 0;
    const std::vector<int> label = sparsity_components(full, &ncomp);
    stats.components = ncomp;
    std::vector<char> touched(static_cast<std::size_t>(ncomp), 0);
    for (long k = 0; k < n_full; ++k)
      if (rhs[k] != cplx(0.0)) touched[label[k]] = 1;
    for (long k = 0; k < n_full; ++k)
      if (touched[label[k]]) map[k] = static_cast<int>(n++);
  } else {
    for (long k = 0; k < n_full; ++k) map[k] = static_cast<int>(n++);
  }
  stats.reduced_dim = n;
  if (n == 0) {
    if (stats_out) *stats_out = stats;
    return DenseVec::Zero(n_full);
  }

  SparseMat a = restrict_to(full, map, n);
  SparseMat id(n, n);
  id.setIdentity();
  a += shift * id;
  a /= cplx(scale);
  a.makeCompressed();
  stats.nonzeros = a.nonZeros();

  DenseVec b(n);
  for (long k = 0; k < n_full; ++k)
    if (map[k] >= 0) b[map[k]] = rhs[k] / scale;

  LinearSolveOutcome sol = solve_linear(a, b, opts, max_abs(a), 2);
  stats.method = sol.method;
  stats.iterations = sol.iterations;
  stats.singular_value_ratio = sol.ratio;
  if (stats_out) *stats_out = stats;
  if (!sol.ok || sol.ratio < opts.uniqueness_floor) {
    std::ostringstream msg;
    msg << "shifted system singular at shift " << shift;
    throw SolverError(msg.str());
  }

  DenseVec x = DenseVec::Zero(n_full);
  for (long k = 0; k < n_full; ++k)
    if (map[k] >= 0) x[k] = sol.x[map[k]];
  return x;
}

TruncationCheck check_truncation(const SteadyStateResult& result, double threshold) {
  TruncationCheck c;
  c.threshold = threshold;
  c.tails = result.tail_mass;
  const auto pc = marginal_populations(result.rho, Subsystem::cavity);
  const auto pj = marginal_populations(result.rho, Subsystem::jpa);
  const SpaceLayout& lay = result.rho.layout();
  c.recommended_cavity_dim = lay.cavity_dim() > 1 ? recommend_dim(pc, threshold) : lay.cavity_dim();
  c.recommended_jpa_dim = lay.jpa_dim() > 1 ? recommend_dim(pj, threshold) : lay.jpa_dim();
  const bool cav_ok = c.tails.cavity <= threshold;
  const bool jpa_ok = c.tails.jpa <= threshold;
  c.pass = cav_ok && jpa_ok;
  std::ostringstream msg;
  if (c.pass) {
    msg << "truncation adequate (cavity tail " << c.tails.cavity << ", jpa tail " << c.tails.jpa << ")";
  } else {
    msg << "truncation too small:";
    if (!cav_ok) msg << " cavity tail " << c.tails.cavity << " > " << threshold << ", try N_c = " << c.recommended_cavity_dim;
    if (!jpa_ok) msg << " jpa tail " << c.tails.jpa << " > " << threshold << ", try N_j = " << c.recommended_jpa_dim;
  }
  c.message = msg.str();
  return c;
}

}  // namespace cqed
