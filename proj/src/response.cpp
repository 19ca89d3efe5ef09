#include "cqed/response.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

#include "cqed/error.hpp"
#include "cqed/parallel.hpp"

namespace cqed {

namespace {

std::string mhz_label(const char* name, double omega) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s/2pi = %.6f MHz", name, to_mhz(omega));
  return buf;
}

void require_monotone(const std::vector<double>& grid, const char* what) {
  if (grid.empty()) throw InvalidArgument(std::string(what) + ": empty sweep grid");
  for (double v : grid)
    if (!std::isfinite(v)) throw InvalidArgument(std::string(what) + ": non-finite grid value");
  if (grid.size() < 2) return;
  const bool up = grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (up ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1]))
      throw InvalidArgument(std::string(what) + ": grid is not strictly monotone");
}

double max_magnitude(const std::vector<cplx>& v) {
  double m = 0.0;
  for (const cplx& z : v) m = std::max(m, std::abs(z));
  return m;
}

Operator qubit_excitation(const SpaceLayout& layout) {
  const QubitOps q = qubit_ops();
  SparseMat e = q.raise * q.lower;
  return embed(e, Subsystem::qubit, layout);
}

// Qubit state (2x2) (x) thermal cavity (x) JPA vacuum.
DensityMatrix product_with_thermal(const SpaceLayout& layout, const Eigen::Matrix2cd& qubit, double n_th) {
  const int nc = layout.cavity_dim();
  std::vector<double> pc(static_cast<std::size_t>(nc));
  double norm = 0.0;
  for (int n = 0; n < nc; ++n) {
    pc[n] = std::pow(n_th / (1.0 + n_th), n);
    norm += pc[n];
  }
  DenseMat rho = DenseMat::Zero(layout.total_dim(), layout.total_dim());
  for (int q1 = 0; q1 < 2; ++q1)
    for (int q2 = 0; q2 < 2; ++q2)
      for (int n = 0; n < nc; ++n) rho(layout.index(q1, n, 0), layout.index(q2, n, 0)) = qubit(q1, q2) * pc[n] / norm;
  return DensityMatrix(layout, rho);
}

SystemParams undriven(const SystemParams& p) {
  SystemParams q = p;
  q.Omega_d = q.Omega_p = q.Omega_s = 0.0;
  return q;
}

}  // namespace

std::vector<double> Spectrum::magnitudes() const {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::abs(values[i]);
  return out;
}

std::vector<double> Spectrum::normalized() const {
  std::vector<double> out = magnitudes();
  if (normalization > 0.0)
    for (double& v : out) v /= normalization;
  return out;
}

void Spectrum::validate() const {
  require_monotone(axis, "Spectrum");
  if (values.size() != axis.size()) throw InvalidArgument("Spectrum: axis and values differ in length");
  for (const cplx& z : values)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw InvalidArgument("Spectrum: non-finite value");
}

Spectrum Spectrum2D::probe_cut(std::size_t drive_index) const {
  if (drive_index >= drive_axis.size()) throw InvalidArgument("probe_cut: index out of range");
  Spectrum s;
  s.axis = probe_axis;
  s.meta = meta;
  s.meta.axis = "omega_p";
  s.normalization = normalization;
  for (std::size_t i = 0; i < probe_axis.size(); ++i) {
    s.values.push_back(values[i * drive_axis.size() + drive_index]);
    if (!diagnostics.empty()) s.diagnostics.push_back(diagnostics[i * drive_axis.size() + drive_index]);
  }
  return s;
}

Spectrum Spectrum2D::drive_cut(std::size_t probe_index) const {
  if (probe_index >= probe_axis.size()) throw InvalidArgument("drive_cut: index out of range");
  Spectrum s;
  s.axis = drive_axis;
  s.meta = meta;
  s.meta.axis = "omega_d";
  s.normalization = normalization;
  for (std::size_t j = 0; j < drive_axis.size(); ++j) {
    s.values.push_back(values[probe_index * drive_axis.size() + j]);
    if (!diagnostics.empty()) s.diagnostics.push_back(diagnostics[probe_index * drive_axis.size() + j]);
  }
  return s;
}

const char* to_string(SpectrumObservable o) {
  return o == SpectrumObservable::transmission ? "transmission" : "qubit_excitation";
}

LinearResponse linear_response(const Superoperator& L0, const DensityMatrix& rho0, double delta, double Omega_p,
                               const SolverOptions& opts, bool with_counter_rotating) {
  LinearResponse out{};
  if (!(rho0.layout() == L0.layout())) throw InvalidArgument("linear_response: layout mismatch");
  if (Omega_p == 0.0) return out;
  const SpaceLayout& lay = L0.layout();
  const DenseMat a = embed(annihilation(lay.cavity_dim()), Subsystem::cavity, lay).dense();
  const DenseMat ad = a.adjoint();
  const DenseMat& r0 = rho0.matrix();
  const cplx coeff(0.0, 0.5 * Omega_p);
  const int d = lay.total_dim();

  auto solve = [&](const DenseMat& source, cplx shift) {
    try {
      return unvectorize(solve_shifted(L0, shift, vectorize(coeff * source), opts), d);
    } catch (const SolverError& e) {
      rethrow_with_context(e, "resonance degeneracy in linear response at " + mhz_label("delta", delta));
    }
  };
  const DenseMat rho_plus = solve(ad * r0 - r0 * ad, cplx(0.0, delta));
  out.amplitude = (a * rho_plus).trace();
  if (!with_counter_rotating) return out;
  const DenseMat rho_minus = solve(a * r0 - r0 * a, cplx(0.0, -delta));
  out.counter_rotating = (a * rho_minus).trace();
  const double m = std::abs(out.amplitude);
  out.counter_ratio = m > 0.0 ? std::abs(out.counter_rotating) / m : (std::abs(out.counter_rotating) > 0 ? INFINITY : 0.0);
  return out;
}

cplx linear_response_amplitude(const Superoperator& L0, const DensityMatrix& rho0, double delta, double Omega_p,
                               const SolverOptions& opts) {
  return linear_response(L0, rho0, delta, Omega_p, opts, false).amplitude;
}

Spectrum qubit_spectrum(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                        const std::vector<double>& omega_d_grid, const SweepOptions& opts) {
  require_monotone(omega_d_grid, "qubit_spectrum");
  SystemParams base = p;
  base.omega_d = p.omega_q;
  const Superoperator L_base = build_cascaded_generator(base, kind, Frame::squeeze, layout);
  const Superoperator L_sz = qubit_detuning_generator(layout);
  const double delta = p.omega_p - p.omega_s;
  const Operator excitation = qubit_excitation(layout);

  Spectrum s;
  s.axis = omega_d_grid;
  s.values.assign(omega_d_grid.size(), cplx(0.0));
  s.diagnostics.assign(omega_d_grid.size(), {});
  s.meta.frame = to_string(Frame::squeeze);
  s.meta.axis = "omega_d";
  s.meta.observable = to_string(opts.observable);

  parallel_for(omega_d_grid.size(), opts.jobs, [&](std::size_t i) {
    try {
      const Superoperator L = L_base + (p.omega_q - omega_d_grid[i]) * L_sz;
      const SteadyStateResult ss = steady_state(L, opts.solver);
      PointDiagnostics& diag = s.diagnostics[i];
      diag.residual = ss.residual;
      diag.tails = ss.tail_mass;
      diag.min_eigenvalue = ss.diagnostics.min_eigenvalue;
      if (opts.observable == SpectrumObservable::transmission) {
        const LinearResponse lr = linear_response(L, ss.rho, delta, p.Omega_p, opts.solver,
                                                  opts.counter_rotating_limit >= 0.0);
        diag.counter_rotating_ratio = lr.counter_ratio;
        if (opts.counter_rotating_limit >= 0.0 && lr.counter_ratio > opts.counter_rotating_limit)
          throw SolverError("counter-rotating sideband " + std::to_string(lr.counter_ratio) +
                            " exceeds the configured limit");
        s.values[i] = lr.amplitude;
      } else {
        s.values[i] = ss.rho.expectation(excitation).real();
      }
    } catch (const Error& e) {
      rethrow_with_context(e, mhz_label("omega_d", omega_d_grid[i]));
    }
  });
  const double m = max_magnitude(s.values);
  s.normalization = m > 0.0 ? m : 1.0;
  return s;
}

cplx probe_transmission(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                        const SolverOptions& opts, PointDiagnostics* diag) {
  if (kind.needs_jpa())
    throw InvalidArgument(std::string("probe frame cannot represent a ") + to_string(kind.tag()) + " drive");
  const Superoperator L = build_cascaded_generator(p, kind, Frame::probe, layout, true);
  const SteadyStateResult ss = steady_state(L, opts);
  if (diag) {
    diag->residual = ss.residual;
    diag->tails = ss.tail_mass;
    diag->min_eigenvalue = ss.diagnostics.min_eigenvalue;
  }
  return ss.rho.expectation(embed(annihilation(layout.cavity_dim()), Subsystem::cavity, layout));
}

Spectrum2D probe_sweep_transmission(const SystemParams& p, const DriveKind& kind, const SpaceLayout& layout,
                                    const std::vector<double>& omega_p_grid,
                                    const std::vector<double>& omega_d_grid, const SweepOptions& opts) {
  if (kind.needs_jpa())
    throw InvalidArgument(std::string("probe_sweep_transmission: frame incompatible with a ") + to_string(kind.tag()) +
                          " drive");
  require_monotone(omega_p_grid, "probe_sweep_transmission");
  require_monotone(omega_d_grid, "probe_sweep_transmission");
  Spectrum2D out;
  out.probe_axis = omega_p_grid;
  out.drive_axis = omega_d_grid;
  const std::size_t nd = omega_d_grid.size();
  const std::size_t total = omega_p_grid.size() * nd;
  out.values.assign(total, cplx(0.0));
  out.diagnostics.assign(total, {});
  out.meta.frame = to_string(Frame::probe);
  out.meta.axis = "omega_p,omega_d";
  out.meta.observable = "transmission";

  parallel_for(total, opts.jobs, [&](std::size_t k) {
    SystemParams q = p;
    q.omega_p = omega_p_grid[k / nd];
    q.omega_d = omega_d_grid[k % nd];
    try {
      out.values[k] = probe_transmission(q, kind, layout, opts.solver, &out.diagnostics[k]);
    } catch (const Error& e) {
      rethrow_with_context(e, mhz_label("omega_p", q.omega_p) + ", " + mhz_label("omega_d", q.omega_d));
    }
  });
  const double m = max_magnitude(out.values);
  out.normalization = m > 0.0 ? m : 1.0;
  return out;
}

TimeTrace time_evolve(const Superoperator& L, const DensityMatrix& rho0, const std::vector<double>& t_grid,
                      const Operator& observable, const TimeEvolveOptions& opts) {
  if (t_grid.empty()) throw InvalidArgument("time_evolve: empty time grid");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("time_evolve: time grid must be strictly increasing");
  if (!(rho0.layout() == L.layout()) || !(observable.layout() == L.layout()))
    throw InvalidArgument("time_evolve: layout mismatch");

  const int d = L.layout().total_dim();
  const long n_full = static_cast<long>(d) * d;
  const DenseVec v0 = vectorize(rho0.matrix());

  // Evolve only the invariant blocks that rho0 populates.
  int ncomp = 0;
  const std::vector<int> label = sparsity_components(L.matrix(), &ncomp);
  std::vector<char> touched(static_cast<std::size_t>(ncomp), 0);
  for (long k = 0; k < n_full; ++k)
    if (v0[k] != cplx(0.0)) touched[label[k]] = 1;
  std::vector<long> keep;
  std::vector<int> map(static_cast<std::size_t>(n_full), -1);
  for (long k = 0; k < n_full; ++k)
    if (touched[label[k]]) {
      map[k] = static_cast<int>(keep.size());
      keep.push_back(k);
    }
  const long n = static_cast<long>(keep.size());

  std::vector<Eigen::Triplet<cplx>> trip;
  for (int c = 0; c < L.matrix().outerSize(); ++c) {
    if (map[c] < 0) continue;
    for (SparseMat::InnerIterator it(L.matrix(), c); it; ++it)
      if (map[it.row()] >= 0) trip.emplace_back(map[it.row()], map[c], it.value());
  }
  SparseMat Lr(n, n);
  Lr.setFromTriplets(trip.begin(), trip.end());

  // tr(O rho) = sum_ij O(j, i) rho(i, j)
  const DenseMat O = observable.dense();
  DenseVec w(n), x(n);
  for (long r = 0; r < n; ++r) {
    const long k = keep[r];
    w[r] = O(k / d, k % d);
    x[r] = v0[k];
  }

  TimeTrace trace;
  trace.times = t_grid;
  trace.values.reserve(t_grid.size());
  auto record = [&](const DenseVec& state) { trace.values.push_back((w.transpose() * state)(0).real()); };

  if (n <= opts.dense_threshold) {
    const DenseMat Ld(Lr);
    std::map<double, DenseMat> propagators;
    record(x);
    for (std::size_t i = 1; i < t_grid.size(); ++i) {
      const double dt = t_grid[i] - t_grid[i - 1];
      auto it = propagators.find(dt);
      if (it == propagators.end()) it = propagators.emplace(dt, DenseMat((Ld * cplx(dt)).exp())).first;
      x = it->second * x;
      if (!x.allFinite()) throw SolverError("time_evolve: propagation diverged at t = " + std::to_string(t_grid[i]));
      record(x);
    }
    return trace;
  }

  namespace ode = boost::numeric::odeint;
  using State = std::vector<cplx>;
  State state(x.data(), x.data() + n);
  auto rhs = [&Lr, n](const State& s, State& ds, double) {
    Eigen::Map<const DenseVec> sv(s.data(), n);
    Eigen::Map<DenseVec> dv(ds.data(), n);
    dv.noalias() = Lr * sv;
  };
  double reached = t_grid.front();
  auto observe = [&](const State& s, double t) {
    reached = t;
    record(Eigen::Map<const DenseVec>(s.data(), n));
  };
  const double first_dt = t_grid.size() > 1 ? (t_grid[1] - t_grid[0]) * 1e-3 : 1e-12;
  try {
    ode::integrate_times(ode::make_dense_output(opts.atol, opts.rtol, ode::runge_kutta_dopri5<State>()), rhs, state,
                         t_grid.begin(), t_grid.end(), first_dt, observe,
                         ode::max_step_checker(static_cast<int>(std::min<long>(opts.max_steps, 1L << 30))));
  } catch (const std::runtime_error& e) {
    throw SolverError(std::string("time integration failed after t = ") + std::to_string(reached) + " s: " + e.what());
  }
  if (trace.values.size() != t_grid.size())
    throw SolverError("time integration stopped early at t = " + std::to_string(reached) + " s");
  return trace;
}

TimeTrace relaxation_trace(const SystemParams& p, const SpaceLayout& layout, const std::vector<double>& t_grid,
                           const TimeEvolveOptions& opts) {
  const SystemParams q = undriven(p);
  const Superoperator L = build_cascaded_generator(q, DriveKind::off(), Frame::squeeze, layout);
  Eigen::Matrix2cd qubit = Eigen::Matrix2cd::Zero();
  qubit(1, 1) = 1.0;
  TimeTrace t = time_evolve(L, product_with_thermal(layout, qubit, q.n_th), t_grid, qubit_excitation(layout), opts);
  t.observable = "qubit_excitation";
  return t;
}

TimeTrace ramsey_trace(const SystemParams& p, const SpaceLayout& layout, const std::vector<double>& t_grid,
                       const TimeEvolveOptions& opts) {
  const SystemParams q = undriven(p);
  const Superoperator L = build_cascaded_generator(q, DriveKind::off(), Frame::squeeze, layout);
  Eigen::Matrix2cd plus = Eigen::Matrix2cd::Constant(0.5);
  const QubitOps ops = qubit_ops();
  SparseMat proj = 0.5 * (sparse_identity(2) + SparseMat(ops.lower + ops.raise));
  TimeTrace t = time_evolve(L, product_with_thermal(layout, plus, q.n_th), t_grid,
                            embed(proj, Subsystem::qubit, layout), opts);
  t.observable = "ramsey_excitation";
  return t;
}

std::vector<double> linspace(double start, double stop, int n) {
  if (n < 1) throw InvalidArgument("linspace: need at least one point");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = start;
    return out;
  }
  for (int i = 0; i < n; ++i) out[i] = start + (stop - start) * i / (n - 1);
  out.back() = stop;
  return out;
}

}  // namespace cqed
