#include "cqed/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <random>

#include <boost/math/tools/minima.hpp>
#include <unsupported/Eigen/FFT>
#include <unsupported/Eigen/NonLinearOptimization>

#include "cqed/error.hpp"

namespace cqed {

namespace {

using Vec = std::vector<double>;

// ---------------------------------------------------------------------------
// Levenberg-Marquardt polish with an analytic Jacobian.

struct LsqFunctor {
  using Scalar = double;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;

  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)> residual;
  std::function<void(const Eigen::VectorXd&, Eigen::MatrixXd&)> jacobian;
  int n = 0, m = 0;

  int inputs() const { return n; }
  int values() const { return m; }
  int operator()(const Eigen::VectorXd& x, Eigen::VectorXd& f) const {
    residual(x, f);
    return 0;
  }
  int df(const Eigen::VectorXd& x, Eigen::MatrixXd& j) const {
    jacobian(x, j);
    return 0;
  }
};

double sum_squares(const LsqFunctor& fn, const Eigen::VectorXd& x) {
  Eigen::VectorXd f(fn.m);
  fn(x, f);
  return f.allFinite() ? f.squaredNorm() : INFINITY;
}

// Returns the polished point if it improves the sum of squares.
Eigen::VectorXd polish(const LsqFunctor& fn, const Eigen::VectorXd& x0, int max_evals = 4000) {
  LsqFunctor copy = fn;
  Eigen::LevenbergMarquardt<LsqFunctor> lm(copy);
  lm.parameters.maxfev = max_evals;
  lm.parameters.xtol = 1e-15;
  lm.parameters.ftol = 1e-15;
  Eigen::VectorXd x = x0;
  lm.minimize(x);
  return sum_squares(fn, x) < sum_squares(fn, x0) ? x : x0;
}

// ---------------------------------------------------------------------------

struct Interp {
  Vec x, y;  // x increasing

  double operator()(double v) const {
    if (v <= x.front()) return y.front();
    if (v >= x.back()) return y.back();
    const auto it = std::upper_bound(x.begin(), x.end(), v);
    const std::size_t i = static_cast<std::size_t>(it - x.begin());
    const double t = (v - x[i - 1]) / (x[i] - x[i - 1]);
    return y[i - 1] + t * (y[i] - y[i - 1]);
  }
};

Vec local_normalized(const Spectrum& s) {
  Vec m = s.magnitudes();
  const double mx = m.empty() ? 0.0 : *std::max_element(m.begin(), m.end());
  if (mx > 0.0)
    for (double& v : m) v /= mx;
  return m;
}

Interp sorted_interp(const Vec& axis, const Vec& values) {
  std::vector<std::size_t> order(axis.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return axis[a] < axis[b]; });
  Interp in;
  for (std::size_t i : order) {
    in.x.push_back(axis[i]);
    in.y.push_back(values[i]);
  }
  return in;
}

bool is_drive_param(const std::string& name) { return name == "n_th" || name == "Omega_s"; }

void apply_parameter(const std::string& name, double v, SystemParams& p, double& drive) {
  if (is_drive_param(name)) drive = v;
  else if (name == "kappa_e") p.kappa_e = v;
  else if (name == "Omega_d") p.Omega_d = v;
  else if (name == "Omega_p") p.Omega_p = v;
  else if (name == "p_th") p.p_th = v;
  else if (name == "n_th_cavity") p.n_th = v;
  else throw InvalidArgument("fit: unknown parameter '" + name + "'");
}

DriveKind make_drive(DriveKind::Tag tag, double value) {
  switch (tag) {
    case DriveKind::Tag::thermal: return DriveKind::thermal(value);
    case DriveKind::Tag::coherent: return DriveKind::coherent(value);
    case DriveKind::Tag::squeezed: return DriveKind::squeezed(value);
    case DriveKind::Tag::off: break;
  }
  return DriveKind::off();
}

void validate_problem(const FitProblem& pr) {
  if (pr.free.empty()) throw InvalidArgument("fit: at least one free parameter is required");
  if (pr.family == DriveKind::Tag::off) throw InvalidArgument("fit: model family must be thermal, coherent or squeezed");
  pr.observed.validate();
  if (pr.observed.axis.size() < 2) throw InvalidArgument("fit: observed spectrum needs at least two points");
  for (const FreeParameter& f : pr.free) {
    if (!std::isfinite(f.bounds.lo) || !std::isfinite(f.bounds.hi) || !(f.bounds.lo < f.bounds.hi))
      throw InvalidArgument("fit: parameter '" + f.name + "' needs finite bounds with lo < hi");
    if (!(f.initial >= f.bounds.lo && f.initial <= f.bounds.hi))
      throw InvalidArgument("fit: initial value of '" + f.name + "' lies outside its bounds");
    if (f.name == "n_th" && pr.family != DriveKind::Tag::thermal)
      throw InvalidArgument("fit: 'n_th' is the thermal-family drive parameter");
    if (f.name == "Omega_s" && pr.family == DriveKind::Tag::thermal)
      throw InvalidArgument("fit: 'Omega_s' needs a coherent or squeezed family");
    SystemParams p;
    double d = 0.0;
    apply_parameter(f.name, f.initial, p, d);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Nelder-Mead

MinimizeResult minimize_bounded(const std::function<double(const Vec&)>& f, Vec x0, const std::vector<Bounds>& bounds,
                                const NelderMeadOptions& opts) {
  const std::size_t n = x0.size();
  if (n == 0 || bounds.size() != n) throw InvalidArgument("minimize_bounded: dimension mismatch");
  for (const Bounds& b : bounds)
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi))
      throw InvalidArgument("minimize_bounded: bounds must be finite with lo < hi");

  MinimizeResult res;
  // unit-box coordinates
  auto to_x = [&](const Vec& u) {
    Vec x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = bounds[i].lo + std::clamp(u[i], 0.0, 1.0) * (bounds[i].hi - bounds[i].lo);
    return x;
  };
  auto eval = [&](Vec& u) {
    for (double& v : u) v = std::clamp(v, 0.0, 1.0);
    ++res.evaluations;
    const double v = f(to_x(u));
    return std::isfinite(v) ? v : INFINITY;
  };

  Vec best(n);
  for (std::size_t i = 0; i < n; ++i) best[i] = (std::clamp(x0[i], bounds[i].lo, bounds[i].hi) - bounds[i].lo) / (bounds[i].hi - bounds[i].lo);
  double best_value = eval(best);
  std::mt19937_64 rng(opts.seed);
  std::uniform_real_distribution<double> unif(0.5, 1.5);
  bool last_run_tolerance = false;

  for (int restart = 0; restart <= opts.restarts; ++restart) {
    std::vector<Vec> simplex(n + 1, best);
    Vec values(n + 1, best_value);
    for (std::size_t i = 0; i < n; ++i) {
      double step = opts.initial_step;
      if (restart > 0) step *= unif(rng) * ((rng() & 1) ? 1.0 : -1.0);
      Vec& v = simplex[i + 1];
      v[i] += step;
      if (v[i] > 1.0 || v[i] < 0.0) v[i] = best[i] - step;
      values[i + 1] = eval(v);
    }
    const double start_value = best_value;
    last_run_tolerance = false;
    std::vector<std::size_t> order(n + 1);
    for (int it = 0; it < opts.max_iterations; ++it) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t lo = order.front(), hi = order.back(), second = order[n - 1];
      double size = 0.0;
      for (std::size_t k = 0; k <= n; ++k)
        for (std::size_t i = 0; i < n; ++i) size = std::max(size, std::abs(simplex[k][i] - simplex[lo][i]));
      if (values[hi] - values[lo] <= opts.ftol && size <= opts.xtol) {
        last_run_tolerance = true;
        break;
      }
      Vec centroid(n, 0.0);
      for (std::size_t k = 0; k <= n; ++k)
        if (k != hi)
          for (std::size_t i = 0; i < n; ++i) centroid[i] += simplex[k][i] / static_cast<double>(n);
      auto along = [&](double t) {
        Vec p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = centroid[i] + t * (simplex[hi][i] - centroid[i]);
        return p;
      };
      Vec xr = along(-1.0);
      const double fr = eval(xr);
      if (fr < values[lo]) {
        Vec xe = along(-2.0);
        const double fe = eval(xe);
        if (fe < fr) simplex[hi] = xe, values[hi] = fe;
        else simplex[hi] = xr, values[hi] = fr;
      } else if (fr < values[second]) {
        simplex[hi] = xr, values[hi] = fr;
      } else {
        const bool outside = fr < values[hi];
        Vec xc = along(outside ? -0.5 : 0.5);
        const double fc = eval(xc);
        if (fc < (outside ? fr : values[hi])) {
          simplex[hi] = xc, values[hi] = fc;
        } else {
          for (std::size_t k = 0; k <= n; ++k) {
            if (k == lo) continue;
            for (std::size_t i = 0; i < n; ++i) simplex[k][i] = simplex[lo][i] + 0.5 * (simplex[k][i] - simplex[lo][i]);
            values[k] = eval(simplex[k]);
          }
        }
      }
      const std::size_t arg = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
      if (values[arg] < best_value) {
        best_value = values[arg];
        best = simplex[arg];
      }
      res.log.push_back({restart, it, best_value});
    }
    if (restart > 0 && start_value - best_value <= std::max(opts.ftol, 1e-12 * std::abs(start_value))) {
      res.converged = true;
      break;
    }
  }
  if (opts.restarts == 0) res.converged = last_run_tolerance;
  res.x = to_x(best);
  res.value = best_value;
  return res;
}

// ---------------------------------------------------------------------------
// Spectrum fits

double spectrum_mismatch(const Spectrum& observed, const Spectrum& model) {
  if (observed.axis.size() != observed.values.size() || model.axis.size() != model.values.size() ||
      observed.axis.size() < 2 || model.axis.size() < 2)
    throw InvalidArgument("spectrum_mismatch: spectra need at least two points and matching lengths");
  const auto [olo, ohi] = std::minmax_element(observed.axis.begin(), observed.axis.end());
  const auto [mlo, mhi] = std::minmax_element(model.axis.begin(), model.axis.end());
  const double span = *ohi - *olo;
  if (std::abs(*olo - *mlo) > 0.1 * span || std::abs(*ohi - *mhi) > 0.1 * span)
    throw InvalidArgument("spectrum_mismatch: model and observed grids differ by more than 10% of the span");
  const Interp model_at = sorted_interp(model.axis, local_normalized(model));
  const Vec obs = local_normalized(observed);
  double sse = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double d = obs[i] - model_at(observed.axis[i]);
    sse += d * d;
  }
  return sse;
}

Spectrum fit_model_spectrum(const FitProblem& pr, const Vec& x) {
  if (x.size() != pr.free.size()) throw InvalidArgument("fit_model_spectrum: parameter count mismatch");
  SystemParams p = pr.baseline;
  double drive = pr.drive_value;
  for (std::size_t i = 0; i < x.size(); ++i) apply_parameter(pr.free[i].name, x[i], p, drive);
  p.validate();
  const Vec& grid = pr.model_grid.empty() ? pr.observed.axis : pr.model_grid;
  return qubit_spectrum(p, make_drive(pr.family, drive), pr.layout, grid, pr.sweep);
}

FitReport fit_spectrum(const FitProblem& pr) {
  validate_problem(pr);
  const std::size_t k = pr.free.size();
  std::map<Vec, double> cache;
  auto objective = [&](const Vec& x) {
    auto it = cache.find(x);
    if (it != cache.end()) return it->second;
    const double v = spectrum_mismatch(pr.observed, fit_model_spectrum(pr, x));
    cache.emplace(x, v);
    return v;
  };
  Vec x0(k);
  std::vector<Bounds> bounds(k);
  for (std::size_t i = 0; i < k; ++i) {
    x0[i] = pr.free[i].initial;
    bounds[i] = pr.free[i].bounds;
  }
  FitReport rep;
  rep.minimizer = minimize_bounded(objective, x0, bounds, pr.optimizer);
  rep.residual = rep.minimizer.value;
  rep.points = static_cast<int>(pr.observed.axis.size());
  if (!rep.minimizer.converged) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "fit: no convergence after %d restarts (residual %.6g)", pr.optimizer.restarts,
                  rep.residual);
    throw SolverError(buf);
  }

  const Vec& xb = rep.minimizer.x;
  for (std::size_t i = 0; i < k; ++i) {
    FittedParameter fp;
    fp.name = pr.free[i].name;
    fp.value = xb[i];
    const double span = bounds[i].hi - bounds[i].lo;
    fp.at_bound = xb[i] - bounds[i].lo < 1e-6 * span || bounds[i].hi - xb[i] < 1e-6 * span;
    rep.bound_saturated = rep.bound_saturated || fp.at_bound;
    rep.params.push_back(fp);
  }

  // Finite-difference curvature; cov = 2 s^2 H^{-1}, s^2 = SSE / (m - k).
  const int dof = rep.points - static_cast<int>(k);
  if (dof > 0) {
    Vec h(k);
    for (std::size_t i = 0; i < k; ++i) h[i] = 1e-3 * (bounds[i].hi - bounds[i].lo);
    auto shifted = [&](std::size_t i, double di, std::size_t j, double dj) {
      Vec x = xb;
      x[i] += di;
      x[j] += dj;
      return objective(x);
    };
    Eigen::MatrixXd H(k, k);
    const double f0 = rep.residual;
    bool inside = true;
    for (std::size_t i = 0; i < k; ++i) inside = inside && !rep.params[i].at_bound &&
                                                 xb[i] - h[i] >= bounds[i].lo && xb[i] + h[i] <= bounds[i].hi;
    if (inside) {
      for (std::size_t i = 0; i < k; ++i) {
        H(i, i) = (shifted(i, h[i], i, 0.0) - 2 * f0 + shifted(i, -h[i], i, 0.0)) / (h[i] * h[i]);
        for (std::size_t j = 0; j < i; ++j) {
          H(i, j) = H(j, i) = (shifted(i, h[i], j, h[j]) - shifted(i, h[i], j, -h[j]) - shifted(i, -h[i], j, h[j]) +
                               shifted(i, -h[i], j, -h[j])) /
                              (4 * h[i] * h[j]);
        }
      }
      Eigen::LLT<Eigen::MatrixXd> llt(H);
      if (llt.info() == Eigen::Success) {
        const Eigen::MatrixXd cov = (2.0 * f0 / dof) * llt.solve(Eigen::MatrixXd::Identity(k, k));
        rep.covariance.assign(k, Vec(k));
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) rep.covariance[i][j] = cov(i, j);
          rep.params[i].stderr_estimate = std::sqrt(std::max(cov(i, i), 0.0));
        }
        rep.covariance_valid = true;
      }
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Lorentzians

double lorentzian(double x, const LorentzianPeak& p) {
  const double d = x - p.center;
  return p.area * p.half_width / (std::numbers::pi * (d * d + p.half_width * p.half_width));
}

MultiLorentzianFit multi_lorentzian_fit(const Spectrum& s, int n_peaks, const std::vector<LorentzianPeak>& init,
                                        const MultiLorentzianOptions& opts) {
  if (n_peaks < 1) throw InvalidArgument("multi_lorentzian_fit: n_peaks must be at least 1");
  if (static_cast<int>(init.size()) != n_peaks)
    throw InvalidArgument("multi_lorentzian_fit: need one initial guess per peak");
  s.validate();
  const std::size_t m = s.axis.size();
  if (m < static_cast<std::size_t>(3 * n_peaks + 1)) throw InvalidArgument("multi_lorentzian_fit: too few points");
  const auto [amin, amax] = std::minmax_element(s.axis.begin(), s.axis.end());
  const double x0 = 0.5 * (*amin + *amax), L = *amax - *amin;
  for (const LorentzianPeak& g : init) {
    if (g.center < *amin || g.center > *amax)
      throw InvalidArgument("multi_lorentzian_fit: initial center outside the axis range");
    if (!(g.half_width > 0.0)) throw InvalidArgument("multi_lorentzian_fit: initial half-width must be positive");
  }

  // Scaled problem: u = (x - x0) / L, data divided by its maximum.
  const Vec mag = s.magnitudes();
  const double ymax = std::max(*std::max_element(mag.begin(), mag.end()), 1e-300);
  Vec u(m), y(m);
  for (std::size_t i = 0; i < m; ++i) {
    u[i] = (s.axis[i] - x0) / L;
    y[i] = mag[i] / ymax;
  }
  const int np = 3 * n_peaks + (opts.fit_offset ? 1 : 0);
  const Interp data = sorted_interp(u, y);

  // parameters: (center, half-width, area) per peak, then offset
  auto model = [&](const Eigen::VectorXd& p, double ui) {
    double v = opts.fit_offset ? p[np - 1] : 0.0;
    for (int k = 0; k < n_peaks; ++k) {
      const double c = p[3 * k], w = p[3 * k + 1], a = p[3 * k + 2], d = ui - c;
      v += a * w / (std::numbers::pi * (d * d + w * w));
    }
    return v;
  };
  LsqFunctor fn;
  fn.n = np;
  fn.m = static_cast<int>(m);
  fn.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& f) {
    for (std::size_t i = 0; i < m; ++i) f[i] = model(p, u[i]) - y[i];
  };
  fn.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < m; ++i) {
      for (int k = 0; k < n_peaks; ++k) {
        const double c = p[3 * k], w = p[3 * k + 1], a = p[3 * k + 2], d = u[i] - c;
        const double q = d * d + w * w;
        J(i, 3 * k) = a * w * 2 * d / (std::numbers::pi * q * q);
        J(i, 3 * k + 1) = a * (q - 2 * w * w) / (std::numbers::pi * q * q);
        J(i, 3 * k + 2) = w / (std::numbers::pi * q);
      }
      if (opts.fit_offset) J(i, np - 1) = 1.0;
    }
  };

  Eigen::VectorXd p0(np);
  const double base = opts.fit_offset ? *std::min_element(y.begin(), y.end()) : 0.0;
  for (int k = 0; k < n_peaks; ++k) {
    const double c = (init[k].center - x0) / L, w = init[k].half_width / L;
    p0[3 * k] = c;
    p0[3 * k + 1] = w;
    p0[3 * k + 2] = init[k].area > 0.0 ? init[k].area / (ymax * L) : std::max(data(c) - base, 0.0) * std::numbers::pi * w;
  }
  if (opts.fit_offset) p0[np - 1] = base;

  // Bounded simplex stage, then Levenberg-Marquardt.
  std::vector<Bounds> bounds(static_cast<std::size_t>(np));
  Vec start(static_cast<std::size_t>(np));
  // Each centre stays between the midpoints to its neighbours' guesses.
  std::vector<int> order(static_cast<std::size_t>(n_peaks));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return p0[3 * a] < p0[3 * b]; });
  for (int j = 0; j < n_peaks; ++j) {
    const int k = order[j];
    const double lo = j > 0 ? 0.5 * (p0[3 * order[j - 1]] + p0[3 * k]) : -0.5;
    const double hi = j + 1 < n_peaks ? 0.5 * (p0[3 * k] + p0[3 * order[j + 1]]) : 0.5;
    bounds[3 * k] = {lo, hi};
  }
  for (int k = 0; k < n_peaks; ++k) {
    bounds[3 * k + 1] = {1e-5, 0.5};
    bounds[3 * k + 2] = {0.0, std::max(4.0 * p0[3 * k + 2], 2.0)};
  }
  if (opts.fit_offset) bounds[np - 1] = {-1.0, 1.0};
  for (int i = 0; i < np; ++i) start[i] = std::clamp(p0[i], bounds[i].lo, bounds[i].hi);
  auto sse = [&](const Vec& v) { return sum_squares(fn, Eigen::Map<const Eigen::VectorXd>(v.data(), np)); };
  MinimizeResult nm = minimize_bounded(sse, start, bounds, opts.optimizer);
  // Levenberg-Marquardt inside the box through p = mid + half sin(t).
  auto to_box = [&](const Eigen::VectorXd& t) {
    Eigen::VectorXd x(np);
    for (int i = 0; i < np; ++i)
      x[i] = 0.5 * (bounds[i].lo + bounds[i].hi) + 0.5 * (bounds[i].hi - bounds[i].lo) * std::sin(t[i]);
    return x;
  };
  auto from_box = [&](const Vec& x) {
    Eigen::VectorXd t(np);
    for (int i = 0; i < np; ++i) {
      const double half = 0.5 * (bounds[i].hi - bounds[i].lo);
      t[i] = std::asin(std::clamp((x[i] - 0.5 * (bounds[i].lo + bounds[i].hi)) / half, -1.0, 1.0));
    }
    return t;
  };
  LsqFunctor boxed;
  boxed.n = np;
  boxed.m = fn.m;
  boxed.residual = [&](const Eigen::VectorXd& t, Eigen::VectorXd& f) { fn.residual(to_box(t), f); };
  boxed.jacobian = [&](const Eigen::VectorXd& t, Eigen::MatrixXd& J) {
    fn.jacobian(to_box(t), J);
    for (int i = 0; i < np; ++i) J.col(i) *= 0.5 * (bounds[i].hi - bounds[i].lo) * std::cos(t[i]);
  };
  Eigen::VectorXd p = to_box(polish(boxed, from_box(nm.x)));
  // Straight from the guesses as well; keep whichever fits better.
  const Eigen::VectorXd direct = to_box(polish(boxed, from_box(start)));
  if (sum_squares(fn, direct) < sum_squares(fn, p)) p = direct;

  MultiLorentzianFit out;
  out.log = std::move(nm.log);
  for (int k = 0; k < n_peaks; ++k) {
    LorentzianPeak pk;
    pk.center = x0 + p[3 * k] * L;
    pk.half_width = std::abs(p[3 * k + 1]) * L;
    pk.area = p[3 * k + 2] * ymax * L;
    out.peaks.push_back(pk);
  }
  out.offset = opts.fit_offset ? p[np - 1] * ymax : 0.0;
  out.residual = sum_squares(fn, p) * ymax * ymax;
  std::sort(out.peaks.begin(), out.peaks.end(),
            [](const LorentzianPeak& a, const LorentzianPeak& b) { return a.center < b.center; });
  for (std::size_t k = 0; k + 1 < out.peaks.size(); ++k) {
    LorentzianPeak &a = out.peaks[k], &b = out.peaks[k + 1];
    if (b.center - a.center < 0.25 * std::min(a.half_width, b.half_width)) a.degenerate = b.degenerate = true;
  }
  return out;
}

std::vector<PeakIndex> index_peaks(const std::vector<LorentzianPeak>& peaks, double omega_q, double chi) {
  if (!(chi > 0.0)) throw InvalidArgument("index_peaks: chi must be positive");
  std::vector<PeakIndex> out;
  for (const LorentzianPeak& p : peaks) {
    PeakIndex ix;
    const long n = std::lround((omega_q - p.center) / (2 * chi));
    ix.offset = p.center - (omega_q - 2 * chi * static_cast<double>(n));
    if (n >= 0 && std::abs(ix.offset) <= 0.5 * chi) ix.photon_number = static_cast<int>(n);
    out.push_back(ix);
  }
  return out;
}

double apparent_photon_number(const std::vector<LorentzianPeak>& peaks, double omega_q, double chi) {
  if (peaks.empty()) throw InvalidArgument("apparent_photon_number: no peaks");
  const auto idx = index_peaks(peaks, omega_q, chi);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < peaks.size(); ++i) {
    if (idx[i].photon_number < 0) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "apparent_photon_number: peak at %.6f MHz from omega_q is not on the ladder",
                    to_mhz(peaks[i].center - omega_q));
      throw InvalidArgument(buf);
    }
    num += idx[i].photon_number * peaks[i].area;
    den += peaks[i].area;
  }
  if (!(den > 0.0)) throw InvalidArgument("apparent_photon_number: total peak area is not positive");
  return num / den;
}

std::vector<LorentzianPeak> ladder_guesses(double omega_q, double chi, int n_peaks, double hw) {
  std::vector<LorentzianPeak> g;
  for (int n = 0; n < n_peaks; ++n) g.push_back({omega_q - 2 * chi * n, hw, 0.0, false});
  return g;
}

// ---------------------------------------------------------------------------
// Time traces

namespace {

void require_trace(const Vec& t, const Vec& y, std::size_t min_points, const char* what) {
  if (t.size() != y.size() || t.size() < min_points)
    throw InvalidArgument(std::string(what) + ": need at least " + std::to_string(min_points) + " matching samples");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw InvalidArgument(std::string(what) + ": times must increase");
}

}  // namespace

ExponentialFit fit_exponential(const Vec& t, const Vec& y) {
  require_trace(t, y, 4, "fit_exponential");
  const std::size_t m = t.size();
  const double T = t.back() - t.front();
  // s = (t - t0) / T; parameters (amplitude, rate * T, offset)
  LsqFunctor fn;
  fn.n = 3;
  fn.m = static_cast<int>(m);
  fn.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& f) {
    for (std::size_t i = 0; i < m; ++i) f[i] = p[0] * std::exp(-p[1] * (t[i] - t[0]) / T) + p[2] - y[i];
  };
  fn.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = (t[i] - t[0]) / T, e = std::exp(-p[1] * s);
      J(i, 0) = e;
      J(i, 1) = -p[0] * s * e;
      J(i, 2) = 1.0;
    }
  };
  Eigen::VectorXd p(3);
  p[2] = y.back();
  p[0] = y.front() - y.back();
  // time at which the trace crosses 1/e of its initial excursion
  double rate = 3.0;
  for (std::size_t i = 1; i < m; ++i)
    if (std::abs(y[i] - p[2]) < std::abs(p[0]) / std::numbers::e) {
      rate = T / std::max(t[i] - t[0], 1e-300);
      break;
    }
  p[1] = rate;
  p = polish(fn, p);
  ExponentialFit out;
  out.amplitude = p[0];
  out.tau = T / p[1];
  out.offset = p[2];
  out.residual = sum_squares(fn, p);
  return out;
}

DominantFrequency dominant_frequency(const Vec& t, const Vec& y) {
  require_trace(t, y, 4, "dominant_frequency");
  const std::size_t m = t.size();
  const double dt = (t.back() - t.front()) / static_cast<double>(m - 1);
  for (std::size_t i = 1; i < m; ++i)
    if (std::abs(t[i] - t[i - 1] - dt) > 1e-6 * dt) throw InvalidArgument("dominant_frequency: samples must be uniform");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
  Vec centred(m);
  for (std::size_t i = 0; i < m; ++i) centred[i] = y[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, centred);
  DominantFrequency out;
  out.bin_width = 1.0 / (static_cast<double>(m) * dt);
  double best = -1.0;
  for (std::size_t k = 1; k <= m / 2; ++k)
    if (std::abs(spec[k]) > best) {
      best = std::abs(spec[k]);
      out.bin = static_cast<int>(k);
    }
  out.frequency = out.bin * out.bin_width;
  return out;
}

DampedCosineFit fit_damped_cosine(const Vec& t, const Vec& y) {
  require_trace(t, y, 8, "fit_damped_cosine");
  const std::size_t m = t.size();
  const double T = t.back() - t.front();
  // parameters (amplitude, decay rate * T, 2 pi f T, phase, offset) on s = (t - t0) / T
  LsqFunctor fn;
  fn.n = 5;
  fn.m = static_cast<int>(m);
  fn.residual = [&](const Eigen::VectorXd& p, Eigen::VectorXd& f) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = (t[i] - t[0]) / T;
      f[i] = p[0] * std::exp(-p[1] * s) * std::cos(p[2] * s + p[3]) + p[4] - y[i];
    }
  };
  fn.jacobian = [&](const Eigen::VectorXd& p, Eigen::MatrixXd& J) {
    for (std::size_t i = 0; i < m; ++i) {
      const double s = (t[i] - t[0]) / T, e = std::exp(-p[1] * s);
      const double c = std::cos(p[2] * s + p[3]), sn = std::sin(p[2] * s + p[3]);
      J(i, 0) = e * c;
      J(i, 1) = -p[0] * s * e * c;
      J(i, 2) = -p[0] * e * s * sn;
      J(i, 3) = -p[0] * e * sn;
      J(i, 4) = 1.0;
    }
  };
  const DominantFrequency dom = dominant_frequency(t, y);
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(m);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  Eigen::VectorXd best;
  double best_sse = INFINITY;
  for (int ph = 0; ph < 4; ++ph) {
    Eigen::VectorXd p(5);
    p << 0.5 * (*hi - *lo), 1.0, 2 * std::numbers::pi * dom.frequency * T, ph * 0.5 * std::numbers::pi, mean;
    p = polish(fn, p);
    const double v = sum_squares(fn, p);
    if (v < best_sse) {
      best_sse = v;
      best = p;
    }
  }
  DampedCosineFit out;
  out.amplitude = best[0];
  out.decay_time = T / best[1];
  out.frequency = best[2] / (2 * std::numbers::pi * T);
  out.phase = best[3] - best[2] * t[0] / T;
  out.offset = best[4];
  if (out.amplitude < 0) {
    out.amplitude = -out.amplitude;
    out.phase += std::numbers::pi;
  }
  if (out.frequency < 0) {
    out.frequency = -out.frequency;
    out.phase = -out.phase;
  }
  out.phase = std::remainder(out.phase, 2 * std::numbers::pi);
  out.residual = best_sse;
  return out;
}

// ---------------------------------------------------------------------------
// Distributions

double total_variation(const Vec& p, const Vec& q) {
  const std::size_t n = std::max(p.size(), q.size());
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs((i < p.size() ? p[i] : 0.0) - (i < q.size() ? q[i] : 0.0));
  return 0.5 * s;
}

GeometricFit best_fit_geometric(const Vec& probs) {
  if (probs.empty()) throw InvalidArgument("best_fit_geometric: empty distribution");
  double mean = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) mean += static_cast<double>(n) * probs[n];
  // geometric mass beyond the support counts as disagreement
  auto distance = [&](double nbar) {
    const double x = nbar / (1.0 + nbar);
    double s = 0.0, g = 1.0 / (1.0 + nbar);
    for (double pn : probs) {
      s += std::abs(pn - g);
      g *= x;
    }
    return 0.5 * (s + std::pow(x, static_cast<double>(probs.size())));
  };
  const auto r = boost::math::tools::brent_find_minima(distance, 0.0, std::max(4.0 * mean, 1.0), 50);
  return {r.first, r.second};
}

}  // namespace cqed
