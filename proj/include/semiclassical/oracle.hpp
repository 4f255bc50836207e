#pragma once

#include "semiclassical/gaussian_states.hpp"
#include "semiclassical/hamiltonian_models.hpp"
#include "semiclassical/metaplectic.hpp"

#include <functional>

namespace semiclassical {

struct SplitStepOptions {
  double dt = 0.0;             // 0: default min(0.01, 0.1 sqrt(hbar) / max|grad V|)
  double boundary_tol = 1e-8;  // boundary contamination limit
  int monitor_every = 25;
};

struct SplitStepStats {
  double dt = 0.0;
  long steps = 0;
  double norm_drift = 0.0;
  double max_boundary = 0.0;
};

inline double default_split_step_dt(const ModelHamiltonian& H, const GridWavefunction& u) {
  if (!H.kinetic_potential) throw std::invalid_argument("split-step oracle needs a kinetic + potential model");
  double gmax = 0.0;
  for (size_t f = 0; f < u.size(); ++f) {
    const Vec x = u.coordinate(f);
    double g2 = 0.0;
    for (int j = 0; j < H.d; ++j) g2 += std::pow(H.potential_gradient(j)(x), 2);
    gmax = std::max(gmax, std::sqrt(g2));
  }
  return gmax > 0 ? std::min(0.01, 0.1 * std::sqrt(u.hbar) / gmax) : 0.01;
}

// Strang splitting for p^w = -hbar^2 Laplacian + V on a periodic grid.
class SplitStepper {
 public:
  SplitStepper(const ModelHamiltonian& H, const GridWavefunction& like, double dt, double boundary_tol = 1e-8)
      : hbar_(like.hbar), dt_(dt), tol_(boundary_tol), like_(like.hbar, like.axes),
        fwd_(like.dims(), FFTW_FORWARD), bwd_(like.dims(), FFTW_BACKWARD) {
    if (!H.kinetic_potential) throw std::invalid_argument("split-step oracle needs a kinetic + potential model");
    if (H.d != like.dim()) throw std::invalid_argument("split-step oracle: dimension mismatch");
    const auto n = static_cast<Eigen::Index>(like.size());
    half_v_.resize(n);
    kin_.resize(n);
    std::vector<Vec> ks;
    for (const auto& a : like.axes) ks.push_back(fft_wavenumbers(a.count, a.spacing));
    for (size_t f = 0; f < like.size(); ++f) {
      const Vec x = like.coordinate(f);
      half_v_(static_cast<Eigen::Index>(f)) = std::polar(1.0, -0.5 * dt * H.potential()(x) / hbar_);
      const auto idx = like.index(f);
      double k2 = 0.0;
      for (int j = 0; j < like.dim(); ++j) k2 += ks[j](idx[j]) * ks[j](idx[j]);
      kin_(static_cast<Eigen::Index>(f)) = std::polar(1.0 / like.size(), -dt * hbar_ * k2);
    }
  }

  double dt() const { return dt_; }

  void step(CVec& v) const {
    v.array() *= half_v_.array();
    fwd_.execute(v);
    v.array() *= kin_.array();
    bwd_.execute(v);
    v.array() *= half_v_.array();
  }

  // Advance by n steps, checking the boundary every `every` steps.
  void advance(GridWavefunction& u, long n, SplitStepStats& st, int every = 25) const {
    for (long s = 0; s < n; ++s) {
      step(u.values);
      st.steps++;
      if ((s + 1) % every == 0 || s + 1 == n) monitor(u, st);
    }
  }

  void monitor(const GridWavefunction& u, SplitStepStats& st) const {
    const double b = u.boundary_ratio();
    st.max_boundary = std::max(st.max_boundary, b);
    if (b > tol_) throw CoverageError("split-step: boundary contamination " + std::to_string(b) + " (domain too small)");
  }

 private:
  double hbar_, dt_, tol_;
  GridWavefunction like_;
  CVec half_v_, kin_;
  FFTPlan fwd_, bwd_;
};

inline GridWavefunction split_step_evolve(const ModelHamiltonian& H, const GridWavefunction& u0, double t,
                                          const SplitStepOptions& opt = {}, SplitStepStats* stats = nullptr) {
  const double dt_req = opt.dt > 0 ? opt.dt : default_split_step_dt(H, u0);
  const long n = std::max<long>(1, static_cast<long>(std::ceil(std::abs(t) / dt_req - 1e-9)));
  const double dt = t / n;
  SplitStepStats st;
  st.dt = dt;
  GridWavefunction u = u0;
  if (t != 0.0) {
    SplitStepper S(H, u0, dt, opt.boundary_tol);
    S.advance(u, n, st, opt.monitor_every);
  }
  st.norm_drift = std::abs(u.norm() - u0.norm());
  if (stats) *stats = st;
  return u;
}

// Evolve and hand the state to `observe` at each requested time (increasing, >= 0).
inline void split_step_observe(const ModelHamiltonian& H, const GridWavefunction& u0, const std::vector<double>& times,
                               const std::function<void(double, const GridWavefunction&)>& observe,
                               const SplitStepOptions& opt = {}, SplitStepStats* stats = nullptr) {
  const double dt = opt.dt > 0 ? opt.dt : default_split_step_dt(H, u0);
  SplitStepper S(H, u0, dt, opt.boundary_tol);
  SplitStepStats st;
  st.dt = dt;
  GridWavefunction u = u0;
  double t = 0.0;
  for (double target : times) {
    const long n = static_cast<long>(std::floor((target - t) / dt + 1e-9));
    if (n > 0) {
      S.advance(u, n, st, opt.monitor_every);
      t += n * dt;
    }
    if (target - t > 1e-12) {
      SplitStepper tail(H, u0, target - t, opt.boundary_tol);
      GridWavefunction w = u;
      tail.step(w.values);
      observe(target, w);
    } else {
      observe(target, u);
    }
  }
  st.norm_drift = std::abs(u.norm() - u0.norm());
  if (stats) *stats = st;
}

// Relative L2 difference between runs at dt and dt/2 (Richardson-style self check).
inline double split_step_self_check(const ModelHamiltonian& H, const GridWavefunction& u0, double t, double dt) {
  SplitStepOptions a, b;
  a.dt = dt;
  b.dt = dt / 2;
  const auto u1 = split_step_evolve(H, u0, t, a);
  const auto u2 = split_step_evolve(H, u0, t, b);
  return (u1.values - u2.values).norm() / u2.values.norm();
}

// Exact propagator of the dilation symbol x.xi: u -> e^{-t d/2} u(e^{-t} x).
inline GridWavefunction dilation_exact(const GridWavefunction& u0, double t) {
  if (t == 0.0) return u0;
  GridWavefunction u = u0;
  Mat k(2, 2);
  k << std::exp(t), 0, 0, std::exp(-t);
  for (int a = 0; a < u.dim(); ++a) u = metaplectic_apply_axis(k, u, a);
  return u;
}

// ---------------------------------------------------------------------------

struct ErrorMetrics {
  double l2_error = 0.0;
  double overlap_mag = 0.0;
  double phase_insensitive_error = 0.0;
};

// Phase-insensitive error sqrt(|a|^2 + |b|^2 - 2|<a,b>|); overlap is normalized by |a||b|.
inline ErrorMetrics compare(const GridWavefunction& a, const GridWavefunction& b) {
  const Complex ab = inner_product(a, b);
  const double na = a.norm(), nb = b.norm();
  ErrorMetrics m;
  m.l2_error = std::sqrt((a.values - b.values).squaredNorm() * a.cell());
  m.overlap_mag = (na > 0 && nb > 0) ? std::min(1.0, std::abs(ab) / (na * nb)) : 0.0;
  m.phase_insensitive_error = std::sqrt(std::max(0.0, na * na + nb * nb - 2 * std::abs(ab)));
  return m;
}

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

// Least squares of log(error) against log(h).
inline SlopeFit convergence_slope(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) throw std::invalid_argument("convergence_slope needs at least 3 points");
  std::vector<double> xs, ys;
  for (auto [h, e] : pairs) {
    if (!(h > 0) || !(e > 0)) throw std::invalid_argument("convergence_slope needs positive h and error");
    xs.push_back(std::log(h));
    ys.push_back(std::log(e));
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  SlopeFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  return f;
}

// Ordinary least squares y = a + b x with r^2 and the standard error of b.
struct LinearFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
  double slope_stderr = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("linear_fit needs at least 2 points");
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) mx += xs[i] / n, my += ys[i] / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0 ? sxy * sxy / (sxx * syy) : 1.0;
  if (n > 2) {
    const double rss = std::max(0.0, syy - f.slope * sxy);
    f.slope_stderr = std::sqrt(rss / (n - 2) / sxx);
  }
  return f;
}

}  // namespace semiclassical
