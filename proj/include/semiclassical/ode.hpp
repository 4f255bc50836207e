#pragma once

#include "semiclassical/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace semiclassical {

struct IntegratorOptions {
  double tol = 1e-12;       // local error per step, relative to 1 + |y|_inf
  double box = 1e3;         // escape bound on the phase-space coordinates
  double h_min = 1e-14;
  int box_components = -1;  // number of leading components checked against box (-1: all)
};

struct IntegrationStats {
  long steps = 0;
  long rejected = 0;
  double error_estimate = 0.0;  // accumulated step-halving (Richardson) estimate
};

namespace detail {

template <class F, class V>
V rk4_step(F& f, double t, const V& y, double h) {
  const V k1 = f(t, y);
  const V k2 = f(t + 0.5 * h, V(y + 0.5 * h * k1));
  const V k3 = f(t + 0.5 * h, V(y + 0.5 * h * k2));
  const V k4 = f(t + h, V(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// Adaptive classical RK4 with step-doubling error control and Richardson extrapolation.
// Integrates y from t0 to t1 (either direction) with |h| <= h_max.
template <class F, class V>
void integrate_adaptive(F&& f, V& y, double t0, double t1, double h_max,
                        const IntegratorOptions& opt, IntegrationStats& stats,
                        double& h_state) {
  const double dir = t1 >= t0 ? 1.0 : -1.0;
  double t = t0;
  double h = std::min(std::abs(h_state) > 0 ? std::abs(h_state) : h_max, h_max);
  const Eigen::Index nbox = opt.box_components < 0 ? y.size() : opt.box_components;
  while (dir * (t1 - t) > 1e-15 * (1.0 + std::abs(t1))) {
    h = std::min(h, std::abs(t1 - t));
    const double hs = dir * h;
    const V full = detail::rk4_step(f, t, y, hs);
    const V half = detail::rk4_step(f, t, y, 0.5 * hs);
    const V two = detail::rk4_step(f, t + 0.5 * hs, half, 0.5 * hs);
    const double scale = 1.0 + y.cwiseAbs().maxCoeff();
    const double err = (two - full).cwiseAbs().maxCoeff() / 15.0;
    if (!std::isfinite(err)) throw NumericalError("non-finite state during integration");
    if (err <= opt.tol * scale || h <= opt.h_min) {
      y = two + (two - full) / 15.0;
      t += hs;
      stats.steps++;
      stats.error_estimate += err;
      if (y.head(nbox).cwiseAbs().maxCoeff() > opt.box)
        throw EscapeError("trajectory left the box |z| <= " + std::to_string(opt.box), t);
      const double fac = err > 0 ? 0.9 * std::pow(opt.tol * scale / err, 0.2) : 2.0;
      h = std::min(h_max, h * std::clamp(fac, 0.2, 2.0));
    } else {
      stats.rejected++;
      h *= std::clamp(0.9 * std::pow(opt.tol * scale / err, 0.2), 0.1, 0.5);
    }
  }
  h_state = h;
}

}  // namespace semiclassical
