#pragma once

#include "semiclassical/classical_dynamics.hpp"
#include "semiclassical/gaussian_states.hpp"
#include "semiclassical/metaplectic.hpp"

#include <functional>
#include <unordered_map>

namespace semiclassical {

// ---------------------------------------------------------------------------
// Weyl quantization at hbar = 1 acting on polynomial x Psi_0 data,
// Psi_0 = pi^{-d/4} exp(-|x|^2/2).

inline ComplexPoly xi_hat(const ComplexPoly& Q, int j) {
  ComplexPoly r = Q.derivative(j);
  r -= Q.times_variable(j);
  return r * Complex(0.0, -1.0);
}

inline double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// Op^w(W) Q for a symbol W in (x_1..x_d, xi_1..xi_d); monomials use the McCoy form
// Op^w(x^a xi^b) = 2^{-a} sum_m C(a,m) x^m xi^b x^{a-m} per dimension.
template <class S>
ComplexPoly weyl_apply(const Polynomial<S>& W, const ComplexPoly& Q, int d) {
  ComplexPoly out(d);
  for (const auto& [ab, c] : W.coeffs()) {
    if (c == S(0)) continue;
    ComplexPoly R = Q;
    for (int j = 0; j < d; ++j) {
      const int a = ab[j], b = ab[d + j];
      if (a == 0 && b == 0) continue;
      ComplexPoly T(d);
      for (int m = 0; m <= a; ++m) {
        ComplexPoly X = R;
        for (int e = 0; e < a - m; ++e) X = X.times_variable(j);
        for (int e = 0; e < b; ++e) X = xi_hat(X, j);
        for (int e = 0; e < m; ++e) X = X.times_variable(j);
        T += X * Complex(binomial(a, m));
      }
      R = T * Complex(std::pow(2.0, -a));
    }
    out += R * Complex(c);
  }
  return out;
}

// ---------------------------------------------------------------------------

// psi = e^{i theta} e^{-i arg det M / 2} T(center) M(kappa) Lambda_hbar [ sum_n hbar^{n/2} v_n Psi_0 ]
// where M = A + iB from kappa = [[A, B], [C, D]] and arg det M is continued along the path.
struct ExpansionState {
  double hbar = 1.0;
  int order = 0;
  double time = 0.0;
  PhasePoint center;
  Mat kappa;
  double theta = 0.0;
  double arg_det_m = 0.0;
  std::vector<ComplexPoly> corrections;  // v_0 .. v_N

  int dim() const { return center.dim(); }
  CMat M() const {
    const int d = dim();
    return kappa.topLeftCorner(d, d).cast<Complex>() + I1 * kappa.topRightCorner(d, d).cast<Complex>();
  }
  CMat N() const {
    const int d = dim();
    return kappa.bottomLeftCorner(d, d).cast<Complex>() + I1 * kappa.bottomRightCorner(d, d).cast<Complex>();
  }
  HagedornFrame frame() const { return {M(), N()}; }

  // Sum of the first `upto` + 1 terms as a normal-form wavepacket.
  GaussianWavepacket to_wavepacket(int upto = -1) const {
    if (upto < 0) upto = order;
    const int d = dim();
    ComplexPoly Q(d);
    for (int n = 0; n <= std::min(upto, order); ++n) Q += corrections[n] * Complex(std::pow(hbar, 0.5 * n));
    const HagedornFrame f = frame();
    const SiegelMatrix g = f.gamma();
    const CMat U = sym_sqrt(g.im()).cast<Complex>() * f.M;
    GaussianWavepacket s;
    s.hbar = hbar;
    s.center = center;
    s.frame = f;
    s.poly = rotate_normal_poly(Q, U);
    s.phase = theta - 0.5 * arg_det_m;
    return s;
  }

  // Exact re-expression in the normal frame of the current Gamma (polar correction).
  void renormalize() {
    const HagedornFrame f = frame();
    const SiegelMatrix g = f.gamma();
    const CMat U = sym_sqrt(g.im()).cast<Complex>() * f.M;
    for (auto& v : corrections) v = rotate_normal_poly(v, U);
    theta -= 0.5 * arg_det_m;
    arg_det_m = 0.0;
    kappa = normal_symplectic(g);
  }

  int max_degree_violation() const {
    for (int n = 0; n < static_cast<int>(corrections.size()); ++n)
      if (n > 0 && corrections[n].degree() > 3 * n) return n;
    return -1;
  }
};

inline ExpansionState make_expansion(const GaussianWavepacket& s, int N) {
  if (N < 0 || N > 4) throw std::invalid_argument("order N must be in 0..4");
  ExpansionState e;
  e.hbar = s.hbar;
  e.order = N;
  e.center = s.center;
  e.kappa = normal_symplectic(s.gamma());
  e.theta = s.phase;
  e.corrections.assign(N + 1, ComplexPoly(s.dim()));
  e.corrections[0] = s.poly;
  if (e.corrections[0].nvars() == 0) e.corrections[0] = ComplexPoly::constant(s.dim(), 1.0);
  return e;
}

struct PropagationOptions {
  IntegratorOptions integrator{1e-11, 1e3, 1e-14, -1};
  double h_max = 0.02;
  double caustic_tol = 1e-8;
};

struct OrderNSample {
  double t = 0.0;
  double kappa_norm = 0.0;
  std::vector<double> sup_norms;  // N_inf(v_n)
  std::vector<int> degrees;
};

namespace detail {

// Dense packing of polynomials of degree <= 3N in d variables.
struct CoefficientLayout {
  int d = 1, N = 0;
  std::vector<MultiIndex> indices;
  std::map<MultiIndex, int> position;

  CoefficientLayout(int d_, int N_) : d(d_), N(N_) {
    indices = multi_indices_up_to(d, 3 * N);
    for (int i = 0; i < static_cast<int>(indices.size()); ++i) position[indices[i]] = i;
  }
  int per_poly() const { return 2 * static_cast<int>(indices.size()); }
  int size() const { return N * per_poly(); }

  void pack(const std::vector<ComplexPoly>& v, Eigen::Ref<Vec> out) const {
    out.setZero();
    for (int n = 1; n <= N; ++n)
      for (const auto& [a, c] : v[n].coeffs()) {
        auto it = position.find(a);
        if (it == position.end()) {
          if (std::abs(c) > 0) throw InvariantError("correction degree exceeds 3n");
          continue;
        }
        out((n - 1) * per_poly() + 2 * it->second) = c.real();
        out((n - 1) * per_poly() + 2 * it->second + 1) = c.imag();
      }
  }
  std::vector<ComplexPoly> unpack(const ComplexPoly& v0, const Eigen::Ref<const Vec>& in) const {
    std::vector<ComplexPoly> v(N + 1, ComplexPoly(d));
    v[0] = v0;
    for (int n = 1; n <= N; ++n)
      for (int i = 0; i < static_cast<int>(indices.size()); ++i) {
        const Complex c(in((n - 1) * per_poly() + 2 * i), in((n - 1) * per_poly() + 2 * i + 1));
        if (c != Complex(0)) v[n].coeffs().emplace(indices[i], c);
      }
    return v;
  }
};

}  // namespace detail

// Advance an expansion by time t. The state vector is [z | kappa | S | arg det M | v_1..v_N].
inline void evolve_expansion(const ModelHamiltonian& H, ExpansionState& e, double t, const PropagationOptions& opt = {},
                             const std::function<void(const ExpansionState&)>& observe = {}, double out_dt = 0.0) {
  const int d = H.d, n = 2 * d;
  if (e.dim() != d) throw std::invalid_argument("expansion dimension does not match the model");
  if (e.order > 0 && !H.is_quadratic && H.max_taylor_order < e.order + 2)
    throw std::invalid_argument("model Taylor order too low for the requested correction order");
  const detail::CoefficientLayout lay(d, e.order);
  const int base = n + n * n + 2;
  Vec y(base + lay.size());
  y.head(n) = e.center.z();
  y.segment(n, n * n) = Eigen::Map<const Vec>(e.kappa.data(), n * n);
  y(n + n * n) = 0.0;
  y(n + n * n + 1) = e.arg_det_m;
  lay.pack(e.corrections, y.tail(lay.size()));
  const ComplexPoly v0 = e.corrections[0];
  const bool corrections = e.order > 0 && !H.is_quadratic;

  auto rhs = [&](double, const Vec& s) -> Vec {
    Vec out = Vec::Zero(s.size());
    const Vec z = s.head(n);
    const Vec g = H.gradient(z);
    out.head(d) = g.tail(d);
    out.segment(d, d) = -g.head(d);
    const Eigen::Map<const Mat> K(s.data() + n, n, n);
    const Mat Hs = H.hessian(z);
    Mat JH(n, n);
    JH.topRows(d) = Hs.bottomRows(d);
    JH.bottomRows(d) = -Hs.topRows(d);
    const Mat Kd = JH * K;
    Eigen::Map<Mat>(out.data() + n, n, n) = Kd;
    out(n + n * n) = z.tail(d).dot(g.tail(d)) - H.eval(z);
    const CMat M = K.topLeftCorner(d, d).cast<Complex>() + I1 * K.topRightCorner(d, d).cast<Complex>();
    const CMat Md = Kd.topLeftCorner(d, d).cast<Complex>() + I1 * Kd.topRightCorner(d, d).cast<Complex>();
    out(n + n * n + 1) = M.partialPivLu().solve(Md).trace().imag();
    if (corrections) {
      const Mat Kc = K;
      const RealPoly full = H.symbol().substitute(Kc, z);
      std::vector<RealPoly> W(e.order + 3);
      for (int k = 3; k <= e.order + 2; ++k) W[k] = full.homogeneous(k);
      const auto v = lay.unpack(v0, s.tail(lay.size()));
      std::vector<ComplexPoly> vd(e.order + 1, ComplexPoly(d));
      for (int m = 1; m <= e.order; ++m) {
        ComplexPoly acc(d);
        for (int k = 3; k <= m + 2; ++k)
          if (!W[k].is_zero()) acc += weyl_apply(W[k], v[m - k + 2], d);
        vd[m] = acc * Complex(0.0, -1.0);
      }
      lay.pack(vd, out.tail(lay.size()));
    }
    return out;
  };

  IntegratorOptions io = opt.integrator;
  io.box_components = n;
  IntegrationStats st;
  double h = opt.h_max;
  const Vec z_start = e.center.z();
  const double qp0 = e.center.q.dot(e.center.p);
  const double theta0 = e.theta;
  const double t_start = e.time;

  auto sync = [&](double tt) {
    e.time = t_start + tt;
    e.center = PhasePoint(Vec(y.head(n)));
    e.kappa = Eigen::Map<const Mat>(y.data() + n, n, n);
    const double S = y(n + n * n);
    e.arg_det_m = y(n + n * n + 1);
    e.theta = theta0 + (S - 0.5 * (e.center.q.dot(e.center.p) - qp0)) / e.hbar;
    if (corrections) e.corrections = lay.unpack(v0, y.tail(lay.size()));
    if (std::abs(e.M().determinant()) < opt.caustic_tol) throw CausticError("det M below caustic tolerance");
    const int bad = e.max_degree_violation();
    if (bad > 0) throw InvariantError("deg v_n exceeds 3n at n = " + std::to_string(bad));
  };

  if (t == 0.0) {
    if (observe) observe(e);
    return;
  }
  const double step = out_dt > 0 ? out_dt : std::abs(t);
  const long nout = std::max<long>(1, static_cast<long>(std::ceil(std::abs(t) / step - 1e-9)));
  const double dir = t > 0 ? 1.0 : -1.0;
  if (observe) observe(e);
  for (long k = 1; k <= nout; ++k) {
    const double ta = dir * (k - 1) * step, tb = k == nout ? t : dir * k * step;
    integrate_adaptive(rhs, y, ta, tb, opt.h_max, io, st, h);
    Mat K = symplectic_reproject(Eigen::Map<const Mat>(y.data() + n, n, n), 1);
    Eigen::Map<Mat>(y.data() + n, n, n) = K;
    sync(tb);
    if (observe) observe(e);
  }
}

inline ExpansionState propagate_orderN(const ModelHamiltonian& H, const GaussianWavepacket& s, double t, int N,
                                       const PropagationOptions& opt = {}) {
  ExpansionState e = make_expansion(s, N);
  evolve_expansion(H, e, t, opt);
  return e;
}

inline GaussianWavepacket propagate_order0(const ModelHamiltonian& H, const GaussianWavepacket& s, double t,
                                           const PropagationOptions& opt = {}) {
  return propagate_orderN(H, s, t, 0, opt).to_wavepacket();
}

// States at each requested time (increasing) from one integration.
inline std::vector<ExpansionState> propagate_orderN_path(const ModelHamiltonian& H, const GaussianWavepacket& s,
                                                         const std::vector<double>& times, int N,
                                                         const PropagationOptions& opt = {}) {
  ExpansionState e = make_expansion(s, N);
  std::vector<ExpansionState> out;
  double t = 0.0;
  for (double target : times) {
    evolve_expansion(H, e, target - t, opt);
    t = target;
    out.push_back(e);
  }
  return out;
}

inline OrderNSample growth_sample(const ExpansionState& e) {
  OrderNSample s;
  s.t = e.time;
  s.kappa_norm = e.kappa.jacobiSvd().singularValues()(0);
  for (const auto& v : e.corrections) {
    s.sup_norms.push_back(v.sup_norm());
    s.degrees.push_back(v.degree());
  }
  return s;
}

struct SegmentOptions {
  PropagationOptions propagation;
  double t_limit = 0.0;  // t_hybrid_max; 0 disables the check
  bool override_limit = false;
};

// n_steps segments of length t0 with an exact normal-frame re-expansion at each boundary.
inline ExpansionState segmented_propagate(const ModelHamiltonian& H, const GaussianWavepacket& s, int n_steps, double t0,
                                          int N, const SegmentOptions& opt = {}) {
  if (n_steps < 1) throw std::invalid_argument("segmented_propagate: n_steps must be positive");
  if (opt.t_limit > 0 && n_steps * t0 > opt.t_limit && !opt.override_limit)
    throw ConfigError("segmented_propagate: total time exceeds the validity threshold (set override to continue)");
  ExpansionState e = make_expansion(s, N);
  for (int k = 0; k < n_steps; ++k) {
    evolve_expansion(H, e, t0, opt.propagation);
    e.renormalize();
  }
  return e;
}

}  // namespace semiclassical
