#pragma once

#include "semiclassical/classical_dynamics.hpp"
#include "semiclassical/gaussian_states.hpp"
#include "semiclassical/metaplectic.hpp"
#include "semiclassical/propagator.hpp"

namespace semiclassical {

// Hybrid WKB x Gaussian state in adapted coordinates (x central, y transverse, d_perp = 1):
//   psi(x, y) = T_I [ u(y) e^{-i a(y)/2} M(kappa^c(y)) Lambda_hbar (P Psi_0) ](x, y)
// with T_I u(x, y) = exp((i/hbar)[phi(y) + xi_bar(y).(x - x_bar(y)/2)]) u(x - x_bar(y), y),
// central frames (M, N)(y), a(y) = arg det M(y) continued in y and t, and P frame-relative.
struct HybridState {
  double hbar = 1.0;
  ManifoldGraph graph;
  std::vector<Complex> u;
  std::vector<CMat> M, N;
  std::vector<double> arg_det_m;
  ComplexPoly poly;
  double delta_est = 0.5;
  double nu_est = 0.0;
  double offblock = 0.0;  // |Gamma_xy| of the source wavepacket
  Mat frame;              // adapted frame F (adapted = F original)
  double time = 0.0;
  int steps = 0;
  std::string provenance;

  int d_par() const { return graph.d_par; }
  int size() const { return graph.size(); }

  SiegelMatrix gamma_par(int i) const {
    const CMat G = N[i] * M[i].inverse();
    return SiegelMatrix(0.5 * (G + G.transpose()));
  }
  std::vector<SiegelMatrix> gamma_par() const {
    std::vector<SiegelMatrix> out;
    for (int i = 0; i < size(); ++i) out.push_back(gamma_par(i));
    return out;
  }

  struct Local {
    Complex u;
    CMat M, N;
    double a;
  };
  // |u| is interpolated on a log scale (exact for Gaussian profiles), arg u unwrapped.
  struct Interpolant {
    const HybridState* hs;
    std::vector<double> log_abs, arg;
    explicit Interpolant(const HybridState& s) : hs(&s) {
      double prev = 0;
      for (size_t i = 0; i < s.u.size(); ++i) {
        log_abs.push_back(std::log(std::max(std::abs(s.u[i]), 1e-300)));
        double a = std::arg(s.u[i]);
        if (i > 0) a = prev + std::remainder(a - prev, 2 * pi);
        arg.push_back(prev = a);
      }
    }
    Local operator()(double y) const {
      const UniformGrid1& g = hs->graph.grid;
      return {std::polar(std::exp(cubic(g, log_abs, y)), cubic(g, arg, y)), cubic(g, hs->M, y), cubic(g, hs->N, y),
              cubic(g, hs->arg_det_m, y)};
    }
  };

  // Normal-form polynomial at sample i (coefficient of (Im G^{1/2} x / sqrt(hbar))^gamma).
  ComplexPoly normal_poly(int i) const {
    const SiegelMatrix g = gamma_par(i);
    return rotate_normal_poly(poly, sym_sqrt(g.im()).cast<Complex>() * M[i]);
  }

  // u_gamma(y) = u(y) e^{-i a(y)/2} c_gamma(y).
  std::map<MultiIndex, std::vector<Complex>> amplitudes() const {
    std::map<MultiIndex, std::vector<Complex>> out;
    for (int i = 0; i < size(); ++i) {
      const ComplexPoly P = normal_poly(i);
      for (const auto& [g, c] : P.coeffs()) {
        auto& v = out[g];
        v.resize(size(), Complex(0));
        v[i] = u[i] * std::polar(1.0, -0.5 * arg_det_m[i]) * c;
      }
    }
    return out;
  }
};

struct HybridOptions {
  int samples = 401;
  double log_cut = 40.0;  // graph domain: u >= e^{-log_cut} max u
};

namespace detail {

// log of the Gaussian factor of the wavepacket at z (polynomial dropped), an analytic complex quadratic.
inline Complex log_gaussian(const GaussianWavepacket& s, const Vec& z) {
  const int d = s.dim();
  const SiegelMatrix g = s.gamma();
  const double h = s.hbar;
  const Vec w = z - s.center.q;
  const CVec wc = w.cast<Complex>();
  const Complex quad = (wc.transpose() * g.gamma * wc)(0, 0);
  const double lognorm = -0.25 * d * std::log(pi * h) + 0.25 * std::log(std::abs(g.im().determinant()));
  return lognorm +
         I1 * (s.phase + (-s.center.q.dot(s.center.p) / 2 + s.center.p.dot(z)) / h) + I1 * quad / (2 * h);
}

}  // namespace detail

// Exact tensor split of a Gaussian in the adapted frame F (adapted = F original).
// The mixed block Gamma_xy is absorbed by completing the square: the complex central center
// -Gamma_xx^{-1} Gamma_xy y is realized as a real phase-space shift (x_bar, xi_bar) linear in y.
inline HybridState hybrid_from_wavepacket_in_frame(const GaussianWavepacket& s0, const Mat& F, int d_par,
                                                   const HybridOptions& opt = {}) {
  const int d = s0.dim();
  if (d - d_par != 1) throw std::invalid_argument("hybrid states need d_perp = 1");
  const GaussianWavepacket s = transport_excited(F, s0);
  const double h = s.hbar;
  const SiegelMatrix g = s.gamma();
  const CMat Gxx = g.gamma.topLeftCorner(d_par, d_par);
  const CVec Gxy = g.gamma.topRightCorner(d_par, 1);
  const Mat ReG = Gxx.real(), ImG = Gxx.imag();
  const CVec Xc = -Gxx.partialPivLu().solve(Gxy);  // complex central center per unit y
  const Vec xr = Xc.real(), xi = Xc.imag();
  const Vec a = xr + ImG.ldlt().solve(ReG * xi);
  const Vec b = ReG * (a - xr) + ImG * xi;
  const Vec qx = s.center.q.head(d_par), px = s.center.p.head(d_par);
  const double qy = s.center.q(d_par);
  const double lognc = -0.25 * d_par * std::log(pi * h) + 0.25 * std::log(std::abs(ImG.determinant()));

  auto xbar = [&](double y) -> Vec { return qx + a * (y - qy); };
  auto xibar = [&](double y) -> Vec { return px + b * (y - qy); };
  auto L = [&](double y) {
    Vec z(d);
    z.head(d_par) = xbar(y);
    z(d_par) = y;
    return detail::log_gaussian(s, z) - lognc - I1 * xibar(y).dot(xbar(y)) / (2 * h);
  };
  // Re L is an exact quadratic in y: locate its maximum and curvature.
  const double step = std::sqrt(h);
  const double l0 = L(qy).real(), lp = L(qy + step).real(), lm = L(qy - step).real();
  const double curv = (lp - 2 * l0 + lm) / (step * step);  // = -2 alpha
  if (!(curv < 0)) throw InvariantError("hybrid_from_wavepacket: transverse factor is not decaying");
  const double alpha = -0.5 * curv;
  const double ym = qy + (lp - lm) / (2 * step) / (2 * alpha);
  const double half = std::sqrt(opt.log_cut / alpha);

  HybridState hs;
  hs.hbar = h;
  hs.frame = F;
  hs.offblock = Gxy.norm();
  // Excitations must be purely central and the Gaussian block-diagonal, so the normal-form
  // polynomial factors through the central variables.
  hs.poly = ComplexPoly(d_par);
  for (const auto& [g, c] : s.poly.coeffs()) {
    if (g[d_par] != 0 || (order(g) > 0 && hs.offblock > 1e-10))
      throw std::invalid_argument("hybrid_from_wavepacket: excitation must be central with a block-diagonal frame");
    hs.poly.add(MultiIndex(g.begin(), g.begin() + d_par), c);
  }
  hs.provenance = "hybrid_from_wavepacket";
  ManifoldGraph& gr = hs.graph;
  gr.d_par = d_par;
  gr.grid = UniformGrid1{ym - half, 2 * half / (opt.samples - 1), opt.samples};
  const HagedornFrame cf = HagedornFrame::normal(SiegelMatrix(Gxx));
  const double dy = 1e-3 * half;
  for (int i = 0; i < opt.samples; ++i) {
    const double y = gr.grid.at(i);
    const Complex l = L(y);
    const double phi = h * l.imag();
    const double dphi = h * (L(y + dy).imag() - L(y - dy).imag()) / (2 * dy);
    const Vec xb = xbar(y), xib = xibar(y);
    gr.x_bar.push_back(xb);
    gr.xi_bar.push_back(xib);
    gr.dx_bar.push_back(a);
    gr.dxi_bar.push_back(b);
    gr.eta_bar.push_back(dphi + 0.5 * (b.dot(xb) - xib.dot(a)));
    gr.phi.push_back(phi);
    gr.action.push_back(0.0);
    hs.u.push_back(std::exp(l.real()));
    hs.M.push_back(cf.M);
    hs.N.push_back(cf.N);
    hs.arg_det_m.push_back(0.0);
  }
  // eta_bar is affine in y; its slope from the end points
  const double c = (gr.eta_bar.back() - gr.eta_bar.front()) / (gr.grid.back() - gr.grid.y0);
  gr.deta_bar.assign(opt.samples, c);
  // sigma = sqrt(hbar / Im Gamma_eff) = 1/sqrt(2 alpha) and sigma = hbar^delta
  hs.delta_est = std::log(1.0 / std::sqrt(2 * alpha)) / std::log(h);
  hs.nu_est = 0.0;
  return hs;
}

inline HybridState hybrid_from_wavepacket(const GaussianWavepacket& s, const Splitting& split,
                                          const HybridOptions& opt = {}) {
  const int d_par = static_cast<int>(split.central.cols() / 2);
  return hybrid_from_wavepacket_in_frame(s, adapted_frame_from_splitting(d_par, split), d_par, opt);
}

// Transverse width (2 standard deviations of |u|^2 dy) and the mass-weighted mean.
inline std::pair<double, double> hybrid_support(const HybridState& hs) {
  double m0 = 0, m1 = 0, m2 = 0;
  for (int i = 0; i < hs.size(); ++i) {
    const double w = std::norm(hs.u[i]);
    const double y = hs.graph.y(i);
    m0 += w, m1 += w * y, m2 += w * y * y;
  }
  const double mean = m1 / m0;
  return {2 * std::sqrt(std::max(0.0, m2 / m0 - mean * mean)), mean};
}

// Measured class exponents: delta from |u'|/|u| ~ hbar^{-delta}, nu from
// |Im G^{-1/2} dG/dy Im G^{-1/2}| ~ hbar^{-2 nu} |log hbar|.
inline void update_class_estimates(HybridState& hs) {
  const int n = hs.size();
  const double L = std::abs(std::log(hs.hbar));
  std::vector<double> ur(n), ui(n);
  for (int i = 0; i < n; ++i) ur[i] = hs.u[i].real(), ui[i] = hs.u[i].imag();
  const auto dur = fd_derivative(ur, hs.graph.grid.dy), dui = fd_derivative(ui, hs.graph.grid.dy);
  double umax = 0, dmax = 0;
  for (int i = 0; i < n; ++i) {
    umax = std::max(umax, std::abs(hs.u[i]));
    dmax = std::max(dmax, std::hypot(dur[i], dui[i]));
  }
  if (umax > 0 && dmax > 0) hs.delta_est = std::log(dmax / umax) / L;
  double gmax = 0;
  for (int i = 1; i + 1 < n; ++i) {
    const CMat dG = (hs.gamma_par(i + 1).gamma - hs.gamma_par(i - 1).gamma) / (2 * hs.graph.grid.dy);
    const Mat r = sym_inv_sqrt(hs.gamma_par(i).im());
    gmax = std::max(gmax, (r.cast<Complex>() * dG * r.cast<Complex>()).norm());
  }
  hs.nu_est = gmax > 0 ? std::max(0.0, std::log(gmax / L) / (2 * L)) : 0.0;
}

struct HybridStepOptions {
  int samples = 0;          // 0: keep the sample count
  double window = 1e300;    // truncate the graph domain to |y| <= window
  double caustic_tol = 1e-8;
  double siegel_tol = 1e-12;
};

// Leading-order step: graph flow, half-density transport of u, central Siegel action of the
// graph-straightened central block d^cF = P_1 dPhi E_0.
inline HybridState propagate_hybrid_leading(const ModelHamiltonian& H, const HybridState& hs, double t0,
                                            const HybridStepOptions& opt = {}) {
  const int dp = hs.d_par(), d = dp + 1;
  if (H.d != d || H.d_par != dp) throw std::invalid_argument("propagate_hybrid_leading: model dimensions");
  GraphEvolveOptions go;
  go.samples = opt.samples;
  go.window = opt.window;
  ManifoldGraph g1 = evolve_manifold_graph(H, hs.graph, t0, go);
  HybridState out;
  out.hbar = hs.hbar;
  out.poly = hs.poly;
  out.offblock = hs.offblock;
  out.frame = hs.frame;
  out.time = hs.time + t0;
  out.steps = hs.steps + 1;
  out.provenance = "propagate_hybrid_leading";
  const int n = g1.size();
  const HybridState::Interpolant at(hs);
  for (int j = 0; j < n; ++j) {
    const double y0 = g1.y_prev[j];
    const auto loc = at(y0);
    const auto s0 = hs.graph.sample(y0);
    const Vec dx0 = s0.tangent.head(dp), dxi0 = s0.tangent.segment(d, dp);
    Mat E0 = Mat::Zero(2 * d, 2 * dp);
    for (int k = 0; k < dp; ++k) {
      E0(k, k) = 1.0;
      E0(d + dp, k) = dxi0(k);
      E0(d + k, dp + k) = 1.0;
      E0(d + dp, dp + k) = -dx0(k);
    }
    Mat P1 = Mat::Zero(2 * dp, 2 * d);
    for (int k = 0; k < dp; ++k) {
      P1(k, k) = 1.0;
      P1(k, dp) = -g1.dx_bar[j](k);
      P1(dp + k, d + k) = 1.0;
      P1(dp + k, dp) = -g1.dxi_bar[j](k);
    }
    const Mat dc = symplectic_reproject(P1 * g1.kappa[j] * E0);
    const auto [A, B, C, D] = blocks(dc);
    const CMat M1 = A.cast<Complex>() * loc.M + B.cast<Complex>() * loc.N;
    const CMat N1 = C.cast<Complex>() * loc.M + D.cast<Complex>() * loc.N;
    const Complex det0 = loc.M.determinant(), det1 = M1.determinant();
    if (std::abs(det1) < opt.caustic_tol) throw CausticError("central caustic along the graph");
    out.M.push_back(M1);
    out.N.push_back(N1);
    out.arg_det_m.push_back(loc.a + std::arg(det1 * std::conj(det0)));
    out.u.push_back(loc.u / std::sqrt(std::abs(g1.jac_y[j])));
    const CMat G = N1 * M1.inverse();
    const Mat im = (0.5 * (G + G.transpose())).imag();
    if (Eigen::SelfAdjointEigenSolver<Mat>(im).eigenvalues().minCoeff() < opt.siegel_tol)
      throw InvariantError("Im Gamma_par lost positivity");
  }
  out.graph = std::move(g1);
  update_class_estimates(out);
  return out;
}

struct HybridEvalOptions {
  bool check_coverage = true;
  double coverage_tol = 1e-8;
};

// Samples of the hybrid state on (x_1..x_dpar, y) axes in adapted coordinates.
inline GridWavefunction eval_hybrid(const HybridState& hs, const std::vector<GridAxis>& axes,
                                    const HybridEvalOptions& opt = {}) {
  const int dp = hs.d_par();
  if (static_cast<int>(axes.size()) != dp + 1) throw std::invalid_argument("eval_hybrid: axes must be (x.., y)");
  GridWavefunction out(hs.hbar, axes);
  const GridAxis& ya = axes[dp];
  std::vector<GridAxis> xaxes(axes.begin(), axes.begin() + dp);
  GridWavefunction xs(hs.hbar, xaxes);
  const double h = hs.hbar;
  const HybridState::Interpolant at(hs);
  for (int k = 0; k < ya.count; ++k) {
    const double y = ya.at(k);
    if (!hs.graph.grid.contains(y)) continue;
    const auto loc = at(y);
    const auto gs = hs.graph.sample(y);
    const Vec xb = gs.z.head(dp), xib = gs.z.segment(dp + 1, dp);
    const double phi = gs.Phi - 0.5 * xib.dot(xb);
    GaussianWavepacket c;
    c.hbar = h;
    c.center = PhasePoint(Vec::Zero(dp), Vec::Zero(dp));
    c.frame = {loc.M, loc.N};
    const SiegelMatrix g = c.frame.gamma();
    c.poly = rotate_normal_poly(hs.poly, sym_sqrt(g.im()).cast<Complex>() * loc.M);
    c.phase = 0.0;
    const WavepacketEvaluator ev(c);
    const Complex pre = loc.u * std::polar(1.0, -0.5 * loc.a + phi / h);
    for (size_t f = 0; f < xs.size(); ++f) {
      const Vec x = xs.coordinate(f);
      const Complex v = pre * std::polar(1.0, xib.dot(x - 0.5 * xb) / h) * ev(Vec(x - xb));
      out.values(static_cast<Eigen::Index>(f * ya.count + k)) = v;
    }
  }
  if (opt.check_coverage) {
    const double b = out.boundary_ratio();
    if (b > opt.coverage_tol) throw CoverageError("eval_hybrid: state reaches the grid boundary");
  }
  return out;
}

namespace detail {

// Shift each x-row (d_par = 1, axis 0 = x, axis 1 = y) by s(y) spectrally and multiply by a phase.
inline GridWavefunction graph_shift(const ManifoldGraph& g, const GridWavefunction& u, bool inverse) {
  if (u.dim() != 2 || g.d_par != 1) throw std::invalid_argument("t_I_apply: two-dimensional (x, y) grids only");
  const GridAxis& xa = u.axes[0];
  const GridAxis& ya = u.axes[1];
  const double h = u.hbar;
  GridWavefunction out = u;
  const Vec k = fft_wavenumbers(xa.count, xa.spacing);
  const FFTPlan fwd(std::vector<int>{xa.count}, FFTW_FORWARD), bwd(std::vector<int>{xa.count}, FFTW_BACKWARD);
  CVec line(xa.count);
  for (int j = 0; j < ya.count; ++j) {
    const double y = std::clamp(ya.at(j), g.grid.y0, g.grid.back());
    const auto s = g.sample(y);
    const double xb = s.z(0), xib = s.z(2);
    const double phi = s.Phi - 0.5 * xib * xb;
    for (int i = 0; i < xa.count; ++i) line(i) = u.values(static_cast<Eigen::Index>(i) * ya.count + j);
    const double shift = inverse ? -xb : xb;
    fwd.execute(line);
    for (int m = 0; m < xa.count; ++m) line(m) *= std::polar(1.0 / xa.count, -k(m) * shift);
    bwd.execute(line);
    for (int i = 0; i < xa.count; ++i) {
      const double x = xa.at(i);
      const double ph = inverse ? -(phi + xib * (x + 0.5 * xb)) : phi + xib * (x - 0.5 * xb);
      out.values(static_cast<Eigen::Index>(i) * ya.count + j) = line(i) * std::polar(1.0, ph / h);
    }
  }
  return out;
}

}  // namespace detail

inline GridWavefunction t_I_apply(const ManifoldGraph& g, const GridWavefunction& u, double coverage_tol = 1e-8) {
  GridWavefunction out = detail::graph_shift(g, u, false);
  if (u.boundary_ratio() < coverage_tol && out.boundary_ratio() > std::max(coverage_tol, 10 * u.boundary_ratio()))
    throw CoverageError("t_I_apply: shifted state leaves the grid");
  return out;
}

inline GridWavefunction t_I_adjoint(const ManifoldGraph& g, const GridWavefunction& u) {
  return detail::graph_shift(g, u, true);
}

// Map grid samples between original and adapted coordinates for frames that act on the
// transverse (y, eta) plane only: adapted = M(F) original.
inline GridWavefunction to_adapted(const Mat& F, const GridWavefunction& u, int d_par, bool inverse = false,
                                   double coverage_tol = 1e-8) {
  const int d = u.dim();
  const Mat T = inverse ? Mat(F.inverse()) : F;
  const int iy = d_par, ie = d + d_par;
  for (int r = 0; r < 2 * d; ++r)
    for (int c = 0; c < 2 * d; ++c) {
      if ((r == iy || r == ie) && (c == iy || c == ie)) continue;
      if (std::abs(T(r, c) - (r == c ? 1.0 : 0.0)) > 1e-10)
        throw std::invalid_argument("to_adapted: frame must act on the transverse plane only");
    }
  Mat k(2, 2);
  k << T(iy, iy), T(iy, ie), T(ie, iy), T(ie, ie);
  return metaplectic_apply_axis(symplectic_reproject(k), u, d_par, coverage_tol);
}

// ---------------------------------------------------------------------------
// Estimate report

struct EstimateReport {
  double t = 0.0;
  double dgamma_max = 0.0;      // max |d Gamma_par / dy|
  double dgamma_bound = 0.0;    // |log hbar| sigma_c(t)^2
  double support_diameter = 0.0;
  double support_bound = 0.0;   // hbar^{1/2} e^{t lambda_max}
  double delta_measured = 0.0;
  double delta_predicted = 0.0; // 1/2 - t nu_min / |log hbar|
  std::vector<double> du_norms;   // |d^a u|_inf, a = 1..3
  std::vector<double> du_shapes;  // hbar^{-delta_t a} J_u^{-1/2} hbar^{-d/4}
  double nu_measured = 0.0;
};

struct EstimateOptions {
  double alpha = 0.05;  // sigma_c(t) = e^{alpha t} when lambda_c = 0
};

inline EstimateReport hybrid_estimate_report(const HybridState& hs, const DynamicalRates& rates, double t,
                                               const EstimateOptions& o = {}) {
  if (hs.provenance.empty()) throw InvariantError("hybrid_estimate_report: state has no provenance");
  EstimateReport r;
  r.t = t;
  const double L = std::abs(std::log(hs.hbar));
  const int n = hs.size();
  const double dy = hs.graph.grid.dy;
  for (int i = 1; i + 1 < n; ++i)
    r.dgamma_max = std::max(r.dgamma_max, ((hs.gamma_par(i + 1).gamma - hs.gamma_par(i - 1).gamma) / (2 * dy)).norm());
  const double sc = rates.lambda_c > 0 && rates.sigma_c ? rates.sigma_c(t) : std::exp(o.alpha * t);
  r.dgamma_bound = L * sc * sc;
  r.support_diameter = hybrid_support(hs).first;
  r.support_bound = std::sqrt(hs.hbar) * std::exp(t * rates.lambda_max);
  r.delta_measured = hs.delta_est;
  r.delta_predicted = 0.5 - t * rates.nu_min_perp / L;
  r.nu_measured = hs.nu_est;
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) f[i] = std::abs(hs.u[i]);
  const double Ju = std::exp(t * rates.nu_min_perp);
  for (int a = 1; a <= 3; ++a) {
    f = fd_derivative(f, dy);
    double m = 0;
    for (int i = 2 * a; i < n - 2 * a; ++i) m = std::max(m, std::abs(f[i]));
    r.du_norms.push_back(m);
    r.du_shapes.push_back(std::pow(hs.hbar, -r.delta_predicted * a) / std::sqrt(Ju) *
                          std::pow(hs.hbar, -0.25 * (hs.d_par() + 1)));
  }
  return r;
}

}  // namespace semiclassical
