#pragma once

#include "semiclassical/hamiltonian_models.hpp"
#include "semiclassical/interp.hpp"
#include "semiclassical/ode.hpp"

#include <Eigen/SVD>

#include <functional>
#include <optional>
#include <vector>

namespace semiclassical {

struct Trajectory {
  std::vector<double> times;
  std::vector<PhasePoint> points;
  std::vector<Mat> jacobians;    // empty unless variational
  std::vector<double> actions;   // S(t) = int (xi . dp/dxi - p) ds
  double energy_drift = 0.0;     // max |p(rho_t) - p(rho_0)|
  double error_estimate = 0.0;   // accumulated step-halving estimate
  double symplectic_residual = 0.0;

  const PhasePoint& back() const { return points.back(); }
};

// Final state of a flow with its Jacobian and action.
struct FlowResult {
  Vec z;
  Mat kappa;
  double action = 0.0;
};

namespace detail {

inline Vec flow_rhs(const ModelHamiltonian& H, const Vec& s, bool jac) {
  const int d = H.d, n = 2 * d;
  const Vec z = s.head(n);
  const Vec g = H.gradient(z);
  Vec out(s.size());
  out.head(d) = g.tail(d);
  out.segment(d, d) = -g.head(d);
  if (jac) {
    const Mat Hs = H.hessian(z);
    Mat JH(n, n);
    JH.topRows(d) = Hs.bottomRows(d);
    JH.bottomRows(d) = -Hs.topRows(d);
    const Eigen::Map<const Mat> K(s.data() + n, n, n);
    Eigen::Map<Mat>(out.data() + n, n, n) = JH * K;
  }
  out(s.size() - 1) = z.tail(d).dot(g.tail(d)) - H.eval(z);
  return out;
}

inline Vec pack_state(const Vec& z, const Mat* K, double S) {
  const auto n = z.size();
  Vec s(n + (K ? n * n : 0) + 1);
  s.head(n) = z;
  if (K) s.segment(n, n * n) = Eigen::Map<const Vec>(K->data(), n * n);
  s(s.size() - 1) = S;
  return s;
}

}  // namespace detail

// Flow of z0 for time t (t may be negative); Jacobian included when with_jac.
inline FlowResult flow_map(const ModelHamiltonian& H, const Vec& z0, double t, bool with_jac = true,
                           const IntegratorOptions& opt = {}, double h_max = 0.05) {
  const int n = 2 * H.d;
  Mat K0 = Mat::Identity(n, n);
  Vec s = detail::pack_state(z0, with_jac ? &K0 : nullptr, 0.0);
  IntegrationStats st;
  IntegratorOptions o = opt;
  o.box_components = n;
  double h = std::min(h_max, std::max(std::abs(t), 1e-3));
  if (t != 0.0)
    integrate_adaptive([&](double, const Vec& y) { return detail::flow_rhs(H, y, with_jac); }, s, 0.0,
                       t, h_max, o, st, h);
  FlowResult r;
  r.z = s.head(n);
  if (with_jac) r.kappa = symplectic_reproject(Eigen::Map<const Mat>(s.data() + n, n, n));
  r.action = s(s.size() - 1);
  return r;
}

namespace detail {

inline Trajectory integrate_impl(const ModelHamiltonian& H, const PhasePoint& rho0, double t, double dt,
                                 bool jac, const IntegratorOptions& opt) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (std::abs(t) / dt > 1e7) throw std::invalid_argument("|t|/dt exceeds 1e7");
  if (!rho0.finite()) throw std::invalid_argument("non-finite initial point");
  const int n = 2 * H.d;
  const Vec z0 = rho0.z();
  Mat K0 = Mat::Identity(n, n);
  Vec s = pack_state(z0, jac ? &K0 : nullptr, 0.0);
  Trajectory tr;
  const double E0 = H.eval(z0);
  auto record = [&](double tt) {
    const Vec z = s.head(n);
    tr.times.push_back(tt);
    tr.points.emplace_back(z);
    tr.actions.push_back(s(s.size() - 1));
    tr.energy_drift = std::max(tr.energy_drift, std::abs(H.eval(z) - E0));
    if (jac) {
      Mat K = symplectic_reproject(Eigen::Map<const Mat>(s.data() + n, n, n));
      Eigen::Map<Mat>(s.data() + n, n, n) = K;
      tr.symplectic_residual = std::max(tr.symplectic_residual, symplectic_residual(K));
      tr.jacobians.push_back(std::move(K));
    }
  };
  record(0.0);
  IntegrationStats st;
  IntegratorOptions o = opt;
  o.box_components = n;
  const double dir = t >= 0 ? 1.0 : -1.0;
  const long nsteps = static_cast<long>(std::ceil(std::abs(t) / dt - 1e-9));
  double h = dt;
  for (long k = 1; k <= nsteps; ++k) {
    const double ta = dir * (k - 1) * dt;
    const double tb = k == nsteps ? t : dir * k * dt;
    integrate_adaptive([&](double, const Vec& y) { return flow_rhs(H, y, jac); }, s, ta, tb, dt, o,
                       st, h);
    record(tb);
  }
  tr.error_estimate = st.error_estimate;
  return tr;
}

}  // namespace detail

inline Trajectory integrate_flow(const ModelHamiltonian& H, const PhasePoint& rho0, double t, double dt,
                                 const IntegratorOptions& opt = {}) {
  return detail::integrate_impl(H, rho0, t, dt, false, opt);
}

inline Trajectory integrate_variational(const ModelHamiltonian& H, const PhasePoint& rho0, double t,
                                        double dt, const IntegratorOptions& opt = {}) {
  return detail::integrate_impl(H, rho0, t, dt, true, opt);
}

// ---------------------------------------------------------------------------
// Lyapunov rates

struct LyapunovEstimate {
  double lambda_max = 0.0;   // (1/T) log |kappa_T|, maximized over seeds
  double lambda_half = 0.0;  // same estimate at T/2
  bool converged = true;
};

// Windowed accumulation keeps |kappa_T| representable: log|kappa_T| = sum log s_k + log|K|.
// When half is given it receives (t_half, log|kappa_{t_half}|) for t_half close to T/2.
inline double log_norm_jacobian(const ModelHamiltonian& H, const Vec& z0, double T, double window,
                                std::pair<double, double>* half = nullptr) {
  const int n = 2 * H.d;
  Vec z = z0;
  Mat K = Mat::Identity(n, n);
  double logscale = 0.0;
  const int nw = std::max(2, static_cast<int>(std::ceil(T / window - 1e-9)));
  const double w = T / nw;
  auto lognorm = [&] { return logscale + std::log(K.jacobiSvd().singularValues()(0)); };
  for (int k = 1; k <= nw; ++k) {
    const FlowResult f = flow_map(H, z, w);
    z = f.z;
    K = f.kappa * K;
    const double s = K.norm();
    K /= s;
    logscale += std::log(s);
    if (half && k == nw / 2) *half = {k * w, lognorm()};
  }
  return lognorm();
}

inline LyapunovEstimate lyapunov_max(const ModelHamiltonian& H, const std::vector<PhasePoint>& seeds,
                                     double T, double window = 1.0) {
  if (seeds.empty()) throw std::invalid_argument("lyapunov_max: no seeds");
  LyapunovEstimate e;
  e.lambda_max = -1e300;
  for (const auto& s : seeds) {
    std::pair<double, double> half{};
    const double lam = log_norm_jacobian(H, s.z(), T, window, &half) / T;
    if (lam > e.lambda_max) {
      e.lambda_max = lam;
      e.lambda_half = half.second / half.first;
    }
  }
  const double scale = std::max(std::abs(e.lambda_max), 0.05);
  e.converged = std::abs(e.lambda_max - e.lambda_half) <= 0.05 * scale;
  return e;
}

// ---------------------------------------------------------------------------
// Central / transverse index sets for models with K = {y = 0, eta = 0}.

inline std::vector<int> central_indices(const ModelHamiltonian& H) {
  std::vector<int> c;
  for (int j = 0; j < H.d_par; ++j) c.push_back(j);
  for (int j = 0; j < H.d_par; ++j) c.push_back(H.d + j);
  return c;
}
inline std::vector<int> transverse_indices(const ModelHamiltonian& H) {
  std::vector<int> c;
  for (int j = H.d_par; j < H.d; ++j) c.push_back(j);
  for (int j = H.d_par; j < H.d; ++j) c.push_back(H.d + j);
  return c;
}
inline Mat submatrix(const Mat& A, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat S(rows.size(), cols.size());
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j) S(i, j) = A(rows[i], cols[j]);
  return S;
}

inline double distance_to_K(const ModelHamiltonian& H, const Vec& z) {
  double m = 0.0;
  for (int i : transverse_indices(H)) m = std::max(m, std::abs(z(i)));
  return m;
}

// Uniform sample of K on the central energy window |(x_par, xi_par)| <= radius.
inline std::vector<PhasePoint> sample_K(const ModelHamiltonian& H, int per_axis, double radius) {
  std::vector<PhasePoint> out;
  const auto c = central_indices(H);
  const int nc = static_cast<int>(c.size());
  if (nc == 0) {
    out.emplace_back(Vec::Zero(2 * H.d));
    return out;
  }
  std::vector<int> idx(nc, 0);
  while (true) {
    Vec z = Vec::Zero(2 * H.d);
    for (int k = 0; k < nc; ++k)
      z(c[k]) = per_axis == 1 ? 0.0 : -radius + 2 * radius * idx[k] / (per_axis - 1);
    out.emplace_back(z);
    int k = 0;
    while (k < nc && ++idx[k] == per_axis) idx[k++] = 0;
    if (k == nc) break;
  }
  return out;
}

// sup over samples of |dPhi^t restricted to the central tangent block|.
inline double central_growth(const ModelHamiltonian& H, const std::vector<PhasePoint>& K_samples, double t) {
  const auto c = central_indices(H);
  double sup = 0.0;
  for (const auto& r : K_samples) {
    const Vec z = r.z();
    if (distance_to_K(H, z) > 1e-10) throw std::invalid_argument("central_growth: sample off K");
    if (c.empty()) continue;
    const FlowResult f = flow_map(H, z, t);
    Mat cols(2 * H.d, c.size());
    for (size_t j = 0; j < c.size(); ++j) cols.col(j) = f.kappa.col(c[j]);
    sup = std::max(sup, cols.jacobiSvd().singularValues()(0));
  }
  return sup;
}

struct DynamicalRates {
  double lambda_max = 0.0;
  double lambda_c = 0.0;
  double nu_min_perp = 0.0;
  std::function<double(double)> sigma_c;
  bool r_normally_hyperbolic = false;  // nu_min_perp > 3 lambda_c
};

// Rates from a finite sample of K; suprema and infima are sample extrema.
inline DynamicalRates estimate_rates(const ModelHamiltonian& H, const std::vector<PhasePoint>& K_samples,
                                     double T) {
  DynamicalRates r;
  r.lambda_max = lyapunov_max(H, K_samples, T).lambda_max;
  const double sc = central_growth(H, K_samples, T);
  r.lambda_c = sc > 0 ? std::max(0.0, std::log(sc) / T) : 0.0;
  const auto tr = transverse_indices(H);
  double nu = 1e300;
  for (const auto& s : K_samples) {
    if (tr.empty()) break;
    const FlowResult f = flow_map(H, s.z(), T);
    const Vec sv = submatrix(f.kappa, tr, tr).jacobiSvd().singularValues();
    nu = std::min(nu, std::log(sv(H.d_perp - 1)) / T);
  }
  r.nu_min_perp = tr.empty() ? 0.0 : nu;
  r.r_normally_hyperbolic = r.nu_min_perp > 3 * r.lambda_c;
  r.sigma_c = [H, K_samples](double t) { return central_growth(H, K_samples, t); };
  return r;
}

struct ThresholdOptions {
  double epsilon = 0.01;  // margin below the Ehrenfest window
  double tau = 0.25;      // initial distance exponent h^tau
  double C = 0.1;         // t_central_max = C |log h| when lambda_c = 0
};

struct Thresholds {
  double t_ehrenfest = 0.0;
  double t_cr = 0.0;
  double t_hybrid_max = 0.0;
  double t_central_max = 0.0;
};

inline Thresholds time_thresholds(const DynamicalRates& rates, double h, const ThresholdOptions& o = {}) {
  if (!(h > 0 && h < 1)) throw std::invalid_argument("time_thresholds: need 0 < h < 1");
  if (!(rates.lambda_max > 0)) throw std::invalid_argument("time_thresholds: lambda_max must be positive");
  const double L = std::abs(std::log(h));
  Thresholds th;
  th.t_ehrenfest = L / (2 * rates.lambda_max);
  th.t_cr = th.t_ehrenfest / 3;
  th.t_hybrid_max = (1 / (2 * rates.lambda_max) - o.epsilon) * L;
  th.t_central_max = rates.lambda_c > 0 ? std::min(o.tau / rates.lambda_c, 1 / (6 * rates.lambda_c)) * L
                                     : o.C * L;
  return th;
}

// ---------------------------------------------------------------------------
// Hyperbolic splitting and adapted frames

struct Splitting {
  PhasePoint base;
  Mat unstable;  // 2d x d_perp, orthonormal columns
  Mat stable;    // 2d x d_perp
  Mat central;   // 2d x 2 d_par
  double invariance_residual = 0.0;
};

inline double principal_angle(const Mat& A, const Mat& B) {
  const Eigen::HouseholderQR<Mat> qa(A), qb(B);
  const Mat Qa = qa.householderQ() * Mat::Identity(A.rows(), A.cols());
  const Mat Qb = qb.householderQ() * Mat::Identity(B.rows(), B.cols());
  const Vec s = (Qa.transpose() * Qb).jacobiSvd().singularValues();
  return std::acos(std::clamp(s.minCoeff(), -1.0, 1.0));
}

namespace detail {

// Dominant output directions of the transverse block of the Jacobian of Phi^T started at Phi^{-T}(z).
inline Mat dominant_transverse(const ModelHamiltonian& H, const Vec& z, double T) {
  const auto tr = transverse_indices(H);
  const Vec zb = flow_map(H, z, -T, false).z;
  const FlowResult f = flow_map(H, zb, T);
  const Mat blk = submatrix(f.kappa, tr, tr);
  Eigen::JacobiSVD<Mat> svd(blk, Eigen::ComputeFullU);
  Mat out = Mat::Zero(2 * H.d, H.d_perp);
  for (int j = 0; j < H.d_perp; ++j) {
    Vec v = svd.matrixU().col(j);
    if (v(0) < 0 || (v(0) == 0 && v(v.size() - 1) < 0)) v = -v;
    for (size_t i = 0; i < tr.size(); ++i) out(tr[i], j) = v(i);
  }
  return out;
}

inline Splitting splitting_core(const ModelHamiltonian& H, const PhasePoint& rho, double T) {
  Splitting s;
  s.base = rho;
  const Vec z = rho.z();
  s.unstable = dominant_transverse(H, z, T);
  s.stable = dominant_transverse(H, z, -T);
  const auto c = central_indices(H);
  s.central = Mat::Zero(2 * H.d, c.size());
  for (size_t j = 0; j < c.size(); ++j) s.central(c[j], j) = 1.0;
  return s;
}

}  // namespace detail

inline Splitting hyperbolic_splitting(const ModelHamiltonian& H, const PhasePoint& rho, double T = 6.0,
                                      double t0 = 0.5) {
  if (H.d_perp == 0) throw std::invalid_argument("hyperbolic_splitting: model has no transverse block");
  if (distance_to_K(H, rho.z()) > 1e-10) throw std::invalid_argument("hyperbolic_splitting: point off K");
  Splitting s = detail::splitting_core(H, rho, T);
  const FlowResult f = flow_map(H, rho.z(), t0);
  const Splitting s1 = detail::splitting_core(H, PhasePoint(f.z), T);
  s.invariance_residual = principal_angle(f.kappa * s.unstable, s1.unstable);
  const Mat all = (Mat(2 * H.d, 2 * H.d) << s.central, s.unstable, s.stable).finished();
  const double cond = all.jacobiSvd().singularValues().minCoeff();
  if (s.invariance_residual > 1e-2 || cond < 1e-8)
    throw NumericalError("degenerate hyperbolicity: splitting did not converge");
  return s;
}

// Linear symplectic F with F(T_rho K) = (x, xi)-plane, F(V^u) = y-plane, F(V^s) = eta-plane.
inline Mat adapted_frame_from_splitting(int d_par, const Splitting& s) {
  const int d = static_cast<int>(s.base.dim()), n = 2 * d, d_perp = d - d_par;
  const Mat J = symplectic_J(d);
  const Mat G = s.unstable.transpose() * J * s.stable;  // omega(u_i, s_j)
  const Mat Sn = s.stable * G.inverse().transpose();
  Mat Finv = Mat::Zero(n, n);
  for (int j = 0; j < d_par; ++j) {
    Finv.col(j) = s.central.col(j);
    Finv.col(d + j) = s.central.col(d_par + j);
  }
  for (int j = 0; j < d_perp; ++j) {
    Finv.col(d_par + j) = s.unstable.col(j);
    Finv.col(d + d_par + j) = Sn.col(j);
  }
  const Mat F = symplectic_reproject(Finv.inverse());
  if (symplectic_residual(F) > 1e-8) throw NumericalError("adapted frame is not symplectic");
  return F;
}

inline Mat adapted_frame_from_splitting(const ModelHamiltonian& H, const Splitting& s) {
  return adapted_frame_from_splitting(H.d_par, s);
}

inline Mat adapted_frame(const ModelHamiltonian& H, const PhasePoint& rho, double T = 6.0) {
  return adapted_frame_from_splitting(H, hyperbolic_splitting(H, rho, T));
}

// Model expressed in linear symplectic coordinates z' = F z: p'(z') = p(F^{-1} z').
inline ModelHamiltonian transform_model(const ModelHamiltonian& H, const Mat& F) {
  const Mat Finv = F.inverse();
  RealPoly p = H.symbol().substitute(Finv, Vec::Zero(2 * H.d));
  p.prune(1e-15);
  ModelHamiltonian out = ModelHamiltonian::from_symbol(H.name + "@adapted", H.d, H.d_par, p);
  out.params = H.params;
  return out;
}

// ---------------------------------------------------------------------------
// Isotropic manifold graphs y -> (x_bar(y), y, xi_bar(y), eta_bar(y)), d_perp = 1.

struct ManifoldGraph {
  UniformGrid1 grid;
  int d_par = 1;
  std::vector<Vec> x_bar, xi_bar;        // d_par-vectors per sample
  std::vector<double> eta_bar;
  std::vector<Vec> dx_bar, dxi_bar;      // tangents d/dy
  std::vector<double> deta_bar;
  std::vector<double> phi;
  std::vector<double> action;            // accumulated classical action per point
  double gamma1 = 10.0;                  // C^1 bound
  // Correspondence with the previous graph (empty for an initial graph).
  std::vector<double> y_prev;            // preimage y^0(y^1)
  std::vector<double> jac_y;             // dy^1/dy^0
  std::vector<Mat> kappa;                // Jacobian of the step at each sample
  bool inclination_warning = false;

  int size() const { return grid.n; }
  double y(int i) const { return grid.at(i); }

  // Phi = phi + xi_bar.x_bar/2 is a primitive of the Liouville form on the graph.
  double big_phi(int i) const { return phi[i] + 0.5 * xi_bar[i].dot(x_bar[i]); }

  Vec point(int i) const {
    const int d = d_par + 1;
    Vec z(2 * d);
    z.head(d_par) = x_bar[i];
    z(d_par) = y(i);
    z.segment(d, d_par) = xi_bar[i];
    z(d + d_par) = eta_bar[i];
    return z;
  }
  Vec tangent(int i) const {
    const int d = d_par + 1;
    Vec t(2 * d);
    t.head(d_par) = dx_bar[i];
    t(d_par) = 1.0;
    t.segment(d, d_par) = dxi_bar[i];
    t(d + d_par) = deta_bar[i];
    return t;
  }

  // Interpolated point, tangent and Phi at arbitrary y (cubic Hermite in value, cubic in tangent).
  struct Sample {
    Vec z, tangent;
    double Phi, action;
  };
  Sample sample(double yy) const {
    const int d = d_par + 1;
    Sample s;
    s.z = Vec(2 * d);
    s.tangent = Vec(2 * d);
    const auto xb = hermite(grid, x_bar, dx_bar, yy);
    const auto xib = hermite(grid, xi_bar, dxi_bar, yy);
    const double eb = hermite(grid, eta_bar, deta_bar, yy);
    s.z.head(d_par) = xb;
    s.z(d_par) = yy;
    s.z.segment(d, d_par) = xib;
    s.z(d + d_par) = eb;
    s.tangent.head(d_par) = cubic(grid, dx_bar, yy);
    s.tangent(d_par) = 1.0;
    s.tangent.segment(d, d_par) = cubic(grid, dxi_bar, yy);
    s.tangent(d + d_par) = cubic(grid, deta_bar, yy);
    // dPhi/dy = eta_bar + xi_bar . x_bar'
    std::vector<double> Phi(size()), dPhi(size());
    for (int i = 0; i < size(); ++i) {
      Phi[i] = big_phi(i);
      dPhi[i] = eta_bar[i] + xi_bar[i].dot(dx_bar[i]);
    }
    s.Phi = hermite(grid, Phi, dPhi, yy);
    s.action = cubic(grid, action, yy);
    return s;
  }

  double c1_norm() const {
    double m = 0.0;
    for (int i = 0; i < size(); ++i) {
      m = std::max({m, dx_bar[i].cwiseAbs().maxCoeff(), dxi_bar[i].cwiseAbs().maxCoeff(),
                    std::abs(deta_bar[i])});
    }
    return m;
  }
};

// Affine graph: x_bar = x0 + a y, xi_bar = xi0 + b y, eta_bar = eta0 + c y, with phi fixed by isotropy.
inline ManifoldGraph linear_graph(const UniformGrid1& grid, const Vec& x0, const Vec& a, const Vec& xi0,
                                  const Vec& b, double eta0, double c, double phi0 = 0.0) {
  ManifoldGraph g;
  g.grid = grid;
  g.d_par = static_cast<int>(x0.size());
  for (int i = 0; i < grid.n; ++i) {
    const double y = grid.at(i);
    g.x_bar.push_back(x0 + a * y);
    g.xi_bar.push_back(xi0 + b * y);
    g.eta_bar.push_back(eta0 + c * y);
    g.dx_bar.push_back(a);
    g.dxi_bar.push_back(b);
    g.deta_bar.push_back(c);
    // phi' = eta_bar - (xi_bar' . x_bar - xi_bar . x_bar')/2
    //      = eta0 + c y - (b.x0 - xi0.a)/2   (the y-linear parts cancel)
    g.phi.push_back(phi0 + (eta0 - 0.5 * (b.dot(x0) - xi0.dot(a))) * y + 0.5 * c * y * y);
    g.action.push_back(0.0);
  }
  return g;
}

// max |eta_bar - (phi' + (xi_bar'.x_bar - xi_bar.x_bar')/2)| with finite-difference derivatives.
inline double isotropy_residual(const ManifoldGraph& g, int trim = 2) {
  const int n = g.size();
  const double h = g.grid.dy;
  const auto dphi = fd_derivative(g.phi, h);
  double m = 0.0;
  std::vector<std::vector<double>> dx(g.d_par), dxi(g.d_par);
  for (int k = 0; k < g.d_par; ++k) {
    std::vector<double> xs(n), xis(n);
    for (int i = 0; i < n; ++i) {
      xs[i] = g.x_bar[i](k);
      xis[i] = g.xi_bar[i](k);
    }
    dx[k] = fd_derivative(xs, h);
    dxi[k] = fd_derivative(xis, h);
  }
  for (int i = trim; i < n - trim; ++i) {
    double r = dphi[i];
    for (int k = 0; k < g.d_par; ++k)
      r += 0.5 * (dxi[k][i] * g.x_bar[i](k) - g.xi_bar[i](k) * dx[k][i]);
    m = std::max(m, std::abs(g.eta_bar[i] - r));
  }
  return m;
}

struct GraphEvolveOptions {
  int samples = 0;            // samples of the new graph (0: keep)
  double window = 1e300;      // keep |y| <= window
  std::optional<std::pair<double, double>> domain;  // explicit new domain
  int newton_iterations = 4;
};

// One step of the graph flow: every new sample y^1 is traced back to y^0 by Newton iteration on
// y^0 -> y-component of Phi^{t0}(graph point), with tangents carried by the variational equation.
inline ManifoldGraph evolve_manifold_graph(const ModelHamiltonian& H, const ManifoldGraph& g, double t0,
                                           const GraphEvolveOptions& opt = {}) {
  if (H.d_perp != 1 || H.d_par != g.d_par) throw std::invalid_argument("graph evolution needs d_perp = 1");
  const int d = H.d;
  const int iy = g.d_par;
  const int n_old = g.size();
  // Forward images of the old samples: monotone y-map seeds.
  std::vector<double> y0s(n_old), y1s(n_old);
  for (int i = 0; i < n_old; ++i) {
    y0s[i] = g.y(i);
    y1s[i] = flow_map(H, g.point(i), t0, false).z(iy);
  }
  const bool increasing = y1s.back() > y1s.front();
  for (int i = 1; i < n_old; ++i)
    if ((y1s[i] - y1s[i - 1]) * (increasing ? 1 : -1) <= 0)
      throw ProjectabilityError("graph lost projectability: y-map not monotone");
  std::vector<double> ys = y1s, y0sorted = y0s;
  if (!increasing) {
    std::reverse(ys.begin(), ys.end());
    std::reverse(y0sorted.begin(), y0sorted.end());
  }
  double lo = ys.front(), hi = ys.back();
  if (opt.domain) {
    lo = std::max(lo, opt.domain->first);
    hi = std::min(hi, opt.domain->second);
  }
  lo = std::max(lo, -opt.window);
  hi = std::min(hi, opt.window);
  if (!(hi > lo)) throw ProjectabilityError("empty image domain");

  ManifoldGraph out;
  out.d_par = g.d_par;
  out.gamma1 = g.gamma1;
  const int n = opt.samples > 0 ? opt.samples : n_old;
  out.grid = UniformGrid1{lo, (hi - lo) / (n - 1), n};
  for (int j = 0; j < n; ++j) {
    const double target = out.grid.at(j);
    double y0 = interp_monotone(ys, y0sorted, target);
    FlowResult f;
    ManifoldGraph::Sample s;
    double jac = 0.0;
    for (int it = 0; it < opt.newton_iterations; ++it) {
      y0 = std::clamp(y0, g.grid.y0, g.grid.back());
      s = g.sample(y0);
      f = flow_map(H, s.z, t0);
      jac = (f.kappa * s.tangent)(iy);
      if (std::abs(jac) < 1e-6) throw ProjectabilityError("y-map Jacobian below 1e-6");
      const double r = f.z(iy) - target;
      if (std::abs(r) < 1e-14 * (1 + std::abs(target))) break;
      y0 -= r / jac;
      if (it == opt.newton_iterations - 1) {
        s = g.sample(std::clamp(y0, g.grid.y0, g.grid.back()));
        f = flow_map(H, s.z, t0);
        jac = (f.kappa * s.tangent)(iy);
      }
    }
    const Vec tan1 = f.kappa * s.tangent / jac;
    out.x_bar.push_back(f.z.head(g.d_par));
    out.xi_bar.push_back(f.z.segment(d, g.d_par));
    out.eta_bar.push_back(f.z(d + iy));
    out.dx_bar.push_back(tan1.head(g.d_par));
    out.dxi_bar.push_back(tan1.segment(d, g.d_par));
    out.deta_bar.push_back(tan1(d + iy));
    const double Phi1 = s.Phi + f.action;
    out.phi.push_back(Phi1 - 0.5 * out.xi_bar.back().dot(out.x_bar.back()));
    out.action.push_back(s.action + f.action);
    out.y_prev.push_back(y0);
    out.jac_y.push_back(jac);
    out.kappa.push_back(f.kappa);
  }
  out.inclination_warning = out.c1_norm() > out.gamma1;
  return out;
}

// Per-sample |det dy_before/dy_after| from finite differences of the stored preimages.
inline std::vector<double> back_map_determinant(const ManifoldGraph& before, const ManifoldGraph& after) {
  if (after.y_prev.size() != static_cast<size_t>(after.size()))
    throw std::invalid_argument("back_map_determinant: no stored correspondence");
  for (double y0 : after.y_prev)
    if (!before.grid.contains(y0, 1e-6)) throw std::invalid_argument("back_map_determinant: unmatched grids");
  const auto d = fd_derivative(after.y_prev, after.grid.dy);
  std::vector<double> out(d.size());
  for (size_t i = 0; i < d.size(); ++i) out[i] = std::abs(d[i]);
  return out;
}

// Identity step: graph with itself as predecessor.
inline ManifoldGraph with_identity_correspondence(ManifoldGraph g) {
  g.y_prev.clear();
  g.jac_y.assign(g.size(), 1.0);
  for (int i = 0; i < g.size(); ++i) g.y_prev.push_back(g.y(i));
  return g;
}

// ---------------------------------------------------------------------------
// Shadowing diagnostics

struct ShadowRow {
  int n = 0;
  Vec qx, qy, px, py;       // coordinates of rho^n in the adapted frame at rho_tilde^n
  double jacobian_diff = 0.0;
  double envelope = 0.0;    // (1 + eps1) e^{(lambda_c + 2 eps2/3) n t0} h^tau
  double jac_envelope = 0.0;
  bool pass = true;
};

struct ShadowOptions {
  double h = 1e-3;
  double tau = 0.25;
  double eps1 = 0.1;
  double eps2 = 0.1;
  double neighborhood = 0.5;
};

struct ShadowReport {
  std::vector<ShadowRow> rows;
  double lambda_c = 0.0;
  double lambda_max = 0.0;
  double fitted_C = 0.0;  // Jacobian-difference constant fitted at the first step
  bool all_pass = true;
};

inline ShadowReport shadow_deviation(const ModelHamiltonian& H, const PhasePoint& rho, const PhasePoint& rho_tilde,
                                     int n, double t0, const ShadowOptions& o = {}) {
  if (distance_to_K(H, rho_tilde.z()) > 1e-10) throw std::invalid_argument("shadow_deviation: rho_tilde off K");
  const double ht = std::pow(o.h, o.tau);
  if ((rho.z() - rho_tilde.z()).norm() > ht * (1 + 1e-9))
    throw std::invalid_argument("shadow_deviation: d(rho, rho_tilde) > h^tau");
  ShadowReport rep;
  const auto Ks = std::vector<PhasePoint>{rho_tilde};
  const double tm = std::max(1.0, n * t0);
  const double sc = central_growth(H, Ks, tm);
  rep.lambda_c = std::max(0.0, std::log(sc) / tm);
  rep.lambda_max = lyapunov_max(H, Ks, tm, std::min(1.0, tm)).lambda_max;
  const int d = H.d;
  Vec z = rho.z(), zt = rho_tilde.z();
  Mat K = Mat::Identity(2 * d, 2 * d), Kt = K;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) {
      const FlowResult f = flow_map(H, z, t0), ft = flow_map(H, zt, t0);
      z = f.z;
      zt = ft.z;
      K = f.kappa * K;
      Kt = ft.kappa * Kt;
    }
    if ((z - zt).norm() > o.neighborhood) throw NumericalError("shadow_deviation: iterate left the neighborhood");
    const Mat F = adapted_frame(H, PhasePoint(zt));
    const Vec c = F * (z - zt);
    ShadowRow r;
    r.n = k;
    r.qx = c.head(H.d_par);
    r.qy = c.segment(H.d_par, H.d_perp);
    r.px = c.segment(d, H.d_par);
    r.py = c.segment(d + H.d_par, H.d_perp);
    r.jacobian_diff = (Kt - K).norm();
    r.envelope = (1 + o.eps1) * std::exp((rep.lambda_c + 2 * o.eps2 / 3) * k * t0) * ht;
    r.jac_envelope = std::exp(k * t0 * (rep.lambda_max + 2 * o.eps2 / 3)) *
                     std::exp(k * t0 * (rep.lambda_c + o.eps2 / 3)) * ht;
    rep.rows.push_back(r);
  }
  // Fit the Jacobian-difference constant on the first nontrivial row, then check the envelope shape.
  if (rep.rows.size() > 1) rep.fitted_C = rep.rows[1].jacobian_diff / rep.rows[1].jac_envelope * (1 + o.eps1);
  for (auto& r : rep.rows) {
    const double m = std::max({r.qx.cwiseAbs().maxCoeff(), r.px.cwiseAbs().maxCoeff(),
                               r.py.size() ? r.py.cwiseAbs().maxCoeff() : 0.0});
    r.pass = m <= r.envelope && r.jacobian_diff <= rep.fitted_C * r.jac_envelope * (1 + 1e-9) + 1e-14;
    rep.all_pass = rep.all_pass && r.pass;
  }
  return rep;
}

}  // namespace semiclassical
