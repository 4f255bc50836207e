#pragma once

#include "semiclassical/fft.hpp"
#include "semiclassical/polynomial.hpp"
#include "semiclassical/types.hpp"

#include <Eigen/Eigenvalues>

#include <functional>
#include <vector>

namespace semiclassical {

// ---------------------------------------------------------------------------
// Grids

struct GridAxis {
  double origin = 0.0;
  double spacing = 1.0;
  int count = 0;

  double at(int i) const { return origin + i * spacing; }
  double extent() const { return spacing * count; }
  bool operator==(const GridAxis& o) const {
    return origin == o.origin && spacing == o.spacing && count == o.count;
  }
};

inline GridAxis centered_axis(double center, double half_width, int count) {
  const double dx = 2 * half_width / count;
  return GridAxis{center - half_width, dx, count};
}

// Complex samples on a tensor grid, axis 0 slowest.
struct GridWavefunction {
  double hbar = 1.0;
  std::vector<GridAxis> axes;
  CVec values;

  GridWavefunction() = default;
  GridWavefunction(double h, std::vector<GridAxis> ax) : hbar(h), axes(std::move(ax)) {
    values = CVec::Zero(static_cast<Eigen::Index>(size()));
  }

  int dim() const { return static_cast<int>(axes.size()); }
  size_t size() const {
    size_t s = 1;
    for (const auto& a : axes) s *= static_cast<size_t>(a.count);
    return s;
  }
  std::vector<int> dims() const {
    std::vector<int> d;
    for (const auto& a : axes) d.push_back(a.count);
    return d;
  }
  double cell() const {
    double c = 1.0;
    for (const auto& a : axes) c *= a.spacing;
    return c;
  }
  std::vector<int> index(size_t flat) const {
    std::vector<int> idx(axes.size());
    for (int k = dim() - 1; k >= 0; --k) {
      idx[k] = static_cast<int>(flat % axes[k].count);
      flat /= axes[k].count;
    }
    return idx;
  }
  Vec coordinate(size_t flat) const {
    const auto idx = index(flat);
    Vec x(dim());
    for (int k = 0; k < dim(); ++k) x(k) = axes[k].at(idx[k]);
    return x;
  }
  bool same_grid(const GridWavefunction& o) const { return hbar == o.hbar && axes == o.axes; }

  double norm() const { return std::sqrt(values.squaredNorm() * cell()); }

  // Largest magnitude on the boundary hyper-faces relative to the interior maximum.
  double boundary_ratio() const {
    double bmax = 0.0, imax = 0.0;
    for (size_t f = 0; f < size(); ++f) {
      const auto idx = index(f);
      const double a = std::abs(values(static_cast<Eigen::Index>(f)));
      bool edge = false;
      for (int k = 0; k < dim(); ++k) edge = edge || idx[k] == 0 || idx[k] == axes[k].count - 1;
      if (edge)
        bmax = std::max(bmax, a);
      else
        imax = std::max(imax, a);
    }
    return imax > 0 ? bmax / imax : 0.0;
  }
};

// ⟨a, b⟩ = Σ a · conj(b) · dV  (linear in the first slot).
inline Complex inner_product(const GridWavefunction& a, const GridWavefunction& b) {
  if (!a.same_grid(b)) throw std::invalid_argument("inner_product: axis or hbar mismatch");
  Complex s = 0.0;
  for (Eigen::Index i = 0; i < a.values.size(); ++i) s += a.values(i) * std::conj(b.values(i));
  return s * a.cell();
}

// ---------------------------------------------------------------------------
// Siegel matrices and frames

inline Mat sym_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}
inline Mat sym_inv_sqrt(const Mat& A) {
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (A + A.transpose()));
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

struct SiegelMatrix {
  CMat gamma;

  SiegelMatrix() = default;
  explicit SiegelMatrix(CMat g) : gamma(std::move(g)) {}
  static SiegelMatrix identity(int d) { return SiegelMatrix(I1 * CMat::Identity(d, d)); }

  int dim() const { return static_cast<int>(gamma.rows()); }
  Mat im() const { return gamma.imag(); }
  Mat re() const { return gamma.real(); }
  double symmetry_residual() const { return (gamma - gamma.transpose()).norm(); }
  double min_im_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (im() + im().transpose()));
    return es.eigenvalues().minCoeff();
  }
  bool valid(double tol = 1e-10) const { return symmetry_residual() < tol && min_im_eigenvalue() > 0; }
  void validate() const {
    if (!valid()) throw InvariantError("not a Siegel matrix (symmetric with Im positive definite)");
  }
};

// Frame (M, N) = (A + iB, C + iD) with Gamma = N M^{-1}.
struct HagedornFrame {
  CMat M;
  CMat N;

  static HagedornFrame standard(int d) { return {CMat::Identity(d, d), I1 * CMat::Identity(d, d)}; }
  // Normal frame of Gamma: M = Im(Gamma)^{-1/2} real symmetric, N = Gamma M.
  static HagedornFrame normal(const SiegelMatrix& g) {
    const Mat s = sym_inv_sqrt(g.im());
    return {s.cast<Complex>(), g.gamma * s.cast<Complex>()};
  }

  int dim() const { return static_cast<int>(M.rows()); }
  SiegelMatrix gamma() const {
    CMat G = N * M.inverse();
    return SiegelMatrix(0.5 * (G + G.transpose()));
  }
  // M^* N - N^* M - 2i I
  double complex_symplectic_residual() const {
    const int d = dim();
    return (M.adjoint() * N - N.adjoint() * M - 2.0 * I1 * CMat::Identity(d, d)).norm();
  }
  double symmetry_residual() const {
    const CMat S = M.transpose() * N;
    return (S - S.transpose()).norm();
  }
  // Im Gamma - conj(M)^{-T} M^{-1}
  double im_gamma_residual() const {
    const CMat Mi = M.inverse();
    const CMat rhs = Mi.conjugate().transpose() * Mi;
    return (gamma().gamma.imag().cast<Complex>() - rhs).norm();
  }
  // Real 2d x 2d symplectic matrix mapping the standard frame (I, iI) to this frame.
  Mat symplectic() const {
    const int d = dim();
    Mat k(2 * d, 2 * d);
    k << M.real(), M.imag(), N.real(), N.imag();
    return k;
  }
};

// ---------------------------------------------------------------------------
// Wavepackets

// e^{i phase} T(q, p) [ (pi hbar)^{-d/4} |det Im G|^{1/4} P(Im(G)^{1/2} x / sqrt(hbar)) exp(i x.Gx/(2 hbar)) ]
// with G = N M^{-1}; P uses the monomial basis in the normalized variable u.
struct GaussianWavepacket {
  double hbar = 1.0;
  PhasePoint center;
  HagedornFrame frame;
  ComplexPoly poly;
  double phase = 0.0;

  int dim() const { return center.dim(); }
  SiegelMatrix gamma() const { return frame.gamma(); }

  static GaussianWavepacket coherent(double hbar, const PhasePoint& c) {
    const int d = c.dim();
    return {hbar, c, HagedornFrame::standard(d), ComplexPoly::constant(d, 1.0), 0.0};
  }
  static GaussianWavepacket squeezed(double hbar, const PhasePoint& c, const SiegelMatrix& g) {
    return {hbar, c, HagedornFrame::normal(g), ComplexPoly::constant(c.dim(), 1.0), 0.0};
  }
};

// Pointwise evaluation functor (precomputes the Siegel data).
class WavepacketEvaluator {
 public:
  explicit WavepacketEvaluator(const GaussianWavepacket& s) : s_(s) {
    const int d = s.dim();
    const SiegelMatrix g = s.gamma();
    G_ = g.gamma;
    const Mat im = g.im();
    S_ = sym_sqrt(im) / std::sqrt(s.hbar);
    norm_ = std::pow(pi * s.hbar, -0.25 * d) * std::pow(std::abs(im.determinant()), 0.25);
  }
  Complex operator()(const Vec& x) const {
    const double h = s_.hbar;
    const Vec& q = s_.center.q;
    const Vec& p = s_.center.p;
    const Vec y = x - q;
    const Vec u = S_ * y;
    const CVec yc = y.cast<Complex>();
    const Complex quad = (yc.transpose() * G_ * yc)(0, 0);
    const Complex poly = s_.poly(u);
    const double lin = -q.dot(p) / (2 * h) + p.dot(x) / h + s_.phase;
    return norm_ * poly * std::exp(I1 * quad / (2 * h) + I1 * lin);
  }

 private:
  const GaussianWavepacket& s_;
  CMat G_;
  Mat S_;
  double norm_ = 1.0;
};

struct EvalOptions {
  bool check_boundary = true;
  double boundary_tol = 1e-12;
};

inline GridWavefunction eval_wavepacket(const GaussianWavepacket& s, const std::vector<GridAxis>& axes,
                                        const EvalOptions& opt = {}) {
  if (static_cast<int>(axes.size()) != s.dim()) throw std::invalid_argument("eval_wavepacket: dimension mismatch");
  GridWavefunction u(s.hbar, axes);
  const WavepacketEvaluator ev(s);
  for (size_t f = 0; f < u.size(); ++f) u.values(static_cast<Eigen::Index>(f)) = ev(u.coordinate(f));
  if (opt.check_boundary && u.boundary_ratio() > opt.boundary_tol)
    throw CoverageError("eval_wavepacket: grid too small (boundary ratio " + std::to_string(u.boundary_ratio()) + ")");
  return u;
}

// Position and momentum spreads sqrt(hbar)|Im G^{-1/2}| and sqrt(hbar)|G Im G^{-1/2}|.
inline std::pair<double, double> wavepacket_spreads(const GaussianWavepacket& s) {
  const SiegelMatrix g = s.gamma();
  const Mat r = sym_inv_sqrt(g.im());
  const double sx = std::sqrt(s.hbar) * r.jacobiSvd().singularValues()(0);
  const CMat pm = g.gamma * r.cast<Complex>();
  const double sp = std::sqrt(s.hbar) * pm.jacobiSvd().singularValues()(0);
  return {sx, sp};
}

// Grid covering the state: half-width `width` spreads around q, spacing resolving the momentum range.
inline std::vector<GridAxis> default_axes(const GaussianWavepacket& s, double width = 9.0, int max_pow2 = 14) {
  auto [sx, sp] = wavepacket_spreads(s);
  const double grow = 1.0 + 0.3 * s.poly.degree();
  std::vector<GridAxis> axes;
  for (int k = 0; k < s.dim(); ++k) {
    const double half = width * grow * sx;
    const double pmax = std::abs(s.center.p(k)) + width * grow * sp;
    const double dx_need = std::min(sx / 6, 0.9 * pi * s.hbar / pmax);
    int n = 16;
    while (2 * half / n > dx_need && n < (1 << max_pow2)) n *= 2;
    axes.push_back(centered_axis(s.center.q(k), half, n));
  }
  return axes;
}

// ---------------------------------------------------------------------------
// Phase-space translations

inline GridWavefunction weyl_heisenberg(const Vec& q, const Vec& p, const GridWavefunction& u,
                                        double coverage_tol = 1e-8) {
  const int d = u.dim();
  GridWavefunction out = u;
  const double h = u.hbar;
  if (q.cwiseAbs().maxCoeff() > 0) {
    const FFTPlan fwd(u.dims(), FFTW_FORWARD), bwd(u.dims(), FFTW_BACKWARD);
    std::vector<Vec> ks;
    for (const auto& a : u.axes) ks.push_back(fft_wavenumbers(a.count, a.spacing));
    fwd.execute(out.values);
    for (size_t f = 0; f < out.size(); ++f) {
      const auto idx = out.index(f);
      double ph = 0.0;
      for (int k = 0; k < d; ++k) ph -= ks[k](idx[k]) * q(k);
      out.values(static_cast<Eigen::Index>(f)) *= std::polar(1.0 / out.size(), ph);
    }
    bwd.execute(out.values);
    if (u.boundary_ratio() < coverage_tol && out.boundary_ratio() > std::max(coverage_tol, 10 * u.boundary_ratio()))
      throw CoverageError("weyl_heisenberg: translation pushes support off the grid");
  }
  for (size_t f = 0; f < out.size(); ++f) {
    const Vec x = out.coordinate(f);
    out.values(static_cast<Eigen::Index>(f)) *= std::polar(1.0, -q.dot(p) / (2 * h) + p.dot(x) / h);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Spectral derivatives and weighted norms

// (hbar d/dx_axis)^m u computed spectrally.
inline GridWavefunction spectral_derivative(const GridWavefunction& u, int axis, int m) {
  GridWavefunction out = u;
  if (m == 0) return out;
  const FFTPlan fwd(u.dims(), FFTW_FORWARD), bwd(u.dims(), FFTW_BACKWARD);
  const Vec k = fft_wavenumbers(u.axes[axis].count, u.axes[axis].spacing);
  fwd.execute(out.values);
  for (size_t f = 0; f < out.size(); ++f) {
    const int i = out.index(f)[axis];
    out.values(static_cast<Eigen::Index>(f)) *= std::pow(I1 * u.hbar * k(i), m) / double(out.size());
  }
  bwd.execute(out.values);
  return out;
}

// Fraction of spectral energy in the outer eighth of the wavenumber range.
inline double spectral_tail(const GridWavefunction& u) {
  CVec v = u.values;
  const FFTPlan fwd(u.dims(), FFTW_FORWARD);
  fwd.execute(v);
  double tail = 0, total = 0;
  for (size_t f = 0; f < u.size(); ++f) {
    const auto idx = u.index(f);
    bool outer = false;
    for (int k = 0; k < u.dim(); ++k) {
      const int n = u.axes[k].count;
      const int mm = idx[k] < (n + 1) / 2 ? idx[k] : n - idx[k];
      outer = outer || mm > 3 * n / 8;
    }
    const double e = std::norm(v(static_cast<Eigen::Index>(f)));
    total += e;
    if (outer) tail += e;
  }
  return total > 0 ? tail / total : 0.0;
}

// sup over |a| + |b| <= K of |x^a (hbar d)^b u|.
inline double weighted_sobolev_norm(const GridWavefunction& u, int K) {
  if (K < 0 || K > 6) throw std::invalid_argument("weighted_sobolev_norm: K must be in 0..6");
  if (spectral_tail(u) > 1e-8) throw NumericalError("weighted_sobolev_norm: aliasing detected");
  const int d = u.dim();
  double best = 0.0;
  for (int total = 0; total <= K; ++total) {
    for (const auto& ab : multi_indices_of_order(2 * d, total)) {
      GridWavefunction w = u;
      for (int k = 0; k < d; ++k) w = spectral_derivative(w, k, ab[d + k]);
      for (size_t f = 0; f < w.size(); ++f) {
        const Vec x = w.coordinate(f);
        double m = 1.0;
        for (int k = 0; k < d; ++k) m *= std::pow(x(k), ab[k]);
        w.values(static_cast<Eigen::Index>(f)) *= m;
      }
      best = std::max(best, w.norm());
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Fourier-Bargmann transform

struct PhaseSpaceGrid {
  std::vector<GridAxis> q;
  std::vector<GridAxis> p;

  size_t size() const {
    size_t s = 1;
    for (const auto& a : q) s *= a.count;
    for (const auto& a : p) s *= a.count;
    return s;
  }
  double cell() const {
    double c = 1.0;
    for (const auto& a : q) c *= a.spacing;
    for (const auto& a : p) c *= a.spacing;
    return c;
  }
  // Point number f as (q, p); q-axes slowest.
  std::pair<Vec, Vec> point(size_t f) const {
    const int d = static_cast<int>(q.size());
    Vec qq(d), pp(d);
    for (int k = d - 1; k >= 0; --k) {
      pp(k) = p[k].at(static_cast<int>(f % p[k].count));
      f /= p[k].count;
    }
    for (int k = d - 1; k >= 0; --k) {
      qq(k) = q[k].at(static_cast<int>(f % q[k].count));
      f /= q[k].count;
    }
    return {qq, pp};
  }
  bool on_boundary(size_t f) const {
    const int d = static_cast<int>(q.size());
    bool edge = false;
    for (int k = d - 1; k >= 0; --k) {
      const int i = static_cast<int>(f % p[k].count);
      f /= p[k].count;
      edge = edge || i == 0 || i == p[k].count - 1;
    }
    for (int k = d - 1; k >= 0; --k) {
      const int i = static_cast<int>(f % q[k].count);
      f /= q[k].count;
      edge = edge || i == 0 || i == q[k].count - 1;
    }
    return edge;
  }
};

// Square phase-space window of half-width r (in each of q, p) around (q0, p0) at spacing <= sqrt(hbar)/2.
inline PhaseSpaceGrid phase_space_grid(double hbar, const Vec& q0, const Vec& p0, double r, double ratio = 0.5) {
  PhaseSpaceGrid g;
  const double step = ratio * std::sqrt(hbar);
  const int n = static_cast<int>(std::ceil(2 * r / step)) + 1;
  for (int k = 0; k < q0.size(); ++k) {
    g.q.push_back(GridAxis{q0(k) - r, 2 * r / (n - 1), n});
    g.p.push_back(GridAxis{p0(k) - r, 2 * r / (n - 1), n});
  }
  return g;
}

namespace detail {

inline void check_resolution(const PhaseSpaceGrid& g, double hbar) {
  for (const auto& a : g.q)
    if (a.spacing > 0.5 * std::sqrt(hbar) * (1 + 1e-9)) throw CoverageError("phase-space grid coarser than sqrt(hbar)/2");
  for (const auto& a : g.p)
    if (a.spacing > 0.5 * std::sqrt(hbar) * (1 + 1e-9)) throw CoverageError("phase-space grid coarser than sqrt(hbar)/2");
}

// Coherent state phi_rho = T(rho) phi_0 sampled on the grid of u.
inline CVec coherent_samples(const GridWavefunction& u, const Vec& q, const Vec& p) {
  const double h = u.hbar;
  const int d = u.dim();
  CVec v(static_cast<Eigen::Index>(u.size()));
  const double nrm = std::pow(pi * h, -0.25 * d);
  for (size_t f = 0; f < u.size(); ++f) {
    const Vec x = u.coordinate(f);
    const Vec y = x - q;
    v(static_cast<Eigen::Index>(f)) =
        nrm * std::exp(-y.squaredNorm() / (2 * h) + I1 * (p.dot(x) / h - q.dot(p) / (2 * h)));
  }
  return v;
}

}  // namespace detail

// u#(rho) = (2 pi hbar)^{-d/2} ⟨u, phi_rho⟩.
inline CVec fourier_bargmann(const GridWavefunction& u, const PhaseSpaceGrid& g, bool check_coverage = true) {
  detail::check_resolution(g, u.hbar);
  const int d = u.dim();
  const double pref = std::pow(2 * pi * u.hbar, -0.5 * d);
  CVec out(static_cast<Eigen::Index>(g.size()));
  double mx = 0.0, edge = 0.0;
  for (size_t f = 0; f < g.size(); ++f) {
    auto [q, p] = g.point(f);
    const CVec phi = detail::coherent_samples(u, q, p);
    const Complex v = pref * (u.values.array() * phi.conjugate().array()).sum() * u.cell();
    out(static_cast<Eigen::Index>(f)) = v;
    mx = std::max(mx, std::abs(v));
    if (g.on_boundary(f)) edge = std::max(edge, std::abs(v));
  }
  if (check_coverage && mx > 0 && edge > 1e-4 * mx)
    throw CoverageError("fourier_bargmann: phase-space grid does not cover the state");
  return out;
}

inline double bargmann_norm(const CVec& us, const PhaseSpaceGrid& g) {
  return std::sqrt(us.squaredNorm() * g.cell());
}

// u = (2 pi hbar)^{-d/2} ∫ u#(rho) phi_rho drho by trapezoid quadrature.
inline GridWavefunction reconstruct_from_bargmann(const CVec& us, const PhaseSpaceGrid& g,
                                                  const GridWavefunction& like) {
  detail::check_resolution(g, like.hbar);
  if (static_cast<size_t>(us.size()) != g.size()) throw std::invalid_argument("reconstruct: sample count mismatch");
  GridWavefunction out(like.hbar, like.axes);
  const int d = like.dim();
  const double pref = std::pow(2 * pi * like.hbar, -0.5 * d) * g.cell();
  for (size_t f = 0; f < g.size(); ++f) {
    const Complex c = us(static_cast<Eigen::Index>(f));
    if (c == Complex(0)) continue;
    auto [q, p] = g.point(f);
    out.values += (pref * c) * detail::coherent_samples(like, q, p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ladder operators in the standard frame.
// Physicists' Hermite convention H_0 = 1, H_1(u) = 2u, H_{n+1} = 2u H_n - 2n H_{n-1};
// a†_j acts on P(u) Psi_0 as P -> (2 u_j P - dP/du_j) / sqrt(2).

inline ComplexPoly raise_poly(const ComplexPoly& P, int j) {
  ComplexPoly r = P.times_variable(j) * Complex(2.0);
  r -= P.derivative(j);
  return r * Complex(1.0 / std::sqrt(2.0));
}
inline ComplexPoly lower_poly(const ComplexPoly& P, int j) {
  return P.derivative(j) * Complex(1.0 / std::sqrt(2.0));
}

inline GaussianWavepacket apply_creation(int j, const GaussianWavepacket& s) {
  const int d = s.dim();
  if (j < 0 || j >= d) throw std::invalid_argument("apply_creation: axis out of range");
  const SiegelMatrix g = s.gamma();
  if ((g.gamma - I1 * CMat::Identity(d, d)).norm() > 1e-10)
    throw std::invalid_argument("apply_creation: requires the standard frame Gamma = iI");
  GaussianWavepacket out = s;
  out.poly = raise_poly(s.poly, j);
  return out;
}

// Normalized physicists' Hermite function polynomial h_n(u) = H_n(u)/sqrt(2^n n!).
inline ComplexPoly hermite_poly(int n) {
  ComplexPoly p = ComplexPoly::constant(1, 1.0);
  for (int k = 0; k < n; ++k) p = raise_poly(p, 0) * Complex(1.0 / std::sqrt(k + 1.0));
  return p;
}

}  // namespace semiclassical
