#pragma once

#include "semiclassical/fft.hpp"
#include "semiclassical/gaussian_states.hpp"

#include <random>

namespace semiclassical {

struct SymplecticBlocks {
  Mat A, B, C, D;
};

inline SymplecticBlocks blocks(const Mat& k) {
  const auto d = k.rows() / 2;
  return {k.topLeftCorner(d, d), k.topRightCorner(d, d), k.bottomLeftCorner(d, d), k.bottomRightCorner(d, d)};
}

inline void require_symplectic(const Mat& k, double tol = 1e-8) {
  if (k.rows() != k.cols() || k.rows() % 2) throw std::invalid_argument("symplectic matrix must be 2d x 2d");
  const double r = symplectic_residual(k);
  if (r > tol * std::max(1.0, k.squaredNorm())) throw InvariantError("matrix is not symplectic (residual " + std::to_string(r) + ")");
}

inline constexpr double caustic_tol = 1e-12;

// Frame (M, N) advanced by kappa.
inline HagedornFrame advance_frame(const Mat& k, const HagedornFrame& f) {
  const auto [A, B, C, D] = blocks(k);
  HagedornFrame out{A.cast<Complex>() * f.M + B.cast<Complex>() * f.N, C.cast<Complex>() * f.M + D.cast<Complex>() * f.N};
  if (std::abs(out.M.determinant()) < caustic_tol) throw CausticError("det M vanishes");
  return out;
}

inline HagedornFrame frame_from_symplectic(const Mat& k, const SiegelMatrix& g0) {
  require_symplectic(k);
  g0.validate();
  return advance_frame(k, HagedornFrame::normal(g0));
}

inline SiegelMatrix siegel_action(const Mat& k, const SiegelMatrix& g0) {
  const auto [A, B, C, D] = blocks(k);
#ifdef SEMICLASSICAL_MUTATE_SIEGEL_SIGN
  const CMat num = -C.cast<Complex>() + D.cast<Complex>() * g0.gamma;
#else
  const CMat num = C.cast<Complex>() + D.cast<Complex>() * g0.gamma;
#endif
  const CMat den = A.cast<Complex>() + B.cast<Complex>() * g0.gamma;
  const Eigen::PartialPivLU<CMat> lu(den);
  if (std::abs(lu.determinant()) < caustic_tol) throw CausticError("A + B Gamma is singular");
  // G = num den^{-1}  <=>  den^T G^T = num^T
  const CMat Gt = den.transpose().partialPivLu().solve(num.transpose());
  const CMat G = Gt.transpose();
  return SiegelMatrix(0.5 * (G + G.transpose()));
}

inline double trace_identity_residual(const HagedornFrame& f) {
  const SiegelMatrix g = f.gamma();
  const CMat lhs = g.gamma * sym_inv_sqrt(g.im()).cast<Complex>();
  return std::abs(lhs.squaredNorm() - f.N.squaredNorm());
}

// ---------------------------------------------------------------------------
// Random symplectic matrices from generator products.

inline Mat lower_shear(const Mat& Q) {
  const auto d = Q.rows();
  Mat k = Mat::Identity(2 * d, 2 * d);
  k.bottomLeftCorner(d, d) = Q;
  return k;
}
inline Mat upper_shear(const Mat& P) {
  const auto d = P.rows();
  Mat k = Mat::Identity(2 * d, 2 * d);
  k.topRightCorner(d, d) = P;
  return k;
}
inline Mat block_scaling(const Mat& A) {
  const auto d = A.rows();
  Mat k = Mat::Zero(2 * d, 2 * d);
  k.topLeftCorner(d, d) = A;
  k.bottomRightCorner(d, d) = A.inverse().transpose();
  return k;
}

inline Mat random_symplectic(int d, std::mt19937_64& rng, double scale = 0.7) {
  std::normal_distribution<double> nd(0.0, scale);
  auto sym = [&] {
    Mat S(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) S(i, j) = S(j, i) = nd(rng);
    return S;
  };
  Mat G(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) G(i, j) = nd(rng);
  const Mat O = Eigen::HouseholderQR<Mat>(G).householderQ();
  Vec sv(d);
  for (int i = 0; i < d; ++i) sv(i) = std::exp(0.5 * nd(rng));
  const Mat A = O * sv.asDiagonal();
  return lower_shear(sym()) * block_scaling(A) * upper_shear(sym()) * lower_shear(0.5 * sym());
}

// Polar form kappa = P O with P symmetric positive definite and O orthogonal, both symplectic.
inline std::pair<Mat, Mat> symplectic_polar(const Mat& k) {
  const Mat P = sym_sqrt(k * k.transpose());
  return {P, P.inverse() * k};
}

// Symplectic matrix of the normal frame of Gamma: (I, iI) -> (Im G^{-1/2}, G Im G^{-1/2}).
inline Mat normal_symplectic(const SiegelMatrix& g) {
  return HagedornFrame::normal(g).symplectic();
}

// ---------------------------------------------------------------------------
// Excited-state transport.
//
// A normal-form state P(u) Psi_0 is rewritten as F(a†) Psi_0; under an orthogonal
// symplectic rotation with unitary U the creation operators mix as a† -> conj(U)^T a†.

namespace detail {

// (a†)^n 1 in one variable.
inline std::vector<ComplexPoly> raised_1d(int nmax) {
  std::vector<ComplexPoly> out{ComplexPoly::constant(1, 1.0)};
  for (int n = 1; n <= nmax; ++n) out.push_back(raise_poly(out.back(), 0));
  return out;
}

inline ComplexPoly raised(const MultiIndex& a, const std::vector<ComplexPoly>& table) {
  const int d = static_cast<int>(a.size());
  ComplexPoly r = ComplexPoly::constant(d, 1.0);
  for (int j = 0; j < d; ++j) {
    if (a[j] == 0) continue;
    ComplexPoly f(d);
    for (const auto& [b, v] : table[a[j]].coeffs()) {
      MultiIndex e(d, 0);
      e[j] = b[0];
      f.add(e, v);
    }
    r = r * f;
  }
  return r;
}

}  // namespace detail

// Coefficients f with P(u) Psi_0 = F(a†) Psi_0 (F stored as a polynomial in w).
inline ComplexPoly to_creation_basis(const ComplexPoly& P) {
  const int d = P.nvars();
  const int deg = P.degree();
  const auto table = detail::raised_1d(deg);
  ComplexPoly rest = P;
  ComplexPoly F(d);
  for (int k = deg; k >= 0; --k) {
    for (const auto& a : multi_indices_of_order(d, k)) {
      const Complex c = rest.coeff(a);
      if (c == Complex(0)) continue;
      const Complex f = c / std::pow(2.0, 0.5 * k);
      F.add(a, f);
      rest -= detail::raised(a, table) * f;
    }
  }
  return F;
}

inline ComplexPoly from_creation_basis(const ComplexPoly& F) {
  const int d = F.nvars();
  const auto table = detail::raised_1d(F.degree());
  ComplexPoly P(d);
  for (const auto& [a, f] : F.coeffs()) P += detail::raised(a, table) * f;
  return P;
}

// Rotate the normal-form polynomial by the unitary U of an orthogonal symplectic map.
inline ComplexPoly rotate_normal_poly(const ComplexPoly& P, const CMat& U) {
  if (P.degree() == 0) return P;
  const ComplexPoly F = to_creation_basis(P);
  const CMat W = U.conjugate().transpose();
  const ComplexPoly G = F.substitute(W, CVec::Zero(U.rows()));
  ComplexPoly out = from_creation_basis(G);
  out.prune(1e-15);
  return out;
}

struct TransportResult {
  GaussianWavepacket state;
  CMat U;              // unitary re-expressing the rotated normal frame
  Complex det_factor;  // det(A + B Gamma_0)
};

// Metaplectic transport about the center: phase is advanced by -arg det(A + B Gamma_0)/2
// on the principal branch (continuation along paths is the caller's job).
inline TransportResult transport_excited_detail(const Mat& k, const GaussianWavepacket& s) {
  require_symplectic(k);
  const auto [A, B, C, D] = blocks(k);
  const SiegelMatrix g0 = s.gamma();
  const CMat den = A.cast<Complex>() + B.cast<Complex>() * g0.gamma;
  const Complex det = den.determinant();
  if (std::abs(det) < caustic_tol) throw CausticError("transport_excited: A + B Gamma singular");
  const SiegelMatrix g1 = siegel_action(k, g0);
  const CMat U = sym_sqrt(g1.im()).cast<Complex>() * den * sym_inv_sqrt(g0.im()).cast<Complex>();

  GaussianWavepacket out = s;
  out.center = PhasePoint(k * s.center.z());
  out.frame = advance_frame(k, s.frame);
  out.poly = rotate_normal_poly(s.poly, U);
  out.phase = s.phase - 0.5 * std::arg(det);
  return {out, U, det};
}

inline GaussianWavepacket transport_excited(const Mat& k, const GaussianWavepacket& s) {
  return transport_excited_detail(k, s).state;
}

// ---------------------------------------------------------------------------
// Grid metaplectic operators (one axis at a time).

namespace detail {

// Chirp-z transform X_k = sum_n a_n e^{i alpha n k}, k = 0..K-1 (Bluestein, FFT size >= M + K - 1).
inline CVec chirp_z(const CVec& a, int K, double alpha) {
  const int M = static_cast<int>(a.size());
  int L = 1;
  while (L < M + K - 1) L *= 2;
  auto w = [alpha](long m) { return std::polar(1.0, 0.5 * alpha * static_cast<double>(m * m)); };
  CVec b = CVec::Zero(L), c = CVec::Zero(L);
  for (int n = 0; n < M; ++n) b(n) = a(n) * w(n);
  for (int m = 0; m < K; ++m) c(m) = std::conj(w(m));
  for (int m = 1; m < M; ++m) c(L - m) = std::conj(w(m));
  const FFTPlan fwd(std::vector<int>{L}, FFTW_FORWARD), bwd(std::vector<int>{L}, FFTW_BACKWARD);
  fwd.execute(b);
  fwd.execute(c);
  b.array() *= c.array() / double(L);
  bwd.execute(b);
  CVec out(K);
  for (int k = 0; k < K; ++k) out(k) = b(k) * w(k);
  return out;
}

// Band-limited (trigonometric) evaluation of line samples at s_j = s0 + j ds; zero outside the period.
inline CVec trig_resample_uniform(const CVec& line, const GridAxis& ax, double s0, double ds) {
  const int n = ax.count;
  CVec c = line;
  FFTPlan(std::vector<int>{n}, FFTW_FORWARD).execute(c);
  // Signed modes m' - n/2, m' = 0..n, with the Nyquist coefficient split between the two ends.
  const int h = n / 2;
  const bool even = n % 2 == 0;
  CVec a = CVec::Zero(n + 1);
  for (int m = 0; m < n; ++m) {
    const int signed_m = m < (n + 1) / 2 ? m : m - n;
    a(signed_m + h) += c(m);
  }
  if (even) {
    a(0) *= 0.5;
    a(n) = a(0);
  }
  const double dk = 2 * pi / (n * ax.spacing);
  for (int mp = 0; mp <= n; ++mp) a(mp) *= std::polar(1.0 / n, dk * (mp - h) * s0);
  CVec out = chirp_z(a, n, dk * ds);
  const double period = n * ax.spacing;
  for (int j = 0; j < n; ++j) {
    const double s = s0 + j * ds;
    out(j) *= std::polar(1.0, -dk * h * j * ds);
    if (s < -0.5 * ax.spacing || s > period - 0.5 * ax.spacing) out(j) = 0.0;
  }
  return out;
}

inline void chirp_line(CVec& v, const GridAxis& ax, double Q, double hbar) {
  if (Q == 0.0) return;
  for (int i = 0; i < ax.count; ++i) {
    const double x = ax.at(i);
    v(i) *= std::polar(1.0, Q * x * x / (2 * hbar));
  }
}

inline void free_line(CVec& v, const GridAxis& ax, double P, double hbar) {
  if (P == 0.0) return;
  const int n = ax.count;
  const Vec k = fft_wavenumbers(n, ax.spacing);
  FFTPlan(std::vector<int>{n}, FFTW_FORWARD).execute(v);
  for (int m = 0; m < n; ++m) {
    const double xi = hbar * k(m);
    v(m) *= std::polar(1.0 / n, -P * xi * xi / (2 * hbar));
  }
  FFTPlan(std::vector<int>{n}, FFTW_BACKWARD).execute(v);
}

inline void scale_line(CVec& v, const GridAxis& ax, double a) {
  if (a == 1.0) return;
  // samples of u(x_j / a) at x_j = origin + j dx
  const double s0 = ax.origin / a - ax.origin, ds = ax.spacing / a;
  v = trig_resample_uniform(v, ax, s0, ds) / std::sqrt(std::abs(a));
}

// (2 pi hbar)^{-1/2} ∫ e^{-i x y / hbar} u(y) dy, output on the same axis.
inline void fourier_line(CVec& v, const GridAxis& ax, double hbar) {
  const int n = ax.count;
  const double x0 = ax.origin, dx = ax.spacing;
  CVec a(n);
  for (int j = 0; j < n; ++j) a(j) = v(j) * std::polar(1.0, -x0 * dx * j / hbar);
  CVec out = chirp_z(a, n, -dx * dx / hbar);
  const double pref = dx / std::sqrt(2 * pi * hbar);
  for (int i = 0; i < n; ++i) out(i) *= pref * std::polar(1.0, -(x0 * x0 + x0 * dx * i) / hbar);
  v = out;
}

inline void metaplectic_line(const Mat& k, CVec& v, const GridAxis& ax, double hbar) {
  double a = k(0, 0), b = k(0, 1), c = k(1, 0), d = k(1, 1);
  bool pivot = std::max(std::abs(a), std::abs(d)) < 0.5;
  if (pivot) {
    // kappa = J (J^{-1} kappa)
    const double a2 = -c, b2 = -d, c2 = a, d2 = b;
    a = a2, b = b2, c = c2, d = d2;
  }
  if (std::abs(a) >= std::abs(d)) {
    // L(c/a) diag(a, 1/a) U(b/a)
    free_line(v, ax, b / a, hbar);
    scale_line(v, ax, a);
    chirp_line(v, ax, c / a, hbar);
  } else {
    // U(b/d) diag(1/d, d) L(c/d)
    chirp_line(v, ax, c / d, hbar);
    scale_line(v, ax, 1.0 / d);
    free_line(v, ax, b / d, hbar);
  }
  if (pivot) fourier_line(v, ax, hbar);
}

}  // namespace detail

// Apply the metaplectic operator of a 2x2 symplectic kappa along one axis of a grid.
inline GridWavefunction metaplectic_apply_axis(const Mat& k, const GridWavefunction& u, int axis,
                                               double coverage_tol = 1e-8) {
  require_symplectic(k);
  if (k.rows() != 2) throw std::invalid_argument("metaplectic_apply_axis: kappa must be 2x2");
  GridWavefunction out = u;
  const auto dims = u.dims();
  size_t stride = 1;
  for (int j = axis + 1; j < u.dim(); ++j) stride *= dims[j];
  const size_t n = dims[axis];
  const size_t outer = u.size() / (n * stride);
  CVec line(static_cast<Eigen::Index>(n));
  for (size_t o = 0; o < outer; ++o)
    for (size_t s = 0; s < stride; ++s) {
      const size_t base = o * n * stride + s;
      double mx = 0;
      for (size_t i = 0; i < n; ++i) {
        line(static_cast<Eigen::Index>(i)) = u.values(static_cast<Eigen::Index>(base + i * stride));
        mx = std::max(mx, std::abs(line(static_cast<Eigen::Index>(i))));
      }
      if (mx == 0.0) continue;
      detail::metaplectic_line(k, line, u.axes[axis], u.hbar);
      for (size_t i = 0; i < n; ++i) out.values(static_cast<Eigen::Index>(base + i * stride)) = line(static_cast<Eigen::Index>(i));
    }
  if (u.boundary_ratio() < coverage_tol && out.boundary_ratio() > std::max(coverage_tol, 10 * u.boundary_ratio()))
    throw CoverageError("metaplectic_apply: image leaves the grid");
  return out;
}

inline GridWavefunction metaplectic_apply_grid(const Mat& k, const GridWavefunction& u) {
  if (u.dim() != 1) throw std::invalid_argument("metaplectic_apply_grid: one-dimensional grids only (use metaplectic_apply_axis)");
  return metaplectic_apply_axis(k, u, 0);
}

}  // namespace semiclassical
