#pragma once

#include "semiclassical/hybrid.hpp"
#include "semiclassical/propagator.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#ifndef SEMICLASSICAL_VERSION
#define SEMICLASSICAL_VERSION "0.1.0"
#endif

namespace semiclassical {

inline const char* version() { return SEMICLASSICAL_VERSION; }

namespace detail {

// Doubles travel as hexfloats so a write/read round trip is bit-exact.
inline std::string hex(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string w;
    while (in_ >> w) {
      if (w[0] != '#') return w;
      std::string rest;
      std::getline(in_, rest);
    }
    throw std::runtime_error("unexpected end of input");
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw std::runtime_error("expected '" + w + "', got '" + got + "'");
  }
  double num() {
    const std::string w = word();
    char* end = nullptr;
    const double v = std::strtod(w.c_str(), &end);
    if (end != w.c_str() + w.size()) throw std::runtime_error("bad number '" + w + "'");
    return v;
  }
  long integer() { return std::stol(word()); }
  Vec vec(int n) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v(i) = num();
    return v;
  }
  Mat mat(int r, int c) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) m(i, j) = num();
    return m;
  }
  CMat cmat(int r, int c) {
    CMat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) {
        const double re = num();
        m(i, j) = Complex(re, num());
      }
    return m;
  }
  ComplexPoly poly() {
    expect("poly");
    const int n = static_cast<int>(integer());
    const long terms = integer();
    ComplexPoly p(n);
    for (long t = 0; t < terms; ++t) {
      MultiIndex a(n);
      for (int j = 0; j < n; ++j) a[j] = static_cast<int>(integer());
      const double re = num(), im = num();
      p.add(a, Complex(re, im));
    }
    return p;
  }

 private:
  std::istream& in_;
};

inline void put(std::ostream& o, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) o << ' ' << hex(v(i));
}
inline void put(std::ostream& o, const Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) o << ' ' << hex(m(i, j));
}
inline void put(std::ostream& o, const CMat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) o << ' ' << hex(m(i, j).real()) << ' ' << hex(m(i, j).imag());
}
inline void put(std::ostream& o, const ComplexPoly& p) {
  o << "poly " << p.nvars() << ' ' << p.coeffs().size() << '\n';
  for (const auto& [a, c] : p.coeffs()) {
    for (int e : a) o << e << ' ';
    o << hex(c.real()) << ' ' << hex(c.imag()) << '\n';
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Grid wavefunctions

inline void write_grid(std::ostream& o, const GridWavefunction& u) {
  o << "# semiclassical grid 1\n";
  o << "hbar " << detail::hex(u.hbar) << "\n";
  o << "dims " << u.dim() << "\n";
  for (const auto& a : u.axes) o << "axis " << detail::hex(a.origin) << ' ' << detail::hex(a.spacing) << ' ' << a.count << "\n";
  o << "values " << u.size() << "\n";
  for (Eigen::Index i = 0; i < u.values.size(); ++i)
    o << detail::hex(u.values(i).real()) << ' ' << detail::hex(u.values(i).imag()) << "\n";
}

inline GridWavefunction read_grid(std::istream& in) {
  detail::Reader r(in);
  r.expect("hbar");
  const double h = r.num();
  r.expect("dims");
  const int d = static_cast<int>(r.integer());
  std::vector<GridAxis> axes;
  for (int i = 0; i < d; ++i) {
    r.expect("axis");
    GridAxis a;
    a.origin = r.num();
    a.spacing = r.num();
    a.count = static_cast<int>(r.integer());
    axes.push_back(a);
  }
  GridWavefunction u(h, axes);
  r.expect("values");
  if (static_cast<size_t>(r.integer()) != u.size()) throw std::runtime_error("read_grid: size mismatch");
  for (Eigen::Index i = 0; i < u.values.size(); ++i) {
    const double re = r.num(), im = r.num();
    u.values(i) = Complex(re, im);
  }
  return u;
}

// ---------------------------------------------------------------------------
// Expansion states

inline void write_expansion(std::ostream& o, const ExpansionState& e) {
  const int d = e.dim();
  o << "# semiclassical expansion 1\n";
  o << "hbar " << detail::hex(e.hbar) << "\norder " << e.order << "\ndim " << d << "\ntime " << detail::hex(e.time) << "\n";
  o << "q";
  detail::put(o, e.center.q);
  o << "\np";
  detail::put(o, e.center.p);
  o << "\nkappa";
  detail::put(o, e.kappa);
  o << "\ntheta " << detail::hex(e.theta) << "\narg_det_m " << detail::hex(e.arg_det_m) << "\n";
  for (const auto& v : e.corrections) detail::put(o, v);
}

inline ExpansionState read_expansion(std::istream& in) {
  detail::Reader r(in);
  ExpansionState e;
  r.expect("hbar");
  e.hbar = r.num();
  r.expect("order");
  e.order = static_cast<int>(r.integer());
  r.expect("dim");
  const int d = static_cast<int>(r.integer());
  r.expect("time");
  e.time = r.num();
  r.expect("q");
  const Vec q = r.vec(d);
  r.expect("p");
  e.center = PhasePoint(q, r.vec(d));
  r.expect("kappa");
  e.kappa = r.mat(2 * d, 2 * d);
  r.expect("theta");
  e.theta = r.num();
  r.expect("arg_det_m");
  e.arg_det_m = r.num();
  for (int n = 0; n <= e.order; ++n) e.corrections.push_back(r.poly());
  return e;
}

// ---------------------------------------------------------------------------
// Hybrid states: header, then one row per graph sample
//   y x_bar[d_par] xi_bar[d_par] eta_bar dx_bar[d_par] dxi_bar[d_par] deta_bar phi action
//   u(re im) arg_det_m M(re im, row major) N(re im, row major)

inline void write_hybrid(std::ostream& o, const HybridState& hs) {
  const auto& g = hs.graph;
  const int dp = g.d_par, d = dp + 1;
  o << "# semiclassical hybrid 1\n";
  o << "hbar " << detail::hex(hs.hbar) << "\nd_par " << dp << "\ntime " << detail::hex(hs.time) << "\nsteps " << hs.steps
    << "\ndelta " << detail::hex(hs.delta_est) << "\nnu " << detail::hex(hs.nu_est) << "\noffblock "
    << detail::hex(hs.offblock) << "\ngamma1 " << detail::hex(g.gamma1) << "\nprovenance "
    << (hs.provenance.empty() ? "-" : hs.provenance) << "\nframe";
  detail::put(o, hs.frame.size() ? hs.frame : Mat(Mat::Identity(2 * d, 2 * d)));
  o << "\n";
  detail::put(o, hs.poly);
  o << "grid " << detail::hex(g.grid.y0) << ' ' << detail::hex(g.grid.dy) << ' ' << g.grid.n << "\n";
  for (int i = 0; i < g.size(); ++i) {
    o << detail::hex(g.y(i));
    detail::put(o, g.x_bar[i]);
    detail::put(o, g.xi_bar[i]);
    o << ' ' << detail::hex(g.eta_bar[i]);
    detail::put(o, g.dx_bar[i]);
    detail::put(o, g.dxi_bar[i]);
    o << ' ' << detail::hex(g.deta_bar[i]) << ' ' << detail::hex(g.phi[i]) << ' ' << detail::hex(g.action[i]) << ' '
      << detail::hex(hs.u[i].real()) << ' ' << detail::hex(hs.u[i].imag()) << ' ' << detail::hex(hs.arg_det_m[i]);
    detail::put(o, hs.M[i]);
    detail::put(o, hs.N[i]);
    o << "\n";
  }
}

inline HybridState read_hybrid(std::istream& in) {
  detail::Reader r(in);
  HybridState hs;
  auto& g = hs.graph;
  r.expect("hbar");
  hs.hbar = r.num();
  r.expect("d_par");
  g.d_par = static_cast<int>(r.integer());
  const int dp = g.d_par, d = dp + 1;
  r.expect("time");
  hs.time = r.num();
  r.expect("steps");
  hs.steps = static_cast<int>(r.integer());
  r.expect("delta");
  hs.delta_est = r.num();
  r.expect("nu");
  hs.nu_est = r.num();
  r.expect("offblock");
  hs.offblock = r.num();
  r.expect("gamma1");
  g.gamma1 = r.num();
  r.expect("provenance");
  hs.provenance = r.word();
  if (hs.provenance == "-") hs.provenance.clear();
  r.expect("frame");
  hs.frame = r.mat(2 * d, 2 * d);
  hs.poly = r.poly();
  r.expect("grid");
  g.grid.y0 = r.num();
  g.grid.dy = r.num();
  g.grid.n = static_cast<int>(r.integer());
  for (int i = 0; i < g.grid.n; ++i) {
    r.num();
    g.x_bar.push_back(r.vec(dp));
    g.xi_bar.push_back(r.vec(dp));
    g.eta_bar.push_back(r.num());
    g.dx_bar.push_back(r.vec(dp));
    g.dxi_bar.push_back(r.vec(dp));
    g.deta_bar.push_back(r.num());
    g.phi.push_back(r.num());
    g.action.push_back(r.num());
    const double re = r.num(), im = r.num();
    hs.u.emplace_back(re, im);
    hs.arg_det_m.push_back(r.num());
    hs.M.push_back(r.cmat(dp, dp));
    hs.N.push_back(r.cmat(dp, dp));
  }
  return hs;
}

template <class T, class W>
void save(const std::string& path, const T& obj, W writer) {
  std::ofstream o(path);
  if (!o) throw std::runtime_error("cannot write '" + path + "'");
  writer(o, obj);
}

// ---------------------------------------------------------------------------
// Result CSV (frozen column order, schema version 1)

struct ResultRow {
  std::string experiment;
  std::string method;
  double hbar = 0.0;
  double t = 0.0;
  double l2_error = NAN;
  double overlap_mag = NAN;
  double wall_time = 0.0;
  double sigma_c = NAN;
  double t_ehrenfest = NAN;
  double t_cr = NAN;
  double ninf_growth = NAN;
  double delta_t = NAN;
  double nu_t = NAN;
  std::string note;
};

inline const char* csv_columns() {
  return "experiment,method,hbar,t,l2_error,overlap_mag,wall_time,sigma_c,t_ehrenfest,t_cr,ninf_growth,delta_t,nu_t,note";
}

inline std::string csv_number(double v) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void write_csv_header(std::ostream& o, const std::string& config_hash) {
  o << "# semiclassical " << version() << " csv-schema 1\n";
  o << "# config_hash " << config_hash << "\n";
  o << "# units: hbar and t dimensionless; l2_error absolute L2 norm; wall_time seconds\n";
  o << csv_columns() << "\n";
}

inline void write_csv_row(std::ostream& o, const ResultRow& r) {
  o << r.experiment << ',' << r.method << ',' << csv_number(r.hbar) << ',' << csv_number(r.t) << ','
    << csv_number(r.l2_error) << ',' << csv_number(r.overlap_mag) << ',' << csv_number(r.wall_time) << ','
    << csv_number(r.sigma_c) << ',' << csv_number(r.t_ehrenfest) << ',' << csv_number(r.t_cr) << ','
    << csv_number(r.ninf_growth) << ',' << csv_number(r.delta_t) << ',' << csv_number(r.nu_t) << ',' << r.note << "\n";
}

// Trailing summary lines (slope fits, thresholds) are comments so the table stays rectangular.
inline void write_csv_block(std::ostream& o, const std::string& name, const std::vector<std::pair<std::string, double>>& kv) {
  o << "# [" << name << "]";
  for (const auto& [k, v] : kv) o << ' ' << k << '=' << csv_number(v);
  o << "\n";
}

inline void write_trajectory_csv(std::ostream& o, const Trajectory& tr) {
  if (tr.points.empty()) return;
  const int d = tr.points[0].dim();
  o << "t";
  for (int j = 0; j < d; ++j) o << ",q" << j;
  for (int j = 0; j < d; ++j) o << ",p" << j;
  o << ",action\n";
  for (size_t k = 0; k < tr.points.size(); ++k) {
    o << csv_number(tr.times[k]);
    for (int j = 0; j < d; ++j) o << ',' << csv_number(tr.points[k].q(j));
    for (int j = 0; j < d; ++j) o << ',' << csv_number(tr.points[k].p(j));
    o << ',' << (k < tr.actions.size() ? csv_number(tr.actions[k]) : "") << "\n";
  }
}

inline void write_thresholds_block(std::ostream& o, const DynamicalRates& rates, const Thresholds& th) {
  write_csv_block(o, "thresholds", {{"lambda_max", rates.lambda_max},
                                    {"lambda_c", rates.lambda_c},
                                    {"nu_min_perp", rates.nu_min_perp},
                                    {"t_ehrenfest", th.t_ehrenfest},
                                    {"t_cr", th.t_cr},
                                    {"t_hybrid_max", th.t_hybrid_max},
                                    {"t_central_max", th.t_central_max}});
}

}  // namespace semiclassical
