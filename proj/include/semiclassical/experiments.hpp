#pragma once

#include "semiclassical/config.hpp"
#include "semiclassical/hybrid.hpp"
#include "semiclassical/io.hpp"
#include "semiclassical/oracle.hpp"
#include "semiclassical/propagator.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <thread>

namespace semiclassical {

// ---------------------------------------------------------------------------
// Shared plumbing

struct RunContext {
  int workers = 1;
  std::uint64_t seed = 0;
  double budget_seconds = 600.0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::ostream* log = nullptr;

  double elapsed() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
  bool over_budget() const { return elapsed() > budget_seconds; }
  void note(const std::string& s) const {
    if (log) *log << s << std::endl;
  }
};

struct ExperimentOutput {
  std::vector<ResultRow> rows;
  std::vector<std::pair<std::string, std::vector<std::pair<std::string, double>>>> blocks;
  bool partial = false;
};

inline void write_output(std::ostream& o, const std::string& hash, const ExperimentOutput& out) {
  write_csv_header(o, hash);
  for (const auto& r : out.rows) write_csv_row(o, r);
  for (const auto& [name, kv] : out.blocks) write_csv_block(o, name, kv);
  if (out.partial) o << "# partial: wall-clock budget exceeded\n";
}

// Runs fn(i) for i in [0, n) on up to `workers` threads; results keep index order.
template <class R, class F>
std::vector<R> parallel_map(int n, int workers, F fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> errs(n);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errs[i] = std::current_exception();
      }
    }
  };
  const int nt = std::max(1, std::min(workers, n));
  std::vector<std::thread> pool;
  for (int t = 1; t < nt; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  for (auto& e : errs)
    if (e) std::rethrow_exception(e);
  return out;
}

// Re-raise with a stage label, keeping the failure category.
template <class F>
auto staged(const std::string& stage, F fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(stage + ": " + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(stage + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(stage + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(stage + ": " + e.what());
  }
}

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> k{"model", "beta", "epsilon", "d", "transverse"};
  return k;
}

inline ModelHamiltonian model_from_config(const Config& c, const std::string& def = "") {
  const std::string name = c.str("model", def);
  if (name.empty()) throw ConfigError("config: missing required key 'model'");
  Params p;
  for (const char* k : {"beta", "epsilon", "d", "transverse"})
    if (c.has(k)) p[k] = c.num(k);
  return make_model(name, p);
}

inline std::set<std::string> with_keys(std::set<std::string> base, std::initializer_list<const char*> extra) {
  for (const char* e : extra) base.insert(e);
  base.insert(model_keys().begin(), model_keys().end());
  base.insert({"seed", "workers", "budget_seconds"});
  return base;
}

// Initial squeezed state from q0 / p0 lists and diagonal Im Gamma (`squeeze`).
inline GaussianWavepacket initial_state(const Config& c, int d, double hbar) {
  auto pick = [&](const char* k, double def) {
    auto v = c.nums(k, std::vector<double>(d, def));
    if (v.size() == 1 && d > 1) v.assign(d, v[0]);
    if (static_cast<int>(v.size()) != d) throw ConfigError(std::string("config: '") + k + "' needs one value per dimension");
    return Vec(Eigen::Map<Vec>(v.data(), d));
  };
  const Vec q = pick("q0", 0.0), p = pick("p0", 0.0), s = pick("squeeze", 1.0);
  if ((s.array() <= 0).any()) throw ConfigError("config: 'squeeze' must be positive");
  return GaussianWavepacket::squeezed(hbar, PhasePoint(q, p), SiegelMatrix((I1 * s.cast<Complex>()).asDiagonal()));
}

// 1D oracle axis covering every order-0 state on the path with `width` spreads in position and momentum.
inline GridAxis covering_axis(const std::vector<ExpansionState>& path, double width, int max_points) {
  double qmax = 0, pmax = 0, lo = 1e300, hi = -1e300;
  for (const auto& e : path) {
    const auto s = e.to_wavepacket();
    const auto [sx, sp] = wavepacket_spreads(s);
    lo = std::min(lo, s.center.q(0) - width * sx);
    hi = std::max(hi, s.center.q(0) + width * sx);
    pmax = std::max(pmax, std::abs(s.center.p(0)) + width * sp);
  }
  qmax = 0.5 * (hi - lo);
  int n = 64;
  while (pi * path.front().hbar * n / (2 * qmax) < pmax) {
    n *= 2;
    if (n > max_points) throw ConfigError("oracle grid would exceed " + std::to_string(max_points) + " points");
  }
  return centered_axis(0.5 * (hi + lo), qmax, n);
}

// ---------------------------------------------------------------------------
// sweep-h: error of order-0 / order-N against the split-step oracle at a fixed time, per hbar

inline std::set<std::string> sweep_keys() {
  return with_keys({}, {"hbar", "T", "methods", "N", "q0", "p0", "squeeze", "width", "max_points", "dt"});
}

inline ExperimentOutput run_sweep_h(const Config& c, const RunContext& ctx) {
  const ModelHamiltonian H = model_from_config(c, "anharmonic_quartic");
  if (!H.kinetic_potential) throw ConfigError("sweep-h: the oracle needs a kinetic + potential model");
  if (H.d != 1) throw ConfigError("sweep-h: one-dimensional models only");
  const auto hbars = c.nums("hbar");
  if (hbars.size() < 3) throw ConfigError("sweep-h: need at least 3 hbar values");
  const double T = c.num("T", 1.0);
  const int N = c.integer("N", 1);
  const auto methods = c.strs("methods", {"order0", "orderN"});
  for (const auto& m : methods)
    if (m != "order0" && m != "orderN") throw ConfigError("sweep-h: unknown method '" + m + "'");
  const double width = c.num("width", 9.0), dt = c.num("dt", 2e-4);
  const int max_points = c.integer("max_points", 16384);

  struct Point {
    std::vector<ResultRow> rows;
    bool skipped = false;
  };
  const auto pts = parallel_map<Point>(static_cast<int>(hbars.size()), ctx.workers, [&](int i) {
    Point pt;
    if (ctx.over_budget()) {
      pt.skipped = true;
      return pt;
    }
    const double h = hbars[i];
    const auto s0 = initial_state(c, 1, h);
    std::vector<double> ts;
    for (int k = 1; k <= 40; ++k) ts.push_back(T * k / 40);
    const auto path = propagate_orderN_path(H, s0, ts, std::max(N, 0));
    const GridAxis ax = covering_axis(path, width, max_points);
    const auto u0 = eval_wavepacket(s0, {ax});
    SplitStepOptions so;
    so.dt = dt;
    const auto t0 = std::chrono::steady_clock::now();
    const auto ut = split_step_evolve(H, u0, T, so);
    const double oracle_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& m : methods) {
      const auto t1 = std::chrono::steady_clock::now();
      const ExpansionState e = propagate_orderN(H, s0, T, m == "order0" ? 0 : N);
      const auto w = eval_wavepacket(e.to_wavepacket(), {ax}, {false});
      const auto err = compare(w, ut);
      ResultRow r;
      r.experiment = "sweep-h";
      r.method = m == "order0" ? "order0" : "orderN" + std::to_string(N);
      r.hbar = h;
      r.t = T;
      r.l2_error = err.l2_error;
      r.overlap_mag = err.overlap_mag;
      r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count() + oracle_time;
      r.ninf_growth = growth_sample(e).sup_norms.back();
      r.note = "grid=" + std::to_string(ax.count);
      pt.rows.push_back(r);
    }
    ctx.note("sweep-h: hbar=" + csv_number(h) + " done");
    return pt;
  });

  ExperimentOutput out;
  for (const auto& p : pts) {
    if (p.skipped) out.partial = true;
    for (const auto& r : p.rows) out.rows.push_back(r);
  }
  std::map<std::string, std::vector<std::pair<double, double>>> by;
  for (const auto& r : out.rows) by[r.method].emplace_back(r.hbar, r.l2_error);
  for (const auto& [m, pairs] : by) {
    bool tiny = true;
    for (auto [h, e] : pairs) tiny = tiny && e < 1e-7;
    const bool exact = H.is_quadratic || tiny;
    if (exact || pairs.size() < 3) {
      out.blocks.push_back({"slope " + m, {{"degenerate", 1.0}, {"max_error", std::max_element(pairs.begin(), pairs.end(), [](auto a, auto b) { return a.second < b.second; })->second}}});
      continue;
    }
    const SlopeFit f = convergence_slope(pairs);
    out.blocks.push_back({"slope " + m, {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// breakdown: first time the order-0 (and order-N) error exceeds a threshold, per hbar

inline std::set<std::string> breakdown_keys() {
  return with_keys({}, {"hbar", "threshold", "N", "q0", "p0", "squeeze", "grid_points", "max_half", "dt",
                        "t_max_factor", "observe_dt", "lyapunov_T"});
}

struct BreakdownPoint {
  double hbar = 0.0;
  double t_order0 = NAN;
  double t_orderN = NAN;
  std::string note;
  double wall = 0.0;
};

inline BreakdownPoint breakdown_point(const ModelHamiltonian& H, const Config& c, double h, double t_max) {
  const double thr = c.num("threshold", 0.25);
  const int N = c.integer("N", 1);
  const int n = c.integer("grid_points", 4096);
  const double obs = c.num("observe_dt", 0.01);
  const auto s0 = initial_state(c, H.d, h);
  if (H.d != 1) throw ConfigError("breakdown: one-dimensional models only");
  // balanced grid: position and momentum windows of equal half-width
  const double half = std::min(c.num("max_half", 3.0), std::sqrt(pi * h * n / 2));
  const GridAxis ax = centered_axis(s0.center.q(0), half, n);
  const auto t0 = std::chrono::steady_clock::now();
  BreakdownPoint bp;
  bp.hbar = h;
  GridWavefunction u = eval_wavepacket(s0, {ax});
  const double dt_req = c.num("dt", 2e-4);
  const long per = std::max(1L, static_cast<long>(std::round(obs / dt_req)));
  const double dt = obs / per;
  SplitStepper S(H, u, dt);
  SplitStepStats st;
  ExpansionState e0 = make_expansion(s0, 0), eN = make_expansion(s0, N);
  double t = 0, prev0 = 0, prevN = 0;
  auto crossing = [&](double ep, double e, double tt) { return tt - obs + obs * (thr - ep) / (e - ep); };
  try {
    while (t < t_max - 1e-12 && (std::isnan(bp.t_order0) || std::isnan(bp.t_orderN))) {
      S.advance(u, per, st);
      evolve_expansion(H, e0, obs);
      evolve_expansion(H, eN, obs);
      t += obs;
      const double err0 = compare(eval_wavepacket(e0.to_wavepacket(), {ax}, {false}), u).l2_error;
      const double errN = compare(eval_wavepacket(eN.to_wavepacket(), {ax}, {false}), u).l2_error;
      if (std::isnan(bp.t_order0) && err0 > thr) bp.t_order0 = crossing(prev0, err0, t);
      if (std::isnan(bp.t_orderN) && errN > thr) bp.t_orderN = crossing(prevN, errN, t);
      prev0 = err0;
      prevN = errN;
    }
    if (std::isnan(bp.t_order0) || std::isnan(bp.t_orderN)) bp.note = "not_reached_by_t=" + csv_number(t);
  } catch (const CoverageError&) {
    bp.note = "grid_exhausted_at_t=" + csv_number(t);
  } catch (const EscapeError& e) {
    bp.note = "escape_at_t=" + csv_number(t);
  }
  bp.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return bp;
}

inline ExperimentOutput run_breakdown(const Config& c, const RunContext& ctx) {
  const ModelHamiltonian H = model_from_config(c, "saddle_cubic");
  if (!H.kinetic_potential) throw ConfigError("breakdown: the oracle needs a kinetic + potential model");
  const auto hbars = c.nums("hbar");
  const auto K = sample_K(H, 1, 0.0);
  const double lam = lyapunov_max(H, K, c.num("lyapunov_T", 8.0)).lambda_max;
  if (!(lam > 0)) throw ConfigError("breakdown: model has no positive Lyapunov rate");
  DynamicalRates rates;
  rates.lambda_max = lam;
  const int N = c.integer("N", 1);
  const auto pts = parallel_map<BreakdownPoint>(static_cast<int>(hbars.size()), ctx.workers, [&](int i) {
    if (ctx.over_budget()) return BreakdownPoint{hbars[i], NAN, NAN, "skipped_budget", 0.0};
    const Thresholds th = time_thresholds(rates, hbars[i]);
    auto bp = breakdown_point(H, c, hbars[i], c.num("t_max_factor", 1.0) * th.t_ehrenfest);
    ctx.note("breakdown: hbar=" + csv_number(hbars[i]) + " t0=" + csv_number(bp.t_order0));
    return bp;
  });
  ExperimentOutput out;
  std::vector<double> xs, ys, xsN, ysN;
  for (const auto& p : pts) {
    if (p.note == "skipped_budget") out.partial = true;
    const Thresholds th = time_thresholds(rates, p.hbar);
    for (int m = 0; m < 2; ++m) {
      ResultRow r;
      r.experiment = "breakdown";
      r.method = m == 0 ? "order0" : "orderN" + std::to_string(N);
      r.hbar = p.hbar;
      r.t = m == 0 ? p.t_order0 : p.t_orderN;
      r.l2_error = std::isnan(r.t) ? NAN : c.num("threshold", 0.25);
      r.wall_time = p.wall;
      r.t_ehrenfest = th.t_ehrenfest;
      r.t_cr = th.t_cr;
      r.note = p.note;
      out.rows.push_back(r);
      if (!std::isnan(r.t)) (m == 0 ? xs : xsN).push_back(std::abs(std::log(p.hbar))), (m == 0 ? ys : ysN).push_back(r.t);
    }
  }
  auto fit_block = [&](const std::string& name, const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 2) {
      out.blocks.push_back({name, {{"points", static_cast<double>(x.size())}}});
      return;
    }
    const LinearFit f = linear_fit(x, y);
    out.blocks.push_back({name,
                          {{"slope", f.slope},
                           {"slope_stderr", f.slope_stderr},
                           {"intercept", f.intercept},
                           {"r2", f.r2},
                           {"lambda0", lam},
                           {"band_lo", 1 / (6 * lam) * 0.7},
                           {"band_hi", 1 / (2 * lam) * 1.3}}});
  };
  fit_block("fit order0", xs, ys);
  fit_block("fit orderN", xsN, ysN);
  return out;
}

// ---------------------------------------------------------------------------
// Hybrid pipeline on nh2d: order-0 to t_s, tensor split, leading-order hybrid steps, oracle comparison

struct HybridPipelineOptions {
  double hbar = 1e-3;
  double epsilon = 0.1;
  double x0 = 0.3, p0 = 0.0;
  double squeeze_x = 1.0, squeeze_y = 1.0;
  double eps_s = 0.3;         // t_s = eps_s |log hbar| / lambda_max
  double t_end = -1.0;        // < 0: t_end_factor * t_ehrenfest
  double t_end_factor = 0.8;
  double step = 0.1;          // hybrid step t0 (rounded to divide the window)
  int samples = 401;
  double alpha = 0.05;
  bool oracle = true;
  int nx = 256, ny = 4096;
  double x_half = 0.6, y_half = 2.5;
  double dt = 0.0;
  double order0_threshold = 0.25;
  double coverage_tol = 1e-4;  // edge/peak ratio allowed when mapping hybrid states back for comparison
  std::string dump_dir;
};

struct HybridStepRecord {
  double t = 0.0;
  EstimateReport estimates;
  double isotropy = 0.0;
  double u_sup = 0.0;
  double jac_product = 1.0;     // prod of |dy^1/dy^0|^{-1/2} at the amplitude maximum
  double ju_scaling = 1.0;      // (J_u)^{-1/2} from the transverse flow at the base trajectory
  double gamma_spread = 0.0;    // max_y |Gamma_par(y) - Gamma_par(y_mid)|
  double hybrid_l2 = NAN, hybrid_overlap = NAN;
};

struct HybridPipelineResult {
  DynamicalRates rates;
  Thresholds thresholds;
  double t_s = 0.0, t_end = 0.0;
  std::vector<HybridStepRecord> steps;
  std::vector<std::pair<double, double>> order0_errors;  // (t, l2)
  double order0_exceed_time = NAN;
  double final_overlap = NAN, final_l2 = NAN;
  HybridState final_state;
  SplitStepStats oracle_stats;
};

inline HybridPipelineOptions hybrid_options_from(const Config& c) {
  HybridPipelineOptions o;
  o.hbar = c.num("hbar", o.hbar);
  o.epsilon = c.num("epsilon", o.epsilon);
  o.x0 = c.num("x0", o.x0);
  o.p0 = c.num("p0", o.p0);
  o.squeeze_x = c.num("squeeze_x", o.squeeze_x);
  o.squeeze_y = c.num("squeeze_y", o.squeeze_y);
  o.eps_s = c.num("eps_s", o.eps_s);
  o.t_end = c.num("t_end", o.t_end);
  o.t_end_factor = c.num("t_end_factor", o.t_end_factor);
  o.step = c.num("step", o.step);
  o.samples = c.integer("samples", o.samples);
  o.alpha = c.num("alpha", o.alpha);
  o.oracle = c.integer("oracle", 1) != 0;
  o.nx = c.integer("nx", o.nx);
  o.ny = c.integer("ny", o.ny);
  o.x_half = c.num("x_half", o.x_half);
  o.y_half = c.num("y_half", o.y_half);
  o.dt = c.num("dt", o.dt);
  o.order0_threshold = c.num("threshold", o.order0_threshold);
  o.coverage_tol = c.num("coverage_tol", o.coverage_tol);
  o.dump_dir = c.str("dump_dir", "");
  if (o.hbar > 1e-2) throw ConfigError("hybrid-demo: hbar must be <= 1e-2");
  return o;
}

inline std::set<std::string> hybrid_keys() {
  return with_keys({}, {"hbar", "x0", "p0", "squeeze_x", "squeeze_y", "eps_s", "t_end", "t_end_factor", "step",
                        "samples", "alpha", "oracle", "nx", "ny", "x_half", "y_half", "dt", "threshold", "coverage_tol", "dump_dir"});
}

inline HybridPipelineResult run_hybrid_pipeline(const HybridPipelineOptions& o, const RunContext& ctx = {}) {
  HybridPipelineResult res;
  const ModelHamiltonian H = make_model("nh2d", {{"epsilon", o.epsilon}});
  const double h = o.hbar, L = std::abs(std::log(h));
  PhasePoint r0(Vec::Zero(2), Vec::Zero(2));
  r0.q(0) = o.x0;
  r0.p(0) = o.p0;
  res.rates = staged("rates", [&] { return estimate_rates(H, {r0}, 6.0); });
  res.thresholds = time_thresholds(res.rates, h);
  res.t_s = o.eps_s * L / res.rates.lambda_max;
  res.t_end = o.t_end > 0 ? o.t_end : o.t_end_factor * res.thresholds.t_ehrenfest;
  if (res.t_end <= res.t_s) throw ConfigError("hybrid-demo: t_end must exceed t_s");
  SiegelMatrix g0(CMat::Identity(2, 2) * I1);
  g0.gamma(0, 0) = I1 * o.squeeze_x;
  g0.gamma(1, 1) = I1 * o.squeeze_y;
  const auto s0 = GaussianWavepacket::squeezed(h, r0, g0);

  const auto sw = staged("order0", [&] { return propagate_order0(H, s0, res.t_s); });
  const Splitting split = staged("splitting", [&] { return hyperbolic_splitting(H, PhasePoint(sw.center)); });
  const Mat F = adapted_frame_from_splitting(H, split);
  const ModelHamiltonian Ha = transform_model(H, F);
  HybridOptions hopt;
  hopt.samples = o.samples;
  HybridState hs = staged("convert", [&] { return hybrid_from_wavepacket(sw, split, hopt); });
  hs.time = res.t_s;

  const int nsteps = std::max(1, static_cast<int>(std::round((res.t_end - res.t_s) / o.step)));
  const double t0 = (res.t_end - res.t_s) / nsteps;
  std::vector<HybridState> states{hs};
  const EstimateOptions eo{o.alpha};
  // base point of the transverse growth: the central trajectory from t_s
  const Vec zs = sw.center.z();
  double jac_acc = 1.0;
  for (int k = 0; k <= nsteps; ++k) {
    if (k > 0) {
      if (ctx.over_budget()) throw NumericalError("hybrid-demo: wall-clock budget exceeded");
      hs = staged("hybrid step " + std::to_string(k), [&] { return propagate_hybrid_leading(Ha, hs, t0); });
      states.push_back(hs);
    }
    HybridStepRecord rec;
    rec.t = hs.time;
    rec.estimates = hybrid_estimate_report(hs, res.rates, hs.time, eo);
    rec.isotropy = isotropy_residual(hs.graph);
    int imax = 0;
    for (int i = 0; i < hs.size(); ++i)
      if (std::abs(hs.u[i]) > std::abs(hs.u[imax])) imax = i;
    rec.u_sup = std::abs(hs.u[imax]);
    if (k > 0) jac_acc *= 1 / std::sqrt(std::abs(cubic(hs.graph.grid, hs.graph.jac_y, hs.graph.y(imax))));
    rec.jac_product = jac_acc;
    const FlowResult fr = flow_map(H, zs, hs.time - res.t_s);
    const Mat kt = F * fr.kappa * F.inverse();  // adapted-to-adapted linearization
    rec.ju_scaling = 1 / std::sqrt(std::abs(kt(1, 1)));
    const CMat gmid = hs.gamma_par(hs.size() / 2).gamma;
    for (int i = 0; i < hs.size(); ++i)
      if (std::abs(hs.u[i]) > 1e-8 * rec.u_sup)
        rec.gamma_spread = std::max(rec.gamma_spread, (hs.gamma_par(i).gamma - gmid).norm());
    res.steps.push_back(rec);
    if (!o.dump_dir.empty()) {
      std::filesystem::create_directories(o.dump_dir);
      save(o.dump_dir + "/hybrid_step_" + std::to_string(k) + ".txt", hs, write_hybrid);
    }
    ctx.note("hybrid-demo: step " + std::to_string(k) + " t=" + csv_number(hs.time));
  }
  res.final_state = hs;
  if (!o.oracle) return res;

  // Oracle run with observations at the hybrid step times and on a uniform grid for order-0.
  const std::vector<GridAxis> axes{centered_axis(0, o.x_half, o.nx), centered_axis(0, o.y_half, o.ny)};
  const GridWavefunction u0 = staged("oracle", [&] { return eval_wavepacket(s0, axes); });
  std::vector<double> times;
  for (double t = 0.1; t < res.t_s - 1e-9; t += 0.1) times.push_back(t);
  for (const auto& st : states) times.push_back(st.time);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
              times.end());
  const auto path = propagate_orderN_path(H, s0, times, 0);
  SplitStepOptions so;
  so.dt = o.dt;
  staged("oracle", [&] {
    split_step_observe(
        H, u0, times,
        [&](double t, const GridWavefunction& u) {
          const size_t k = std::lower_bound(times.begin(), times.end(), t - 1e-9) - times.begin();
          const auto w = eval_wavepacket(path[k].to_wavepacket(), axes, {false});
          const double e0 = compare(w, u).l2_error;
          res.order0_errors.emplace_back(t, e0);
          if (std::isnan(res.order0_exceed_time) && e0 > o.order0_threshold) res.order0_exceed_time = t;
          for (size_t j = 0; j < states.size(); ++j) {
            if (std::abs(states[j].time - t) > 1e-9) continue;
            const auto ha = to_adapted(F, eval_hybrid(states[j], axes, {false}), 1, true, o.coverage_tol);
            const auto m = compare(ha, u);
            res.steps[j].hybrid_l2 = m.l2_error;
            res.steps[j].hybrid_overlap = m.overlap_mag;
          }
          ctx.note("oracle: t=" + csv_number(t) + " order0_error=" + csv_number(e0));
        },
        so, &res.oracle_stats);
    return 0;
  });
  res.final_l2 = res.steps.back().hybrid_l2;
  res.final_overlap = res.steps.back().hybrid_overlap;
  return res;
}

inline ExperimentOutput run_hybrid_demo(const Config& c, const RunContext& ctx) {
  if (c.str("model", "nh2d") != "nh2d") throw ConfigError("hybrid-demo: model must be nh2d");
  const auto o = hybrid_options_from(c);
  const auto t0 = std::chrono::steady_clock::now();
  const auto res = run_hybrid_pipeline(o, ctx);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ExperimentOutput out;
  for (const auto& s : res.steps) {
    ResultRow r;
    r.experiment = "hybrid-demo";
    r.method = "hybrid";
    r.hbar = o.hbar;
    r.t = s.t;
    r.l2_error = s.hybrid_l2;
    r.overlap_mag = s.hybrid_overlap;
    r.wall_time = wall;
    r.sigma_c = s.estimates.dgamma_bound / std::abs(std::log(o.hbar));
    r.t_ehrenfest = res.thresholds.t_ehrenfest;
    r.t_cr = res.thresholds.t_cr;
    r.delta_t = s.estimates.delta_measured;
    r.nu_t = s.estimates.nu_measured;
    r.note = "isotropy=" + csv_number(s.isotropy);
    out.rows.push_back(r);
  }
  for (const auto& [t, e] : res.order0_errors) {
    ResultRow r;
    r.experiment = "hybrid-demo";
    r.method = "order0";
    r.hbar = o.hbar;
    r.t = t;
    r.l2_error = e;
    r.wall_time = wall;
    r.t_ehrenfest = res.thresholds.t_ehrenfest;
    r.t_cr = res.thresholds.t_cr;
    out.rows.push_back(r);
  }
  for (size_t k = 0; k < res.steps.size(); ++k) {
    const auto& e = res.steps[k].estimates;
    out.blocks.push_back({"estimates step " + std::to_string(k),
                          {{"t", e.t},
                           {"dgamma_max", e.dgamma_max},
                           {"dgamma_bound", e.dgamma_bound},
                           {"support_diameter", e.support_diameter},
                           {"support_bound", e.support_bound},
                           {"delta_measured", e.delta_measured},
                           {"delta_predicted", e.delta_predicted},
                           {"u_sup", res.steps[k].u_sup},
                           {"jac_product", res.steps[k].jac_product},
                           {"ju_scaling", res.steps[k].ju_scaling}}});
  }
  out.blocks.push_back({"thresholds", {{"lambda_max", res.rates.lambda_max},
                                       {"lambda_c", res.rates.lambda_c},
                                       {"nu_min_perp", res.rates.nu_min_perp},
                                       {"t_ehrenfest", res.thresholds.t_ehrenfest},
                                       {"t_cr", res.thresholds.t_cr}}});
  out.blocks.push_back({"final", {{"overlap", res.final_overlap},
                                  {"l2_error", res.final_l2},
                                  {"order0_exceed_time", res.order0_exceed_time},
                                  {"t_s", res.t_s},
                                  {"t_end", res.t_end}}});
  return out;
}

// ---------------------------------------------------------------------------
// propagate: one order-N run with optional oracle comparison and state dump

inline std::set<std::string> propagate_keys() {
  return with_keys({}, {"hbar", "T", "N", "q0", "p0", "squeeze", "segments", "oracle", "width", "max_points", "dt",
                        "state_out", "trajectory_out"});
}

inline ExperimentOutput run_propagate(const Config& c, const RunContext&) {
  const ModelHamiltonian H = model_from_config(c);
  const double h = c.num("hbar", 1e-2), T = c.num("T", 1.0);
  const int N = c.integer("N", 0), segments = c.integer("segments", 1);
  const auto s0 = initial_state(c, H.d, h);
  const auto t1 = std::chrono::steady_clock::now();
  ExpansionState e = staged("propagate", [&] {
    if (segments > 1) {
      SegmentOptions so;
      so.override_limit = true;
      return segmented_propagate(H, s0, segments, T / segments, N, so);
    }
    return propagate_orderN(H, s0, T, N);
  });
  ResultRow r;
  r.experiment = "propagate";
  r.method = "orderN" + std::to_string(N);
  r.hbar = h;
  r.t = T;
  r.ninf_growth = growth_sample(e).sup_norms.back();
  if (c.integer("oracle", 0) != 0) {
    if (H.d != 1) throw ConfigError("propagate: oracle comparison is one-dimensional");
    std::vector<double> ts;
    for (int k = 1; k <= 40; ++k) ts.push_back(T * k / 40);
    const auto path = propagate_orderN_path(H, s0, ts, 0);
    const GridAxis ax = covering_axis(path, c.num("width", 9.0), c.integer("max_points", 16384));
    SplitStepOptions so;
    so.dt = c.num("dt", 2e-4);
    const auto ut = staged("oracle", [&] { return split_step_evolve(H, eval_wavepacket(s0, {ax}), T, so); });
    const auto m = compare(eval_wavepacket(e.to_wavepacket(), {ax}, {false}), ut);
    r.l2_error = m.l2_error;
    r.overlap_mag = m.overlap_mag;
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
  if (c.has("state_out")) save(c.str("state_out"), e, write_expansion);
  if (c.has("trajectory_out")) {
    std::ofstream o(c.str("trajectory_out"));
    write_trajectory_csv(o, integrate_flow(H, s0.center, T, T / 100));
  }
  ExperimentOutput out;
  out.rows.push_back(r);
  return out;
}

// ---------------------------------------------------------------------------
// lyapunov: rates on a sample of K and the derived time thresholds

inline std::set<std::string> lyapunov_keys() {
  return with_keys({}, {"T", "window", "per_axis", "radius", "hbar"});
}

inline ExperimentOutput run_lyapunov(const Config& c, const RunContext&) {
  const ModelHamiltonian H = model_from_config(c);
  const double T = c.num("T", 8.0);
  const auto K = sample_K(H, c.integer("per_axis", 3), c.num("radius", 0.3));
  const auto est = lyapunov_max(H, K, T, c.num("window", 1.0));
  ExperimentOutput out;
  out.blocks.push_back({"lyapunov", {{"lambda_max", est.lambda_max},
                                     {"lambda_half", est.lambda_half},
                                     {"converged", est.converged ? 1.0 : 0.0},
                                     {"seeds", static_cast<double>(K.size())}}});
  if (H.d_perp > 0 || est.lambda_max > 0) {
    const DynamicalRates rates = estimate_rates(H, K, T);
    for (double h : c.nums("hbar", {1e-3})) {
      if (!(rates.lambda_max > 0)) break;
      const Thresholds th = time_thresholds(rates, h);
      ResultRow r;
      r.experiment = "lyapunov";
      r.method = "rates";
      r.hbar = h;
      r.t = T;
      r.sigma_c = rates.sigma_c ? rates.sigma_c(T) : NAN;
      r.t_ehrenfest = th.t_ehrenfest;
      r.t_cr = th.t_cr;
      r.nu_t = rates.nu_min_perp;
      out.rows.push_back(r);
      out.blocks.push_back({"thresholds hbar=" + csv_number(h), {{"lambda_max", rates.lambda_max},
                                                                 {"lambda_c", rates.lambda_c},
                                                                 {"nu_min_perp", rates.nu_min_perp},
                                                                 {"t_ehrenfest", th.t_ehrenfest},
                                                                 {"t_cr", th.t_cr},
                                                                 {"t_hybrid_max", th.t_hybrid_max},
                                                                 {"t_central_max", th.t_central_max}}});
    }
  }
  return out;
}

}  // namespace semiclassical
