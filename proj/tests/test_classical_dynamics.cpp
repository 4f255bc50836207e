#include "semiclassical/classical_dynamics.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace semiclassical;

namespace {
const auto harmonic = make_model("harmonic");
const auto dilation = make_model("dilation");
const auto nh0 = make_model("nh2d", {{"epsilon", 0.0}});
const auto nh1 = make_model("nh2d", {{"epsilon", 0.1}});
constexpr double quarter_pi = std::numbers::pi / 4;
}  // namespace

TEST(IntegrateFlow, HarmonicQuarterTurn) {
  const auto tr = integrate_flow(harmonic, point({1, 0}), quarter_pi, 1e-3);
  EXPECT_NEAR((tr.back().z() - vec({0, -1})).norm(), 0, 1e-8);
}

TEST(IntegrateFlow, DilationLinearFlow) {
  const auto tr = integrate_flow(dilation, point({1, 1}), 1.0, 1e-3);
  EXPECT_NEAR((tr.back().z() - vec({std::exp(1.0), std::exp(-1.0)})).norm(), 0, 1e-8);
}

TEST(IntegrateFlow, QuarticEnergyDrift) {
  const auto tr = integrate_flow(make_model("anharmonic_quartic", {{"beta", 0.1}}), point({1, 0}), 5.0, 1e-3);
  EXPECT_LT(tr.energy_drift, 1e-10);
}

TEST(IntegrateVariational, DilationJacobian) {
  const auto tr = integrate_variational(dilation, point({0.3, 0.2}), std::log(2.0), 1e-3);
  EXPECT_NEAR((tr.jacobians.back() - Mat(vec({2, 0.5}).asDiagonal())).norm(), 0, 1e-8);
}

TEST(IntegrateVariational, HarmonicRotation) {
  const auto tr = integrate_variational(harmonic, point({0.3, 0.2}), quarter_pi, 1e-3);
  Mat R(2, 2);
  R << 0, 1, -1, 0;
  EXPECT_NEAR((tr.jacobians.back() - R).norm(), 0, 1e-8);
}

TEST(IntegrateVariational, Nh2dTransverseSingularValues) {
  const auto tr = integrate_variational(nh0, point({0.4, 0, 0.1, 0}), 1.0, 1e-3);
  const Mat blk = submatrix(tr.jacobians.back(), {1, 3}, {1, 3});
  const Vec s = blk.jacobiSvd().singularValues();
  EXPECT_NEAR(s(0) / std::exp(2.0), 1.0, 1e-6);
  EXPECT_NEAR(s(1) * std::exp(2.0), 1.0, 1e-6);
}

// Property: energy conservation and symplectic Jacobians along trajectories.
TEST(TrajectoryProperties, EnergyAndSymplecticity) {
  for (const auto& H : {harmonic, dilation, nh1, make_model("anharmonic_quartic", {{"beta", 0.1}}),
                        make_model("saddle_cubic", {{"beta", 0.3}})}) {
    const PhasePoint z0(Vec::Constant(2 * H.d, 0.15));
    const auto tr = integrate_variational(H, z0, 2.0, 1e-3);
    EXPECT_LT(tr.energy_drift, 1e-9 * (1 + std::abs(H.eval(z0)))) << H.name;
    for (const auto& k : tr.jacobians) EXPECT_LT(symplectic_residual(k), 1e-8) << H.name;
  }
}

TEST(LyapunovMax, Examples) {
  EXPECT_NEAR(lyapunov_max(dilation, {point({0, 0})}, 20.0).lambda_max, 1.0, 0.01);
  EXPECT_LT(lyapunov_max(harmonic, {point({0.5, 0})}, 200.0).lambda_max, 0.01);
  EXPECT_NEAR(lyapunov_max(nh0, sample_K(nh0, 3, 0.3), 20.0).lambda_max, 2.0, 0.02);
}

TEST(CentralGrowth, Examples) {
  for (double t : {0.5, 1.0, 3.0}) EXPECT_LE(central_growth(nh1, sample_K(nh1, 3, 0.3), t), 1 + 1e-6);
  const auto central_dilation = make_model("dilation", {{"transverse", 0}});
  EXPECT_NEAR(central_growth(central_dilation, {point({0, 0})}, 1.0), std::exp(1.0), 1e-8);
  const double g1 = central_growth(harmonic, {point({0.2, 0})}, 1.0);
  const double g10 = central_growth(harmonic, {point({0.2, 0})}, 10.0);
  EXPECT_NEAR(g1, 1.0, 1e-8);
  EXPECT_NEAR(g10, 1.0, 1e-8);
}

TEST(TimeThresholds, Examples) {
  DynamicalRates r;
  r.lambda_max = 2;
  const auto th = time_thresholds(r, 1e-4);
  EXPECT_NEAR(th.t_ehrenfest, std::log(1e4) / 4, 1e-12);
  EXPECT_NEAR(th.t_cr, 0.7675, 1e-4);
  ThresholdOptions o;
  o.C = 0.37;
  EXPECT_NEAR(time_thresholds(r, 1e-4, o).t_central_max, 0.37 * std::log(1e4), 1e-12);
  EXPECT_THROW(time_thresholds(r, 2.0), std::invalid_argument);
}

TEST(HyperbolicSplitting, DecoupledNh2d) {
  const auto s = hyperbolic_splitting(nh0, point({0.3, 0, 0.1, 0}));
  EXPECT_LT(principal_angle(s.unstable, vec({0, 1, 0, 1})), 1e-8);
  EXPECT_LT(principal_angle(s.stable, vec({0, 1, 0, -1})), 1e-8);
}

TEST(HyperbolicSplitting, CoupledGrowthRate) {
  const double x0 = 0.2;
  const auto s = hyperbolic_splitting(nh1, point({x0, 0, 0, 0}));
  const double t = 0.05;
  const Vec v = flow_map(nh1, point({x0, 0, 0, 0}).z(), t).kappa * s.unstable.col(0);
  const double rate = std::log(v.norm()) / t;
  EXPECT_NEAR(rate / (2 * std::sqrt(1 - 0.1 * x0)), 1.0, 0.05);
}

TEST(HyperbolicSplitting, OffKRaises) {
  EXPECT_THROW(hyperbolic_splitting(nh1, point({0.2, 0.1, 0, 0})), std::invalid_argument);
}

TEST(AdaptedFrame, DecoupledNh2d) {
  const Mat F = adapted_frame(nh0, point({0.3, 0, 0, 0}));
  EXPECT_LT(symplectic_residual(F), 1e-10);
  const Vec u = F * vec({0, 1, 0, 1}), s = F * vec({0, 1, 0, -1});
  EXPECT_LT(std::abs(u(0)) + std::abs(u(2)) + std::abs(u(3)), 1e-8);
  EXPECT_LT(std::abs(s(0)) + std::abs(s(1)) + std::abs(s(2)), 1e-8);
  EXPECT_NEAR((F.block(0, 0, 1, 4) - vec({1, 0, 0, 0}).transpose()).norm(), 0, 1e-8);
  EXPECT_NEAR((F.block(2, 0, 1, 4) - vec({0, 0, 1, 0}).transpose()).norm(), 0, 1e-8);
}

TEST(AdaptedFrame, KTangentsStayCentral) {
  const Mat F = adapted_frame(nh1, point({0.2, 0, 0.1, 0}));
  for (const Vec& t : {vec({1, 0, 0, 0}), vec({0, 0, 1, 0})}) {
    const Vec v = F * t;
    EXPECT_LT(std::abs(v(1)) + std::abs(v(3)), 1e-10);
  }
}

namespace {
ManifoldGraph flat_unstable_graph(double half, int n) {
  return linear_graph({-half, 2 * half / (n - 1), n}, vec({0}), vec({0}), vec({0}), vec({0}), 0.0, 1.0);
}
const Mat F0 = adapted_frame(nh0, point({0, 0, 0, 0}));
const auto nh0a = transform_model(nh0, F0);
const auto nh1a = transform_model(nh1, adapted_frame(nh1, point({0, 0, 0, 0})));
}  // namespace

TEST(EvolveManifoldGraph, FlatGraphStaysFlat) {
  auto g = flat_unstable_graph(1.0, 101);
  g.eta_bar.assign(g.size(), 0.0);
  g.deta_bar.assign(g.size(), 0.0);
  g.phi.assign(g.size(), 0.0);
  const auto g1 = evolve_manifold_graph(nh0a, g, 0.2);
  double m = 0;
  for (const auto& x : g1.x_bar) m = std::max(m, x.cwiseAbs().maxCoeff());
  EXPECT_LT(m, 1e-8);
}

TEST(EvolveManifoldGraph, BackMapContraction) {
  auto g = flat_unstable_graph(1.0, 101);
  g.eta_bar.assign(g.size(), 0.0);
  g.deta_bar.assign(g.size(), 0.0);
  g.phi.assign(g.size(), 0.0);
  const double t0 = 0.2;
  const auto g1 = evolve_manifold_graph(nh0a, g, t0);
  for (double d : back_map_determinant(g, g1)) EXPECT_NEAR(d / std::exp(-2 * t0), 1.0, 0.05);
  for (double d : back_map_determinant(g, with_identity_correspondence(g))) EXPECT_NEAR(d, 1.0, 1e-12);
}

TEST(EvolveManifoldGraph, DeterminantChainRule) {
  auto g = flat_unstable_graph(0.5, 201);
  g.eta_bar.assign(g.size(), 0.0);
  g.deta_bar.assign(g.size(), 0.0);
  g.phi.assign(g.size(), 0.0);
  GraphEvolveOptions keep;
  keep.domain = std::make_pair(-0.5, 0.5);
  const auto g1 = evolve_manifold_graph(nh1a, g, 0.1, keep);
  const auto g2 = evolve_manifold_graph(nh1a, g1, 0.1, keep);
  const auto g12 = evolve_manifold_graph(nh1a, g, 0.2, keep);
  const auto d1 = back_map_determinant(g, g1), d2 = back_map_determinant(g1, g2), d12 = back_map_determinant(g, g12);
  const UniformGrid1& gr = g1.grid;
  for (int i = 10; i < g2.size() - 10; i += 10) {
    const double y0 = g2.y_prev[i];
    const double d1_at = cubic(gr, d1, y0);
    EXPECT_NEAR(d2[i] * d1_at / d12[i], 1.0, 0.01) << i;
  }
}

TEST(EvolveManifoldGraph, CouplingKeepsC1Bounded) {
  auto g = flat_unstable_graph(0.5, 201);
  g.eta_bar.assign(g.size(), 0.0);
  g.deta_bar.assign(g.size(), 0.0);
  g.phi.assign(g.size(), 0.0);
  GraphEvolveOptions keep;
  keep.domain = std::make_pair(-0.5, 0.5);
  for (int k = 0; k < 10; ++k) {
    g = evolve_manifold_graph(nh1a, g, 0.1, keep);
    double c1 = 0;
    for (int i = 0; i < g.size(); ++i)
      c1 = std::max({c1, g.x_bar[i].norm(), g.xi_bar[i].norm(), g.dx_bar[i].norm(), g.dxi_bar[i].norm(),
                     std::abs(g.deta_bar[i])});
    EXPECT_LE(c1, g.gamma1) << "step " << k;
    EXPECT_LT(isotropy_residual(g), 1e-4) << "step " << k;
  }
}

TEST(ShadowDeviation, CentralOffsetIsPreserved) {
  const double h = 1e-3, tau = 0.25, ht = std::pow(h, tau);
  ShadowOptions o;
  o.h = h;
  o.tau = tau;
  const PhasePoint base = point({0.2, 0, 0, 0});
  const auto rep = shadow_deviation(nh0, PhasePoint(base.z() + ht * vec({1, 0, 0, 0})), base, 8, 0.25, o);
  for (const auto& r : rep.rows) EXPECT_NEAR(std::hypot(r.qx(0), r.px(0)) / ht, 1.0, 0.01) << r.n;
  EXPECT_NEAR(rep.rows[0].jacobian_diff, 0.0, 1e-14);
}

TEST(ShadowDeviation, StableOffsetDecays) {
  const double h = 1e-3, tau = 0.25, ht = std::pow(h, tau), t0 = 0.25;
  ShadowOptions o;
  o.h = h;
  o.tau = tau;
  const PhasePoint base = point({0.2, 0, 0, 0});
  const Vec vs = vec({0, 1, 0, -1}).normalized();
  const auto rep = shadow_deviation(nh0, PhasePoint(base.z() + ht * vs), base, 6, t0, o);
  const double p0 = std::abs(rep.rows[0].py(0));
  for (const auto& r : rep.rows) EXPECT_NEAR(std::abs(r.py(0)) / (p0 * std::exp(-2 * r.n * t0)), 1.0, 0.1) << r.n;
}
