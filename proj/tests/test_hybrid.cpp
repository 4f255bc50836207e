#include "semiclassical/experiments.hpp"
#include "semiclassical/hybrid.hpp"

#include <gtest/gtest.h>

using namespace semiclassical;

namespace {

const auto nh0 = make_model("nh2d", {{"epsilon", 0.0}});

GaussianWavepacket with_gamma(double h, const PhasePoint& c, const CMat& G) {
  return GaussianWavepacket::squeezed(h, c, SiegelMatrix(G));
}

double max_diff(const GridWavefunction& a, const GridWavefunction& b) {
  return (a.values - b.values).cwiseAbs().maxCoeff();
}

struct DecoupledRun {
  Mat F;
  ModelHamiltonian Ha;
  std::vector<HybridState> states;
};

DecoupledRun decoupled_steps(double h, int steps, double t0) {
  const auto s = GaussianWavepacket::coherent(h, point({0.3, 0, 0, 0}));
  const Splitting split = hyperbolic_splitting(nh0, s.center);
  DecoupledRun r;
  r.F = adapted_frame_from_splitting(nh0, split);
  r.Ha = transform_model(nh0, r.F);
  r.states.push_back(hybrid_from_wavepacket(s, split));
  for (int k = 0; k < steps; ++k) r.states.push_back(propagate_hybrid_leading(r.Ha, r.states.back(), t0));
  return r;
}

}  // namespace

TEST(HybridFromWavepacket, BlockDiagonalRoundTrip) {
  const double h = 1e-2;
  const auto s = GaussianWavepacket::coherent(h, point({0.3, 0, 0.1, 0}));
  const Splitting split = hyperbolic_splitting(nh0, s.center);
  const Mat F = adapted_frame_from_splitting(nh0, split);
  const auto hs = hybrid_from_wavepacket(s, split);
  const std::vector<GridAxis> ax{centered_axis(0.3, 1.2, 128), centered_axis(0, 1.2, 128)};
  EXPECT_LT(max_diff(eval_hybrid(hs, ax), eval_wavepacket(transport_excited(F, s), ax)), 1e-10);
  EXPECT_LT(hs.offblock, 1e-12);
}

TEST(HybridFromWavepacket, TransverseSqueezingSetsDelta) {
  const double h = 1e-3;
  for (double eps : {0.1, 0.2, 0.3}) {
    CMat G = CMat::Zero(2, 2);
    G(0, 0) = I1;
    G(1, 1) = I1 * std::pow(h, 2 * eps);
    const auto hs = hybrid_from_wavepacket_in_frame(with_gamma(h, point({0, 0, 0, 0}), G), Mat::Identity(4, 4), 1);
    EXPECT_NEAR(hs.delta_est, 0.5 - eps, 1e-9) << eps;
  }
}

TEST(HybridFromWavepacket, OffBlockCoupling) {
  const double h = 1e-2, E = 1e-4;
  CMat G(2, 2);
  G << I1, E, E, I1;
  const auto s = with_gamma(h, point({0.1, 0.05, -0.2, 0.1}), G);
  const auto hs = hybrid_from_wavepacket_in_frame(s, Mat::Identity(4, 4), 1);
  const std::vector<GridAxis> ax{centered_axis(0.1, 1.2, 128), centered_axis(0.05, 1.2, 128)};
  EXPECT_LT(max_diff(eval_hybrid(hs, ax), eval_wavepacket(s, ax)), E * E / h * 10);
  EXPECT_NEAR(hs.offblock, E, 1e-15);
}

TEST(HybridFromWavepacket, ExcitationRules) {
  const double h = 1e-2;
  auto s = GaussianWavepacket::coherent(h, point({0, 0, 0, 0}));
  s.poly = ComplexPoly(2);
  s.poly.add({0, 1}, 1.0);
  EXPECT_THROW(hybrid_from_wavepacket_in_frame(s, Mat::Identity(4, 4), 1), std::invalid_argument);
  EXPECT_THROW(hybrid_from_wavepacket_in_frame(GaussianWavepacket::coherent(h, point({0, 0})), Mat::Identity(2, 2), 1),
               std::invalid_argument);
}

TEST(EvalHybrid, CentralExcitationNode) {
  const double h = 1e-2;
  CMat G(2, 2);
  G << I1, 0.3, 0.3, Complex(0.2, 1.0);
  auto s = with_gamma(h, point({0.2, 0, 0, 0}), G);
  auto hs = hybrid_from_wavepacket_in_frame(s, Mat::Identity(4, 4), 1);
  hs.poly = ComplexPoly(1);
  hs.poly.add({1}, 1.0);
  const GridAxis xa = centered_axis(0.2, 1.2, 256), ya = centered_axis(0, 0.3, 7);
  const auto u = eval_hybrid(hs, {xa, ya}, {false});
  for (int k = 0; k < ya.count; ++k) {
    const double xb = hs.graph.sample(ya.at(k)).z(0);
    // Re of the de-phased x-marginal changes sign at x = x_bar(y)
    const int i = static_cast<int>(std::floor((xb - xa.origin) / xa.spacing));
    const Complex a = u.values(i * ya.count + k), b = u.values((i + 1) * ya.count + k);
    EXPECT_LT(std::real(a * std::conj(b)), 0.0) << k;
  }
}

TEST(EvalHybrid, NormMatchesAmplitudeQuadrature) {
  const double h = 1e-2;
  CMat G(2, 2);
  G << I1, 0.3, 0.3, Complex(0.2, 1.0);
  const auto hs = hybrid_from_wavepacket_in_frame(with_gamma(h, point({0.2, 0, 0, 0}), G), Mat::Identity(4, 4), 1);
  double quad = 0;
  for (int i = 0; i < hs.size(); ++i) quad += std::norm(hs.u[i]);
  quad = std::sqrt(quad * hs.graph.grid.dy);
  const auto u = eval_hybrid(hs, {centered_axis(0.2, 1.5, 256), centered_axis(0, 1.5, 256)});
  EXPECT_NEAR(u.norm(), quad, 1e-3);
}

TEST(TIApply, FlatGraphIsIdentity) {
  const double h = 1e-2;
  ManifoldGraph g = linear_graph({-2, 0.01, 401}, vec({0}), vec({0}), vec({0}), vec({0}), 0.0, 0.0);
  const auto v = eval_wavepacket(GaussianWavepacket::coherent(h, point({0.1, 0.2, 0, 0.1})),
                                 {centered_axis(0, 1.2, 128), centered_axis(0, 1.2, 128)});
  EXPECT_LT(max_diff(t_I_apply(g, v), v), 1e-12);
}

TEST(TIApply, UnitaryAndAdjoint) {
  const double h = 1e-2;
  const ManifoldGraph g = linear_graph({-2, 0.01, 401}, vec({0.1}), vec({0.2}), vec({0.05}), vec({-0.1}), 0.0, 0.3);
  const auto v = eval_wavepacket(GaussianWavepacket::coherent(h, point({0.0, 0.2, 0, 0.1})),
                                 {centered_axis(0, 1.2, 128), centered_axis(0, 1.2, 128)});
  const auto tv = t_I_apply(g, v);
  EXPECT_NEAR(tv.norm(), v.norm(), 1e-4);
  EXPECT_LT(max_diff(t_I_adjoint(g, tv), v) / v.values.cwiseAbs().maxCoeff(), 1e-4);
}

TEST(PropagateHybridLeading, DecoupledCentralSiegelIsConstant) {
  const auto run = decoupled_steps(1e-2, 3, 0.1);
  for (const auto& hs : run.states) {
    const CMat g0 = hs.gamma_par(hs.size() / 2).gamma;
    double var = 0;
    for (int i = 0; i < hs.size(); ++i) var = std::max(var, (hs.gamma_par(i).gamma - g0).norm());
    EXPECT_LT(var, 1e-8);
    for (const auto& g : hs.gamma_par()) EXPECT_TRUE(g.valid());
  }
}

TEST(PropagateHybridLeading, DimensionMismatchRaises) {
  const auto run = decoupled_steps(1e-2, 0, 0.1);
  EXPECT_THROW(propagate_hybrid_leading(make_model("harmonic"), run.states[0], 0.1), std::invalid_argument);
}

TEST(PropagateHybridLeading, DecoupledMatchesOracle) {
  RunContext ctx;
  HybridPipelineOptions o;
  o.hbar = 1e-2;
  o.epsilon = 0.0;
  o.eps_s = 0.1;
  o.t_end_factor = 0.5;  // 1.5 t_cr
  o.nx = 128;
  o.ny = 512;
  o.x_half = 1.3;
  const auto r = run_hybrid_pipeline(o, ctx);
  EXPECT_GE(r.final_overlap, 0.99);
  for (const auto& s : r.steps) EXPECT_LT(s.isotropy, 1e-4);
}

TEST(EstimateReport, DecoupledSupportAndSmoothing) {
  const double t0 = 0.1;
  const auto run = decoupled_steps(1e-2, 4, t0);
  DynamicalRates rates;
  rates.lambda_max = 2;
  rates.nu_min_perp = 2;
  double prev_support = 0, prev_delta = 1;
  for (size_t k = 0; k < run.states.size(); ++k) {
    const auto rep = hybrid_estimate_report(run.states[k], rates, k * t0);
    EXPECT_LT(rep.dgamma_max, 1e-8);
    if (k > 0) {
      EXPECT_NEAR(rep.support_diameter / prev_support, std::exp(2 * t0), 0.1 * std::exp(2 * t0)) << k;
      EXPECT_LT(rep.delta_measured, prev_delta) << k;
    }
    prev_support = rep.support_diameter;
    prev_delta = rep.delta_measured;
  }
}

TEST(EstimateReport, RequiresProvenance) {
  HybridState hs;
  EXPECT_THROW(hybrid_estimate_report(hs, DynamicalRates{}, 0.0), InvariantError);
}
