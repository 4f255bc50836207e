#include "semiclassical/classical_dynamics.hpp"
#include "semiclassical/oracle.hpp"
#include "semiclassical/propagator.hpp"

#include <gtest/gtest.h>

using namespace semiclassical;

namespace {

const auto harmonic = make_model("harmonic");
const auto quartic = make_model("anharmonic_quartic", {{"beta", 0.1}});
const auto saddle = make_model("saddle_cubic", {{"beta", 0.3}});

GridWavefunction oracle(const ModelHamiltonian& H, const GaussianWavepacket& s0, const std::vector<GridAxis>& ax,
                        double t, double dt = 1e-3) {
  SplitStepOptions o;
  o.dt = dt;
  return split_step_evolve(H, eval_wavepacket(s0, ax), t, o);
}

double error_vs(const GaussianWavepacket& s, const GridWavefunction& u) {
  return compare(eval_wavepacket(s, u.axes, {false}), u).l2_error;
}

}  // namespace

TEST(PropagateOrder0, HarmonicIsExact) {
  const auto s0 = GaussianWavepacket::coherent(1e-2, point({0.5, 0.2}));
  const std::vector<GridAxis> ax{centered_axis(0, 1.6, 512)};
  for (double t : {0.5, 1.0, 2.0}) {
    const auto u = oracle(harmonic, s0, ax, t);
    const auto m = compare(eval_wavepacket(propagate_order0(harmonic, s0, t), ax), u);
    EXPECT_GT(m.overlap_mag, 1 - 1e-8) << t;
    EXPECT_LT(m.l2_error, 1e-5) << t;  // phase included
  }
}

TEST(PropagateOrder0, DilationGamma) {
  const auto H = make_model("dilation");
  for (double t : {0.5, std::log(2.0), 2.0}) {
    const auto s = propagate_order0(H, GaussianWavepacket::coherent(1e-2, point({0, 0})), t);
    EXPECT_NEAR(std::abs(s.gamma().gamma(0, 0) - I1 * std::exp(-2 * t)), 0, 1e-8);
  }
}

TEST(PropagateOrderN, QuadraticCorrectionsVanish) {
  for (const auto& H : {harmonic, make_model("harmonic", {{"d", 2}}), make_model("dilation", {{"d", 2}}),
                        make_model("saddle_cubic", {{"beta", 0.0}})}) {
    const auto s = GaussianWavepacket::coherent(1e-2, PhasePoint(Vec::Constant(2 * H.d, 0.2)));
    const auto e = propagate_orderN(H, s, 1.0, 4);
    for (int n = 1; n <= 4; ++n) EXPECT_LT(e.corrections[n].sup_norm(), 1e-12) << H.name << " n=" << n;
  }
}

TEST(PropagateOrderN, DegreeLaw) {
  for (const auto& H : {quartic, saddle, make_model("nh2d", {{"epsilon", 0.1}})}) {
    const auto s = GaussianWavepacket::coherent(1e-2, PhasePoint(Vec::Constant(2 * H.d, 0.1)));
    const auto e = propagate_orderN(H, s, 0.7, 3);
    EXPECT_EQ(e.max_degree_violation(), -1) << H.name;
    for (int n = 1; n <= 3; ++n) EXPECT_LE(e.corrections[n].degree(), 3 * n) << H.name;
  }
}

TEST(PropagateOrderN, OrderValidation) {
  const auto s = GaussianWavepacket::coherent(1e-2, point({0, 0}));
  EXPECT_THROW(propagate_orderN(quartic, s, 1.0, 5), std::invalid_argument);
  EXPECT_THROW(propagate_orderN(quartic, s, 1.0, -1), std::invalid_argument);
}

// Oracle errors for anharmonic_quartic (beta = 0.1, q0 = 0.5, T = 1), split-step reference.
// Frozen from the grid oracle at dt = 2e-4 on a 2048-point window of half-width 1.6.
TEST(PropagateOrderN, QuarticErrorsAgainstOracle) {
  const double h = 1e-2;
  const auto s0 = GaussianWavepacket::coherent(h, point({0.5, 0}));
  const std::vector<GridAxis> ax{centered_axis(0, 1.6, 2048)};
  const auto u = oracle(quartic, s0, ax, 1.0, 2e-4);
  const double e0 = error_vs(propagate_orderN(quartic, s0, 1.0, 0).to_wavepacket(), u);
  const double e1 = error_vs(propagate_orderN(quartic, s0, 1.0, 1).to_wavepacket(), u);
  EXPECT_NEAR(e0, 0.0099571, 1e-6);
  EXPECT_NEAR(e1, 0.0009194, 1e-6);
  EXPECT_LT(e1, e0);
}

TEST(SegmentedPropagate, QuadraticMatchesSingleShot) {
  const auto s0 = GaussianWavepacket::squeezed(1e-2, point({0.4, -0.3}), SiegelMatrix(Complex(0.3, 2.0) * CMat::Identity(1, 1)));
  const std::vector<GridAxis> ax{centered_axis(0, 2, 1024)};
  const auto one = eval_wavepacket(propagate_orderN(harmonic, s0, 1.3, 0).to_wavepacket(), ax);
  for (int n : {1, 3, 7}) {
    const auto seg = eval_wavepacket(segmented_propagate(harmonic, s0, n, 1.3 / n, 0).to_wavepacket(), ax);
    EXPECT_GT(compare(seg, one).overlap_mag, 1 - 1e-8) << n;
  }
}

TEST(SegmentedPropagate, QuarticFourSegments) {
  const double h = 1e-3;
  const auto s0 = GaussianWavepacket::coherent(h, point({0.5, 0}));
  const std::vector<GridAxis> ax{centered_axis(0.2, 1.2, 2048)};
  const auto single = eval_wavepacket(propagate_orderN(quartic, s0, 1.0, 2).to_wavepacket(), ax, {false});
  const auto seg = eval_wavepacket(segmented_propagate(quartic, s0, 4, 0.25, 2).to_wavepacket(), ax, {false});
  EXPECT_GT(compare(seg, single).overlap_mag, 1 - 10 * std::pow(h, 1.5));
}

TEST(SegmentedPropagate, ThresholdGuard) {
  const auto s0 = GaussianWavepacket::coherent(1e-3, point({0, 0}));
  SegmentOptions o;
  o.t_limit = 0.5;
  EXPECT_THROW(segmented_propagate(saddle, s0, 4, 0.25, 0, o), ConfigError);
  o.override_limit = true;
  EXPECT_NO_THROW(segmented_propagate(saddle, s0, 4, 0.25, 0, o));
}

TEST(SegmentedPropagate, SaddleBreakdownOnset) {
  const double h = 1e-4;
  DynamicalRates r;
  r.lambda_max = lyapunov_max(saddle, sample_K(saddle, 1, 0), 8.0).lambda_max;
  const double tcr = time_thresholds(r, h).t_cr;
  const auto s0 = GaussianWavepacket::coherent(h, point({0, 0}));
  const int n = 4096;
  const std::vector<GridAxis> ax{centered_axis(0, std::sqrt(pi * h * n / 2), n)};
  SegmentOptions so;
  so.override_limit = true;
  const double e_cr = error_vs(segmented_propagate(saddle, s0, 4, tcr / 4, 0, so).to_wavepacket(),
                               oracle(saddle, s0, ax, tcr, 2e-4));
  const double t_late = 1.6 * tcr;
  const double e_late = error_vs(segmented_propagate(saddle, s0, 8, t_late / 8, 0, so).to_wavepacket(),
                                 oracle(saddle, s0, ax, t_late, 2e-4));
  EXPECT_LT(e_cr, 0.1);
  EXPECT_GT(e_late, 0.1);
}

TEST(GrowthSample, RecordsNormsAndDegrees) {
  const auto e = propagate_orderN(saddle, GaussianWavepacket::coherent(1e-2, point({0, 0})), 0.5, 2);
  const auto g = growth_sample(e);
  ASSERT_EQ(g.sup_norms.size(), 3u);
  EXPECT_NEAR(g.sup_norms[0], 1.0, 1e-12);
  EXPECT_GT(g.sup_norms[1], 0.0);
  EXPECT_LE(g.degrees[2], 6);
  EXPECT_GT(g.kappa_norm, 1.0);
}
