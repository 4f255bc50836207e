#include "semiclassical/oracle.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace semiclassical;

namespace {

ModelHamiltonian free_particle() {
  RealPoly p(2);
  p.add({0, 2}, 1.0);
  return ModelHamiltonian::from_symbol("free", 1, 1, p, RealPoly(1));
}

}  // namespace

TEST(SplitStepEvolve, FreeGaussianClosedForm) {
  const double h = 0.01, t = 0.3;
  const std::vector<GridAxis> ax{centered_axis(0, 3, 1024)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(h, point({0, 0})), ax);
  SplitStepOptions o;
  o.dt = 1e-3;
  const auto u = split_step_evolve(free_particle(), u0, t, o);
  // p = xi^2: Gamma_t = Gamma / (1 + 2 t Gamma), amplitude (1 + 2 t Gamma)^{-1/2}
  const Complex g0 = I1, den = 1.0 + 2.0 * t * g0, gt = g0 / den;
  double worst = 0;
  for (size_t f = 0; f < u.size(); ++f) {
    const double x = u.coordinate(f)(0);
    const Complex ref = std::pow(pi * h, -0.25) / std::sqrt(den) * std::exp(I1 * gt * x * x / (2 * h));
    worst = std::max(worst, std::abs(u.values(f) - ref));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(SplitStepEvolve, HarmonicRevival) {
  const double h = 0.01;
  const auto H = make_model("harmonic");
  const std::vector<GridAxis> ax{centered_axis(0, 2, 512)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(h, point({0.5, 0.3})), ax);
  SplitStepOptions o;
  o.dt = 1e-3;
  const auto u = split_step_evolve(H, u0, std::numbers::pi, o);
  EXPECT_NEAR(compare(u, u0).overlap_mag, 1.0, 1e-6);
}

TEST(SplitStepEvolve, NormConservation) {
  const double h = 0.01;
  const auto H = make_model("anharmonic_quartic", {{"beta", 0.1}});
  const std::vector<GridAxis> ax{centered_axis(0, 2, 512)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(h, point({0.3, 0})), ax);
  SplitStepOptions o;
  o.dt = 1e-3;
  SplitStepStats st;
  split_step_evolve(H, u0, 1.0, o, &st);
  EXPECT_EQ(st.steps, 1000);
  EXPECT_LT(st.norm_drift, 1e-12);
}

TEST(SplitStepEvolve, RejectsNonKineticModels) {
  const std::vector<GridAxis> ax{centered_axis(0, 2, 256)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(0.01, point({0, 0})), ax);
  EXPECT_THROW(split_step_evolve(make_model("dilation"), u0, 0.1), std::invalid_argument);
}

TEST(SplitStepEvolve, BoundaryContaminationRaises) {
  const std::vector<GridAxis> ax{centered_axis(0, 1, 256)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(0.01, point({0, 0})), ax);
  SplitStepOptions o;
  o.dt = 1e-3;
  EXPECT_THROW(split_step_evolve(make_model("saddle_cubic", {{"beta", 0.0}}), u0, 3.0, o), CoverageError);
}

TEST(DilationExact, Examples) {
  const double h = 0.01;
  const std::vector<GridAxis> ax{centered_axis(0, 2, 512)};
  const auto u0 = eval_wavepacket(GaussianWavepacket::coherent(h, point({0, 0})), ax);
  EXPECT_EQ((dilation_exact(u0, 0.0).values - u0.values).norm(), 0.0);
  for (double t : {0.3, std::log(2.0)}) {
    const auto u = dilation_exact(u0, t);
    const auto ref = eval_wavepacket(
        GaussianWavepacket::squeezed(h, point({0, 0}), SiegelMatrix(I1 * std::exp(-2 * t) * CMat::Identity(1, 1))), ax);
    EXPECT_GT(compare(u, ref).overlap_mag, 1 - 1e-6);
    EXPECT_NEAR(u.norm(), u0.norm(), 1e-6);
  }
}

TEST(Compare, Examples) {
  const std::vector<GridAxis> ax{centered_axis(0, 2, 256)};
  const auto a = eval_wavepacket(GaussianWavepacket::coherent(0.01, point({0, 0})), ax);
  const auto m0 = compare(a, a);
  EXPECT_EQ(m0.l2_error, 0.0);
  EXPECT_NEAR(m0.overlap_mag, 1.0, 1e-14);
  EXPECT_NEAR(m0.phase_insensitive_error, 0.0, 1e-7);
  const double th = 0.7;
  auto b = a;
  b.values *= std::polar(1.0, th);
  const auto m1 = compare(a, b);
  EXPECT_NEAR(m1.l2_error, std::abs(std::polar(1.0, th) - 1.0) * a.norm(), 1e-12);
  EXPECT_NEAR(m1.overlap_mag, 1.0, 1e-14);
  EXPECT_NEAR(m1.phase_insensitive_error, 0.0, 1e-7);
  auto s1 = GaussianWavepacket::coherent(0.01, point({0, 0}));
  s1.poly = ComplexPoly(1);
  s1.poly.add({1}, std::sqrt(2.0));
  const auto m2 = compare(a, eval_wavepacket(s1, ax));
  EXPECT_NEAR(m2.overlap_mag, 0.0, 1e-12);
  EXPECT_NEAR(m2.phase_insensitive_error, std::sqrt(2.0), 1e-9);
}

TEST(ConvergenceSlope, Examples) {
  std::vector<std::pair<double, double>> p1, p2, p3;
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> noise(-0.05, 0.05);
  for (double h : {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}) {
    p1.emplace_back(h, std::sqrt(h));
    p2.emplace_back(h, 3 * h);
    p3.emplace_back(h, std::sqrt(h) * (1 + noise(rng)));
  }
  EXPECT_NEAR(convergence_slope(p1).slope, 0.5, 1e-10);
  EXPECT_NEAR(convergence_slope(p2).slope, 1.0, 1e-10);
  EXPECT_NEAR(convergence_slope(p2).intercept, std::log(3.0), 1e-10);
  EXPECT_NEAR(convergence_slope(p3).slope, 0.5, 0.05);
  EXPECT_THROW(convergence_slope({{1e-2, 1}, {1e-3, 0}, {1e-4, 1}}), std::invalid_argument);
}

TEST(LinearFit, ExactLine) {
  const auto f = linear_fit({1, 2, 3, 4}, {1.5, 3.5, 5.5, 7.5});
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, -0.5, 1e-14);
  EXPECT_NEAR(f.r2, 1.0, 1e-14);
  EXPECT_NEAR(f.slope_stderr, 0.0, 1e-7);
}
