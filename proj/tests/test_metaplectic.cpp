#include "semiclassical/metaplectic.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace semiclassical;

namespace {

Mat diag2(double a, double b) { return vec({a, b}).asDiagonal(); }
Mat rotation_half_pi() {
  Mat R(2, 2);
  R << 0, 1, -1, 0;
  return R;
}
const SiegelMatrix iI = SiegelMatrix::identity(1);

double overlap_mag(const GridWavefunction& a, const GridWavefunction& b) {
  return std::abs(inner_product(a, b)) / (a.norm() * b.norm());
}

}  // namespace

TEST(FrameFromSymplectic, Examples) {
  const auto f0 = frame_from_symplectic(Mat::Identity(2, 2), iI);
  EXPECT_NEAR(std::abs(f0.M(0, 0) - 1.0), 0, 1e-15);
  EXPECT_NEAR(std::abs(f0.N(0, 0) - I1), 0, 1e-15);
  EXPECT_NEAR(std::abs(frame_from_symplectic(diag2(2, 0.5), iI).gamma().gamma(0, 0) - I1 / 4.0), 0, 1e-14);
  EXPECT_NEAR(std::abs(frame_from_symplectic(rotation_half_pi(), iI).gamma().gamma(0, 0) - I1), 0, 1e-14);
}

TEST(SiegelAction, Examples) {
  std::mt19937_64 rng(5);
  const SiegelMatrix g = siegel_action(random_symplectic(2, rng), SiegelMatrix::identity(2));
  EXPECT_LT((siegel_action(Mat::Identity(4, 4), g).gamma - g.gamma).norm(), 1e-15);
  EXPECT_NEAR(std::abs(siegel_action(diag2(2, 0.5), iI).gamma(0, 0) - I1 / 4.0), 0, 1e-15);
}

TEST(SiegelAction, GroupLaw) {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + k % 3;
    const Mat k1 = random_symplectic(d, rng), k2 = random_symplectic(d, rng);
    const SiegelMatrix g = siegel_action(random_symplectic(d, rng), SiegelMatrix::identity(d));
    const CMat a = siegel_action(k2, siegel_action(k1, g)).gamma;
    const CMat b = siegel_action(k2 * k1, g).gamma;
    EXPECT_LT((a - b).norm(), 1e-9 * std::max(1.0, b.norm())) << k;
  }
}

TEST(SiegelAction, OutputIsSiegel) {
  std::mt19937_64 rng(19);
  for (int k = 0; k < 30; ++k) {
    const int d = 1 + k % 3;
    EXPECT_TRUE(siegel_action(random_symplectic(d, rng), SiegelMatrix::identity(d)).valid());
  }
}

TEST(SiegelAction, AgreesWithFrameComposition) {
  std::mt19937_64 rng(37);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + k % 3;
    const SiegelMatrix g = siegel_action(random_symplectic(d, rng), SiegelMatrix::identity(d));
    const Mat K = random_symplectic(d, rng);
    EXPECT_LT((siegel_action(K, g).gamma - frame_from_symplectic(K, g).gamma().gamma).norm(), 1e-9);
  }
}

TEST(FrameFromSymplectic, NonSymplecticRaises) {
  EXPECT_THROW(frame_from_symplectic(diag2(2, 2), iI), InvariantError);
}

TEST(TransportExcited, IdentityKeepsPolynomial) {
  auto s = GaussianWavepacket::coherent(0.01, point({0.1, 0.2}));
  s.poly = ComplexPoly(1);
  s.poly.add({3}, Complex(0.3, -0.2));
  s.poly.add({1}, 1.0);
  const auto t = transport_excited(Mat::Identity(2, 2), s);
  EXPECT_LT((t.poly - s.poly).sup_norm(), 1e-12);
}

TEST(TransportExcited, DilatedFirstExcited) {
  auto s = GaussianWavepacket::coherent(0.01, point({0, 0}));
  s.poly = ComplexPoly(1);
  s.poly.add({1}, 1.0);
  const auto t = transport_excited(diag2(2, 0.5), s);
  EXPECT_NEAR(std::abs(t.gamma().gamma(0, 0) - I1 / 4.0), 0, 1e-14);
  EXPECT_EQ(t.poly.degree(), 1);
  EXPECT_NEAR(std::abs(t.poly.coeff({1})), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(t.poly.coeff({0})), 0.0, 1e-12);
  // grid check against u(x/2)/sqrt(2)
  const std::vector<GridAxis> ax{centered_axis(0, 2.5, 1024)};
  const auto a = eval_wavepacket(t, ax);
  GridWavefunction b(0.01, ax);
  const WavepacketEvaluator ev(s);
  for (size_t f = 0; f < b.size(); ++f) b.values(f) = ev(b.coordinate(f) / 2) / std::sqrt(2.0);
  EXPECT_GT(overlap_mag(a, b), 1 - 1e-12);
}

TEST(TransportExcited, DegreePreserved) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int k = 0; k < 50; ++k) {
    const int d = 1 + k % 2;
    auto s = GaussianWavepacket::coherent(0.01, PhasePoint(Vec::Zero(2 * d)));
    const int deg = 1 + k % 4;
    s.poly = ComplexPoly(d);
    for (const auto& a : multi_indices_up_to(d, deg)) s.poly.add(a, Complex(u(rng), u(rng)));
    const auto t = transport_excited(random_symplectic(d, rng), s);
    EXPECT_EQ(t.poly.degree(), s.poly.degree()) << k;
  }
}

TEST(TraceIdentity, Examples) {
  EXPECT_LT(trace_identity_residual(HagedornFrame::standard(1)), 1e-12);
  HagedornFrame f{CMat::Constant(1, 1, 2.0), CMat::Constant(1, 1, I1 / 2.0)};
  EXPECT_NEAR(std::abs(f.gamma().gamma(0, 0) - I1 / 4.0), 0, 1e-15);
  EXPECT_LT(trace_identity_residual(f), 1e-12);
  std::mt19937_64 rng(29);
  for (int k = 0; k < 100; ++k) {
    const int d = 1 + k % 3;
    EXPECT_LT(trace_identity_residual(advance_frame(random_symplectic(d, rng), HagedornFrame::standard(d))), 1e-8);
  }
}

TEST(MetaplecticApplyGrid, IdentityAndFourier) {
  const double h = 0.01;
  const auto s = GaussianWavepacket::coherent(h, point({0.3, -0.4}));
  const std::vector<GridAxis> ax{centered_axis(0, 2.0, 512)};
  const auto u = eval_wavepacket(s, ax);
  EXPECT_LT((metaplectic_apply_grid(Mat::Identity(2, 2), u).values - u.values).cwiseAbs().maxCoeff(), 1e-12);
  // direct quadrature of (2 pi h)^{-1/2} int e^{-i x xi / h} u(x) dx
  GridWavefunction ref(h, ax);
  const auto& a = ax[0];
  for (int i = 0; i < a.count; ++i) {
    Complex acc = 0;
    for (int j = 0; j < a.count; ++j) acc += std::exp(-I1 * a.at(i) * a.at(j) / h) * u.values(j);
    ref.values(i) = acc * a.spacing / std::sqrt(2 * pi * h);
  }
  const auto F = metaplectic_apply_grid(symplectic_J(1), u);
  EXPECT_GT(overlap_mag(F, ref), 1 - 1e-10);
}

TEST(MetaplecticApplyGrid, MatchesFrameEvaluation) {
  const double h = 0.01;
  std::mt19937_64 rng(31);
  const auto s = GaussianWavepacket::coherent(h, point({0, 0}));
  for (int k = 0; k < 20; ++k) {
    const Mat K = random_symplectic(1, rng, 0.4);
    const auto t = transport_excited(K, s);
    const double half = 12 * std::max(wavepacket_spreads(t).first, wavepacket_spreads(s).first);
    const double pmax = 12 * std::max(wavepacket_spreads(t).second, wavepacket_spreads(s).second);
    const int n = 1 << static_cast<int>(std::ceil(std::log2(2 * half * pmax / (pi * h))));
    const std::vector<GridAxis> ax{centered_axis(0, half, std::max(n, 256))};
    const auto g = metaplectic_apply_grid(K, eval_wavepacket(s, ax));
    EXPECT_GT(overlap_mag(g, eval_wavepacket(t, ax)), 1 - 1e-6) << k;
  }
}
