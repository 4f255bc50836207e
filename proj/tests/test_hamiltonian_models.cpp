#include "semiclassical/hamiltonian_models.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace semiclassical;

namespace {

const std::vector<std::pair<std::string, Params>> catalog{
    {"harmonic", {{"d", 2}}},
    {"dilation", {{"d", 1}}},
    {"anharmonic_quartic", {{"beta", 0.1}}},
    {"saddle_cubic", {{"beta", 0.3}}},
    {"nh2d", {{"epsilon", 0.1}}},
};

}  // namespace

TEST(MakeModel, DilationSymbolIsXXi) {
  EXPECT_DOUBLE_EQ(make_model("dilation", {{"d", 1}}).eval(vec({2, 3})), 6.0);
}

TEST(MakeModel, HarmonicIsQuadratic) { EXPECT_TRUE(make_model("harmonic").is_quadratic); }

TEST(MakeModel, Nh2dVectorFieldOnK) {
  const Vec f = make_model("nh2d", {{"epsilon", 0.1}}).vector_field(vec({1, 0, 0, 0}));
  EXPECT_NEAR((f - vec({0, 0, -2, 0})).norm(), 0.0, 1e-14);
}

TEST(MakeModel, UnknownNameAndMissingParameterRaise) {
  EXPECT_THROW(make_model("no_such_model"), ConfigError);
  EXPECT_THROW(make_model("saddle_cubic"), ConfigError);
  EXPECT_THROW(make_model("harmonic", {{"bogus", 1}}), ConfigError);
}

TEST(TaylorTensor, HarmonicThirdOrderVanishes) {
  const auto H = make_model("harmonic");
  EXPECT_EQ(H.taylor_tensor(vec({0.3, -1.2}), 3).max_abs(), 0.0);
}

TEST(TaylorTensor, QuarticCoefficient) {
  const auto H = make_model("anharmonic_quartic", {{"beta", 0.1}});
  EXPECT_NEAR(H.taylor_polynomial(vec({0, 0}), 4).coeff({4, 0}), 0.1, 1e-15);
  EXPECT_NEAR(H.taylor_tensor(vec({0, 0}), 4).at({0, 0, 0, 0}), 0.1, 1e-15);
}

TEST(TaylorTensor, SaddleHessian) {
  const auto H = make_model("saddle_cubic", {{"beta", 1.0}});
  EXPECT_NEAR(H.taylor_tensor(vec({1, 0}), 2).at({0, 0}), 2.0, 1e-14);
}

TEST(TaylorTensor, RoundTripsThroughPolynomial) {
  const auto H = make_model("nh2d", {{"epsilon", 0.1}});
  const Vec rho = vec({0.2, -0.4, 0.1, 0.3});
  for (int k = 0; k <= 3; ++k) {
    const RealPoly p = H.taylor_polynomial(rho, k);
    const RealPoly q = H.taylor_tensor(rho, k).to_polynomial();
    const Vec z = vec({0.7, -0.1, 0.5, 0.9});
    EXPECT_NEAR(p(z), q(z), 1e-13) << "k=" << k;
  }
}

TEST(VectorField, Examples) {
  EXPECT_NEAR((make_model("harmonic").vector_field(vec({1, 0})) - vec({0, -2})).norm(), 0, 1e-15);
  EXPECT_NEAR((make_model("dilation").vector_field(vec({1, 1})) - vec({1, -1})).norm(), 0, 1e-15);
  const Vec f = make_model("nh2d", {{"epsilon", 0.0}}).vector_field(vec({0, 1, 0, 0}));
  EXPECT_NEAR((f - vec({0, 0, 0, 2})).norm(), 0, 1e-15);
}

// Property: derivatives agree with central finite differences of the symbol.
TEST(ModelProperties, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& [name, params] : catalog) {
    const auto H = make_model(name, params);
    const int n = 2 * H.d;
    for (int trial = 0; trial < 10; ++trial) {
      Vec z(n);
      for (int i = 0; i < n; ++i) z(i) = u(rng);
      const double h = 1e-4;
      const Vec g = H.gradient(z);
      const Mat Hs = H.hessian(z);
      for (int i = 0; i < n; ++i) {
        Vec e = Vec::Zero(n);
        e(i) = h;
        const double fd = (H.eval(z + e) - H.eval(z - e)) / (2 * h);
        EXPECT_NEAR(fd, g(i), 1e-6 * (1 + std::abs(g(i)))) << name;
        const Vec fdg = (H.gradient(z + e) - H.gradient(z - e)) / (2 * h);
        EXPECT_NEAR((fdg - Hs.col(i)).norm(), 0, 1e-6 * (1 + Hs.col(i).norm())) << name;
      }
    }
  }
}

TEST(ModelProperties, InvariantManifoldIsInvariant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const auto& [name, params] : catalog) {
    const auto H = make_model(name, params);
    if (!H.has_invariant_K || H.d_perp == 0) continue;
    for (int trial = 0; trial < 20; ++trial) {
      Vec z = Vec::Zero(2 * H.d);
      for (int j = 0; j < H.d_par; ++j) {
        z(j) = u(rng);
        z(H.d + j) = u(rng);
      }
      const Vec f = H.vector_field(z);
      for (int j = H.d_par; j < H.d; ++j) {
        EXPECT_LT(std::abs(f(j)), 1e-12) << name;
        EXPECT_LT(std::abs(f(H.d + j)), 1e-12) << name;
      }
    }
  }
}

TEST(ModelProperties, QuadraticModelsHaveNoHigherTensors) {
  for (const auto& [name, params] : catalog) {
    const auto H = make_model(name, params);
    if (!H.is_quadratic) continue;
    for (int k = 3; k <= 4; ++k) EXPECT_EQ(H.taylor_tensor(Vec::Constant(2 * H.d, 0.3), k).max_abs(), 0.0) << name;
  }
}
