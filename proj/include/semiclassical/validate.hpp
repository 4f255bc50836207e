#pragma once

#include "semiclassical/hybrid.hpp"
#include "semiclassical/oracle.hpp"
#include "semiclassical/propagator.hpp"

#include <random>

namespace semiclassical {

struct InvariantCheck {
  std::string name;
  double residual = 0.0;
  double tol = 0.0;
  bool pass() const { return residual <= tol; }
};

inline SiegelMatrix random_siegel(int d, std::mt19937_64& rng) {
  return siegel_action(random_symplectic(d, rng), SiegelMatrix::identity(d));
}

inline double siegel_group_law_residual(int pairs, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    const int d = 1 + k % 3;
    const Mat k1 = random_symplectic(d, rng), k2 = random_symplectic(d, rng);
    const SiegelMatrix g = random_siegel(d, rng);
    const CMat a = siegel_action(k1 * k2, g).gamma;
    const CMat b = siegel_action(k1, siegel_action(k2, g)).gamma;
    worst = std::max(worst, (a - b).norm() / std::max(1.0, a.norm()));
  }
  return worst;
}

inline double trace_identity_max(int frames, std::mt19937_64& rng) {
  double worst = 0.0;
  for (int k = 0; k < frames; ++k) {
    const int d = 1 + k % 3;
    const HagedornFrame f = advance_frame(random_symplectic(d, rng), HagedornFrame::standard(d));
    worst = std::max(worst, trace_identity_residual(f));
  }
  return worst;
}

// Frame invariants along variational trajectories of the catalog models.
inline std::array<double, 3> frame_invariants_along_flows(int trajectories, std::mt19937_64& rng) {
  std::array<double, 3> worst{0, 0, 0};
  const std::vector<ModelHamiltonian> models{make_model("anharmonic_quartic", {{"beta", 0.1}}),
                                             make_model("saddle_cubic", {{"beta", 0.3}}),
                                             make_model("nh2d", {{"epsilon", 0.1}}),
                                             make_model("harmonic", {{"d", 3}})};
  std::uniform_real_distribution<double> ud(-0.3, 0.3);
  for (int k = 0; k < trajectories; ++k) {
    const auto& H = models[k % models.size()];
    Vec z(2 * H.d);
    for (int i = 0; i < z.size(); ++i) z(i) = ud(rng);
    const HagedornFrame f0 = advance_frame(random_symplectic(H.d, rng), HagedornFrame::standard(H.d));
    for (double t : {0.25, 0.5, 1.0}) {
      const HagedornFrame f = advance_frame(flow_map(H, z, t).kappa, f0);
      worst[0] = std::max(worst[0], f.complex_symplectic_residual());
      worst[1] = std::max(worst[1], f.gamma().symmetry_residual() + f.symmetry_residual());
      worst[2] = std::max(worst[2], f.im_gamma_residual());
    }
  }
  return worst;
}

inline std::array<double, 2> flow_symplecticity_and_cocycle() {
  double sym = 0.0, coc = 0.0;
  for (const auto& H : {make_model("anharmonic_quartic", {{"beta", 0.1}}), make_model("nh2d", {{"epsilon", 0.1}}),
                        make_model("saddle_cubic", {{"beta", 0.3}})}) {
    Vec z = Vec::Constant(2 * H.d, 0.2);
    const FlowResult a = flow_map(H, z, 0.7), b = flow_map(H, a.z, 0.5), ab = flow_map(H, z, 1.2);
    sym = std::max({sym, symplectic_residual(a.kappa), symplectic_residual(ab.kappa)});
    coc = std::max(coc, (b.kappa * a.kappa - ab.kappa).norm() / ab.kappa.norm());
  }
  return {sym, coc};
}

// Runs every invariant family quickly; the CLI `validate` command prints this table.
inline std::vector<InvariantCheck> validate_suite(std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  std::vector<InvariantCheck> out;
  out.push_back({"siegel group law (100 pairs, d<=3)", siegel_group_law_residual(100, rng), 1e-9});
  out.push_back({"trace identity (100 frames)", trace_identity_max(100, rng), 1e-8});
  const auto fi = frame_invariants_along_flows(20, rng);
  out.push_back({"frame M*N - N*M = 2i", fi[0], 1e-9});
  out.push_back({"frame Gamma symmetric", fi[1], 1e-9});
  out.push_back({"frame Im Gamma = conj(M)^-T M^-1", fi[2], 1e-9});
  const auto sc = flow_symplecticity_and_cocycle();
  out.push_back({"flow symplecticity", sc[0], 1e-8});
  out.push_back({"flow cocycle", sc[1], 1e-8});

  // dilation: Gamma(t) = i e^{-2t}
  {
    const auto H = make_model("dilation", {{"d", 1}});
    double worst = 0.0;
    for (double t : {0.5, std::log(2.0), 2.0}) {
      const auto s = propagate_order0(H, GaussianWavepacket::coherent(1e-2, point({0, 0})), t);
      worst = std::max(worst, std::abs(s.gamma().gamma(0, 0) - I1 * std::exp(-2 * t)));
    }
    out.push_back({"dilation Gamma(t) = i exp(-2t)", worst, 1e-8});
  }
  // quadratic models: no corrections at any order
  {
    double worst = 0.0;
    for (const auto& H : {make_model("harmonic", {{"d", 2}}), make_model("dilation", {{"d", 1}})}) {
      const auto e = propagate_orderN(H, GaussianWavepacket::coherent(1e-2, PhasePoint(Vec::Constant(H.d, 0.3), Vec::Constant(H.d, -0.1))), 1.0, 4);
      for (int n = 1; n <= 4; ++n) worst = std::max(worst, e.corrections[n].sup_norm());
    }
    out.push_back({"quadratic models: zero corrections", worst, 1e-12});
  }
  // degree law on a cubic model
  {
    const auto e = propagate_orderN(make_model("saddle_cubic", {{"beta", 0.3}}),
                                    GaussianWavepacket::coherent(1e-2, point({0, 0})), 0.5, 4);
    double viol = 0.0;
    for (int n = 1; n <= 4; ++n) viol = std::max(viol, static_cast<double>(std::max(0, e.corrections[n].degree() - 3 * n)));
    out.push_back({"degree law deg P^n <= 3n", viol, 0.0});
  }
  // harmonic order-0 against the oracle (with phase)
  {
    const auto H = make_model("harmonic", {{"d", 1}});
    const auto s0 = GaussianWavepacket::coherent(1e-2, point({0.5, 0.2}));
    const std::vector<GridAxis> ax{centered_axis(0, 1.6, 512)};
    SplitStepOptions so;
    so.dt = 1e-3;
    const auto u = split_step_evolve(H, eval_wavepacket(s0, ax), 0.5, so);
    const auto m = compare(eval_wavepacket(propagate_order0(H, s0, 0.5), ax), u);
    out.push_back({"harmonic order-0 vs oracle (1 - overlap)", 1 - m.overlap_mag, 1e-6});
  }
  // hybrid round trip and graph invariants
  {
    const auto H = make_model("nh2d", {{"epsilon", 0.1}});
    const double h = 1e-2;
    const auto s = GaussianWavepacket::coherent(h, point({0.2, 0, 0, 0}));
    const Splitting split = hyperbolic_splitting(H, s.center);
    const Mat F = adapted_frame_from_splitting(H, split);
    HybridState hs = hybrid_from_wavepacket(s, split);
    const std::vector<GridAxis> ax{centered_axis(0.1, 1.2, 128), centered_axis(0, 1.2, 128)};
    const auto direct = eval_wavepacket(transport_excited(F, s), ax);
    out.push_back({"hybrid tensor round trip", (eval_hybrid(hs, ax).values - direct.values).cwiseAbs().maxCoeff(), 1e-10});
    const auto Ha = transform_model(H, F);
    double siegel = 1e300, iso = 0.0;
    for (int k = 0; k < 3; ++k) {
      hs = propagate_hybrid_leading(Ha, hs, 0.1);
      iso = std::max(iso, isotropy_residual(hs.graph));
      for (const auto& g : hs.gamma_par()) siegel = std::min(siegel, g.min_im_eigenvalue());
    }
    out.push_back({"graph isotropy residual", iso, 1e-8});
    out.push_back({"Siegel positivity margin (-min eig Im Gamma_par)", -siegel, -1e-12});
    const auto v = eval_wavepacket(s, {centered_axis(0.2, 1.2, 128), centered_axis(0, 1.2, 128)});
    const auto tv = t_I_apply(hs.graph, v);
    out.push_back({"T_I unitarity", std::abs(tv.norm() - v.norm()), 1e-10});
    out.push_back({"T_I adjoint round trip", (t_I_adjoint(hs.graph, tv).values - v.values).cwiseAbs().maxCoeff() /
                                                 v.values.cwiseAbs().maxCoeff(), 1e-10});
  }
  // Bargmann isometry on the ground state
  {
    const double h = 1e-2;
    const auto s = GaussianWavepacket::coherent(h, point({0.1, -0.2}));
    const auto u = eval_wavepacket(s, default_axes(s));
    const auto g = phase_space_grid(h, s.center.q, s.center.p, 1.0);
    const CVec us = fourier_bargmann(u, g);
    out.push_back({"Bargmann isometry (relative)", std::abs(bargmann_norm(us, g) / u.norm() - 1), 1e-3});
  }
  return out;
}

}  // namespace semiclassical
