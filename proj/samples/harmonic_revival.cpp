// Coherent state in the harmonic oscillator: order-0 propagation against the
// split-step oracle over one period, where the state returns to itself.
#include "semiclassical/oracle.hpp"
#include "semiclassical/propagator.hpp"

#include <cstdio>
#include <numbers>

using namespace semiclassical;

int main() {
  const auto H = make_model("harmonic", {{"d", 1}});
  const auto s0 = GaussianWavepacket::coherent(1e-2, point({0.6, 0.0}));
  const std::vector<GridAxis> ax{centered_axis(0, 1.8, 512)};
  const auto u0 = eval_wavepacket(s0, ax);
  SplitStepOptions so;
  so.dt = 1e-3;
  std::printf("%8s %14s %14s %14s\n", "t", "q(t)", "1-overlap", "l2_error");
  for (double t : {0.25, 0.5, 1.0, 2.0, std::numbers::pi}) {
    const auto s = propagate_order0(H, s0, t);
    const auto m = compare(eval_wavepacket(s, ax), split_step_evolve(H, u0, t, so));
    std::printf("%8.4f %14.6f %14.3e %14.3e\n", t, s.center.q(0), 1 - m.overlap_mag, m.l2_error);
  }
  const auto back = compare(eval_wavepacket(propagate_order0(H, s0, std::numbers::pi), ax), u0);
  std::printf("revival at t=pi: |<u(pi),u(0)>| = %.12f\n", back.overlap_mag);
}
