// Two-dimensional normally hyperbolic model: squeezed propagation up to t_s,
// conversion to an isotropic-manifold state, then hybrid steps to 0.8 t_E.
#include "semiclassical/experiments.hpp"

#include <cstdio>
#include <iostream>

using namespace semiclassical;

int main(int argc, char** argv) {
  HybridPipelineOptions o;
  o.hbar = argc > 1 ? std::atof(argv[1]) : 1e-2;
  o.epsilon = 0.1;
  o.ny = 1024;
  RunContext ctx;
  ctx.log = &std::cerr;
  const auto r = run_hybrid_pipeline(o, ctx);
  std::printf("lambda_max %.4f  t_E %.4f  t_s %.4f  t_end %.4f\n", r.rates.lambda_max, r.thresholds.t_ehrenfest,
              r.t_s, r.t_end);
  std::printf("%8s %12s %12s %12s %12s\n", "t", "isotropy", "delta", "l2_error", "overlap");
  for (const auto& s : r.steps)
    std::printf("%8.4f %12.3e %12.4f %12.4e %12.6f\n", s.t, s.isotropy, s.estimates.delta_measured, s.hybrid_l2,
                s.hybrid_overlap);
  std::printf("order-0 error at the last step: %.4f\n", r.order0_errors.empty() ? 0.0 : r.order0_errors.back().second);
}
