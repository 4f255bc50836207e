// Error of order-0 and order-1 propagation against the oracle for a quartic
// anharmonic oscillator, and the fitted power of hbar.
#include "semiclassical/experiments.hpp"

#include <iostream>

using namespace semiclassical;

int main() {
  const Config c = Config::parse(
      "model: anharmonic_quartic\n"
      "beta: 0.1\n"
      "hbar: [1.0e-2, 3.1622776601683795e-3, 1.0e-3]\n"
      "T: 1.0\n"
      "N: 1\n"
      "methods: [order0, orderN]\n",
      sweep_keys());
  RunContext ctx;
  ctx.workers = 3;
  write_output(std::cout, c.hash(), run_sweep_h(c, ctx));
}
