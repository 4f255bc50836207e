// Built with a flipped sign in the Siegel action; ctest expects this binary to fail.
#include "semiclassical/validate.hpp"

#include <iostream>

int main() {
  using namespace semiclassical;
  try {
    std::mt19937_64 rng(1);
    const double r = siegel_group_law_residual(100, rng);
    std::cout << "group law residual " << r << "\n";
    return r <= 1e-9 ? 0 : 1;
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
    return 1;
  }
}
