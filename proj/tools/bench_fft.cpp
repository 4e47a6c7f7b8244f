// quick transform timing to size solver runs
#include <chrono>
#include <cstdio>
#include <random>

#include "emhd/spectral.hpp"

using namespace emhd;
using clk = std::chrono::steady_clock;

int main() {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int n : {256, 320, 384, 512, 640, 768, 896, 960, 1440, 1728, 2304, 2560, 2880, 3072, 3200}) {
    GridSpec g{n, kPi};
    Field f = make_real_field(g);
    for (double& v : f.real) v = u(rng);
    ensure_spec(f);
    RVec out(g.num_real());
    CVec spec(g.num_spec());
    // warm up plans
    fft_forward(g, f.real.data(), spec.data());
    fft_inverse(g, spec.data(), out.data());
    const int reps = n >= 1536 ? 6 : 12;
    auto t0 = clk::now();
    for (int r = 0; r < reps; ++r) {
      fft_forward(g, f.real.data(), spec.data());
      fft_inverse(g, spec.data(), out.data());
    }
    auto t1 = clk::now();
    double ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / (2.0 * reps);
    std::printf("n=%5d  per-transform %.3f ms   rhs(8T) %.1f ms   step(4 rhs) %.2f s\n", n, ms,
                8 * ms, 32 * ms / 1000.0);
  }
  return 0;
}
