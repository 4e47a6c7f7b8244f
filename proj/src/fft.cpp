#include "emhd/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace emhd {
namespace {

struct PlanPair {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache c;
    return c;
  }

  PlanPair get(int n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    // plan on throwaway aligned buffers; execution uses the new-array API
    double* r = fftw_alloc_real(std::size_t(n) * n);
    fftw_complex* c = fftw_alloc_complex(std::size_t(n) * (n / 2 + 1));
    PlanPair p;
    p.r2c = fftw_plan_dft_r2c_2d(n, n, r, c, FFTW_ESTIMATE);
    p.c2r = fftw_plan_dft_c2r_2d(n, n, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
    if (!p.r2c || !p.c2r) fail("fftw plan creation failed for n=" + std::to_string(n));
    plans_[n] = p;
    return p;
  }

 private:
  std::map<int, PlanPair> plans_;
  std::mutex mu_;
};

CVec& scratch_for(std::size_t n) {
  thread_local CVec buf;
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace

// Grid samples live at x_i = -L + i dx, but FFTW phases coefficients relative
// to index 0. Folding (-1)^{j1+j2} into the scaling pass re-centers them, so
// spec entries are true coefficients of exp(i k . x) in box coordinates.
void fft_forward(const GridSpec& g, const double* real_in, std::complex<double>* spec_out) {
  PlanPair p = PlanCache::instance().get(g.n);
  fftw_execute_dft_r2c(p.r2c, const_cast<double*>(real_in),
                       reinterpret_cast<fftw_complex*>(spec_out));
  const double scale = 1.0 / g.num_real();
  const int cols = g.spec_cols();
  for (int i = 0; i < g.n; ++i)
    for (int c = 0; c < cols; ++c)
      spec_out[std::size_t(i) * cols + c] *= (i + c) % 2 == 0 ? scale : -scale;
}

void fft_inverse(const GridSpec& g, const std::complex<double>* spec_in, double* real_out) {
  PlanPair p = PlanCache::instance().get(g.n);
  const std::size_t m = g.num_spec();
  CVec& tmp = scratch_for(m);
  const int cols = g.spec_cols();
  for (int i = 0; i < g.n; ++i)
    for (int c = 0; c < cols; ++c)
      tmp[std::size_t(i) * cols + c] = (i + c) % 2 == 0 ? spec_in[std::size_t(i) * cols + c]
                                                        : -spec_in[std::size_t(i) * cols + c];
  fftw_execute_dft_c2r(p.c2r, reinterpret_cast<fftw_complex*>(tmp.data()), real_out);
}

}  // namespace emhd
