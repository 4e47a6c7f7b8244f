#pragma once
#include <complex>

#include "emhd/grid.hpp"
#include "emhd/util.hpp"

namespace emhd {

// Thin wrapper around FFTW double-precision r2c/c2r transforms.
//
// Conventions:
//  - forward(real -> spec) includes the 1/n^2 normalization, so spectral
//    entries are coefficients of exp(i k.x) and inverse() recovers samples
//    with no further scaling.
//  - spectral layout: row-major n x (n/2+1); rows run over the full x
//    frequency range (Nyquist stored as -n/2), columns over y frequencies
//    0..n/2.
//  - plans use FFTW_ESTIMATE only: planning is then deterministic (no timing
//    feedback), which keeps whole-program reruns bit-identical.
//  - forward preserves its input; inverse copies the spectrum internally
//    because multidimensional c2r destroys its input array.
// Buffers should come from RVec/CVec (64-byte aligned).
void fft_forward(const GridSpec& g, const double* real_in, std::complex<double>* spec_out);
void fft_inverse(const GridSpec& g, const std::complex<double>* spec_in, double* real_out);

}  // namespace emhd
