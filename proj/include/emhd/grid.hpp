#pragma once
#include <cstddef>
#include <stdexcept>
#include <string>

#include "emhd/util.hpp"

namespace emhd {

// Uniform periodic grid on [-L, L)^2 with n samples per side.
// Wavenumbers are k = (pi/L) * j with integer j in [-n/2, n/2).
struct GridSpec {
  int n = 0;
  double half_width = 0.0;

  double dx() const { return 2.0 * half_width / n; }
  double k_unit() const { return kPi / half_width; }
  double x(int i) const { return -half_width + i * dx(); }
  std::size_t num_real() const { return std::size_t(n) * n; }
  int spec_cols() const { return n / 2 + 1; }
  std::size_t num_spec() const { return std::size_t(n) * spec_cols(); }

  // integer frequency of spectral row i (full range, Nyquist stored as -n/2)
  int freq_x(int i) const { return 2 * i < n ? i : i - n; }
  // integer frequency of spectral column c (half storage, 0..n/2)
  int freq_y(int c) const { return c; }

  // modes with max(|j1|,|j2|) > n/3 are treated as aliasing band
  int dealias_cut() const { return n / 3; }
  // largest wavenumber magnitude kept after dealiasing (per axis)
  double k_kept() const { return k_unit() * dealias_cut(); }

  bool operator==(const GridSpec&) const = default;
};

inline void validate(const GridSpec& g) {
  if (g.n < 16 || g.n % 2 != 0)
    throw std::invalid_argument("grid n must be even and >= 16, got " + std::to_string(g.n));
  if (!(g.half_width > 0.0))
    throw std::invalid_argument("grid half_width must be positive");
}

}  // namespace emhd
