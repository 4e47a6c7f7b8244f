#pragma once
#include "emhd/fft.hpp"
#include "emhd/grid.hpp"

namespace emhd {

// Scalar field on a periodic grid. Either representation (grid samples,
// spectral coefficients) may be present; conversions fill in the other side.
struct Field {
  GridSpec grid;
  RVec real;  // size n*n when present
  CVec spec;  // size n*(n/2+1) when present

  bool has_real() const { return real.size() == grid.num_real(); }
  bool has_spec() const { return spec.size() == grid.num_spec(); }
};

inline Field make_real_field(const GridSpec& g) {
  validate(g);
  Field f;
  f.grid = g;
  f.real.assign(g.num_real(), 0.0);
  return f;
}

inline Field make_spec_field(const GridSpec& g) {
  validate(g);
  Field f;
  f.grid = g;
  f.spec.assign(g.num_spec(), {0.0, 0.0});
  return f;
}

inline void ensure_spec(Field& f) {
  if (f.has_spec()) return;
  if (!f.has_real()) fail("field has neither representation");
  f.spec.resize(f.grid.num_spec());
  fft_forward(f.grid, f.real.data(), f.spec.data());
}

inline void ensure_real(Field& f) {
  if (f.has_real()) return;
  if (!f.has_spec()) fail("field has neither representation");
  f.real.resize(f.grid.num_real());
  fft_inverse(f.grid, f.spec.data(), f.real.data());
}

// value-returning conversions for call sites that keep the input const
inline Field transform(Field f) {
  ensure_spec(f);
  return f;
}
inline Field inverse_transform(Field f) {
  ensure_real(f);
  return f;
}

}  // namespace emhd
