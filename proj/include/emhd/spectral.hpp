#pragma once
#include <array>

#include "emhd/field.hpp"

namespace emhd {

// ---- symbol builders (real multipliers on the half-complex layout) ----

// |k|^{2*alpha}, with the k=0 mode mapped to 0 for every alpha (including 0)
RVec fractional_laplacian_symbol(const GridSpec& g, double alpha);
// exp(-nu * t * |k|^{2*alpha}); identity on the zero mode
RVec heat_multiplier(const GridSpec& g, double nu, double alpha, double t);
// 1 on retained modes, 0 where max(|j1|,|j2|) > n/3
RVec dealias_mask(const GridSpec& g);

void apply_symbol(const GridSpec& g, std::complex<double>* c, const double* symbol);
void apply_symbol(Field& f, const RVec& symbol);  // requires/creates spectral side

// ---- derivatives ----
// dim: 0 -> d/dx, 1 -> d/dy. Odd orders zero the Nyquist line of that axis.
void spectral_derivative(const GridSpec& g, const std::complex<double>* in,
                         std::complex<double>* out, int dim, int order);
Field derivative(const Field& f, int dim, int order = 1);
Field laplacian(const Field& f);
std::array<Field, 2> gradient(const Field& f);
// perpendicular gradient (-d/dy, d/dx)
std::array<Field, 2> grad_perp(const Field& f);

// ---- dealiasing ----
void dealias(Field& f);
Field dealiased(Field f);

// ---- norms ----
// Sobolev norm via the spectral sum  ||f||^2 = 4 L^2 sum_k w(k) m(|k|)^2 |c_k|^2
// homogeneous: m = |k|^s; zero mode excluded for s != 0, and for s < 0 a
//   relative mean above 1e-10 raises std::domain_error.
// inhomogeneous: m = (1+|k|^2)^{s/2}, zero mode included.
double sobolev_norm(const Field& f, double s, bool homogeneous = true);
double l2_norm(const Field& f);
// L2 inner product (both fields on the same grid)
double l2_inner(const Field& f, const Field& h);

// C^m norm, m in {0,1,2}: max over all partial derivatives of order <= m of
// their grid sup norms.
double sup_norm(const Field& f, int order = 0);
// pointwise magnitude sup of a vector field
double vector_sup(const Field& fx, const Field& fy);

// max |f| over grid cells within `cells` of the domain edge (wrap distance);
// used to measure how much field mass leaks to the periodic boundary.
double boundary_ring_max(const Field& f, int cells = 2);

// move a field between grids sharing the same half-width by copying spectral
// amplitudes. restrict drops modes the coarse grid cannot carry (its Nyquist
// row/column are zeroed); prolong zero-pads. For data band-limited below the
// coarse Nyquist the two are mutually inverse, bit for bit.
Field spectral_restrict(const Field& f, int n_coarse);
Field spectral_prolong(const Field& f, int n_fine);

}  // namespace emhd
