#include "emhd/spectral.hpp"

#include <algorithm>
#include <cmath>

namespace emhd {

RVec fractional_laplacian_symbol(const GridSpec& g, double alpha) {
  RVec sym(g.num_spec());
  const double ku = g.k_unit();
  for (int i = 0; i < g.n; ++i) {
    const double kx = ku * g.freq_x(i);
    for (int c = 0; c < g.spec_cols(); ++c) {
      const double ky = ku * c;
      const double k2 = kx * kx + ky * ky;
      sym[std::size_t(i) * g.spec_cols() + c] = k2 == 0.0 ? 0.0 : std::pow(k2, alpha);
    }
  }
  return sym;
}

RVec heat_multiplier(const GridSpec& g, double nu, double alpha, double t) {
  RVec sym = fractional_laplacian_symbol(g, alpha);
  for (double& v : sym) v = std::exp(-nu * t * v);
  return sym;
}

RVec dealias_mask(const GridSpec& g) {
  RVec mask(g.num_spec(), 1.0);
  const int cut = g.dealias_cut();
  for (int i = 0; i < g.n; ++i) {
    const int jx = std::abs(g.freq_x(i));
    for (int c = 0; c < g.spec_cols(); ++c)
      if (std::max(jx, c) > cut) mask[std::size_t(i) * g.spec_cols() + c] = 0.0;
  }
  return mask;
}

void apply_symbol(const GridSpec& g, std::complex<double>* c, const double* symbol) {
  const std::size_t m = g.num_spec();
  for (std::size_t i = 0; i < m; ++i) c[i] *= symbol[i];
}

void apply_symbol(Field& f, const RVec& symbol) {
  ensure_spec(f);
  if (symbol.size() != f.grid.num_spec()) fail("symbol size mismatch");
  apply_symbol(f.grid, f.spec.data(), symbol.data());
  f.real.clear();  // stale
}

void spectral_derivative(const GridSpec& g, const std::complex<double>* in,
                         std::complex<double>* out, int dim, int order) {
  if (dim != 0 && dim != 1) fail("derivative dim must be 0 or 1");
  if (order < 1) fail("derivative order must be >= 1");
  const double ku = g.k_unit();
  const bool odd = order % 2 != 0;
  const int cols = g.spec_cols();
  for (int i = 0; i < g.n; ++i) {
    const int jx = g.freq_x(i);
    for (int c = 0; c < cols; ++c) {
      const int j = dim == 0 ? jx : c;
      // odd-order derivatives have no real representative at the Nyquist
      // frequency; zero it to keep real fields real
      if (odd && std::abs(j) == g.n / 2) {
        out[std::size_t(i) * cols + c] = 0.0;
        continue;
      }
      const double k = ku * j;
      std::complex<double> factor;
      switch (order % 4) {
        case 0: factor = std::pow(k, order); break;
        case 1: factor = std::complex<double>(0.0, std::pow(k, order)); break;
        case 2: factor = -std::pow(k, order); break;
        default: factor = std::complex<double>(0.0, -std::pow(k, order)); break;
      }
      out[std::size_t(i) * cols + c] = factor * in[std::size_t(i) * cols + c];
    }
  }
}

Field derivative(const Field& f, int dim, int order) {
  Field in = transform(f);
  Field out = make_spec_field(in.grid);
  spectral_derivative(in.grid, in.spec.data(), out.spec.data(), dim, order);
  return out;
}

Field laplacian(const Field& f) {
  Field in = transform(f);
  Field out = make_spec_field(in.grid);
  const GridSpec& g = in.grid;
  const double ku = g.k_unit();
  for (int i = 0; i < g.n; ++i) {
    const double kx = ku * g.freq_x(i);
    for (int c = 0; c < g.spec_cols(); ++c) {
      const double ky = ku * c;
      out.spec[std::size_t(i) * g.spec_cols() + c] =
          -(kx * kx + ky * ky) * in.spec[std::size_t(i) * g.spec_cols() + c];
    }
  }
  return out;
}

std::array<Field, 2> gradient(const Field& f) {
  Field in = transform(f);
  return {derivative(in, 0, 1), derivative(in, 1, 1)};
}

std::array<Field, 2> grad_perp(const Field& f) {
  Field in = transform(f);
  Field px = derivative(in, 1, 1);
  for (auto& v : px.spec) v = -v;
  return {std::move(px), derivative(in, 0, 1)};
}

void dealias(Field& f) {
  ensure_spec(f);
  const GridSpec& g = f.grid;
  const int cut = g.dealias_cut();
  for (int i = 0; i < g.n; ++i) {
    const int jx = std::abs(g.freq_x(i));
    for (int c = 0; c < g.spec_cols(); ++c)
      if (std::max(jx, c) > cut) f.spec[std::size_t(i) * g.spec_cols() + c] = 0.0;
  }
  f.real.clear();
}

Field dealiased(Field f) {
  dealias(f);
  return f;
}

double sobolev_norm(const Field& f0, double s, bool homogeneous) {
  Field f = transform(f0);
  const GridSpec& g = f.grid;
  const double ku = g.k_unit();
  double sum = 0.0;
  double l2sum = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double kx = ku * g.freq_x(i);
    for (int c = 0; c < g.spec_cols(); ++c) {
      const double ky = ku * c;
      const double k2 = kx * kx + ky * ky;
      const double w = (c == 0 || c == g.n / 2) ? 1.0 : 2.0;
      const double p = std::norm(f.spec[std::size_t(i) * g.spec_cols() + c]);
      l2sum += w * p;
      double m2;
      if (homogeneous) {
        if (k2 == 0.0) {
          m2 = s == 0.0 ? 1.0 : 0.0;  // mean handled below for s < 0
        } else {
          m2 = std::pow(k2, s);
        }
      } else {
        m2 = std::pow(1.0 + k2, s);
      }
      sum += w * m2 * p;
    }
  }
  if (homogeneous && s < 0.0) {
    const double mean = std::abs(f.spec[0]);
    if (mean > 1e-10 * std::max(1e-300, std::sqrt(l2sum)))
      throw std::domain_error("homogeneous norm of negative order requires zero mean");
  }
  const double area = 4.0 * g.half_width * g.half_width;
  return std::sqrt(area * sum);
}

double l2_norm(const Field& f) { return sobolev_norm(f, 0.0, true); }

double l2_inner(const Field& f0, const Field& h0) {
  Field f = transform(f0), h = transform(h0);
  if (!(f.grid == h.grid)) fail("inner product needs matching grids");
  const GridSpec& g = f.grid;
  double sum = 0.0;
  for (int i = 0; i < g.n; ++i)
    for (int c = 0; c < g.spec_cols(); ++c) {
      const double w = (c == 0 || c == g.n / 2) ? 1.0 : 2.0;
      sum += w * (f.spec[std::size_t(i) * g.spec_cols() + c] *
                  std::conj(h.spec[std::size_t(i) * g.spec_cols() + c]))
                     .real();
    }
  return 4.0 * g.half_width * g.half_width * sum;
}

namespace {
double real_sup(const Field& f0) {
  Field f = inverse_transform(f0);
  double m = 0.0;
  for (double v : f.real) m = std::max(m, std::abs(v));
  return m;
}
}  // namespace

double sup_norm(const Field& f, int order) {
  if (order < 0 || order > 2) fail("sup_norm supports orders 0..2");
  Field base = transform(f);
  double m = real_sup(base);
  if (order >= 1) {
    m = std::max(m, real_sup(derivative(base, 0, 1)));
    m = std::max(m, real_sup(derivative(base, 1, 1)));
  }
  if (order >= 2) {
    m = std::max(m, real_sup(derivative(base, 0, 2)));
    m = std::max(m, real_sup(derivative(base, 1, 2)));
    m = std::max(m, real_sup(derivative(derivative(base, 0, 1), 1, 1)));
  }
  return m;
}

double vector_sup(const Field& fx0, const Field& fy0) {
  Field fx = inverse_transform(fx0), fy = inverse_transform(fy0);
  if (!(fx.grid == fy.grid)) fail("vector_sup needs matching grids");
  double m = 0.0;
  for (std::size_t i = 0; i < fx.real.size(); ++i)
    m = std::max(m, fx.real[i] * fx.real[i] + fy.real[i] * fy.real[i]);
  return std::sqrt(m);
}

double boundary_ring_max(const Field& f0, int cells) {
  Field f = inverse_transform(f0);
  const int n = f.grid.n;
  double m = 0.0;
  for (int i = 0; i < n; ++i) {
    const int di = std::min(i, n - i);
    for (int j = 0; j < n; ++j) {
      const int dj = std::min(j, n - j);
      if (std::min(di, dj) <= cells)
        m = std::max(m, std::abs(f.real[std::size_t(i) * n + j]));
    }
  }
  return m;
}

// amplitude copy between half-complex layouts; both grids use the same
// centered coordinates, so coefficients transfer untouched
static Field regrid(const Field& src, int n_to) {
  GridSpec gt{n_to, src.grid.half_width};
  validate(gt);
  Field to = make_spec_field(gt);
  const GridSpec& gf = src.grid;
  const int keep = std::min(gf.n, n_to) / 2;  // strictly below the smaller Nyquist
  for (int j1 = -(keep - 1); j1 <= keep - 1; ++j1) {
    const std::size_t rf = std::size_t((j1 + gf.n) % gf.n) * gf.spec_cols();
    const std::size_t rt = std::size_t((j1 + n_to) % n_to) * gt.spec_cols();
    for (int c = 0; c <= keep - 1; ++c) to.spec[rt + c] = src.spec[rf + c];
  }
  return to;
}

Field spectral_restrict(const Field& f0, int n_coarse) {
  Field f = transform(f0);
  if (n_coarse >= f.grid.n) fail("spectral_restrict needs a strictly coarser target");
  return regrid(f, n_coarse);
}

Field spectral_prolong(const Field& f0, int n_fine) {
  Field f = transform(f0);
  if (n_fine <= f.grid.n) fail("spectral_prolong needs a strictly finer target");
  return regrid(f, n_fine);
}

}  // namespace emhd
