#pragma once
#include <string>
#include <utility>
#include <vector>

#include "emhd/spectral.hpp"

namespace emhd {

// value and first three derivatives of a radial profile at one point
struct BumpEval {
  double v = 0, d1 = 0, d2 = 0, d3 = 0;
};

// Smoothstep built from bump integrals: S(u) = B(u)/B(1) with
// B(u) = int_0^u exp(-1/(v(1-v))) dv; S ramps 0 -> 1 on [0,1].
namespace smoothstep {
double value(double u);
double deriv(double u);
double deriv2(double u);
double deriv3(double u);
}  // namespace smoothstep

// annulus bump g: exp(4 - 1/((rho-2)(3-rho))) on (2,3), zero outside,
// normalized so the peak value (at rho = 2.5) is 1
BumpEval annulus_bump(double rho);
// smooth cutoff chi: 1 on [1.8, 3.2], supported in (1, 4)
BumpEval cutoff_chi(double rho);
// shell profile h = chi(rho) * e^rho; h', h'' > 0 on [2,3]
BumpEval shell_profile(double rho);
// dense-sample verification of the shell positivity constraints (throws on
// failure); runs once per process, invoked lazily by shell users
void verify_shell_profile();

enum class ParamMode { strict, exploratory };

struct ModelParams {
  double alpha = 0.25;   // dissipation order of (-Lap)^alpha
  double beta = 3.2;     // regularity index
  double mu = 0.01;      // resistivity on a
  double nu = 0.01;      // resistivity on b
  double eps = 0.5;      // data amplitude
  double lambda = 16.0;  // radial concentration
  int n_osc = 16;        // angular frequency N
  ParamMode mode = ParamMode::strict;
};

// every violated constraint, human-readable; empty means valid
std::vector<std::string> validate(const ModelParams& p);
void require_valid(const ModelParams& p);  // throws std::invalid_argument listing all

// inflation time  t* = eps^-2 lambda^{beta-4}
double t_star(const ModelParams& p);

// smallest admissible n for this grid extent: n >= 16 lambda N (L/pi)
int required_n(const ModelParams& p, double half_width);

struct InitialData {
  Field a0, b0;
  Field u0x, u0y;            // analytic e_theta formula (support-exact)
  double dual_route_rel_err; // vs the spectral route grad_perp b0, relative L2
};
// a0 = eps lam^{1-beta} N^-beta g(lam r) cos(N theta), b0 = eps lam^{2-beta} h(lam r)
InitialData build_initial_data(const ModelParams& p, const GridSpec& grid);

// radial companion data (angular oscillation removed): a0 = eps lam^{1-beta} g(lam r)
std::pair<Field, Field> make_radial_data(const ModelParams& p, const GridSpec& grid);

// Approximate solution: a0 transported by the frozen initial drift.
// exact:         phase N(theta - t Omega(r)),  Omega = d_r b0 / r  (the shear
//                actually generated by u0; solves the transport equation)
// leading_order: phase N theta - eps N lam^{4-beta} t h'(lam r)  (the displayed
//                closed form, which absorbs 1/(lam r) into the annulus ~ 1)
enum class ShearPhase { exact, leading_order };
Field eval_abar(const ModelParams& p, const GridSpec& grid, double t,
                ShearPhase phase = ShearPhase::exact);
// ratio (kept band) / (band needed by the sheared scale at time t); >= 1 means
// resolved. eval_abar throws if < 1.
double abar_resolution_margin(const ModelParams& p, const GridSpec& grid, double t);

struct UbarResult {
  Field ux, uy;
  int nodes_used = 0;
  double refine_rel_change = 0;  // H^{beta-2} relative change at the last node refinement
};
// Nyquist band the drift-correction integrand occupies: the Hall product
// doubles the sheared phase (worst-case shear rate) on top of the angular
// carrier. eval_ubar rejects grids whose Nyquist wavenumber sits below this.
double ubar_product_band(const ModelParams& p, double t);

// ubar(t) = u0 - int_0^t grad_perp( grad_perp abar . grad Lap abar ) dtau
UbarResult eval_ubar(const ModelParams& p, const GridSpec& grid, double t);

// || gperp f . grad Lap f ||_L2 / ( ||gperp f||_sup * ||grad Lap f||_L2 ),
// computed on the dealias-projected field (the discrete dynamics' projection)
double orthogonality_ratio(const Field& f);
double orthogonality_ratio(const ModelParams& p, const GridSpec& grid, double t);

}  // namespace emhd
