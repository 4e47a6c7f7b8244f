#include "emhd/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace emhd {

// ---------------------------------------------------------------- smoothstep

namespace {

// integrand of the bump integral and its derivatives via w = -1/q, q = v - v^2
inline double bump01(double v) {
  if (v <= 0.0 || v >= 1.0) return 0.0;
  return std::exp(-1.0 / (v * (1.0 - v)));
}
inline double bump01_d1(double v) {
  if (v <= 0.0 || v >= 1.0) return 0.0;
  const double q = v * (1.0 - v), qp = 1.0 - 2.0 * v;
  return bump01(v) * qp / (q * q);
}
inline double bump01_d2(double v) {
  if (v <= 0.0 || v >= 1.0) return 0.0;
  const double q = v * (1.0 - v), qp = 1.0 - 2.0 * v, qpp = -2.0;
  const double w1 = qp / (q * q);
  const double w2 = (qpp * q - 2.0 * qp * qp) / (q * q * q);
  return bump01(v) * (w2 + w1 * w1);
}

struct StepTable {
  static constexpr int M = 4096;
  double B[M + 1];
  double B1;
  StepTable() {
    const double du = 1.0 / M;
    B[0] = 0.0;
    for (int i = 0; i < M; ++i) {
      const double u0 = i * du, u1 = (i + 1) * du;
      B[i + 1] = B[i] + du / 6.0 * (bump01(u0) + 4.0 * bump01(0.5 * (u0 + u1)) + bump01(u1));
    }
    B1 = B[M];
  }
};
const StepTable& step_table() {
  static StepTable t;
  return t;
}

}  // namespace

namespace smoothstep {

double value(double u) {
  if (u <= 0.0) return 0.0;
  if (u >= 1.0) return 1.0;
  const StepTable& t = step_table();
  const double s = u * StepTable::M;
  int i = std::min(int(s), StepTable::M - 1);
  const double du = 1.0 / StepTable::M;
  const double x = s - i;  // in [0,1)
  // Hermite cubic: values from the cumulative table, slopes from the integrand
  const double y0 = t.B[i], y1 = t.B[i + 1];
  const double m0 = bump01(i * du) * du, m1 = bump01((i + 1) * du) * du;
  const double x2 = x * x, x3 = x2 * x;
  const double v = (2 * x3 - 3 * x2 + 1) * y0 + (x3 - 2 * x2 + x) * m0 +
                   (-2 * x3 + 3 * x2) * y1 + (x3 - x2) * m1;
  return v / t.B1;
}
double deriv(double u) { return bump01(u) / step_table().B1; }
double deriv2(double u) { return bump01_d1(u) / step_table().B1; }
double deriv3(double u) { return bump01_d2(u) / step_table().B1; }

}  // namespace smoothstep

// ------------------------------------------------------------ bump profiles

BumpEval annulus_bump(double rho) {
  BumpEval e;
  if (rho <= 2.0 || rho >= 3.0) return e;
  // w = -1/q, q = (rho-2)(3-rho); peak value exp(-4) normalized away
  const double q = (rho - 2.0) * (3.0 - rho);
  const double qp = 5.0 - 2.0 * rho, qpp = -2.0;
  const double w1 = qp / (q * q);
  const double w2 = (qpp * q - 2.0 * qp * qp) / (q * q * q);
  const double w3 = 6.0 * qp * (qp * qp - qpp * q) / (q * q * q * q);
  const double g = std::exp(4.0 - 1.0 / q);
  e.v = g;
  e.d1 = g * w1;
  e.d2 = g * (w2 + w1 * w1);
  e.d3 = g * (w3 + 3.0 * w1 * w2 + w1 * w1 * w1);
  return e;
}

BumpEval cutoff_chi(double rho) {
  BumpEval e;
  if (rho <= 1.0 || rho >= 4.0) return e;
  if (rho >= 1.8 && rho <= 3.2) {
    e.v = 1.0;
    return e;
  }
  if (rho < 1.8) {  // rising edge over (1, 1.8)
    const double w = 0.8, u = (rho - 1.0) / w;
    e.v = smoothstep::value(u);
    e.d1 = smoothstep::deriv(u) / w;
    e.d2 = smoothstep::deriv2(u) / (w * w);
    e.d3 = smoothstep::deriv3(u) / (w * w * w);
  } else {  // falling edge over (3.2, 4)
    const double w = 0.8, u = (4.0 - rho) / w;
    e.v = smoothstep::value(u);
    e.d1 = -smoothstep::deriv(u) / w;
    e.d2 = smoothstep::deriv2(u) / (w * w);
    e.d3 = -smoothstep::deriv3(u) / (w * w * w);
  }
  return e;
}

BumpEval shell_profile(double rho) {
  BumpEval e;
  if (rho <= 1.0 || rho >= 4.0) return e;
  const BumpEval c = cutoff_chi(rho);
  const double ex = std::exp(rho);
  e.v = c.v * ex;
  e.d1 = (c.v + c.d1) * ex;
  e.d2 = (c.v + 2.0 * c.d1 + c.d2) * ex;
  e.d3 = (c.v + 3.0 * c.d1 + 3.0 * c.d2 + c.d3) * ex;
  return e;
}

void verify_shell_profile() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    const int n = 10000;
    for (int i = 0; i <= n; ++i) {
      const double rho = 2.0 + i / double(n);
      const BumpEval h = shell_profile(rho);
      if (!(h.d1 > 0.0) || !(h.d2 > 0.0))
        fail("shell profile positivity (h', h'' > 0 on [2,3]) violated at rho=" +
             std::to_string(rho));
    }
  });
}

// ------------------------------------------------------------- model params

std::vector<std::string> validate(const ModelParams& p) {
  std::vector<std::string> v;
  const bool strict = p.mode == ParamMode::strict;
  if (strict) {
    if (!(p.alpha >= 0.0 && p.alpha < 0.5))
      v.push_back("alpha must lie in [0, 0.5) in strict mode, got " + std::to_string(p.alpha));
    const double hi = 4.0 - 2.0 * p.alpha;
    if (!(p.beta > 3.0 && p.beta < hi)) {
      std::ostringstream os;
      os << "beta must satisfy the theorem window 3 < beta < 4 - 2*alpha = " << hi << ", got "
         << p.beta;
      v.push_back(os.str());
    }
    if (!(p.lambda >= 4.0))
      v.push_back("lambda must be >= 4, got " + std::to_string(p.lambda));
  } else {
    if (!(p.alpha >= 0.0 && p.alpha <= 1.0))
      v.push_back("alpha must lie in [0, 1], got " + std::to_string(p.alpha));
    if (!(p.beta > 1.0))
      v.push_back("beta must exceed 1 even in exploratory mode, got " + std::to_string(p.beta));
    if (!(p.lambda >= 1.0))
      v.push_back("lambda must be >= 1, got " + std::to_string(p.lambda));
  }
  if (!(p.eps > 0.0 && p.eps < 1.0))
    v.push_back("eps must lie in (0, 1), got " + std::to_string(p.eps));
  if (!(p.mu >= 0.0)) v.push_back("mu must be nonnegative");
  if (!(p.nu >= 0.0)) v.push_back("nu must be nonnegative");
  if (p.n_osc < 1) v.push_back("n_osc must be a positive integer");
  return v;
}

void require_valid(const ModelParams& p) {
  auto v = validate(p);
  if (v.empty()) return;
  std::string msg = "invalid model parameters:";
  for (const auto& s : v) msg += "\n  - " + s;
  throw std::invalid_argument(msg);
}

double t_star(const ModelParams& p) {
  return std::pow(p.eps, -2.0) * std::pow(p.lambda, p.beta - 4.0);
}

int required_n(const ModelParams& p, double half_width) {
  const double need = 16.0 * p.lambda * std::max(p.n_osc, 1) * (half_width / kPi);
  int n = int(std::ceil(need));
  if (n % 2) ++n;
  return std::max(n, 16);
}

// --------------------------------------------------------------- field maps

namespace {

// angular shear rate Omega(r) = d_r b0 / r expressed in rho = lambda r:
// Omega = eps lambda^{4-beta} h'(rho) / rho
inline double shear_rate(const ModelParams& p, double rho) {
  if (rho <= 1.0 || rho >= 4.0) return 0.0;
  return p.eps * std::pow(p.lambda, 4.0 - p.beta) * shell_profile(rho).d1 / rho;
}

// shared sampling kernel: abar(t) with a0 as the exact t=0 special case
Field sample_abar(const ModelParams& p, const GridSpec& g, double t, ShearPhase phase) {
  verify_shell_profile();
  Field f = make_real_field(g);
  const double amp = p.eps * std::pow(p.lambda, 1.0 - p.beta) * std::pow(double(p.n_osc), -p.beta);
  const double lead = p.eps * p.n_osc * std::pow(p.lambda, 4.0 - p.beta) * t;
  const int n = g.n;
  for (int i = 0; i < n; ++i) {
    const double x = g.x(i);
    for (int j = 0; j < n; ++j) {
      const double y = g.x(j);
      const double r = std::hypot(x, y);
      const double rho = p.lambda * r;
      if (rho <= 2.0 || rho >= 3.0) continue;
      const double theta = std::atan2(y, x);
      double ph;
      if (phase == ShearPhase::exact)
        ph = p.n_osc * (theta - t * shear_rate(p, rho));
      else
        ph = p.n_osc * theta - lead * shell_profile(rho).d1;
      f.real[std::size_t(i) * n + j] = amp * annulus_bump(rho).v * std::cos(ph);
    }
  }
  return f;
}

void require_resolution(const ModelParams& p, const GridSpec& g) {
  validate(g);
  const int need = required_n(p, g.half_width);
  if (g.n < need)
    throw std::invalid_argument("grid n=" + std::to_string(g.n) +
                                " violates the resolution rule n >= 16 lambda N (L/pi) = " +
                                std::to_string(need));
}

// largest |d/drho (h'(rho)/rho)| over the band of [2,3] carrying all but
// ~1e-3 of the g^2 mass (value at rho ~ 2.8); the true max over the full
// support is kShearMax at rho -> 3 where g is negligible.
constexpr double kShearSignificant = 3.45;
constexpr double kShearMax = 4.4635;

}  // namespace

double abar_resolution_margin(const ModelParams& p, const GridSpec& g, double t) {
  // radial chirp wavenumber N t eps lam^{5-beta} (h'/rho)' plus angular N/r
  const double chirp =
      p.n_osc * t * p.eps * std::pow(p.lambda, 5.0 - p.beta) * kShearSignificant;
  const double angular = p.n_osc * p.lambda / 2.0;
  return g.k_kept() / (chirp + angular);
}

double ubar_product_band(const ModelParams& p, double t) {
  return 2.0 * p.n_osc * t * p.eps * std::pow(p.lambda, 5.0 - p.beta) * kShearMax +
         p.n_osc * p.lambda;
}

Field eval_abar(const ModelParams& p, const GridSpec& g, double t, ShearPhase phase) {
  require_valid(p);
  require_resolution(p, g);
  const double margin = abar_resolution_margin(p, g, t);
  if (margin < 1.0)
    throw std::invalid_argument(
        "grid cannot resolve the sheared scale at t=" + std::to_string(t) +
        " (resolution margin " + std::to_string(margin) + " < 1)");
  return sample_abar(p, g, t, phase);
}

InitialData build_initial_data(const ModelParams& p, const GridSpec& g) {
  require_valid(p);
  require_resolution(p, g);
  InitialData out;
  out.a0 = sample_abar(p, g, 0.0, ShearPhase::exact);

  out.b0 = make_real_field(g);
  const double bamp = p.eps * std::pow(p.lambda, 2.0 - p.beta);
  const double uamp = p.eps * std::pow(p.lambda, 3.0 - p.beta);
  Field ux = make_real_field(g), uy = make_real_field(g);
  const int n = g.n;
  for (int i = 0; i < n; ++i) {
    const double x = g.x(i);
    for (int j = 0; j < n; ++j) {
      const double y = g.x(j);
      const double r = std::hypot(x, y);
      const double rho = p.lambda * r;
      if (rho <= 1.0 || rho >= 4.0) continue;
      const BumpEval h = shell_profile(rho);
      out.b0.real[std::size_t(i) * n + j] = bamp * h.v;
      // u0 = d_r b0 e_theta, e_theta = (-y/r, x/r)
      const double v = uamp * h.d1 / r;
      ux.real[std::size_t(i) * n + j] = -y * v;
      uy.real[std::size_t(i) * n + j] = x * v;
    }
  }

  // spectral route for the cross-check: grad_perp b0
  auto gp = grad_perp(out.b0);
  ensure_real(gp[0]);
  ensure_real(gp[1]);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ux.real.size(); ++i) {
    const double dx = gp[0].real[i] - ux.real[i], dy = gp[1].real[i] - uy.real[i];
    num += dx * dx + dy * dy;
    den += ux.real[i] * ux.real[i] + uy.real[i] * uy.real[i];
  }
  out.dual_route_rel_err = den > 0 ? std::sqrt(num / den) : 0.0;
  if (out.dual_route_rel_err > 1e-6)
    fail("initial drift routes disagree: rel err " + std::to_string(out.dual_route_rel_err));
  out.u0x = std::move(ux);
  out.u0y = std::move(uy);
  return out;
}

std::pair<Field, Field> make_radial_data(const ModelParams& p, const GridSpec& g) {
  require_valid(p);
  validate(g);
  Field a = make_real_field(g), b = make_real_field(g);
  const double aamp = p.eps * std::pow(p.lambda, 1.0 - p.beta);
  const double bamp = p.eps * std::pow(p.lambda, 2.0 - p.beta);
  const int n = g.n;
  for (int i = 0; i < n; ++i) {
    const double x = g.x(i);
    for (int j = 0; j < n; ++j) {
      const double y = g.x(j);
      const double rho = p.lambda * std::hypot(x, y);
      if (rho > 1.0 && rho < 4.0) {
        if (rho > 2.0 && rho < 3.0)
          a.real[std::size_t(i) * n + j] = aamp * annulus_bump(rho).v;
        b.real[std::size_t(i) * n + j] = bamp * shell_profile(rho).v;
      }
    }
  }
  return {std::move(a), std::move(b)};
}

// ------------------------------------------------------- ubar by quadrature
//
// The integrand J(tau) = grad_perp abar . grad Lap abar at a fixed grid point
// is exactly P(s) + C(s) cos(phi s) + S(s) sin(phi s) with s = tau/t in [0,1],
// P, C, S polynomials of degree <= 4 and phi = 2 N Omega(rho) t (the doubled
// shear phase; the Jacobian structure cancels all same-phase chirp terms).
// Composite Simpson would need ~10 nodes per oscillation of phi (phi reaches
// several hundred at N=32), i.e. thousands of field evaluations. Instead we
// fit the 15-parameter model per point from Chebyshev-Lobatto samples in s
// (the model is exact, so the fit is limited only by roundoff) and integrate
// the fit analytically. Node-doubling convergence control is retained.

namespace {

constexpr int kBasis = 15;  // {s^m, s^m cos(phi s), s^m sin(phi s)}, m = 0..4

// int_0^1 s^m e^{i phi s} ds for m = 0..4
void osc_moments(double phi, std::complex<double> out[5]) {
  if (std::abs(phi) < 4.0) {  // series sum_k (i phi)^k / (k! (m+k+1))
    for (int m = 0; m < 5; ++m) {
      std::complex<double> term(1.0, 0.0), sum(0.0, 0.0);
      for (int k = 0; k < 48; ++k) {
        sum += term / double(m + k + 1);
        term *= std::complex<double>(0.0, phi) / double(k + 1);
      }
      out[m] = sum;
    }
    return;
  }
  const std::complex<double> iphi(0.0, phi);
  const std::complex<double> eip = std::exp(iphi);
  out[0] = (eip - 1.0) / iphi;
  for (int m = 1; m < 5; ++m) out[m] = (eip - double(m) * out[m - 1]) / iphi;
}

void basis_row(double s, double phi, double row[kBasis]) {
  double pw = 1.0;
  const double c = std::cos(phi * s), sn = std::sin(phi * s);
  for (int m = 0; m < 5; ++m) {
    row[m] = pw;
    row[5 + m] = pw * c;
    row[10 + m] = pw * sn;
    pw *= s;
  }
}

// solve SPD system via Cholesky; dim kBasis
bool cholesky_solve(double A[kBasis][kBasis], double b[kBasis]) {
  for (int i = 0; i < kBasis; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = A[i][j];
      for (int k = 0; k < j; ++k) sum -= A[i][k] * A[j][k];
      if (i == j) {
        if (sum <= 0.0) return false;
        A[i][i] = std::sqrt(sum);
      } else {
        A[i][j] = sum / A[j][j];
      }
    }
  }
  for (int i = 0; i < kBasis; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= A[i][k] * b[k];
    b[i] = sum / A[i][i];
  }
  for (int i = kBasis - 1; i >= 0; --i) {
    double sum = b[i];
    for (int k = i + 1; k < kBasis; ++k) sum -= A[k][i] * b[k];
    b[i] = sum / A[i][i];
  }
  return true;
}

// quadrature weights W so that int_0^1 J ds ~= sum_j W_j J(s_j), exact on the
// 15-dim model at frequency phi: W = A (A^T A + ridge)^{-1} g
void fit_weights(const std::vector<double>& nodes, double phi, std::vector<double>& W) {
  const int M = int(nodes.size());
  std::vector<double> A(std::size_t(M) * kBasis);
  for (int j = 0; j < M; ++j) basis_row(nodes[j], phi, &A[std::size_t(j) * kBasis]);
  double G[kBasis][kBasis] = {};
  for (int j = 0; j < M; ++j)
    for (int p = 0; p < kBasis; ++p)
      for (int q = 0; q <= p; ++q)
        G[p][q] += A[std::size_t(j) * kBasis + p] * A[std::size_t(j) * kBasis + q];
  for (int p = 0; p < kBasis; ++p)
    for (int q = p + 1; q < kBasis; ++q) G[p][q] = G[q][p];
  double tr = 0.0;
  for (int p = 0; p < kBasis; ++p) tr += G[p][p];
  for (int p = 0; p < kBasis; ++p) G[p][p] += 1e-13 * tr;

  double rhs[kBasis];
  std::complex<double> mom[5];
  osc_moments(phi, mom);
  for (int m = 0; m < 5; ++m) {
    rhs[m] = 1.0 / (m + 1);
    rhs[5 + m] = mom[m].real();
    rhs[10 + m] = mom[m].imag();
  }
  if (!cholesky_solve(G, rhs)) fail("phase-fit normal equations not SPD");
  W.assign(M, 0.0);
  for (int j = 0; j < M; ++j) {
    double s = 0.0;
    for (int p = 0; p < kBasis; ++p) s += A[std::size_t(j) * kBasis + p] * rhs[p];
    W[j] = s;
  }
}

// Chebyshev-Lobatto nodes on [0,1]; for M = 2^k+1 these nest
std::vector<double> lobatto_nodes(int M) {
  std::vector<double> s(M);
  for (int j = 0; j < M; ++j) s[j] = 0.5 * (1.0 - std::cos(kPi * j / (M - 1)));
  return s;
}

// support of the integrand: J vanishes wherever abar does (rho outside (2,3)),
// so slices are stored compressed on the annulus index set
struct AnnulusIndex {
  std::vector<std::size_t> idx;
  std::vector<double> rate;  // |shear rate| per point
};

AnnulusIndex build_annulus_index(const ModelParams& p, const GridSpec& g) {
  AnnulusIndex a;
  const int n = g.n;
  for (int i = 0; i < n; ++i) {
    const double x = g.x(i);
    for (int j = 0; j < n; ++j) {
      const double rho = p.lambda * std::hypot(x, g.x(j));
      if (rho > 2.0 && rho < 3.0) {
        a.idx.push_back(std::size_t(i) * n + j);
        a.rate.push_back(std::abs(shear_rate(p, rho)));
      }
    }
  }
  return a;
}

// J = grad_perp f . grad Lap f sampled on the grid (no dealiasing: the
// product is kept pointwise-exact and only transformed once integrated)
std::vector<float> hall_product_slice(const Field& fr, const AnnulusIndex& ann) {
  Field f = transform(fr);
  Field fx = inverse_transform(derivative(f, 0));
  Field fy = inverse_transform(derivative(f, 1));
  Field lf = laplacian(f);
  Field lx = inverse_transform(derivative(lf, 0));
  Field ly = inverse_transform(derivative(lf, 1));
  std::vector<float> out(ann.idx.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const std::size_t i = ann.idx[k];
    out[k] = float(fx.real[i] * ly.real[i] - fy.real[i] * lx.real[i]);
  }
  return out;
}

struct WeightTable {
  double dphi = 0.02;
  std::vector<std::vector<double>> W;  // [phi index][node]; W is even in phi
  void build(const std::vector<double>& nodes, double phi_max) {
    const int K = int(phi_max / dphi) + 4;
    W.resize(K);
    for (int k = 0; k < K; ++k) fit_weights(nodes, k * dphi, W[k]);
  }
  // Catmull-Rom in phi; the phi<dphi cell mirrors across 0 (even symmetry)
  void eval(double phi, std::vector<double>& out) const {
    const int K = int(W.size());
    const double s = phi / dphi;
    int i = std::clamp(int(s), 0, K - 3);
    const double x = s - i;
    const double c0 = -0.5 * x * (1 - x) * (1 - x);
    const double c1 = 1 + x * x * (1.5 * x - 2.5);
    const double c2 = x * (0.5 + x * (2 - 1.5 * x));
    const double c3 = 0.5 * x * x * (x - 1);
    const std::vector<double>& Wm1 = W[i == 0 ? 1 : i - 1];
    const int M = int(W[0].size());
    out.resize(M);
    for (int j = 0; j < M; ++j)
      out[j] = c0 * Wm1[j] + c1 * W[i][j] + c2 * W[i + 1][j] + c3 * W[i + 2][j];
  }
};

// integral field I(x) = int_0^t J(x, tau) dtau from precomputed slices
Field integrate_slices(const ModelParams& p, const GridSpec& g, double t,
                       const std::vector<std::vector<float>>& slices,
                       const std::vector<double>& nodes, const AnnulusIndex& ann) {
  const double rate_scale = 2.0 * p.n_osc * t;
  double phi_max = 0.0;
  for (double r : ann.rate) phi_max = std::max(phi_max, rate_scale * r);
  WeightTable table;
  table.build(nodes, phi_max + 1.0);

  Field I = make_real_field(g);
  const int M = int(nodes.size());
  std::vector<double> w;
  for (std::size_t k = 0; k < ann.idx.size(); ++k) {
    table.eval(rate_scale * ann.rate[k], w);
    double sum = 0.0;
    for (int m = 0; m < M; ++m) sum += w[m] * double(slices[m][k]);
    I.real[ann.idx[k]] = t * sum;
  }
  return I;
}

struct UbarFields {
  Field ux, uy;
};

UbarFields assemble_ubar(const GridSpec& g, const Field& I, const Field& u0x, const Field& u0y) {
  // ubar = u0 - grad_perp I
  Field Is = transform(I);
  Field gy = inverse_transform(derivative(Is, 1));
  Field gx = inverse_transform(derivative(Is, 0));
  UbarFields out;
  out.ux = make_real_field(g);
  out.uy = make_real_field(g);
  for (std::size_t i = 0; i < out.ux.real.size(); ++i) {
    out.ux.real[i] = u0x.real[i] + gy.real[i];
    out.uy.real[i] = u0y.real[i] - gx.real[i];
  }
  return out;
}

double vec_sobolev(const Field& fx, const Field& fy, double s, bool hom) {
  const double nx = sobolev_norm(fx, s, hom), ny = sobolev_norm(fy, s, hom);
  return std::hypot(nx, ny);
}

}  // namespace

UbarResult eval_ubar(const ModelParams& p, const GridSpec& g, double t) {
  require_valid(p);
  require_resolution(p, g);
  if (t < 0) throw std::invalid_argument("eval_ubar needs t >= 0");
  if (abar_resolution_margin(p, g, t) < 1.0)
    throw std::invalid_argument("grid cannot resolve the sheared scale over [0, t]");
  // the product carries a doubled phase; its band must fit under grid Nyquist
  {
    const double band = ubar_product_band(p, t);
    if (g.k_unit() * (g.n / 2) < band)
      throw std::invalid_argument("grid Nyquist cannot represent the doubled-phase band (need k >= " +
                                  std::to_string(band) + ")");
  }

  // base drift on the spectral route so ubar stays divergence-free to roundoff
  InitialData id = build_initial_data(p, g);
  auto gp = grad_perp(id.b0);
  Field u0x = inverse_transform(std::move(gp[0]));
  Field u0y = inverse_transform(std::move(gp[1]));
  if (t == 0.0) {
    UbarResult r;
    r.ux = std::move(u0x);
    r.uy = std::move(u0y);
    r.nodes_used = 0;
    r.refine_rel_change = 0.0;
    return r;
  }
  const double snorm = p.beta - 2.0;
  const AnnulusIndex ann = build_annulus_index(p, g);

  int M = 17;
  const int Mcap = 129;
  UbarFields prev;
  bool have_prev = false;
  double rel = 0.0;
  std::vector<std::vector<float>> slices;
  std::vector<double> nodes;
  while (true) {
    nodes = lobatto_nodes(M);
    // nested refinement: reuse every slice already computed (M -> 2M-1)
    std::vector<std::vector<float>> next(M);
    for (int j = 0; j < M; ++j) {
      if (have_prev && j % 2 == 0) {
        next[j] = std::move(slices[j / 2]);
      } else {
        Field abar_j = sample_abar(p, g, t * nodes[j], ShearPhase::exact);
        next[j] = hall_product_slice(abar_j, ann);
      }
    }
    slices = std::move(next);

    Field I = integrate_slices(p, g, t, slices, nodes, ann);
    UbarFields cur = assemble_ubar(g, I, u0x, u0y);
    if (have_prev) {
      Field dx = make_real_field(g), dy = make_real_field(g);
      for (std::size_t i = 0; i < dx.real.size(); ++i) {
        dx.real[i] = cur.ux.real[i] - prev.ux.real[i];
        dy.real[i] = cur.uy.real[i] - prev.uy.real[i];
      }
      rel = vec_sobolev(dx, dy, snorm, false) / vec_sobolev(cur.ux, cur.uy, snorm, false);
      if (rel < 1e-4) {
        UbarResult r;
        r.ux = std::move(cur.ux);
        r.uy = std::move(cur.uy);
        r.nodes_used = M;
        r.refine_rel_change = rel;
        return r;
      }
    }
    prev = std::move(cur);
    have_prev = true;
    if (M >= Mcap) break;
    M = 2 * M - 1;
  }
  throw std::runtime_error("ubar quadrature did not converge (last relative change " +
                           std::to_string(rel) + ")");
}

// --------------------------------------------------------- cancellation gap

double orthogonality_ratio(const Field& fr) {
  // evaluated on the dealias-projected representative (the projection that
  // defines the discrete dynamics); the top third of the band carries only
  // rounding noise which the third derivative would amplify by k^3
  Field f = transform(fr);
  dealias(f);
  const GridSpec& g = f.grid;
  auto gp = grad_perp(f);
  Field lf = laplacian(f);
  Field lx = inverse_transform(derivative(lf, 0));
  Field ly = inverse_transform(derivative(lf, 1));
  ensure_real(gp[0]);
  ensure_real(gp[1]);
  Field prod = make_real_field(g);
  for (std::size_t i = 0; i < prod.real.size(); ++i)
    prod.real[i] = gp[0].real[i] * lx.real[i] + gp[1].real[i] * ly.real[i];
  const double num = l2_norm(prod);
  const double den =
      vector_sup(gp[0], gp[1]) * std::hypot(l2_norm(lx), l2_norm(ly));
  if (den == 0.0) throw std::invalid_argument("orthogonality ratio of a degenerate field");
  return num / den;
}

double orthogonality_ratio(const ModelParams& p, const GridSpec& g, double t) {
  return orthogonality_ratio(eval_abar(p, g, t));
}

}  // namespace emhd
