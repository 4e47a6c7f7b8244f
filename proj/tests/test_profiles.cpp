#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "emhd/profiles.hpp"

using namespace emhd;

namespace {

// independent Simpson integration of a lambda on [lo, hi]
template <class F>
double simpson(F f, double lo, double hi, int intervals) {
  double sum = 0.0;
  const double h = (hi - lo) / intervals;
  for (int i = 0; i < intervals; ++i) {
    const double a = lo + i * h, b = a + h;
    sum += h / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
  }
  return sum;
}

double raw_bump(double v) { return (v > 0 && v < 1) ? std::exp(-1.0 / (v * (1.0 - v))) : 0.0; }

// centered finite differences on a scalar callable
template <class F>
double fd1(F f, double x, double h) {
  return (f(x + h) - f(x - h)) / (2 * h);
}
template <class F>
double fd2(F f, double x, double h) {
  return (f(x + h) - 2 * f(x) + f(x - h)) / (h * h);
}

ModelParams small_params() {
  ModelParams p;
  p.lambda = 8.0;
  p.n_osc = 8;
  return p;
}

}  // namespace

TEST_CASE("smoothstep endpoints, normalization, and derivatives") {
  CHECK(smoothstep::value(-0.5) == 0.0);
  CHECK(smoothstep::value(0.0) == 0.0);
  CHECK(smoothstep::value(1.0) == 1.0);
  CHECK(smoothstep::value(2.0) == 1.0);

  // the normalizing constant B(1) = int_0^1 exp(-1/(v(1-v))) dv
  const double B1 = 0.007029858406609612;  // high-resolution quadrature
  CHECK(smoothstep::deriv(0.5) == doctest::Approx(std::exp(-4.0) / B1).epsilon(1e-12));

  // values against an independent Simpson accumulation
  for (double u : {0.15, 0.3, 0.5, 0.62, 0.85}) {
    const double ref = simpson(raw_bump, 0.0, u, 20000) / B1;
    CHECK(smoothstep::value(u) == doctest::Approx(ref).epsilon(1e-9));
  }

  // derivative chain against finite differences of lower orders
  for (double u : {0.2, 0.35, 0.5, 0.7, 0.9}) {
    CHECK(smoothstep::deriv(u) ==
          doctest::Approx(fd1(smoothstep::value, u, 1e-6)).epsilon(2e-7));
    CHECK(smoothstep::deriv2(u) ==
          doctest::Approx(fd1(smoothstep::deriv, u, 1e-6)).epsilon(1e-8));
    CHECK(smoothstep::deriv3(u) ==
          doctest::Approx(fd1(smoothstep::deriv2, u, 1e-6)).epsilon(1e-8));
  }

  // monotone ramp
  double prev = 0.0;
  for (int i = 1; i <= 50; ++i) {
    const double v = smoothstep::value(i / 50.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("annulus bump: peak, support, derivative chain") {
  CHECK(annulus_bump(2.5).v == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(annulus_bump(2.0).v == 0.0);
  CHECK(annulus_bump(3.0).v == 0.0);
  CHECK(annulus_bump(1.0).d2 == 0.0);
  // exp(4 - 1/0.16)
  CHECK(annulus_bump(2.2).v == doctest::Approx(0.10539922456186433).epsilon(1e-14));

  auto g0 = [](double r) { return annulus_bump(r).v; };
  auto g1 = [](double r) { return annulus_bump(r).d1; };
  auto g2 = [](double r) { return annulus_bump(r).d2; };
  for (double r : {2.1, 2.3, 2.5, 2.7, 2.9}) {
    CHECK(annulus_bump(r).d1 == doctest::Approx(fd1(g0, r, 1e-6)).epsilon(1e-7));
    CHECK(annulus_bump(r).d2 == doctest::Approx(fd1(g1, r, 1e-6)).epsilon(1e-7));
    CHECK(annulus_bump(r).d3 == doctest::Approx(fd1(g2, r, 1e-6)).epsilon(1e-7));
  }
}

TEST_CASE("cutoff: plateau, edges, derivative chain") {
  for (double r : {1.8, 2.0, 2.5, 3.0, 3.2}) {
    CHECK(cutoff_chi(r).v == 1.0);
    CHECK(cutoff_chi(r).d1 == 0.0);
  }
  CHECK(cutoff_chi(0.9).v == 0.0);
  CHECK(cutoff_chi(1.0).v == 0.0);
  CHECK(cutoff_chi(4.0).v == 0.0);
  CHECK(cutoff_chi(1.4).v == doctest::Approx(0.5).epsilon(1e-12));  // edge midpoint
  CHECK(cutoff_chi(3.6).v == doctest::Approx(0.5).epsilon(1e-12));
  // steepest slope = S'(1/2)/width on the rising edge, negated on the falling
  const double peak = std::exp(-4.0) / 0.007029858406609612 / 0.8;
  CHECK(cutoff_chi(1.4).d1 == doctest::Approx(peak).epsilon(1e-12));
  CHECK(cutoff_chi(3.6).d1 == doctest::Approx(-peak).epsilon(1e-12));

  auto c0 = [](double r) { return cutoff_chi(r).v; };
  auto c1 = [](double r) { return cutoff_chi(r).d1; };
  auto c2 = [](double r) { return cutoff_chi(r).d2; };
  for (double r : {1.25, 1.55, 3.45, 3.8}) {
    CHECK(cutoff_chi(r).d1 == doctest::Approx(fd1(c0, r, 1e-6)).epsilon(1e-6));
    CHECK(cutoff_chi(r).d2 == doctest::Approx(fd1(c1, r, 1e-6)).epsilon(1e-6));
    CHECK(cutoff_chi(r).d3 == doctest::Approx(fd1(c2, r, 1e-6)).epsilon(1e-6));
  }
}

TEST_CASE("shell profile: pure exponential on the plateau, monotone push") {
  CHECK(shell_profile(2.5).v == doctest::Approx(std::exp(2.5)).epsilon(1e-15));
  CHECK(shell_profile(2.5).d1 == doctest::Approx(std::exp(2.5)).epsilon(1e-15));
  CHECK(shell_profile(2.5).d2 == doctest::Approx(std::exp(2.5)).epsilon(1e-15));
  CHECK(shell_profile(1.0).v == 0.0);
  CHECK(shell_profile(4.0).v == 0.0);
  CHECK_NOTHROW(verify_shell_profile());

  auto h0 = [](double r) { return shell_profile(r).v; };
  auto h1 = [](double r) { return shell_profile(r).d1; };
  for (double r : {1.3, 1.7, 2.5, 3.4, 3.7}) {
    CHECK(shell_profile(r).d1 == doctest::Approx(fd1(h0, r, 1e-6)).epsilon(1e-6));
    CHECK(shell_profile(r).d2 == doctest::Approx(fd1(h1, r, 1e-6)).epsilon(1e-6));
    CHECK(shell_profile(r).d3 ==
          doctest::Approx(fd2(h1, r, 1e-5)).epsilon(1e-4));
  }

  // the drift amplitude is set by the outer cutoff shoulder, not the plateau
  double m = 0.0, arg = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double r = 1.0 + 3.0 * i / 20000.0;
    const double d = std::abs(shell_profile(r).d1);
    if (d > m) m = d, arg = r;
  }
  CHECK(m == doctest::Approx(105.023).epsilon(2e-3));
  CHECK(arg > 3.55);
  CHECK(arg < 3.72);
}

TEST_CASE("parameter window enforcement") {
  ModelParams p;  // defaults: alpha .25, beta 3.2 -> inside 3 < beta < 3.5
  CHECK(validate(p).empty());
  CHECK_NOTHROW(require_valid(p));

  p.beta = 3.7;  // violates beta < 4 - 2 alpha = 3.5
  auto v = validate(p);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("4 - 2*alpha") != std::string::npos);
  CHECK_THROWS_AS(require_valid(p), std::invalid_argument);

  p.beta = 2.9;
  CHECK(validate(p).size() == 1);

  // all violations reported at once
  p.alpha = 0.8;
  p.eps = 1.5;
  p.lambda = 2.0;
  CHECK(validate(p).size() >= 3);

  // exploratory mode relaxes the window but not basic sanity
  ModelParams q;
  q.mode = ParamMode::exploratory;
  q.alpha = 0.5;
  q.beta = 2.0;
  q.lambda = 2.0;
  CHECK(validate(q).empty());
  q.beta = 0.5;
  CHECK(validate(q).size() == 1);
}

TEST_CASE("inflation time") {
  ModelParams p;  // eps 1/2, lambda 16, beta 3.2
  CHECK(t_star(p) == doctest::Approx(4.0 * std::pow(16.0, -0.8)).epsilon(1e-15));
  CHECK(t_star(p) == doctest::Approx(0.435275281648062).epsilon(1e-12));
  p.eps = 0.25;
  p.lambda = 8.0;
  p.beta = 3.5;
  CHECK(t_star(p) == doctest::Approx(16.0 / std::sqrt(8.0)).epsilon(1e-15));
}

TEST_CASE("resolution floor") {
  ModelParams p;
  CHECK(required_n(p, kPi) == 16 * 16 * 16);
  CHECK(required_n(p, kPi / 8) == 512);
  p.lambda = 8;
  p.n_osc = 8;
  CHECK(required_n(p, kPi / 4) == 256);
}

TEST_CASE("initial data: quadrature oracle, support, drift routes") {
  ModelParams p = small_params();
  // the spectral/analytic route comparison needs the Gevrey tail of the
  // cutoff shoulder under 1e-6, i.e. k_max * (0.8/lambda) >~ 130
  GridSpec g{768, kPi / 4};
  InitialData id = build_initial_data(p, g);

  CHECK(id.dual_route_rel_err <= 1e-6);

  // polar quadrature oracle: ||a0||_L2^2 = amp^2 pi lam^-2 int_2^3 g^2 rho drho
  const double amp = p.eps * std::pow(p.lambda, 1.0 - p.beta) * std::pow(8.0, -p.beta);
  auto g2rho = [](double rho) {
    const double q = (rho - 2.0) * (3.0 - rho);
    if (q <= 0) return 0.0;
    const double b = std::exp(4.0 - 1.0 / q);
    return b * b * rho;
  };
  const double ref = amp * std::sqrt(kPi / (p.lambda * p.lambda) * simpson(g2rho, 2.0, 3.0, 40000));
  CHECK(l2_norm(id.a0) == doctest::Approx(ref).epsilon(1e-10));

  // same oracle for the drift: ||u0||^2 = (eps lam^{3-b})^2 2 pi lam^-2 int h'^2 rho
  auto hp2rho = [](double rho) {
    const double d = shell_profile(rho).d1;
    return d * d * rho;
  };
  const double uamp = p.eps * std::pow(p.lambda, 3.0 - p.beta);
  const double uref =
      uamp * std::sqrt(2.0 * kPi / (p.lambda * p.lambda) * simpson(hp2rho, 1.0, 4.0, 40000));
  const double unorm = std::hypot(l2_norm(id.u0x), l2_norm(id.u0y));
  CHECK(unorm == doctest::Approx(uref).epsilon(1e-10));

  // closed-form fields vanish identically off the annuli
  int bad = 0;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      const double rho = p.lambda * std::hypot(g.x(i), g.x(j));
      const std::size_t k = std::size_t(i) * g.n + j;
      if ((rho <= 2.0 || rho >= 3.0) && id.a0.real[k] != 0.0) ++bad;
      if ((rho <= 1.0 || rho >= 4.0) &&
          (id.b0.real[k] != 0.0 || id.u0x.real[k] != 0.0 || id.u0y.real[k] != 0.0))
        ++bad;
    }
  CHECK(bad == 0);
  CHECK(boundary_ring_max(id.a0, 3) == 0.0);
  CHECK(boundary_ring_max(id.b0, 3) == 0.0);

  // mean-zero data (relative to its own sup)
  double mean = 0.0;
  for (double v : id.a0.real) mean += v;
  mean /= double(id.a0.real.size());
  CHECK(std::abs(mean) <= 1e-12 * sup_norm(id.a0));

  // spectral drift route is divergence-free
  auto gp = grad_perp(id.b0);
  Field div = make_spec_field(g);
  Field dxx = derivative(gp[0], 0), dyy = derivative(gp[1], 1);
  for (std::size_t i = 0; i < div.spec.size(); ++i) div.spec[i] = dxx.spec[i] + dyy.spec[i];
  CHECK(sup_norm(div) <= 1e-10 * vector_sup(id.u0x, id.u0y));
}

TEST_CASE("radial companion data") {
  ModelParams p = small_params();
  GridSpec g{128, kPi / 4};
  auto [a, b] = make_radial_data(p, g);
  // no angular factor: radial peak value is eps lam^{1-beta} at rho = 2.5
  const double peak = p.eps * std::pow(p.lambda, 1.0 - p.beta);
  CHECK(sup_norm(a) == doctest::Approx(peak).epsilon(1e-3));
  CHECK(sup_norm(b) > 0.0);
  // purely radial: invariant under quarter rotation (i,j) -> (j, n-i)
  int bad = 0;
  for (int i = 1; i < g.n; ++i)
    for (int j = 1; j < g.n; ++j)
      if (a.real[std::size_t(i) * g.n + j] !=
          a.real[std::size_t(j) * g.n + (g.n - i)])
        ++bad;
  CHECK(bad == 0);
}

TEST_CASE("approximate solution: t=0 identity, norm carried by transport") {
  ModelParams p = small_params();
  p.beta = 3.2;
  GridSpec g{768, kPi / 4};
  InitialData id = build_initial_data(p, g);

  Field a0 = eval_abar(p, g, 0.0);
  int diff = 0;
  for (std::size_t i = 0; i < a0.real.size(); ++i)
    if (a0.real[i] != id.a0.real[i]) ++diff;
  CHECK(diff == 0);  // same sampling kernel, bit for bit

  const double ts = t_star(p);
  const double n0 = l2_norm(id.a0);
  CHECK(l2_norm(eval_abar(p, g, ts / 2)) == doctest::Approx(n0).epsilon(1e-8));
  CHECK(l2_norm(eval_abar(p, g, ts)) == doctest::Approx(n0).epsilon(1e-8));
}

TEST_CASE("approximate solution solves the frozen-drift transport equation") {
  ModelParams p = small_params();
  GridSpec g{768, kPi / 4};
  InitialData id = build_initial_data(p, g);
  const double t = 0.5 * t_star(p), dt = 1e-5;

  Field ap = eval_abar(p, g, t + dt), am = eval_abar(p, g, t - dt);
  Field ac = eval_abar(p, g, t);
  auto grad = gradient(ac);
  ensure_real(grad[0]);
  ensure_real(grad[1]);

  double res2 = 0.0, adv2 = 0.0;
  for (std::size_t i = 0; i < ac.real.size(); ++i) {
    const double at = (ap.real[i] - am.real[i]) / (2 * dt);
    const double adv = id.u0x.real[i] * grad[0].real[i] + id.u0y.real[i] * grad[1].real[i];
    res2 += (at + adv) * (at + adv);
    adv2 += adv * adv;
  }
  CHECK(std::sqrt(res2 / adv2) <= 1e-5);
}

TEST_CASE("formula field matches semi-Lagrangian advection of sampled data") {
  ModelParams p = small_params();
  GridSpec g{768, kPi / 4};
  const double t = 0.5 * t_star(p);
  Field ab = eval_abar(p, g, t);

  // source: t=0 data sampled on a finer auxiliary lattice (no transforms);
  // 4-point Lagrange tensor interpolation at the rotated-back foot points
  const int ns = 3072;
  const double Ls = kPi / 4, dxs = 2 * Ls / ns;
  std::vector<double> src(std::size_t(ns) * ns, 0.0);
  const double amp = p.eps * std::pow(p.lambda, 1.0 - p.beta) * std::pow(8.0, -p.beta);
  for (int i = 0; i < ns; ++i) {
    const double x = -Ls + i * dxs;
    for (int j = 0; j < ns; ++j) {
      const double y = -Ls + j * dxs;
      const double rho = p.lambda * std::hypot(x, y);
      if (rho > 2.0 && rho < 3.0)
        src[std::size_t(i) * ns + j] =
            amp * annulus_bump(rho).v * std::cos(p.n_osc * std::atan2(y, x));
    }
  }
  auto lagw = [](double f, double w[4]) {
    w[0] = -f * (f - 1) * (f - 2) / 6.0;
    w[1] = (f + 1) * (f - 1) * (f - 2) / 2.0;
    w[2] = -(f + 1) * f * (f - 2) / 2.0;
    w[3] = (f + 1) * f * (f - 1) / 6.0;
  };
  double d2 = 0.0, n2 = 0.0;
  for (int i = 0; i < g.n; ++i) {
    const double x = g.x(i);
    for (int j = 0; j < g.n; ++j) {
      const double y = g.x(j);
      const double r = std::hypot(x, y);
      const double rho = p.lambda * r;
      if (rho <= 2.0 || rho >= 3.0) continue;
      const double om = p.eps * std::pow(p.lambda, 4.0 - p.beta) * shell_profile(rho).d1 / rho;
      const double th = std::atan2(y, x) - t * om;
      const double fx = (r * std::cos(th) + Ls) / dxs, fy = (r * std::sin(th) + Ls) / dxs;
      const int ix = int(std::floor(fx)), iy = int(std::floor(fy));
      double wx[4], wy[4];
      lagw(fx - ix, wx);
      lagw(fy - iy, wy);
      double v = 0.0;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          v += wx[a] * wy[b] *
               src[std::size_t((ix - 1 + a + ns) % ns) * ns + ((iy - 1 + b + ns) % ns)];
      const double ref = ab.real[std::size_t(i) * g.n + j];
      d2 += (ref - v) * (ref - v);
      n2 += ref * ref;
    }
  }
  CHECK(std::sqrt(d2 / n2) <= 1e-6);
}

TEST_CASE("leading-order phase differs from the exact shear by an O(1) gap") {
  ModelParams p = small_params();
  GridSpec g{768, kPi / 4};
  const double t = t_star(p);
  Field ex = eval_abar(p, g, t, ShearPhase::exact);
  Field lo = eval_abar(p, g, t, ShearPhase::leading_order);
  double d2 = 0.0, n2 = 0.0;
  for (std::size_t i = 0; i < ex.real.size(); ++i) {
    d2 += (ex.real[i] - lo.real[i]) * (ex.real[i] - lo.real[i]);
    n2 += ex.real[i] * ex.real[i];
  }
  const double gap = std::sqrt(d2 / n2);
  CHECK(gap > 1e-3);
  CHECK(gap < 2.0);
}

TEST_CASE("resolution margin gates the sheared evaluation") {
  ModelParams p = small_params();
  GridSpec g{256, kPi / 4};
  const double ts = t_star(p);
  CHECK(abar_resolution_margin(p, g, 0.0) > abar_resolution_margin(p, g, ts));
  CHECK(abar_resolution_margin(p, g, 20 * ts) < 1.0);
  CHECK_THROWS_AS(eval_abar(p, g, 20 * ts), std::invalid_argument);
  // too-coarse grids are rejected outright
  GridSpec tiny{64, kPi / 4};
  CHECK_THROWS_AS(eval_abar(p, tiny, 0.0), std::invalid_argument);
}

TEST_CASE("corrected drift: t=0 reduction and dense-quadrature oracle") {
  ModelParams p;
  p.lambda = 4.0;
  p.n_osc = 2;
  GridSpec g{640, kPi / 2};
  const double t = t_star(p);

  // t = 0 returns the spectral drift route exactly
  UbarResult u0r = eval_ubar(p, g, 0.0);
  InitialData id = build_initial_data(p, g);
  auto gp = grad_perp(id.b0);
  Field rx = inverse_transform(gp[0]), ry = inverse_transform(gp[1]);
  int diff = 0;
  for (std::size_t i = 0; i < rx.real.size(); ++i) {
    if (u0r.ux.real[i] != rx.real[i]) ++diff;
    if (u0r.uy.real[i] != ry.real[i]) ++diff;
  }
  CHECK(diff == 0);

  UbarResult ub = eval_ubar(p, g, t);
  CHECK(ub.nodes_used >= 17);
  CHECK(ub.refine_rel_change <= 1e-4);

  // independent oracle: composite Simpson in time over the full Hall product
  const int M = 241;  // ~27 rad of doubled phase -> Simpson error ~1e-6
  Field I = make_real_field(g);
  const double h = t / (M - 1);
  for (int m = 0; m < M; ++m) {
    Field ab = eval_abar(p, g, m * h);
    Field fs = transform(ab);
    Field fx = inverse_transform(derivative(fs, 0));
    Field fy = inverse_transform(derivative(fs, 1));
    Field lf = laplacian(fs);
    Field lx = inverse_transform(derivative(lf, 0));
    Field ly = inverse_transform(derivative(lf, 1));
    const double w = (m == 0 || m == M - 1) ? 1.0 : (m % 2 ? 4.0 : 2.0);
    for (std::size_t i = 0; i < I.real.size(); ++i)
      I.real[i] += w * h / 3.0 * (fx.real[i] * ly.real[i] - fy.real[i] * lx.real[i]);
  }
  Field Is = transform(I);
  Field gy = inverse_transform(derivative(Is, 1));
  Field gx = inverse_transform(derivative(Is, 0));
  Field ox = make_real_field(g), oy = make_real_field(g);
  for (std::size_t i = 0; i < ox.real.size(); ++i) {
    ox.real[i] = rx.real[i] + gy.real[i];
    oy.real[i] = ry.real[i] - gx.real[i];
  }

  const double s = p.beta - 2.0;
  Field dx = make_real_field(g), dy = make_real_field(g);
  for (std::size_t i = 0; i < dx.real.size(); ++i) {
    dx.real[i] = ub.ux.real[i] - ox.real[i];
    dy.real[i] = ub.uy.real[i] - oy.real[i];
  }
  const double dnorm = std::hypot(sobolev_norm(dx, s, false), sobolev_norm(dy, s, false));
  const double onorm = std::hypot(sobolev_norm(ox, s, false), sobolev_norm(oy, s, false));
  CHECK(dnorm / onorm <= 2e-4);

  // corrected drift stays divergence-free
  Field div = make_spec_field(g);
  Field ddx = derivative(ub.ux, 0), ddy = derivative(ub.uy, 1);
  for (std::size_t i = 0; i < div.spec.size(); ++i) div.spec[i] = ddx.spec[i] + ddy.spec[i];
  CHECK(sup_norm(div) <= 1e-9 * vector_sup(ub.ux, ub.uy));

  // and the correction is small next to the drift itself
  Field ex = make_real_field(g), ey = make_real_field(g);
  for (std::size_t i = 0; i < ex.real.size(); ++i) {
    ex.real[i] = ub.ux.real[i] - rx.real[i];
    ey.real[i] = ub.uy.real[i] - ry.real[i];
  }
  const double excess = std::hypot(sobolev_norm(ex, s, false), sobolev_norm(ey, s, false)) /
                        std::hypot(sobolev_norm(rx, s, false), sobolev_norm(ry, s, false));
  CHECK(excess < 1.0);
}

TEST_CASE("transversality ratio: exact zero for radial fields, decays with N") {
  // the radial zero sits in a narrow window: the projected band must clear the
  // bump's Gevrey tail yet stay below the k^3-amplified rounding-noise floor
  ModelParams p;
  p.lambda = 16;
  p.n_osc = 8;
  auto [a, b] = make_radial_data(p, GridSpec{3072, kPi / 8});
  CHECK(orthogonality_ratio(a) <= 1e-10);

  // oscillatory case: ratio ~ 1/N (sampled at strong phase winding)
  ModelParams p8 = p;
  p8.eps = 0.25;
  const double r8 = orthogonality_ratio(p8, GridSpec{1440, kPi / 8}, t_star(p8));
  ModelParams p16 = p8;
  p16.n_osc = 16;
  const double r16 = orthogonality_ratio(p16, GridSpec{2880, kPi / 8}, t_star(p16));
  CHECK(r8 > 0.0);
  CHECK(r16 < r8);
  const double slope = std::log2(r8 / r16);
  CHECK(slope > 0.7);
  CHECK(slope < 1.5);
}
