#include "emhd/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace emhd {

namespace {

void validate_control(const StepControl& c) {
  if (!(c.cfl_safety > 0.0) || c.cfl_safety > 1.0)
    throw std::invalid_argument("cfl_safety must lie in (0, 1]");
  if (!(c.dt_max > 0.0)) throw std::invalid_argument("dt_max must be positive");
  if (!(c.c_disp > 0.0)) throw std::invalid_argument("c_disp must be positive");
  if (!(c.blowup_threshold > 0.0))
    throw std::invalid_argument("blowup_threshold must be positive");
}

}  // namespace

Solver::Solver(const ModelParams& p, const GridSpec& g, const StepControl& c)
    : par_(p), grid_(g), ctrl_(c) {
  require_valid(p);
  validate(g);
  validate_control(c);

  msym_ = fractional_laplacian_symbol(g, p.alpha);
  mask_ = dealias_mask(g);
  fsym_.assign(g.num_spec(), 0.0);
  const int cut = g.dealias_cut();
  for (int i = 0; i < g.n; ++i) {
    const int j1 = std::abs(g.freq_x(i));
    for (int cc = 0; cc < g.spec_cols(); ++cc) {
      const int m = std::max(j1, cc);
      if (m > cut) continue;
      const double q = double(m) / cut;
      fsym_[std::size_t(i) * g.spec_cols() + cc] = std::exp(-36.0 * std::pow(q, 36.0));
    }
  }

  st_.a_hat.assign(g.num_spec(), {0.0, 0.0});
  st_.b_hat.assign(g.num_spec(), {0.0, 0.0});
  const std::size_t m = g.num_spec();
  for (CVec* v : {&ka_, &kb_, &acc_a_, &acc_b_, &stage_a_, &stage_b_, &cwork_})
    v->assign(m, {0.0, 0.0});
  for (RVec* v : {&r1_, &r2_, &r3_, &r4_, &rp_}) v->assign(g.num_real(), 0.0);
}

void Solver::seed(const Field& a0, const Field& b0, double t0) {
  if (a0.grid != grid_ || b0.grid != grid_)
    throw std::invalid_argument("seed fields live on a different grid");
  Field a = transform(a0);
  Field b = transform(b0);
  seed_spectral(std::move(a.spec), std::move(b.spec), t0);
}

void Solver::seed_spectral(CVec a_hat, CVec b_hat, double t0) {
  if (a_hat.size() != grid_.num_spec() || b_hat.size() != grid_.num_spec())
    throw std::invalid_argument("seed spectra have the wrong size");
  st_.a_hat = std::move(a_hat);
  st_.b_hat = std::move(b_hat);
  for (std::size_t i = 0; i < st_.a_hat.size(); ++i) {
    st_.a_hat[i] *= mask_[i];
    st_.b_hat[i] *= mask_[i];
  }
  st_.time = t0;
  st_.step_count = 0;
  st_.last_dt = 0;
  dt_quant_ = -1.0;
}

Field Solver::field_a() const {
  Field f = make_spec_field(grid_);
  f.spec = st_.a_hat;
  ensure_real(f);
  return f;
}

Field Solver::field_b() const {
  Field f = make_spec_field(grid_);
  f.spec = st_.b_hat;
  ensure_real(f);
  return f;
}

// derivative of the dealiased input as real samples: d/dx or d/dy, optionally
// of the Laplacian. The 2/3 mask removes the Nyquist lines, so no separate
// odd-derivative handling is needed here.
void Solver::deriv_to_real(const CVec& src, int dim, bool of_laplacian, RVec& out) const {
  const GridSpec& g = grid_;
  const double ku = g.k_unit();
  const int cols = g.spec_cols();
  const int cut = g.dealias_cut();
  for (int i = 0; i < g.n; ++i) {
    const int j1 = g.freq_x(i);
    const double k1 = ku * j1;
    const bool row_dead = std::abs(j1) > cut;
    for (int cc = 0; cc < cols; ++cc) {
      const std::size_t idx = std::size_t(i) * cols + cc;
      if (row_dead || cc > cut) {
        cwork_[idx] = {0.0, 0.0};
        continue;
      }
      const double k2 = ku * cc;
      double f = dim == 0 ? k1 : k2;
      if (of_laplacian) f *= -(k1 * k1 + k2 * k2);
      const std::complex<double> v = src[idx];
      cwork_[idx] = {-f * v.imag(), f * v.real()};  // (i k f) v
    }
  }
  fft_inverse(g, cwork_.data(), out.data());
}

void Solver::product_to_spec(const RVec& prod, CVec& out) const {
  fft_forward(grid_, prod.data(), out.data());
  // negate, dealias, pin the zero mode (the product is an exact divergence;
  // its discrete mean is rounding noise)
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= -mask_[i];
  out[0] = {0.0, 0.0};
}

void Solver::eval_rhs(const CVec& ah, const CVec& bh, CVec& da, CVec& db, double* u_sup,
                      double* grad_a_sup) const {
  deriv_to_real(ah, 0, false, r1_);  // a_x
  deriv_to_real(ah, 1, false, r2_);  // a_y
  deriv_to_real(bh, 0, false, r3_);  // b_x
  deriv_to_real(bh, 1, false, r4_);  // b_y

  // grad_perp b . grad a = -b_y a_x + b_x a_y; the CFL sups ride along
  double us = 0, gs = 0;
  for (std::size_t i = 0; i < rp_.size(); ++i) {
    const double ax = r1_[i], ay = r2_[i], bx = r3_[i], by = r4_[i];
    rp_[i] = -by * ax + bx * ay;
    us = std::max(us, bx * bx + by * by);
    gs = std::max(gs, ax * ax + ay * ay);
  }
  product_to_spec(rp_, da);
  if (u_sup) *u_sup = std::sqrt(us);
  if (grad_a_sup) *grad_a_sup = std::sqrt(gs);

  deriv_to_real(ah, 0, true, r3_);  // (Lap a)_x
  deriv_to_real(ah, 1, true, r4_);  // (Lap a)_y

  // grad_perp a . grad Lap a = -a_y (Lap a)_x + a_x (Lap a)_y
  for (std::size_t i = 0; i < rp_.size(); ++i) rp_[i] = -r2_[i] * r3_[i] + r1_[i] * r4_[i];
  product_to_spec(rp_, db);
}

RhsResult Solver::nonlinear_rhs(const SolverState& s) const {
  if (s.a_hat.size() != grid_.num_spec() || s.b_hat.size() != grid_.num_spec())
    throw std::invalid_argument("state does not match the solver grid");
  RhsResult r;
  r.da.assign(grid_.num_spec(), {0.0, 0.0});
  r.db.assign(grid_.num_spec(), {0.0, 0.0});
  eval_rhs(s.a_hat, s.b_hat, r.da, r.db, &r.u_sup, &r.grad_a_sup);
  return r;
}

double Solver::cfl_dt(double u_sup, double grad_a_sup) const {
  const double adv = grid_.dx() / std::max(1.0, u_sup);
  const double kk = grid_.k_kept();
  const double omega = ctrl_.c_disp * grad_a_sup * kk * kk;
  const double disp = omega > 0.0 ? 2.8 / omega : std::numeric_limits<double>::infinity();
  return ctrl_.cfl_safety * std::min({adv, disp, ctrl_.dt_max});
}

void Solver::ensure_propagators(double dt) {
  if (dt == prop_dt_) return;
  const std::size_t m = grid_.num_spec();
  pa_half_.resize(m);
  pa_full_.resize(m);
  pb_half_.resize(m);
  pb_full_.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    pa_half_[i] = std::exp(-par_.mu * msym_[i] * dt * 0.5);
    pa_full_[i] = std::exp(-par_.mu * msym_[i] * dt);
    pb_half_[i] = std::exp(-par_.nu * msym_[i] * dt * 0.5);
    pb_full_[i] = std::exp(-par_.nu * msym_[i] * dt);
  }
  prop_dt_ = dt;
}

RunStatus Solver::step() {
  bool landed = false;
  return step_internal(std::numeric_limits<double>::infinity(), &landed);
}

RunStatus Solver::step_internal(double dt_cap, bool* landed) {
  const std::size_t m = grid_.num_spec();

  // stage 1 doubles as the CFL probe: k1 depends only on the current state
  double us = 0, gs = 0;
  eval_rhs(st_.a_hat, st_.b_hat, ka_, kb_, &us, &gs);

  // quantized dt: refresh the value (and with it the propagator tables) only
  // when the raw CFL leaves [dt_quant, 1.05 dt_quant]; a tighter raw value
  // always wins immediately
  const double raw = cfl_dt(us, gs);
  if (!(dt_quant_ > 0.0) || raw < dt_quant_ || raw > 1.05 * dt_quant_) dt_quant_ = raw;
  double dt = dt_quant_;
  *landed = false;
  if (dt_cap <= dt * (1.0 + 1e-9)) {
    dt = dt_cap;
    *landed = true;
  }
  ensure_propagators(dt);
  const double h2 = dt * 0.5, h6 = dt / 6.0;

  // IFRK4: y+ = Ef y + dt/6 (Ef k1 + 2 Eh (k2 + k3) + k4), E = heat propagator
  for (std::size_t i = 0; i < m; ++i) {
    acc_a_[i] = pa_full_[i] * ka_[i];
    acc_b_[i] = pb_full_[i] * kb_[i];
    stage_a_[i] = pa_half_[i] * (st_.a_hat[i] + h2 * ka_[i]);
    stage_b_[i] = pb_half_[i] * (st_.b_hat[i] + h2 * kb_[i]);
  }
  eval_rhs(stage_a_, stage_b_, ka_, kb_, nullptr, nullptr);  // k2
  for (std::size_t i = 0; i < m; ++i) {
    acc_a_[i] += 2.0 * pa_half_[i] * ka_[i];
    acc_b_[i] += 2.0 * pb_half_[i] * kb_[i];
    stage_a_[i] = pa_half_[i] * st_.a_hat[i] + h2 * ka_[i];
    stage_b_[i] = pb_half_[i] * st_.b_hat[i] + h2 * kb_[i];
  }
  eval_rhs(stage_a_, stage_b_, ka_, kb_, nullptr, nullptr);  // k3
  for (std::size_t i = 0; i < m; ++i) {
    acc_a_[i] += 2.0 * pa_half_[i] * ka_[i];
    acc_b_[i] += 2.0 * pb_half_[i] * kb_[i];
    stage_a_[i] = pa_full_[i] * st_.a_hat[i] + dt * pa_half_[i] * ka_[i];
    stage_b_[i] = pb_full_[i] * st_.b_hat[i] + dt * pb_half_[i] * kb_[i];
  }
  eval_rhs(stage_a_, stage_b_, ka_, kb_, nullptr, nullptr);  // k4
  for (std::size_t i = 0; i < m; ++i) {
    stage_a_[i] = pa_full_[i] * st_.a_hat[i] + h6 * (acc_a_[i] + ka_[i]);
    stage_b_[i] = pb_full_[i] * st_.b_hat[i] + h6 * (acc_b_[i] + kb_[i]);
  }

  if (ctrl_.filter_enabled)
    for (std::size_t i = 0; i < m; ++i) {
      stage_a_[i] *= fsym_[i];
      stage_b_[i] *= fsym_[i];
    }

  // finiteness plus a free sup bound: sup|a| <= sum_k |coef_k| <= sum of
  // |re| + |im| with the half-storage weights
  const int cols = grid_.spec_cols();
  double suma = 0, sumb = 0;
  for (int i = 0; i < grid_.n; ++i)
    for (int cc = 0; cc < cols; ++cc) {
      const std::size_t idx = std::size_t(i) * cols + cc;
      const double w = (cc == 0 || 2 * cc == grid_.n) ? 1.0 : 2.0;
      suma += w * (std::abs(stage_a_[idx].real()) + std::abs(stage_a_[idx].imag()));
      sumb += w * (std::abs(stage_b_[idx].real()) + std::abs(stage_b_[idx].imag()));
    }
  bool bad = !std::isfinite(suma) || !std::isfinite(sumb);
  if (!bad && suma > ctrl_.blowup_threshold) {
    // the l1 bound is conservative; confirm on grid samples before giving up
    fft_inverse(grid_, stage_a_.data(), r1_.data());
    double sup = 0;
    for (double v : r1_) sup = std::max(sup, std::abs(v));
    bad = !std::isfinite(sup) || sup > ctrl_.blowup_threshold;
  }
  if (bad) return RunStatus::unstable;  // state keeps the last valid step

  st_.a_hat.swap(stage_a_);
  st_.b_hat.swap(stage_b_);
  st_.time += dt;
  st_.step_count += 1;
  st_.last_dt = dt;
  return RunStatus::completed;
}

RunStatus Solver::evolve(double t_end, int stride, const Observer& obs) {
  if (t_end < st_.time) throw std::invalid_argument("t_end precedes the current state");
  if (obs) obs(st_);
  if (st_.time >= t_end) return RunStatus::completed;
  while (st_.time < t_end) {
    bool landed = false;
    const RunStatus s = step_internal(t_end - st_.time, &landed);
    if (s == RunStatus::unstable) {
      if (obs) obs(st_);
      return s;
    }
    if (landed) st_.time = t_end;  // exact landing
    if (obs && stride > 0 && st_.step_count % stride == 0 && st_.time < t_end) obs(st_);
  }
  if (obs) obs(st_);
  return RunStatus::completed;
}

}  // namespace emhd
