#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emhd/experiments.hpp"

using namespace emhd;

namespace {

ModelParams quick_params() {
  ModelParams p;
  p.alpha = 0.25;
  p.beta = 3.2;
  p.mu = p.nu = 0.01;
  p.eps = 0.5;
  p.lambda = 8.0;
  p.n_osc = 4;
  return p;
}

const ScalingReport& find_report(const std::vector<ScalingReport>& reps, SweepAxis ax,
                                 const std::string& q) {
  for (const auto& r : reps)
    if (r.axis == ax && r.quantity == q) return r;
  REQUIRE_MESSAGE(false, "missing report " << q);
  return reps.front();
}

}  // namespace

TEST_CASE("grid planning walks the fast-size table and obeys the laws") {
  CHECK(pick_good_size(1) == 64);
  CHECK(pick_good_size(64) == 64);
  CHECK(pick_good_size(65) == 96);
  CHECK(pick_good_size(700) == 768);
  CHECK(pick_good_size(3840) == 3840);
  CHECK_THROWS_AS(pick_good_size(3841), std::runtime_error);

  ModelParams p;  // headline defaults: lambda = n_osc = 16
  const double ts = t_star(p);

  GridSpec gd = plan_grid(p, 0.0, GridPurpose::data_only);
  CHECK(gd.half_width == doctest::Approx(2.0 * kPi / p.lambda));
  // the profile-tail law dominates at the default box: 103.45 * lambda * L
  CHECK(gd.n == 768);
  CHECK(gd.n >= required_n(p, gd.half_width));

  GridSpec ga = plan_grid(p, ts, GridPurpose::abar);
  GridSpec ge = plan_grid(p, ts, GridPurpose::evolve);
  GridSpec gu = plan_grid(p, ts, GridPurpose::ubar);
  CHECK(ga.n >= gd.n);
  CHECK(ge.n == ga.n);  // same margin law
  CHECK(gu.n >= ga.n);
  CHECK(abar_resolution_margin(p, ga, ts) >= 1.05);
  CHECK(abar_resolution_margin(p, gu, ts) >= 1.4);
  // one size down must violate the margin, otherwise the planner overshot
  if (gu.n > 64) {
    int below = 64;
    for (int n = below; n < gu.n; n = pick_good_size(n + 1)) below = n;
    CHECK(abar_resolution_margin(p, GridSpec{below, gu.half_width}, ts) < 1.4);
  }

  // explicit boxes: honored, but must hold the data support
  GridSpec gx = plan_grid(p, 0.0, GridPurpose::data_only, 0.5);
  CHECK(gx.half_width == 0.5);
  CHECK_THROWS_AS(plan_grid(p, 0.0, GridPurpose::data_only, 0.2), std::runtime_error);

  // desk-scale cap: absurd oscillation counts have no admissible grid
  ModelParams big = p;
  big.n_osc = 1000;
  CHECK_THROWS_AS(plan_grid(big, 0.0, GridPurpose::data_only), std::runtime_error);
}

TEST_CASE("experiment configs are validated with every violation listed") {
  ExperimentConfig ok;
  CHECK(validate(ok).empty());

  ExperimentConfig bad;
  bad.s_list = {0.0, 9.0};
  bad.observer_stride = 0;
  bad.workers = 0;
  bad.t_end_is_tstar = false;
  bad.t_end = 0.0;
  bad.grid = GridSpec{91, -1.0};
  auto v = validate(bad);
  CHECK(v.size() == 6);  // grid contributes two: odd n and negative box
  try {
    require_valid(bad);
    CHECK(false);
  } catch (const std::invalid_argument& ex) {
    const std::string msg = ex.what();
    for (const char* key : {"s_list", "observer_stride", "workers", "t_end", "grid_n",
                            "half_width"})
      CHECK_MESSAGE(msg.find(key) != std::string::npos, "missing '" << key << "' in: " << msg);
  }

  ExperimentConfig ts;
  ts.t_end_is_tstar = true;  // explicit horizon not required in t* mode
  ts.t_end = 0.0;
  CHECK(validate(ts).empty());
  CHECK(resolved_t_end(ts) == doctest::Approx(t_star(ts.params)));
  ts.t_end_is_tstar = false;
  ts.t_end = 0.25;
  CHECK(resolved_t_end(ts) == 0.25);
}

TEST_CASE("short-horizon inflation run: exact zero error at t=0, coherent report") {
  ExperimentConfig cfg;
  cfg.params = quick_params();
  cfg.params.lambda = 4.0;  // cheapest full-fidelity datum
  cfg.ctrl.cfl_safety = 0.65;
  cfg.ctrl.dt_max = 1e-3;
  cfg.s_list = {-1.0, 0.0, 1.0};
  cfg.observer_stride = 5;
  cfg.t_end_is_tstar = false;
  cfg.t_end = 5e-4;

  InflationReport rep = inflation_experiment(cfg);
  CHECK(rep.status == RunStatus::completed);
  CHECK(rep.t_star == 5e-4);
  // auto-planned: the profile-tail law picks 768 at the default box
  CHECK(rep.grid.n == 768);
  CHECK(rep.grid.half_width == doctest::Approx(kPi / 2.0));

  REQUIRE(rep.series.entries.size() >= 3);
  const auto& first = rep.series.entries.front();
  const auto& last = rep.series.entries.back();
  CHECK(first.time == 0.0);
  CHECK(last.time == 5e-4);

  // beta joins the tracked orders automatically
  REQUIRE(rep.series.s_list.size() == 4);
  CHECK(rep.series.s_list[3] == cfg.params.beta);

  // the closed form rides through the same projection as the seed, so the
  // initial error field vanishes bit for bit, at every tracked order
  REQUIRE(first.err_hs.size() == 4);
  for (double e : first.err_hs) CHECK(e == 0.0);

  // norms present and finite
  CHECK(first.a_hs[3] > 0.0);
  CHECK(first.a_l2 > 0.0);
  CHECK(first.b_hsm1 > 0.0);
  CHECK(first.u_hsm2 > 0.0);
  CHECK(first.energy > 0.0);
  CHECK(first.a_sup > 0.0);

  REQUIRE(rep.abar_h1.size() == rep.series.entries.size());
  REQUIRE(rep.abar_hbeta.size() == rep.series.entries.size());

  // ratios: tiny horizon, so state and closed form grow nearly together
  CHECK(std::isfinite(rep.r_a));
  CHECK(std::isfinite(rep.r_abar));
  CHECK(rep.r_a == doctest::Approx(rep.r_abar).epsilon(0.2));
  CHECK(rep.r_abar == doctest::Approx(last.a_hs[3] / first.a_hs[3]).epsilon(0.2));
  CHECK(rep.max_b >= 1.0);
  CHECK(rep.max_b < 1.5);
  CHECK(rep.err_rel >= 0.0);
  CHECK(rep.err_rel < 0.05);

  CHECK(rep.dual_route_err < 2e-4);
  CHECK(rep.resolution_margin >= 1.0);
  CHECK(rep.boundary_leak < 1e-10);
  CHECK(rep.convergence.checked == false);

  // bitwise reproducibility of the whole pipeline
  InflationReport rep2 = inflation_experiment(cfg);
  CHECK(rep2.r_a == rep.r_a);
  CHECK(rep2.err_rel == rep.err_rel);
  REQUIRE(rep2.series.entries.size() == rep.series.entries.size());
  for (std::size_t k = 0; k < last.err_hs.size(); ++k)
    CHECK(rep2.series.entries.back().err_hs[k] == last.err_hs[k]);
}

TEST_CASE("inflation experiment rejects out-of-window parameters and thin grids") {
  ExperimentConfig cfg;
  cfg.params = quick_params();
  cfg.params.mode = ParamMode::exploratory;
  cfg.params.beta = 3.9;  // outside 3 < beta < 4 - 2 alpha at alpha = 1/4
  cfg.t_end_is_tstar = false;
  cfg.t_end = 0.01;
  CHECK(validate(cfg).empty());
  CHECK_THROWS_AS(inflation_experiment(cfg), std::invalid_argument);

  ExperimentConfig thin;
  thin.params = quick_params();
  thin.params.n_osc = 8;  // rule demands 256 at this box
  thin.grid = GridSpec{96, kPi / 4.0};
  thin.t_end_is_tstar = false;
  thin.t_end = 0.01;
  CHECK_THROWS_AS(inflation_experiment(thin), std::invalid_argument);
}

TEST_CASE("scaling sweep recovers the data slopes on the lambda axis") {
  ExperimentConfig cfg;
  cfg.params = quick_params();
  cfg.params.n_osc = 8;
  cfg.s_list = {0.0, 1.0};
  cfg.sweep_lambda = {32.0, 8.0, 16.0};  // unsorted on purpose
  cfg.workers = 2;

  auto reps = scaling_sweep(cfg);
  REQUIRE(reps.size() == 5);  // three a0 orders + u0_h0 + u0_c1
  const double beta = cfg.params.beta;

  for (const auto& r : reps) {
    INFO(r.quantity << " slope " << r.fit.slope << " expected " << r.expected_slope);
    CHECK(r.status == FitStatus::pass);
    CHECK(r.point_notes.empty());
    CHECK(r.fit.abscissae == std::vector<double>{8.0, 16.0, 32.0});
  }
  CHECK(find_report(reps, SweepAxis::lambda, "u0_h0").expected_slope == 2.0 - beta);
  CHECK(find_report(reps, SweepAxis::lambda, "u0_c1").expected_slope == 4.0 - beta);

  // canonical ordering and worker-count independence, down to the bit
  ExperimentConfig sorted = cfg;
  sorted.sweep_lambda = {8.0, 16.0, 32.0};
  sorted.workers = 1;
  auto reps2 = scaling_sweep(sorted);
  REQUIRE(reps2.size() == reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    CHECK(reps2[i].quantity == reps[i].quantity);
    CHECK(reps2[i].fit.slope == reps[i].fit.slope);
    CHECK(reps2[i].fit.ordinates == reps[i].fit.ordinates);
  }
}

TEST_CASE("scaling sweep: one-octave epsilon axis is admissible and exactly linear") {
  ExperimentConfig cfg;
  cfg.params = quick_params();
  cfg.grid = GridSpec{0, 4.8 / cfg.params.lambda};  // n planned per point
  cfg.s_list = {0.0, 1.0};
  cfg.sweep_eps = {0.35, 0.5, 0.25};

  auto reps = scaling_sweep(cfg);
  REQUIRE(reps.size() == 5);
  for (const auto& r : reps) {
    INFO(r.quantity);
    CHECK(r.status == FitStatus::pass);
    CHECK(r.expected_slope == 1.0);  // data is linear in the amplitude
    CHECK(std::abs(r.fit.slope - 1.0) < 1e-9);
    CHECK(r.fit.residual < 1e-9);
  }
}

TEST_CASE("scaling sweep preconditions and per-point exclusion") {
  ExperimentConfig cfg;
  cfg.params = quick_params();

  SUBCASE("no axis") { CHECK_THROWS_AS(scaling_sweep(cfg), std::invalid_argument); }
  SUBCASE("too few points") {
    cfg.sweep_lambda = {8.0, 32.0};
    CHECK_THROWS_AS(scaling_sweep(cfg), std::invalid_argument);
  }
  SUBCASE("lambda axis needs two octaves") {
    cfg.sweep_lambda = {8.0, 12.0, 16.0};
    CHECK_THROWS_AS(scaling_sweep(cfg), std::invalid_argument);
  }
  SUBCASE("epsilon axis needs one octave") {
    cfg.sweep_eps = {0.4, 0.5, 0.6};
    CHECK_THROWS_AS(scaling_sweep(cfg), std::invalid_argument);
  }
  SUBCASE("points beyond the desk cap are noted and the sweep continues") {
    cfg.params.lambda = 4.0;
    cfg.sweep_n_osc = {4, 8, 160000};  // last one cannot be gridded
    auto reps = scaling_sweep(cfg);
    REQUIRE(reps.size() == 5);
    for (const auto& r : reps) {
      INFO(r.quantity);
      CHECK(r.status == FitStatus::skipped);  // two usable points only
      REQUIRE(!r.point_notes.empty());
      CHECK(r.point_notes.front().find("excluded") != std::string::npos);
    }
  }
}

TEST_CASE("exact-decay convergence study: shell at machine precision, annulus spectral") {
  ExperimentConfig cfg;
  cfg.params.mode = ParamMode::exploratory;
  cfg.params.alpha = 1.0;  // classical dissipation: no slow kernel tails
  cfg.params.beta = 3.2;
  cfg.params.mu = cfg.params.nu = 0.5;
  cfg.params.eps = 0.5;
  cfg.params.lambda = 4.0;
  cfg.params.n_osc = 4;
  cfg.grid = GridSpec{64, kPi / 2.0};
  cfg.ctrl.cfl_safety = 0.65;
  cfg.ctrl.dt_max = 5e-4;
  cfg.t_end_is_tstar = false;
  cfg.t_end = 0.02;

  ConvergenceReport rep = convergence_study(cfg, StudyKind::exact_decay);
  CHECK(rep.kind == StudyKind::exact_decay);
  CHECK(rep.grids == std::vector<int>{64, 128, 256});
  REQUIRE(rep.shell_errors.size() == 3);
  REQUIRE(rep.annulus_errors.size() == 3);
  for (double e : rep.shell_errors) CHECK(e < 1e-11);
  CHECK(rep.annulus_errors[0] > rep.annulus_errors[1]);
  CHECK(rep.annulus_errors[1] > rep.annulus_errors[2]);
  CHECK(rep.annulus_errors[2] < 1e-6);
  CHECK(rep.spectral_like);
  REQUIRE(!rep.notes.empty());
  CHECK(rep.notes.front().find("machine") != std::string::npos);
}

TEST_CASE("inflation convergence study: restriction-seeded grids, temporal order four") {
  ExperimentConfig cfg;
  cfg.params = quick_params();
  cfg.params.lambda = 4.0;
  cfg.grid = GridSpec{192, kPi / 2.0};  // finest refinement passes the datum gate
  cfg.ctrl.cfl_safety = 0.65;
  cfg.ctrl.dt_max = 1e-3;
  cfg.observer_stride = 10;
  cfg.t_end_is_tstar = false;
  cfg.t_end = 4e-4;

  ConvergenceReport rep = convergence_study(cfg, StudyKind::inflation);
  CHECK(rep.grids == std::vector<int>{192, 384, 768});
  REQUIRE(rep.pair_errors.size() == 2);
  CHECK(rep.pair_errors[0] > 0.0);
  CHECK(rep.pair_errors[1] > 0.0);
  CHECK(rep.pair_errors[0] > rep.pair_errors[1]);

  REQUIRE(rep.r_a.size() == 3);
  REQUIRE(rep.max_b.size() == 3);
  REQUIRE(rep.err_rel.size() == 3);
  for (double v : rep.r_a) {
    CHECK(std::isfinite(v));
    CHECK(v == doctest::Approx(1.0).epsilon(0.1));  // tiny horizon
  }
  for (double v : rep.max_b) {
    CHECK(v >= 1.0);
    CHECK(v < 1.2);
  }
  for (double v : rep.err_rel) CHECK(v >= 0.0);

  CHECK(rep.ratio_drift >= 0.0);
  CHECK(rep.citable == (rep.ratio_drift < 0.05));
  CHECK(rep.temporal_order > 3.2);
  CHECK(rep.temporal_order < 4.8);
}
