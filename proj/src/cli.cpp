#include <CLI11.hpp>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "emhd/io.hpp"
#include "emhd/util.hpp"

namespace emhd {
namespace {

namespace fs = std::filesystem;

std::string out_path(const ExperimentConfig& cfg, const char* name) {
  fs::path dir = cfg.out_dir.empty() ? fs::path(".") : fs::path(cfg.out_dir);
  fs::create_directories(dir);
  return (dir / name).string();
}

int env_workers() {
  if (const char* v = std::getenv("EMHD_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end && *end == '\0' && n >= 1) return int(n);
    throw std::invalid_argument("EMHD_WORKERS must be a positive integer, got '" +
                                std::string(v) + "'");
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? int(hc) : 1;
}

std::string fmt(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

std::string sanitize(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::n_osc: return "n_osc";
    case SweepAxis::eps: return "epsilon";
  }
  return "?";
}

const char* status_name(FitStatus s) {
  switch (s) {
    case FitStatus::pass: return "pass";
    case FitStatus::inconclusive: return "inconclusive";
    case FitStatus::fail: return "fail";
    case FitStatus::skipped: return "skipped";
  }
  return "?";
}

NormEntry norms_of(const ExperimentConfig& cfg, const Field& a, const Field& b, double t) {
  NormEntry e;
  e.time = t;
  for (double s : cfg.s_list) e.a_hs.push_back(sobolev_norm(a, s));
  e.a_l2 = l2_norm(a);
  e.b_hsm1 = sobolev_norm(b, cfg.params.beta - 1.0, false);
  auto u = grad_perp(b);
  e.u_hsm2 = std::hypot(sobolev_norm(u[0], cfg.params.beta - 2.0, false),
                        sobolev_norm(u[1], cfg.params.beta - 2.0, false));
  e.energy = energy_functional(a, b);
  e.a_sup = sup_norm(a, 0);
  e.b_sup = sup_norm(b, 0);
  return e;
}

// ------------------------------------------------------------- subcommands

int cmd_ic(const ExperimentConfig& cfg) {
  const GridSpec g = cfg.grid.n > 0
                         ? cfg.grid
                         : plan_grid(cfg.params, 0.0, GridPurpose::data_only,
                                     cfg.grid.half_width);
  InitialData data = build_initial_data(cfg.params, g);

  NormSeries series;
  series.s_list = cfg.s_list;
  series.push(norms_of(cfg, data.a0, data.b0, 0.0));
  write_series(series, out_path(cfg, "ic.csv"));

  Snapshot snap;
  snap.grid = g;
  snap.time = 0.0;
  snap.fields = {data.a0.real, data.b0.real};
  write_snapshot(snap, out_path(cfg, "ic.snap"));

  std::printf("initial data on n=%d, half_width=%s\n", g.n, fmt(g.half_width).c_str());
  std::printf("  |a0|_L2 = %s   sup|a0| = %s\n", fmt(series.entries[0].a_l2).c_str(),
              fmt(series.entries[0].a_sup).c_str());
  std::printf("  drift-route disagreement = %s\n", fmt(data.dual_route_rel_err).c_str());
  return 0;
}

int cmd_approx(ExperimentConfig cfg, double t, bool t_given) {
  const double when = t_given ? t : resolved_t_end(cfg);
  const GridSpec g =
      cfg.grid.n > 0 ? cfg.grid
                     : plan_grid(cfg.params, when, GridPurpose::abar, cfg.grid.half_width);
  if (abar_resolution_margin(cfg.params, g, when) < 1.0)
    throw std::invalid_argument("grid cannot carry the sheared closed form at t = " + fmt(when));

  Field abar = dealiased(transform(eval_abar(cfg.params, g, when)));
  Field zero = make_real_field(g);

  NormSeries series;
  series.s_list = cfg.s_list;
  series.push(norms_of(cfg, abar, zero, when));
  write_series(series, out_path(cfg, "approx.csv"));

  Snapshot snap;
  snap.grid = g;
  snap.time = when;
  snap.fields = {inverse_transform(abar).real};
  write_snapshot(snap, out_path(cfg, "approx.snap"));

  std::printf("closed form at t=%s on n=%d\n", fmt(when).c_str(), g.n);
  std::printf("  |abar|_L2 = %s   sup|abar| = %s\n", fmt(series.entries[0].a_l2).c_str(),
              fmt(series.entries[0].a_sup).c_str());
  return 0;
}

int cmd_run(ExperimentConfig cfg) {
  cfg.keep_fields = true;
  InflationReport rep = inflation_experiment(cfg);

  std::string report = "key,value\n";
  auto kv = [&](const char* k, const std::string& v) {
    report += std::string(k) + "," + v + "\n";
  };
  kv("status", rep.status == RunStatus::completed ? "completed" : "unstable");
  kv("t_star", fmt(rep.t_star));
  kv("time_reached", fmt(rep.time_last));
  kv("grid_n", std::to_string(rep.grid.n));
  kv("half_width", fmt(rep.grid.half_width));
  kv("r_a", fmt(rep.r_a));
  kv("r_abar", fmt(rep.r_abar));
  kv("max_b", fmt(rep.max_b));
  kv("err_rel", fmt(rep.err_rel));
  kv("dual_route_err", fmt(rep.dual_route_err));
  kv("resolution_margin", fmt(rep.resolution_margin));
  kv("boundary_leak", fmt(rep.boundary_leak));
  kv("convergence_checked", rep.convergence.checked ? "1" : "0");
  kv("convergence_citable", rep.convergence.citable ? "1" : "0");
  kv("convergence_ratio_drift", fmt(rep.convergence.ratio_drift));
  kv("convergence_note", sanitize(rep.convergence.note));
  if (!cfg.seed_note.empty()) kv("seed_note", sanitize(cfg.seed_note));
  write_series(rep.series, out_path(cfg, "series.csv"));
  {
    std::ofstream out(out_path(cfg, "report.csv"), std::ios::binary | std::ios::trunc);
    out << report;
    if (!out) fail("write failed: report.csv");
  }

  Snapshot first;
  first.grid = rep.grid;
  first.time = 0.0;
  first.fields = rep.fields_first;
  write_snapshot(first, out_path(cfg, "snapshot_t0.snap"));
  Snapshot last;
  last.grid = rep.grid;
  last.time = rep.time_last;
  last.fields = rep.fields_last;
  write_snapshot(last, out_path(cfg, "snapshot_tstar.snap"));

  std::printf("run %s at n=%d through t=%s\n",
              rep.status == RunStatus::completed ? "completed" : "UNSTABLE", rep.grid.n,
              fmt(rep.time_last).c_str());
  std::printf("  R_a = %s   R_abar = %s\n", fmt(rep.r_a).c_str(), fmt(rep.r_abar).c_str());
  std::printf("  max_b = %s   err_rel = %s\n", fmt(rep.max_b).c_str(), fmt(rep.err_rel).c_str());
  return rep.status == RunStatus::completed ? 0 : 2;
}

int cmd_sweep(ExperimentConfig cfg) {
  cfg.workers = env_workers();
  std::vector<ScalingReport> reps = scaling_sweep(cfg);

  std::string csv = "axis,quantity,expected_slope,tolerance,slope,intercept,residual,points,"
                    "status,notes\n";
  for (const ScalingReport& r : reps) {
    std::string notes;
    for (const std::string& n : r.point_notes) notes += (notes.empty() ? "" : "; ") + n;
    csv += std::string(axis_name(r.axis)) + "," + r.quantity + "," + fmt(r.expected_slope) +
           "," + fmt(r.tolerance) + "," + fmt(r.fit.slope) + "," + fmt(r.fit.intercept) + "," +
           fmt(r.fit.residual) + "," + std::to_string(r.fit.abscissae.size()) + "," +
           status_name(r.status) + "," + sanitize(notes) + "\n";
    std::printf("[%s] %s/%s: slope %.4f (expected %.4f +- %.2f)\n", status_name(r.status),
                axis_name(r.axis), r.quantity.c_str(), r.fit.slope, r.expected_slope,
                r.tolerance);
  }
  std::ofstream out(out_path(cfg, "sweep.csv"), std::ios::binary | std::ios::trunc);
  out << csv;
  if (!out) fail("write failed: sweep.csv");
  return 0;
}

int cmd_converge(const ExperimentConfig& cfg, const std::string& kind_name) {
  const StudyKind kind =
      kind_name == "decay" ? StudyKind::exact_decay : StudyKind::inflation;
  ConvergenceReport rep = convergence_study(cfg, kind);

  std::string csv;
  if (kind == StudyKind::exact_decay) {
    csv = "grid_n,shell_err,annulus_err\n";
    for (std::size_t i = 0; i < rep.grids.size(); ++i)
      csv += std::to_string(rep.grids[i]) + "," + fmt(rep.shell_errors[i]) + "," +
             fmt(rep.annulus_errors[i]) + "\n";
    std::printf("exact-decay study on {%d, %d, %d}: spectral-like = %s\n", rep.grids[0],
                rep.grids[1], rep.grids[2], rep.spectral_like ? "yes" : "no");
  } else {
    csv = "grid_n,pair_err_vs_finest,r_a,max_b,err_rel\n";
    for (std::size_t i = 0; i < rep.grids.size(); ++i) {
      const std::string pe =
          i < rep.pair_errors.size() ? fmt(rep.pair_errors[i]) : std::string("nan");
      csv += std::to_string(rep.grids[i]) + "," + pe + "," + fmt(rep.r_a[i]) + "," +
             fmt(rep.max_b[i]) + "," + fmt(rep.err_rel[i]) + "\n";
    }
    std::printf("inflation study on {%d, %d, %d}: ratio drift %s -> %s, temporal order %.2f\n",
                rep.grids[0], rep.grids[1], rep.grids[2], fmt(rep.ratio_drift).c_str(),
                rep.citable ? "citable" : "not citable", rep.temporal_order);
  }
  for (const std::string& n : rep.notes) std::printf("  note: %s\n", n.c_str());
  std::ofstream out(out_path(cfg, "converge.csv"), std::ios::binary | std::ios::trunc);
  out << csv;
  if (!out) fail("write failed: converge.csv");
  return 0;
}

// ------------------------------------------------------------- self checks

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

CheckResult check_spectral() {
  const GridSpec g{64, kPi};
  double worst = 0.0;
  for (double alpha : {0.0, 0.25, 0.5, 1.0}) {
    Field f = make_real_field(g);
    for (int i = 0; i < g.n; ++i)
      for (int j = 0; j < g.n; ++j)
        f.real[std::size_t(i) * g.n + j] = std::cos(3.0 * g.x(i) + 4.0 * g.x(j));
    Field hat = transform(f);
    const RVec sym = fractional_laplacian_symbol(g, alpha);
    Field lap = make_spec_field(g);
    for (std::size_t k = 0; k < sym.size(); ++k) lap.spec[k] = hat.spec[k] * sym[k];
    const double scale = std::pow(25.0, alpha);
    Field diff = make_spec_field(g);
    for (std::size_t k = 0; k < sym.size(); ++k)
      diff.spec[k] = lap.spec[k] - scale * hat.spec[k];
    worst = std::max(worst, l2_norm(diff) / (scale * l2_norm(hat)));
  }
  // Parseval on a multi-mode field
  Field f = make_real_field(g);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      f.real[std::size_t(i) * g.n + j] =
          0.7 * std::sin(g.x(i)) + 0.2 * std::cos(5.0 * g.x(i) - 2.0 * g.x(j));
  double grid_sq = 0.0;
  for (double v : f.real) grid_sq += v * v;
  grid_sq *= g.dx() * g.dx();
  const double par = std::abs(std::sqrt(grid_sq) - l2_norm(f)) / l2_norm(f);
  // div of grad_perp vanishes identically
  auto gp = grad_perp(f);
  auto dxx = gradient(gp[0]);
  auto dyy = gradient(gp[1]);
  Field div = make_spec_field(g);
  ensure_spec(dxx[0]);
  ensure_spec(dyy[1]);
  for (std::size_t k = 0; k < div.spec.size(); ++k)
    div.spec[k] = dxx[0].spec[k] + dyy[1].spec[k];
  const double dv = l2_norm(div) / l2_norm(f);
  const bool ok = worst < 1e-12 && par < 1e-12 && dv < 1e-11;
  return {"spectral identities", ok,
          "eigenrelation " + fmt(worst) + ", parseval " + fmt(par) + ", div(grad_perp) " +
              fmt(dv)};
}

CheckResult check_profiles() {
  ModelParams p;
  const double ts = t_star(p);
  const double want = 0.435275281648062;
  const bool ts_ok = std::abs(ts - want) < 1e-12;
  ModelParams q = p;
  q.lambda = 4.0;
  q.n_osc = 4;
  GridSpec g = plan_grid(q, 0.0, GridPurpose::data_only);
  InitialData d = build_initial_data(q, g);
  const bool ok = ts_ok && d.dual_route_rel_err <= 1e-6;
  return {"profile data", ok,
          "t*(headline) = " + fmt(ts) + ", drift-route disagreement " +
              fmt(d.dual_route_rel_err)};
}

CheckResult check_solver() {
  const GridSpec g{64, kPi};
  ModelParams p;
  p.mode = ParamMode::exploratory;
  p.alpha = 0.5;
  p.mu = p.nu = 1.0;
  p.lambda = 4.0;
  p.n_osc = 4;
  StepControl c;
  c.cfl_safety = 0.3;
  Solver s(p, g, c);

  // hand oracle: a = cos x, b = cos y gives da = +F[sin x sin y], db = 0
  Field a = make_real_field(g), b = make_real_field(g);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) {
      a.real[std::size_t(i) * g.n + j] = std::cos(g.x(i));
      b.real[std::size_t(i) * g.n + j] = std::cos(g.x(j));
    }
  s.seed(a, b);
  RhsResult r = s.nonlinear_rhs(s.state());
  const std::size_t p11 = std::size_t(1) * g.spec_cols() + 1;
  const std::size_t m11 = std::size_t(g.n - 1) * g.spec_cols() + 1;
  const double e1 = std::abs(r.da[p11] - std::complex<double>(-0.25, 0.0));
  const double e2 = std::abs(r.da[m11] - std::complex<double>(0.25, 0.0));
  double db_max = 0.0;
  for (const auto& v : r.db) db_max = std::max(db_max, std::abs(v));

  // lattice-shell datum: nonlinearity silent, decay matches the multiplier
  Field shell = make_real_field(g);
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j)
      shell.real[std::size_t(i) * g.n + j] =
          0.02 * (std::cos(5.0 * g.x(i)) + 0.7 * std::cos(3.0 * g.x(i) + 4.0 * g.x(j)));
  Solver s2(p, g, c);
  s2.seed(shell, make_real_field(g));
  CVec seeded = s2.state().a_hat;
  s2.evolve(0.05);
  RVec heat = heat_multiplier(g, p.mu, p.alpha, 0.05);
  Field diff = make_spec_field(g), ref = make_spec_field(g);
  for (std::size_t k = 0; k < seeded.size(); ++k) {
    ref.spec[k] = seeded[k] * heat[k];
    diff.spec[k] = s2.state().a_hat[k] - ref.spec[k];
  }
  const double decay = l2_norm(diff) / l2_norm(ref);
  const bool ok = e1 < 1e-12 && e2 < 1e-12 && db_max < 1e-13 && decay < 1e-12;
  return {"solver oracles", ok,
          "trig tendency " + fmt(std::max(e1, e2)) + ", shell decay " + fmt(decay)};
}

CheckResult check_series_csv() {
  NormSeries s;
  s.s_list = {0.0, 1.0, 3.2};
  for (int k = 0; k < 3; ++k) {
    NormEntry e;
    e.time = 0.1 * k + 1e-17;
    e.a_hs = {1.0 / 3 + k, 2.0 / 7, 3.0 / 11};
    e.a_l2 = 0.577215664901532 + k;
    e.b_hsm1 = 1e-300;
    e.u_hsm2 = 1e300;
    e.energy = kPi;
    e.a_sup = 0.3;
    e.b_sup = 0.0025;
    e.err_hs = {1e-16, 2e-8, 0.125};
    s.push(e);
  }
  NormSeries back = series_from_csv(series_to_csv(s));
  bool ok = back.s_list == s.s_list && back.entries.size() == s.entries.size();
  for (std::size_t i = 0; ok && i < s.entries.size(); ++i) {
    const NormEntry& x = s.entries[i];
    const NormEntry& y = back.entries[i];
    ok = x.time == y.time && x.a_hs == y.a_hs && x.a_l2 == y.a_l2 && x.b_hsm1 == y.b_hsm1 &&
         x.u_hsm2 == y.u_hsm2 && x.energy == y.energy && x.a_sup == y.a_sup &&
         x.b_sup == y.b_sup && x.err_hs == y.err_hs;
  }
  return {"series csv roundtrip", ok, ok ? "bit-identical" : "mismatch"};
}

CheckResult check_snapshot() {
  Snapshot s;
  s.grid = GridSpec{8, 1.5};
  s.time = 0.4353;
  s.fields = {RVec(64), RVec(64)};
  for (int k = 0; k < 64; ++k) {
    s.fields[0][k] = std::sin(0.1 * k) * 1e-5;
    s.fields[1][k] = k == 0 ? -0.0 : 1.0 / k;
  }
  const std::string path =
      (fs::temp_directory_path() / "emhd_check_snapshot.bin").string();
  write_snapshot(s, path);
  Snapshot b = read_snapshot(path);
  bool ok = b.version == s.version && b.grid == s.grid && b.time == s.time &&
            b.fields.size() == 2;
  for (int f = 0; ok && f < 2; ++f)
    for (int k = 0; k < 64; ++k)
      ok = ok && std::bit_cast<std::uint64_t>(b.fields[f][k]) ==
                     std::bit_cast<std::uint64_t>(s.fields[f][k]);
  bool rejected = false;
  try {
    std::string broken;
    {
      std::ifstream in(path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      broken = ss.str();
    }
    broken[0] = 'X';
    const std::string bad_path =
        (fs::temp_directory_path() / "emhd_check_snapshot_bad.bin").string();
    std::ofstream(bad_path, std::ios::binary) << broken;
    read_snapshot(bad_path);
  } catch (const std::invalid_argument&) {
    rejected = true;
  }
  ok = ok && rejected;
  return {"snapshot roundtrip", ok, ok ? "bit-exact, corrupt magic rejected" : "mismatch"};
}

int cmd_check() {
  const CheckResult results[] = {check_spectral(), check_profiles(), check_solver(),
                                 check_series_csv(), check_snapshot()};
  bool all = true;
  for (const CheckResult& r : results) {
    std::printf("[%s] %s: %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 3;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"electron-MHD norm-inflation laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  double approx_time = 0.0;
  bool approx_time_given = false;
  std::string kind = "inflation";

  CLI::App* ic = app.add_subcommand("ic", "sample the initial data; write snapshot + norms");
  ic->add_option("config", config_path, "run configuration file")->required();
  CLI::App* approx =
      app.add_subcommand("approx", "evaluate the closed-form approximation at a time");
  approx->add_option("config", config_path, "run configuration file")->required();
  approx->add_option("--time", approx_time, "evaluation time (default: the configured horizon)")
      ->each([&](const std::string&) { approx_time_given = true; });
  CLI::App* run = app.add_subcommand("run", "inflation experiment; report, series, snapshots");
  run->add_option("config", config_path, "run configuration file")->required();
  CLI::App* sweep = app.add_subcommand("sweep", "scaling sweep over the configured axes");
  sweep->add_option("config", config_path, "run configuration file")->required();
  CLI::App* conv = app.add_subcommand("converge", "grid-refinement convergence study");
  conv->add_option("config", config_path, "run configuration file")->required();
  conv->add_option("--kind", kind, "inflation | decay")
      ->check(CLI::IsMember({"inflation", "decay"}));
  app.add_subcommand("check", "run the invariant self-test suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("check")) return cmd_check();
    ExperimentConfig cfg = parse_config(config_path);
    if (app.got_subcommand(ic)) return cmd_ic(cfg);
    if (app.got_subcommand(approx)) return cmd_approx(cfg, approx_time, approx_time_given);
    if (app.got_subcommand(run)) return cmd_run(cfg);
    if (app.got_subcommand(sweep)) return cmd_sweep(cfg);
    if (app.got_subcommand(conv)) return cmd_converge(cfg, kind);
    return 1;
  } catch (const std::invalid_argument& ex) {
    std::fprintf(stderr, "%s\n", ex.what());
    return 1;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "internal error: %s\n", ex.what());
    return 3;
  }
}

}  // namespace emhd
