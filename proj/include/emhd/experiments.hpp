#pragma once
#include <string>
#include <vector>

#include "emhd/diagnostics.hpp"
#include "emhd/profiles.hpp"
#include "emhd/solver.hpp"

namespace emhd {

// ------------------------------------------------------------- configuration

enum class SweepAxis { lambda, n_osc, eps };
enum class GridPurpose {
  data_only,  // sample/measure the initial data accurately
  abar,       // additionally carry the sheared scale of the closed form at t_end
  ubar,       // additionally carry the doubled band of the drift correction
  evolve      // what the solver needs through t_end (data + sheared band)
};

struct ExperimentConfig {
  ModelParams params;
  GridSpec grid{0, 0.0};  // n == 0: planned automatically per purpose
  StepControl ctrl;
  std::vector<double> s_list{0.0, 1.0};  // norm orders tracked; 1 and beta ensured
  int observer_stride = 50;
  bool t_end_is_tstar = true;
  double t_end = 0.0;  // used when t_end_is_tstar == false
  std::vector<double> sweep_lambda;
  std::vector<int> sweep_n_osc;
  std::vector<double> sweep_eps;
  // which quantity groups a sweep evaluates
  bool track_data = true;
  bool track_abar = false;
  bool track_ortho = false;
  bool keep_fields = false;  // retain field samples for snapshot writers
  int workers = 1;           // sweep-point concurrency
  std::string out_dir;
  std::string seed_note;
};

// every violated constraint, human-readable; empty means valid
std::vector<std::string> validate(const ExperimentConfig& cfg);
void require_valid(const ExperimentConfig& cfg);

double resolved_t_end(const ExperimentConfig& cfg);

// smallest fast-transform grid satisfying the laws for the purpose at the
// default box L = 2 pi / lambda (or the given half_width when > 0):
//   - n >= 16 lambda N (L/pi)                        (oscillation rule)
//   - k_max * 0.8 / lambda >= 130                    (profile spectral tail)
//   - abar:  kept-band margin >= 1.05 at t_end       (sheared scale)
//   - ubar:  kept-band margin >= 1.4 at t_end, and the doubled-phase
//            product band under Nyquist (eval_ubar's own bound)
// throws std::runtime_error when no admissible size <= 3840 exists.
GridSpec plan_grid(const ModelParams& p, double t_end, GridPurpose purpose,
                   double half_width = 0.0);
// next fast transform size >= n (the solver spends ~95% of wall time in FFTs;
// sizes are drawn from a table measured against this FFT build)
int pick_good_size(int n);

// ------------------------------------------------------------ inflation run

struct ConvergenceStamp {
  bool checked = false;
  bool citable = false;
  double ratio_drift = 0.0;  // worst relative headline-ratio change, finest pair
  std::string note = "not checked";
};

struct InflationReport {
  double t_star = 0.0;           // the horizon actually run
  NormSeries series;             // a/b/u/A norms, energy, sups at observer times
  std::vector<double> abar_h1;   // closed-form norms on the same time grid,
  std::vector<double> abar_hbeta;  // dealias-projected like the state
  double r_a = 0.0;      // ||a(t*)||_{H^beta-dot} / ||a(0)||
  double r_abar = 0.0;   // same for the closed form
  double max_b = 0.0;    // max_t ||b(t)||_{H^{beta-1}} / ||b(0)||
  double err_rel = 0.0;  // ||A(t*)||_{H^1-dot} / ||abar(t*)||_{H^1-dot}
  RunStatus status = RunStatus::completed;
  ConvergenceStamp convergence;
  double dual_route_err = 0.0;      // initial-data route disagreement
  double resolution_margin = 0.0;   // kept band / sheared band at the horizon
  double boundary_leak = 0.0;       // max |a(t*)| near the periodic seam
  GridSpec grid{0, 0.0};            // the grid actually used
  // real-space samples (a, b, A) at t=0 and at the last time reached; filled
  // only when cfg.keep_fields, for snapshot writers
  std::vector<RVec> fields_first, fields_last;
  double time_last = 0.0;
};

// builds (a0, b0), evolves to the horizon recording norms at the observer
// stride, evaluates the closed form on the same time grid, and emits the
// report; an unstable run yields status=unstable with data up to failure.
InflationReport inflation_experiment(const ExperimentConfig& cfg);

// --------------------------------------------------------------- sweeps

enum class FitStatus { pass, inconclusive, fail, skipped };

struct ScalingReport {
  SweepAxis axis;
  std::string quantity;        // e.g. "a0_hs(3.2)", "u0_h0", "ortho_tstar"
  PowerLawFit fit;
  double expected_slope = 0.0;
  double tolerance = 0.0;
  bool informational = false;  // no committed slope; status stays skipped
  FitStatus status = FitStatus::skipped;
  std::vector<std::string> point_notes;  // per-point resolution violations
};

// evaluates the committed quantity/axis table on every sweep point (no time
// stepping; all quantities are data or closed-form functionals). Points whose
// grids would exceed the desk-scale cap are excluded from the fit and noted.
std::vector<ScalingReport> scaling_sweep(const ExperimentConfig& cfg);

// ---------------------------------------------------------- convergence

enum class StudyKind {
  inflation,  // self-convergence of the evolved pair + headline-ratio drift
  exact_decay // multiplier-flow oracles (lattice shell + Gevrey annulus)
};

struct ConvergenceReport {
  StudyKind kind;
  std::vector<int> grids;
  // inflation kind: trajectory error per coarse grid vs the finest at t_end,
  // headline ratios per grid, their worst drift across the finest pair,
  // and the fixed-dt temporal order on the base grid
  std::vector<double> pair_errors;
  std::vector<double> r_a, max_b, err_rel;
  double ratio_drift = 0.0;
  bool citable = false;
  double temporal_order = 0.0;
  // exact_decay kind: per-grid deviation from the heat multiplier
  std::vector<double> shell_errors;
  std::vector<double> annulus_errors;
  bool spectral_like = false;  // error drops >= 10x per refinement
  std::vector<std::string> notes;
};

// base grid plus >= 2 refinements (n, 2n, 4n). The inflation kind seeds every
// grid from one fine-grid datum via spectral restriction so the runs share an
// initial condition exactly.
ConvergenceReport convergence_study(const ExperimentConfig& cfg, StudyKind kind);

}  // namespace emhd
