#pragma once
#include <cstddef>
#include <string>
#include <vector>

#include "emhd/field.hpp"

namespace emhd {

// One observed instant of a run. The s-resolved vectors follow the s_list of
// the owning series, in order.
struct NormEntry {
  double time = 0;
  std::vector<double> a_hs;    // ||a||_{Hdot^s} per tracked s
  double a_l2 = 0;             // ||a||_{L2}
  double b_hsm1 = 0;           // ||b||_{H^{beta-1}}  (inhomogeneous)
  double u_hsm2 = 0;           // ||u||_{H^{beta-2}}  (vector, inhomogeneous)
  std::vector<double> err_hs;  // ||A||_{Hdot^s} per tracked s; empty when the
                               // run tracks no approximate solution
  double energy = 0;           // E = ||grad a||^2 + ||b||^2
  double a_sup = 0;
  double b_sup = 0;
  bool truncated = false;  // instability cut the run at this sample
};

// Time series of norm records; times strictly increasing, entries finite
// unless explicitly marked truncated.
struct NormSeries {
  std::vector<double> s_list;
  std::vector<NormEntry> entries;

  // validates monotonicity, s-list arity and finiteness before appending
  void push(NormEntry e);
};

// E = ||grad a||^2_{L2} + ||b||^2_{L2}
double energy_functional(const Field& a, const Field& b);

// A = a - abar, pointwise on grid samples (exact subtraction, no transform)
Field error_field(const Field& a, const Field& abar);

struct ConservationReport {
  // inviscid mode: max relative drift from the first sample
  double l2_drift = 0;
  double energy_drift = 0;
  // viscous mode: largest inter-sample increase (absolute)
  double l2_rise = 0;
  double energy_rise = 0;
  bool flagged = false;
  std::size_t flag_index = 0;  // entry index of the worst violation
  std::string note;
};

// viscous=false: reports drift of ||a||_{L2} and E(t) relative to the first
// sample, flagging drifts above rel_tol. viscous=true: reports the largest
// inter-sample increase of either quantity, flagging rises above abs_slack.
ConservationReport conservation_audit(const NormSeries& series, bool viscous,
                                      double rel_tol = 1e-3, double abs_slack = 1e-9);

struct PowerLawFit {
  std::vector<double> abscissae;
  std::vector<double> ordinates;
  double slope = 0;
  double intercept = 0;  // of the log-log line
  double residual = 0;   // max relative deviation of the data from the fit
};

// least-squares line through (log x, log y); needs >= 3 strictly positive
// points
PowerLawFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys);

}  // namespace emhd
