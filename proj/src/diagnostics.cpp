#include "emhd/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "emhd/spectral.hpp"

namespace emhd {

namespace {

bool entry_finite(const NormEntry& e) {
  auto ok = [](double v) { return std::isfinite(v); };
  for (double v : e.a_hs)
    if (!ok(v)) return false;
  for (double v : e.err_hs)
    if (!ok(v)) return false;
  return ok(e.time) && ok(e.a_l2) && ok(e.b_hsm1) && ok(e.u_hsm2) && ok(e.energy) &&
         ok(e.a_sup) && ok(e.b_sup);
}

}  // namespace

void NormSeries::push(NormEntry e) {
  if (!entries.empty() && !(e.time > entries.back().time))
    throw std::invalid_argument("norm series times must be strictly increasing");
  if (e.a_hs.size() != s_list.size())
    throw std::invalid_argument("norm entry does not match the series s-list");
  if (!e.err_hs.empty() && e.err_hs.size() != s_list.size())
    throw std::invalid_argument("error-norm entry does not match the series s-list");
  if (!e.truncated && !entry_finite(e))
    throw std::invalid_argument("non-finite norm entry must be marked truncated");
  entries.push_back(std::move(e));
}

double energy_functional(const Field& a, const Field& b) {
  if (a.grid != b.grid) throw std::invalid_argument("energy_functional: grid mismatch");
  const double ga = sobolev_norm(a, 1.0);
  const double l2b = l2_norm(b);
  return ga * ga + l2b * l2b;
}

Field error_field(const Field& a, const Field& abar) {
  if (a.grid != abar.grid) throw std::invalid_argument("error_field: grid mismatch");
  Field ra = inverse_transform(a);
  Field rb = inverse_transform(abar);
  Field out = make_real_field(a.grid);
  for (std::size_t i = 0; i < out.real.size(); ++i) out.real[i] = ra.real[i] - rb.real[i];
  return out;
}

ConservationReport conservation_audit(const NormSeries& series, bool viscous, double rel_tol,
                                      double abs_slack) {
  ConservationReport r;
  if (series.entries.empty()) throw std::invalid_argument("conservation_audit: empty series");

  // audit stops at the first truncated sample; beyond it nothing is conserved
  std::size_t m = series.entries.size();
  for (std::size_t i = 0; i < series.entries.size(); ++i)
    if (series.entries[i].truncated) {
      m = i;
      break;
    }
  if (m == 0) {
    r.note = "series truncated at the first sample; nothing to audit";
    return r;
  }

  const double l2_0 = series.entries[0].a_l2;
  const double en_0 = series.entries[0].energy;
  const double l2_ref = std::abs(l2_0) > 0 ? std::abs(l2_0) : 1.0;
  const double en_ref = std::abs(en_0) > 0 ? std::abs(en_0) : 1.0;

  double worst = 0;
  for (std::size_t i = 1; i < m; ++i) {
    const NormEntry& e = series.entries[i];
    const NormEntry& prev = series.entries[i - 1];
    const double dl2 = std::abs(e.a_l2 - l2_0) / l2_ref;
    const double den = std::abs(e.energy - en_0) / en_ref;
    if (dl2 > r.l2_drift) r.l2_drift = dl2;
    if (den > r.energy_drift) r.energy_drift = den;
    const double rise_l2 = e.a_l2 - prev.a_l2;
    const double rise_en = e.energy - prev.energy;
    if (rise_l2 > r.l2_rise) r.l2_rise = rise_l2;
    if (rise_en > r.energy_rise) r.energy_rise = rise_en;

    const double offence = viscous ? std::max(rise_l2, rise_en) : std::max(dl2, den);
    const double limit = viscous ? abs_slack : rel_tol;
    if (offence > limit && offence > worst) {
      worst = offence;
      r.flagged = true;
      r.flag_index = i;
    }
  }
  if (r.flagged)
    r.note = (viscous ? "monotonicity violated at t=" : "conservation drift at t=") +
             std::to_string(series.entries[r.flag_index].time);
  return r;
}

PowerLawFit fit_power_law(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("fit_power_law: length mismatch");
  if (xs.size() < 3) throw std::invalid_argument("fit_power_law: need at least 3 points");
  for (std::size_t i = 0; i < xs.size(); ++i)
    if (!(xs[i] > 0.0) || !(ys[i] > 0.0))
      throw std::invalid_argument("fit_power_law: data must be strictly positive");

  PowerLawFit f;
  f.abscissae = xs;
  f.ordinates = ys;

  // 2x2 normal equations in log-log coordinates
  const double n = double(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]);
    const double ly = std::log(ys[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-14 * (n * sxx + sx * sx + 1.0))
    throw std::invalid_argument("fit_power_law: abscissae do not span a range");
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sy * sxx - sx * sxy) / det;

  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double fit = std::exp(f.intercept + f.slope * std::log(xs[i]));
    const double dev = std::abs(ys[i] / fit - 1.0);
    if (dev > f.residual) f.residual = dev;
  }
  return f;
}

}  // namespace emhd
