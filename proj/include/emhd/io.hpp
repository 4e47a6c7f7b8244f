#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "emhd/experiments.hpp"

namespace emhd {

// ---------------------------------------------------------------- run config
//
// Sectioned key = value text:
//   [model]      alpha beta mu nu epsilon lambda n_osc
//   [grid]       grid_n half_width
//   [control]    cfl_safety dt_max filter_enabled
//   [experiment] t_end_mode (tstar | explicit), t_end, s_list,
//                observer_stride, sweep_lambda, sweep_n_osc, sweep_epsilon,
//                out_dir, seed_note
// Lists are comma-separated. '#' or ';' start a comment. Unknown sections or
// keys are rejected. Parsing is total: the file is either accepted in full or
// rejected with every violation listed (ranges cite the admissible window,
// an explicit grid_n cites the required minimum for the model scales).

// throws std::invalid_argument carrying the full violation list
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<text>");

// ---------------------------------------------------------------- CSV series
//
// Column order: time, a_hs(<s>) per tracked s, a_l2, b_hsm1, u_hsm2, energy,
// a_sup, b_sup, truncated, then err_hs(<s>) per tracked s when the series
// carries an error track. Values are written with 17 significant digits via
// std::to_chars, so a write-then-read roundtrip is bit-identical and the
// format is locale-independent.

void write_series(const NormSeries& s, const std::string& path);
NormSeries read_series(const std::string& path);

// string forms used by the file functions (and handy in tests)
std::string series_to_csv(const NormSeries& s);
NormSeries series_from_csv(const std::string& text, const std::string& origin = "<text>");

// ------------------------------------------------------------- field snapshot
//
// Binary layout, all little-endian:
//   bytes 0..7   magic "EMHD25D1"
//   u32          version (currently 1)
//   u32          grid_n
//   f64          half_width
//   f64          time
//   u32          field_count
//   payload      field_count * grid_n^2 f64, row-major real values,
//                field order (a, b[, A])

struct Snapshot {
  std::uint32_t version = 1;
  GridSpec grid{0, 0.0};
  double time = 0.0;
  std::vector<RVec> fields;
};

void write_snapshot(const Snapshot& s, const std::string& path);
Snapshot read_snapshot(const std::string& path);

// ------------------------------------------------------------------ CLI entry
//
// Subcommands: ic, approx, run, sweep, converge, check.
// Exit codes: 0 success, 1 validation failure, 2 unstable run, 3 internal
// error. The environment variable EMHD_WORKERS caps sweep concurrency
// (default: available processors).
int run_cli(int argc, char** argv);

}  // namespace emhd
