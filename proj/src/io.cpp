#include "emhd/io.hpp"

#include <bit>
#include <charconv>
#include <climits>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "emhd/util.hpp"

namespace emhd {
namespace {

// ------------------------------------------------------------- small helpers

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, p - start));
    start = p + 1;
  }
}

bool parse_double(const std::string& tok, double& out) {
  const std::string t = trim(tok);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

bool parse_int(const std::string& tok, long& out) {
  const std::string t = trim(tok);
  if (t.empty()) return false;
  const char* b = t.data();
  const char* e = b + t.size();
  auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e;
}

// 17 significant digits: enough that every double roundtrips bit-exactly
std::string fmt17(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

// shortest representation that still roundtrips; used for header labels
std::string fmt_short(double v) {
  char buf[40];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("cannot open file for writing: " + path);
  out.write(data.data(), std::streamsize(data.size()));
  if (!out) fail("write failed: " + path);
}

// ---------------------------------------------------------------- run config

struct RawConfig {
  // section.key -> (value, line number)
  std::map<std::string, std::pair<std::string, int>> kv;
  std::vector<std::string> violations;
};

const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"model", {"alpha", "beta", "mu", "nu", "epsilon", "lambda", "n_osc"}},
      {"grid", {"grid_n", "half_width"}},
      {"control", {"cfl_safety", "dt_max", "filter_enabled"}},
      {"experiment",
       {"t_end_mode", "t_end", "s_list", "observer_stride", "sweep_lambda", "sweep_n_osc",
        "sweep_epsilon", "out_dir", "seed_note"}},
  };
  return s;
}

RawConfig scan_config(const std::string& text, const std::string& origin) {
  RawConfig raw;
  std::string section;
  int line_no = 0;
  for (const std::string& line_raw : split(text, '\n')) {
    ++line_no;
    std::string line = line_raw;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto where = [&] { return origin + ":" + std::to_string(line_no); };
    if (line.front() == '[') {
      if (line.back() != ']') {
        raw.violations.push_back(where() + ": unterminated section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      if (!schema().count(section))
        raw.violations.push_back(where() + ": unknown section [" + section +
                                 "]; admissible: [model] [grid] [control] [experiment]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      raw.violations.push_back(where() + ": expected 'key = value', got '" + line + "'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) {
      raw.violations.push_back(where() + ": key '" + key + "' appears before any section");
      continue;
    }
    auto sec = schema().find(section);
    if (sec == schema().end()) continue;  // section already flagged
    if (!sec->second.count(key)) {
      raw.violations.push_back(where() + ": unknown key '" + key + "' in section [" + section +
                               "]");
      continue;
    }
    const std::string id = section + "." + key;
    if (raw.kv.count(id)) {
      raw.violations.push_back(where() + ": duplicate key '" + key + "' in section [" + section +
                               "] (first at line " + std::to_string(raw.kv[id].second) + ")");
      continue;
    }
    raw.kv[id] = {value, line_no};
  }
  return raw;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  RawConfig raw = scan_config(text, origin);
  ExperimentConfig cfg;
  bool have_grid_n = false, have_half_width = false;

  auto take = [&](const char* id) -> const std::string* {
    auto it = raw.kv.find(id);
    return it == raw.kv.end() ? nullptr : &it->second.first;
  };
  auto bad = [&](const char* id, const std::string& why) {
    raw.violations.push_back(std::string(id) + ": " + why);
  };
  auto num = [&](const char* id, double& dst) {
    if (const std::string* v = take(id)) {
      if (!parse_double(*v, dst)) bad(id, "not a number: '" + *v + "'");
    }
  };
  auto integer = [&](const char* id, int& dst) {
    if (const std::string* v = take(id)) {
      long out;
      if (!parse_int(*v, out) || out < INT_MIN || out > INT_MAX)
        bad(id, "not an integer: '" + *v + "'");
      else
        dst = int(out);
    }
  };
  auto boolean = [&](const char* id, bool& dst) {
    if (const std::string* v = take(id)) {
      if (*v == "true" || *v == "1")
        dst = true;
      else if (*v == "false" || *v == "0")
        dst = false;
      else
        bad(id, "expected true/false/1/0, got '" + *v + "'");
    }
  };
  auto list = [&](const char* id, std::vector<double>& dst) {
    if (const std::string* v = take(id)) {
      dst.clear();
      for (const std::string& tok : split(*v, ',')) {
        double d;
        if (!parse_double(tok, d)) {
          bad(id, "list element not a number: '" + trim(tok) + "'");
          return;
        }
        dst.push_back(d);
      }
    }
  };

  num("model.alpha", cfg.params.alpha);
  num("model.beta", cfg.params.beta);
  num("model.mu", cfg.params.mu);
  num("model.nu", cfg.params.nu);
  num("model.epsilon", cfg.params.eps);
  num("model.lambda", cfg.params.lambda);
  integer("model.n_osc", cfg.params.n_osc);

  if (const std::string* v = take("grid.grid_n")) {
    long n;
    if (!parse_int(*v, n))
      bad("grid.grid_n", "not an integer: '" + *v + "'");
    else {
      cfg.grid.n = int(n);
      have_grid_n = true;
    }
  }
  if (take("grid.half_width")) {
    num("grid.half_width", cfg.grid.half_width);
    have_half_width = true;
  }

  num("control.cfl_safety", cfg.ctrl.cfl_safety);
  num("control.dt_max", cfg.ctrl.dt_max);
  boolean("control.filter_enabled", cfg.ctrl.filter_enabled);

  if (const std::string* v = take("experiment.t_end_mode")) {
    if (*v == "tstar")
      cfg.t_end_is_tstar = true;
    else if (*v == "explicit")
      cfg.t_end_is_tstar = false;
    else
      bad("experiment.t_end_mode", "admissible values are tstar | explicit, got '" + *v + "'");
  }
  num("experiment.t_end", cfg.t_end);
  list("experiment.s_list", cfg.s_list);
  integer("experiment.observer_stride", cfg.observer_stride);
  list("experiment.sweep_lambda", cfg.sweep_lambda);
  if (const std::string* v = take("experiment.sweep_n_osc")) {
    cfg.sweep_n_osc.clear();
    for (const std::string& tok : split(*v, ',')) {
      long n;
      if (!parse_int(tok, n) || n < 1) {
        bad("experiment.sweep_n_osc", "list element not a positive integer: '" + trim(tok) + "'");
        break;
      }
      cfg.sweep_n_osc.push_back(int(n));
    }
  }
  list("experiment.sweep_epsilon", cfg.sweep_eps);
  if (const std::string* v = take("experiment.out_dir")) cfg.out_dir = *v;
  if (const std::string* v = take("experiment.seed_note")) cfg.seed_note = *v;

  // semantic ranges: the shared validators cite the theorem window for beta
  if (raw.violations.empty()) {
    for (const std::string& v : validate(cfg)) raw.violations.push_back(v);
    if (have_half_width && !(cfg.grid.half_width > 0.0) && cfg.grid.n == 0)
      raw.violations.push_back("grid.half_width must be positive");
    // an explicit grid must satisfy the resolution rule for these scales
    if (have_grid_n && validate(cfg.params).empty() && cfg.grid.n >= 16) {
      const double L =
          cfg.grid.half_width > 0.0 ? cfg.grid.half_width : 2.0 * kPi / cfg.params.lambda;
      const int need = required_n(cfg.params, L);
      if (cfg.grid.n < need)
        raw.violations.push_back(
            "grid.grid_n = " + std::to_string(cfg.grid.n) +
            " is below the resolution rule n >= 16*lambda*n_osc*(half_width/pi); "
            "lambda = " + fmt_short(cfg.params.lambda) + ", n_osc = " +
            std::to_string(cfg.params.n_osc) + ", half_width = " + fmt_short(L) +
            " need at least n = " + std::to_string(need));
    }
  }

  if (!raw.violations.empty()) {
    std::string msg = origin + ": config rejected, " + std::to_string(raw.violations.size()) +
                      " violation(s):";
    for (const std::string& v : raw.violations) msg += "\n  - " + v;
    throw std::invalid_argument(msg);
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

// ---------------------------------------------------------------- CSV series

std::string series_to_csv(const NormSeries& s) {
  const bool with_err = !s.entries.empty() && !s.entries.front().err_hs.empty();
  std::string out = "time";
  for (double si : s.s_list) out += ",a_hs(" + fmt_short(si) + ")";
  out += ",a_l2,b_hsm1,u_hsm2,energy,a_sup,b_sup,truncated";
  if (with_err)
    for (double si : s.s_list) out += ",err_hs(" + fmt_short(si) + ")";
  out += "\n";
  for (const NormEntry& e : s.entries) {
    out += fmt17(e.time);
    for (double v : e.a_hs) out += "," + fmt17(v);
    out += "," + fmt17(e.a_l2) + "," + fmt17(e.b_hsm1) + "," + fmt17(e.u_hsm2) + "," +
           fmt17(e.energy) + "," + fmt17(e.a_sup) + "," + fmt17(e.b_sup) + "," +
           (e.truncated ? "1" : "0");
    for (double v : e.err_hs) out += "," + fmt17(v);
    out += "\n";
  }
  return out;
}

namespace {

[[noreturn]] void malformed(const std::string& origin, std::size_t row, std::size_t col,
                            const std::string& why) {
  throw std::invalid_argument("malformed CSV at " + origin + " row " + std::to_string(row) +
                              ", column " + std::to_string(col) + ": " + why);
}

}  // namespace

NormSeries series_from_csv(const std::string& text, const std::string& origin) {
  std::vector<std::string> lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) malformed(origin, 1, 1, "missing header");

  const std::vector<std::string> head = split(trim(lines.front()), ',');
  NormSeries s;
  std::size_t c = 0;
  auto expect = [&](const std::string& name) {
    if (c >= head.size() || head[c] != name)
      malformed(origin, 1, c + 1, "expected column '" + name + "'");
    ++c;
  };
  expect("time");
  auto order_of = [&](const std::string& h, const std::string& prefix, double& out) {
    if (h.size() < prefix.size() + 2 || h.compare(0, prefix.size(), prefix) != 0 ||
        h.back() != ')')
      return false;
    return parse_double(h.substr(prefix.size(), h.size() - prefix.size() - 1), out);
  };
  for (double si; c < head.size() && order_of(head[c], "a_hs(", si); ++c) s.s_list.push_back(si);
  for (const char* name : {"a_l2", "b_hsm1", "u_hsm2", "energy", "a_sup", "b_sup", "truncated"})
    expect(name);
  bool with_err = c < head.size();
  for (std::size_t k = 0; with_err && k < s.s_list.size(); ++k, ++c) {
    double si;
    if (c >= head.size() || !order_of(head[c], "err_hs(", si) || si != s.s_list[k])
      malformed(origin, 1, c + 1, "error columns must mirror the a_hs orders");
  }
  if (c != head.size()) malformed(origin, 1, c + 1, "unexpected trailing column '" + head[c] + "'");

  const std::size_t want = 1 + s.s_list.size() + 7 + (with_err ? s.s_list.size() : 0);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string row = trim(lines[r]);
    if (row.empty()) malformed(origin, r + 1, 1, "blank row inside the table");
    const std::vector<std::string> cells = split(row, ',');
    if (cells.size() != want)
      malformed(origin, r + 1, cells.size(),
                "expected " + std::to_string(want) + " cells, got " +
                    std::to_string(cells.size()));
    std::size_t i = 0;
    auto cell = [&](double& dst) {
      if (!parse_double(cells[i], dst))
        malformed(origin, r + 1, i + 1, "not a number: '" + cells[i] + "'");
      ++i;
    };
    NormEntry e;
    cell(e.time);
    e.a_hs.resize(s.s_list.size());
    for (double& v : e.a_hs) cell(v);
    cell(e.a_l2);
    cell(e.b_hsm1);
    cell(e.u_hsm2);
    cell(e.energy);
    cell(e.a_sup);
    cell(e.b_sup);
    if (cells[i] == "1")
      e.truncated = true;
    else if (cells[i] == "0")
      e.truncated = false;
    else
      malformed(origin, r + 1, i + 1, "truncated flag must be 0 or 1");
    ++i;
    if (with_err) {
      e.err_hs.resize(s.s_list.size());
      for (double& v : e.err_hs) cell(v);
    }
    try {
      s.push(std::move(e));
    } catch (const std::invalid_argument& ex) {
      malformed(origin, r + 1, 1, ex.what());
    }
  }
  return s;
}

void write_series(const NormSeries& s, const std::string& path) {
  write_file(path, series_to_csv(s));
}

NormSeries read_series(const std::string& path) {
  return series_from_csv(read_file(path), path);
}

// ------------------------------------------------------------- field snapshot

namespace {

constexpr char kMagic[8] = {'E', 'M', 'H', 'D', '2', '5', 'D', '1'};
constexpr std::size_t kHeaderSize = 8 + 4 + 4 + 8 + 8 + 4;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& buf, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}
std::uint32_t get_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[at + i])) << (8 * i);
  return v;
}
double get_f64(const std::string& buf, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[at + i])) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace

void write_snapshot(const Snapshot& s, const std::string& path) {
  if (s.grid.n < 1) throw std::invalid_argument("snapshot needs a positive grid");
  if (s.fields.empty() || s.fields.size() > 3)
    throw std::invalid_argument("snapshot carries 1..3 fields (a, b[, A])");
  const std::size_t cells = s.grid.num_real();
  for (const RVec& f : s.fields)
    if (f.size() != cells) throw std::invalid_argument("snapshot field size != grid_n^2");

  std::string buf;
  buf.reserve(kHeaderSize + s.fields.size() * cells * 8);
  buf.append(kMagic, sizeof kMagic);
  put_u32(buf, s.version);
  put_u32(buf, std::uint32_t(s.grid.n));
  put_f64(buf, s.grid.half_width);
  put_f64(buf, s.time);
  put_u32(buf, std::uint32_t(s.fields.size()));
  if constexpr (std::endian::native == std::endian::little) {
    for (const RVec& f : s.fields)
      buf.append(reinterpret_cast<const char*>(f.data()), cells * 8);
  } else {
    for (const RVec& f : s.fields)
      for (double v : f) put_f64(buf, v);
  }
  write_file(path, buf);
}

Snapshot read_snapshot(const std::string& path) {
  const std::string buf = read_file(path);
  if (buf.size() < kHeaderSize || buf.compare(0, 8, kMagic, 8) != 0)
    throw std::invalid_argument(path + ": not a field snapshot (bad magic)");
  Snapshot s;
  s.version = get_u32(buf, 8);
  if (s.version != 1)
    throw std::invalid_argument(path + ": unsupported snapshot version " +
                                std::to_string(s.version));
  s.grid.n = int(get_u32(buf, 12));
  s.grid.half_width = get_f64(buf, 16);
  s.time = get_f64(buf, 24);
  const std::uint32_t count = get_u32(buf, 32);
  if (s.grid.n < 1 || !(s.grid.half_width > 0.0) || count < 1 || count > 3)
    throw std::invalid_argument(path + ": snapshot header out of range");
  const std::size_t cells = s.grid.num_real();
  if (buf.size() != kHeaderSize + std::size_t(count) * cells * 8)
    throw std::invalid_argument(path + ": payload length != field_count * grid_n^2 * 8");
  s.fields.assign(count, RVec(cells));
  std::size_t at = kHeaderSize;
  for (RVec& f : s.fields) {
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(f.data(), buf.data() + at, cells * 8);
      at += cells * 8;
    } else {
      for (double& v : f) {
        v = get_f64(buf, at);
        at += 8;
      }
    }
  }
  return s;
}

}  // namespace emhd
