#pragma once

// Experiment harness: noise grids over simulated systems, identification of
// recorded series against an autoregressive baseline, and relaxation scaling.

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncpop/io.hpp"
#include "ncpop/lds.hpp"
#include "ncpop/random.hpp"
#include "ncpop/sysid.hpp"

namespace ncpop::experiment {

using nlohmann::json;

struct ExperimentSpec {
  lds::LdsModel model = lds::hazan_model();
  std::optional<std::string> csv_path;
  std::vector<std::pair<double, double>> std_grid;  // (std_w, std_v)
  std::size_t repeats = 1;
  std::size_t T = 20;
  std::size_t subsample_stride = 1;
  sysid::LsFormulationConfig cfg;
  std::uint64_t seed = 0;

  void validate() const {
    if (repeats < 1) throw std::invalid_argument("ExperimentSpec: repeats must be at least 1");
    if (subsample_stride < 1) throw std::invalid_argument("ExperimentSpec: stride must be at least 1");
    if (std_grid.empty()) throw std::invalid_argument("ExperimentSpec: noise grid is empty");
    for (const auto& [w, v] : std_grid)
      if (!(w >= 0.0) || !(v >= 0.0)) throw std::invalid_argument("ExperimentSpec: standard deviations must be >= 0");
    model.validate();
    auto c = cfg;
    c.T = T;
    c.validate();
  }
};

/// `std_grid` is either a list of [std_w, std_v] pairs or an object
/// {"std_w": [...], "std_v": [...]} expanded as a Cartesian product.
inline ExperimentSpec spec_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("experiment document must be a JSON object");
  ExperimentSpec s;
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.is_string())
      s.csv_path = m.get<std::string>();
    else
      s.model = io::model_from_json(m);
  }
  if (j.contains("csv")) s.csv_path = j.at("csv").get<std::string>();
  if (j.contains("std_grid")) {
    const json& g = j.at("std_grid");
    if (g.is_object()) {
      for (double w : g.at("std_w").get<std::vector<double>>())
        for (double v : g.at("std_v").get<std::vector<double>>()) s.std_grid.emplace_back(w, v);
    } else {
      for (const auto& cell : g) {
        if (!cell.is_array() || cell.size() != 2) throw std::invalid_argument("std_grid entries must be [std_w, std_v]");
        s.std_grid.emplace_back(cell[0].get<double>(), cell[1].get<double>());
      }
    }
  }
  if (j.contains("repeats")) s.repeats = j.at("repeats").get<std::size_t>();
  if (j.contains("T")) s.T = j.at("T").get<std::size_t>();
  if (j.contains("subsample_stride")) s.subsample_stride = j.at("subsample_stride").get<std::size_t>();
  if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("cfg")) s.cfg = io::config_from_json(j.at("cfg"), s.cfg);
  s.cfg.T = s.T;
  return s;
}

/// seed = base XOR H(std_w, std_v, repeat), H a chained splitmix64 over the
/// IEEE-754 bit patterns of the standard deviations.
inline std::uint64_t cell_seed(std::uint64_t base, double std_w, double std_v, std::size_t repeat) {
  std::uint64_t h = splitmix64(std::bit_cast<std::uint64_t>(std_w));
  h = splitmix64(h ^ std::bit_cast<std::uint64_t>(std_v));
  h = splitmix64(h ^ static_cast<std::uint64_t>(repeat));
  return base ^ h;
}

/// Runs job(i) for i in [0, n) on `jobs` threads. Jobs must not throw.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& job) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) job(i);
  };
  if (jobs <= 1) {
    worker();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(jobs);
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
}

// ---------------------------------------------------------------------------
// Noise grid

struct GridRow {
  double std_w = 0.0;
  double std_v = 0.0;
  std::size_t repeat = 0;
  std::uint64_t seed = 0;
  double nrmse = std::numeric_limits<double>::quiet_NaN();
  double lower_bound = std::numeric_limits<double>::quiet_NaN();
  bool flat = false;
  double seconds = 0.0;
  std::string status;  // solver status, or "error: <message>"

  bool operator==(const GridRow& o) const {
    auto same = [](double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; };
    return std_w == o.std_w && std_v == o.std_v && repeat == o.repeat && seed == o.seed && same(nrmse, o.nrmse) &&
           same(lower_bound, o.lower_bound) && flat == o.flat && seconds == o.seconds && status == o.status;
  }
};

inline GridRow run_cell(const ExperimentSpec& spec, double std_w, double std_v, std::size_t repeat) {
  GridRow row;
  row.std_w = std_w;
  row.std_v = std_v;
  row.repeat = repeat;
  row.seed = cell_seed(spec.seed, std_w, std_v, repeat);
  try {
    lds::LdsModel model = spec.model;
    model.W = std_w * std_w * Eigen::MatrixXd::Identity(model.G.rows(), model.G.rows());
    model.V = std_v * std_v * Eigen::MatrixXd::Identity(model.F.cols(), model.F.cols());
    const auto tr = lds::simulate(model, spec.T, row.seed);
    auto cfg = spec.cfg;
    cfg.T = spec.T;
    const auto r = sysid::identify(tr.scalar_observations(), cfg);
    row.nrmse = r.nrmse_fit;
    row.lower_bound = r.lower_bound;
    row.flat = r.extraction.flat;
    row.seconds = r.wall_time;
    row.status = sdp::to_string(r.solver_status);
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  return row;
}

inline std::vector<GridRow> run_grid(const ExperimentSpec& spec, unsigned jobs = 0) {
  spec.validate();
  struct Cell {
    double w, v;
    std::size_t r;
  };
  std::vector<Cell> cells;
  for (const auto& [w, v] : spec.std_grid)
    for (std::size_t r = 0; r < spec.repeats; ++r) cells.push_back({w, v, r});
  std::vector<GridRow> rows(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t i) { rows[i] = run_cell(spec, cells[i].w, cells[i].v, cells[i].r); });
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) {
    return std::tie(a.std_w, a.std_v, a.repeat) < std::tie(b.std_w, b.std_v, b.repeat);
  });
  return rows;
}

namespace detail {

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, std::size_t line) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw lds::CsvParseError(line, "`" + s + "` is not a number");
  }
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

struct Stats {
  std::size_t n = 0;
  double mean = std::numeric_limits<double>::quiet_NaN();
  double std = std::numeric_limits<double>::quiet_NaN();
};

/// Mean and sample standard deviation of the finite values.
inline Stats stats(const std::vector<double>& xs) {
  Stats s;
  double sum = 0.0;
  for (double x : xs)
    if (std::isfinite(x)) {
      sum += x;
      ++s.n;
    }
  if (s.n == 0) return s;
  s.mean = sum / static_cast<double>(s.n);
  double ss = 0.0;
  for (double x : xs)
    if (std::isfinite(x)) ss += (x - s.mean) * (x - s.mean);
  s.std = s.n > 1 ? std::sqrt(ss / static_cast<double>(s.n - 1)) : 0.0;
  return s;
}

}  // namespace detail

inline constexpr const char* kGridHeader = "std_w,std_v,repeat,seed,nrmse,lower_bound,flat,seconds,status";

/// With `timing` false the seconds column is written as 0, which makes the
/// file a pure function of the experiment spec.
inline void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows, bool timing = true) {
  os << kGridHeader << "\n";
  for (const auto& r : rows)
    os << detail::fmt(r.std_w) << "," << detail::fmt(r.std_v) << "," << r.repeat << "," << r.seed << ","
       << detail::fmt(r.nrmse) << "," << detail::fmt(r.lower_bound) << "," << (r.flat ? 1 : 0) << ","
       << detail::fmt(timing ? r.seconds : 0.0) << "," << detail::quote(r.status) << "\n";
}

inline std::vector<GridRow> read_grid_csv(std::istream& is) {
  std::vector<GridRow> rows;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(is, line)) throw lds::CsvParseError(0, "empty input");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kGridHeader) throw lds::CsvParseError(lineno, "unexpected header `" + line + "`");
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw lds::CsvParseError(lineno, "expected 9 fields, found " + std::to_string(f.size()));
    GridRow r;
    r.std_w = detail::parse_double(f[0], lineno);
    r.std_v = detail::parse_double(f[1], lineno);
    try {
      r.repeat = std::stoull(f[2]);
      r.seed = std::stoull(f[3]);
    } catch (const std::exception&) {
      throw lds::CsvParseError(lineno, "repeat and seed must be unsigned integers");
    }
    r.nrmse = detail::parse_double(f[4], lineno);
    r.lower_bound = detail::parse_double(f[5], lineno);
    if (f[6] != "0" && f[6] != "1") throw lds::CsvParseError(lineno, "flat must be 0 or 1");
    r.flat = f[6] == "1";
    r.seconds = detail::parse_double(f[7], lineno);
    r.status = f[8];
    rows.push_back(std::move(r));
  }
  return rows;
}

/// Mean and standard deviation per (std_w, std_v) cell over successful runs.
inline json grid_summary(const std::vector<GridRow>& rows) {
  std::map<std::pair<double, double>, std::vector<const GridRow*>> cells;
  for (const auto& r : rows) cells[{r.std_w, r.std_v}].push_back(&r);
  json out = json::array();
  for (const auto& [key, members] : cells) {
    std::vector<double> nr, lb, sec;
    std::size_t failed = 0, flat = 0;
    for (const auto* r : members) {
      if (r->status.rfind("error", 0) == 0) {
        ++failed;
        continue;
      }
      nr.push_back(r->nrmse);
      lb.push_back(r->lower_bound);
      sec.push_back(r->seconds);
      flat += r->flat ? 1 : 0;
    }
    const auto sn = detail::stats(nr), sl = detail::stats(lb), ss = detail::stats(sec);
    out.push_back({{"std_w", key.first},
                   {"std_v", key.second},
                   {"runs", members.size()},
                   {"failed", failed},
                   {"flat", flat},
                   {"nrmse_mean", io::number(sn.mean)},
                   {"nrmse_std", io::number(sn.std)},
                   {"lower_bound_mean", io::number(sl.mean)},
                   {"lower_bound_std", io::number(sl.std)},
                   {"seconds_mean", io::number(ss.mean)},
                   {"seconds_std", io::number(ss.std)}});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Recorded series

/// Every stride-th observation starting from the first, `count` of them.
inline std::vector<double> subsample(const std::vector<lds::SeriesPoint>& series, std::size_t stride,
                                     std::size_t count) {
  if (stride < 1) throw std::invalid_argument("subsample: stride must be at least 1");
  if (count < 1 || (count - 1) * stride >= series.size())
    throw std::invalid_argument("subsample: " + std::to_string(count) + " points at stride " + std::to_string(stride) +
                                " need more than the " + std::to_string(series.size()) + " rows available");
  std::vector<double> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(series[i * stride].y);
  return out;
}

struct CsvRunReport {
  std::vector<double> t;  // original time stamps of the selected rows
  std::vector<double> Y;
  std::vector<double> ncpop_fit;
  std::vector<double> ar_fit;  // NaN for the first ar_order periods
  std::size_t ar_order = 1;
  double nrmse_ncpop = 0.0;
  double nrmse_ar = 0.0;  // over the periods with an AR forecast
  sysid::IdentificationResult identification;
};

inline CsvRunReport run_csv_series(const std::vector<lds::SeriesPoint>& series, std::size_t stride, std::size_t count,
                                   sysid::LsFormulationConfig cfg, std::size_t ar_order = 1) {
  CsvRunReport rep;
  rep.Y = subsample(series, stride, count);
  for (std::size_t i = 0; i < count; ++i) rep.t.push_back(series[i * stride].t);
  rep.ar_order = ar_order;
  cfg.T = count;
  rep.identification = sysid::identify(rep.Y, cfg);
  rep.ncpop_fit = rep.identification.f_hat;
  rep.nrmse_ncpop = rep.identification.nrmse_fit;
  const auto ar = sysid::ar_ols_baseline(rep.Y, ar_order);
  rep.ar_fit.assign(ar_order, std::numeric_limits<double>::quiet_NaN());
  rep.ar_fit.insert(rep.ar_fit.end(), ar.forecasts.begin(), ar.forecasts.end());
  const std::span<const double> tail(rep.Y.data() + ar_order, rep.Y.size() - ar_order);
  rep.nrmse_ar = lds::nrmse(tail, ar.forecasts);
  return rep;
}

inline CsvRunReport run_csv(const std::string& path, std::size_t stride, std::size_t count,
                            const sysid::LsFormulationConfig& cfg, std::size_t ar_order = 1) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open `" + path + "`");
  return run_csv_series(lds::read_series_csv(in), stride, count, cfg, ar_order);
}

inline void write_forecast_csv(std::ostream& os, const CsvRunReport& rep) {
  os << "t,y,ncpop,ar\n";
  for (std::size_t i = 0; i < rep.Y.size(); ++i)
    os << detail::fmt(rep.t[i]) << "," << detail::fmt(rep.Y[i]) << "," << detail::fmt(rep.ncpop_fit[i]) << ","
       << detail::fmt(rep.ar_fit[i]) << "\n";
}

inline json csv_report_to_json(const CsvRunReport& rep) {
  return {{"periods", rep.Y.size()},
          {"ar_order", rep.ar_order},
          {"nrmse_percent", {{"ncpop", io::number(100.0 * rep.nrmse_ncpop)}, {"ar", io::number(100.0 * rep.nrmse_ar)}}},
          {"identification", io::result_to_json(rep.identification)}};
}

// ---------------------------------------------------------------------------
// Scaling

struct ScalingRow {
  std::size_t T = 0;
  sysid::Sparsity sparsity = sysid::Sparsity::dense;
  std::size_t moment_variables = 0;
  std::size_t largest_block = 0;
  std::size_t repetitions = 0;
  double seconds_mean = 0.0;
  double seconds_std = 0.0;
  std::string status;  // last solver status, "time_limit" or "error: ..."
};

/// Observations for every T come from one simulated trajectory of length
/// max(T_list), so longer windows extend shorter ones.
inline std::vector<ScalingRow> run_scaling(const std::vector<std::size_t>& T_list, const sysid::LsFormulationConfig& cfg,
                                           std::span<const double> Y, std::size_t repetitions = 3) {
  if (repetitions < 1) throw std::invalid_argument("run_scaling: repetitions must be at least 1");
  std::vector<ScalingRow> rows;
  for (std::size_t T : T_list) {
    if (T < 2) throw std::invalid_argument("run_scaling: every T must be at least 2");
    if (T > Y.size()) throw std::invalid_argument("run_scaling: T exceeds the available observations");
    for (auto mode : {sysid::Sparsity::dense, sysid::Sparsity::cliques}) {
      ScalingRow row;
      row.T = T;
      row.sparsity = mode;
      auto c = cfg;
      c.T = T;
      c.sparsity = mode;
      std::vector<double> secs;
      try {
        const auto prob = sysid::build_noise_explicit(Y, c);
        const auto rel = build_relaxation(prob.problem, c.order);
        row.moment_variables = rel.moments.size();
        for (const auto& mm : rel.moment_matrices)
          row.largest_block = std::max(row.largest_block, static_cast<std::size_t>(mm.matrix.dim()));
        for (std::size_t r = 0; r < repetitions; ++r) {
          const auto res = sysid::identify(Y, c);
          secs.push_back(res.wall_time);
          row.status = sdp::to_string(res.solver_status);
          if (res.solver_status == sdp::Status::time_limit) break;
        }
      } catch (const std::exception& e) {
        row.status = std::string("error: ") + e.what();
      }
      row.repetitions = secs.size();
      const auto s = detail::stats(secs);
      row.seconds_mean = s.n ? s.mean : 0.0;
      row.seconds_std = s.n ? s.std : 0.0;
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

inline void write_scaling_csv(std::ostream& os, const std::vector<ScalingRow>& rows) {
  os << "T,sparsity,moment_variables,largest_block,repetitions,seconds_mean,seconds_std,status\n";
  for (const auto& r : rows)
    os << r.T << "," << sysid::to_string(r.sparsity) << "," << r.moment_variables << "," << r.largest_block << ","
       << r.repetitions << "," << detail::fmt(r.seconds_mean) << "," << detail::fmt(r.seconds_std) << ","
       << detail::quote(r.status) << "\n";
}

}  // namespace ncpop::experiment
