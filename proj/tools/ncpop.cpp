// ncpop: simulate linear dynamical systems, identify them through moment
// relaxations, and run the grid, recorded-series and scaling experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ncpop/experiment.hpp"
#include "ncpop/io.hpp"
#include "ncpop/lds.hpp"
#include "ncpop/sdp.hpp"
#include "ncpop/sysid.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ncpop;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonFlags {
  std::string model_path;
  std::optional<std::size_t> T;
  std::optional<int> order;
  std::optional<double> c1, c2, ball_radius, tol;
  std::optional<std::string> equality_mode, sparsity;
  bool no_ball = false;
  std::uint64_t seed = 0;
  std::string out;
  unsigned jobs = 0;
};

void add_model_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--model", f.model_path, "Model JSON (G, F, W, v, m0, C0) or {\"preset\": \"hazan\"}");
  app->add_option("--seed", f.seed, "Base random seed");
}

void add_formulation_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--T", f.T, "Window length");
  app->add_option("--order", f.order, "Relaxation order k");
  app->add_option("--c1", f.c1, "Process-noise multiplier (default 10 var(Y))");
  app->add_option("--c2", f.c2, "Observation-noise multiplier (default 10 var(Y))");
  app->add_option("--ball-radius", f.ball_radius, "Radius of the ball constraint (default 5 max(1, max|Y|))");
  app->add_flag("--no-ball", f.no_ball, "Drop the ball constraint");
  app->add_option("--equality-mode", f.equality_mode, "exact_rows | inequality_pairs");
  app->add_option("--sparsity", f.sparsity, "dense | cliques");
  app->add_option("--tol", f.tol, "Solver tolerance");
}

void add_output_flags(CLI::App* app, CommonFlags& f) {
  app->add_option("--out", f.out, "Output directory (default: standard output)");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open `" + path + "`");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("`" + path + "` is not valid JSON: " + e.what());
  }
}

lds::LdsModel load_model(const CommonFlags& f) {
  if (f.model_path.empty()) return lds::hazan_model(0.5, 0.5);
  try {
    return io::model_from_json(read_json_file(f.model_path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

sysid::LsFormulationConfig apply_flags(sysid::LsFormulationConfig c, const CommonFlags& f) {
  try {
    if (f.T) c.T = *f.T;
    if (f.order) c.order = *f.order;
    if (f.c1) c.c1 = f.c1;
    if (f.c2) c.c2 = f.c2;
    if (f.ball_radius) c.ball_radius = f.ball_radius;
    if (f.no_ball) c.archimedean = false;
    if (f.equality_mode) c.equality_mode = io::equality_mode_from_string(*f.equality_mode);
    if (f.sparsity) c.sparsity = io::sparsity_from_string(*f.sparsity);
    if (f.tol) c.solver.tol = *f.tol;
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

/// Writes to <out>/<name>, or to standard output when no directory is given.
void emit(const CommonFlags& f, const std::string& name, const std::string& content) {
  if (f.out.empty()) {
    std::cout << content;
    if (!content.empty() && content.back() != '\n') std::cout << "\n";
    return;
  }
  fs::create_directories(f.out);
  const auto path = fs::path(f.out) / name;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write `" + path.string() + "`");
  os << content;
  std::cerr << "wrote " << path.string() << "\n";
}

std::vector<double> load_series(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open `" + path + "`");
  std::vector<double> y;
  for (const auto& p : lds::read_series_csv(in)) y.push_back(p.y);
  return y;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proper learning of linear dynamical systems via moment relaxations"};
  app.require_subcommand(1);
  CommonFlags f;

  auto* sim = app.add_subcommand("simulate", "Simulate a trajectory and write it as a t,y CSV");
  add_model_flags(sim, f);
  sim->add_option("--T", f.T, "Number of observations")->required();
  add_output_flags(sim, f);

  std::string csv_path;
  std::string export_sdpa;
  auto* ident = app.add_subcommand("identify", "Fit the noise-explicit model to a series");
  add_model_flags(ident, f);
  add_formulation_flags(ident, f);
  add_output_flags(ident, f);
  ident->add_option("--csv", csv_path, "Series CSV with header t,y (otherwise the model is simulated)");
  ident->add_option("--export-sdpa", export_sdpa, "Also write the relaxation in SDPA sparse format");

  std::string config_path;
  std::size_t repeats = 0;
  bool no_timing = false;
  auto* grid = app.add_subcommand("grid", "Noise grid experiment");
  grid->add_option("--config", config_path, "Experiment JSON")->required();
  add_model_flags(grid, f);
  add_formulation_flags(grid, f);
  add_output_flags(grid, f);
  grid->add_option("--repeats", repeats, "Runs per grid cell");
  grid->add_option("--jobs", f.jobs, "Worker threads (default: number of cores)");
  grid->add_flag("--no-timing", no_timing, "Write 0 in the seconds column for byte-stable output");

  std::size_t stride = 1, count = 0, ar_order = 1;
  auto* csvrun = app.add_subcommand("csv-run", "Identify a recorded series and compare with an AR baseline");
  csvrun->add_option("--csv", csv_path, "Series CSV with header t,y")->required();
  csvrun->add_option("--stride", stride, "Keep every stride-th row");
  csvrun->add_option("--count", count, "Number of periods, same as --T (default: all rows at the stride)");
  csvrun->add_option("--ar-order", ar_order, "Lag order of the baseline");
  add_formulation_flags(csvrun, f);
  add_output_flags(csvrun, f);

  std::vector<std::size_t> T_list{2, 4, 6, 8};
  std::size_t reps = 3;
  double time_limit = 0.0;
  auto* scaling = app.add_subcommand("scaling", "Relaxation size and solve time against the window length");
  add_model_flags(scaling, f);
  add_formulation_flags(scaling, f);
  add_output_flags(scaling, f);
  scaling->add_option("--T-list", T_list, "Window lengths")->delimiter(',');
  scaling->add_option("--repeats", reps, "Repetitions per point");
  scaling->add_option("--time-limit", time_limit, "Per-solve time limit in seconds");

  std::string sdpa_in;
  auto* solve_sdpa = app.add_subcommand("solve-sdpa", "Solve an SDPA sparse file and print the solution as JSON");
  solve_sdpa->add_option("file", sdpa_in, "SDPA file")->required();
  solve_sdpa->add_option("--tol", f.tol, "Solver tolerance");
  add_output_flags(solve_sdpa, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*sim) {
      const auto model = load_model(f);
      const auto tr = lds::simulate(model, *f.T, f.seed);
      std::ostringstream os;
      lds::write_series_csv(os, tr.scalar_observations());
      emit(f, "series.csv", os.str());
    } else if (*ident) {
      std::vector<double> Y;
      if (!csv_path.empty()) {
        Y = load_series(csv_path);
      } else {
        Y = lds::simulate(load_model(f), f.T.value_or(20), f.seed).scalar_observations();
      }
      sysid::LsFormulationConfig base;
      base.T = Y.size();
      const auto cfg = apply_flags(base, f);
      if (Y.size() < cfg.T) throw UsageError("series has " + std::to_string(Y.size()) + " observations, T is " +
                                             std::to_string(cfg.T));
      if (!export_sdpa.empty()) {
        const auto prob = sysid::build_noise_explicit(Y, cfg);
        const auto rel = build_relaxation(prob.problem, cfg.order);
        std::ofstream os(export_sdpa);
        if (!os) throw std::runtime_error("cannot write `" + export_sdpa + "`");
        sdp::write_sdpa(relaxation_to_sdp(rel, EqualityMode::exact_rows), os);
      }
      const auto r = sysid::identify(Y, cfg);
      emit(f, "identify.json", io::result_to_json(r).dump(2));
    } else if (*grid) {
      experiment::ExperimentSpec spec;
      try {
        spec = experiment::spec_from_json(read_json_file(config_path));
        if (spec.csv_path) throw UsageError("grid simulates a model; use csv-run for the series `" + *spec.csv_path + "`");
        if (!f.model_path.empty()) spec.model = load_model(f);
        if (grid->count("--seed")) spec.seed = f.seed;
        if (repeats) spec.repeats = repeats;
        if (f.T) spec.T = *f.T;
        spec.cfg = apply_flags(spec.cfg, f);
        spec.cfg.T = spec.T;
        spec.validate();
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      } catch (const json::exception& e) {
        throw UsageError(e.what());
      }
      const auto rows = experiment::run_grid(spec, f.jobs);
      std::ostringstream os;
      experiment::write_grid_csv(os, rows, !no_timing);
      emit(f, "grid.csv", os.str());
      if (!f.out.empty()) emit(f, "summary.json", experiment::grid_summary(rows).dump(2));
    } else if (*csvrun) {
      std::ifstream in(csv_path);
      if (!in) throw UsageError("cannot open `" + csv_path + "`");
      const auto series = lds::read_series_csv(in);
      if (count == 0 && f.T) count = *f.T;
      if (count == 0) count = series.empty() ? 0 : (series.size() - 1) / stride + 1;
      if (f.T && *f.T != count) throw UsageError("--T and --count disagree");
      sysid::LsFormulationConfig base;
      base.T = count;
      auto cfg = apply_flags(base, f);
      experiment::CsvRunReport rep;
      try {
        rep = experiment::run_csv_series(series, stride, count, cfg, ar_order);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::ostringstream os;
      experiment::write_forecast_csv(os, rep);
      emit(f, "forecasts.csv", os.str());
      emit(f, "report.json", experiment::csv_report_to_json(rep).dump(2));
    } else if (*scaling) {
      const auto model = load_model(f);
      std::size_t Tmax = 2;
      for (auto T : T_list) Tmax = std::max(Tmax, T);
      const auto Y = lds::simulate(model, Tmax, f.seed).scalar_observations();
      sysid::LsFormulationConfig base;
      base.T = Tmax;
      auto cfg = apply_flags(base, f);
      cfg.solver.time_limit_seconds = time_limit;
      std::vector<experiment::ScalingRow> rows;
      try {
        rows = experiment::run_scaling(T_list, cfg, Y, reps);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      std::ostringstream os;
      experiment::write_scaling_csv(os, rows);
      emit(f, "scaling.csv", os.str());
    } else if (*solve_sdpa) {
      std::ifstream in(sdpa_in);
      if (!in) throw UsageError("cannot open `" + sdpa_in + "`");
      const auto problem = sdp::read_sdpa(in);
      sdp::SolverOptions opt;
      if (f.tol) opt.tol = *f.tol;
      emit(f, "solution.json", io::solution_to_json(sdp::solve(problem, opt)).dump(2));
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return 0;
}
