#pragma once

// System identification as non-commutative polynomial optimization.
//
// The solved model treats G, F, the state estimates m_t, forecasts f_t and
// noise realizations w_t, v_t as Hermitian operators and minimizes
//
//   sum_t (Y_t - f_t)^2 + c1 sum_t w_t^2 + c2 sum_t v_t^2
//   s.t.  m_t = G m_{t-1} + w_t,   f_t = F m_t + v_t,   t = 1..T.
//
// Every polynomial has degree <= 2, so the order-1 relaxation is admissible.
// Two Kalman-recursion based formulations are provided as build-only audits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncpop/lds.hpp"
#include "ncpop/ncpoly.hpp"
#include "ncpop/npa.hpp"
#include "ncpop/sdp.hpp"

namespace ncpop::sysid {

enum class Sparsity { dense, cliques };

inline const char* to_string(Sparsity s) { return s == Sparsity::dense ? "dense" : "cliques"; }
inline const char* to_string(EqualityMode m) {
  return m == EqualityMode::exact_rows ? "exact_rows" : "inequality_pairs";
}

struct LsFormulationConfig {
  std::optional<double> c1;  // default: 10 * var(Y)
  std::optional<double> c2;
  std::size_t T = 20;
  int order = 1;
  bool archimedean = true;
  std::optional<double> ball_radius;  // default: 5 * max(1, max |Y_t|)
  EqualityMode equality_mode = EqualityMode::exact_rows;
  Sparsity sparsity = Sparsity::cliques;
  sdp::SolverOptions solver;
  double rank_tol = 1e-6;

  void validate() const {
    if (T < 2) throw std::invalid_argument("LsFormulationConfig: window length T must be at least 2");
    if (order < 1) throw std::invalid_argument("LsFormulationConfig: relaxation order must be at least 1");
    if (c1 && !(*c1 > 0)) throw std::invalid_argument("LsFormulationConfig: c1 must be positive");
    if (c2 && !(*c2 > 0)) throw std::invalid_argument("LsFormulationConfig: c2 must be positive");
    if (ball_radius && !(*ball_radius > 0)) throw std::invalid_argument("LsFormulationConfig: ball radius must be positive");
  }
};

class WindowTooShortError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline double variance(std::span<const double> y) {
  if (y.empty()) return 0.0;
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double s = 0.0;
  for (double v : y) s += (v - mean) * (v - mean);
  return s / static_cast<double>(y.size());
}

inline double default_multiplier(std::span<const double> y) {
  const double var = variance(y);
  return var > 0.0 ? 10.0 * var : 10.0;
}

inline double default_ball_radius(std::span<const double> y) {
  double mx = 1.0;
  for (double v : y) mx = std::max(mx, std::abs(v));
  return 5.0 * mx;
}

/// Variable ids of the noise-explicit model. Vectors are indexed by time:
/// m[0..T], and f, w, v at [t - 1] for t = 1..T.
struct NoiseExplicitVariables {
  VarId G = 0;
  VarId F = 0;
  std::vector<VarId> m, f, w, v;
};

struct NoiseExplicitProblem {
  Ncpop problem;
  NoiseExplicitVariables ids;
  std::vector<double> Y;  // the window Y_1 .. Y_T
  double c1 = 0.0;
  double c2 = 0.0;
};

inline NoiseExplicitProblem build_noise_explicit(std::span<const double> Y_all, const LsFormulationConfig& cfg) {
  cfg.validate();
  if (Y_all.size() < cfg.T)
    throw WindowTooShortError("build_noise_explicit: " + std::to_string(Y_all.size()) +
                              " observations, window needs " + std::to_string(cfg.T));
  NoiseExplicitProblem out;
  out.Y.assign(Y_all.begin(), Y_all.begin() + static_cast<std::ptrdiff_t>(cfg.T));
  for (std::size_t t = 0; t < out.Y.size(); ++t)
    if (!std::isfinite(out.Y[t]))
      throw std::invalid_argument("build_noise_explicit: observation " + std::to_string(t + 1) + " is not finite");
  out.c1 = cfg.c1.value_or(default_multiplier(out.Y));
  out.c2 = cfg.c2.value_or(default_multiplier(out.Y));
  const std::size_t T = cfg.T;

  auto& vars = out.problem.variables;
  auto& ids = out.ids;
  ids.G = vars.add("G");
  ids.F = vars.add("F");
  for (std::size_t t = 0; t <= T; ++t) ids.m.push_back(vars.add("m" + std::to_string(t)));
  for (std::size_t t = 1; t <= T; ++t) ids.f.push_back(vars.add("f" + std::to_string(t)));
  for (std::size_t t = 1; t <= T; ++t) ids.w.push_back(vars.add("w" + std::to_string(t)));
  for (std::size_t t = 1; t <= T; ++t) ids.v.push_back(vars.add("v" + std::to_string(t)));

  auto X = [](VarId id) { return Polynomial::variable(id); };
  Polynomial obj;
  for (std::size_t t = 1; t <= T; ++t) {
    const double y = out.Y[t - 1];
    const Polynomial resid = Polynomial(y) - X(ids.f[t - 1]);
    obj += resid * resid;
    obj += out.c1 * X(ids.w[t - 1]) * X(ids.w[t - 1]);
    obj += out.c2 * X(ids.v[t - 1]) * X(ids.v[t - 1]);
  }
  out.problem.objective = std::move(obj);

  for (std::size_t t = 1; t <= T; ++t) {
    const Polynomial state = X(ids.m[t]) - X(ids.G) * X(ids.m[t - 1]) - X(ids.w[t - 1]);
    const Polynomial obs = X(ids.f[t - 1]) - X(ids.F) * X(ids.m[t]) - X(ids.v[t - 1]);
    for (const auto& q : {state, obs}) {
      if (cfg.equality_mode == EqualityMode::exact_rows) {
        out.problem.equalities.push_back(q);
      } else {
        out.problem.inequalities.push_back(q);
        out.problem.inequalities.push_back(-q);
      }
    }
  }

  if (cfg.archimedean) out.problem.ball_radius = cfg.ball_radius.value_or(default_ball_radius(out.Y));

  if (cfg.sparsity == Sparsity::cliques) {
    for (std::size_t t = 1; t <= T; ++t) {
      std::vector<VarId> c{ids.G, ids.F, ids.m[t - 1], ids.m[t], ids.f[t - 1], ids.w[t - 1], ids.v[t - 1]};
      std::sort(c.begin(), c.end());
      out.problem.cliques.push_back(std::move(c));
    }
  }
  return out;
}

/// Scalar values for every variable of the noise-explicit model, indexed by id.
using ScalarPoint = std::vector<double>;

/// Evaluates a polynomial at a scalar (commuting, one-dimensional) point.
inline double evaluate_scalar(const Polynomial& p, std::span<const double> point) {
  double total = 0.0;
  for (const auto& [w, c] : p.terms()) {
    double term = c;
    for (auto l : w.letters()) term *= point[l];
    total += term;
  }
  return total;
}

/// Ground-truth point of a one-dimensional simulated system: G, F, the true
/// states and the realized noises. Feasible for the noise-explicit model.
inline ScalarPoint ground_truth_point(const NoiseExplicitProblem& prob, const lds::LdsModel& model,
                                      const lds::Trajectory& tr) {
  if (model.state_dim() != 1 || model.obs_dim() != 1)
    throw std::invalid_argument("ground_truth_point: only one-dimensional systems have a scalar ground truth");
  const double g = model.G(0, 0);
  const double f = model.F(0, 0);
  const auto& ids = prob.ids;
  ScalarPoint p(prob.problem.variables.size(), 0.0);
  p[ids.G] = g;
  p[ids.F] = f;
  const std::size_t T = prob.Y.size();
  for (std::size_t t = 0; t <= T; ++t) p[ids.m[t]] = tr.states[t][0];
  for (std::size_t t = 1; t <= T; ++t) {
    p[ids.w[t - 1]] = tr.states[t][0] - g * tr.states[t - 1][0];
    p[ids.v[t - 1]] = tr.observations[t - 1][0] - f * tr.states[t][0];
    p[ids.f[t - 1]] = tr.observations[t - 1][0];
  }
  return p;
}

/// Sum of squares of all variables; compare with ball_radius^2.
inline double squared_norm(std::span<const double> point) {
  return std::inner_product(point.begin(), point.end(), point.begin(), 0.0);
}

struct IdentificationResult {
  double G_hat = 0.0;
  double F_hat = 0.0;
  std::vector<double> m_hat;  // m_0 .. m_T
  std::vector<double> f_hat;  // f_1 .. f_T
  std::vector<double> w_hat;
  std::vector<double> v_hat;
  std::vector<double> Y;      // window the model was fitted on
  double lower_bound = 0.0;   // p_k
  ExtractionReport extraction;
  bool heuristic_extraction = true;  // set when the rank loop does not hold
  double nrmse_fit = 0.0;
  double wall_time = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  std::optional<double> ball_radius;
  std::size_t moment_variables = 0;
  sdp::Status solver_status = sdp::Status::max_iterations;
  int solver_iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
};

/// Builds the noise-explicit model, relaxes it at cfg.order, solves the SDP
/// and reads estimates off the first-order moments.
inline IdentificationResult identify(std::span<const double> Y, const LsFormulationConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const NoiseExplicitProblem prob = build_noise_explicit(Y, cfg);
  const MomentRelaxation rel = build_relaxation(prob.problem, cfg.order);
  const sdp::SdpProblem sdp_problem = relaxation_to_sdp(rel, EqualityMode::exact_rows);
  const sdp::SdpSolution sol = sdp::solve(sdp_problem, cfg.solver);
  const Eigen::VectorXd moments = moments_from_sdp(sol.y);

  IdentificationResult r;
  r.extraction = check_rank_loop(moments, rel, cfg.rank_tol);
  r.heuristic_extraction = !r.extraction.flat;
  r.lower_bound = sol.objective_value;
  r.extraction.certified_lower_bound = sol.objective_value;
  const auto point = extract_point(moments, rel);
  const auto& ids = prob.ids;
  r.G_hat = point[ids.G];
  r.F_hat = point[ids.F];
  for (auto id : ids.m) r.m_hat.push_back(point[id]);
  for (auto id : ids.f) r.f_hat.push_back(point[id]);
  for (auto id : ids.w) r.w_hat.push_back(point[id]);
  for (auto id : ids.v) r.v_hat.push_back(point[id]);
  r.Y = prob.Y;
  r.c1 = prob.c1;
  r.c2 = prob.c2;
  r.ball_radius = prob.problem.ball_radius;
  r.moment_variables = rel.moments.size();
  r.solver_status = sol.status;
  r.solver_iterations = sol.iterations;
  r.primal_residual = sol.primal_residual;
  r.dual_residual = sol.dual_residual;
  r.gap = sol.gap;
  r.nrmse_fit = lds::nrmse(r.Y, r.f_hat);
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

// ---------------------------------------------------------------------------
// Autoregressive least-squares baseline.

struct ArBaseline {
  std::size_t order = 0;
  Eigen::VectorXd coefficients;  // intercept, then lags 1..s
  std::vector<double> forecasts;  // one-step in-sample forecasts for t = s+1 .. T
  bool ridge_fallback = false;
};

inline ArBaseline ar_ols_baseline(std::span<const double> Y, std::size_t s) {
  if (Y.size() <= s + 1)
    throw WindowTooShortError("ar_ols_baseline: need more than " + std::to_string(s + 1) + " observations");
  const auto rows = static_cast<Eigen::Index>(Y.size() - s);
  const auto cols = static_cast<Eigen::Index>(s + 1);
  Eigen::MatrixXd X(rows, cols);
  Eigen::VectorXd target(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t t = s + static_cast<std::size_t>(r);
    X(r, 0) = 1.0;
    for (std::size_t lag = 1; lag <= s; ++lag) X(r, static_cast<Eigen::Index>(lag)) = Y[t - lag];
    target[r] = Y[t];
  }
  ArBaseline out;
  out.order = s;
  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::VectorXd Xty = X.transpose() * target;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < cols) {
    out.ridge_fallback = true;
    out.coefficients = (XtX + 1e-8 * Eigen::MatrixXd::Identity(cols, cols)).ldlt().solve(Xty);
  } else {
    out.coefficients = XtX.ldlt().solve(Xty);
  }
  const Eigen::VectorXd fitted = X * out.coefficients;
  out.forecasts.assign(fitted.data(), fitted.data() + fitted.size());
  return out;
}

// ---------------------------------------------------------------------------
// Kalman-recursion formulations (constructed and audited, not solved).

struct FormulationAudit {
  Ncpop problem;
  std::size_t max_degree = 0;
  int min_order = 1;  // smallest admissible relaxation order
  std::size_t inversion_constraints = 0;
  // Right-hand side of f_{t+1} = ... for each forecast, keyed by t+1.
  std::vector<std::pair<std::size_t, Polynomial>> forecasts;
};

namespace detail {

inline void finish_audit(FormulationAudit& a) {
  a.max_degree = a.problem.max_degree();
  a.min_order = static_cast<int>(std::max<std::size_t>(1, (a.max_degree + 1) / 2));
}

inline Polynomial power(const Polynomial& p, std::size_t e) {
  Polynomial out(1.0);
  for (std::size_t i = 0; i < e; ++i) out = out * p;
  return out;
}

}  // namespace detail

/// Unrolled-forecast formulation with per-step filter matrices R_t, Q_t,
/// A_t, Z_t, X_t (X_t Q_t = I) and C_t as operator variables.
inline FormulationAudit build_general_formulation(std::span<const double> Y, std::size_t s,
                                                  const LsFormulationConfig& cfg) {
  if (s < 1) throw std::invalid_argument("build_general_formulation: s must be at least 1");
  const std::size_t T = std::min(cfg.T, Y.size());
  if (T < s + 2) throw WindowTooShortError("build_general_formulation: window must hold at least s + 2 observations");
  FormulationAudit a;
  auto& vars = a.problem.variables;
  auto X = [](VarId id) { return Polynomial::variable(id); };
  const VarId G = vars.add("G"), F = vars.add("F"), W = vars.add("W"), v = vars.add("v");
  std::vector<VarId> R(T + 1), Q(T + 1), A(T + 1), Z(T + 1), Xinv(T + 1), C(T + 1);
  C[0] = vars.add("C0");
  for (std::size_t t = 1; t <= T; ++t) {
    const auto st = std::to_string(t);
    R[t] = vars.add("R" + st);
    Q[t] = vars.add("Q" + st);
    A[t] = vars.add("A" + st);
    Z[t] = vars.add("Z" + st);
    Xinv[t] = vars.add("X" + st);
    C[t] = vars.add("C" + st);
  }
  std::vector<VarId> f(T + 1);
  for (std::size_t t = s + 2; t <= T; ++t) f[t] = vars.add("f" + std::to_string(t));

  Polynomial obj;
  for (std::size_t t = s + 2; t <= T; ++t) {
    const Polynomial r = Polynomial(Y[t - 1]) - X(f[t]);
    obj += r * r;
  }
  a.problem.objective = obj;

  auto& eq = a.problem.equalities;
  for (std::size_t t = 1; t <= T; ++t) {
    eq.push_back(X(R[t]) - X(G) * X(C[t - 1]) * X(G) - X(W));
    eq.push_back(X(Q[t]) - X(F) * X(R[t]) * X(F) - X(v));
    eq.push_back(X(A[t]) - X(R[t]) * X(F) * X(Xinv[t]));
    eq.push_back(X(Xinv[t]) * X(Q[t]) - Polynomial(1.0));
    ++a.inversion_constraints;
    eq.push_back(X(C[t]) - X(R[t]) + X(A[t]) * X(Q[t]) * X(A[t]));
    eq.push_back(X(Z[t]) - X(G) + X(G) * X(A[t]) * X(F));
  }
  for (std::size_t t = s + 1; t + 1 <= T; ++t) {
    Polynomial rhs = Y[t - 1] * (X(F) * X(G) * X(A[t]));
    for (std::size_t j = 0; j < s; ++j) {
      Polynomial prod(1.0);
      for (std::size_t i = 0; i <= j; ++i) prod = prod * X(Z[t - i]);
      rhs += Y[t - j - 2] * (X(F) * prod * X(G) * X(A[t - j - 1]));
    }
    eq.push_back(X(f[t + 1]) - rhs);
    a.forecasts.emplace_back(t + 1, std::move(rhs));
  }
  detail::finish_audit(a);
  return a;
}

/// Steady-state variant: time-invariant R, A, Z, X, C after warm-up.
inline FormulationAudit build_convergence_formulation(std::span<const double> Y, std::size_t s,
                                                      const LsFormulationConfig& cfg) {
  const std::size_t T = std::min(cfg.T, Y.size());
  if (T < s + 2) throw WindowTooShortError("build_convergence_formulation: window must hold at least s + 2 observations");
  FormulationAudit a;
  auto& vars = a.problem.variables;
  auto X = [](VarId id) { return Polynomial::variable(id); };
  const VarId G = vars.add("G"), F = vars.add("F"), W = vars.add("W"), v = vars.add("v");
  const VarId R = vars.add("R"), A = vars.add("A"), Z = vars.add("Z"), Xinv = vars.add("X"), C = vars.add("C");
  std::vector<VarId> f(T + 1);
  for (std::size_t t = s + 2; t <= T; ++t) f[t] = vars.add("f" + std::to_string(t));

  Polynomial obj;
  for (std::size_t t = s + 2; t <= T; ++t) {
    const Polynomial r = Polynomial(Y[t - 1]) - X(f[t]);
    obj += r * r;
  }
  a.problem.objective = obj;

  auto& eq = a.problem.equalities;
  eq.push_back(X(R) - X(G) * X(C) * X(G) - X(W));
  eq.push_back(X(C) - X(R) + X(A) * X(F) * X(R));
  eq.push_back(X(A) - X(R) * X(F) * X(Xinv));
  eq.push_back(X(Xinv) * (X(F) * X(R) * X(F) + X(v)) - Polynomial(1.0));
  ++a.inversion_constraints;
  eq.push_back(X(Z) - X(G) + X(G) * X(A) * X(F));
  for (std::size_t t = s + 1; t + 1 <= T; ++t) {
    Polynomial rhs = Y[t - 1] * (X(F) * X(G) * X(A));
    for (std::size_t j = 0; j < s; ++j)
      rhs += Y[t - j - 2] * (X(F) * detail::power(X(Z), j + 1) * X(G) * X(A));
    eq.push_back(X(f[t + 1]) - rhs);
    a.forecasts.emplace_back(t + 1, std::move(rhs));
  }
  detail::finish_audit(a);
  return a;
}

}  // namespace ncpop::sysid
