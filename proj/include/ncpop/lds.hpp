#pragma once

// Linear dynamical systems
//
//   phi_t = G phi_{t-1} + w_t,   w_t ~ N(0, W)
//   Y_t   = F' phi_t + v_t,      v_t ~ N(0, V)
//
// with phi_0 ~ N(m0, C0): simulation, observability, Kalman filtering and
// forecast metrics.

#include <cmath>
#include <cstdio>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncpop/random.hpp"

namespace ncpop::lds {

struct LdsModel {
  Eigen::MatrixXd G;   // n x n
  Eigen::MatrixXd F;   // n x m
  Eigen::MatrixXd W;   // n x n, PSD
  Eigen::MatrixXd V;   // m x m, PSD
  Eigen::VectorXd m0;  // n
  Eigen::MatrixXd C0;  // n x n, PSD

  [[nodiscard]] Eigen::Index state_dim() const { return G.rows(); }
  [[nodiscard]] Eigen::Index obs_dim() const { return F.cols(); }

  void validate() const {
    const auto n = G.rows();
    const auto m = F.cols();
    if (n == 0 || G.cols() != n) throw std::invalid_argument("LdsModel: G must be square and non-empty");
    if (F.rows() != n || m == 0) throw std::invalid_argument("LdsModel: F must have as many rows as G");
    if (W.rows() != n || W.cols() != n) throw std::invalid_argument("LdsModel: W must be n x n");
    if (V.rows() != m || V.cols() != m) throw std::invalid_argument("LdsModel: V must be m x m");
    if (m0.size() != n) throw std::invalid_argument("LdsModel: m0 must have length n");
    if (C0.rows() != n || C0.cols() != n) throw std::invalid_argument("LdsModel: C0 must be n x n");
    if (!G.allFinite() || !F.allFinite() || !W.allFinite() || !V.allFinite() || !m0.allFinite() || !C0.allFinite())
      throw std::invalid_argument("LdsModel: entries must be finite");
    check_psd(W, "W");
    check_psd(V, "V");
    check_psd(C0, "C0");
  }

 private:
  static void check_psd(const Eigen::MatrixXd& M, const char* name) {
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10)
      throw std::invalid_argument(std::string("LdsModel: ") + name + " is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw std::invalid_argument(std::string("LdsModel: ") + name + " is not positive semidefinite");
  }
};

/// Two-dimensional system with G = [[0.99, 0], [1, 0.2]], F' = [1, 0.8],
/// m0 = (1, 1), isotropic process noise and scalar observation noise.
inline LdsModel hazan_model(double std_w = 0.0, double std_v = 0.0) {
  LdsModel m;
  m.G.resize(2, 2);
  m.G << 0.99, 0.0, 1.0, 0.2;
  m.F.resize(2, 1);
  m.F << 1.0, 0.8;
  m.W = std_w * std_w * Eigen::MatrixXd::Identity(2, 2);
  m.V = Eigen::MatrixXd::Constant(1, 1, std_v * std_v);
  m.m0 = Eigen::Vector2d(1.0, 1.0);
  m.C0 = Eigen::MatrixXd::Zero(2, 2);
  return m;
}

/// One-dimensional system phi_t = g phi_{t-1} + w_t, Y_t = f phi_t + v_t.
inline LdsModel scalar_model(double g, double f, double var_w, double var_v, double m0, double c0 = 0.0) {
  LdsModel m;
  m.G = Eigen::MatrixXd::Constant(1, 1, g);
  m.F = Eigen::MatrixXd::Constant(1, 1, f);
  m.W = Eigen::MatrixXd::Constant(1, 1, var_w);
  m.V = Eigen::MatrixXd::Constant(1, 1, var_v);
  m.m0 = Eigen::VectorXd::Constant(1, m0);
  m.C0 = Eigen::MatrixXd::Constant(1, 1, c0);
  return m;
}

struct Trajectory {
  std::vector<Eigen::VectorXd> observations;  // Y_1 .. Y_T
  std::vector<Eigen::VectorXd> states;        // phi_0 .. phi_T (synthetic data only)
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t length() const { return observations.size(); }

  /// First component of every observation.
  [[nodiscard]] std::vector<double> scalar_observations() const {
    std::vector<double> out;
    out.reserve(observations.size());
    for (const auto& y : observations) out.push_back(y[0]);
    return out;
  }
};

namespace detail {

/// Symmetric square root factor L with L L' = S, valid for singular PSD S.
inline Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

inline Eigen::VectorXd draw(GaussianStream& rng, const Eigen::MatrixXd& factor) {
  Eigen::VectorXd z(factor.cols());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return factor * z;
}

}  // namespace detail

inline Trajectory simulate(const LdsModel& model, std::size_t T, std::uint64_t seed) {
  model.validate();
  if (T < 1) throw std::invalid_argument("simulate: T must be at least 1");
  GaussianStream rng(seed);
  const Eigen::MatrixXd LC0 = detail::psd_factor(model.C0);
  const Eigen::MatrixXd LW = detail::psd_factor(model.W);
  const Eigen::MatrixXd LV = detail::psd_factor(model.V);
  const Eigen::MatrixXd Ft = model.F.transpose();

  Trajectory tr;
  tr.seed = seed;
  tr.states.reserve(T + 1);
  tr.observations.reserve(T);
  tr.states.push_back(model.m0 + detail::draw(rng, LC0));
  for (std::size_t t = 1; t <= T; ++t) {
    Eigen::VectorXd phi = model.G * tr.states.back() + detail::draw(rng, LW);
    tr.observations.push_back(Ft * phi + detail::draw(rng, LV));
    tr.states.push_back(std::move(phi));
  }
  return tr;
}

struct Observability {
  Eigen::MatrixXd matrix;  // [F'; F'G; ...; F'G^{n-1}]
  int rank = 0;
  bool observable = false;
};

inline Observability observability_matrix(const LdsModel& model, double tol = 1e-8) {
  const auto n = model.state_dim();
  const auto m = model.obs_dim();
  Observability out;
  out.matrix.resize(n * m, n);
  Eigen::MatrixXd block = model.F.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    out.matrix.middleRows(j * m, m) = block;
    block = block * model.G;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(out.matrix);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (smax > 0 && s[i] > tol * std::max(1.0, smax)) ++out.rank;
  out.observable = out.rank == n;
  return out;
}

class SingularInnovationError : public std::runtime_error {
 public:
  SingularInnovationError(std::size_t step, double condition)
      : std::runtime_error("kalman_filter: innovation covariance Q_t is singular at step " + std::to_string(step) +
                           " (condition number " + std::to_string(condition) + ")"),
        step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Quantities of one filter step t.
struct KalmanStep {
  Eigen::VectorXd a;  // prior mean  G m_{t-1}
  Eigen::MatrixXd R;  // prior covariance  G C_{t-1} G' + W
  Eigen::VectorXd f;  // one-step forecast  F' a_t
  Eigen::MatrixXd Q;  // forecast covariance  F' R_t F + V
  Eigen::MatrixXd A;  // gain  R_t F Q_t^{-1}
  Eigen::VectorXd m;  // posterior mean  a_t + A_t (Y_t - f_t)
  Eigen::MatrixXd C;  // posterior covariance  (I - A_t F') R_t
};

inline constexpr double kMaxInnovationCondition = 1e12;

inline std::vector<KalmanStep> kalman_filter(const LdsModel& model, std::span<const Eigen::VectorXd> Y) {
  model.validate();
  const auto n = model.state_dim();
  const Eigen::MatrixXd Ft = model.F.transpose();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd m_prev = model.m0;
  Eigen::MatrixXd C_prev = model.C0;
  std::vector<KalmanStep> out;
  out.reserve(Y.size());
  for (std::size_t t = 0; t < Y.size(); ++t) {
    if (Y[t].size() != model.obs_dim()) throw std::invalid_argument("kalman_filter: observation dimension mismatch");
    KalmanStep s;
    s.a = model.G * m_prev;
    s.R = model.G * C_prev * model.G.transpose() + model.W;
    s.f = Ft * s.a;
    s.Q = Ft * s.R * model.F + model.V;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(s.Q);
    const auto& sv = svd.singularValues();
    const double cond = sv[sv.size() - 1] > 0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
    if (!std::isfinite(cond) || cond > kMaxInnovationCondition) throw SingularInnovationError(t + 1, cond);

    // A Q = R F, solved as Q' A' = (R F)'
    s.A = s.Q.transpose().partialPivLu().solve((s.R * model.F).transpose()).transpose();
    s.m = s.a + s.A * (Y[t] - s.f);
    s.C = (I - s.A * Ft) * s.R;
    s.C = 0.5 * (s.C + s.C.transpose());
    m_prev = s.m;
    C_prev = s.C;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<KalmanStep> kalman_filter(const LdsModel& model, std::span<const double> Y) {
  std::vector<Eigen::VectorXd> obs;
  obs.reserve(Y.size());
  for (double y : Y) obs.push_back(Eigen::VectorXd::Constant(1, y));
  return kalman_filter(model, std::span<const Eigen::VectorXd>(obs));
}

class UndefinedMetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// 1 - |Y - f|_2 / |Y - mean(Y)|_2
inline double nrmse(std::span<const double> Y, std::span<const double> f) {
  if (Y.size() != f.size()) throw std::invalid_argument("nrmse: sequences differ in length");
  if (Y.size() < 2) throw std::invalid_argument("nrmse: at least two observations required");
  const double mean = std::accumulate(Y.begin(), Y.end(), 0.0) / static_cast<double>(Y.size());
  double err = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    err += (Y[i] - f[i]) * (Y[i] - f[i]);
    spread += (Y[i] - mean) * (Y[i] - mean);
  }
  if (spread == 0.0) throw UndefinedMetricError("nrmse: observations are constant, metric undefined");
  return 1.0 - std::sqrt(err) / std::sqrt(spread);
}

// ---------------------------------------------------------------------------
// Series CSV: header `t,y`, one row per step.

class CsvParseError : public std::runtime_error {
 public:
  CsvParseError(std::size_t line, const std::string& what)
      : std::runtime_error("CSV line " + std::to_string(line) + ": " + what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct SeriesPoint {
  double t = 0.0;
  double y = 0.0;
};

inline void write_series_csv(std::ostream& os, std::span<const double> y) {
  os << "t,y\n";
  char buf[64];
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", y[i]);
    os << i + 1 << "," << buf << "\n";
  }
}

inline std::vector<SeriesPoint> read_series_csv(std::istream& is) {
  std::vector<SeriesPoint> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      header_seen = true;
      std::string h;
      for (char c : line)
        if (c != ' ' && c != '\t') h += c;
      if (h != "t,y") throw CsvParseError(lineno, "expected header `t,y`, found `" + line + "`");
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos)
      throw CsvParseError(lineno, "expected two comma-separated fields");
    auto parse = [&](const std::string& field, const char* name) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(field, &used);
      } catch (const std::exception&) {
        throw CsvParseError(lineno, std::string("field `") + name + "` is not a number");
      }
      if (field.find_first_not_of(" \t", used) != std::string::npos)
        throw CsvParseError(lineno, std::string("trailing characters in field `") + name + "`");
      return v;
    };
    out.push_back({parse(line.substr(0, comma), "t"), parse(line.substr(comma + 1), "y")});
  }
  if (!header_seen) throw CsvParseError(0, "empty input");
  return out;
}

}  // namespace ncpop::lds
