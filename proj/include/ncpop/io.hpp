#pragma once

// JSON documents for models, identification settings and results. Models use
// the keys G, F, W, v (observation-noise covariance), m0 and C0.

#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ncpop/lds.hpp"
#include "ncpop/npa.hpp"
#include "ncpop/sdp.hpp"
#include "ncpop/sysid.hpp"

namespace ncpop::io {

using nlohmann::json;

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Eigen::MatrixXd matrix_from_json(const json& j, const std::string& name) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw std::invalid_argument("model field `" + name + "` must be a non-empty array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 1);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (row.is_number()) {
      if (cols != 1) throw std::invalid_argument("model field `" + name + "` has ragged rows");
      m(i, 0) = row.get<double>();
      continue;
    }
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("model field `" + name + "` has ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

inline json vector_to_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline json model_to_json(const lds::LdsModel& m) {
  return {{"G", matrix_to_json(m.G)},   {"F", matrix_to_json(m.F)},   {"W", matrix_to_json(m.W)},
          {"v", matrix_to_json(m.V)},   {"m0", vector_to_json(m.m0)}, {"C0", matrix_to_json(m.C0)}};
}

/// Accepts either explicit matrices or {"preset": "hazan", "std_w": .., "std_v": ..}.
/// W, v and C0 default to zero and m0 to the zero vector.
inline lds::LdsModel model_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("model document must be a JSON object");
  if (j.contains("preset")) {
    const auto name = j.at("preset").get<std::string>();
    if (name != "hazan") throw std::invalid_argument("unknown model preset `" + name + "`");
    return lds::hazan_model(j.value("std_w", 0.0), j.value("std_v", 0.0));
  }
  if (!j.contains("G") || !j.contains("F")) throw std::invalid_argument("model document needs `G` and `F`");
  lds::LdsModel m;
  m.G = matrix_from_json(j.at("G"), "G");
  m.F = matrix_from_json(j.at("F"), "F");
  const auto n = m.G.rows();
  const auto k = m.F.cols();
  m.W = j.contains("W") ? matrix_from_json(j.at("W"), "W") : Eigen::MatrixXd::Zero(n, n);
  const char* vkey = j.contains("v") ? "v" : "V";
  m.V = j.contains(vkey) ? matrix_from_json(j.at(vkey), vkey) : Eigen::MatrixXd::Zero(k, k);
  if (j.contains("m0")) {
    const Eigen::MatrixXd m0 = matrix_from_json(j.at("m0"), "m0");
    if (m0.cols() != 1) throw std::invalid_argument("model field `m0` must be a vector");
    m.m0 = m0.col(0);
  } else {
    m.m0 = Eigen::VectorXd::Zero(n);
  }
  m.C0 = j.contains("C0") ? matrix_from_json(j.at("C0"), "C0") : Eigen::MatrixXd::Zero(n, n);
  m.validate();
  return m;
}

inline EqualityMode equality_mode_from_string(const std::string& s) {
  if (s == "exact_rows" || s == "exact") return EqualityMode::exact_rows;
  if (s == "inequality_pairs" || s == "pairs") return EqualityMode::inequality_pairs;
  throw std::invalid_argument("unknown equality mode `" + s + "`");
}

inline sysid::Sparsity sparsity_from_string(const std::string& s) {
  if (s == "dense") return sysid::Sparsity::dense;
  if (s == "cliques" || s == "clique") return sysid::Sparsity::cliques;
  throw std::invalid_argument("unknown sparsity `" + s + "`");
}

inline json config_to_json(const sysid::LsFormulationConfig& c) {
  json j{{"T", c.T},
         {"order", c.order},
         {"archimedean", c.archimedean},
         {"equality_mode", sysid::to_string(c.equality_mode)},
         {"sparsity", sysid::to_string(c.sparsity)},
         {"tol", c.solver.tol},
         {"max_iter", c.solver.max_iter},
         {"time_limit", c.solver.time_limit_seconds},
         {"rank_tol", c.rank_tol}};
  j["c1"] = c.c1 ? json(*c.c1) : json(nullptr);
  j["c2"] = c.c2 ? json(*c.c2) : json(nullptr);
  j["ball_radius"] = c.ball_radius ? json(*c.ball_radius) : json(nullptr);
  return j;
}

inline sysid::LsFormulationConfig config_from_json(const json& j, sysid::LsFormulationConfig c = {}) {
  if (!j.is_object()) throw std::invalid_argument("config document must be a JSON object");
  auto opt = [&](const char* key, std::optional<double>& field) {
    if (j.contains(key)) field = j.at(key).is_null() ? std::nullopt : std::optional<double>(j.at(key).get<double>());
  };
  opt("c1", c.c1);
  opt("c2", c.c2);
  opt("ball_radius", c.ball_radius);
  if (j.contains("T")) c.T = j.at("T").get<std::size_t>();
  if (j.contains("order")) c.order = j.at("order").get<int>();
  if (j.contains("archimedean")) c.archimedean = j.at("archimedean").get<bool>();
  if (j.contains("equality_mode")) c.equality_mode = equality_mode_from_string(j.at("equality_mode"));
  if (j.contains("sparsity")) c.sparsity = sparsity_from_string(j.at("sparsity"));
  if (j.contains("tol")) c.solver.tol = j.at("tol").get<double>();
  if (j.contains("max_iter")) c.solver.max_iter = j.at("max_iter").get<int>();
  if (j.contains("time_limit")) c.solver.time_limit_seconds = j.at("time_limit").get<double>();
  if (j.contains("rank_tol")) c.rank_tol = j.at("rank_tol").get<double>();
  c.validate();
  return c;
}

/// Non-finite numbers become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json solution_to_json(const sdp::SdpSolution& s) {
  json j{{"status", sdp::to_string(s.status)},
         {"objective", number(s.objective_value)},
         {"primal_residual", number(s.primal_residual)},
         {"dual_residual", number(s.dual_residual)},
         {"gap", number(s.gap)},
         {"eigenvalue_floor", number(s.eigenvalue_floor)},
         {"iterations", s.iterations},
         {"seconds", s.solve_seconds},
         {"y", vector_to_json(s.y)}};
  if (!s.infeasibility.empty()) j["infeasibility"] = s.infeasibility;
  return j;
}

inline json extraction_to_json(const ExtractionReport& r) {
  return {{"flat", r.flat},
          {"rank_Mk", r.rank_Mk},
          {"rank_Mk_minus_d", r.rank_Mk_minus_d},
          {"singular_value_gap", r.singular_value_gap},
          {"certified_lower_bound", r.certified_lower_bound},
          {"first_order_moments", r.first_order_moments}};
}

inline json result_to_json(const sysid::IdentificationResult& r) {
  json j{{"G_hat", r.G_hat},
         {"F_hat", r.F_hat},
         {"m_hat", r.m_hat},
         {"f_hat", r.f_hat},
         {"w_hat", r.w_hat},
         {"v_hat", r.v_hat},
         {"Y", r.Y},
         {"lower_bound", r.lower_bound},
         {"nrmse", number(r.nrmse_fit)},
         {"heuristic_extraction", r.heuristic_extraction},
         {"extraction", extraction_to_json(r.extraction)},
         {"c1", r.c1},
         {"c2", r.c2},
         {"moment_variables", r.moment_variables},
         {"solver",
          {{"status", sdp::to_string(r.solver_status)},
           {"iterations", r.solver_iterations},
           {"primal_residual", r.primal_residual},
           {"dual_residual", r.dual_residual},
           {"gap", r.gap}}},
         {"seconds", r.wall_time}};
  j["ball_radius"] = r.ball_radius ? json(*r.ball_radius) : json(nullptr);
  return j;
}

}  // namespace ncpop::io
