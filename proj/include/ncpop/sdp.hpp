#pragma once

// Semidefinite programs in LMI form
//
//   minimize    c'y + offset
//   subject to  F0 + sum_j y_j Fj  >= 0   (block diagonal, one LMI per block)
//               A y = b
//
// solved by an operator-splitting (ADMM) iteration over the conic form
// A_cone y + s = b_cone, s in {0}^p x PSD. Each iteration performs one sparse
// LDL' back-solve and one symmetric eigendecomposition per block.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace ncpop::sdp {

/// Variable index used for entries of the constant matrix F0.
inline constexpr int kConstant = -1;

struct BlockEntry {
  int var = kConstant;
  int row = 0;  // row <= col; the symmetric counterpart is implied
  int col = 0;
  double value = 0.0;
};

struct LmiBlock {
  int dim = 0;
  std::vector<BlockEntry> entries;
};

struct LinearRow {
  std::vector<std::pair<int, double>> coeffs;
  double rhs = 0.0;
};

struct SdpProblem {
  int num_vars = 0;
  std::vector<LmiBlock> blocks;
  std::vector<LinearRow> equalities;
  Eigen::VectorXd objective;
  double objective_offset = 0.0;

  void validate() const {
    if (num_vars < 0) throw std::invalid_argument("SdpProblem: negative variable count");
    if (objective.size() != num_vars)
      throw std::invalid_argument("SdpProblem: objective length does not match num_vars");
    for (const auto& b : blocks) {
      if (b.dim <= 0) throw std::invalid_argument("SdpProblem: block dimension must be positive");
      for (const auto& e : b.entries) {
        if (e.row < 0 || e.col < 0 || e.row >= b.dim || e.col >= b.dim)
          throw std::invalid_argument("SdpProblem: block entry out of range");
        if (e.row > e.col) throw std::invalid_argument("SdpProblem: block entries must satisfy row <= col");
        if (e.var < kConstant || e.var >= num_vars)
          throw std::invalid_argument("SdpProblem: block entry references unknown variable");
      }
    }
    for (const auto& r : equalities)
      for (const auto& [j, v] : r.coeffs)
        if (j < 0 || j >= num_vars) throw std::invalid_argument("SdpProblem: equality references unknown variable");
  }

  /// Dense value of block b at y.
  [[nodiscard]] Eigen::MatrixXd block_value(std::size_t b, const Eigen::VectorXd& y) const {
    const auto& blk = blocks.at(b);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(blk.dim, blk.dim);
    for (const auto& e : blk.entries) {
      const double v = e.var == kConstant ? e.value : e.value * y[e.var];
      m(e.row, e.col) += v;
      if (e.row != e.col) m(e.col, e.row) += v;
    }
    return m;
  }
};

enum class Status { optimal, max_iterations, infeasible_detected, time_limit };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::optimal: return "optimal";
    case Status::max_iterations: return "max_iterations";
    case Status::infeasible_detected: return "infeasible_detected";
    case Status::time_limit: return "time_limit";
  }
  return "unknown";
}

struct SolverOptions {
  double tol = 1e-6;
  int max_iter = 200000;
  double over_relaxation = 1.5;
  double rho = 0.1;
  double sigma = 1e-6;
  double equality_rho_factor = 1e3;
  bool adaptive_rho = true;
  int check_every = 20;
  int scaling_iterations = 15;
  double infeasibility_tol = 1e-7;
  double time_limit_seconds = 0.0;  // 0 disables the limit
};

struct SdpSolution {
  Eigen::VectorXd y;
  double objective_value = 0.0;
  // Residuals are normalized: |r|_inf / (1 + scale of the terms involved).
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double gap = 0.0;
  // min over blocks of lambda_min(F(y)) / (1 + max|F(y)_ij|)
  double eigenvalue_floor = 0.0;
  Status status = Status::max_iterations;
  std::string infeasibility;  // "primal" or "dual" when status == infeasible_detected
  int iterations = 0;
  double solve_seconds = 0.0;
};

/// Nearest positive semidefinite matrix in Frobenius norm (negative eigenvalues clipped).
inline Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("project_psd: matrix must be square");
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  Eigen::MatrixXd out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

namespace detail {

inline constexpr double kSqrt2 = 1.4142135623730951;

inline std::size_t svec_size(int dim) { return static_cast<std::size_t>(dim) * (dim + 1) / 2; }
inline std::size_t svec_index(int row, int col) {
  // row <= col, upper triangle stored column by column
  return static_cast<std::size_t>(col) * (col + 1) / 2 + row;
}

struct Cone {
  std::size_t zero_rows = 0;
  std::vector<int> dims;
  std::vector<std::size_t> offsets;  // first row of each PSD block
};

inline void svec_to_matrix(const double* v, int dim, Eigen::MatrixXd& m) {
  m.resize(dim, dim);
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i <= j; ++i) {
      const double x = v[svec_index(i, j)];
      if (i == j) {
        m(i, i) = x;
      } else {
        m(i, j) = x / kSqrt2;
        m(j, i) = x / kSqrt2;
      }
    }
}

inline void matrix_to_svec(const Eigen::MatrixXd& m, double* v) {
  const int dim = static_cast<int>(m.rows());
  for (int j = 0; j < dim; ++j)
    for (int i = 0; i <= j; ++i) v[svec_index(i, j)] = i == j ? m(i, i) : kSqrt2 * 0.5 * (m(i, j) + m(j, i));
}

inline void project_svec_psd(double* v, int dim, Eigen::MatrixXd& work) {
  if (dim == 1) {
    v[0] = std::max(v[0], 0.0);
    return;
  }
  svec_to_matrix(v, dim, work);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work);
  const auto& ev = es.eigenvalues();
  if (ev.minCoeff() >= 0.0) return;
  if (ev.maxCoeff() <= 0.0) {
    std::fill(v, v + svec_size(dim), 0.0);
    return;
  }
  const Eigen::VectorXd clipped = ev.cwiseMax(0.0);
  work.noalias() = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
  matrix_to_svec(work, v);
}

inline double svec_min_eigenvalue(const double* v, int dim, Eigen::MatrixXd& work) {
  if (dim == 1) return v[0];
  svec_to_matrix(v, dim, work);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(work, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

struct ConicForm {
  Eigen::SparseMatrix<double> A;  // m x n
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  Cone cone;
};

inline ConicForm to_conic(const SdpProblem& p) {
  ConicForm f;
  f.cone.zero_rows = p.equalities.size();
  std::size_t rows = f.cone.zero_rows;
  for (const auto& blk : p.blocks) {
    f.cone.offsets.push_back(rows);
    f.cone.dims.push_back(blk.dim);
    rows += svec_size(blk.dim);
  }
  f.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t r = 0; r < p.equalities.size(); ++r) {
    for (const auto& [j, v] : p.equalities[r].coeffs) trip.emplace_back(static_cast<int>(r), j, v);
    f.b[static_cast<Eigen::Index>(r)] = p.equalities[r].rhs;
  }
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    for (const auto& e : p.blocks[bi].entries) {
      const auto row = static_cast<int>(f.cone.offsets[bi] + svec_index(e.row, e.col));
      const double scale = e.row == e.col ? 1.0 : kSqrt2;
      if (e.var == kConstant)
        f.b[row] += scale * e.value;
      else
        trip.emplace_back(row, e.var, -scale * e.value);
    }
  }
  f.A.resize(static_cast<Eigen::Index>(rows), p.num_vars);
  f.A.setFromTriplets(trip.begin(), trip.end());
  f.A.makeCompressed();
  f.c = p.objective;
  return f;
}

inline double inf_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace detail

/// Solves the LMI-form program. Deterministic: identical inputs produce
/// identical iterate sequences.
inline SdpSolution solve(const SdpProblem& problem, const SolverOptions& opt = {}) {
  using Eigen::Index;
  using Eigen::VectorXd;
  using SpMat = Eigen::SparseMatrix<double>;
  if (opt.tol <= 0.0) throw std::invalid_argument("solve: tol must be positive");
  problem.validate();
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  const detail::ConicForm conic = detail::to_conic(problem);
  const Index n = problem.num_vars;
  const Index m = conic.A.rows();
  const auto& cone = conic.cone;
  const auto nzero = static_cast<Index>(cone.zero_rows);

  SdpSolution sol;
  if (n == 0) {
    sol.y = VectorXd::Zero(0);
    sol.objective_value = problem.objective_offset;
    Eigen::MatrixXd work;
    double floor = std::numeric_limits<double>::infinity();
    for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
      const Eigen::MatrixXd fb = problem.block_value(b, sol.y);
      const double lam = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fb, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
      floor = std::min(floor, lam / (1.0 + fb.cwiseAbs().maxCoeff()));
    }
    sol.eigenvalue_floor = std::isfinite(floor) ? floor : 0.0;
    sol.status = sol.eigenvalue_floor >= -opt.tol && detail::inf_norm(conic.b.head(nzero)) <= opt.tol
                     ? Status::optimal
                     : Status::infeasible_detected;
    if (sol.status == Status::infeasible_detected) sol.infeasibility = "primal";
    return sol;
  }

  // Ruiz equilibration. Rows of one PSD block share a single factor so the
  // cone is preserved.
  VectorXd D = VectorXd::Ones(m);
  VectorXd E = VectorXd::Ones(n);
  SpMat As = conic.A;
  auto clamp_norm = [](double v) { return std::clamp(v, 1e-4, 1e4); };
  for (int it = 0; it < opt.scaling_iterations; ++it) {
    VectorXd row_norm = VectorXd::Zero(m);
    VectorXd col_norm = VectorXd::Zero(n);
    for (Index k = 0; k < As.outerSize(); ++k)
      for (SpMat::InnerIterator iter(As, k); iter; ++iter) {
        const double a = std::abs(iter.value());
        row_norm[iter.row()] = std::max(row_norm[iter.row()], a);
        col_norm[iter.col()] = std::max(col_norm[iter.col()], a);
      }
    VectorXd dr(m);
    for (Index r = 0; r < nzero; ++r) dr[r] = row_norm[r] > 0 ? 1.0 / std::sqrt(clamp_norm(row_norm[r])) : 1.0;
    for (std::size_t bi = 0; bi < cone.dims.size(); ++bi) {
      const auto off = static_cast<Index>(cone.offsets[bi]);
      const auto len = static_cast<Index>(detail::svec_size(cone.dims[bi]));
      const double nrm = row_norm.segment(off, len).maxCoeff();
      dr.segment(off, len).setConstant(nrm > 0 ? 1.0 / std::sqrt(clamp_norm(nrm)) : 1.0);
    }
    VectorXd dc(n);
    for (Index j = 0; j < n; ++j) dc[j] = col_norm[j] > 0 ? 1.0 / std::sqrt(clamp_norm(col_norm[j])) : 1.0;
    As = dr.asDiagonal() * As * dc.asDiagonal();
    D = D.cwiseProduct(dr);
    E = E.cwiseProduct(dc);
  }
  As.makeCompressed();
  const SpMat AsT = As.transpose();
  const VectorXd bs = D.cwiseProduct(conic.b);
  VectorXd cs = E.cwiseProduct(conic.c);
  const double c_norm = detail::inf_norm(cs);
  const double cost_scale = c_norm > 0 ? std::clamp(1.0 / c_norm, 1e-4, 1e4) : 1.0;
  cs *= cost_scale;

  const double b_unscaled_norm = detail::inf_norm(conic.b);
  const double c_unscaled_norm = detail::inf_norm(conic.c);

  double rho = opt.rho;
  VectorXd R(m);
  auto set_rho = [&](double r) {
    rho = r;
    R.head(nzero).setConstant(r * opt.equality_rho_factor);
    R.tail(m - nzero).setConstant(r);
  };
  set_rho(rho);

  Eigen::SimplicialLDLT<SpMat> ldlt;
  auto factorize = [&] {
    SpMat K = AsT * R.asDiagonal() * As;
    for (Index j = 0; j < n; ++j) K.coeffRef(j, j) += opt.sigma;
    K.makeCompressed();
    ldlt.compute(K);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("solve: KKT factorization failed");
  };
  factorize();

  VectorXd x = VectorXd::Zero(n), z = VectorXd::Zero(m), yd = VectorXd::Zero(m);
  VectorXd x_prev = x, yd_prev = yd;
  VectorXd xt(n), zt(m), zh(m), v(m), rhs(n);
  Eigen::MatrixXd work;

  auto project_cone_complement = [&](VectorXd& w) {
    // w <- b - Pi_K(b - w)
    VectorXd s = bs - w;
    s.head(nzero).setZero();
    for (std::size_t bi = 0; bi < cone.dims.size(); ++bi)
      detail::project_svec_psd(s.data() + cone.offsets[bi], cone.dims[bi], work);
    w = bs - s;
  };

  const double alpha = opt.over_relaxation;
  int iter = 0;
  Status status = Status::max_iterations;
  std::string infeasibility;

  double prim_res = 0, dual_res = 0, gap = 0;
  auto compute_unscaled = [&](VectorXd& xu, VectorXd& yu) {
    xu = E.cwiseProduct(x);
    yu = D.cwiseProduct(yd) / cost_scale;
    const VectorXd zu = z.cwiseQuotient(D);
    const VectorXd Ax = conic.A * xu;
    const VectorXd ATy = conic.A.transpose() * yu;
    prim_res = detail::inf_norm(Ax - zu) / (1.0 + std::max(detail::inf_norm(Ax), detail::inf_norm(zu)));
    dual_res = detail::inf_norm(conic.c + ATy) / (1.0 + std::max(c_unscaled_norm, detail::inf_norm(ATy)));
    const double pobj = conic.c.dot(xu);
    const double dobj = -conic.b.dot(yu);
    gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
  };

  auto certifies_primal_infeasible = [&]() {
    VectorXd w = D.cwiseProduct(yd - yd_prev);
    const double wn = detail::inf_norm(w);
    if (wn < 1e-12) return false;
    w /= wn;
    if (detail::inf_norm(conic.A.transpose() * w) > opt.infeasibility_tol * (1.0 + c_unscaled_norm)) return false;
    if (conic.b.dot(w) >= -opt.infeasibility_tol * std::max(1.0, b_unscaled_norm)) return false;
    for (std::size_t bi = 0; bi < cone.dims.size(); ++bi)
      if (detail::svec_min_eigenvalue(w.data() + cone.offsets[bi], cone.dims[bi], work) < -1e-6) return false;
    return true;
  };
  auto certifies_dual_infeasible = [&]() {
    VectorXd dx = E.cwiseProduct(x - x_prev);
    const double dn = detail::inf_norm(dx);
    if (dn < 1e-12) return false;
    dx /= dn;
    if (conic.c.dot(dx) >= -opt.infeasibility_tol * std::max(1.0, c_unscaled_norm)) return false;
    VectorXd s = -(conic.A * dx);
    if (detail::inf_norm(s.head(nzero)) > opt.infeasibility_tol) return false;
    for (std::size_t bi = 0; bi < cone.dims.size(); ++bi)
      if (detail::svec_min_eigenvalue(s.data() + cone.offsets[bi], cone.dims[bi], work) < -1e-6) return false;
    return true;
  };

  VectorXd xu, yu;
  int next_rho_update = 100;
  for (iter = 1; iter <= opt.max_iter; ++iter) {
    x_prev = x;
    yd_prev = yd;
    rhs = opt.sigma * x - cs + AsT * (R.cwiseProduct(z) - yd);
    xt = ldlt.solve(rhs);
    zt = As * xt;
    x = alpha * xt + (1.0 - alpha) * x;
    zh = alpha * zt + (1.0 - alpha) * z;
    v = zh + yd.cwiseQuotient(R);
    project_cone_complement(v);
    yd += R.cwiseProduct(zh - v);
    z = v;

    if (iter % opt.check_every != 0 && iter != opt.max_iter) continue;

    compute_unscaled(xu, yu);
    if (prim_res <= opt.tol && dual_res <= opt.tol && gap <= opt.tol) {
      status = Status::optimal;
      break;
    }
    if (certifies_primal_infeasible()) {
      status = Status::infeasible_detected;
      infeasibility = "primal";
      break;
    }
    if (certifies_dual_infeasible()) {
      status = Status::infeasible_detected;
      infeasibility = "dual";
      break;
    }
    if (opt.time_limit_seconds > 0 && elapsed() > opt.time_limit_seconds) {
      status = Status::time_limit;
      break;
    }
    if (opt.adaptive_rho && iter >= next_rho_update) {
      const VectorXd Ax = As * x;
      const VectorXd ATy = AsT * yd;
      const double p_scale = std::max({detail::inf_norm(Ax), detail::inf_norm(z), 1e-10});
      const double d_scale = std::max({detail::inf_norm(cs), detail::inf_norm(ATy), 1e-10});
      const double rp = detail::inf_norm(Ax - z) / p_scale;
      const double rd = detail::inf_norm(cs + ATy) / d_scale;
      if (rp > 0 && rd > 0) {
        const double proposed = std::clamp(rho * std::sqrt(rp / rd), 1e-6, 1e6);
        if (proposed > 5.0 * rho || proposed < 0.2 * rho) {
          set_rho(proposed);
          factorize();
        }
      }
      next_rho_update = iter + std::max(100, iter / 4);
    }
  }
  if (iter > opt.max_iter) iter = opt.max_iter;

  compute_unscaled(xu, yu);
  sol.y = xu;
  sol.objective_value = conic.c.dot(xu) + problem.objective_offset;
  sol.primal_residual = prim_res;
  sol.dual_residual = dual_res;
  sol.gap = gap;
  sol.status = status;
  sol.infeasibility = infeasibility;
  sol.iterations = iter;

  double floor = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < problem.blocks.size(); ++b) {
    const Eigen::MatrixXd fb = problem.block_value(b, xu);
    const double lam = fb.rows() == 1
                           ? fb(0, 0)
                           : Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(fb, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
    floor = std::min(floor, lam / (1.0 + fb.cwiseAbs().maxCoeff()));
  }
  sol.eigenvalue_floor = std::isfinite(floor) ? floor : 0.0;
  sol.solve_seconds = elapsed();
  return sol;
}

// ---------------------------------------------------------------------------
// SDPA sparse format.
//
// SDPA states the primal as  min c'x  s.t.  sum_i F_i x_i - F_0 >= 0, so our
// constant matrix is written with flipped sign. Equalities a'y = b become a
// diagonal (LP) block holding the pair a'y - b >= 0, -a'y + b >= 0. The
// objective offset travels in a `*` comment line.

inline void write_sdpa(const SdpProblem& p, std::ostream& os) {
  p.validate();
  os.precision(17);
  os << "* ncpop SDPA export\n";
  os << "* objective_offset " << p.objective_offset << "\n";
  os << p.num_vars << "\n";
  const bool has_lp = !p.equalities.empty();
  os << p.blocks.size() + (has_lp ? 1 : 0) << "\n";
  for (const auto& b : p.blocks) os << b.dim << " ";
  if (has_lp) os << -static_cast<long>(2 * p.equalities.size());
  os << "\n";
  for (int j = 0; j < p.num_vars; ++j) os << p.objective[j] << (j + 1 < p.num_vars ? " " : "");
  os << "\n";
  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi)
    for (const auto& e : p.blocks[bi].entries) {
      const double v = e.var == kConstant ? -e.value : e.value;
      if (v == 0.0) continue;
      os << e.var + 1 << " " << bi + 1 << " " << e.row + 1 << " " << e.col + 1 << " " << v << "\n";
    }
  if (has_lp) {
    const auto lp_block = p.blocks.size() + 1;
    for (std::size_t r = 0; r < p.equalities.size(); ++r) {
      const auto& row = p.equalities[r];
      const auto pos = 2 * r + 1;
      const auto neg = 2 * r + 2;
      if (row.rhs != 0.0) {
        os << 0 << " " << lp_block << " " << pos << " " << pos << " " << row.rhs << "\n";
        os << 0 << " " << lp_block << " " << neg << " " << neg << " " << -row.rhs << "\n";
      }
      for (const auto& [j, a] : row.coeffs) {
        os << j + 1 << " " << lp_block << " " << pos << " " << pos << " " << a << "\n";
        os << j + 1 << " " << lp_block << " " << neg << " " << neg << " " << -a << "\n";
      }
    }
  }
}

/// Reads SDPA sparse input. LP (negative-size) blocks become 1x1 blocks.
inline SdpProblem read_sdpa(std::istream& is) {
  SdpProblem p;
  std::string line;
  std::vector<std::string> payload;
  while (std::getline(is, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '"' || line[first] == '*') {
      std::istringstream cs(line.substr(first + 1));
      std::string key;
      double val = 0.0;
      if (cs >> key && key == "objective_offset" && cs >> val) p.objective_offset = val;
      continue;
    }
    for (char& ch : line)
      if (ch == ',' || ch == '{' || ch == '}' || ch == '(' || ch == ')') ch = ' ';
    payload.push_back(line);
  }
  std::istringstream in;
  std::string joined;
  for (const auto& l : payload) joined += l + "\n";
  in.str(joined);

  long m = 0, nblocks = 0;
  if (!(in >> m >> nblocks) || m < 0 || nblocks < 0) throw std::runtime_error("read_sdpa: malformed header");
  std::vector<long> sizes(static_cast<std::size_t>(nblocks));
  for (auto& s : sizes)
    if (!(in >> s) || s == 0) throw std::runtime_error("read_sdpa: malformed block structure");
  p.num_vars = static_cast<int>(m);
  p.objective = Eigen::VectorXd::Zero(m);
  for (long j = 0; j < m; ++j)
    if (!(in >> p.objective[j])) throw std::runtime_error("read_sdpa: malformed objective vector");

  // Map SDPA block -> our blocks. LP blocks expand into 1x1 blocks.
  std::vector<std::size_t> first_block(sizes.size());
  for (std::size_t b = 0; b < sizes.size(); ++b) {
    first_block[b] = p.blocks.size();
    if (sizes[b] > 0) {
      p.blocks.push_back({static_cast<int>(sizes[b]), {}});
    } else {
      for (long k = 0; k < -sizes[b]; ++k) p.blocks.push_back({1, {}});
    }
  }
  long matno = 0, blkno = 0, i = 0, j = 0;
  double val = 0.0;
  while (in >> matno >> blkno >> i >> j >> val) {
    if (matno < 0 || matno > m || blkno < 1 || blkno > nblocks)
      throw std::runtime_error("read_sdpa: entry references unknown matrix or block");
    const auto b = static_cast<std::size_t>(blkno - 1);
    const long dim = std::abs(sizes[b]);
    if (i < 1 || j < 1 || i > dim || j > dim) throw std::runtime_error("read_sdpa: entry index out of range");
    const int var = matno == 0 ? kConstant : static_cast<int>(matno - 1);
    const double v = matno == 0 ? -val : val;
    if (sizes[b] > 0) {
      p.blocks[first_block[b]].entries.push_back(
          {var, static_cast<int>(std::min(i, j) - 1), static_cast<int>(std::max(i, j) - 1), v});
    } else {
      if (i != j) throw std::runtime_error("read_sdpa: off-diagonal entry in LP block");
      p.blocks[first_block[b] + static_cast<std::size_t>(i - 1)].entries.push_back({var, 0, 0, v});
    }
  }
  if (!in.eof()) throw std::runtime_error("read_sdpa: malformed entry line");
  p.validate();
  return p;
}

}  // namespace ncpop::sdp
