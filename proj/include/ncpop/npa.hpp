#pragma once

// Moment relaxations of non-commutative polynomial optimization problems.
//
// Given  min <phi, p(X) phi>  s.t.  q_i(X) >= 0,  q_j(X) = 0,  <phi, phi> = 1,
// the order-k relaxation replaces every word w of degree <= 2k by a scalar
// moment y_w and asks the moment matrix M_k(y) and the localizing matrices
// M_{k-d_i}(q_i y) to be positive semidefinite, with y_1 = 1. Words are merged
// with their adjoints (y_w = y_{w^dagger}), which is exact for real moments.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ncpop/ncpoly.hpp"
#include "ncpop/sdp.hpp"

namespace ncpop {

class OrderTooSmallError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class EqualityMode { exact_rows, inequality_pairs };

struct Ncpop {
  VariableSet variables;
  Polynomial objective;
  std::vector<Polynomial> inequalities;  // q(X) >= 0
  std::vector<Polynomial> equalities;    // q(X) = 0
  std::optional<double> ball_radius;     // adds C^2 - sum_i X_i^dagger X_i >= 0
  // Variable cliques for the correlative-sparsity relaxation; empty means dense.
  std::vector<std::vector<VarId>> cliques;

  [[nodiscard]] std::size_t max_degree() const {
    std::size_t d = objective.degree();
    for (const auto& q : inequalities) d = std::max(d, q.degree());
    for (const auto& q : equalities) d = std::max(d, q.degree());
    return d;
  }
};

/// Words of degree <= d over every variable (adjoint partners included).
inline std::vector<Word> monomial_basis(const VariableSet& vars, std::size_t d) {
  std::vector<VarId> ids(vars.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<VarId>(i);
  return words_up_to(ids, d);
}

/// Sparse linear form over moment classes, sorted by class index.
using LinearForm = std::vector<std::pair<int, double>>;

class MomentIndex {
 public:
  MomentIndex() = default;
  MomentIndex(const VariableSet* vars, int order) : vars_(vars), order_(order) { intern(Word{}); }

  [[nodiscard]] int order() const { return order_; }
  [[nodiscard]] std::size_t size() const { return classes_.size(); }
  /// Representative (graded-lex smaller of w, w^dagger) of each class.
  [[nodiscard]] const std::vector<Word>& classes() const { return classes_; }

  int intern(const Word& w) {
    Word rep = moment_class_representative(w, *vars_);
    auto it = index_.find(rep);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(classes_.size());
    index_.emplace(rep, id);
    classes_.push_back(std::move(rep));
    return id;
  }

  /// Class of w, or -1 if no relaxation entry references it.
  [[nodiscard]] int find(const Word& w) const {
    auto it = index_.find(moment_class_representative(w, *vars_));
    return it == index_.end() ? -1 : it->second;
  }

 private:
  const VariableSet* vars_ = nullptr;
  int order_ = 0;
  std::vector<Word> classes_;
  std::unordered_map<Word, int, WordHash> index_;
};

class SymbolicMatrix {
 public:
  SymbolicMatrix() = default;
  SymbolicMatrix(std::vector<Word> basis, std::vector<LinearForm> entries)
      : basis_(std::move(basis)), entries_(std::move(entries)) {}

  [[nodiscard]] int dim() const { return static_cast<int>(basis_.size()); }
  [[nodiscard]] const std::vector<Word>& basis() const { return basis_; }
  [[nodiscard]] const LinearForm& at(int i, int j) const {
    return entries_[static_cast<std::size_t>(i) * basis_.size() + static_cast<std::size_t>(j)];
  }

  [[nodiscard]] Eigen::MatrixXd evaluate(const Eigen::VectorXd& moments) const {
    const int n = dim();
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = 0.0;
        for (const auto& [cls, c] : at(i, j)) v += c * moments[cls];
        m(i, j) = v;
      }
    return m;
  }

 private:
  std::vector<Word> basis_;
  std::vector<LinearForm> entries_;
};

struct MomentBlock {
  std::vector<VarId> clique;
  SymbolicMatrix matrix;
};

struct LocalizingBlock {
  std::string source;  // e.g. "inequality 2", "ball", "equality 0 (+)"
  int order = 0;
  SymbolicMatrix matrix;
};

struct ScalarEquality {
  LinearForm form;  // form(y) = 0, class 0 contributes a constant
  std::size_t source = 0;
};

struct MomentRelaxation {
  int order = 1;
  // Highest half-degree over the constraints, at least one; M_{order - flat_shift}
  // is the comparison matrix of the rank loop.
  int flat_shift = 1;
  MomentIndex moments;
  std::vector<MomentBlock> moment_matrices;
  std::vector<LocalizingBlock> localizing;
  std::vector<ScalarEquality> scalar_equalities;
  // Hermitian part of every equality at its localizing order, for the
  // pair-of-inequalities encoding.
  std::vector<LocalizingBlock> equality_localizing;
  LinearForm objective;
  std::optional<double> ball_radius;
  // Owned copy so the moment index can keep a stable pointer to the alphabet.
  std::shared_ptr<const VariableSet> variables;
};

namespace detail {

inline void normalize(LinearForm& f) {
  std::sort(f.begin(), f.end());
  LinearForm out;
  for (const auto& [cls, c] : f) {
    if (!out.empty() && out.back().first == cls)
      out.back().second += c;
    else
      out.emplace_back(cls, c);
  }
  std::erase_if(out, [](const auto& t) { return t.second == 0.0; });
  f = std::move(out);
}

inline SymbolicMatrix localizing_matrix(const Polynomial& q, const std::vector<Word>& basis, MomentIndex& index,
                                        const VariableSet& vars) {
  const std::size_t n = basis.size();
  std::vector<Word> adj(n);
  for (std::size_t i = 0; i < n; ++i) adj[i] = involution(basis[i], vars);
  std::vector<LinearForm> entries(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      LinearForm f;
      for (const auto& [mu, c] : q.terms()) f.emplace_back(index.intern(adj[i] * mu * basis[j]), c);
      normalize(f);
      entries[i * n + j] = std::move(f);
    }
  return {basis, std::move(entries)};
}

inline std::size_t half_degree(const Polynomial& q) { return (q.degree() + 1) / 2; }

inline bool subset_of(const std::vector<VarId>& support, const std::vector<VarId>& clique) {
  return std::includes(clique.begin(), clique.end(), support.begin(), support.end());
}

}  // namespace detail

/// Builds the order-k relaxation. Throws OrderTooSmallError when 2k is below
/// the degree of the objective or of any constraint.
inline MomentRelaxation build_relaxation(const Ncpop& problem, int k) {
  if (k < 1) throw OrderTooSmallError("build_relaxation: relaxation order must be at least 1");
  const auto& vars = problem.variables;
  const auto two_k = static_cast<std::size_t>(2 * k);
  if (problem.objective.degree() > two_k)
    throw OrderTooSmallError("relaxation order " + std::to_string(k) + " too small for objective of degree " +
                             std::to_string(problem.objective.degree()) + ": " + to_string(problem.objective, vars));
  for (std::size_t i = 0; i < problem.inequalities.size(); ++i)
    if (problem.inequalities[i].degree() > two_k)
      throw OrderTooSmallError("relaxation order " + std::to_string(k) + " too small for inequality " +
                               std::to_string(i) + ": " + to_string(problem.inequalities[i], vars));
  for (std::size_t i = 0; i < problem.equalities.size(); ++i)
    if (problem.equalities[i].degree() > two_k)
      throw OrderTooSmallError("relaxation order " + std::to_string(k) + " too small for equality " +
                               std::to_string(i) + ": " + to_string(problem.equalities[i], vars));
  if (problem.ball_radius && !(*problem.ball_radius > 0.0))
    throw std::invalid_argument("build_relaxation: ball radius must be positive");

  MomentRelaxation rel;
  rel.order = k;
  rel.ball_radius = problem.ball_radius;
  rel.variables = std::make_shared<const VariableSet>(vars);
  const VariableSet& v = *rel.variables;
  rel.moments = MomentIndex(&v, k);

  std::vector<std::vector<VarId>> cliques = problem.cliques;
  if (cliques.empty()) {
    std::vector<VarId> all(v.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<VarId>(i);
    cliques.push_back(std::move(all));
  }
  for (auto& c : cliques) {
    // A clique must be closed under adjoints.
    std::vector<VarId> closed = c;
    for (auto id : c) {
      if (id >= v.size()) throw std::invalid_argument("build_relaxation: clique references unknown variable");
      closed.push_back(v.adjoint(id));
    }
    std::sort(closed.begin(), closed.end());
    closed.erase(std::unique(closed.begin(), closed.end()), closed.end());
    c = std::move(closed);
  }
  auto clique_for = [&](const Polynomial& q, const std::string& what) -> std::size_t {
    const auto support = q.support();
    for (std::size_t c = 0; c < cliques.size(); ++c)
      if (detail::subset_of(support, cliques[c])) return c;
    throw std::invalid_argument("build_relaxation: " + what + " is not covered by any variable clique");
  };

  // Moment matrices, one per clique.
  std::vector<std::vector<Word>> clique_basis(cliques.size());
  for (std::size_t c = 0; c < cliques.size(); ++c) {
    clique_basis[c] = words_up_to(cliques[c], static_cast<std::size_t>(k));
    rel.moment_matrices.push_back(
        {cliques[c], detail::localizing_matrix(Polynomial(1.0), clique_basis[c], rel.moments, v)});
  }

  for (const auto& [w, c] : problem.objective.terms()) {
    Polynomial term(w, c);
    clique_for(term, "objective term " + to_string(w, v));
    rel.objective.emplace_back(rel.moments.intern(w), c);
  }
  detail::normalize(rel.objective);

  std::size_t max_half = 1;
  auto add_inequality = [&](const Polynomial& q, std::size_t clique, std::string source) {
    const std::size_t d = detail::half_degree(q);
    max_half = std::max(max_half, d);
    const int loc_order = k - static_cast<int>(d);
    const auto basis = words_up_to(cliques[clique], static_cast<std::size_t>(loc_order));
    rel.localizing.push_back({std::move(source), loc_order, detail::localizing_matrix(q, basis, rel.moments, v)});
  };

  for (std::size_t i = 0; i < problem.inequalities.size(); ++i) {
    // Only the Hermitian part of q is meaningful as an operator inequality.
    const Polynomial q = hermitian_part(problem.inequalities[i], v);
    add_inequality(q, clique_for(q, "inequality " + std::to_string(i)), "inequality " + std::to_string(i));
  }
  if (problem.ball_radius) {
    const double r2 = *problem.ball_radius * *problem.ball_radius;
    for (std::size_t c = 0; c < cliques.size(); ++c) {
      Polynomial ball(r2);
      for (auto id : cliques[c]) ball.add_term(Word{v.adjoint(id), id}, -1.0);
      add_inequality(ball, c, cliques.size() == 1 ? "ball" : "ball clique " + std::to_string(c));
    }
  }

  for (std::size_t i = 0; i < problem.equalities.size(); ++i) {
    const auto& q = problem.equalities[i];
    const std::size_t clique = clique_for(q, "equality " + std::to_string(i));
    const std::size_t d = detail::half_degree(q);
    max_half = std::max(max_half, d);
    const int loc_order = k - static_cast<int>(d);
    const auto basis = words_up_to(cliques[clique], static_cast<std::size_t>(loc_order));

    // Exact rows <phi, nu^dagger q omega phi> = 0 for every ordered pair.
    std::vector<LinearForm> seen;
    for (const auto& nu : basis) {
      const Word nu_adj = involution(nu, v);
      for (const auto& omega : basis) {
        LinearForm f;
        for (const auto& [mu, c] : q.terms()) f.emplace_back(rel.moments.intern(nu_adj * mu * omega), c);
        detail::normalize(f);
        if (f.empty()) continue;
        if (std::find(seen.begin(), seen.end(), f) != seen.end()) continue;
        seen.push_back(f);
        rel.scalar_equalities.push_back({std::move(f), i});
      }
    }
    const Polynomial herm = hermitian_part(q, v);
    rel.equality_localizing.push_back({"equality " + std::to_string(i) + " (+)", loc_order,
                                       detail::localizing_matrix(herm, basis, rel.moments, v)});
    rel.equality_localizing.push_back({"equality " + std::to_string(i) + " (-)", loc_order,
                                       detail::localizing_matrix(-herm, basis, rel.moments, v)});
  }
  rel.flat_shift = static_cast<int>(max_half);
  return rel;
}

namespace detail {

inline sdp::LmiBlock to_block(const SymbolicMatrix& m) {
  sdp::LmiBlock b;
  b.dim = m.dim();
  for (int i = 0; i < m.dim(); ++i)
    for (int j = i; j < m.dim(); ++j)
      for (const auto& [cls, c] : m.at(i, j)) b.entries.push_back({cls == 0 ? sdp::kConstant : cls - 1, i, j, c});
  return b;
}

}  // namespace detail

/// LMI form of the relaxation. SDP variable j is moment class j + 1; y_1 is
/// folded into the constant matrices and the objective offset.
inline sdp::SdpProblem relaxation_to_sdp(const MomentRelaxation& rel, EqualityMode mode = EqualityMode::exact_rows) {
  sdp::SdpProblem p;
  p.num_vars = static_cast<int>(rel.moments.size()) - 1;
  p.objective = Eigen::VectorXd::Zero(p.num_vars);
  for (const auto& [cls, c] : rel.objective) {
    if (cls == 0)
      p.objective_offset += c;
    else
      p.objective[cls - 1] += c;
  }
  for (const auto& mm : rel.moment_matrices) p.blocks.push_back(detail::to_block(mm.matrix));
  for (const auto& loc : rel.localizing) p.blocks.push_back(detail::to_block(loc.matrix));
  if (mode == EqualityMode::exact_rows) {
    for (const auto& eq : rel.scalar_equalities) {
      sdp::LinearRow row;
      for (const auto& [cls, c] : eq.form) {
        if (cls == 0)
          row.rhs -= c;
        else
          row.coeffs.emplace_back(cls - 1, c);
      }
      p.equalities.push_back(std::move(row));
    }
  } else {
    for (const auto& loc : rel.equality_localizing) p.blocks.push_back(detail::to_block(loc.matrix));
  }
  return p;
}

/// Full moment vector (class 0 = 1) from an SDP solution vector.
inline Eigen::VectorXd moments_from_sdp(const Eigen::VectorXd& sdp_y) {
  Eigen::VectorXd m(sdp_y.size() + 1);
  m[0] = 1.0;
  m.tail(sdp_y.size()) = sdp_y;
  return m;
}

struct ExtractionReport {
  bool flat = false;
  int rank_Mk = 0;
  int rank_Mk_minus_d = 0;
  double singular_value_gap = 0.0;
  std::map<std::string, double> first_order_moments;
  double certified_lower_bound = 0.0;
};

namespace detail {

struct RankInfo {
  int rank = 0;
  double gap = 0.0;
};

inline RankInfo numerical_rank(const Eigen::MatrixXd& m, double tol) {
  if (m.size() == 0) return {};
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  if (smax <= 0.0) return {0, 0.0};
  int r = 0;
  while (r < s.size() && s[r] > tol * smax) ++r;
  const double kept = s[r - 1];
  const double dropped = r < s.size() ? s[r] : 0.0;
  return {r, (kept - dropped) / smax};
}

}  // namespace detail

/// Compares rank M_k(y) with rank M_{k-d}(y) on every moment matrix; singular
/// values below tol * sigma_max count as zero.
inline ExtractionReport check_rank_loop(const Eigen::VectorXd& moments, const MomentRelaxation& rel,
                                        double tol = 1e-6) {
  ExtractionReport rep;
  rep.flat = true;
  rep.singular_value_gap = 1.0;
  const int sub_order = rel.order - rel.flat_shift;
  for (const auto& mm : rel.moment_matrices) {
    const Eigen::MatrixXd full = mm.matrix.evaluate(moments);
    int sub_dim = 0;
    if (sub_order >= 0)
      while (sub_dim < mm.matrix.dim() && mm.matrix.basis()[static_cast<std::size_t>(sub_dim)].degree() <=
                                              static_cast<std::size_t>(sub_order))
        ++sub_dim;
    const auto rf = detail::numerical_rank(full, tol);
    const auto rs = detail::numerical_rank(full.topLeftCorner(sub_dim, sub_dim), tol);
    rep.rank_Mk = std::max(rep.rank_Mk, rf.rank);
    rep.rank_Mk_minus_d = std::max(rep.rank_Mk_minus_d, rs.rank);
    rep.singular_value_gap = std::min(rep.singular_value_gap, rf.gap);
    if (rf.rank != rs.rank) rep.flat = false;
  }
  const auto& vars = *rel.variables;
  for (const auto& var : vars.all()) {
    const int cls = rel.moments.find(Word{var.id});
    rep.first_order_moments[var.label] = cls >= 0 ? moments[cls] : 0.0;
  }
  double bound = 0.0;
  for (const auto& [cls, c] : rel.objective) bound += c * moments[cls];
  rep.certified_lower_bound = bound;
  return rep;
}

/// First-order moments y_{X_i}, indexed by variable id. Exact for rank-one
/// moment matrices, a heuristic otherwise (see ExtractionReport::flat).
inline std::vector<double> extract_point(const Eigen::VectorXd& moments, const MomentRelaxation& rel) {
  const auto& vars = *rel.variables;
  std::vector<double> out(vars.size(), 0.0);
  for (const auto& var : vars.all()) {
    const int cls = rel.moments.find(Word{var.id});
    if (cls >= 0) out[var.id] = moments[cls];
  }
  return out;
}

/// Moment vector induced by a matrix assignment: y_w = <phi, w(X) phi>. Test oracle.
inline Eigen::VectorXd moments_from_assignment(const MomentRelaxation& rel, std::span<const Eigen::MatrixXd> assignment,
                                               const Eigen::VectorXd& phi) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rel.moments.size()));
  for (std::size_t i = 0; i < rel.moments.size(); ++i)
    y[static_cast<Eigen::Index>(i)] = poly_eval(Polynomial(rel.moments.classes()[i]), assignment, phi);
  return y;
}

}  // namespace ncpop
