#pragma once

// Non-commutative polynomials over real coefficients.
//
// A Word is an ordered product of operator variables (the empty word is the
// identity). Words are never rewritten: X1*X2 and X2*X1 are distinct. The
// adjoint of a word reverses its letters and maps every letter to its
// adjoint partner (itself for Hermitian variables).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ncpop {

using VarId = std::uint16_t;

struct Variable {
  VarId id = 0;
  std::string label;
  bool hermitian = true;
  VarId adjoint = 0;  // equals id when hermitian
};

/// Dense, ordered collection of operator variables. Non-Hermitian variables
/// are added in pairs (X, X^dagger) so that the involution stays closed.
class VariableSet {
 public:
  VarId add(std::string label) {
    const auto id = static_cast<VarId>(vars_.size());
    vars_.push_back({id, std::move(label), true, id});
    return id;
  }

  /// Adds X and its adjoint partner; returns the id of X. The partner has id+1.
  VarId add_non_hermitian(std::string label) {
    const auto id = static_cast<VarId>(vars_.size());
    const auto partner = static_cast<VarId>(id + 1);
    vars_.push_back({id, label, false, partner});
    vars_.push_back({partner, label + "^T", false, id});
    return id;
  }

  [[nodiscard]] std::size_t size() const { return vars_.size(); }
  [[nodiscard]] const Variable& operator[](VarId id) const { return vars_.at(id); }
  [[nodiscard]] const std::vector<Variable>& all() const { return vars_; }
  [[nodiscard]] VarId adjoint(VarId id) const { return vars_[id].adjoint; }

  [[nodiscard]] bool all_hermitian() const {
    return std::all_of(vars_.begin(), vars_.end(), [](const Variable& v) { return v.hermitian; });
  }

  /// Looks up a variable id by label; throws std::out_of_range if absent.
  [[nodiscard]] VarId id_of(std::string_view label) const {
    for (const auto& v : vars_)
      if (v.label == label) return v.id;
    throw std::out_of_range("unknown variable: " + std::string(label));
  }

  friend bool operator==(const VariableSet& a, const VariableSet& b) {
    if (a.vars_.size() != b.vars_.size()) return false;
    for (std::size_t i = 0; i < a.vars_.size(); ++i) {
      const auto& x = a.vars_[i];
      const auto& y = b.vars_[i];
      if (x.label != y.label || x.hermitian != y.hermitian || x.adjoint != y.adjoint) return false;
    }
    return true;
  }

 private:
  std::vector<Variable> vars_;
};

class Word {
 public:
  Word() = default;
  Word(std::initializer_list<VarId> letters) : letters_(letters) {}
  explicit Word(std::vector<VarId> letters) : letters_(std::move(letters)) {}

  [[nodiscard]] std::size_t degree() const { return letters_.size(); }
  [[nodiscard]] bool is_identity() const { return letters_.empty(); }
  [[nodiscard]] std::span<const VarId> letters() const { return letters_; }

  [[nodiscard]] Word operator*(const Word& rhs) const {
    std::vector<VarId> out;
    out.reserve(letters_.size() + rhs.letters_.size());
    out.insert(out.end(), letters_.begin(), letters_.end());
    out.insert(out.end(), rhs.letters_.begin(), rhs.letters_.end());
    return Word(std::move(out));
  }

  /// Graded lexicographic order: shorter words first, then letter by letter.
  friend std::strong_ordering operator<=>(const Word& a, const Word& b) {
    if (a.letters_.size() != b.letters_.size()) return a.letters_.size() <=> b.letters_.size();
    return std::lexicographical_compare_three_way(a.letters_.begin(), a.letters_.end(),
                                                  b.letters_.begin(), b.letters_.end());
  }
  friend bool operator==(const Word&, const Word&) = default;

  [[nodiscard]] std::size_t hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (auto l : letters_) {
      h ^= static_cast<std::uint64_t>(l) + 1;
      h *= 1099511628211ULL;
    }
    return static_cast<std::size_t>(h ^ (letters_.size() << 1));
  }

 private:
  std::vector<VarId> letters_;
};

struct WordHash {
  std::size_t operator()(const Word& w) const { return w.hash(); }
};

/// Adjoint word: reversed order, each letter replaced by its adjoint partner.
inline Word involution(const Word& w, const VariableSet& vars) {
  const auto letters = w.letters();
  std::vector<VarId> out(letters.rbegin(), letters.rend());
  for (auto& l : out) l = vars.adjoint(l);
  return Word(std::move(out));
}

/// Adjoint word for an all-Hermitian alphabet (plain reversal).
inline Word involution(const Word& w) {
  const auto letters = w.letters();
  return Word(std::vector<VarId>(letters.rbegin(), letters.rend()));
}

/// Representative of {w, w^dagger}: the smaller of the two in graded-lex order.
inline Word moment_class_representative(const Word& w, const VariableSet& vars) {
  Word adj = involution(w, vars);
  return adj < w ? adj : w;
}

inline std::string to_string(const Word& w, const VariableSet& vars) {
  if (w.is_identity()) return "1";
  std::string out;
  for (auto l : w.letters()) {
    if (!out.empty()) out += '*';
    out += vars[l].label;
  }
  return out;
}

namespace detail {

inline std::string format_coefficient(double c) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), c);
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace detail

/// Polynomial with real coefficients; zero coefficients are never stored.
class Polynomial {
 public:
  using Terms = std::map<Word, double>;

  Polynomial() = default;
  Polynomial(double constant) {  // NOLINT(google-explicit-constructor)
    if (constant != 0.0) terms_.emplace(Word{}, constant);
  }
  Polynomial(const Word& w, double coeff = 1.0) {  // NOLINT(google-explicit-constructor)
    if (coeff != 0.0) terms_.emplace(w, coeff);
  }

  static Polynomial variable(VarId id) { return Polynomial(Word{id}); }

  [[nodiscard]] const Terms& terms() const { return terms_; }
  [[nodiscard]] bool is_zero() const { return terms_.empty(); }

  [[nodiscard]] std::size_t degree() const {
    return terms_.empty() ? 0 : terms_.rbegin()->first.degree();
  }

  [[nodiscard]] double coefficient(const Word& w) const {
    auto it = terms_.find(w);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void add_term(const Word& w, double c) {
    if (c == 0.0) return;
    auto [it, inserted] = terms_.emplace(w, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0.0) terms_.erase(it);
    }
  }

  Polynomial& operator+=(const Polynomial& rhs) {
    for (const auto& [w, c] : rhs.terms_) add_term(w, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& rhs) {
    for (const auto& [w, c] : rhs.terms_) add_term(w, -c);
    return *this;
  }
  Polynomial& operator*=(double s) {
    if (s == 0.0) {
      terms_.clear();
      return *this;
    }
    for (auto& [w, c] : terms_) c *= s;
    return *this;
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator-(Polynomial a) { return a *= -1.0; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    Polynomial out;
    for (const auto& [wa, ca] : a.terms_)
      for (const auto& [wb, cb] : b.terms_) out.add_term(wa * wb, ca * cb);
    return out;
  }

  friend bool operator==(const Polynomial&, const Polynomial&) = default;

  /// Distinct variables that occur in some term.
  [[nodiscard]] std::vector<VarId> support() const {
    std::vector<VarId> out;
    for (const auto& [w, c] : terms_)
      for (auto l : w.letters()) out.push_back(l);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  Terms terms_;
};

inline Polynomial adjoint(const Polynomial& p, const VariableSet& vars) {
  Polynomial out;
  for (const auto& [w, c] : p.terms()) out.add_term(involution(w, vars), c);
  return out;
}

/// Hermitian part (p + p^dagger) / 2.
inline Polynomial hermitian_part(const Polynomial& p, const VariableSet& vars) {
  return 0.5 * (p + adjoint(p, vars));
}

/// Renders terms from highest to lowest graded-lex order, e.g. `1.0*X1*X2 - 2.0*X2`.
inline std::string to_string(const Polynomial& p, const VariableSet& vars) {
  if (p.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (auto it = p.terms().rbegin(); it != p.terms().rend(); ++it) {
    const auto& [w, c] = *it;
    const double mag = first ? c : std::abs(c);
    if (!first) out += c < 0 ? " - " : " + ";
    out += detail::format_coefficient(mag);
    if (!w.is_identity()) out += "*" + to_string(w, vars);
    first = false;
  }
  return out;
}

/// Evaluates <phi, p(X) phi> for an explicit matrix assignment. Test oracle.
inline double poly_eval(const Polynomial& p, std::span<const Eigen::MatrixXd> assignment,
                        const Eigen::VectorXd& phi) {
  const auto d = phi.size();
  for (const auto& m : assignment)
    if (m.rows() != d || m.cols() != d)
      throw std::invalid_argument("poly_eval: assignment matrices must be square with the dimension of phi");
  double total = 0.0;
  for (const auto& [w, c] : p.terms()) {
    Eigen::VectorXd v = phi;
    const auto letters = w.letters();
    for (auto it = letters.rbegin(); it != letters.rend(); ++it) {
      if (*it >= assignment.size())
        throw std::invalid_argument("poly_eval: no matrix assigned to variable " + std::to_string(*it));
      v = assignment[*it] * v;
    }
    total += c * phi.dot(v);
  }
  return total;
}

/// Every word of degree <= d over the given letters, in graded-lex order.
inline std::vector<Word> words_up_to(std::span<const VarId> letters, std::size_t d) {
  std::vector<VarId> sorted(letters.begin(), letters.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<Word> out{Word{}};
  std::size_t level_begin = 0;
  for (std::size_t deg = 1; deg <= d; ++deg) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (auto l : sorted) out.push_back(out[i] * Word{l});
    }
    level_begin = level_end;
  }
  return out;
}

}  // namespace ncpop
