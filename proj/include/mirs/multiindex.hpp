#ifndef MIRS_MULTIINDEX_HPP
#define MIRS_MULTIINDEX_HPP

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mirs {

/// Space/time derivative order n = (n1, n2) with parabolic degree |n| = n1 + 2 n2.
struct DerivIndex {
  int n1 = 0;
  int n2 = 0;

  constexpr int degree() const { return n1 + 2 * n2; }
  constexpr bool is_zero() const { return n1 == 0 && n2 == 0; }

  friend constexpr auto operator<=>(const DerivIndex&, const DerivIndex&) = default;
};

/// Exact homogeneity alpha_count * alpha + int_part.
struct Homogeneity {
  int alpha_count = 0;
  int int_part = 0;

  double value(double alpha_hat) const { return alpha_count * alpha_hat + int_part; }

  friend constexpr bool operator==(const Homogeneity&, const Homogeneity&) = default;
};

/// Numeric constants shared by every homogeneity comparison.
///
/// Homogeneities are compared with alpha_hat = alpha - epsilon, which resolves
/// the integer degeneracies of a rational alpha in the direction an irrational
/// alpha slightly below it would.
struct Scaling {
  double alpha = 0.5;
  double epsilon = 1.0 / 1048576.0;  // 2^-20
  double lambda = 0.25;

  double alpha_hat() const { return alpha - epsilon; }

  static Scaling with_alpha(double alpha);
  void validate() const;
};

/// Finitely supported exponent map over the keys k >= 0 (coordinates z_k of
/// the nonlinearity) and n != 0 (coordinates z_n of the polynomial parameter).
/// Zero multiplicities are never stored, so structural equality is equality.
class MultiIndex {
 public:
  using PopMap = std::map<int, int>;
  using DerivMap = std::map<DerivIndex, int>;

  MultiIndex() = default;

  static MultiIndex zero() { return {}; }
  static MultiIndex unit_k(int k, int mult = 1);
  static MultiIndex unit_n(DerivIndex n, int mult = 1);
  static MultiIndex unit_n(int n1, int n2, int mult = 1) { return unit_n({n1, n2}, mult); }

  const PopMap& pop() const { return pop_; }
  const DerivMap& deriv() const { return deriv_; }

  int pop(int k) const;
  int deriv(DerivIndex n) const;

  bool is_zero() const { return pop_.empty() && deriv_.empty(); }
  bool is_pop_only() const { return deriv_.empty(); }
  /// True iff the multi-index is e_n for some n != 0.
  bool is_unit_n() const;
  /// Total multiplicity (number of unit factors).
  int length() const;

  /// Componentwise sum.
  MultiIndex operator+(const MultiIndex& other) const;
  MultiIndex& operator+=(const MultiIndex& other);
  /// Componentwise difference; throws std::domain_error when a component turns negative.
  MultiIndex operator-(const MultiIndex& other) const;
  /// True iff every component of `other` is <= the one of *this.
  bool contains(const MultiIndex& other) const;

  /// |beta|_p = sum_n |n| beta(n).
  int plength() const;
  /// [beta] = sum_k k beta(k) - sum_n beta(n).
  int brackets() const;
  /// [beta]_0 = sum_k k beta(k).
  int brackets0() const;
  /// |beta| = alpha (1 + [beta]) + |beta|_p.
  Homogeneity homogeneity() const { return {1 + brackets(), plength()}; }

  /// [beta] >= 0 or beta = e_n.
  bool is_populated() const { return brackets() >= 0 || is_unit_n(); }

  /// Canonical text form, e.g. "z0^2 z1 z(1,0)"; the zero multi-index prints as "1".
  std::string to_string() const;
  static MultiIndex parse(std::string_view text);

  /// Deterministic total order: lexicographic on (sorted pop entries, sorted deriv entries).
  friend std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b);
  friend bool operator==(const MultiIndex& a, const MultiIndex& b) = default;

 private:
  void add_pop(int k, int mult);
  void add_deriv(DerivIndex n, int mult);

  PopMap pop_;
  DerivMap deriv_;
};

inline MultiIndex add(const MultiIndex& b, const MultiIndex& g) { return b + g; }
inline int plength(const MultiIndex& b) { return b.plength(); }
inline int brackets(const MultiIndex& b) { return b.brackets(); }
inline int brackets0(const MultiIndex& b) { return b.brackets0(); }
inline Homogeneity homogeneity(const MultiIndex& b) { return b.homogeneity(); }
inline bool is_populated(const MultiIndex& b) { return b.is_populated(); }

/// |beta|_< = |beta| + lambda beta(0), evaluated with alpha_hat.
double order_key(const MultiIndex& b, const Scaling& s);

/// All multi-indices with order_key below `cutoff`, ascending in order_key
/// with ties broken by the MultiIndex total order. With `populated_only` the
/// list is restricted to populated multi-indices.
std::vector<MultiIndex> enumerate_index_set(double cutoff, const Scaling& s,
                                            bool populated_only = true);

/// All ordered tuples (b_1, ..., b_parts) with b_1 + ... + b_parts = b.
std::vector<std::vector<MultiIndex>> decompositions(const MultiIndex& b, int parts);

/// Number of tuples returned by decompositions(b, parts), from the binomial product formula.
std::size_t decomposition_count(const MultiIndex& b, int parts);

/// An ordered truncation of the multi-index space, shared by series and matrices.
class Truncation {
 public:
  Truncation(double cutoff, const Scaling& s, bool populated_only);
  Truncation(std::vector<MultiIndex> indices, double cutoff, const Scaling& s);

  static std::shared_ptr<const Truncation> make(double cutoff, const Scaling& s,
                                                bool populated_only) {
    return std::make_shared<const Truncation>(cutoff, s, populated_only);
  }

  const std::vector<MultiIndex>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool contains(const MultiIndex& b) const { return position_.count(b) != 0; }
  /// Position in the ascending order; throws std::out_of_range when absent.
  std::size_t position(const MultiIndex& b) const { return position_.at(b); }
  double cutoff() const { return cutoff_; }
  const Scaling& scaling() const { return scaling_; }

  /// Largest k with e_k in the truncation (or -1).
  int max_pop_key() const;

  friend bool operator==(const Truncation& a, const Truncation& b) {
    return a.indices_ == b.indices_;
  }

 private:
  void index();

  std::vector<MultiIndex> indices_;
  std::map<MultiIndex, std::size_t> position_;
  double cutoff_;
  Scaling scaling_;
};

using TruncationPtr = std::shared_ptr<const Truncation>;

}  // namespace mirs

#endif  // MIRS_MULTIINDEX_HPP
