#ifndef MIRS_SERIES_HPP
#define MIRS_SERIES_HPP

#include <algorithm>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mirs/multiindex.hpp"

namespace mirs {

// Coefficient ring hooks. A ring C needs +, -, *, double*C and these two.
inline double zero_like(double) { return 0.0; }
inline double one_like(double) { return 1.0; }

/// Value with a first-order tangent, for linearizing ring computations.
template <class C>
struct Dual {
  C value;
  C tangent;

  Dual operator+(const Dual& o) const { return {value + o.value, tangent + o.tangent}; }
  Dual operator-(const Dual& o) const { return {value - o.value, tangent - o.tangent}; }
  Dual operator*(const Dual& o) const {
    return {value * o.value, value * o.tangent + tangent * o.value};
  }
  friend Dual operator*(double a, const Dual& d) { return {a * d.value, a * d.tangent}; }
};

template <class C>
Dual<C> zero_like(const Dual<C>& d) {
  return {zero_like(d.value), zero_like(d.tangent)};
}
template <class C>
Dual<C> one_like(const Dual<C>& d) {
  return {one_like(d.value), zero_like(d.tangent)};
}

class SeriesMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Truncated formal power series: sparse map MultiIndex -> C.
/// A null truncation means no truncation at all.
template <class C>
class Series {
 public:
  using Map = std::map<MultiIndex, C>;

  Series() = default;
  explicit Series(TruncationPtr t) : trunc_(std::move(t)) {}

  const TruncationPtr& truncation() const { return trunc_; }
  bool admits(const MultiIndex& b) const { return !trunc_ || trunc_->contains(b); }

  const Map& coeffs() const { return coeffs_; }
  bool has(const MultiIndex& b) const { return coeffs_.count(b) != 0; }
  const C* find(const MultiIndex& b) const {
    auto it = coeffs_.find(b);
    return it == coeffs_.end() ? nullptr : &it->second;
  }
  const C& at(const MultiIndex& b) const {
    auto it = coeffs_.find(b);
    if (it == coeffs_.end()) throw std::out_of_range("series has no coefficient at " + b.to_string());
    return it->second;
  }
  /// Stores v at b; silently ignored when b lies outside the truncation.
  void set(const MultiIndex& b, C v) {
    if (!admits(b)) return;
    coeffs_.insert_or_assign(b, std::move(v));
  }
  /// Adds v to the coefficient at b (outside the truncation: dropped).
  void accumulate(const MultiIndex& b, const C& v) {
    if (!admits(b)) return;
    auto it = coeffs_.find(b);
    if (it == coeffs_.end())
      coeffs_.emplace(b, v);
    else
      it->second = it->second + v;
  }
  void erase(const MultiIndex& b) { coeffs_.erase(b); }
  std::size_t size() const { return coeffs_.size(); }
  bool empty() const { return coeffs_.empty(); }

  Series operator+(const Series& o) const {
    check_same(o);
    Series r = *this;
    for (auto& [b, v] : o.coeffs_) r.accumulate(b, v);
    return r;
  }
  Series operator-(const Series& o) const {
    check_same(o);
    Series r = *this;
    for (auto& [b, v] : o.coeffs_) r.accumulate(b, -1.0 * v);
    return r;
  }
  friend Series operator*(double a, const Series& s) {
    Series r(s.trunc_);
    for (auto& [b, v] : s.coeffs_) r.coeffs_.emplace(b, a * v);
    return r;
  }

  void check_same(const Series& o) const {
    if (trunc_ == o.trunc_) return;
    if (trunc_ && o.trunc_ && *trunc_ == *o.trunc_) return;
    throw SeriesMismatch("series live on different truncations");
  }

 private:
  TruncationPtr trunc_;
  Map coeffs_;
};

/// Cauchy product restricted to the common truncation.
template <class C>
Series<C> multiply(const Series<C>& x, const Series<C>& y) {
  x.check_same(y);
  Series<C> r(x.truncation());
  for (auto& [b1, v1] : x.coeffs())
    for (auto& [b2, v2] : y.coeffs()) r.accumulate(b1 + b2, v1 * v2);
  return r;
}

/// The unit series 1 with coefficient one_like(proto) at 0.
template <class C>
Series<C> unit_series(TruncationPtr t, const C& proto) {
  Series<C> r(std::move(t));
  r.set(MultiIndex::zero(), one_like(proto));
  return r;
}

/// Entry (D0)_beta^gamma = sum_k (k+1) gamma(k) [gamma + e_{k+1} = beta + e_k].
int d0_matrix(const MultiIndex& beta, const MultiIndex& gamma);

/// The derivation D0 z_k = (k+1) z_{k+1}, applied columnwise.
template <class C>
Series<C> derivation_D0(const Series<C>& c) {
  Series<C> r(c.truncation());
  for (auto& [g, v] : c.coeffs())
    for (auto& [k, m] : g.pop()) {
      MultiIndex b = g - MultiIndex::unit_k(k) + MultiIndex::unit_k(k + 1);
      r.accumulate(b, static_cast<double>((k + 1) * m) * v);
    }
  return r;
}

template <class C>
Series<C> iterated_D0(const Series<C>& c, int l) {
  if (l < 0) throw std::invalid_argument("iterated_D0: l must be >= 0");
  Series<C> r = c;
  for (int i = 0; i < l; ++i) r = derivation_D0(r);
  return r;
}

/// The series h_l = (1/l!) (D0)^l c for l = 0..lmax. With lmax < 0 it is the
/// largest [beta]_0 in the truncation of c (which must then be truncated).
std::vector<Series<double>> counterterm_shifts(const Series<double>& c, int lmax = -1);

namespace detail {

// product of pi over parts[0..count) times `tail`; false when a factor is absent
template <class C>
bool times_factors(const Series<C>& pi, const std::vector<MultiIndex>& parts, int count,
                   C& tail) {
  for (int i = count - 1; i >= 0; --i) {
    const C* f = pi.find(parts[i]);
    if (!f) return false;
    tail = *f * tail;
  }
  return true;
}

}  // namespace detail

/// One component of
///   pi^-_beta = sum_k sum_{e_k+b_1+..+b_{k+1}=beta} pi_{b_1}..pi_{b_k} pi'_{b_{k+1}}
///             - sum_l sum_{b_1+..+b_{l+1}=beta} pi_{b_1}..pi_{b_l} h_l_{b_{l+1}}
///             + xi delta_beta^0,
/// with h = counterterm_shifts(c). Absent components of pi or pi' count as zero.
template <class C>
C pi_minus_component(const MultiIndex& beta, const Series<C>& pi, const Series<C>& pi_prime,
                     const std::vector<Series<double>>& h, const C& xi) {
  C acc = zero_like(xi);
  const C one = one_like(xi);
  for (auto& [k, m] : beta.pop()) {
    MultiIndex rest = beta - MultiIndex::unit_k(k);
    for (auto& parts : decompositions(rest, k + 1)) {
      const C* last = pi_prime.find(parts[k]);
      if (!last) continue;
      C term = *last;
      if (detail::times_factors(pi, parts, k, term)) acc = acc + term;
    }
  }
  const int lmax = std::min<int>(beta.brackets0(), static_cast<int>(h.size()) - 1);
  for (int l = 0; l <= lmax; ++l) {
    for (auto& parts : decompositions(beta, l + 1)) {
      const double* cv = h[l].find(parts[l]);
      if (!cv || *cv == 0.0) continue;
      C term = *cv * one;
      if (detail::times_factors(pi, parts, l, term)) acc = acc - term;
    }
  }
  if (beta.is_zero()) acc = acc + xi;
  return acc;
}

/// Full series pi^- on the truncation of pi.
template <class C>
Series<C> assemble_pi_minus(const Series<C>& pi, const Series<C>& pi_prime,
                            const Series<double>& c, const C& xi) {
  pi.check_same(pi_prime);
  if (!pi.truncation()) throw SeriesMismatch("assemble_pi_minus needs a truncated series");
  for (auto& [g, v] : c.coeffs())
    if (!g.is_pop_only()) throw std::invalid_argument("counterterm series must be pop-only");
  auto h = counterterm_shifts(c);
  Series<C> r(pi.truncation());
  for (auto& b : pi.truncation()->indices()) r.set(b, pi_minus_component(b, pi, pi_prime, h, xi));
  return r;
}

/// Coordinates of (a, p): a_coeffs[k] = a^(k)(0)/k!, p_coeffs[n] = z_n[p].
struct FunctionalJet {
  std::vector<double> a_coeffs;
  std::map<DerivIndex, double> p_coeffs;
};

double evaluate_series(const Series<double>& c, const FunctionalJet& jet);

/// Returns (c[a(.+v)], (sum_l v^l/l! (D0)^l c)[a]) for polynomial a and pop-only c.
std::pair<double, double> taylor_shift_check(const Series<double>& c,
                                             const std::vector<double>& a_coeffs, double v);

}  // namespace mirs

#endif  // MIRS_SERIES_HPP
