#include "mirs/series.hpp"

#include <cmath>

namespace mirs {

int d0_matrix(const MultiIndex& beta, const MultiIndex& gamma) {
  int s = 0;
  for (auto& [k, m] : gamma.pop())
    if (gamma - MultiIndex::unit_k(k) + MultiIndex::unit_k(k + 1) == beta) s += (k + 1) * m;
  return s;
}

std::vector<Series<double>> counterterm_shifts(const Series<double>& c, int lmax) {
  if (lmax < 0) {
    if (!c.truncation()) throw std::invalid_argument("counterterm_shifts: untruncated series needs lmax");
    lmax = 0;
    for (auto& b : c.truncation()->indices()) lmax = std::max(lmax, b.brackets0());
  }
  std::vector<Series<double>> h;
  h.reserve(lmax + 1);
  h.push_back(c);
  for (int l = 1; l <= lmax; ++l) h.push_back((1.0 / l) * derivation_D0(h.back()));
  return h;
}

double evaluate_series(const Series<double>& c, const FunctionalJet& jet) {
  double total = 0.0;
  for (auto& [b, v] : c.coeffs()) {
    double term = v;
    for (auto& [k, m] : b.pop()) {
      if (k >= static_cast<int>(jet.a_coeffs.size()))
        throw std::invalid_argument("jet too short for z" + std::to_string(k));
      term *= std::pow(jet.a_coeffs[k], m);
    }
    for (auto& [n, m] : b.deriv()) {
      auto it = jet.p_coeffs.find(n);
      if (it == jet.p_coeffs.end())
        throw std::invalid_argument("jet lacks coordinate " + MultiIndex::unit_n(n).to_string());
      term *= std::pow(it->second, m);
    }
    total += term;
  }
  return total;
}

namespace {

// drop every coefficient with a key z_k, k > deg; those vanish on a polynomial of degree deg
Series<double> prune_keys(const Series<double>& s, int deg) {
  Series<double> r(s.truncation());
  for (auto& [b, v] : s.coeffs())
    if (b.pop().empty() || b.pop().rbegin()->first <= deg) r.set(b, v);
  return r;
}

}  // namespace

std::pair<double, double> taylor_shift_check(const Series<double>& c,
                                             const std::vector<double>& a_coeffs, double v) {
  for (auto& [b, x] : c.coeffs())
    if (!b.is_pop_only()) throw std::invalid_argument("taylor_shift_check: c must be pop-only");
  const int deg = static_cast<int>(a_coeffs.size()) - 1;
  int kmax = 0;
  for (auto& [b, x] : c.coeffs())
    if (!b.pop().empty()) kmax = std::max(kmax, b.pop().rbegin()->first);

  FunctionalJet jet;
  jet.a_coeffs.assign(std::max(deg, kmax) + 1, 0.0);
  for (int k = 0; k <= deg; ++k) jet.a_coeffs[k] = a_coeffs[k];

  // coefficients of a(. + v) by re-expansion about v
  FunctionalJet shifted = jet;
  for (int k = 0; k <= deg; ++k) {
    double s = 0.0, binom = 1.0, vp = 1.0;
    for (int j = k; j <= deg; ++j) {
      s += binom * a_coeffs[j] * vp;
      binom = binom * (j + 1) / (j + 1 - k);
      vp *= v;
    }
    shifted.a_coeffs[k] = s;
  }
  const double lhs = evaluate_series(c, shifted);

  double rhs = 0.0;
  Series<double> term = prune_keys(c, std::max(deg, 0));
  double coef = 1.0;
  for (int l = 0; !term.empty(); ++l) {
    rhs += coef * evaluate_series(term, jet);
    term = prune_keys(derivation_D0(term), std::max(deg, 0));
    coef *= v / (l + 1);
  }
  return {lhs, rhs};
}

}  // namespace mirs
