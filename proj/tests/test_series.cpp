#include "doctest.h"

#include <cmath>
#include <random>

#include "mirs/series.hpp"

using namespace mirs;

namespace {

const MultiIndex Z = MultiIndex::zero();
const MultiIndex e0 = MultiIndex::unit_k(0);
const MultiIndex e1 = MultiIndex::unit_k(1);
const MultiIndex e2 = MultiIndex::unit_k(2);
const MultiIndex e10 = MultiIndex::unit_n(1, 0);

TruncationPtr full16() { return Truncation::make(1.6, Scaling{}, false); }
TruncationPtr pop16() { return Truncation::make(1.6, Scaling{}, true); }

Series<double> random_series(TruncationPtr t, std::mt19937& rng, int max_entries = 0,
                             bool pop_only = false) {
  std::uniform_real_distribution<double> u(-1, 1);
  Series<double> s(t);
  std::vector<MultiIndex> idx;
  for (auto& b : t->indices())
    if (!pop_only || b.is_pop_only()) idx.push_back(b);
  if (max_entries > 0) {
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min<std::size_t>(idx.size(), max_entries));
  }
  for (auto& b : idx) s.set(b, u(rng));
  return s;
}

double coef(const Series<double>& s, const MultiIndex& b) {
  auto p = s.find(b);
  return p ? *p : 0.0;
}

double max_diff(const Series<double>& a, const Series<double>& b) {
  double m = 0;
  for (auto& [k, v] : a.coeffs()) m = std::max(m, std::abs(v - coef(b, k)));
  for (auto& [k, v] : b.coeffs()) m = std::max(m, std::abs(v - coef(a, k)));
  return m;
}

}  // namespace

TEST_CASE("multiply: unit, single term, brute force") {
  auto t = full16();
  std::mt19937 rng(1);
  auto pi = random_series(t, rng);
  auto one = unit_series(t, 0.0);
  CHECK(max_diff(multiply(one, pi), pi) == 0.0);

  Series<double> a(t), b(t);
  a.set(e0, 3.0);
  b.set(e0, -2.0);
  auto ab = multiply(a, b);
  CHECK(ab.size() == 1);
  CHECK(coef(ab, e0 + e0) == -6.0);

  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_series(t, rng, 5), y = random_series(t, rng, 5);
    auto xy = multiply(x, y);
    for (auto& beta : t->indices()) {
      double want = 0;
      for (auto& g1 : t->indices())
        for (auto& g2 : t->indices())
          if (g1 + g2 == beta) want += coef(x, g1) * coef(y, g2);
      CHECK(coef(xy, beta) == doctest::Approx(want).epsilon(1e-14));
    }
  }
}

TEST_CASE("multiply: mismatched truncations") {
  Series<double> a(full16()), b(Truncation::make(1.3, Scaling{}, false));
  CHECK_THROWS_AS(multiply(a, b), SeriesMismatch);
}

TEST_CASE("multiply is associative and commutative") {
  auto t = full16();
  std::mt19937 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_series(t, rng), y = random_series(t, rng), z = random_series(t, rng);
    CHECK(max_diff(multiply(x, y), multiply(y, x)) <= 1e-14);
    CHECK(max_diff(multiply(multiply(x, y), z), multiply(x, multiply(y, z))) <= 1e-13);
  }
}

TEST_CASE("D0 matrix entries") {
  CHECK(d0_matrix(e1, e0) == 1);
  for (auto& b : full16()->indices()) CHECK(d0_matrix(b, Z) == 0);
  CHECK(d0_matrix(e1 + e1, e0 + e1) == 1);
  CHECK(d0_matrix(e0 + e2, e0 + e1) == 2);
  int nonzero = 0;
  Truncation wide(2.6, Scaling{}, false);
  for (auto& b : wide.indices())
    if (d0_matrix(b, e0 + e1) != 0) ++nonzero;
  CHECK(nonzero == 2);
  CHECK(d0_matrix(MultiIndex::unit_k(3), e2) == 3);
}

TEST_CASE("derivation D0") {
  Series<double> c(nullptr);
  for (int k = 0; k < 4; ++k) {
    Series<double> zk(nullptr);
    zk.set(MultiIndex::unit_k(k), 1.0);
    auto d = derivation_D0(zk);
    CHECK(d.size() == 1);
    CHECK(coef(d, MultiIndex::unit_k(k + 1)) == k + 1);
  }
  Series<double> konst(nullptr);
  konst.set(Z, 4.2);
  CHECK(derivation_D0(konst).empty());

  Series<double> z0z1(nullptr);
  z0z1.set(e0 + e1, 1.0);
  auto d = derivation_D0(z0z1);
  CHECK(d.size() == 2);
  CHECK(coef(d, e1 + e1) == 1.0);
  CHECK(coef(d, e0 + e2) == 2.0);
}

TEST_CASE("D0 agrees with its matrix") {
  auto t = full16();
  std::mt19937 rng(3);
  auto c = random_series(t, rng);
  auto d = derivation_D0(c);
  for (auto& b : t->indices()) {
    double want = 0;
    for (auto& g : t->indices()) want += d0_matrix(b, g) * coef(c, g);
    CHECK(coef(d, b) == doctest::Approx(want).epsilon(1e-15));
  }
}

TEST_CASE("Leibniz rule on random series") {
  auto t = full16();
  std::mt19937 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto x = random_series(t, rng), y = random_series(t, rng);
    auto lhs = derivation_D0(multiply(x, y));
    auto rhs = multiply(derivation_D0(x), y) + multiply(x, derivation_D0(y));
    CHECK(max_diff(lhs, rhs) <= 1e-12);
  }
}

TEST_CASE("iterated D0") {
  Series<double> c(nullptr);
  c.set(e1, 1.0);
  CHECK(max_diff(iterated_D0(c, 0), c) == 0.0);
  auto d1 = iterated_D0(c, 1);
  CHECK(coef(d1, e2) == 2.0);
  CHECK(d1.size() == 1);

  Series<double> z0(nullptr);
  z0.set(e0, 1.0);
  auto d2 = iterated_D0(z0, 2);
  for (auto& [b, v] : d2.coeffs()) CHECK(b.brackets0() == 2);
  CHECK(coef(d2, e2) == 2.0);
  CHECK_THROWS(iterated_D0(c, -1));
}

TEST_CASE("D0 triangularity in [.]_0") {
  auto t = Truncation::make(2.6, Scaling{}, false);
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto c = random_series(t, rng, 4, true);
    int l = static_cast<int>(rng() % 4);
    auto d = iterated_D0(c, l);
    for (auto& [b, v] : d.coeffs()) {
      bool found = false;
      for (auto& [g, w] : c.coeffs())
        if (b.brackets0() == g.brackets0() + l) found = true;
      CHECK(found);
    }
  }
}

TEST_CASE("pi-minus hand components") {
  auto t = full16();
  std::mt19937 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    auto pi = random_series(pop16(), rng);
    auto pp = random_series(pop16(), rng);
    auto c = random_series(pop16(), rng, 0, true);
    double xi = 0.37;
    auto pm = assemble_pi_minus(pi, pp, c, xi);
    CHECK(coef(pm, Z) == doctest::Approx(xi - coef(c, Z)));
    // [e0]_0 = 0, so only the l = 0 counterterm reaches e0
    CHECK(coef(pm, e0) == doctest::Approx(coef(pp, Z) - coef(c, e0)));
    // e1: k = 1 with both parts 0; l = 0, 1 with (Dc)_{e1} = c_{e0}, (Dc)_0 = 0
    double want_e1 = coef(pi, Z) * coef(pp, Z) - coef(c, e1) - coef(pi, Z) * coef(c, e0);
    CHECK(coef(pm, e1) == doctest::Approx(want_e1));
  }
}

TEST_CASE("pi-minus with zero counterterms from a model-like pi") {
  auto t = pop16();
  Series<double> pi(t), pp(t), c(t);
  pi.set(Z, 2.0);
  pp.set(Z, 5.0);
  pi.set(e10, 0.5);
  c.set(e0, 0.25);
  auto pm = assemble_pi_minus(pi, pp, c, 1.0);
  // z1 z(1,0): k=1 part pair (e10, 0) and l=1 with (e10, e1): (Dc)_{e1} = c_{e0}
  CHECK(coef(pm, e1 + e10) == doctest::Approx(0.5 * 5.0 - 0.5 * 0.25));
  // z2: k = 2 gives pi_0^2 pi'_0; l = 2 gives pi_0^2 (D^2 c)_{e2} / 2 = pi_0^2 c_{e0}; l = 1 has (Dc)_{e2} = 0
  CHECK(coef(pm, e2) == doctest::Approx(4.0 * 5.0 - 4.0 * 0.25));
}

TEST_CASE("population propagation") {
  auto t = full16();
  std::mt19937 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    Series<double> pi(t), pp(t), c(t);
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& b : t->indices())
      if (b.is_populated()) {
        pi.set(b, u(rng));
        pp.set(b, u(rng));
        if (b.is_pop_only()) c.set(b, u(rng));
      }
    auto pm = assemble_pi_minus(pi, pp, c, u(rng));
    for (auto& [b, v] : pm.coeffs()) {
      if (v == 0.0 || b.brackets() >= 0) continue;
      // otherwise b = e_k + e_{n_1} + ... + e_{n_{k+1}}; k = 0 occurs through pi'_{e_n}
      bool ok = b.pop().size() == 1 && b.pop().begin()->second == 1;
      if (ok) {
        int k = b.pop().begin()->first;
        int nsum = 0;
        for (auto& [n, m] : b.deriv()) nsum += m;
        ok = nsum == k + 1;
      }
      CHECK_MESSAGE(ok, b.to_string());
    }
  }
}

TEST_CASE("pi-minus over the dual ring is the linearization") {
  auto t = pop16();
  std::mt19937 rng(9);
  auto pi = random_series(t, rng), dpi = random_series(t, rng);
  auto pp = random_series(t, rng), dpp = random_series(t, rng);
  auto c = random_series(t, rng, 0, true);
  Series<Dual<double>> dpiS(t), dppS(t);
  for (auto& b : t->indices()) {
    dpiS.set(b, {coef(pi, b), coef(dpi, b)});
    dppS.set(b, {coef(pp, b), coef(dpp, b)});
  }
  auto dual = assemble_pi_minus(dpiS, dppS, c, Dual<double>{0.3, 0.7});
  const double s = 1e-6;
  auto plus = assemble_pi_minus(pi + s * dpi, pp + s * dpp, c, 0.3 + s * 0.7);
  auto minus = assemble_pi_minus(pi - s * dpi, pp - s * dpp, c, 0.3 - s * 0.7);
  for (auto& b : t->indices()) {
    double fd = (coef(plus, b) - coef(minus, b)) / (2 * s);
    CHECK(dual.at(b).tangent == doctest::Approx(fd).epsilon(1e-7));
    CHECK(dual.at(b).value == doctest::Approx(coef(assemble_pi_minus(pi, pp, c, 0.3), b)));
  }
}

TEST_CASE("evaluate_series") {
  Series<double> c(nullptr);
  c.set(e2, 1.0);
  CHECK(evaluate_series(c, {{0, 0, 1}, {}}) == 1.0);
  Series<double> one(nullptr);
  one.set(Z, 1.0);
  CHECK(evaluate_series(one, {{5, -1}, {}}) == 1.0);
  Series<double> z0z1(nullptr);
  z0z1.set(e0 + e1, 1.0);
  CHECK(evaluate_series(z0z1, {{3, 2}, {}}) == 6.0);
  CHECK_THROWS(evaluate_series(c, {{1, 2}, {}}));
  Series<double> p(nullptr);
  p.set(e10 + e0, 2.0);
  CHECK(evaluate_series(p, {{3}, {{{1, 0}, 0.5}}}) == 3.0);
}

TEST_CASE("taylor shift covariance") {
  Series<double> c(nullptr);
  c.set(e1, 1.0);
  std::vector<double> a = {0, 0, 1};  // a(u) = u^2
  for (double v : {0.0, 0.3, -1.2}) {
    auto [lhs, rhs] = taylor_shift_check(c, a, v);
    CHECK(lhs == doctest::Approx(2 * v));
    CHECK(rhs == doctest::Approx(2 * v));
  }
  std::mt19937 rng(10);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> cubic = {u(rng), u(rng), u(rng), u(rng)};
    Series<double> cs(nullptr);
    // random polynomial of degree <= 3 in z0..z3
    for (int term = 0; term < 5; ++term) {
      MultiIndex b;
      int len = static_cast<int>(rng() % 4);
      for (int i = 0; i < len; ++i) b += MultiIndex::unit_k(static_cast<int>(rng() % 4));
      cs.set(b, u(rng));
    }
    auto [lhs, rhs] = taylor_shift_check(cs, cubic, 0.7);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(lhs)));
    auto [l0, r0] = taylor_shift_check(cs, cubic, 0.0);
    CHECK(l0 == doctest::Approx(evaluate_series(cs, {{cubic}, {}})));
    CHECK(r0 == doctest::Approx(l0));
  }
}
