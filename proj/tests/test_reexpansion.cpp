#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "mirs/reexpansion.hpp"

using namespace mirs;

namespace {

const Scaling S;
const MultiIndex zero = MultiIndex::zero();
const MultiIndex e0 = MultiIndex::unit_k(0);
const MultiIndex e1 = MultiIndex::unit_k(1);
const MultiIndex e2 = MultiIndex::unit_k(2);
const MultiIndex e10 = MultiIndex::unit_n(1, 0);

TruncationPtr full() {
  static auto t = Truncation::make(1.6, S, false);
  return t;
}

GammaParams random_params(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  GammaParams p(full());
  for (DerivIndex n : {DerivIndex{0, 0}, DerivIndex{1, 0}}) {
    auto& s = p.at(n);
    for (auto& b : full()->indices())
      if (n.n1 + 2 * n.n2 < b.homogeneity().value(S.alpha_hat())) s.set(b, u(rng));
  }
  return p;
}

Series<double> random_series(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Series<double> s(full());
  for (auto& b : full()->indices()) s.set(b, u(rng));
  return s;
}

double max_diff(const Series<double>& a, const Series<double>& b) {
  double m = 0;
  auto d = a - b;
  for (auto& [k, v] : d.coeffs()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_CASE("identity and unit columns") {
  GammaParams p(full());
  auto id = gamma_from_pis(p);
  CHECK(id.max_abs_diff(GammaMatrix::identity(full())) == 0.0);

  const double c = 0.37;
  p.at({0, 0}).set(zero, c);
  auto g = gamma_from_pis(p);
  for (int k = 0; k <= 2; ++k)
    for (int l = 0; k + l <= 4; ++l) {
      auto row = MultiIndex::unit_k(k + l);
      if (!full()->contains(row)) continue;
      double want = std::tgamma(k + l + 1) / (std::tgamma(k + 1) * std::tgamma(l + 1)) * std::pow(c, l);
      CHECK(g.entry(row, MultiIndex::unit_k(k)) == doctest::Approx(want).epsilon(1e-14));
    }

  GammaParams q(full());
  q.at({1, 0}).set(e1 + e1, 0.5);
  q.at({1, 0}).set(e2, -0.25);
  auto h = gamma_from_pis(q);
  CHECK(h.entry(e10, e10) == 1.0);
  CHECK(h.entry(e1 + e1, e10) == 0.5);
  CHECK(h.entry(e2, e10) == -0.25);
  // population condition
  GammaParams bad(full());
  bad.at({1, 0}).set(e1, 1.0);
  CHECK_THROWS(gamma_from_pis(bad));
}

TEST_CASE("group laws on random parameters") {
  std::mt19937_64 rng(21);
  auto id = GammaMatrix::identity(full());
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_params(rng), q = random_params(rng), r = random_params(rng);
    auto gp = gamma_from_pis(p), gq = gamma_from_pis(q), gr = gamma_from_pis(r);
    CHECK(gp.is_triangular());
    // composition against the matrix product
    CHECK(gamma_compose(p, q).max_abs_diff(matrix_product(gp, gq)) <= 1e-10);
    // associativity through the parameters
    auto a = gamma_from_pis(compose_params(compose_params(p, q), r));
    auto b = gamma_from_pis(compose_params(p, compose_params(q, r)));
    CHECK(a.max_abs_diff(b) <= 1e-10);
    CHECK(gamma_compose(p, GammaParams(full())).max_abs_diff(gp) <= 1e-12);
    // inverse
    auto pinv = invert_params(p);
    CHECK_NOTHROW(pinv.check_population());
    CHECK(matrix_product(gp, gamma_from_pis(pinv)).max_abs_diff(id) <= 1e-10);
    CHECK(matrix_product(gamma_from_pis(pinv), gp).max_abs_diff(id) <= 1e-10);
    CHECK(gamma_from_pis(invert_params(pinv)).max_abs_diff(gp) <= 1e-10);
  }
  CHECK(gamma_invert(GammaParams(full())).max_abs_diff(id) == 0.0);
}

TEST_CASE("multiplicativity") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = gamma_from_pis(random_params(rng));
    auto u = random_series(rng), v = random_series(rng);
    CHECK(max_diff(g.apply(multiply(u, v)), multiply(g.apply(u), g.apply(v))) <= 1e-10);
  }
}

TEST_CASE("dependence triangularity") {
  std::mt19937_64 rng(9);
  auto t = full();
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_params(rng);
    auto g = gamma_from_pis(p);
    // perturb one parameter pi^(n)_{b'}; rows b with b not after b' may not see it
    auto& idx = t->indices();
    const auto& bp = idx[rng() % idx.size()];
    DerivIndex n = (rng() % 2) ? DerivIndex{0, 0} : DerivIndex{1, 0};
    if (!(n.n1 < bp.homogeneity().value(S.alpha_hat()))) continue;
    auto q = p;
    q.at(n).set(bp, (q.at(n).find(bp) ? *q.at(n).find(bp) : 0.0) + 0.75);
    auto h = gamma_from_pis(q);
    for (auto& b : idx) {
      if (t->position(bp) < t->position(b)) continue;
      for (auto& gam : idx)
        if (gam.brackets() >= 0) CHECK(h.entry(b, gam) == g.entry(b, gam));
    }
  }
}

TEST_CASE("triplet dump") {
  GammaParams p(full());
  p.at({0, 0}).set(zero, 0.5);
  std::ostringstream os;
  gamma_from_pis(p).dump_triplets(os);
  CHECK(os.str().find("z1\tz0\t0.5\n") != std::string::npos);
  CHECK(os.str().find("1\t1\t1\n") != std::string::npos);
}

TEST_CASE("re-expansion between two base points") {
  ModelConfig cfg;
  cfg.grid = Grid{2, 0.5, 64, 512};
  auto c = zero_counterterms(cfg);
  c.c.set(e1, -8.0);
  auto xi = sample_white(cfg.grid, 12, 0);
  Node x{0, 0}, y{3, 9};
  auto mx = build_model_sample(cfg, xi, x, c);

  SUBCASE("x = y gives the identity") {
    auto r = build_gamma_yx(cfg, mx, mx);
    CHECK(r.gamma.max_abs_diff(GammaMatrix::identity(r.params.trunc)) == 0.0);
  }

  auto my = build_model_sample(cfg, xi, y, c);
  auto r = build_gamma_yx(cfg, mx, my);
  CHECK(r.gamma.is_triangular());
  Point d = chart_difference(cfg.grid, y.point(cfg.grid), x.point(cfg.grid));
  CHECK(*r.params.find({0, 0})->find(e10) == doctest::Approx(d.x1).epsilon(1e-14));
  CHECK(r.gamma.entry(e10, e10) == 1.0);
  double p0 = my.Pi.at(zero).at(x);
  CHECK(r.gamma.entry(e1, e0) == doctest::Approx(p0).epsilon(1e-14));
  CHECK(r.gamma.entry(e2, e0) == doctest::Approx(p0 * p0).epsilon(1e-14));

  for (auto& res : reexpansion_residual(mx, my, r.gamma, r.r_fit, 1e-6)) {
    CAPTURE(res.beta.to_string());
    if (res.beta.is_zero() || res.beta.is_unit_n()) CHECK(res.pi <= 1e-10);
    CHECK(res.pi <= 0.05);
    CHECK(res.pi_minus <= 0.05);
  }
}

TEST_CASE("transitivity") {
  ModelConfig cfg;
  cfg.grid = Grid{2, 0.5, 64, 512};
  auto c = zero_counterterms(cfg);
  c.c.set(e1, -8.0);
  auto xi = sample_white(cfg.grid, 13, 0);
  auto mx = build_model_sample(cfg, xi, {0, 0}, c);
  auto my = build_model_sample(cfg, xi, {2, -5}, c);
  auto mz = build_model_sample(cfg, xi, {-3, 4}, c);
  auto g_xy = build_gamma_yx(cfg, my, mx).gamma;  // maps Pi_y to Pi_x
  auto g_yz = build_gamma_yx(cfg, mz, my).gamma;
  auto g_xz = build_gamma_yx(cfg, mz, mx).gamma;
  double scale = 0;
  for (auto& [k, v] : g_xz.entries()) scale = std::max(scale, std::abs(v));
  CHECK(matrix_product(g_xy, g_yz).max_abs_diff(g_xz) <= 1e-8 * scale);
}
