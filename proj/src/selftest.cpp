#include "mirs/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mirs/reexpansion.hpp"
#include "mirs/schauder.hpp"
#include "mirs/series.hpp"

namespace mirs {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kExact = 1e-10;

class Worst {
 public:
  Worst(std::string name, double bound) : r_{std::move(name), 0.0, bound, true} {}
  void add(double v) {
    if (!(v <= r_.value) || std::isnan(v)) r_.value = std::isnan(v) ? INFINITY : std::max(r_.value, v);
  }
  CheckResult done() {
    r_.pass = r_.value <= r_.bound;
    return r_;
  }

 private:
  CheckResult r_;
};

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

Series<double> random_series(TruncationPtr t, std::mt19937_64& rng, bool pop_only = false) {
  std::uniform_real_distribution<double> u(-1, 1);
  Series<double> s(t);
  for (auto& b : t->indices())
    if (!pop_only || b.is_pop_only()) s.set(b, u(rng));
  return s;
}

GammaParams random_params(TruncationPtr t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  const double ah = t->scaling().alpha_hat();
  GammaParams p(t);
  for (DerivIndex n : {DerivIndex{0, 0}, DerivIndex{1, 0}}) {
    auto& s = p.at(n);
    for (auto& b : t->indices())
      if (n.degree() < b.homogeneity().value(ah)) s.set(b, u(rng));
  }
  return p;
}

double rel_diff(const GridField& a, const GridField& b) {
  return (a - b).l2_norm() / std::max(1e-300, b.l2_norm());
}

GridField smooth_field(const Grid& g, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  struct Mode {
    double k1, k2, a, b;
  };
  std::vector<Mode> modes;
  for (int i = 0; i < 6; ++i) {
    double k1 = rng() % 4, k2 = rng() % 4;
    modes.push_back({k1, k2, u(rng), u(rng)});
  }
  return GridField::from_function(g, [&](double x1, double x2) {
    double s = 0.3;
    for (auto& m : modes) {
      double ph = 2 * kPi * (m.k1 * x1 / g.L1 + m.k2 * x2 / g.L2);
      s += m.a * std::cos(ph) + m.b * std::sin(ph);
    }
    return s;
  });
}

}  // namespace

bool all_pass(const std::vector<CheckResult>& r) {
  return std::all_of(r.begin(), r.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<CheckResult> algebra_suite(int instances, std::uint64_t seed) {
  const Scaling S;
  auto full = Truncation::make(1.6, S, false);
  auto deep = Truncation::make(2.6, S, false);
  const double ah = S.alpha_hat();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<CheckResult> out;

  Worst leibniz("leibniz", kExact), assoc("product_associativity", kExact), tri0("d0_triangularity", 0.0),
      pop("population_propagation", 0.0);
  for (int i = 0; i < instances; ++i) {
    auto x = random_series(full, rng), y = random_series(full, rng), z = random_series(full, rng);
    auto lhs = derivation_D0(multiply(x, y));
    auto rhs = multiply(derivation_D0(x), y) + multiply(x, derivation_D0(y));
    leibniz.add(max_diff(lhs, rhs));
    assoc.add(max_diff(multiply(multiply(x, y), z), multiply(x, multiply(y, z))));

    // every beta in (D0)^l c has [beta]_0 = [gamma]_0 + l for some gamma in supp c
    Series<double> c(deep);
    auto& idx = deep->indices();
    for (int k = 0; k < 4; ++k) {
      const auto& b = idx[rng() % idx.size()];
      if (b.is_pop_only()) c.set(b, u(rng));
    }
    const int l = static_cast<int>(rng() % 4);
    const auto dl = iterated_D0(c, l);
    for (auto& [b, v] : dl.coeffs()) {
      bool found = false;
      for (auto& [g, w] : c.coeffs())
        if (b.brackets0() == g.brackets0() + l) found = true;
      if (!found) tri0.add(1.0);
    }

    // pi^- of populated pi, pi' lives on [beta] >= 0 or e_k + e_{n_1} + ... + e_{n_{k+1}}
    Series<double> pi(full), pp(full), cc(full);
    for (auto& b : full->indices())
      if (b.is_populated()) {
        pi.set(b, u(rng));
        pp.set(b, u(rng));
        if (b.is_pop_only()) cc.set(b, u(rng));
      }
    const auto pm = assemble_pi_minus(pi, pp, cc, u(rng));
    for (auto& [b, v] : pm.coeffs()) {
      if (v == 0.0 || b.brackets() >= 0) continue;
      bool ok = b.pop().size() == 1 && b.pop().begin()->second == 1;
      if (ok) {
        int k = b.pop().begin()->first, nsum = 0;
        for (auto& [n, m] : b.deriv()) nsum += m;
        ok = nsum == k + 1;
      }
      if (!ok) pop.add(1.0);
    }
  }
  out.push_back(leibniz.done());
  out.push_back(tri0.done());
  out.push_back(assoc.done());
  out.push_back(pop.done());

  const auto id = GammaMatrix::identity(full);
  Worst morph("gamma_morphism", kExact), tri("gamma_triangularity", 0.0), col0("gamma_column0", 0.0),
      dep("gamma_dependence", 0.0), comp("composition_vs_product", kExact), assoc_g("group_associativity", kExact),
      unit("group_identity", kExact), inv("group_inverse", kExact), inv2("group_double_inverse", kExact);
  for (int i = 0; i < instances; ++i) {
    auto p = random_params(full, rng), q = random_params(full, rng), r = random_params(full, rng);
    auto gp = gamma_from_pis(p), gq = gamma_from_pis(q);
    auto a = random_series(full, rng), b = random_series(full, rng);
    morph.add(max_diff(gp.apply(multiply(a, b)), multiply(gp.apply(a), gp.apply(b))));
    if (!gp.is_triangular()) tri.add(1.0);
    for (auto& beta : full->indices())
      if (gp.entry(beta, MultiIndex::zero()) != (beta.is_zero() ? 1.0 : 0.0)) col0.add(1.0);

    // perturbing pi^(n)_{b'} leaves rows b with b' not before b unchanged on [gamma] >= 0
    auto& idx = full->indices();
    const auto& bp = idx[rng() % idx.size()];
    DerivIndex n = (rng() % 2) ? DerivIndex{0, 0} : DerivIndex{1, 0};
    if (n.degree() < bp.homogeneity().value(ah)) {
      auto pp2 = p;
      pp2.at(n).set(bp, coef(pp2.at(n), bp) + 0.75);
      auto h = gamma_from_pis(pp2);
      for (auto& row : idx) {
        if (full->position(bp) < full->position(row)) continue;
        for (auto& g : idx)
          if (g.brackets() >= 0 && h.entry(row, g) != gp.entry(row, g)) dep.add(1.0);
      }
    }

    comp.add(gamma_compose(p, q).max_abs_diff(matrix_product(gp, gq)));
    assoc_g.add(gamma_from_pis(compose_params(compose_params(p, q), r))
                    .max_abs_diff(gamma_from_pis(compose_params(p, compose_params(q, r)))));
    unit.add(gamma_compose(p, GammaParams(full)).max_abs_diff(gp));
    unit.add(gamma_compose(GammaParams(full), p).max_abs_diff(gp));
    auto pinv = invert_params(p);
    auto ginv = gamma_from_pis(pinv);
    inv.add(matrix_product(gp, ginv).max_abs_diff(id));
    inv.add(matrix_product(ginv, gp).max_abs_diff(id));
    // the defining relation Gamma* pi~^(n) = -pi^(n)
    for (DerivIndex m : {DerivIndex{0, 0}, DerivIndex{1, 0}}) {
      const Series<double>* pt = pinv.find(m);
      const Series<double>* po = p.find(m);
      if (pt && po) inv.add(max_diff(gp.apply(*pt), -1.0 * *po));
    }
    inv2.add(gamma_from_pis(invert_params(pinv)).max_abs_diff(gp));
  }
  for (auto* w : {&morph, &tri, &col0, &dep, &comp, &assoc_g, &unit, &inv, &inv2}) out.push_back(w->done());
  return out;
}

std::vector<CheckResult> shift_covariance_suite(int instances, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Worst w("shift_covariance", 1e-9);
  for (int i = 0; i < instances; ++i) {
    std::vector<double> a = {u(rng), u(rng), u(rng), u(rng)};
    Series<double> c(nullptr);
    for (int term = 0; term < 5; ++term) {
      MultiIndex b;
      int len = static_cast<int>(rng() % 4);
      for (int j = 0; j < len; ++j) b += MultiIndex::unit_k(static_cast<int>(rng() % 4));
      c.set(b, u(rng));
    }
    const double v = 2 * u(rng);
    auto [lhs, rhs] = taylor_shift_check(c, a, v);
    w.add(std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
  }
  return {w.done()};
}

std::vector<CheckResult> kernel_suite(const Grid& g) {
  std::vector<CheckResult> out;
  std::mt19937 rng(2);
  std::normal_distribution<double> nd;
  GridField w(g);
  for (auto& v : w.values()) v = nd(rng);
  const double h4 = std::pow(g.h1(), 4);

  Worst semi("semigroup", 1e-12), mass("mass", 1e-12);
  for (double s : {h4, 4 * h4, 16 * h4}) {
    const double t = 2.5 * s;
    semi.add(rel_diff(semigroup_convolve(semigroup_convolve(w, s), t), semigroup_convolve(w, s + t)));
    mass.add(std::abs(semigroup_convolve(w, t).mean() - w.mean()) / std::max(1.0, std::abs(w.mean())));
    mass.add(std::abs(heat_kernel(g, t).mean() * g.L1 * g.L2 - 1.0));
    GridField c(g, 2.5);
    mass.add((semigroup_convolve(c, t) - 2.5).max_abs() / 2.5);
  }
  out.push_back(semi.done());
  out.push_back(mass.done());

  // d_t psi + (d1^4 - d2^2) psi = 0 with a fourth-order difference in t
  Worst pde("kernel_pde", 1e-8);
  for (double t : {16 * h4, 64 * h4, 256 * h4}) {
    const double dt = 1e-3 * t;
    auto p = [&](double s) { return heat_kernel(g, s); };
    auto dtpsi = (1.0 / (12 * dt)) * (p(t - 2 * dt) - 8.0 * p(t - dt) + 8.0 * p(t + dt) - p(t + 2 * dt));
    auto psi = p(t);
    auto spatial = spectral_derivative(psi, {4, 0}) - spectral_derivative(psi, {0, 2});
    pde.add((dtpsi + spatial).l2_norm() / spatial.l2_norm());
  }
  out.push_back(pde.done());

  // psi_t(y) = 2^3 psi_{16 t}(2 y1, 4 y2), compared inside one copy of the decimated field
  Worst scal("kernel_scaling", 1e-3);
  for (double t : {16 * h4, 64 * h4}) {
    auto psi_t = heat_kernel(g, t);
    auto rescaled = 8.0 * parabolic_rescale(heat_kernel(g, 16 * t), 1);
    double num = 0, den = 0;
    for (long i2 = -g.N2 / 8; i2 < g.N2 / 8; ++i2)
      for (long i1 = -g.N1 / 4; i1 < g.N1 / 4; ++i1) {
        double a = rescaled.at(i1, i2), b = psi_t.at(i1, i2);
        num += (a - b) * (a - b);
        den += b * b;
      }
    scal.add(std::sqrt(num / den));
  }
  out.push_back(scal.done());
  return out;
}

std::vector<CheckResult> schauder_suite(const Grid& g) {
  std::vector<CheckResult> out;
  const double tf = tau_floor_min(g);
  const Node x{g.N1 / 8, -g.N2 / 16};

  Worst zero("integrate_zero", 0.0), cst("integrate_constant", 1e-3);
  for (double eta : {0.5, 1.5, 2.5, 3.5, 4.5, 5.5, 6.5, 7.5}) {
    zero.add(integrate(GridField(g), x, eta, tf).max_abs());
    cst.add(integrate(GridField(g, 2.0), x, eta, tf).max_abs() / 2.0);
  }
  out.push_back(zero.done());
  out.push_back(cst.done());

  auto f = smooth_field(g, 5);
  const double tmin = t_levels(g, tf).front();
  Worst pde("integrate_pde", 1e-3), vanish("integrate_base_point", 0.0), d11("integrate_d11", 1e-4);
  {
    // below degree 1 only a constant is subtracted, which A annihilates
    auto u = integrate(f, x, 0.5, tf);
    vanish.add(std::abs(u.at(x)));
    auto res = apply_A(u) - (semigroup_convolve(f, tmin) - f.mean());
    pde.add(res.max_abs() / f.max_abs());
  }
  auto r = integrate_with_d11(f, x, 2.5, tf);
  vanish.add(std::abs(r.u.at(x)));
  const double h = g.h1();
  double worst = 0;
  for (long i1 = x.i1 - 8; i1 <= x.i1 + 8; ++i1)
    for (long i2 = x.i2 - 40; i2 <= x.i2 + 40; i2 += 8) {
      double fd = (-r.u.at(i1 + 2, i2) + 16 * r.u.at(i1 + 1, i2) - 30 * r.u.at(i1, i2) + 16 * r.u.at(i1 - 1, i2) -
                   r.u.at(i1 - 2, i2)) /
                  (12 * h * h);
      worst = std::max(worst, std::abs(fd - r.d11u.at(i1, i2)));
    }
  d11.add(worst / r.d11u.max_abs());
  out.push_back(vanish.done());
  out.push_back(pde.done());
  out.push_back(d11.done());
  return out;
}

}  // namespace mirs
