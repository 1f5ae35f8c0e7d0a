#include "mirs/reexpansion.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include <Eigen/Dense>

namespace mirs {

namespace {

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

int degree(DerivIndex n) { return n.n1 + 2 * n.n2; }

double hom(const MultiIndex& b, const Scaling& s) { return b.homogeneity().value(s.alpha_hat()); }

void require_trunc(const TruncationPtr& t) {
  if (!t) throw std::invalid_argument("structure group element needs a truncation");
}

// column Gamma* z for a unit z
Series<double> unit_column(const GammaParams& p, const MultiIndex& unit) {
  const auto& t = p.trunc;
  Series<double> col(t);
  if (unit.is_unit_n()) {
    col.set(unit, 1.0);
    if (auto* pn = p.find(unit.deriv().begin()->first))
      for (auto& [b, v] : pn->coeffs()) col.accumulate(b, v);
    return col;
  }
  const int k = unit.pop().begin()->first;
  Series<double> pi0(t);
  if (auto* q = p.find({0, 0})) pi0 = *q;
  Series<double> pw = unit_series(t, 1.0);
  for (int l = 0;; ++l) {
    MultiIndex e = MultiIndex::unit_k(k + l);
    if (!t->contains(e) || pw.empty()) break;
    double c = binom(k + l, k);
    for (auto& [b, v] : pw.coeffs()) col.accumulate(b + e, c * v);
    pw = multiply(pw, pi0);
  }
  return col;
}

}  // namespace

Series<double>& GammaParams::at(DerivIndex n) {
  auto it = pis.find(n);
  if (it == pis.end()) it = pis.emplace(n, Series<double>(trunc)).first;
  return it->second;
}

const Series<double>* GammaParams::find(DerivIndex n) const {
  auto it = pis.find(n);
  return it == pis.end() ? nullptr : &it->second;
}

void GammaParams::check_population() const {
  require_trunc(trunc);
  for (auto& [n, s] : pis)
    for (auto& [b, v] : s.coeffs())
      if (v != 0.0 && !(degree(n) < hom(b, trunc->scaling())))
        throw std::invalid_argument("pi^(n)_beta must vanish unless |n| < |beta| (at " + b.to_string() + ")");
}

GammaMatrix GammaMatrix::identity(TruncationPtr t) {
  require_trunc(t);
  GammaMatrix g(t);
  for (auto& b : t->indices()) g.set(b, b, 1.0);
  return g;
}

double GammaMatrix::entry(const MultiIndex& beta, const MultiIndex& gamma) const {
  auto it = e_.find({beta, gamma});
  return it == e_.end() ? 0.0 : it->second;
}

void GammaMatrix::set(const MultiIndex& beta, const MultiIndex& gamma, double v) {
  if (v == 0.0)
    e_.erase({beta, gamma});
  else
    e_[{beta, gamma}] = v;
}

Series<double> GammaMatrix::apply(const Series<double>& u) const {
  Series<double> r(u.truncation());
  for (auto& [bg, v] : e_)
    if (auto* x = u.find(bg.second)) r.accumulate(bg.first, v * *x);
  return r;
}

namespace {

Series<GridField> apply_fields(const std::map<std::pair<MultiIndex, MultiIndex>, double>& e,
                               const Series<GridField>& u, bool projected) {
  Series<GridField> r(u.truncation());
  for (auto& [bg, v] : e) {
    if (projected && bg.second.brackets() < 0) continue;
    if (auto* x = u.find(bg.second)) r.accumulate(bg.first, v * *x);
  }
  return r;
}

}  // namespace

Series<GridField> GammaMatrix::apply(const Series<GridField>& u) const { return apply_fields(e_, u, false); }
Series<GridField> GammaMatrix::apply_projected(const Series<GridField>& u) const {
  return apply_fields(e_, u, true);
}

double GammaMatrix::max_abs_diff(const GammaMatrix& o) const {
  double m = 0;
  for (auto& [k, v] : e_) m = std::max(m, std::abs(v - o.entry(k.first, k.second)));
  for (auto& [k, v] : o.e_) m = std::max(m, std::abs(v - entry(k.first, k.second)));
  return m;
}

bool GammaMatrix::is_triangular() const {
  const Scaling& s = trunc_->scaling();
  for (auto& [k, v] : e_) {
    auto& [b, g] = k;
    if (b == g) {
      if (v != 1.0) return false;
      continue;
    }
    if (!(trunc_->position(g) < trunc_->position(b) && hom(g, s) < hom(b, s))) return false;
  }
  for (auto& b : trunc_->indices())
    if (entry(b, b) != 1.0) return false;
  return true;
}

void GammaMatrix::dump_triplets(std::ostream& os) const {
  auto old = os.precision(17);
  for (auto& [k, v] : e_) os << k.first.to_string() << '\t' << k.second.to_string() << '\t' << v << '\n';
  os.precision(old);
}

GammaMatrix matrix_product(const GammaMatrix& a, const GammaMatrix& b) {
  GammaMatrix r(a.truncation());
  std::map<std::pair<MultiIndex, MultiIndex>, double> acc;
  for (auto& [ka, va] : a.entries())
    for (auto& [kb, vb] : b.entries())
      if (ka.second == kb.first) acc[{ka.first, kb.second}] += va * vb;
  for (auto& [k, v] : acc) r.set(k.first, k.second, v);
  return r;
}

GammaMatrix gamma_from_pis(const GammaParams& p) {
  p.check_population();
  const auto& t = p.trunc;
  std::map<MultiIndex, Series<double>> units;
  GammaMatrix g(t);
  for (auto& gamma : t->indices()) {
    Series<double> col = unit_series(t, 1.0);
    auto factor = [&](const MultiIndex& u, int m) {
      auto it = units.find(u);
      if (it == units.end()) it = units.emplace(u, unit_column(p, u)).first;
      for (int i = 0; i < m; ++i) col = multiply(col, it->second);
    };
    for (auto& [k, m] : gamma.pop()) factor(MultiIndex::unit_k(k), m);
    for (auto& [n, m] : gamma.deriv()) factor(MultiIndex::unit_n(n.n1, n.n2), m);
    for (auto& [b, v] : col.coeffs()) g.set(b, gamma, v);
  }
  return g;
}

GammaParams compose_params(const GammaParams& p, const GammaParams& q) {
  auto g = gamma_from_pis(p);
  GammaParams r(p.trunc);
  for (auto& [n, s] : p.pis) r.at(n) = s;
  for (auto& [n, s] : q.pis) r.at(n) = r.at(n) + g.apply(s);
  return r;
}

GammaMatrix gamma_compose(const GammaParams& p, const GammaParams& q) {
  return gamma_from_pis(compose_params(p, q));
}

GammaParams invert_params(const GammaParams& p) {
  auto g = gamma_from_pis(p);
  const auto& idx = p.trunc->indices();
  GammaParams r(p.trunc);
  for (auto& [n, s] : p.pis) {
    Series<double> x(p.trunc);
    for (auto& b : idx) {
      double v = -(s.find(b) ? *s.find(b) : 0.0);
      for (auto& [g_idx, xv] : x.coeffs())
        if (g_idx != b) v -= g.entry(b, g_idx) * xv;
      if (v != 0.0) x.set(b, v);
    }
    r.at(n) = x;
  }
  return r;
}

GammaMatrix gamma_invert(const GammaParams& p) { return gamma_from_pis(invert_params(p)); }

std::vector<Node> carnot_ball(const Grid& grid, const Node& x, double r) {
  std::vector<Node> out;
  long m1 = static_cast<long>(std::floor(r / grid.h1()));
  long m2 = static_cast<long>(std::floor(r * r / grid.h2()));
  m1 = std::min<long>(m1, grid.N1 / 2 - 1);
  m2 = std::min<long>(m2, grid.N2 / 2 - 1);
  for (long d2 = -m2; d2 <= m2; ++d2)
    for (long d1 = -m1; d1 <= m1; ++d1)
      if (carnot_norm(d1 * grid.h1(), d2 * grid.h2()) <= r) out.push_back({x.i1 + d1, x.i2 + d2});
  return out;
}

namespace {

double ball_norm(const GridField& f, const std::vector<Node>& ball) {
  double s = 0;
  for (auto& n : ball) s += f.at(n) * f.at(n);
  return std::sqrt(s);
}

}  // namespace

GammaYX build_gamma_yx(const ModelConfig& cfg, const ModelSample& mx, const ModelSample& my,
                       const FitOptions& opt) {
  const Grid& grid = cfg.grid;
  if (!(mx.xi_tau.grid() == grid) || !(my.xi_tau.grid() == grid))
    throw std::invalid_argument("models must live on the configured grid");
  if (mx.xi_tau.values() != my.xi_tau.values())
    throw std::invalid_argument("models at x and y must share the noise sample");
  const Point px = mx.x.point(grid), py = my.x.point(grid);
  const double dist = carnot_distance(grid, py, px);

  GammaYX out{GammaParams(Truncation::make(cfg.cutoff, cfg.scaling, false)), GammaMatrix(), {}, 0.0};
  out.r_fit = opt.r_fit > 0 ? opt.r_fit : std::min(2 * dist, opt.window);
  GammaParams& p = out.params;
  const auto& t = p.trunc;

  // pi^(0)_beta = Pi_{y beta}(x)
  for (auto& [b, f] : my.Pi.coeffs()) p.at({0, 0}).set(b, f.at(mx.x));
  // polynomial sector: binom(m, n) (x - y)^(m - n)
  const Point d = chart_difference(grid, py, px);
  for (auto& b : t->indices()) {
    if (!b.is_unit_n()) continue;
    DerivIndex m = b.deriv().begin()->first;
    for (int n1 = 0; n1 <= m.n1; ++n1)
      for (int n2 = 0; n2 <= m.n2; ++n2) {
        if ((n1 == 0 && n2 == 0) || (n1 == m.n1 && n2 == m.n2)) continue;
        double v = binom(m.n1, n1) * binom(m.n2, n2) * std::pow(d.x1, m.n1 - n1) * std::pow(d.x2, m.n2 - n2);
        p.at({n1, n2}).set(b, v);
      }
  }

  if (dist == 0) {
    out.gamma = gamma_from_pis(p);
    return out;
  }
  auto ball = carnot_ball(grid, mx.x, out.r_fit);
  for (auto& b : t->indices()) {
    if (!b.is_populated() || b.brackets() < 0) continue;
    const double eta = hom(b, cfg.scaling);
    std::vector<DerivIndex> ns;
    for (auto& n : taylor_indices(eta))
      if (!n.is_zero() && degree(n) < eta) ns.push_back(n);

    // the row beta of Gamma* P does not depend on the parameters at beta or later
    auto g = gamma_from_pis(p);
    GridField r = my.Pi.at(b);
    for (auto& [k, v] : g.entries())
      if (k.first == b && k.second.brackets() >= 0)
        if (auto* f = mx.Pi.find(k.second)) r -= v * *f;
    const double c0 = p.at({0, 0}).find(b) ? *p.at({0, 0}).find(b) : 0.0;

    Eigen::MatrixXd A(ball.size(), ns.size());
    Eigen::VectorXd rhs(ball.size());
    for (std::size_t i = 0; i < ball.size(); ++i) {
      Point dy = chart_difference(grid, px, ball[i].point(grid));
      for (std::size_t j = 0; j < ns.size(); ++j) A(i, j) = std::pow(dy.x1, ns[j].n1) * std::pow(dy.x2, ns[j].n2);
      rhs(i) = r.at(ball[i]) - c0;
    }
    Eigen::VectorXd coef = ns.empty() ? Eigen::VectorXd() : Eigen::VectorXd(A.colPivHouseholderQr().solve(rhs));
    for (std::size_t j = 0; j < ns.size(); ++j) p.at(ns[j]).set(b, coef(j));
    Eigen::VectorXd res = ns.empty() ? rhs : Eigen::VectorXd(rhs - A * coef);
    double scale = ball_norm(r, ball);
    double rel = scale == 0 ? 0.0 : res.norm() / scale;
    out.fit_residual[b] = rel;
    if (rel > opt.max_residual)
      throw std::runtime_error("re-expansion fit residual for " + b.to_string() + " above threshold");
  }
  out.gamma = gamma_from_pis(p);
  return out;
}

std::vector<ReexpansionResidual> reexpansion_residual(const ModelSample& mx, const ModelSample& my,
                                                      const GammaMatrix& g, double r_fit,
                                                      double t_smooth) {
  const Grid& grid = mx.xi_tau.grid();
  auto ball = carnot_ball(grid, mx.x, r_fit);
  auto gpi = g.apply(mx.Pi);
  Series<GridField> sx(mx.PiMinus.truncation()), sy(my.PiMinus.truncation());
  for (auto& [b, f] : mx.PiMinus.coeffs()) sx.set(b, semigroup_convolve(f, t_smooth));
  for (auto& [b, f] : my.PiMinus.coeffs()) sy.set(b, semigroup_convolve(f, t_smooth));
  auto gpm = g.apply(sx);
  std::vector<ReexpansionResidual> out;
  for (auto& [b, py] : my.Pi.coeffs()) {
    ReexpansionResidual r{b};
    GridField lhs = py - py.at(mx.x);
    GridField res = lhs - (gpi.find(b) ? *gpi.find(b) : GridField(grid));
    double s = ball_norm(py, ball);
    r.pi = s == 0 ? 0.0 : ball_norm(res, ball) / s;
    if (auto* m = sy.find(b)) {
      GridField rm = *m - (gpm.find(b) ? *gpm.find(b) : GridField(grid));
      double sm = ball_norm(*m, ball);
      r.pi_minus = sm == 0 ? 0.0 : ball_norm(rm, ball) / sm;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace mirs
