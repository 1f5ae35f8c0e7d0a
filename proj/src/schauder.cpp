#include "mirs/schauder.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace mirs {

namespace {

void check_eta(double eta) {
  if (!std::isfinite(eta) || eta < 0) throw std::invalid_argument("integrate: eta must be >= 0");
  if (std::abs(eta - std::round(eta)) < 1e-9)
    throw std::invalid_argument("integrate: eta must not be an integer");
  if (eta >= kMaxTaylorDegree + 1) throw std::invalid_argument("integrate: eta beyond the resolvable degree");
}

void check_tau(const Grid& g, double tau_floor) {
  if (!(tau_floor >= tau_floor_min(g)))
    throw std::invalid_argument("integrate: tau_floor is below the grid resolution");
}

// u (and optionally d1^2 u) from the spectrum of the untruncated solution
Integrated truncate_spectrum(const Spectrum& us, const Node& x, double eta, bool want_d11) {
  const Grid& g = us.grid;
  auto ns = taylor_indices(eta);
  auto coef = taylor_coefficients(us, x, ns);
  Integrated out{inverse(us), GridField()};
  coef[0] = out.u.at(x);
  const Point px = x.point(g);
  for (std::size_t j = 0; j < ns.size(); ++j) {
    if (ns[j].is_zero())
      out.u = out.u - coef[j];
    else
      out.u -= coef[j] * monomial(g, px, ns[j]);
  }
  if (want_d11) {
    Spectrum d = us;
    const int M1 = g.N1 / 2 + 1;
    std::vector<double> m(M1);
    for (int k1 = 0; k1 < M1; ++k1) m[k1] = -wavenumber1(g, k1) * wavenumber1(g, k1);
    for (int k2 = 0; k2 < g.N2; ++k2)
      for (int k1 = 0; k1 < M1; ++k1) d.at(k2, k1) *= m[k1];
    out.d11u = inverse(std::move(d));
    for (std::size_t j = 0; j < ns.size(); ++j) {
      int n1 = ns[j].n1;
      if (n1 < 2) continue;
      out.d11u -= (coef[j] * n1 * (n1 - 1)) * monomial(g, px, {n1 - 2, ns[j].n2});
    }
  }
  return out;
}

// exp(-t_lo |q|^4) - exp(-t_hi |q|^4) over A(q), per half-spectrum entry; cached per grid and range
using Table = std::vector<std::complex<double>>;

std::shared_ptr<const Table> multiplier_table(const Grid& g, double t_lo, double t_hi) {
  static std::mutex mu;
  static std::map<std::tuple<double, double, int, int, double, double>, std::shared_ptr<const Table>> cache;
  auto key = std::make_tuple(g.L1, g.L2, g.N1, g.N2, t_lo, t_hi);
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto tab = std::make_shared<Table>(g.spectral_size());
  const int M1 = g.N1 / 2 + 1;
  for (int k2 = 0; k2 < g.N2; ++k2) {
    double q2 = wavenumber2(g, k2);
    for (int k1 = 0; k1 < M1; ++k1) {
      double q1 = wavenumber1(g, k1), q4 = qnorm4(q1, q2);
      std::complex<double> m = 0;
      if (q4 != 0) {
        double w = std::exp(-t_lo * q4) - (std::isinf(t_hi) ? 0.0 : std::exp(-t_hi * q4));
        m = std::complex<double>(q1 * q1, -q2) * (w / q4);
      }
      (*tab)[static_cast<std::size_t>(k2) * M1 + k1] = m;
    }
  }
  std::lock_guard<std::mutex> lock(mu);
  if (cache.size() > 256) cache.clear();
  return cache.emplace(key, std::move(tab)).first->second;
}

Spectrum solve_spectrum(const GridField& f, double t_lo, double t_hi) {
  Spectrum s = forward(f);
  auto tab = multiplier_table(f.grid(), t_lo, t_hi);
  for (std::size_t i = 0; i < s.c.size(); ++i) s.c[i] *= (*tab)[i];
  return s;
}

}  // namespace

double tau_floor_min(const Grid& g) {
  double h1 = g.h1(), h2 = g.h2();
  return std::min(h1 * h1 * h1 * h1, h2 * h2) / 16;
}

double integration_t_min(const Grid& g, double tau_floor) {
  double h1 = g.h1(), h2 = g.h2();
  return std::min({tau_floor, h1 * h1 * h1 * h1, h2 * h2}) / 8;
}

std::vector<double> t_levels(const Grid& g, double tau_floor) {
  const double t_max = std::pow(g.L1 / 4, 4);
  std::vector<double> t{integration_t_min(g, tau_floor)};
  while (t.back() < t_max) t.push_back(t.back() * std::sqrt(2.0));
  return t;
}

Integrated integrate_with_d11(const GridField& f, const Node& x, double eta, double tau_floor) {
  check_eta(eta);
  check_tau(f.grid(), tau_floor);
  auto us = solve_spectrum(f, integration_t_min(f.grid(), tau_floor), INFINITY);
  return truncate_spectrum(us, x, eta, true);
}

GridField integrate(const GridField& f, const Node& x, double eta, double tau_floor) {
  check_eta(eta);
  check_tau(f.grid(), tau_floor);
  auto us = solve_spectrum(f, integration_t_min(f.grid(), tau_floor), INFINITY);
  return truncate_spectrum(us, x, eta, false).u;
}

GridField integrate(const GridField& f, const Node& x, Homogeneity eta, const Scaling& s,
                    double tau_floor) {
  if (eta.alpha_count == 0)
    throw std::invalid_argument("integrate: integer homogeneity (polynomial sector is not integrated)");
  return integrate(f, x, eta.value(s.alpha_hat()), tau_floor);
}

std::vector<GridField> integrate_levels(const GridField& f, const Node& x, double eta,
                                        double tau_floor) {
  check_eta(eta);
  check_tau(f.grid(), tau_floor);
  auto t = t_levels(f.grid(), tau_floor);
  std::vector<GridField> out;
  for (std::size_t j = 0; j + 1 < t.size(); ++j)
    out.push_back(truncate_spectrum(solve_spectrum(f, t[j], t[j + 1]), x, eta, false).u);
  out.push_back(truncate_spectrum(solve_spectrum(f, t.back(), INFINITY), x, eta, false).u);
  return out;
}

}  // namespace mirs
