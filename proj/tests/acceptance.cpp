// Acceptance run: one PASS/FAIL line per criterion. Optional arguments select criteria by number.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mirs/estimator.hpp"
#include "mirs/reexpansion.hpp"
#include "mirs/selftest.hpp"

using namespace mirs;

namespace {

const Grid kDefault{2.0, 0.5, 128, 2048};
const MultiIndex zero = MultiIndex::zero();
const MultiIndex e0 = MultiIndex::unit_k(0);
const MultiIndex e1 = MultiIndex::unit_k(1);

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

std::string fmt(const char* f, double a, double b) {
  char s[96];
  std::snprintf(s, sizeof s, f, a, b);
  return s;
}

struct MeanSe {
  double mean = 0, se = 0;
};

MeanSe mean_se(const std::vector<double>& v) {
  double s = 0, s2 = 0;
  for (double x : v) s += x;
  const double n = static_cast<double>(v.size()), m = s / n;
  for (double x : v) s2 += (x - m) * (x - m);
  return {m, std::sqrt(s2 / (n - 1) / n)};
}

ModelConfig default_model() {
  ModelConfig m;
  m.grid = kDefault;
  return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void suite(Outcome& o, const std::vector<CheckResult>& r) {
  double worst = 0;
  for (auto& c : r) {
    if (c.bound > 0) worst = std::max(worst, c.value / c.bound);
    o.require(c.pass, c.name + " " + fmt("%.2e", c.value) + " > " + fmt("%.1e", c.bound));
  }
  o.detail << r.size() << " properties, worst residual/bound " << fmt("%.2e", worst);
}

// Counterterms shared by the model-level criteria.
const Counterterms& shared_counterterms() {
  static const Counterterms c = [] {
    CalibrationConfig cal;
    cal.seed = 42;
    cal.samples = 128;
    return calibrate_counterterms(default_model(), cal);
  }();
  return c;
}

// The full experiment on the 2x refined grid, run once for criteria 7 and 11. On the default
// grid the smallest fit distances are 2 h1 and 4 h2, close enough to the integration floor
// that the z0^k chain is visibly smoothed there.
const ExperimentReport& shared_experiment() {
  static const ExperimentReport r = [] {
    ExperimentConfig e;
    e.model = default_model();
    e.model.grid = Grid{2.0, 0.5, 256, 4096};
    e.seed = 41;
    e.samples = 1024;
    e.calibration_samples = 0;
    CalibrationConfig cal;
    cal.seed = 42;
    cal.samples = 128;
    return run_experiment(e, calibrate_counterterms(e.model, cal));
  }();
  return r;
}

void c1(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = algebra_suite(100, 1);
  double s = seconds_since(t0);
  suite(o, r);
  o.detail << ", " << fmt("%.1f s", s);
  o.require(s < 60, "runtime");
}

void c2(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = shift_covariance_suite(100, 1);
  double s = seconds_since(t0);
  suite(o, r);
  o.detail << ", " << fmt("%.1f s", s);
  o.require(s < 5, "runtime");
}

void c3(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  auto r = kernel_suite(kDefault);
  double s = seconds_since(t0);
  suite(o, r);
  o.detail << ", " << fmt("%.1f s", s);
  o.require(s < 60, "runtime");
}

// xi_t at node 0 from the half spectrum, for several t at once.
std::vector<double> point_values(const Spectrum& s, const std::vector<double>& ts) {
  const Grid& g = s.grid;
  std::vector<double> out(ts.size(), 0.0);
  for (int k2 = 0; k2 < g.N2; ++k2)
    for (int k1 = 0; k1 <= g.N1 / 2; ++k1) {
      const double w = (k1 == 0 || k1 == g.N1 / 2) ? 1.0 : 2.0;
      const double q4 = qnorm4(wavenumber1(g, k1), wavenumber2(g, k2));
      const double re = s.at(k2, k1).real();
      for (std::size_t j = 0; j < ts.size(); ++j) out[j] += w * re * std::exp(-ts[j] * q4);
    }
  for (double& v : out) v /= static_cast<double>(g.size());
  return out;
}

void c4(Outcome& o) {
  const Grid g{1.0, 1.0, 64, 1024};
  const int n = 10000;
  std::vector<double> ts;
  for (int j = -16; j <= -12; ++j) ts.push_back(std::ldexp(1.0, j));
  auto zeta = GridField::from_function(g, [](double x1, double x2) {
    return std::cos(2 * std::numbers::pi * x1) + 0.5 * std::sin(4 * std::numbers::pi * x2);
  });
  const double int_zeta2 = zeta.l2_norm() * zeta.l2_norm();
  std::vector<double> pair2(n);
  std::vector<std::vector<double>> vals(ts.size(), std::vector<double>(n));
  for (int i = 0; i < n; ++i) {
    auto xi = sample_white(g, 11, i);
    double p = 0;
    for (std::size_t j = 0; j < g.size(); ++j) p += xi.field.values()[j] * zeta.values()[j];
    p *= g.h1() * g.h2();
    pair2[i] = p * p;
    auto v = point_values(forward(xi.field), ts);
    for (std::size_t j = 0; j < ts.size(); ++j) vals[j][i] = v[j];
  }
  auto pv = mean_se(pair2);
  o.detail << "Var(xi,zeta) " << fmt("%.4f", pv.mean) << " vs " << fmt("%.4f", int_zeta2) << " ("
           << fmt("%.1f", std::abs(pv.mean - int_zeta2) / pv.se) << " se)";
  o.require(std::abs(pv.mean - int_zeta2) <= 5 * pv.se, "pairing variance");

  ScalingSeries ser{"xi_t", zero, 2, "time", {}, n};
  double worst_z = 0;
  for (std::size_t j = 0; j < ts.size(); ++j) {
    std::vector<double> sq(n);
    for (int i = 0; i < n; ++i) sq[i] = vals[j][i] * vals[j][i];
    auto m = mean_se(sq);
    const double oracle = mollified_variance(g, ts[j]);
    const double z = std::abs(m.mean - oracle) / m.se;
    worst_z = std::max(worst_z, z);
    o.require(z <= 5, "Parseval at t=2^" + std::to_string(j - 16));
    auto a = annealed_moment(vals[j], 2);
    ser.points.push_back({ts[j], a.estimate, a.stderr});
  }
  auto f = scaling_fit(ser);
  o.detail << ", Parseval worst " << fmt("%.1f", worst_z) << " se, slope "
           << fmt("%.3f +- %.3f", 2 * f.slope, 2 * f.stderr) << " (target -0.75 +- 0.05)";
  o.require(std::abs(2 * f.slope + 0.75) <= 0.05, "slope");
}

void c5(Outcome& o) {
  ModelConfig m;
  m.grid = Grid{8.0, 4.0, 256, 4096};
  const int n = 1024;
  ScalingSeries ser{"grad_tau", zero, 2, "tau", {}, n};
  for (int j = -18; j <= -12; j += 2) {
    m.tau = std::ldexp(1.0, j);
    auto a = annealed_moment(gradient_at_base(m, 21, n, {0, 0}), 2);
    ser.points.push_back({m.tau, a.estimate, a.stderr});
  }
  auto f = scaling_fit(ser);
  o.detail << "E(d1 v_tau)^2 slope " << fmt("%.3f +- %.3f", 2 * f.slope, 2 * f.stderr)
           << " over tau = 2^-18..2^-12 on the 8 x 4 torus, " << n << " samples (target -0.25 +- 0.05)";
  o.require(std::abs(2 * f.slope + 0.25) <= 0.05, "slope");
}

void c6(Outcome& o) {
  const ModelConfig m = default_model();
  const int n = 64;
  CalibrationConfig cal;
  cal.seed = 33;
  cal.samples = n;
  auto base = calibrate_counterterms(m, cal);
  o.require(base.value(zero) == 0.0 && base.value(e0) == 0.0, "parity pinning");

  // unpinned estimates of c_0 and c_e0
  const int nu = 256;
  std::vector<double> v0(nu), ve0(nu);
  for (int s = 0; s < nu; ++s) {
    auto ms = build_model_sample(m, sample_white(m.grid, 31, s), {0, 0}, zero_counterterms(m), &e0);
    v0[s] = ms.PiMinus.at(zero).mean();
    ve0[s] = ms.PiMinus.at(e0).mean();
  }
  auto a = mean_se(v0), b = mean_se(ve0);
  o.detail << "c_0 " << fmt("%.1f", std::abs(a.mean) / a.se) << " se, c_e0 " << fmt("%.1f", std::abs(b.mean) / b.se)
           << " se from 0";
  o.require(std::abs(a.mean) <= 3 * a.se, "c_0");
  o.require(std::abs(b.mean) <= 3 * b.se, "c_e0");

  ScalingSeries ser{"counterterm_tau", e1, 2, "tau", {}, n};
  for (int j = -18; j <= -12; j += 2) {
    ModelConfig mt = m;
    mt.tau = std::ldexp(1.0, j);
    CalibrationConfig ct = cal;
    ct.seed = 32;
    ct.last = e1;
    auto c = calibrate_counterterms(mt, ct);
    ser.points.push_back({mt.tau, std::abs(c.value(e1)), c.stderr_at(e1)});
  }
  auto f = scaling_fit(ser);
  o.detail << ", c_e1(tau) slope " << fmt("%.3f +- %.3f", f.slope, f.stderr) << " (target -0.25 +- 0.1)";
  o.require(std::abs(f.slope + 0.25) <= 0.1, "c_e1 slope");

  auto compare = [&](const Counterterms& other, const std::string& what) {
    double worst = 0;
    for (auto& beta : counterterm_candidates(m)) {
      double se = std::hypot(base.stderr_at(beta), other.stderr_at(beta));
      double z = se > 0 ? std::abs(base.value(beta) - other.value(beta)) / se : 0.0;
      if (se == 0) o.require(base.value(beta) == other.value(beta), what + " " + beta.to_string());
      worst = std::max(worst, z);
    }
    o.detail << ", " << what << " " << fmt("%.2f", worst) << " se";
    o.require(worst <= 3, what);
  };
  CalibrationConfig refl = cal;
  refl.reflect = true;
  compare(calibrate_counterterms(m, refl), "reflection");
  CalibrationConfig moved = cal;
  moved.base_points = {{8, -64}};
  compare(calibrate_counterterms(m, moved), "base-point change");
}

void c7(Outcome& o) {
  const auto& r = shared_experiment();
  int n = 0, failed = 0;
  const FitRecord* pt = r.find_fit("pi_minus_t", zero);
  o.require(pt != nullptr, "pi_minus_t fit present");
  if (pt) {
    o.detail << "pi_minus_t(0) slope " << fmt("%.3f +- %.3f", pt->slope, pt->stderr) << " (target -1.5 +- 0.05)";
    o.require(std::abs(pt->slope + 1.5) <= 0.05, "pi_minus_t slope");
  }
  std::ostringstream bad;
  const FitRecord* widest = nullptr;
  for (auto& f : r.fits) {
    if (f.quantity != "pi_x1" && f.quantity != "pi_x2") continue;
    ++n;
    if (!widest || std::abs(f.slope - f.target) > std::abs(widest->slope - widest->target)) widest = &f;
    if (std::abs(f.slope - f.target) > 0.15) {
      ++failed;
      bad << " " << f.quantity << "(" << f.beta.to_string() << ")=" << fmt("%.3f", f.slope) << "/"
          << fmt("%.2f", f.target);
    }
  }
  o.detail << ", spatial fits " << n - failed << "/" << n << " within 0.15 on the 256 x 4096 grid";
  if (widest)
    o.detail << ", largest deviation " << widest->quantity << "(" << widest->beta.to_string()
             << ") = " << fmt("%.3f +- %.3f", widest->slope, widest->stderr) << " vs " << fmt("%.2f", widest->target);
  if (failed) o.detail << ", off target:" << bad.str();
  o.require(n > 0 && failed == 0, "spatial slopes");
}

void c8(Outcome& o) {
  const ModelConfig m = default_model();
  const auto& c = shared_counterterms();
  double worst = 0;
  std::size_t count = 0;
  for (int s = 0; s < 16; ++s) {
    auto ms = build_model_sample(m, sample_white(m.grid, 51, s), {5, -40}, c);
    auto d = directional_derivative(m, ms, c, sample_white(m.grid, 52, s).field);
    for (auto& r : base_point_residuals(ms, c, d)) {
      worst = std::max({worst, r.pi_minus, r.delta});
      ++count;
    }
  }
  o.detail << count << " residuals over 16 samples, worst " << fmt("%.2e", worst) << " (bound 1e-9)";
  o.require(worst <= 1e-9, "residual");
}

void c9(Outcome& o) {
  const ModelConfig m = default_model();
  const auto& c = shared_counterterms();
  const Node x{0, 0};
  double lo = 1e300, hi = 0;
  for (int s = 0; s < 4; ++s) {
    auto xi = sample_white(m.grid, 61, s);
    auto ms = build_model_sample(m, xi, x, c);
    const GridField dirs[] = {
        smooth_bump(m.grid, 1e-3, {0.3, 0.1}),
        sample_white(m.grid, 62, s).field,
        GridField::from_function(m.grid, [](double x1, double x2) {
          return std::sin(std::numbers::pi * x1) * std::cos(4 * std::numbers::pi * x2);
        }),
    };
    for (const auto& dxi : dirs) {
      auto d = directional_derivative(m, ms, c, dxi);
      auto fd_error = [&](double h) {
        NoiseSample p = xi;
        p.field = xi.field + h * dxi;
        auto mh = build_model_sample(m, p, x, c);
        double err = 0;
        for (auto& [b, f] : ms.Pi.coeffs()) {
          const double scale = d.dPi.at(b).l2_norm();
          if (scale == 0) continue;
          auto fd = (1.0 / h) * (mh.Pi.at(b) - f);
          err = std::max(err, (fd - d.dPi.at(b)).l2_norm() / scale);
        }
        return err;
      };
      const double ratio = fd_error(1e-3) / fd_error(1e-4);
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  o.detail << "error ratio s=1e-3 vs 1e-4 in [" << fmt("%.2f", lo) << ", " << fmt("%.2f", hi)
           << "] over 3 directions x 4 samples (target 10, accepted 7..13)";
  o.require(lo >= 7 && hi <= 13, "ratio");
}

// Block average of a fine white-noise sample: the same realization at half the resolution.
NoiseSample coarsen(const NoiseSample& fine, const Grid& coarse) {
  GridField f(coarse);
  for (int i2 = 0; i2 < coarse.N2; ++i2)
    for (int i1 = 0; i1 < coarse.N1; ++i1)
      f.at(i1, i2) = 0.25 * (fine.field.at(2 * i1, 2 * i2) + fine.field.at(2 * i1 + 1, 2 * i2) +
                             fine.field.at(2 * i1, 2 * i2 + 1) + fine.field.at(2 * i1 + 1, 2 * i2 + 1));
  return {std::move(f), fine.seed, fine.sample_index};
}

void c10(Outcome& o) {
  const ModelConfig coarse = default_model();
  ModelConfig fine = coarse;
  fine.grid = Grid{2.0, 0.5, 256, 4096};
  const auto& c = shared_counterterms();
  FitOptions opt;
  opt.window = 0.25;
  const double t_smooth = std::pow(std::ldexp(1.0, -5), 4);

  double worst_coarse = 0, worst_fine = 0, worst_trans = 0;
  bool refines = true;
  for (int s = 0; s < 2; ++s) {
    auto xf = sample_white(fine.grid, 71, s);
    auto xc = coarsen(xf, coarse.grid);
    auto mx = build_model_sample(coarse, xc, {0, 0}, c);
    auto my = build_model_sample(coarse, xc, {8, -64}, c);
    auto g = build_gamma_yx(coarse, mx, my, opt);
    auto rc = reexpansion_residual(mx, my, g.gamma, g.r_fit, t_smooth);
    auto fx = build_model_sample(fine, xf, {0, 0}, c);
    auto fy = build_model_sample(fine, xf, {16, -128}, c);
    auto gf = build_gamma_yx(fine, fx, fy, opt);
    auto rf = reexpansion_residual(fx, fy, gf.gamma, gf.r_fit, t_smooth);
    for (std::size_t k = 0; k < rc.size(); ++k) {
      const double a = std::max(rc[k].pi, rc[k].pi_minus), b = std::max(rf[k].pi, rf[k].pi_minus);
      worst_coarse = std::max(worst_coarse, a);
      worst_fine = std::max(worst_fine, b);
      if (!(b <= a || (a <= 1e-10 && b <= 1e-10))) {
        refines = false;
        o.detail << "[" << rc[k].beta.to_string() << " " << fmt("%.3g -> %.3g", a, b) << "] ";
      }
    }
    // transitivity through a third base point
    auto mz = build_model_sample(coarse, xc, {-12, 40}, c);
    auto g_xy = build_gamma_yx(coarse, my, mx, opt).gamma;
    auto g_yz = build_gamma_yx(coarse, mz, my, opt).gamma;
    auto g_xz = build_gamma_yx(coarse, mz, mx, opt).gamma;
    double scale = 0;
    for (auto& [k, v] : g_xz.entries()) scale = std::max(scale, std::abs(v));
    worst_trans = std::max(worst_trans, matrix_product(g_xy, g_yz).max_abs_diff(g_xz) / scale);
  }
  o.detail << "residual " << fmt("%.2e -> %.2e", worst_coarse, worst_fine) << " under 2x refinement, transitivity "
           << fmt("%.2e", worst_trans);
  o.require(worst_coarse <= 0.05 && worst_fine <= 0.05, "residual bound");
  o.require(refines, "refinement");
  o.require(worst_trans <= 0.05, "transitivity");

  // pi^(0)_0 = Pi_{y 0}(x) against the distance of y, along both axes
  const int n0 = 512;
  const long off1[] = {2, 4, 8, 16}, off2[] = {4, 16, 64, 256};
  const Node x{0, 0};
  for (int axis = 0; axis < 2; ++axis) {
    ScalingSeries ser{"pi0", zero, 2, "space", {}, n0};
    for (int k = 0; k < 4; ++k) {
      Node y = axis == 0 ? Node{off1[k], 0} : Node{0, off2[k]};
      std::vector<double> v(n0);
      for (int s = 0; s < n0; ++s) {
        auto my = build_model_sample(coarse, sample_white(coarse.grid, 72, s), y, c, &zero);
        v[s] = my.Pi.at(zero).at(x);
      }
      auto a = annealed_moment(v, 2);
      ser.points.push_back({carnot_distance(coarse.grid, x.point(coarse.grid), y.point(coarse.grid)), a.estimate,
                            a.stderr});
    }
    auto f = scaling_fit(ser);
    o.detail << ", pi0 slope x" << axis + 1 << " " << fmt("%.3f +- %.3f", f.slope, f.stderr);
    o.require(std::abs(f.slope - coarse.scaling.alpha) <= 0.1, "pi0 slope");
  }

  // the (e1, e0) entry of the full re-expansion matrix along x1
  const int n1 = 48;
  ScalingSeries ser{"gamma_e1_e0", e1, 2, "space", {}, n1};
  std::vector<std::vector<double>> entries(4, std::vector<double>(n1));
  for (int s = 0; s < n1; ++s) {
    auto xi = sample_white(coarse.grid, 73, s);
    auto mx = build_model_sample(coarse, xi, x, c);
    for (int k = 0; k < 4; ++k) {
      auto my = build_model_sample(coarse, xi, {off1[k], 0}, c);
      entries[k][s] = build_gamma_yx(coarse, mx, my, opt).gamma.entry(e1, e0);
    }
  }
  for (int k = 0; k < 4; ++k) {
    auto a = annealed_moment(entries[k], 2);
    ser.points.push_back({carnot_distance(coarse.grid, x.point(coarse.grid), Node{off1[k], 0}.point(coarse.grid)),
                          a.estimate, a.stderr});
  }
  auto f = scaling_fit(ser);
  o.detail << ", (e1,e0) slope " << fmt("%.3f +- %.3f", f.slope, f.stderr);
  o.require(std::abs(f.slope - coarse.scaling.alpha) <= 0.2, "(e1,e0) slope");
}

void c11(Outcome& o) {
  const auto& r = shared_experiment();
  const FitRecord* d = r.find_fit("sg_dual_norm", zero);
  o.require(d != nullptr, "dual-norm fit present");
  if (d) {
    o.detail << "dual-norm slope " << fmt("%.3f", d->slope) << " (target -1.5 +- 0.05)";
    o.require(std::abs(d->slope + 1.5) <= 0.05, "dual-norm slope");
  }
  int n = 0;
  double worst = 0;
  for (auto& k : r.checks)
    if (k.quantity == "sg_variance") {
      ++n;
      worst = std::max(worst, std::abs(k.lhs - k.rhs) / (k.bound / 5));
      o.require(k.pass, "variance at t^1/4=" + fmt("%.4g", k.scale));
    }
  o.detail << ", Var F vs dual norm^2 at " << n << " scales, worst " << fmt("%.1f", worst) << " se";
  o.require(n > 0, "variance checks present");
}

void c12(Outcome& o) { suite(o, schauder_suite(kDefault)); }

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"algebra suite", c1},
      {"shift covariance", c2},
      {"kernel suite", c3},
      {"noise laws", c4},
      {"UV divergence of the gradient", c5},
      {"counterterms", c6},
      {"model estimates", c7},
      {"base-point identities", c8},
      {"directional derivative", c9},
      {"re-expansion", c10},
      {"spectral gap sanity", c11},
      {"Schauder and Liouville", c12},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    all = all && o.pass;
    std::printf("criterion %2d %-32s %s  (%s; %.0f s)\n", n, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.str().c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
