#include "mirs/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mirs/schauder.hpp"

namespace mirs {

namespace {

using ojson = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Mean and stderr of the mean.
MomentEstimate mean_stderr(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += x;
  const double m = s / n;
  double q = 0;
  for (double x : v) q += (x - m) * (x - m);
  return {m, n > 1 ? std::sqrt(q / (n - 1) / n) : 0.0};
}

// Values of (f)_t at x for several t from the spectrum of f.
class ConvolvedPoint {
 public:
  ConvolvedPoint(const Grid& g, Point x, const std::vector<double>& ts) : g_(g), M1_(g.N1 / 2 + 1) {
    a_.resize(M1_);
    for (int k1 = 0; k1 < M1_; ++k1) {
      double w = (k1 == 0 || k1 == g.N1 / 2) ? 1.0 : 2.0;
      a_[k1] = w * std::polar(1.0, wavenumber1(g, k1) * x.x1);
    }
    b_.resize(g.N2);
    for (int k2 = 0; k2 < g.N2; ++k2) b_[k2] = std::polar(1.0, wavenumber2(g, k2) * x.x2);
    decay_.resize(ts.size());
    for (std::size_t j = 0; j < ts.size(); ++j) {
      decay_[j].resize(g.spectral_size());
      for (int k2 = 0; k2 < g.N2; ++k2)
        for (int k1 = 0; k1 < M1_; ++k1)
          decay_[j][static_cast<std::size_t>(k2) * M1_ + k1] =
              std::exp(-ts[j] * qnorm4(wavenumber1(g, k1), wavenumber2(g, k2)));
    }
  }

  std::vector<double> values(const GridField& f) const {
    Spectrum s = forward(f);
    std::vector<double> out(decay_.size());
    for (std::size_t j = 0; j < decay_.size(); ++j) {
      double acc = 0;
      for (int k2 = 0; k2 < g_.N2; ++k2) {
        std::complex<double> r = 0;
        const std::size_t row = static_cast<std::size_t>(k2) * M1_;
        for (int k1 = 0; k1 < M1_; ++k1) r += s.c[row + k1] * decay_[j][row + k1] * a_[k1];
        acc += (r * b_[k2]).real();
      }
      out[j] = acc / static_cast<double>(g_.size());
    }
    return out;
  }

 private:
  Grid g_;
  int M1_;
  std::vector<std::complex<double>> a_, b_;
  std::vector<std::vector<double>> decay_;
};

bool is_dyadic(double s) {
  double l = std::log2(s);
  return std::abs(l - std::round(l)) < 1e-9;
}

FitRecord make_fit(const ScalingSeries& s, double target, double tol) {
  FitRecord f{s.quantity, s.beta};
  auto r = scaling_fit(s);
  f.slope = r.slope;
  f.stderr = r.stderr;
  f.target = target;
  f.tol = tol;
  f.pass = std::abs(r.slope - target) <= tol;
  return f;
}

ojson config_object(const ExperimentConfig& c) {
  const auto& m = c.model;
  ojson j;
  j["alpha"] = m.scaling.alpha;
  j["epsilon"] = m.scaling.epsilon;
  j["lambda"] = m.scaling.lambda;
  j["grid"] = {{"n1", m.grid.N1}, {"n2", m.grid.N2}, {"l1", m.grid.L1}, {"l2", m.grid.L2}};
  j["tau"] = m.tau;
  j["cutoff"] = m.cutoff;
  j["seed"] = c.seed;
  j["samples"] = c.samples;
  j["p"] = c.p_list;
  j["base_point"] = {c.x.i1, c.x.i2};
  j["log2_d"] = {c.log2_d_min, c.log2_d_max};
  j["log2_t_root"] = c.log2_t_root;
  j["tau_list"] = c.tau_list;
  j["uniformity_taus"] = c.uniformity_taus;
  j["calibration_samples"] = c.calibration_samples;
  return j;
}

// Offsets along x1 and x2 at Carnot distance d: (d, 0) and (0, d^2).
std::pair<Node, Node> axis_points(const Grid& g, const Node& x, double d) {
  long o1 = std::lround(d / g.h1()), o2 = std::lround(d * d / g.h2());
  if (std::abs(o1 * g.h1() - d) > 1e-9 * d || std::abs(o2 * g.h2() - d * d) > 1e-9 * d * d)
    throw std::invalid_argument("evaluation distance is not on the grid: " + fmt(d));
  return {Node{x.i1 + o1, x.i2}, Node{x.i1, x.i2 + o2}};
}

// z1 slope in x1 at one tau, with its own calibration of c_z1.
SlopeFit z1_spatial_slope(const ExperimentConfig& cfg, double tau) {
  ModelConfig m = cfg.model;
  m.tau = tau;
  const MultiIndex z1 = MultiIndex::unit_k(1);
  CalibrationConfig cal;
  cal.seed = cfg.seed + 1;
  cal.samples = cfg.calibration_samples;
  cal.base_points = {cfg.x};
  cal.last = z1;
  Counterterms c = calibrate_counterterms(m, cal);
  std::vector<double> ds;
  for (int j = cfg.log2_d_min; j <= cfg.log2_d_max; ++j) ds.push_back(std::ldexp(1.0, j));
  std::vector<std::vector<double>> vals(ds.size(), std::vector<double>(cfg.samples));
  parallel_for(cfg.samples, cfg.workers, [&](int s) {
    auto ms = build_model_sample(m, sample_white(m.grid, cfg.seed, s), cfg.x, c, &z1);
    for (std::size_t j = 0; j < ds.size(); ++j)
      vals[j][s] = ms.Pi.at(z1).at(axis_points(m.grid, cfg.x, ds[j]).first);
  });
  ScalingSeries ser{"pi_x1", z1, 2, "space", {}, cfg.samples};
  for (std::size_t j = 0; j < ds.size(); ++j) {
    auto e = annealed_moment(vals[j], 2);
    ser.points.push_back({ds[j], e.estimate, e.stderr});
  }
  return scaling_fit(ser);
}

}  // namespace

std::vector<double> gradient_at_base(const ModelConfig& cfg, std::uint64_t seed, int samples, const Node& x,
                                     int workers) {
  cfg.validate();
  const Grid& g = cfg.grid;
  const int M1 = g.N1 / 2 + 1;
  const double t_min = integration_t_min(g, cfg.effective_tau_floor());
  const Point px = x.point(g);
  // d1 of the solution of A v = xi_tau, evaluated at x, as one multiplier per mode
  std::vector<std::complex<double>> mult(g.spectral_size());
  for (int k2 = 0; k2 < g.N2; ++k2)
    for (int k1 = 0; k1 < M1; ++k1) {
      const double q1 = wavenumber1(g, k1), q2 = wavenumber2(g, k2);
      const std::size_t i = static_cast<std::size_t>(k2) * M1 + k1;
      if ((k1 == 0 && k2 == 0) || k1 == g.N1 / 2) {
        mult[i] = 0.0;
        continue;
      }
      const double w = k1 == 0 ? 1.0 : 2.0;
      const double q4 = qnorm4(q1, q2);
      mult[i] = w * std::exp(-(cfg.tau + t_min) * q4) * std::complex<double>(0, q1) /
                std::complex<double>(q1 * q1, q2) * std::polar(1.0, q1 * px.x1 + q2 * px.x2);
    }
  std::vector<double> out(samples);
  parallel_for(samples, workers, [&](int s) {
    Spectrum sp = forward(sample_white(g, seed, s).field);
    double acc = 0;
    for (std::size_t i = 0; i < mult.size(); ++i) acc += (sp.c[i] * mult[i]).real();
    out[s] = acc / static_cast<double>(g.size());
  });
  return out;
}

MomentEstimate annealed_moment(const std::vector<double>& samples, int p) {
  if (p != 2 && p != 4) throw std::invalid_argument("annealed_moment: p must be 2 or 4");
  if (samples.size() < 30) throw std::invalid_argument("annealed_moment: at least 30 samples required");
  const std::size_t n = samples.size();
  std::vector<double> xp(n);
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    xp[i] = std::pow(std::abs(samples[i]), p);
    sum += xp[i];
  }
  const double inv_p = 1.0 / p;
  MomentEstimate out;
  out.estimate = std::pow(sum / n, inv_p);
  std::vector<double> loo(n);
  double mean_loo = 0;
  for (std::size_t i = 0; i < n; ++i) {
    loo[i] = std::pow(std::max(0.0, (sum - xp[i]) / (n - 1)), inv_p);
    mean_loo += loo[i];
  }
  mean_loo /= n;
  double v = 0;
  for (double l : loo) v += (l - mean_loo) * (l - mean_loo);
  out.stderr = std::sqrt(v * (n - 1) / n);
  return out;
}

SlopeFit scaling_fit(const ScalingSeries& s) {
  const std::size_t n = s.points.size();
  if (n < 3) throw std::invalid_argument("scaling_fit: at least 3 scales required");
  std::vector<double> X(n), Y(n), W(n);
  bool weighted = true;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = s.points[i];
    if (!(p.scale > 0)) throw std::invalid_argument("scaling_fit: nonpositive scale");
    if (!(p.estimate > 0))
      throw std::invalid_argument("scaling_fit: nonpositive estimate in " + s.quantity + " " + s.beta.to_string());
    X[i] = std::log(p.scale);
    Y[i] = std::log(p.estimate);
    double rel = p.stderr / p.estimate;
    if (!(rel > 0)) weighted = false;
    W[i] = rel > 0 ? 1.0 / (rel * rel) : 1.0;
  }
  if (!weighted) std::fill(W.begin(), W.end(), 1.0);
  double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    S += W[i];
    Sx += W[i] * X[i];
    Sy += W[i] * Y[i];
    Sxx += W[i] * X[i] * X[i];
    Sxy += W[i] * X[i] * Y[i];
  }
  const double det = S * Sxx - Sx * Sx;
  if (!(det > 0)) throw std::invalid_argument("scaling_fit: degenerate scales");
  SlopeFit f;
  f.slope = (S * Sxy - Sx * Sy) / det;
  if (weighted) {
    f.stderr = std::sqrt(S / det);
  } else {
    const double icpt = (Sy - f.slope * Sx) / S;
    double rss = 0;
    for (std::size_t i = 0; i < n; ++i) rss += std::pow(Y[i] - icpt - f.slope * X[i], 2);
    f.stderr = n > 2 ? std::sqrt(rss / (n - 2) * S / det) : 0.0;
  }
  return f;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max(n, 1));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::mutex mu;
  int next = 0;
  std::exception_ptr err;
  auto run = [&] {
    for (;;) {
      int i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (next >= n || err) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double mollified_variance(const Grid& g, double t) {
  double acc = 0;
  for (int k2 = 0; k2 < g.N2; ++k2)
    for (int k1 = 0; k1 < g.N1; ++k1) {
      int k1s = k1 <= g.N1 / 2 ? k1 : k1 - g.N1;
      acc += std::exp(-2 * t * qnorm4(wavenumber1(g, std::abs(k1s)), wavenumber2(g, k2)));
    }
  return acc / (g.L1 * g.L2);
}

bool ExperimentReport::all_pass() const {
  for (auto& f : fits)
    if (!f.pass) return false;
  for (auto& c : checks)
    if (!c.pass) return false;
  return true;
}

std::string ExperimentReport::csv() const {
  std::string out = "quantity,beta,p,scale_kind,scale,estimate,stderr,n_samples\n";
  for (auto& s : series)
    for (auto& p : s.points)
      out += s.quantity + ",\"" + s.beta.to_string() + "\"," + std::to_string(s.p) + "," + s.scale_kind + "," +
             fmt(p.scale) + "," + fmt(p.estimate) + "," + fmt(p.stderr) + "," + std::to_string(s.n_samples) + "\n";
  return out;
}

std::string ExperimentReport::summary_json() const {
  ojson j;
  j["config"] = config_json.empty() ? ojson::object() : ojson::parse(config_json);
  j["fits"] = ojson::array();
  for (auto& f : fits)
    j["fits"].push_back({{"quantity", f.quantity},
                         {"beta", f.beta.to_string()},
                         {"slope", f.slope},
                         {"stderr", f.stderr},
                         {"target", f.target},
                         {"tol", f.tol},
                         {"pass", f.pass}});
  j["checks"] = ojson::array();
  for (auto& c : checks)
    j["checks"].push_back({{"quantity", c.quantity},
                           {"beta", c.beta.to_string()},
                           {"scale", c.scale},
                           {"lhs", c.lhs},
                           {"rhs", c.rhs},
                           {"bound", c.bound},
                           {"pass", c.pass}});
  return j.dump(2) + "\n";
}

const FitRecord* ExperimentReport::find_fit(const std::string& quantity, const MultiIndex& beta) const {
  for (auto& f : fits)
    if (f.quantity == quantity && f.beta == beta) return &f;
  return nullptr;
}

const ScalingSeries* ExperimentReport::find_series(const std::string& quantity, const MultiIndex& beta,
                                                   int p) const {
  for (auto& s : series)
    if (s.quantity == quantity && s.beta == beta && s.p == p) return &s;
  return nullptr;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const Counterterms& c) {
  const ModelConfig& mc = cfg.model;
  mc.validate();
  if (cfg.samples < 30) throw std::invalid_argument("run_experiment: at least 30 samples required");
  if (cfg.log2_d_max - cfg.log2_d_min < 2 && cfg.run_space)
    throw std::invalid_argument("run_experiment: at least 3 distances required");
  for (int p : cfg.p_list)
    if (p != 2 && p != 4) throw std::invalid_argument("run_experiment: p must be 2 or 4");
  const Grid& g = mc.grid;
  const double ah = mc.scaling.alpha_hat();
  auto trunc = mc.truncation();
  const auto& idx = trunc->indices();
  const MultiIndex zero = MultiIndex::zero();

  ExperimentReport rep;
  rep.config_json = config_object(cfg).dump();

  std::vector<double> ds, troots, ts;
  for (int j = cfg.log2_d_min; j <= cfg.log2_d_max; ++j) ds.push_back(std::ldexp(1.0, j));
  for (int j : cfg.log2_t_root) {
    double r = std::ldexp(1.0, j);
    troots.push_back(r);
    ts.push_back(r * r * r * r);
  }
  std::vector<std::pair<Node, Node>> ys;
  for (double d : ds) ys.push_back(axis_points(g, cfg.x, d));

  // per sample: [beta][d] along x1, along x2; [beta][t] convolved Pi^-
  const std::size_t nb = idx.size(), nd = ds.size(), nt = ts.size();
  const int N = cfg.samples;
  std::vector<double> v1(nb * nd * N), v2(nb * nd * N), vt(nb * nt * N);
  auto slot = [N](std::size_t b, std::size_t j, std::size_t nj, int s) { return (b * nj + j) * N + s; };

  if (cfg.run_space || cfg.run_time || cfg.run_sg) {
    ConvolvedPoint conv(g, cfg.x.point(g), ts);
    const bool need_t = (cfg.run_time || cfg.run_sg) && nt > 0;
    parallel_for(N, cfg.workers, [&](int s) {
      auto m = build_model_sample(mc, sample_white(g, cfg.seed, s), cfg.x, c);
      for (std::size_t b = 0; b < nb; ++b) {
        const GridField& pi = m.Pi.at(idx[b]);
        for (std::size_t j = 0; j < nd; ++j) {
          v1[slot(b, j, nd, s)] = pi.at(ys[j].first);
          v2[slot(b, j, nd, s)] = pi.at(ys[j].second);
        }
        if (need_t && (cfg.run_time || idx[b] == zero)) {
          auto vals = conv.values(m.PiMinus.at(idx[b]));
          for (std::size_t j = 0; j < nt; ++j) vt[slot(b, j, nt, s)] = vals[j];
        }
      }
    });
  }

  auto column = [&](const std::vector<double>& v, std::size_t b, std::size_t j, std::size_t nj) {
    return std::vector<double>(v.begin() + slot(b, j, nj, 0), v.begin() + slot(b, j, nj, 0) + N);
  };
  auto all_zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };

  if (cfg.run_space) {
    for (std::size_t b = 0; b < nb; ++b) {
      const double target = idx[b].homogeneity().value(ah);
      for (int axis = 0; axis < 2; ++axis) {
        const auto& v = axis == 0 ? v1 : v2;
        for (int p : cfg.p_list) {
          ScalingSeries ser{axis == 0 ? "pi_x1" : "pi_x2", idx[b], p, "space", {}, N};
          bool zero_series = false;
          for (std::size_t j = 0; j < nd; ++j) {
            auto col = column(v, b, j, nd);
            if (all_zero(col)) zero_series = true;
            auto e = annealed_moment(col, p);
            ser.points.push_back({ds[j], e.estimate, e.stderr});
          }
          // the polynomial sector vanishes identically along some axes
          if (zero_series) continue;
          rep.series.push_back(ser);
          rep.fits.push_back(make_fit(ser, target, cfg.tol_space));
        }
      }
    }
    // parabolic rescaling by s = 2 at the middle of the window, beta = 0
    if (nd >= 2) {
      const std::size_t b0 = trunc->position(zero), j = (nd - 1) / 2;
      for (int axis = 0; axis < 2; ++axis) {
        const auto& v = axis == 0 ? v1 : v2;
        auto lo = annealed_moment(column(v, b0, j, nd), 2), hi = annealed_moment(column(v, b0, j + 1, nd), 2);
        const double s_pow = std::pow(2.0, zero.homogeneity().value(ah));
        CheckRecord ck{axis == 0 ? "rescale_consistency_x1" : "rescale_consistency_x2", zero, ds[j]};
        ck.lhs = hi.estimate;
        ck.rhs = s_pow * lo.estimate;
        ck.bound = cfg.z_equal * std::hypot(hi.stderr, s_pow * lo.stderr);
        ck.pass = std::abs(ck.lhs - ck.rhs) <= ck.bound;
        rep.checks.push_back(ck);
      }
    }
  }

  if (cfg.run_time && nt >= 3) {
    for (std::size_t b = 0; b < nb; ++b) {
      const double target = idx[b].homogeneity().value(ah) - 2.0;
      for (int p : cfg.p_list) {
        ScalingSeries ser{"pi_minus_t", idx[b], p, "time", {}, N};
        bool zero_series = false;
        for (std::size_t j = 0; j < nt; ++j) {
          auto col = column(vt, b, j, nt);
          if (all_zero(col)) zero_series = true;
          auto e = annealed_moment(col, p);
          ser.points.push_back({troots[j], e.estimate, e.stderr});
        }
        if (zero_series) continue;
        rep.series.push_back(ser);
        if (idx[b] == zero) {
          rep.fits.push_back(make_fit(ser, target, cfg.tol_time));
        } else {
          // only an upper bound for beta != 0: the moment may grow more slowly as t -> 0
          auto f = make_fit(ser, target, cfg.tol_space);
          f.pass = f.slope >= target - f.tol;
          rep.fits.push_back(f);
        }
      }
    }
  }

  // spectral gap, equality case: F = xi_t(x) is linear with dF/dxi = psi_t(x - .)
  if (cfg.run_sg && nt >= 3 && std::abs(mc.scaling.alpha - 0.5) < 1e-12) {
    const std::size_t b0 = trunc->position(zero);
    ScalingSeries dual{"sg_dual_norm", zero, 2, "time", {}, 0};
    for (std::size_t j = 0; j < nt; ++j) {
      const double oracle = mollified_variance(g, ts[j] + mc.tau);
      dual.points.push_back({troots[j], std::sqrt(oracle), 0.0});
      auto col = column(vt, b0, j, nt);
      for (double& x : col) x *= x;
      auto ms = mean_stderr(col);
      CheckRecord ck{"sg_variance", zero, troots[j], ms.estimate, oracle, cfg.z_equal * ms.stderr};
      ck.pass = std::abs(ck.lhs - ck.rhs) <= ck.bound;
      rep.checks.push_back(ck);
    }
    rep.series.push_back(dual);
    rep.fits.push_back(make_fit(dual, mc.scaling.alpha - 2.0, cfg.tol_sg));
  }

  if (cfg.tau_list.size() >= 3) {
    const MultiIndex z1 = MultiIndex::unit_k(1);
    ScalingSeries cser{"counterterm_tau", z1, 2, "tau", {}, cfg.calibration_samples};
    ScalingSeries gser{"grad_tau", zero, 2, "tau", {}, N};
    for (double tau : cfg.tau_list) {
      if (!is_dyadic(tau)) throw std::invalid_argument("tau_list entries must be dyadic");
      ModelConfig m = mc;
      m.tau = tau;
      if (cfg.calibration_samples > 0) {
        CalibrationConfig cal;
        cal.seed = cfg.seed + 1;
        cal.samples = cfg.calibration_samples;
        cal.base_points = {cfg.x};
        cal.last = z1;
        Counterterms ct = calibrate_counterterms(m, cal);
        cser.points.push_back({tau, std::abs(ct.value(z1)), ct.stderr_at(z1)});
      }
      auto grad = gradient_at_base(m, cfg.seed, N, cfg.x, cfg.workers);
      auto e = annealed_moment(grad, 2);
      gser.points.push_back({tau, e.estimate, e.stderr});
    }
    if (cfg.calibration_samples > 0) {
      rep.series.push_back(cser);
      rep.fits.push_back(make_fit(cser, -0.25, cfg.tol_tau));
    }
    rep.series.push_back(gser);
    rep.fits.push_back(make_fit(gser, -0.125, cfg.tol_tau / 2));
  }

  if (cfg.uniformity_taus.size() == 2) {
    auto a = z1_spatial_slope(cfg, cfg.uniformity_taus[0]);
    auto b = z1_spatial_slope(cfg, cfg.uniformity_taus[1]);
    CheckRecord ck{"tau_uniformity", MultiIndex::unit_k(1), cfg.uniformity_taus[1] / cfg.uniformity_taus[0]};
    ck.lhs = a.slope;
    ck.rhs = b.slope;
    ck.bound = 3.0 * std::hypot(a.stderr, b.stderr);
    ck.pass = std::abs(a.slope - b.slope) <= ck.bound;
    rep.checks.push_back(ck);
  }
  return rep;
}

}  // namespace mirs
