#include "mirs/model.hpp"

#include <algorithm>
#include <stdexcept>

#include <json.hpp>

#include "mirs/schauder.hpp"

namespace mirs {

double ModelConfig::effective_tau_floor() const {
  return tau_floor > 0 ? tau_floor : std::max(tau, tau_floor_min(grid));
}

TruncationPtr ModelConfig::truncation() const { return Truncation::make(cutoff, scaling, true); }

void ModelConfig::validate() const {
  grid.validate();
  scaling.validate();
  if (!(tau >= 0)) throw std::invalid_argument("tau must be >= 0");
  if (effective_tau_floor() < tau_floor_min(grid))
    throw std::invalid_argument("tau_floor below the grid resolution");
  if (!(cutoff > 0)) throw std::invalid_argument("cutoff must be positive");
}

double Counterterms::value(const MultiIndex& b) const {
  const double* v = c.find(b);
  return v ? *v : 0.0;
}

double Counterterms::stderr_at(const MultiIndex& b) const {
  auto it = stderr_of.find(b);
  return it == stderr_of.end() ? 0.0 : it->second;
}

std::string Counterterms::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = config_echo.empty() ? nlohmann::ordered_json::object()
                                    : nlohmann::ordered_json::parse(config_echo);
  j["tau"] = tau;
  j["cutoff"] = cutoff;
  j["samples_used"] = samples_used;
  auto list = nlohmann::ordered_json::array();
  for (auto& [b, v] : c.coeffs())
    list.push_back({{"beta", b.to_string()}, {"c", v}, {"stderr", stderr_at(b)}});
  j["counterterms"] = list;
  return j.dump(2) + "\n";
}

Counterterms Counterterms::from_json(const std::string& text, TruncationPtr t) {
  auto j = nlohmann::ordered_json::parse(text);
  Counterterms out;
  out.c = Series<double>(std::move(t));
  out.tau = j.at("tau").get<double>();
  out.cutoff = j.at("cutoff").get<double>();
  out.samples_used = j.at("samples_used").get<int>();
  if (j.contains("config")) out.config_echo = j["config"].dump();
  for (auto& e : j.at("counterterms")) {
    auto b = MultiIndex::parse(e.at("beta").get<std::string>());
    if (!b.is_pop_only()) throw std::invalid_argument("counterterm index must be pop-only: " + b.to_string());
    if (!out.c.admits(b)) throw std::invalid_argument("counterterm index outside the truncation: " + b.to_string());
    out.c.set(b, e.at("c").get<double>());
    out.stderr_of[b] = e.value("stderr", 0.0);
  }
  return out;
}

Counterterms zero_counterterms(const ModelConfig& cfg) {
  Counterterms out;
  out.c = Series<double>(cfg.truncation());
  out.tau = cfg.tau;
  out.cutoff = cfg.cutoff;
  return out;
}

namespace {

struct Ops {
  Grid grid;
  Node x;
  double tau_floor;
  Scaling scaling;

  double eta(const MultiIndex& b) const { return b.homogeneity().value(scaling.alpha_hat()); }

  // (y - x)^n and its d1^2
  std::pair<GridField, GridField> unit(DerivIndex n) const {
    Point px = x.point(grid);
    GridField d11 = n.n1 >= 2 ? static_cast<double>(n.n1 * (n.n1 - 1)) * monomial(grid, px, {n.n1 - 2, n.n2})
                              : GridField(grid);
    return {monomial(grid, px, n), std::move(d11)};
  }
  std::pair<GridField, GridField> solve(const GridField& f, const MultiIndex& b) const {
    auto r = integrate_with_d11(f, x, eta(b), tau_floor);
    return {std::move(r.u), std::move(r.d11u)};
  }
};

DerivIndex unit_n_of(const MultiIndex& b) { return b.deriv().begin()->first; }

// value-only build
void run(const Ops& ops, const TruncationPtr& t, const GridField& xi, const Series<double>& c,
         std::size_t count, Series<GridField>& pi, Series<GridField>& pp, Series<GridField>& pm) {
  auto h = counterterm_shifts(c);
  for (std::size_t i = 0; i < count; ++i) {
    const MultiIndex& b = t->indices()[i];
    if (b.is_unit_n()) {
      auto [u, d] = ops.unit(unit_n_of(b));
      pm.set(b, pi_minus_component(b, pi, pp, h, xi));
      pi.set(b, std::move(u));
      pp.set(b, std::move(d));
      continue;
    }
    GridField m = pi_minus_component(b, pi, pp, h, xi);
    auto [u, d] = ops.solve(m, b);
    pm.set(b, std::move(m));
    pi.set(b, std::move(u));
    pp.set(b, std::move(d));
  }
}

std::size_t count_through(const TruncationPtr& t, const MultiIndex* stop_after) {
  return stop_after ? t->position(*stop_after) + 1 : t->size();
}

void check_cutoff(const ModelConfig& cfg, const Counterterms& c) {
  if (c.cutoff > 0 && cfg.cutoff > c.cutoff + 1e-12)
    throw std::invalid_argument("model cutoff exceeds the counterterm calibration cutoff");
}

}  // namespace

ModelSample build_model_sample(const ModelConfig& cfg, const NoiseSample& noise, const Node& x,
                               const Counterterms& c, const MultiIndex* stop_after) {
  cfg.validate();
  check_cutoff(cfg, c);
  if (!(noise.field.grid() == cfg.grid)) throw std::invalid_argument("noise grid differs from the model grid");
  auto t = cfg.truncation();
  ModelSample m{x, cfg.tau, noise, mollify(noise, cfg.tau), Series<GridField>(t), Series<GridField>(t),
                Series<GridField>(t)};
  Series<double> cc(t);
  for (auto& [b, v] : c.c.coeffs()) cc.set(b, v);
  Ops ops{cfg.grid, x, cfg.effective_tau_floor(), cfg.scaling};
  run(ops, t, m.xi_tau, cc, count_through(t, stop_after), m.Pi, m.PiPrime, m.PiMinus);
  return m;
}

bool odd_in_noise(const MultiIndex& b) { return (1 + b.brackets()) % 2 != 0; }

std::vector<MultiIndex> counterterm_candidates(const ModelConfig& cfg) {
  std::vector<MultiIndex> out;
  double ah = cfg.scaling.alpha_hat();
  auto t = cfg.truncation();
  for (auto& b : t->indices()) {
    if (!b.is_pop_only() || b.brackets() < 0) continue;
    if (b.homogeneity().value(ah) >= 2) continue;
    if (odd_in_noise(b)) continue;
    out.push_back(b);
  }
  return out;
}

Counterterms calibrate_counterterms(const ModelConfig& cfg, const CalibrationConfig& cal) {
  cfg.validate();
  if (cal.samples < 2) throw std::invalid_argument("calibration needs at least 2 samples");
  if (cal.base_points.empty()) throw std::invalid_argument("calibration needs a base point");
  const double t_max = std::pow(cfg.grid.L1 / 4, 4);
  if (std::isfinite(cal.t_bphz) && !(cal.t_bphz > 0 && cal.t_bphz <= t_max))
    throw std::invalid_argument("t_bphz must lie in (0, t_max]");
  Counterterms out = zero_counterterms(cfg);
  out.samples_used = cal.samples;
  // every non-candidate is pinned at exactly 0
  auto t = cfg.truncation();
  for (auto& b : t->indices())
    if (b.is_pop_only() && b.brackets() >= 0) {
      out.c.set(b, 0.0);
      out.stderr_of[b] = 0.0;
    }
  for (auto& beta : counterterm_candidates(cfg)) {
    out.c.set(beta, 0.0);
    double sum = 0, sum2 = 0;
    for (int s = 0; s < cal.samples; ++s) {
      NoiseSample xi = sample_white(cfg.grid, cal.seed, static_cast<std::uint64_t>(s));
      if (cal.reflect) xi.field = reflect_x1(xi.field);
      const Node& x = cal.base_points[s % cal.base_points.size()];
      auto m = build_model_sample(cfg, xi, x, out, &beta);
      const GridField& pm = m.PiMinus.at(beta);
      double v = std::isfinite(cal.t_bphz) ? semigroup_convolve(pm, cal.t_bphz).at(x) : pm.mean();
      sum += v;
      sum2 += v * v;
    }
    const double n = cal.samples;
    double mean = sum / n;
    double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    double se = std::sqrt(var / n);
    if (se > cal.max_stderr)
      throw std::runtime_error("calibration stderr for " + beta.to_string() + " above threshold; use more samples");
    out.c.set(beta, mean);
    out.stderr_of[beta] = se;
    if (cal.last && beta == *cal.last) break;
  }
  return out;
}

ModelTangent directional_derivative(const ModelConfig& cfg, const ModelSample& m,
                                    const Counterterms& c, const GridField& dxi) {
  using D = Dual<GridField>;
  check_cutoff(cfg, c);
  auto t = cfg.truncation();
  Ops ops{cfg.grid, m.x, cfg.effective_tau_floor(), cfg.scaling};
  Series<double> cc(t);
  for (auto& [b, v] : c.c.coeffs()) cc.set(b, v);
  auto h = counterterm_shifts(cc);
  const GridField zero(cfg.grid);
  ModelTangent out{semigroup_convolve(dxi, m.tau), Series<GridField>(t), Series<GridField>(t),
                   Series<GridField>(t)};
  D xi{m.xi_tau, out.dxi_tau};
  Series<D> pi(t), pp(t);
  for (auto& b : t->indices()) {
    D pm = pi_minus_component(b, pi, pp, h, xi);
    if (b.is_unit_n()) {
      auto [u, d] = ops.unit(unit_n_of(b));
      pi.set(b, D{std::move(u), zero});
      pp.set(b, D{std::move(d), zero});
    } else {
      auto v = ops.solve(pm.value, b);
      auto dv = ops.solve(pm.tangent, b);
      pi.set(b, D{std::move(v.first), dv.first});
      pp.set(b, D{std::move(v.second), dv.second});
    }
    out.dPi.set(b, pi.at(b).tangent);
    out.dPiPrime.set(b, pp.at(b).tangent);
    out.dPiMinus.set(b, std::move(pm.tangent));
  }
  return out;
}

std::vector<BasePointResidual> base_point_residuals(const ModelSample& m, const Counterterms& c,
                                                    const ModelTangent& delta) {
  const MultiIndex e0 = MultiIndex::unit_k(0);
  auto rel = [](double lhs, double rhs) {
    double scale = std::max(std::abs(lhs), std::abs(rhs));
    return scale == 0 ? 0.0 : std::abs(lhs - rhs) / scale;
  };
  std::vector<BasePointResidual> out;
  for (auto& [b, pm] : m.PiMinus.coeffs()) {
    BasePointResidual r{b};
    double z0_term = 0, dz0_term = 0;
    if (b.pop(0) > 0) {
      MultiIndex g = b - e0;
      if (auto* p = m.PiPrime.find(g)) z0_term = p->at(m.x);
      if (auto* p = delta.dPiPrime.find(g)) dz0_term = p->at(m.x);
    }
    const bool zero = b.is_zero();
    r.pi_minus = rel(pm.at(m.x), z0_term - c.value(b) + (zero ? m.xi_tau.at(m.x) : 0.0));
    if (auto* d = delta.dPiMinus.find(b))
      r.delta = rel(d->at(m.x), dz0_term + (zero ? delta.dxi_tau.at(m.x) : 0.0));
    out.push_back(r);
  }
  return out;
}

}  // namespace mirs
