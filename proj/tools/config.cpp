#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mirs::cli {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long n = 0;
  try {
    n = std::stol(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": not an integer: '" + v + "'");
  return n;
}

int to_int(const std::string& key, const std::string& v) { return static_cast<int>(to_long(key, v)); }

Node to_node(const std::string& key, const std::string& v) {
  auto parts = split(v, ':');
  if (parts.size() != 2) throw ConfigError(key + ": node must be i1:i2, got '" + v + "'");
  return {to_long(key, parts[0]), to_long(key, parts[1])};
}

template <class T, class F>
std::vector<T> to_list(const std::string& key, const std::string& v, F conv) {
  std::vector<T> out;
  if (trim(v).empty()) return out;
  for (auto& item : split(v, ',')) out.push_back(conv(key, item));
  return out;
}

std::string num(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& v, F f) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + f(v[i]);
  return s;
}

std::string node_text(const Node& n) { return std::to_string(n.i1) + ":" + std::to_string(n.i2); }

using Setter = std::function<void(Config&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"alpha", [](Config& c, auto& k, auto& v) { c.alpha = to_double(k, v); }},
      {"epsilon", [](Config& c, auto& k, auto& v) { c.epsilon = to_double(k, v); }},
      {"lambda",
       [](Config& c, auto& k, auto& v) {
         c.lambda = to_double(k, v);
         c.lambda_set = true;
       }},
      {"grid.n1", [](Config& c, auto& k, auto& v) { c.grid.N1 = to_int(k, v); }},
      {"grid.n2", [](Config& c, auto& k, auto& v) { c.grid.N2 = to_int(k, v); }},
      {"grid.l1", [](Config& c, auto& k, auto& v) { c.grid.L1 = to_double(k, v); }},
      {"grid.l2", [](Config& c, auto& k, auto& v) { c.grid.L2 = to_double(k, v); }},
      {"tau", [](Config& c, auto& k, auto& v) { c.tau = to_double(k, v); }},
      {"cutoff", [](Config& c, auto& k, auto& v) { c.cutoff = to_double(k, v); }},
      {"samples", [](Config& c, auto& k, auto& v) { c.samples = to_int(k, v); }},
      {"seed", [](Config& c, auto& k, auto& v) { c.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
      {"workers", [](Config& c, auto& k, auto& v) { c.workers = to_int(k, v); }},
      {"p", [](Config& c, auto& k, auto& v) { c.p = to_list<int>(k, v, to_int); }},
      {"t.log2_root", [](Config& c, auto& k, auto& v) { c.t_log2_root = to_list<int>(k, v, to_int); }},
      {"base_points", [](Config& c, auto& k, auto& v) { c.base_points = to_list<Node>(k, v, to_node); }},
      {"window.log2_min", [](Config& c, auto& k, auto& v) { c.window_log2_min = to_int(k, v); }},
      {"window.log2_max", [](Config& c, auto& k, auto& v) { c.window_log2_max = to_int(k, v); }},
      {"tau.list", [](Config& c, auto& k, auto& v) { c.tau_list = to_list<double>(k, v, to_double); }},
      {"tau.uniformity", [](Config& c, auto& k, auto& v) { c.uniformity_taus = to_list<double>(k, v, to_double); }},
      {"calibration.samples", [](Config& c, auto& k, auto& v) { c.calibration_samples = to_int(k, v); }},
      {"calibration.t_bphz", [](Config& c, auto& k, auto& v) { c.calibration_t_bphz = to_double(k, v); }},
      {"calibration.table_samples",
       [](Config& c, auto& k, auto& v) { c.table_calibration_samples = to_int(k, v); }},
      {"reexpand.y", [](Config& c, auto& k, auto& v) { c.reexpand_y = to_node(k, v); }},
      {"reexpand.max_residual", [](Config& c, auto& k, auto& v) { c.reexpand_max_residual = to_double(k, v); }},
      {"tol.space", [](Config& c, auto& k, auto& v) { c.tol_space = to_double(k, v); }},
      {"tol.time", [](Config& c, auto& k, auto& v) { c.tol_time = to_double(k, v); }},
      {"tol.tau", [](Config& c, auto& k, auto& v) { c.tol_tau = to_double(k, v); }},
      {"tol.sg", [](Config& c, auto& k, auto& v) { c.tol_sg = to_double(k, v); }},
      {"output.dir", [](Config& c, auto&, auto& v) { c.output_dir = v; }},
  };
  return m;
}

}  // namespace

ModelConfig Config::model() const {
  ModelConfig m;
  m.grid = grid;
  m.scaling = Scaling{alpha, epsilon, lambda};
  m.cutoff = cutoff;
  m.tau = tau;
  return m;
}

ExperimentConfig Config::experiment() const {
  ExperimentConfig e;
  e.model = model();
  e.seed = seed;
  e.samples = samples;
  e.workers = workers;
  e.p_list = p;
  e.x = base_points.front();
  e.log2_d_min = window_log2_min;
  e.log2_d_max = window_log2_max;
  e.log2_t_root = t_log2_root;
  e.tau_list = tau_list;
  e.uniformity_taus = uniformity_taus;
  e.calibration_samples = table_calibration_samples;
  e.tol_space = tol_space;
  e.tol_time = tol_time;
  e.tol_tau = tol_tau;
  e.tol_sg = tol_sg;
  return e;
}

CalibrationConfig Config::calibration() const {
  CalibrationConfig c;
  c.seed = seed + 1000003;
  c.samples = calibration_samples;
  c.base_points = base_points;
  c.t_bphz = calibration_t_bphz;
  return c;
}

std::string Config::to_text() const {
  std::string s;
  auto kv = [&s](const std::string& k, const std::string& v) { s += k + " = " + v + "\n"; };
  kv("alpha", num(alpha));
  kv("epsilon", num(epsilon));
  kv("lambda", num(lambda));
  kv("grid.n1", std::to_string(grid.N1));
  kv("grid.n2", std::to_string(grid.N2));
  kv("grid.l1", num(grid.L1));
  kv("grid.l2", num(grid.L2));
  kv("tau", num(tau));
  kv("cutoff", num(cutoff));
  kv("samples", std::to_string(samples));
  kv("seed", std::to_string(seed));
  kv("workers", std::to_string(workers));
  kv("p", join(p, [](int v) { return std::to_string(v); }));
  kv("t.log2_root", join(t_log2_root, [](int v) { return std::to_string(v); }));
  kv("base_points", join(base_points, node_text));
  kv("window.log2_min", std::to_string(window_log2_min));
  kv("window.log2_max", std::to_string(window_log2_max));
  kv("tau.list", join(tau_list, num));
  kv("tau.uniformity", join(uniformity_taus, num));
  kv("calibration.samples", std::to_string(calibration_samples));
  kv("calibration.t_bphz", num(calibration_t_bphz));
  kv("calibration.table_samples", std::to_string(table_calibration_samples));
  kv("reexpand.y", node_text(reexpand_y));
  kv("reexpand.max_residual", num(reexpand_max_residual));
  kv("tol.space", num(tol_space));
  kv("tol.time", num(tol_time));
  kv("tol.tau", num(tol_tau));
  kv("tol.sg", num(tol_sg));
  kv("output.dir", output_dir);
  return s;
}

void Config::validate() const {
  if (!(alpha > 0.25 && alpha < 1.0)) throw ConfigError("alpha must lie in (0.25, 1)");
  if (!(lambda > 0 && lambda < alpha)) throw ConfigError("lambda must lie in (0, alpha)");
  try {
    model().validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (samples < 30) throw ConfigError("samples must be at least 30");
  if (calibration_samples < 2) throw ConfigError("calibration.samples must be at least 2");
  if (table_calibration_samples < 0) throw ConfigError("calibration.table_samples must be >= 0");
  if (workers < 0) throw ConfigError("workers must be >= 0");
  if (p.empty()) throw ConfigError("p must not be empty");
  for (int q : p)
    if (q != 2 && q != 4) throw ConfigError("p entries must be 2 or 4");
  if (base_points.empty()) throw ConfigError("base_points must not be empty");
  if (window_log2_max - window_log2_min < 2) throw ConfigError("window must span at least 3 dyadic distances");
  // the fit window and the t window stay within L/8 in Carnot units
  auto inside = [&](int log2_r) {
    double r = std::ldexp(1.0, log2_r);
    return r <= grid.L1 / 8 && r * r <= grid.L2 / 8;
  };
  if (!inside(window_log2_max)) throw ConfigError("window exceeds L/8");
  for (int j : t_log2_root)
    if (!inside(j)) throw ConfigError("t.log2_root exceeds L/8");
  const double dmax = std::ldexp(1.0, window_log2_max);
  auto in_chart = [&](const Node& n, double r) {
    Point x = n.point(grid);
    return std::abs(x.x1) + r < grid.L1 / 2 && std::abs(x.x2) + r * r < grid.L2 / 2;
  };
  for (auto& b : base_points)
    if (!in_chart(b, dmax)) throw ConfigError("base point " + node_text(b) + " too close to the chart seam");
  if (!in_chart(reexpand_y, dmax)) throw ConfigError("reexpand.y too close to the chart seam");
  if (!tau_list.empty() && tau_list.size() < 3) throw ConfigError("tau.list needs at least 3 entries");
  for (double t : tau_list)
    if (!(t > 0)) throw ConfigError("tau.list entries must be positive");
  if (!uniformity_taus.empty() && uniformity_taus.size() != 2) throw ConfigError("tau.uniformity needs 2 entries");
  if (!(reexpand_max_residual > 0)) throw ConfigError("reexpand.max_residual must be positive");
  if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

Config parse_config(const std::string& text) {
  Config c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  std::map<std::string, int> seen;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (seen.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    seen[key] = lineno;
    it->second(c, key, value);
  }
  if (!c.lambda_set) c.lambda = c.alpha / 2;
  c.validate();
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace mirs::cli
