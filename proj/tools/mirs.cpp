// Batch driver: config parsing, pipeline orchestration, caching and reports.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "mirs/estimator.hpp"
#include "mirs/reexpansion.hpp"
#include "mirs/selftest.hpp"

namespace fs = std::filesystem;
using mirs::cli::Config;
using mirs::cli::ConfigError;
using ojson = nlohmann::ordered_json;

namespace {

constexpr int kPass = 0, kFail = 1, kUsage = 2;

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  int samples = 0;
  std::string out;
  bool json = false;
  double tau = -1;
  bool seed_set = false;
};

// Config from file (or defaults when optional) with command-line overrides applied.
// --samples sets the estimator sample count only where it means that; elsewhere it counts dumped samples.
Config resolve(const Options& o, bool required, bool samples_override = true) {
  Config c;
  if (!o.config_path.empty())
    c = mirs::cli::load_config(o.config_path);
  else if (required)
    throw ConfigError("--config is required");
  if (o.seed_set) c.seed = o.seed;
  if (samples_override && o.samples > 0) c.samples = o.samples;
  if (const char* env = std::getenv("MIRS_OUTPUT"); env && *env) c.output_dir = env;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.tau >= 0) c.tau = o.tau;
  c.validate();
  return c;
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void log(const std::string& msg) {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%H:%M:%S", std::localtime(&t));
  std::cerr << "[" << buf << "] " << msg << "\n";
}

std::string model_echo(const Config& c) {
  ojson j;
  j["alpha"] = c.alpha;
  j["epsilon"] = c.epsilon;
  j["lambda"] = c.lambda;
  j["grid"] = {{"n1", c.grid.N1}, {"n2", c.grid.N2}, {"l1", c.grid.L1}, {"l2", c.grid.L2}};
  j["tau"] = c.tau;
  j["cutoff"] = c.cutoff;
  j["calibration_seed"] = c.calibration().seed;
  j["calibration_samples"] = c.calibration_samples;
  j["t_bphz"] = std::isinf(c.calibration_t_bphz) ? ojson("inf") : ojson(c.calibration_t_bphz);
  j["base_points"] = ojson::array();
  for (auto& b : c.base_points) j["base_points"].push_back({b.i1, b.i2});
  return j.dump();
}

mirs::Counterterms calibrate(const Config& c) {
  log("calibrating counterterms on " + std::to_string(c.calibration_samples) + " samples");
  auto ct = mirs::calibrate_counterterms(c.model(), c.calibration());
  ct.config_echo = model_echo(c);
  return ct;
}

// Counterterms from <out>/counterterms.json when they were made for this model, else fresh.
mirs::Counterterms ensure_counterterms(const Config& c) {
  const fs::path p = fs::path(c.output_dir) / "counterterms.json";
  if (fs::exists(p)) {
    auto ct = mirs::Counterterms::from_json(read_file(p), c.model().truncation());
    if (ct.config_echo == model_echo(c)) {
      log("using " + p.string());
      return ct;
    }
    log(p.string() + " belongs to another model; recalibrating");
  }
  auto ct = calibrate(c);
  write_file(p, ct.to_json());
  return ct;
}

// Noise sample through the cache <out>/samples/sample_{seed}_{index}.bin.
mirs::NoiseSample cached_noise(const Config& c, std::uint64_t index) {
  const fs::path p = fs::path(c.output_dir) / "samples" /
                     ("sample_" + std::to_string(c.seed) + "_" + std::to_string(index) + ".bin");
  if (fs::exists(p)) {
    auto f = mirs::load_field(p.string());
    if (f.grid() == c.grid) return {std::move(f), c.seed, index};
  }
  auto xi = mirs::sample_white(c.grid, c.seed, index);
  fs::create_directories(p.parent_path());
  mirs::dump_field(xi.field, p.string());
  return xi;
}

ojson check_json(const std::string& name, double lhs, double bound, bool pass) {
  return {{"quantity", name}, {"beta", ""}, {"scale", 0.0}, {"lhs", lhs}, {"rhs", 0.0}, {"bound", bound}, {"pass", pass}};
}

int emit_checks(const std::vector<mirs::CheckResult>& r, const Options& o, const std::string& file,
                const Config* c) {
  ojson j;
  j["config"] = c ? ojson::parse(model_echo(*c)) : ojson::object();
  j["fits"] = ojson::array();
  j["checks"] = ojson::array();
  for (auto& x : r) j["checks"].push_back(check_json(x.name, x.value, x.bound, x.pass));
  const bool ok = mirs::all_pass(r);
  if (o.json) {
    std::cout << j.dump(2) << "\n";
  } else {
    for (auto& x : r)
      std::printf("%-28s %12.3e <= %9.1e  %s\n", x.name.c_str(), x.value, x.bound, x.pass ? "PASS" : "FAIL");
    std::printf("%s\n", ok ? "all checks passed" : "some checks FAILED");
  }
  if (c && (!o.out.empty() || !o.config_path.empty())) write_file(fs::path(c->output_dir) / file, j.dump(2) + "\n");
  return ok ? kPass : kFail;
}

int cmd_selftest(const Options& o) {
  Config c = resolve(o, false);
  auto r = mirs::algebra_suite(100, c.seed);
  auto s = mirs::shift_covariance_suite(100, c.seed);
  r.insert(r.end(), s.begin(), s.end());
  return emit_checks(r, o, "selftest_algebra.json", &c);
}

int cmd_kernels(const Options& o) {
  Config c = resolve(o, false);
  auto r = mirs::kernel_suite(c.grid);
  auto s = mirs::schauder_suite(c.grid);
  r.insert(r.end(), s.begin(), s.end());
  return emit_checks(r, o, "kernels_check.json", &c);
}

int cmd_calibrate(const Options& o) {
  Config c = resolve(o, true);
  auto ct = calibrate(c);
  const fs::path p = fs::path(c.output_dir) / "counterterms.json";
  write_file(p, ct.to_json());
  if (o.json) {
    std::cout << ct.to_json();
  } else {
    for (auto& [b, v] : ct.c.coeffs())
      if (v != 0.0) std::printf("%-12s % .6e  +- %.2e\n", b.to_string().c_str(), v, ct.stderr_at(b));
    std::printf("wrote %s\n", p.string().c_str());
  }
  return kPass;
}

int cmd_build_model(const Options& o) {
  Config c = resolve(o, true, false);
  const int n = o.samples > 0 ? o.samples : 1;
  auto ct = ensure_counterterms(c);
  auto m = c.model();
  auto trunc = m.truncation();
  const fs::path dir = fs::path(c.output_dir) / "model";
  fs::create_directories(dir);
  ojson idx;
  idx["config"] = ojson::parse(model_echo(c));
  idx["base_point"] = {c.base_points.front().i1, c.base_points.front().i2};
  idx["betas"] = ojson::array();
  for (auto& b : trunc->indices()) idx["betas"].push_back(b.to_string());
  idx["samples"] = ojson::array();
  for (int s = 0; s < n; ++s) {
    auto xi = cached_noise(c, s);
    auto ms = mirs::build_model_sample(m, xi, c.base_points.front(), ct);
    ojson rec;
    rec["index"] = s;
    rec["max_abs_pi"] = ojson::array();
    for (std::size_t k = 0; k < trunc->size(); ++k) {
      const auto& b = trunc->indices()[k];
      std::string stem = "model_" + std::to_string(c.seed) + "_" + std::to_string(s) + "_" + std::to_string(k);
      mirs::dump_field(ms.Pi.at(b), (dir / (stem + "_pi.bin")).string());
      mirs::dump_field(ms.PiMinus.at(b), (dir / (stem + "_pi_minus.bin")).string());
      rec["max_abs_pi"].push_back(ms.Pi.at(b).max_abs());
    }
    idx["samples"].push_back(rec);
    log("built sample " + std::to_string(s));
  }
  write_file(dir / "index.json", idx.dump(2) + "\n");
  if (o.json)
    std::cout << idx.dump(2) << "\n";
  else
    std::printf("wrote %d model samples to %s\n", n, dir.string().c_str());
  return kPass;
}

int cmd_estimate(const Options& o) {
  Config c = resolve(o, true);
  auto ct = ensure_counterterms(c);
  log("estimating on " + std::to_string(c.samples) + " samples");
  auto rep = mirs::run_experiment(c.experiment(), ct);
  write_file(fs::path(c.output_dir) / "estimate.csv", rep.csv());
  write_file(fs::path(c.output_dir) / "estimate.json", rep.summary_json());
  if (o.json) {
    std::cout << rep.summary_json();
  } else {
    for (auto& f : rep.fits)
      std::printf("%-16s %-12s slope % .3f +- %.3f  target % .3f +- %.2f  %s\n", f.quantity.c_str(),
                  f.beta.to_string().c_str(), f.slope, f.stderr, f.target, f.tol, f.pass ? "PASS" : "FAIL");
    for (auto& k : rep.checks)
      std::printf("%-24s %-6s scale %.4g  %.4g vs %.4g (bound %.2g)  %s\n", k.quantity.c_str(),
                  k.beta.to_string().c_str(), k.scale, k.lhs, k.rhs, k.bound, k.pass ? "PASS" : "FAIL");
  }
  return rep.all_pass() ? kPass : kFail;
}

int cmd_reexpand(const Options& o) {
  Config c = resolve(o, true, false);
  const int n = o.samples > 0 ? o.samples : 4;
  auto ct = ensure_counterterms(c);
  auto m = c.model();
  const mirs::Node x = c.base_points.front(), y = c.reexpand_y;
  ojson j;
  j["config"] = ojson::parse(model_echo(c));
  j["fits"] = ojson::array();
  j["checks"] = ojson::array();
  bool ok = true;
  // Pi^- is compared after convolution at the smallest scale of the fit window
  const double t_smooth = std::pow(std::ldexp(1.0, c.window_log2_min), 4);
  for (int s = 0; s < n; ++s) {
    auto xi = cached_noise(c, s);
    auto mx = mirs::build_model_sample(m, xi, x, ct);
    auto my = mirs::build_model_sample(m, xi, y, ct);
    auto g = mirs::build_gamma_yx(m, mx, my);
    std::ofstream tsv(fs::path(c.output_dir) / ("gamma_" + std::to_string(c.seed) + "_" + std::to_string(s) + ".tsv"));
    g.gamma.dump_triplets(tsv);
    for (auto& r : mirs::reexpansion_residual(mx, my, g.gamma, g.r_fit, t_smooth)) {
      const double worst = std::max(r.pi, r.pi_minus);
      const bool pass = worst <= c.reexpand_max_residual;
      ok = ok && pass;
      j["checks"].push_back(ojson{{"quantity", "reexpansion_residual"},
                             {"beta", r.beta.to_string()},
                             {"scale", g.r_fit},
                             {"lhs", worst},
                             {"rhs", 0.0},
                             {"bound", c.reexpand_max_residual},
                             {"pass", pass}});
      if (!o.json)
        std::printf("sample %d  %-12s pi %.2e  pi_minus %.2e  %s\n", s, r.beta.to_string().c_str(), r.pi, r.pi_minus,
                    pass ? "PASS" : "FAIL");
    }
  }
  write_file(fs::path(c.output_dir) / "reexpand.json", j.dump(2) + "\n");
  if (o.json) std::cout << j.dump(2) << "\n";
  return ok ? kPass : kFail;
}

int cmd_report(const Options& o) {
  Config c = resolve(o, true);
  const fs::path dir(c.output_dir);
  if (!fs::is_directory(dir)) throw ConfigError("no output directory " + dir.string());
  std::vector<fs::path> files;
  for (auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json" && e.path().filename() != "counterterms.json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  ojson table = ojson::array();
  bool ok = true;
  for (auto& f : files) {
    ojson j = ojson::parse(read_file(f));
    const std::string src = f.filename().string();
    for (auto& fit : j.value("fits", ojson::array())) {
      bool pass = fit.at("pass").get<bool>();
      ok = ok && pass;
      table.push_back(ojson{{"source", src},
                       {"quantity", fit.at("quantity")},
                       {"beta", fit.at("beta")},
                       {"value", fit.at("slope")},
                       {"target", fit.at("target")},
                       {"tol", fit.at("tol")},
                       {"pass", pass}});
    }
    for (auto& ck : j.value("checks", ojson::array())) {
      bool pass = ck.at("pass").get<bool>();
      ok = ok && pass;
      table.push_back(ojson{{"source", src},
                       {"quantity", ck.at("quantity")},
                       {"beta", ck.at("beta")},
                       {"value", ck.at("lhs")},
                       {"target", ck.at("rhs")},
                       {"tol", ck.at("bound")},
                       {"pass", pass}});
    }
  }
  if (o.json) {
    std::cout << ojson{{"rows", table}, {"pass", ok}}.dump(2) << "\n";
  } else {
    for (auto& r : table)
      std::printf("%-22s %-24s %-12s % .4g  (target % .4g, tol %.3g)  %s\n", r["source"].get<std::string>().c_str(),
                  r["quantity"].get<std::string>().c_str(), r["beta"].get<std::string>().c_str(),
                  r["value"].get<double>(), r["target"].get<double>(), r["tol"].get<double>(),
                  r["pass"].get<bool>() ? "PASS" : "FAIL");
    std::printf("%zu rows, %s\n", table.size(), ok ? "all PASS" : "some FAIL");
  }
  return ok ? kPass : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularity-structure model builder and scaling estimator"};
  app.require_subcommand(1);
  Options o;
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Cmd cmds[] = {
      {"selftest-algebra", "Exact algebraic property suites", cmd_selftest},
      {"kernels-check", "Kernel and integration suites on the configured grid", cmd_kernels},
      {"calibrate", "Calibrate counterterms and write counterterms.json", cmd_calibrate},
      {"build-model", "Build model samples and dump their components", cmd_build_model},
      {"estimate", "Scaling experiments; writes estimate.csv and estimate.json", cmd_estimate},
      {"reexpand", "Re-expansion maps between two base points and their residuals", cmd_reexpand},
      {"report", "Pass/fail table over the JSON summaries in the output directory", cmd_report},
  };
  int (*chosen)(const Options&) = nullptr;
  for (auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", o.config_path, "Config file (key = value)");
    sub->add_option("--seed", o.seed, "Noise seed")->each([&o](const std::string&) { o.seed_set = true; });
    sub->add_option("--samples", o.samples, "Number of samples")->check(CLI::PositiveNumber);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_flag("--json", o.json, "Machine-readable output on standard output");
    if (std::string(c.name) == "calibrate") sub->add_option("--tau", o.tau, "Mollification scale")->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, &c] { chosen = c.run; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kPass : kUsage;
  }
  try {
    return chosen(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
