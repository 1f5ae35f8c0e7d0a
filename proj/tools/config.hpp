#ifndef MIRS_TOOLS_CONFIG_HPP
#define MIRS_TOOLS_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mirs/estimator.hpp"
#include "mirs/model.hpp"
#include "mirs/reexpansion.hpp"

namespace mirs::cli {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Everything a run depends on. Text form: one `key = value` per line, `#` comments,
/// dotted keys, lists comma separated, nodes as `i1:i2`.
struct Config {
  double alpha = 0.5;
  double epsilon = std::ldexp(1.0, -20);
  double lambda = 0.25;
  bool lambda_set = false;
  Grid grid{2.0, 0.5, 128, 2048};
  double tau = 0.0;
  double cutoff = 1.6;
  int samples = 1024;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<int> p = {2};
  std::vector<int> t_log2_root = {-4, -3, -2};
  std::vector<Node> base_points = {{0, 0}};
  int window_log2_min = -5, window_log2_max = -2;
  std::vector<double> tau_list;
  std::vector<double> uniformity_taus;
  int calibration_samples = 256;
  double calibration_t_bphz = std::numeric_limits<double>::infinity();
  int table_calibration_samples = 32;
  Node reexpand_y{8, -64};
  double reexpand_max_residual = 0.05;
  double tol_space = 0.15, tol_time = 0.05, tol_tau = 0.1, tol_sg = 0.05;
  std::string output_dir = "out";

  ModelConfig model() const;
  ExperimentConfig experiment() const;
  CalibrationConfig calibration() const;
  /// Canonical `key = value` text; parse(to_text()) reproduces the config.
  std::string to_text() const;
  void validate() const;
};

/// Parses the text form; unknown keys, malformed values and broken invariants throw ConfigError.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

}  // namespace mirs::cli

#endif  // MIRS_TOOLS_CONFIG_HPP
