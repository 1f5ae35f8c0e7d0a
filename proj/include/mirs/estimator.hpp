#ifndef MIRS_ESTIMATOR_HPP
#define MIRS_ESTIMATOR_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mirs/model.hpp"

namespace mirs {

struct MomentEstimate {
  double estimate = 0.0;
  double stderr = 0.0;
};

/// (E|X|^p)^{1/p} with a leave-one-out jackknife stderr; p in {2, 4}, at least 30 samples.
MomentEstimate annealed_moment(const std::vector<double>& samples, int p);

struct ScalePoint {
  double scale = 0.0;
  double estimate = 0.0;
  double stderr = 0.0;
};

struct ScalingSeries {
  std::string quantity;
  MultiIndex beta;
  int p = 2;
  std::string scale_kind;  // space, time or tau
  std::vector<ScalePoint> points;
  int n_samples = 0;
};

struct SlopeFit {
  double slope = 0.0;
  double stderr = 0.0;
};

/// Least-squares slope of log estimate against log scale, weighted by (stderr/estimate)^-2.
/// With any zero stderr the fit is unweighted and the stderr comes from the residuals.
SlopeFit scaling_fit(const ScalingSeries& s);

/// Runs fn(0..n-1) on `workers` threads (0: hardware concurrency). Results must go to
/// per-index slots; the caller reduces them in index order.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

/// Variance of xi_t at a node for discrete white noise: the Parseval sum of exp(-2t|q|^4) / (L1 L2).
double mollified_variance(const Grid& g, double t);

/// d1 v_tau(x) per sample, with A v_tau = xi_tau integrated as in the model; spectral, one
/// transform per sample.
std::vector<double> gradient_at_base(const ModelConfig& cfg, std::uint64_t seed, int samples, const Node& x,
                                     int workers = 1);

struct ExperimentConfig {
  ModelConfig model;
  std::uint64_t seed = 1;
  int samples = 1024;
  int workers = 1;
  std::vector<int> p_list = {2};
  Node x{0, 0};
  /// Carnot distances 2^j for j in [log2_d_min, log2_d_max], along x1 and along x2.
  int log2_d_min = -5, log2_d_max = -2;
  /// Fourth roots of t, 2^j, for the convolved Pi^- at the base point.
  std::vector<int> log2_t_root = {-4, -3, -2};
  /// Counterterm and gradient table over these tau (empty: skipped).
  std::vector<double> tau_list;
  /// Two tau values for the z1 spatial slope comparison (empty: skipped).
  std::vector<double> uniformity_taus;
  /// Zero skips the counterterm table.
  int calibration_samples = 128;
  double tol_space = 0.15;
  double tol_time = 0.05;
  double tol_tau = 0.1;
  double tol_sg = 0.05;
  /// Stderr multiple for equality checks.
  double z_equal = 5.0;
  /// Quantities run: space, time, tau, sg.
  bool run_space = true, run_time = true, run_sg = true;
};

struct FitRecord {
  std::string quantity;
  MultiIndex beta;
  double slope = 0.0, stderr = 0.0, target = 0.0, tol = 0.0;
  bool pass = false;
};

/// Non-slope comparisons: lhs against rhs within `bound`.
struct CheckRecord {
  std::string quantity;
  MultiIndex beta;
  double scale = 0.0;
  double lhs = 0.0, rhs = 0.0, bound = 0.0;
  bool pass = false;
};

struct ExperimentReport {
  std::string config_json;  // compact JSON object
  std::vector<ScalingSeries> series;
  std::vector<FitRecord> fits;
  std::vector<CheckRecord> checks;

  bool all_pass() const;
  std::string csv() const;
  std::string summary_json() const;
  const FitRecord* find_fit(const std::string& quantity, const MultiIndex& beta) const;
  const ScalingSeries* find_series(const std::string& quantity, const MultiIndex& beta, int p = 2) const;
};

/// Annealed scaling series and their fits:
///   pi_x1, pi_x2      E^{1/p}|Pi_{x beta}(y)|^p against the Carnot distance of y along each axis,
///                     target |beta|
///   pi_minus_t        E^{1/p}|(Pi^-_{x beta})_t(x)|^p against t^{1/4}, target |beta| - 2
///   counterterm_tau   |c_z1| against tau, target -1/4
///   grad_tau          E^{1/2}|d1 Pi_{x 0}(x)|^2 against tau, target -1/8
///   sg_dual_norm      ||psi_t||_{L2} against t^{1/4}, target alpha - 2
/// plus checks: sg_variance (Var xi_t(x) against the dual norm squared), rescale_consistency
/// (beta = 0, s = 2) and tau_uniformity (z1 slopes at two tau).
ExperimentReport run_experiment(const ExperimentConfig& cfg, const Counterterms& c);

}  // namespace mirs

#endif  // MIRS_ESTIMATOR_HPP
