#ifndef MIRS_MODEL_HPP
#define MIRS_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mirs/kernels.hpp"
#include "mirs/noise.hpp"
#include "mirs/series.hpp"

namespace mirs {

struct ModelConfig {
  Grid grid;
  Scaling scaling;
  double cutoff = 1.6;
  double tau = 0.0;
  /// Integration floor; non-positive means max(tau, tau_floor_min(grid)).
  double tau_floor = 0.0;

  double effective_tau_floor() const;
  TruncationPtr truncation() const;  // populated indices below the cutoff
  void validate() const;
};

struct Counterterms {
  Series<double> c;
  std::map<MultiIndex, double> stderr_of;
  double tau = 0.0;
  double cutoff = 0.0;
  int samples_used = 0;
  std::string config_echo;  // free-form, copied into the JSON

  /// Value at beta, 0 when absent.
  double value(const MultiIndex& b) const;
  double stderr_at(const MultiIndex& b) const;

  std::string to_json() const;
  static Counterterms from_json(const std::string& text, TruncationPtr t);
};

/// All-zero counterterms on the truncation of cfg.
Counterterms zero_counterterms(const ModelConfig& cfg);

struct ModelSample {
  Node x;
  double tau = 0.0;
  NoiseSample noise;
  GridField xi_tau;
  Series<GridField> Pi, PiPrime, PiMinus;  // PiPrime = d1^2 Pi
};

/// Builds Pi_x, Pi_x^- in ascending order. With stop_after set, components after
/// that index are left out (they are never needed for the earlier ones).
ModelSample build_model_sample(const ModelConfig& cfg, const NoiseSample& noise, const Node& x,
                               const Counterterms& c, const MultiIndex* stop_after = nullptr);

/// The calibration candidates: pop-only, [beta] >= 0, |beta| < 2, with even noise parity.
std::vector<MultiIndex> counterterm_candidates(const ModelConfig& cfg);
/// True when 1 + [beta] is odd: the component is odd in the noise and its mean vanishes.
bool odd_in_noise(const MultiIndex& b);

struct CalibrationConfig {
  std::uint64_t seed = 1;
  int samples = 256;
  std::vector<Node> base_points = {{0, 0}};
  /// Infinite: ensemble and space mean of Pi^-. Finite: (Pi^-)_T evaluated at the base point.
  double t_bphz = std::numeric_limits<double>::infinity();
  /// Calibration fails when a stderr exceeds this.
  double max_stderr = std::numeric_limits<double>::infinity();
  /// Reflect every noise sample in x1 before use.
  bool reflect = false;
  /// When set, candidates after this one are skipped and stay 0.
  std::optional<MultiIndex> last;
};

/// c_beta = E (Pi^-_beta computed with c_beta = 0), so that E Pi^-_beta = 0; sequential over the candidates.
/// Sample s uses base point base_points[s % size].
Counterterms calibrate_counterterms(const ModelConfig& cfg, const CalibrationConfig& cal);

struct ModelTangent {
  GridField dxi_tau;
  Series<GridField> dPi, dPiPrime, dPiMinus;
};

/// Linearization of the whole build along dxi; delta c = 0.
ModelTangent directional_derivative(const ModelConfig& cfg, const ModelSample& m,
                                    const Counterterms& c, const GridField& dxi);

struct BasePointResidual {
  MultiIndex beta;
  double pi_minus = 0.0;  // Pi^-_x(x) = z0 d1^2 Pi_x(x) - c + xi_tau(x)
  double delta = 0.0;     // delta Pi^-_x(x) = z0 d1^2 delta Pi_x(x) + delta xi_tau(x)
};

/// Relative residuals of both identities at the base point, per beta.
std::vector<BasePointResidual> base_point_residuals(const ModelSample& m, const Counterterms& c,
                                                    const ModelTangent& delta);

}  // namespace mirs

#endif  // MIRS_MODEL_HPP
