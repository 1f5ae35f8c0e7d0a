#ifndef MIRS_REEXPANSION_HPP
#define MIRS_REEXPANSION_HPP

#include <iosfwd>
#include <limits>
#include <map>
#include <utility>
#include <vector>

#include "mirs/model.hpp"

namespace mirs {

/// Parameters pi^(n) of a structure group element; n = (0,0) stands for pi^(0).
struct GammaParams {
  TruncationPtr trunc;  // full (not only populated) truncation, closed under summands
  std::map<DerivIndex, Series<double>> pis;

  explicit GammaParams(TruncationPtr t = nullptr) : trunc(std::move(t)) {}
  Series<double>& at(DerivIndex n);
  const Series<double>* find(DerivIndex n) const;
  /// Throws unless pi^(n)_beta = 0 whenever |n| >= |beta|.
  void check_population() const;
};

/// Sparse matrix of Gamma* in the monomial basis: entry (beta, gamma) is the
/// coefficient of z^beta in Gamma* z^gamma.
class GammaMatrix {
 public:
  explicit GammaMatrix(TruncationPtr t = nullptr) : trunc_(std::move(t)) {}
  static GammaMatrix identity(TruncationPtr t);

  const TruncationPtr& truncation() const { return trunc_; }
  double entry(const MultiIndex& beta, const MultiIndex& gamma) const;
  void set(const MultiIndex& beta, const MultiIndex& gamma, double v);
  const std::map<std::pair<MultiIndex, MultiIndex>, double>& entries() const { return e_; }

  Series<double> apply(const Series<double>& u) const;
  /// Row-wise sum_gamma Gamma_beta^gamma u_gamma; result lives on u's truncation.
  Series<GridField> apply(const Series<GridField>& u) const;
  /// Same, restricted to columns with [gamma] >= 0 (the projection P).
  Series<GridField> apply_projected(const Series<GridField>& u) const;

  double max_abs_diff(const GammaMatrix& o) const;
  /// (Gamma* - id) vanishes unless gamma precedes beta with |gamma| < |beta|.
  bool is_triangular() const;

  void dump_triplets(std::ostream& os) const;

 private:
  TruncationPtr trunc_;
  std::map<std::pair<MultiIndex, MultiIndex>, double> e_;
};

GammaMatrix matrix_product(const GammaMatrix& a, const GammaMatrix& b);

/// Columns from Gamma* z_k = sum_l binom(k+l, k) (pi^(0))^l z_{k+l} and Gamma* z_n = z_n + pi^(n),
/// extended multiplicatively.
GammaMatrix gamma_from_pis(const GammaParams& p);

/// Parameters of the product Gamma* Gamma'*: pi^(n) + Gamma* pi'^(n).
GammaParams compose_params(const GammaParams& p, const GammaParams& q);
GammaMatrix gamma_compose(const GammaParams& p, const GammaParams& q);
/// Parameters of the inverse: solves Gamma* pi~^(n) = -pi^(n) by forward substitution.
GammaParams invert_params(const GammaParams& p);
GammaMatrix gamma_invert(const GammaParams& p);

struct FitOptions {
  /// Radius of the fit ball; non-positive means 2 carnot_distance(x, y), clipped to window.
  double r_fit = 0.0;
  /// Largest usable Carnot radius.
  double window = std::numeric_limits<double>::infinity();
  /// build_gamma_yx throws when a relative fit residual exceeds this.
  double max_residual = std::numeric_limits<double>::infinity();
};

struct GammaYX {
  GammaParams params;
  GammaMatrix gamma;
  std::map<MultiIndex, double> fit_residual;
  double r_fit = 0.0;
};

/// Gamma*_{yx} from the models at x and at y (same noise): pi^(0)_beta = Pi_{y beta}(x),
/// polynomial sector exactly, the rest by least squares of (Pi_y - Gamma* P Pi_x)_beta on the ball.
GammaYX build_gamma_yx(const ModelConfig& cfg, const ModelSample& mx, const ModelSample& my,
                       const FitOptions& opt = {});

struct ReexpansionResidual {
  MultiIndex beta;
  double pi = 0.0;        // Pi_y - Gamma* Pi_x - Pi_y(x), relative L2 on the ball
  double pi_minus = 0.0;  // (Pi^-_y - Gamma* Pi^-_x)_t, relative L2 on the ball
};

std::vector<ReexpansionResidual> reexpansion_residual(const ModelSample& mx, const ModelSample& my,
                                                      const GammaMatrix& g, double r_fit,
                                                      double t_smooth);

/// Nodes within Carnot distance r of x.
std::vector<Node> carnot_ball(const Grid& grid, const Node& x, double r);

}  // namespace mirs

#endif  // MIRS_REEXPANSION_HPP
