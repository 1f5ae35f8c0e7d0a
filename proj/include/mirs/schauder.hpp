#ifndef MIRS_SCHAUDER_HPP
#define MIRS_SCHAUDER_HPP

#include <vector>

#include "mirs/kernels.hpp"
#include "mirs/multiindex.hpp"

namespace mirs {

/// Smallest mollification scale the grid resolves: min(h1^4, h2^2) / 16.
double tau_floor_min(const Grid& g);

/// Geometric t-levels with ratio sqrt(2) from t_min = min(tau_floor, h1^4, h2^2)/8
/// up to (at least) t_max = (L1/4)^4.
std::vector<double> t_levels(const Grid& g, double tau_floor);
/// Lower end of the t-integral: min(tau_floor, h1^4, h2^2)/8.
double integration_t_min(const Grid& g, double tau_floor);

struct Integrated {
  GridField u;
  GridField d11u;  // d1^2 u, with the Taylor polynomial differentiated exactly
};

/// u = int_{t_min}^inf (id - T_x^eta) A* f_t dt, done exactly per Fourier mode: the
/// multiplier is exp(-t_min |q|^4) / (q1^2 + i q2), zero mode dropped. u(x) = 0 exactly.
/// Throws for integer eta and for tau_floor below tau_floor_min.
GridField integrate(const GridField& f, const Node& x, double eta, double tau_floor);
GridField integrate(const GridField& f, const Node& x, Homogeneity eta, const Scaling& s,
                    double tau_floor);
Integrated integrate_with_d11(const GridField& f, const Node& x, double eta, double tau_floor);

/// Per-level pieces of integrate(): entry j covers [t_j, t_{j+1}], the last entry the tail
/// [t_max, inf). Each piece is Taylor-truncated on its own, so they sum to integrate().
std::vector<GridField> integrate_levels(const GridField& f, const Node& x, double eta,
                                        double tau_floor);

}  // namespace mirs

#endif  // MIRS_SCHAUDER_HPP
