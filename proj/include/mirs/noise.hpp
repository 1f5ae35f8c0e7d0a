#ifndef MIRS_NOISE_HPP
#define MIRS_NOISE_HPP

#include <cstdint>

#include "mirs/kernels.hpp"

namespace mirs {

/// Discrete white noise: iid N(0, 1/(h1 h2)) node values.
struct NoiseSample {
  GridField field;
  std::uint64_t seed = 0;
  std::uint64_t sample_index = 0;
};

/// The realization is a pure function of (grid, seed, sample_index): each sample
/// owns a generator keyed by both, so samples can be drawn in any order.
NoiseSample sample_white(const Grid& grid, std::uint64_t seed, std::uint64_t sample_index);

/// xi_tau = semigroup_convolve(xi, tau).
GridField mollify(const NoiseSample& xi, double tau);

/// Smooth direction psi_sigma(. - z0) for linearization checks.
GridField smooth_bump(const Grid& grid, double sigma, Point z0);

/// f(-y1, y2) with reflection about the node i1 = 0.
GridField reflect_x1(const GridField& f);

}  // namespace mirs

#endif  // MIRS_NOISE_HPP
