#include "mirs/noise.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace mirs {

NoiseSample sample_white(const Grid& grid, std::uint64_t seed, std::uint64_t sample_index) {
  grid.validate();
  auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v); };
  auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
  std::seed_seq seq{lo(seed), hi(seed), lo(sample_index), hi(sample_index), 0x6d697273u};
  std::mt19937_64 gen(seq);

  NoiseSample s{GridField(grid), seed, sample_index};
  const double sd = 1.0 / std::sqrt(grid.h1() * grid.h2());
  auto& v = s.field.values();
  // Box-Muller on 53-bit uniforms, so the stream does not depend on the library's normal_distribution
  auto uniform = [&] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
  for (std::size_t i = 0; i < v.size(); i += 2) {
    double r = std::sqrt(-2.0 * std::log(uniform()));
    double th = 2.0 * std::numbers::pi * uniform();
    v[i] = sd * r * std::cos(th);
    if (i + 1 < v.size()) v[i + 1] = sd * r * std::sin(th);
  }
  return s;
}

GridField mollify(const NoiseSample& xi, double tau) {
  return semigroup_convolve(xi.field, tau);
}

GridField smooth_bump(const Grid& grid, double sigma, Point z0) {
  return heat_kernel(grid, sigma, z0);
}

GridField reflect_x1(const GridField& f) {
  const Grid& g = f.grid();
  GridField r(g);
  for (long i2 = 0; i2 < g.N2; ++i2)
    for (long i1 = 0; i1 < g.N1; ++i1) r.at(i1, i2) = f.at(-i1, i2);
  return r;
}

}  // namespace mirs
