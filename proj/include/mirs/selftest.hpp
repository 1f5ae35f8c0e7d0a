#ifndef MIRS_SELFTEST_HPP
#define MIRS_SELFTEST_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "mirs/kernels.hpp"

namespace mirs {

/// One exact property: the worst residual over all instances against its bound.
struct CheckResult {
  std::string name;
  double value = 0.0;
  double bound = 0.0;
  bool pass = false;
};

bool all_pass(const std::vector<CheckResult>& r);

/// Series algebra, D0, pi^- assembly and the structure group at cutoff 1.6 on random instances.
std::vector<CheckResult> algebra_suite(int instances = 100, std::uint64_t seed = 1);
/// c[a(. + v)] against (sum_l v^l / l! (D0)^l c)[a] for random pop-only c, cubic a and shift v.
std::vector<CheckResult> shift_covariance_suite(int instances = 100, std::uint64_t seed = 1);
/// Semigroup law, mass, heat-kernel PDE and parabolic scaling on grid g.
std::vector<CheckResult> kernel_suite(const Grid& g);
/// Integration of zero and constants, PDE residual and d1^2 on manufactured inputs.
std::vector<CheckResult> schauder_suite(const Grid& g);

}  // namespace mirs

#endif  // MIRS_SELFTEST_HPP
