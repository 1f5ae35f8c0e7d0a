#ifndef MIRS_KERNELS_HPP
#define MIRS_KERNELS_HPP

#include <complex>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mirs/multiindex.hpp"

namespace mirs {

/// Periodic space-time grid; x1 is space, x2 is time.
struct Grid {
  double L1 = 1.0, L2 = 1.0;
  int N1 = 256, N2 = 1024;

  double h1() const { return L1 / N1; }
  double h2() const { return L2 / N2; }
  std::size_t size() const { return static_cast<std::size_t>(N1) * N2; }
  /// Number of complex half-spectrum entries N2 * (N1/2 + 1).
  std::size_t spectral_size() const { return static_cast<std::size_t>(N2) * (N1 / 2 + 1); }
  void validate() const;

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct Point {
  double x1 = 0.0, x2 = 0.0;
};

/// Grid node (i1, i2); indices are taken mod N.
struct Node {
  long i1 = 0, i2 = 0;
  Point point(const Grid& g) const { return {i1 * g.h1(), i2 * g.h2()}; }
  friend bool operator==(const Node&, const Node&) = default;
};

class GridField {
 public:
  GridField() = default;
  explicit GridField(const Grid& g, double fill = 0.0) : grid_(g), v_(g.size(), fill) {}
  GridField(const Grid& g, std::vector<double> values);

  static GridField from_function(const Grid& g, const std::function<double(double, double)>& f);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  const std::vector<double>& values() const { return v_; }
  std::vector<double>& values() { return v_; }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  std::size_t index(long i1, long i2) const;
  double& at(long i1, long i2) { return v_[index(i1, i2)]; }
  double at(long i1, long i2) const { return v_[index(i1, i2)]; }
  double at(const Node& n) const { return at(n.i1, n.i2); }

  GridField operator+(const GridField& o) const;
  GridField operator-(const GridField& o) const;
  GridField operator*(const GridField& o) const;
  GridField& operator+=(const GridField& o);
  GridField& operator-=(const GridField& o);
  friend GridField operator*(double a, const GridField& f);
  GridField operator+(double c) const;
  GridField operator-(double c) const;

  double mean() const;
  double l2_norm() const;  // continuum L2 norm, h1 h2 sum f^2
  double max_abs() const;
  bool all_finite() const;

 private:
  void check(const GridField& o) const;
  Grid grid_;
  std::vector<double> v_;
};

GridField zero_like(const GridField& f);
GridField one_like(const GridField& f);

/// Half spectrum in FFTW r2c layout: rows k2 = 0..N2-1, columns k1 = 0..N1/2.
struct Spectrum {
  Grid grid;
  std::vector<std::complex<double>> c;

  std::complex<double>& at(int k2, int k1) { return c[static_cast<std::size_t>(k2) * (grid.N1 / 2 + 1) + k1]; }
  std::complex<double> at(int k2, int k1) const {
    return c[static_cast<std::size_t>(k2) * (grid.N1 / 2 + 1) + k1];
  }
};

/// Unnormalized forward transform sum_j f_j exp(-i q.y_j).
Spectrum forward(const GridField& f);
/// Inverse transform including the 1/(N1 N2) factor; conjugate symmetry is enforced first.
GridField inverse(Spectrum s);
/// Averages conjugate pairs on the self-paired columns k1 = 0 and k1 = N1/2.
void enforce_hermitian(Spectrum& s);

/// Angular wavenumbers of a spectrum entry; q2 uses the symmetric range, Nyquist taken positive.
double wavenumber1(const Grid& g, int k1);
double wavenumber2(const Grid& g, int k2);
/// |q|^4 = q1^4 + q2^2.
inline double qnorm4(double q1, double q2) { return q1 * q1 * q1 * q1 + q2 * q2; }

using Multiplier = std::function<std::complex<double>(double q1, double q2)>;
/// Applies a Fourier multiplier m(q) to every mode.
GridField apply_multiplier(const GridField& f, const Multiplier& m);
void multiply_spectrum(Spectrum& s, const Multiplier& m);

/// f_t: multiplies mode q by exp(-t |q|^4).
GridField semigroup_convolve(const GridField& f, double t);
/// d1^n1 d2^n2 f.
GridField spectral_derivative(const GridField& f, DerivIndex n);
/// (d2 - d1^2) f.
GridField apply_A(const GridField& f);
/// (-d2 - d1^2) f.
GridField apply_A_adjoint(const GridField& f);
/// Periodic solution of (d2 - d1^2) u = f_{t_min} with zero mean; the zero mode of f is dropped.
GridField inverse_A(const GridField& f, double t_min = 0.0);

/// Sampled periodized kernel psi_t(. - center).
GridField heat_kernel(const Grid& g, double t, Point center = {});

/// Nearest-image displacement y - x in [-L/2, L/2).
Point displacement(const Grid& g, Point x, Point y);
/// ((d1)^4 + (d2)^2)^(1/4) of the nearest-image displacement.
double carnot_distance(const Grid& g, Point x, Point y);
/// Carnot distance on the plane (no wrapping).
double carnot_norm(double d1, double d2);

/// y - x with both points read in the fixed chart [-L1/2, L1/2) x [-L2/2, L2/2).
Point chart_difference(const Grid& g, Point x, Point y);
/// The monomial (y - x)^n (no 1/n!) in the fixed chart. The seam stays at +-L/2 whatever x is,
/// so monomials about two base points differ by a polynomial everywhere; keep base points
/// well inside the chart.
GridField monomial(const Grid& g, Point x, DerivIndex n);

/// All n (including 0) with |n| <= eta, ordered by degree then n1 descending.
std::vector<DerivIndex> taylor_indices(double eta);
/// Largest parabolic degree accepted by Taylor truncation.
inline constexpr int kMaxTaylorDegree = 7;

/// (id - T_x^eta) f with T_x^eta f(y) = sum_{|n| <= eta} d^n f(x) (y - x)^n / n!.
GridField taylor_truncate(const GridField& f, const Node& x, double eta);
/// Taylor coefficients d^n f(x) / n! for the indices of taylor_indices(eta).
std::vector<double> taylor_coefficients(const GridField& f, const Node& x,
                                        const std::vector<DerivIndex>& ns);
std::vector<double> taylor_coefficients(Spectrum s, const Node& x, const std::vector<DerivIndex>& ns);

/// (sum_{q != 0} |q|^{2s} |F(q)|^2 / (L1 L2))^{1/2} with F the continuum Fourier coefficients.
double sobolev_dual_norm(const GridField& f, double s);

/// g(y) = f(s y1, s^2 y2) for s = 2^j, by decimation (j > 0) or replication (j < 0).
GridField parabolic_rescale(const GridField& f, int log2_s);

/// Binary dump: little-endian f64 header (N1, N2, L1, L2) then the values row-major.
void dump_field(const GridField& f, std::ostream& os);
GridField load_field(std::istream& is);
void dump_field(const GridField& f, const std::string& path);
GridField load_field(const std::string& path);

}  // namespace mirs

#endif  // MIRS_KERNELS_HPP
