#include "mirs/kernels.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace mirs {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
using RealBuf = std::unique_ptr<double, FftwFree>;
using CplxBuf = std::unique_ptr<fftw_complex, FftwFree>;

RealBuf alloc_real(std::size_t n) { return RealBuf(fftw_alloc_real(n)); }
CplxBuf alloc_cplx(std::size_t n) { return CplxBuf(fftw_alloc_complex(n)); }

struct Plans {
  fftw_plan r2c = nullptr;
  fftw_plan c2r = nullptr;
};

// plans are immutable once made; creation is serialized since the FFTW planner is not reentrant
const Plans& plans_for(const Grid& g) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, Plans> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(g.N1, g.N2);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto r = alloc_real(g.size());
  auto c = alloc_cplx(g.spectral_size());
  Plans p;
  p.r2c = fftw_plan_dft_r2c_2d(g.N2, g.N1, r.get(), c.get(), FFTW_ESTIMATE);
  p.c2r = fftw_plan_dft_c2r_2d(g.N2, g.N1, c.get(), r.get(), FFTW_ESTIMATE);
  if (!p.r2c || !p.c2r) throw std::runtime_error("FFTW planning failed");
  return cache.emplace(key, p).first->second;
}

double wrap(double d, double L) {
  d = std::fmod(d, L);
  if (d < -L / 2) d += L;
  if (d >= L / 2) d -= L;
  return d;
}

double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

std::complex<double> ipow(double q, int n) {
  // (i q)^n
  static const std::complex<double> units[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return units[n % 4] * std::pow(q, n);
}

}  // namespace

void Grid::validate() const {
  if (!is_pow2(N1) || !is_pow2(N2) || N1 < 2 || N2 < 2)
    throw std::invalid_argument("grid sizes must be powers of two >= 2");
  if (!(L1 > 0) || !(L2 > 0)) throw std::invalid_argument("grid extents must be positive");
}

GridField::GridField(const Grid& g, std::vector<double> values) : grid_(g), v_(std::move(values)) {
  if (v_.size() != g.size()) throw std::invalid_argument("GridField: value count does not match grid");
}

GridField GridField::from_function(const Grid& g, const std::function<double(double, double)>& f) {
  GridField r(g);
  for (int i2 = 0; i2 < g.N2; ++i2)
    for (int i1 = 0; i1 < g.N1; ++i1) r.v_[static_cast<std::size_t>(i2) * g.N1 + i1] = f(i1 * g.h1(), i2 * g.h2());
  return r;
}

std::size_t GridField::index(long i1, long i2) const {
  long a = ((i1 % grid_.N1) + grid_.N1) % grid_.N1;
  long b = ((i2 % grid_.N2) + grid_.N2) % grid_.N2;
  return static_cast<std::size_t>(b) * grid_.N1 + a;
}

void GridField::check(const GridField& o) const {
  if (!(grid_ == o.grid_)) throw std::invalid_argument("GridField: grid mismatch");
}

GridField GridField::operator+(const GridField& o) const {
  GridField r = *this;
  r += o;
  return r;
}
GridField GridField::operator-(const GridField& o) const {
  GridField r = *this;
  r -= o;
  return r;
}
GridField GridField::operator*(const GridField& o) const {
  check(o);
  GridField r(grid_);
  for (std::size_t i = 0; i < v_.size(); ++i) r.v_[i] = v_[i] * o.v_[i];
  return r;
}
GridField& GridField::operator+=(const GridField& o) {
  check(o);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
GridField& GridField::operator-=(const GridField& o) {
  check(o);
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
GridField operator*(double a, const GridField& f) {
  GridField r(f.grid_);
  for (std::size_t i = 0; i < f.v_.size(); ++i) r.v_[i] = a * f.v_[i];
  return r;
}
GridField GridField::operator+(double c) const {
  GridField r = *this;
  for (auto& x : r.v_) x += c;
  return r;
}
GridField GridField::operator-(double c) const { return *this + (-c); }

double GridField::mean() const {
  double s = 0;
  for (double x : v_) s += x;
  return s / static_cast<double>(v_.size());
}
double GridField::l2_norm() const {
  double s = 0;
  for (double x : v_) s += x * x;
  return std::sqrt(s * grid_.h1() * grid_.h2());
}
double GridField::max_abs() const {
  double m = 0;
  for (double x : v_) m = std::max(m, std::abs(x));
  return m;
}
bool GridField::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

GridField zero_like(const GridField& f) { return GridField(f.grid(), 0.0); }
GridField one_like(const GridField& f) { return GridField(f.grid(), 1.0); }

Spectrum forward(const GridField& f) {
  const Grid& g = f.grid();
  const Plans& p = plans_for(g);
  auto r = alloc_real(g.size());
  auto c = alloc_cplx(g.spectral_size());
  std::memcpy(r.get(), f.data(), g.size() * sizeof(double));
  fftw_execute_dft_r2c(p.r2c, r.get(), c.get());
  Spectrum s{g, std::vector<std::complex<double>>(g.spectral_size())};
  std::memcpy(static_cast<void*>(s.c.data()), c.get(), g.spectral_size() * sizeof(fftw_complex));
  return s;
}

void enforce_hermitian(Spectrum& s) {
  const int N2 = s.grid.N2;
  for (int k1 : {0, s.grid.N1 / 2}) {
    for (int k2 = 0; k2 <= N2 / 2; ++k2) {
      int m2 = (N2 - k2) % N2;
      if (m2 == k2) {
        s.at(k2, k1) = {s.at(k2, k1).real(), 0.0};
      } else {
        auto a = s.at(k2, k1), b = std::conj(s.at(m2, k1));
        auto avg = 0.5 * (a + b);
        s.at(k2, k1) = avg;
        s.at(m2, k1) = std::conj(avg);
      }
    }
  }
}

GridField inverse(Spectrum s) {
  const Grid& g = s.grid;
  enforce_hermitian(s);
  const Plans& p = plans_for(g);
  auto r = alloc_real(g.size());
  auto c = alloc_cplx(g.spectral_size());
  std::memcpy(c.get(), s.c.data(), g.spectral_size() * sizeof(fftw_complex));
  fftw_execute_dft_c2r(p.c2r, c.get(), r.get());
  GridField f(g);
  const double inv = 1.0 / static_cast<double>(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) f.values()[i] = r.get()[i] * inv;
  return f;
}

double wavenumber1(const Grid& g, int k1) { return kTwoPi * k1 / g.L1; }
double wavenumber2(const Grid& g, int k2) {
  int ks = k2 <= g.N2 / 2 ? k2 : k2 - g.N2;
  return kTwoPi * ks / g.L2;
}

void multiply_spectrum(Spectrum& s, const Multiplier& m) {
  const Grid& g = s.grid;
  const int M1 = g.N1 / 2 + 1;
  std::vector<double> q1(M1);
  for (int k1 = 0; k1 < M1; ++k1) q1[k1] = wavenumber1(g, k1);
  for (int k2 = 0; k2 < g.N2; ++k2) {
    double q2 = wavenumber2(g, k2);
    for (int k1 = 0; k1 < M1; ++k1) s.at(k2, k1) *= m(q1[k1], q2);
  }
}

GridField apply_multiplier(const GridField& f, const Multiplier& m) {
  Spectrum s = forward(f);
  multiply_spectrum(s, m);
  return inverse(std::move(s));
}

GridField semigroup_convolve(const GridField& f, double t) {
  if (t < 0) throw std::invalid_argument("semigroup_convolve: t must be >= 0");
  if (t == 0) return f;
  return apply_multiplier(f, [t](double q1, double q2) { return std::complex<double>(std::exp(-t * qnorm4(q1, q2)), 0); });
}

GridField spectral_derivative(const GridField& f, DerivIndex n) {
  if (n.n1 < 0 || n.n2 < 0) throw std::invalid_argument("negative derivative order");
  if (n.is_zero()) return f;
  return apply_multiplier(f, [n](double q1, double q2) { return ipow(q1, n.n1) * ipow(q2, n.n2); });
}

GridField apply_A(const GridField& f) {
  return apply_multiplier(f, [](double q1, double q2) { return std::complex<double>(q1 * q1, q2); });
}

GridField apply_A_adjoint(const GridField& f) {
  return apply_multiplier(f, [](double q1, double q2) { return std::complex<double>(q1 * q1, -q2); });
}

GridField inverse_A(const GridField& f, double t_min) {
  return apply_multiplier(f, [t_min](double q1, double q2) {
    double q4 = qnorm4(q1, q2);
    if (q4 == 0) return std::complex<double>(0, 0);
    // 1/(q1^2 + i q2) = (q1^2 - i q2)/|q|^4
    return std::complex<double>(q1 * q1, -q2) * (std::exp(-t_min * q4) / q4);
  });
}

GridField heat_kernel(const Grid& g, double t, Point center) {
  Spectrum s{g, std::vector<std::complex<double>>(g.spectral_size())};
  const double amp = 1.0 / (g.h1() * g.h2());
  for (int k2 = 0; k2 < g.N2; ++k2) {
    double q2 = wavenumber2(g, k2);
    for (int k1 = 0; k1 <= g.N1 / 2; ++k1) {
      double q1 = wavenumber1(g, k1);
      double phase = -(q1 * center.x1 + q2 * center.x2);
      s.at(k2, k1) = amp * std::exp(-t * qnorm4(q1, q2)) * std::polar(1.0, phase);
    }
  }
  return inverse(std::move(s));
}

Point displacement(const Grid& g, Point x, Point y) {
  return {wrap(y.x1 - x.x1, g.L1), wrap(y.x2 - x.x2, g.L2)};
}

double carnot_norm(double d1, double d2) {
  return std::pow(d1 * d1 * d1 * d1 + d2 * d2, 0.25);
}

double carnot_distance(const Grid& g, Point x, Point y) {
  Point d = displacement(g, x, y);
  return carnot_norm(d.x1, d.x2);
}

Point chart_difference(const Grid& g, Point x, Point y) {
  return {wrap(y.x1, g.L1) - wrap(x.x1, g.L1), wrap(y.x2, g.L2) - wrap(x.x2, g.L2)};
}

GridField monomial(const Grid& g, Point x, DerivIndex n) {
  GridField r(g);
  std::vector<double> p1(g.N1), p2(g.N2);
  const double c1 = wrap(x.x1, g.L1), c2 = wrap(x.x2, g.L2);
  for (int i = 0; i < g.N1; ++i) p1[i] = std::pow(wrap(i * g.h1(), g.L1) - c1, n.n1);
  for (int i = 0; i < g.N2; ++i) p2[i] = std::pow(wrap(i * g.h2(), g.L2) - c2, n.n2);
  for (int i2 = 0; i2 < g.N2; ++i2)
    for (int i1 = 0; i1 < g.N1; ++i1) r.at(i1, i2) = p1[i1] * p2[i2];
  return r;
}

std::vector<DerivIndex> taylor_indices(double eta) {
  std::vector<DerivIndex> out;
  if (eta < 0) return out;
  for (int d = 0; d <= eta; ++d)
    for (int n2 = 0; 2 * n2 <= d; ++n2) out.push_back({d - 2 * n2, n2});
  return out;
}

std::vector<double> taylor_coefficients(const GridField& f, const Node& x,
                                        const std::vector<DerivIndex>& ns) {
  return taylor_coefficients(forward(f), x, ns);
}

std::vector<double> taylor_coefficients(Spectrum s, const Node& x, const std::vector<DerivIndex>& ns) {
  const Grid& g = s.grid;
  enforce_hermitian(s);
  const Point px = x.point(g);
  const int M1 = g.N1 / 2 + 1;
  // phases factor as exp(i q1 x1) exp(i q2 x2); the monomials (i q)^n factor the same way
  std::vector<std::vector<std::complex<double>>> a(ns.size(), std::vector<std::complex<double>>(M1));
  std::vector<std::vector<std::complex<double>>> b(ns.size(), std::vector<std::complex<double>>(g.N2));
  for (std::size_t j = 0; j < ns.size(); ++j) {
    for (int k1 = 0; k1 < M1; ++k1) {
      double q1 = wavenumber1(g, k1);
      double w = (k1 == 0 || k1 == g.N1 / 2) ? 1.0 : 2.0;
      bool skip = k1 == g.N1 / 2 && ns[j].n1 % 2 == 1;
      a[j][k1] = skip ? 0.0 : w * ipow(q1, ns[j].n1) * std::polar(1.0, q1 * px.x1);
    }
    for (int k2 = 0; k2 < g.N2; ++k2) {
      double q2 = wavenumber2(g, k2);
      bool skip = k2 == g.N2 / 2 && ns[j].n2 % 2 == 1;
      b[j][k2] = skip ? 0.0 : ipow(q2, ns[j].n2) * std::polar(1.0, q2 * px.x2);
    }
  }
  std::vector<double> out(ns.size(), 0.0);
  for (std::size_t j = 0; j < ns.size(); ++j) {
    double acc = 0;
    for (int k2 = 0; k2 < g.N2; ++k2) {
      const std::complex<double>* row = &s.c[static_cast<std::size_t>(k2) * M1];
      std::complex<double> r = 0;
      for (int k1 = 0; k1 < M1; ++k1) r += row[k1] * a[j][k1];
      acc += (r * b[j][k2]).real();
    }
    out[j] = acc / (static_cast<double>(g.size()) * factorial(ns[j].n1) * factorial(ns[j].n2));
  }
  return out;
}

GridField taylor_truncate(const GridField& f, const Node& x, double eta) {
  if (eta >= kMaxTaylorDegree + 1)
    throw std::invalid_argument("taylor_truncate: degree beyond the resolvable range");
  auto ns = taylor_indices(eta);
  if (ns.empty()) return f;
  const Grid& g = f.grid();
  auto coef = taylor_coefficients(f, x, ns);
  // constant term from the node value itself, so that the result vanishes at x exactly
  coef[0] = f.at(x);
  GridField r = f;
  const Point px = x.point(g);
  for (std::size_t j = 0; j < ns.size(); ++j) {
    if (coef[j] == 0.0) continue;
    if (ns[j].is_zero()) {
      r = r - coef[j];
    } else {
      r -= coef[j] * monomial(g, px, ns[j]);
    }
  }
  return r;
}

double sobolev_dual_norm(const GridField& f, double s) {
  const Grid& g = f.grid();
  Spectrum sp = forward(f);
  const int M1 = g.N1 / 2 + 1;
  double sum = 0.0;
  for (int k2 = 0; k2 < g.N2; ++k2) {
    double q2 = wavenumber2(g, k2);
    for (int k1 = 0; k1 < M1; ++k1) {
      if (k1 == 0 && k2 == 0) continue;
      double q1 = wavenumber1(g, k1);
      double w = (k1 == 0 || k1 == g.N1 / 2) ? 1.0 : 2.0;
      double q4 = qnorm4(q1, q2);
      sum += w * std::pow(q4, s / 2) * std::norm(sp.at(k2, k1));
    }
  }
  const double hh = g.h1() * g.h2();
  return std::sqrt(sum * hh * hh / (g.L1 * g.L2));
}

GridField parabolic_rescale(const GridField& f, int j) {
  const Grid& g = f.grid();
  if (j == 0) return f;
  GridField r(g);
  if (j > 0) {
    long s1 = 1L << j, s2 = 1L << (2 * j);
    if (s1 > g.N1 || s2 > g.N2) throw std::invalid_argument("parabolic_rescale: factor too large for grid");
    for (long i2 = 0; i2 < g.N2; ++i2)
      for (long i1 = 0; i1 < g.N1; ++i1) r.at(i1, i2) = f.at(s1 * i1, s2 * i2);
  } else {
    long s1 = 1L << (-j), s2 = 1L << (-2 * j);
    if (s1 > g.N1 || s2 > g.N2) throw std::invalid_argument("parabolic_rescale: factor too large for grid");
    for (long i2 = 0; i2 < g.N2; ++i2)
      for (long i1 = 0; i1 < g.N1; ++i1) r.at(i1, i2) = f.at(i1 / s1, i2 / s2);
  }
  return r;
}

namespace {

static_assert(std::endian::native == std::endian::little, "dump format assumes a little-endian host");

void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), sizeof v); }
double read_f64(std::istream& is) {
  double v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("field dump truncated");
  return v;
}

}  // namespace

void dump_field(const GridField& f, std::ostream& os) {
  const Grid& g = f.grid();
  write_f64(os, g.N1);
  write_f64(os, g.N2);
  write_f64(os, g.L1);
  write_f64(os, g.L2);
  os.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!os) throw std::runtime_error("field dump write failed");
}

GridField load_field(std::istream& is) {
  Grid g;
  double n1 = read_f64(is), n2 = read_f64(is);
  g.L1 = read_f64(is);
  g.L2 = read_f64(is);
  g.N1 = static_cast<int>(n1);
  g.N2 = static_cast<int>(n2);
  if (g.N1 != n1 || g.N2 != n2) throw std::runtime_error("field dump header corrupt");
  g.validate();
  GridField f(g);
  if (!is.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double))))
    throw std::runtime_error("field dump truncated");
  return f;
}

void dump_field(const GridField& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  dump_field(f, os);
}

GridField load_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  return load_field(is);
}

}  // namespace mirs
