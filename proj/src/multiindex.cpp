#include "mirs/multiindex.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace mirs {

Scaling Scaling::with_alpha(double alpha) {
  Scaling s;
  s.alpha = alpha;
  s.lambda = alpha / 2;
  return s;
}

void Scaling::validate() const {
  if (!(alpha > 0.25 && alpha < 1.0))
    throw std::invalid_argument("alpha must lie in (0.25, 1)");
  if (!(epsilon > 0 && epsilon < 1e-3))
    throw std::invalid_argument("epsilon must lie in (0, 1e-3)");
  if (!(lambda > 0 && lambda < alpha))
    throw std::invalid_argument("lambda must lie in (0, alpha)");
}

MultiIndex MultiIndex::unit_k(int k, int mult) {
  if (k < 0) throw std::invalid_argument("z_k key must be nonnegative");
  MultiIndex m;
  m.add_pop(k, mult);
  return m;
}

MultiIndex MultiIndex::unit_n(DerivIndex n, int mult) {
  if (n.n1 < 0 || n.n2 < 0 || n.is_zero())
    throw std::invalid_argument("z_n key must be a nonzero derivative index");
  MultiIndex m;
  m.add_deriv(n, mult);
  return m;
}

int MultiIndex::pop(int k) const {
  auto it = pop_.find(k);
  return it == pop_.end() ? 0 : it->second;
}

int MultiIndex::deriv(DerivIndex n) const {
  auto it = deriv_.find(n);
  return it == deriv_.end() ? 0 : it->second;
}

bool MultiIndex::is_unit_n() const {
  return pop_.empty() && deriv_.size() == 1 && deriv_.begin()->second == 1;
}

int MultiIndex::length() const {
  int s = 0;
  for (auto& [k, m] : pop_) s += m;
  for (auto& [n, m] : deriv_) s += m;
  return s;
}

void MultiIndex::add_pop(int k, int mult) {
  if (mult == 0) return;
  int v = (pop_[k] += mult);
  if (v < 0) throw std::domain_error("negative multiplicity");
  if (v == 0) pop_.erase(k);
}

void MultiIndex::add_deriv(DerivIndex n, int mult) {
  if (mult == 0) return;
  int v = (deriv_[n] += mult);
  if (v < 0) throw std::domain_error("negative multiplicity");
  if (v == 0) deriv_.erase(n);
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
  MultiIndex r = *this;
  r += other;
  return r;
}

MultiIndex& MultiIndex::operator+=(const MultiIndex& other) {
  for (auto& [k, m] : other.pop_) add_pop(k, m);
  for (auto& [n, m] : other.deriv_) add_deriv(n, m);
  return *this;
}

MultiIndex MultiIndex::operator-(const MultiIndex& other) const {
  if (!contains(other)) throw std::domain_error("multi-index difference is negative");
  MultiIndex r = *this;
  for (auto& [k, m] : other.pop_) r.add_pop(k, -m);
  for (auto& [n, m] : other.deriv_) r.add_deriv(n, -m);
  return r;
}

bool MultiIndex::contains(const MultiIndex& other) const {
  for (auto& [k, m] : other.pop_)
    if (pop(k) < m) return false;
  for (auto& [n, m] : other.deriv_)
    if (deriv(n) < m) return false;
  return true;
}

int MultiIndex::plength() const {
  int s = 0;
  for (auto& [n, m] : deriv_) s += n.degree() * m;
  return s;
}

int MultiIndex::brackets0() const {
  int s = 0;
  for (auto& [k, m] : pop_) s += k * m;
  return s;
}

int MultiIndex::brackets() const {
  int s = brackets0();
  for (auto& [n, m] : deriv_) s -= m;
  return s;
}

std::string MultiIndex::to_string() const {
  if (is_zero()) return "1";
  std::ostringstream os;
  bool first = true;
  auto sep = [&] {
    if (!first) os << ' ';
    first = false;
  };
  for (auto& [k, m] : pop_) {
    sep();
    os << 'z' << k;
    if (m != 1) os << '^' << m;
  }
  for (auto& [n, m] : deriv_) {
    sep();
    os << "z(" << n.n1 << ',' << n.n2 << ')';
    if (m != 1) os << '^' << m;
  }
  return os.str();
}

namespace {

int read_int(std::string_view s, std::size_t& i) {
  std::size_t j = i;
  while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
  if (j == i) throw std::invalid_argument("expected integer in multi-index '" + std::string(s) + "'");
  int v = std::stoi(std::string(s.substr(i, j - i)));
  i = j;
  return v;
}

}  // namespace

MultiIndex MultiIndex::parse(std::string_view s) {
  MultiIndex r;
  std::size_t i = 0;
  auto skip = [&] {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  };
  skip();
  if (i < s.size() && s.substr(i) == "1") return r;
  if (i == s.size()) throw std::invalid_argument("empty multi-index");
  while (true) {
    skip();
    if (i == s.size()) break;
    if (s[i] != 'z') throw std::invalid_argument("bad multi-index '" + std::string(s) + "'");
    ++i;
    if (i < s.size() && s[i] == '_') ++i;
    bool is_n = false;
    int k = 0;
    DerivIndex n;
    if (i < s.size() && s[i] == '(') {
      ++i;
      n.n1 = read_int(s, i);
      if (i >= s.size() || s[i] != ',') throw std::invalid_argument("bad derivative key");
      ++i;
      n.n2 = read_int(s, i);
      if (i >= s.size() || s[i] != ')') throw std::invalid_argument("bad derivative key");
      ++i;
      is_n = true;
      if (n.is_zero()) throw std::invalid_argument("z(0,0) is not a valid key");
    } else {
      k = read_int(s, i);
    }
    int m = 1;
    if (i < s.size() && s[i] == '^') {
      ++i;
      m = read_int(s, i);
    }
    if (is_n)
      r.add_deriv(n, m);
    else
      r.add_pop(k, m);
  }
  return r;
}

std::strong_ordering operator<=>(const MultiIndex& a, const MultiIndex& b) {
  if (auto c = std::lexicographical_compare_three_way(a.pop_.begin(), a.pop_.end(), b.pop_.begin(),
                                                      b.pop_.end());
      c != 0)
    return c;
  return std::lexicographical_compare_three_way(a.deriv_.begin(), a.deriv_.end(),
                                                b.deriv_.begin(), b.deriv_.end());
}

double order_key(const MultiIndex& b, const Scaling& s) {
  return b.homogeneity().value(s.alpha_hat()) + s.lambda * b.pop(0);
}

std::vector<MultiIndex> enumerate_index_set(double cutoff, const Scaling& s, bool populated_only) {
  std::vector<MultiIndex> out;
  const double ah = s.alpha_hat();
  if (!(cutoff > ah)) return out;

  // generators with their (strictly positive) increment of the order key
  std::vector<std::pair<MultiIndex, double>> gens;
  gens.push_back({MultiIndex::unit_k(0), s.lambda});
  for (int k = 1; k * ah < cutoff; ++k) gens.push_back({MultiIndex::unit_k(k), k * ah});
  const int max_deg = static_cast<int>(std::ceil(cutoff));
  for (int n2 = 0; 2 * n2 <= max_deg; ++n2)
    for (int n1 = 0; n1 + 2 * n2 <= max_deg; ++n1) {
      if (n1 == 0 && n2 == 0) continue;
      double inc = (n1 + 2 * n2) - ah;
      if (ah + inc < cutoff) gens.push_back({MultiIndex::unit_n(n1, n2), inc});
    }

  std::function<void(std::size_t, const MultiIndex&, double)> rec = [&](std::size_t from,
                                                                       const MultiIndex& cur,
                                                                       double key) {
    out.push_back(cur);
    for (std::size_t g = from; g < gens.size(); ++g) {
      double nk = key + gens[g].second;
      if (nk < cutoff) rec(g, cur + gens[g].first, nk);
    }
  };
  rec(0, MultiIndex::zero(), ah);

  if (populated_only)
    std::erase_if(out, [](const MultiIndex& b) { return !b.is_populated(); });
  // recompute keys from scratch so ties are decided on identical arithmetic
  std::vector<std::pair<double, MultiIndex>> keyed;
  keyed.reserve(out.size());
  for (auto& b : out) {
    double key = order_key(b, s);
    if (key < cutoff) keyed.push_back({key, b});
  }
  std::sort(keyed.begin(), keyed.end());
  out.clear();
  for (auto& [k, b] : keyed) out.push_back(b);
  return out;
}

namespace {

// all compositions of m into `parts` nonnegative integers
void compositions(int m, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(m);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int a = m; a >= 0; --a) {
    cur.push_back(a);
    compositions(m - a, parts - 1, cur, out);
    cur.pop_back();
  }
}

std::size_t binom(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

std::vector<std::vector<MultiIndex>> decompositions(const MultiIndex& b, int parts) {
  if (parts < 1) throw std::invalid_argument("decompositions: parts must be >= 1");
  std::vector<std::vector<MultiIndex>> out{std::vector<MultiIndex>(parts)};
  auto extend = [&](auto make_unit, int mult) {
    std::vector<std::vector<int>> comps;
    std::vector<int> cur;
    compositions(mult, parts, cur, comps);
    std::vector<std::vector<MultiIndex>> next;
    next.reserve(out.size() * comps.size());
    for (auto& tup : out)
      for (auto& c : comps) {
        auto t = tup;
        for (int p = 0; p < parts; ++p)
          if (c[p] > 0) t[p] += make_unit(c[p]);
        next.push_back(std::move(t));
      }
    out = std::move(next);
  };
  for (auto& [k, m] : b.pop()) extend([k](int c) { return MultiIndex::unit_k(k, c); }, m);
  for (auto& [n, m] : b.deriv()) extend([n](int c) { return MultiIndex::unit_n(n, c); }, m);
  return out;
}

std::size_t decomposition_count(const MultiIndex& b, int parts) {
  std::size_t r = 1;
  for (auto& [k, m] : b.pop()) r *= binom(m + parts - 1, parts - 1);
  for (auto& [n, m] : b.deriv()) r *= binom(m + parts - 1, parts - 1);
  return r;
}

Truncation::Truncation(double cutoff, const Scaling& s, bool populated_only)
    : indices_(enumerate_index_set(cutoff, s, populated_only)), cutoff_(cutoff), scaling_(s) {
  index();
}

Truncation::Truncation(std::vector<MultiIndex> indices, double cutoff, const Scaling& s)
    : indices_(std::move(indices)), cutoff_(cutoff), scaling_(s) {
  index();
}

void Truncation::index() {
  for (std::size_t i = 0; i < indices_.size(); ++i)
    if (!position_.emplace(indices_[i], i).second)
      throw std::invalid_argument("duplicate multi-index in truncation");
}

int Truncation::max_pop_key() const {
  int m = -1;
  for (auto& b : indices_)
    if (!b.pop().empty()) m = std::max(m, b.pop().rbegin()->first);
  return m;
}

}  // namespace mirs
