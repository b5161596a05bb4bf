#pragma once
// Lattice models of flat boxes and tori, regions, distances and penumbras.

#include "linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace locidx {

enum class GeometryKind { box, torus };

inline constexpr std::size_t kDefaultMaxSites = 4'000'000;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

class LatticeModel {
 public:
  LatticeModel() = default;

  int dim() const { return static_cast<int>(counts_.size()); }
  GeometryKind kind() const { return kind_; }
  bool is_torus() const { return kind_ == GeometryKind::torus; }
  double spacing() const { return h_; }
  double weight() const { return weight_; }
  std::size_t size() const { return size_; }
  int count(int axis) const { return counts_[axis]; }
  const std::vector<int>& counts() const { return counts_; }
  // half width (box) or circumference (torus)
  double extent(int axis) const { return extents_[axis]; }

  std::vector<int> multi_index(std::size_t site) const {
    std::vector<int> idx(dim());
    for (int a = dim() - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(site % counts_[a]);
      site /= counts_[a];
    }
    return idx;
  }
  int axis_index(std::size_t site, int axis) const {
    return static_cast<int>((site / strides_[axis]) % counts_[axis]);
  }
  std::size_t stride(int axis) const { return strides_[axis]; }
  std::size_t site_index(std::span<const int> idx) const {
    std::size_t s = 0;
    for (int a = 0; a < dim(); ++a) s += static_cast<std::size_t>(idx[a]) * strides_[a];
    return s;
  }

  double coord(std::size_t site, int axis) const { return axis_coord(axis_index(site, axis), axis); }
  double axis_coord(int k, int axis) const {
    return is_torus() ? k * h_ : (k - offsets_[axis]) * h_;
  }
  // Torus coordinates folded into (-C/2, C/2]; box coordinates unchanged.
  double centered_coord(std::size_t site, int axis) const {
    double x = coord(site, axis);
    if (is_torus() && x > 0.5 * extents_[axis] + 1e-12 * h_) x -= extents_[axis];
    return x;
  }
  std::vector<double> coords(std::size_t site) const {
    std::vector<double> x(dim());
    for (int a = 0; a < dim(); ++a) x[a] = coord(site, a);
    return x;
  }

  // Signed displacement b - a along an axis, minimal image on a torus.
  double axis_delta(double a, double b, int axis) const {
    double d = b - a;
    if (is_torus()) {
      const double c = extents_[axis];
      d -= c * std::round(d / c);
    }
    return d;
  }
  double distance(std::size_t p, std::size_t q) const {
    double s = 0.0;
    for (int a = 0; a < dim(); ++a) {
      double d = axis_delta(coord(p, a), coord(q, a), a);
      s += d * d;
    }
    return std::sqrt(s);
  }

  // Site at coordinates x, if x is a lattice point.
  std::optional<std::size_t> locate(std::span<const double> x, double tol = 1e-7) const {
    std::vector<int> idx(dim());
    for (int a = 0; a < dim(); ++a) {
      double u = x[a] / h_;
      long k = std::lround(u);
      if (std::abs(u - k) > tol) return std::nullopt;
      if (is_torus()) {
        long n = counts_[a];
        k = ((k % n) + n) % n;
      } else {
        k += offsets_[a];
        if (k < 0 || k >= counts_[a]) return std::nullopt;
      }
      idx[a] = static_cast<int>(k);
    }
    return site_index(idx);
  }

  friend LatticeModel build_box_lattice(int, std::vector<double>, double, std::size_t);
  friend LatticeModel build_torus_lattice(int, std::vector<double>, double, std::size_t);

 private:
  void finish(std::size_t max_sites) {
    strides_.assign(dim(), 1);
    double total = 1.0;
    for (int a = dim() - 1; a >= 0; --a) {
      strides_[a] = static_cast<std::size_t>(total);
      total *= counts_[a];
    }
    if (total > static_cast<double>(max_sites))
      throw Error("lattice: " + std::to_string(static_cast<long long>(total)) +
                  " sites exceeds budget of " + std::to_string(max_sites));
    size_ = static_cast<std::size_t>(total);
    weight_ = std::pow(h_, dim());
  }

  GeometryKind kind_ = GeometryKind::box;
  double h_ = 1.0;
  double weight_ = 1.0;
  std::size_t size_ = 0;
  std::vector<double> extents_;
  std::vector<int> counts_;
  std::vector<int> offsets_;
  std::vector<std::size_t> strides_;
};

inline LatticeModel build_box_lattice(int n, std::vector<double> half_widths, double h,
                                      std::size_t max_sites = kDefaultMaxSites) {
  if (n < 1) throw Error("box lattice: dimension must be >= 1");
  if (!(h > 0.0)) throw Error("box lattice: spacing must be positive");
  if (half_widths.size() == 1 && n > 1) half_widths.assign(n, half_widths[0]);
  if (static_cast<int>(half_widths.size()) != n) throw Error("box lattice: half_widths size mismatch");
  LatticeModel m;
  m.kind_ = GeometryKind::box;
  m.h_ = h;
  m.extents_ = half_widths;
  for (double l : half_widths) {
    if (!(l > 0.0)) throw Error("box lattice: half widths must be positive");
    int k = static_cast<int>(std::floor(l / h + 1e-9));
    m.offsets_.push_back(k);
    m.counts_.push_back(2 * k + 1);
  }
  m.finish(max_sites);
  return m;
}

inline LatticeModel build_torus_lattice(int n, std::vector<double> circumferences, double h,
                                        std::size_t max_sites = kDefaultMaxSites) {
  if (n < 1) throw Error("torus lattice: dimension must be >= 1");
  if (!(h > 0.0)) throw Error("torus lattice: spacing must be positive");
  if (circumferences.size() == 1 && n > 1) circumferences.assign(n, circumferences[0]);
  if (static_cast<int>(circumferences.size()) != n) throw Error("torus lattice: circumferences size mismatch");
  LatticeModel m;
  m.kind_ = GeometryKind::torus;
  m.h_ = h;
  m.extents_ = circumferences;
  for (double c : circumferences) {
    double u = c / h;
    long k = std::lround(u);
    if (k < 1 || std::abs(u - k) > 1e-9 * std::max(1.0, u))
      throw Error("torus lattice: circumference " + std::to_string(c) + " is not a multiple of spacing");
    m.offsets_.push_back(0);
    m.counts_.push_back(static_cast<int>(k));
  }
  m.finish(max_sites);
  return m;
}

// ---------------------------------------------------------------------------
// Regions

struct Region {
  std::vector<std::size_t> sites;  // sorted, unique
  std::string tag;

  std::size_t size() const { return sites.size(); }
  bool empty() const { return sites.empty(); }
  bool contains(std::size_t s) const { return std::binary_search(sites.begin(), sites.end(), s); }
  double volume(const LatticeModel& m) const { return m.weight() * static_cast<double>(sites.size()); }
  std::vector<char> mask(std::size_t n) const {
    std::vector<char> out(n, 0);
    for (auto s : sites) out[s] = 1;
    return out;
  }
};

inline Region make_region(const LatticeModel& m, std::vector<std::size_t> sites, std::string tag = {}) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  if (!sites.empty() && sites.back() >= m.size()) throw Error("region '" + tag + "' is not a subset of the model");
  return Region{std::move(sites), std::move(tag)};
}

inline void check_subset(const LatticeModel& m, const Region& r) {
  if (!r.sites.empty() && r.sites.back() >= m.size())
    throw Error("region '" + r.tag + "' is not a subset of the model");
}

template <class Pred>
Region select_sites(const LatticeModel& m, Pred&& keep, std::string tag = {}) {
  Region r{{}, std::move(tag)};
  for (std::size_t s = 0; s < m.size(); ++s)
    if (keep(s)) r.sites.push_back(s);
  return r;
}

inline Region all_sites(const LatticeModel& m, std::string tag = "M") {
  Region r{std::vector<std::size_t>(m.size()), std::move(tag)};
  std::iota(r.sites.begin(), r.sites.end(), std::size_t{0});
  return r;
}

inline Region complement(const LatticeModel& m, const Region& x, std::string tag = {}) {
  check_subset(m, x);
  auto mk = x.mask(m.size());
  return select_sites(m, [&](std::size_t s) { return !mk[s]; }, tag.empty() ? "M-" + x.tag : tag);
}

inline Region intersect(const Region& a, const Region& b, std::string tag = {}) {
  Region r{{}, std::move(tag)};
  std::set_intersection(a.sites.begin(), a.sites.end(), b.sites.begin(), b.sites.end(),
                        std::back_inserter(r.sites));
  return r;
}

inline Region difference(const Region& a, const Region& b, std::string tag = {}) {
  Region r{{}, std::move(tag)};
  std::set_difference(a.sites.begin(), a.sites.end(), b.sites.begin(), b.sites.end(),
                      std::back_inserter(r.sites));
  return r;
}

inline bool is_subset(const Region& a, const Region& b) {
  return std::includes(b.sites.begin(), b.sites.end(), a.sites.begin(), a.sites.end());
}

// Axis-aligned product of intervals in centered coordinates.
// open[a] selects lo < x < hi instead of lo <= x <= hi.
inline Region product_region(const LatticeModel& m, const std::vector<double>& lo, const std::vector<double>& hi,
                             const std::vector<bool>& open, std::string tag = {}) {
  const int n = m.dim();
  if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n || static_cast<int>(open.size()) != n)
    throw Error("product_region: bounds size mismatch");
  const double eps = 1e-9 * m.spacing();
  return select_sites(
      m,
      [&](std::size_t s) {
        for (int a = 0; a < n; ++a) {
          double x = m.centered_coord(s, a);
          bool in = open[a] ? (x > lo[a] + eps && x < hi[a] - eps) : (x >= lo[a] - eps && x <= hi[a] + eps);
          if (!in) return false;
        }
        return true;
      },
      std::move(tag));
}

// ---------------------------------------------------------------------------
// Distance transforms

namespace detail {

// Squared distance transform of one line (lower envelope of parabolas), spacing h.
inline void edt_line(const std::vector<double>& f, std::vector<double>& d, double h) {
  const int n = static_cast<int>(f.size());
  d.assign(n, kInf);
  std::vector<int> v;
  std::vector<double> z;
  v.reserve(n);
  z.reserve(n + 1);
  auto key = [&](int q) { return f[q] + (q * h) * (q * h); };
  for (int q = 0; q < n; ++q) {
    if (!std::isfinite(f[q])) continue;
    double s = -kInf;
    while (!v.empty()) {
      int p = v.back();
      s = (key(q) - key(p)) / (2.0 * h * h * (q - p));
      if (s > z.back()) break;
      v.pop_back();
      z.pop_back();
      s = -kInf;
    }
    v.push_back(q);
    z.push_back(s);
  }
  if (v.empty()) return;
  z.push_back(kInf);
  std::size_t k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    double dq = (q - v[k]) * h;
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace detail

// Euclidean distance from every site to the region (0 on the region, +inf if empty).
// Separable exact transform; periodic axes are unrolled three times.
inline std::vector<double> distance_to_set(const LatticeModel& m, const Region& x) {
  check_subset(m, x);
  std::vector<double> g(m.size(), kInf);
  for (auto s : x.sites) g[s] = 0.0;
  if (x.empty()) return g;
  const double h = m.spacing();
  std::vector<double> f, d;
  for (int a = 0; a < m.dim(); ++a) {
    const int n = m.count(a);
    const std::size_t st = m.stride(a);
    const bool wrap = m.is_torus();
    for (std::size_t base = 0; base < m.size(); ++base) {
      if (m.axis_index(base, a) != 0) continue;
      if (wrap) {
        f.resize(3 * n);
        for (int k = 0; k < 3 * n; ++k) f[k] = g[base + (k % n) * st];
        detail::edt_line(f, d, h);
        for (int k = 0; k < n; ++k) g[base + k * st] = d[n + k];
      } else {
        f.resize(n);
        for (int k = 0; k < n; ++k) f[k] = g[base + k * st];
        detail::edt_line(f, d, h);
        for (int k = 0; k < n; ++k) g[base + k * st] = d[k];
      }
    }
  }
  for (auto& v : g) v = std::sqrt(v);
  return g;
}

// Distance from every site to sites outside a box model, i.e. to the first missing
// lattice point beyond each face. +inf on a torus.
inline std::vector<double> distance_to_box_exterior(const LatticeModel& m) {
  std::vector<double> out(m.size(), kInf);
  if (m.is_torus()) return out;
  for (std::size_t s = 0; s < m.size(); ++s) {
    double best = kInf;
    for (int a = 0; a < m.dim(); ++a) {
      int k = m.axis_index(s, a);
      int steps = std::min(k + 1, m.count(a) - k);
      best = std::min(best, steps * m.spacing());
    }
    out[s] = best;
  }
  return out;
}

// Open ball d(center, m) < r.
inline Region ball(const LatticeModel& m, std::size_t center, double r) {
  if (r < 0) throw Error("ball: radius must be nonnegative");
  if (center >= m.size()) throw Error("ball: center outside model");
  const double eps = 1e-12 * std::max(1.0, r);
  return select_sites(m, [&](std::size_t s) { return m.distance(center, s) < r - eps; }, "B");
}

// Closed outer penumbra d(m, X) <= r.
inline Region outer_penumbra(const LatticeModel& m, const Region& x, double r) {
  if (r < 0) throw Error("outer_penumbra: radius must be nonnegative");
  auto d = distance_to_set(m, x);
  const double eps = 1e-9 * m.spacing();
  return select_sites(m, [&](std::size_t s) { return d[s] <= r + eps; }, "Pen+(" + x.tag + ")");
}

// Inner penumbra of U_j = U n Mj: points with d(m, M \ Mj) >= r.
inline Region inner_penumbra_U(const LatticeModel& m, const Region& u, const Region& mj, double r) {
  if (r < 0) throw Error("inner_penumbra_U: radius must be nonnegative");
  check_subset(m, u);
  check_subset(m, mj);
  Region uj = intersect(u, mj);
  auto d = distance_to_set(m, complement(m, mj));
  const double eps = 1e-9 * m.spacing();
  Region out{{}, "Pen-(" + u.tag + "," + mj.tag + ")"};
  for (auto s : uj.sites)
    if (d[s] >= r - eps) out.sites.push_back(s);
  return out;
}

// Region as CSV: site index followed by coordinates.
inline void write_region_csv(std::ostream& os, const LatticeModel& m, const Region& r) {
  os << "site";
  for (int a = 0; a < m.dim(); ++a) os << ",x" << a;
  os << "\n";
  for (auto s : r.sites) {
    os << s;
    for (int a = 0; a < m.dim(); ++a) os << "," << m.coord(s, a);
    os << "\n";
  }
}

}  // namespace locidx
