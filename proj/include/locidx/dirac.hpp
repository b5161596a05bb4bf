#pragma once
// Lattice Dirac operators D = sum_i c_i (x) d_i (+ m E).

#include "isometry.hpp"

#include <memory>
#include <numbers>

namespace locidx {

enum class DifferenceScheme { central, spectral };

inline DifferenceScheme parse_scheme(const std::string& s) {
  if (s == "central") return DifferenceScheme::central;
  if (s == "spectral") return DifferenceScheme::spectral;
  throw Error("unknown differencing scheme '" + s + "'");
}
inline std::string to_string(DifferenceScheme s) { return s == DifferenceScheme::central ? "central" : "spectral"; }

struct DiracOperator {
  std::shared_ptr<const LatticeModel> model;
  std::shared_ptr<const CliffordBundle> bundle;
  DifferenceScheme scheme = DifferenceScheme::central;
  double mass = 0.0;
  SpMat matrix;

  Eigen::Index dim() const { return matrix.rows(); }
  int fiber_dim() const { return bundle->fiber_dim; }
  CMat dense() const { return CMat(matrix); }
  // gamma on the whole section space
  SpMat grading() const {
    const int f = bundle->fiber_dim;
    std::vector<Eigen::Triplet<cplx>> t;
    for (std::size_t m = 0; m < model->size(); ++m)
      for (int a = 0; a < f; ++a)
        for (int b = 0; b < f; ++b)
          if (bundle->grading(a, b) != cplx(0)) t.emplace_back(m * f + a, m * f + b, bundle->grading(a, b));
    SpMat g(dim(), dim());
    g.setFromTriplets(t.begin(), t.end());
    return g;
  }
};

// One-dimensional derivative weight d[k][l] along a line of n points (k != l).
inline double derivative_weight(const LatticeModel& m, int axis, DifferenceScheme scheme, int k, int l) {
  const int n = m.count(axis);
  const double h = m.spacing();
  const int d = k - l;
  if (d == 0) return 0.0;
  if (scheme == DifferenceScheme::central) {
    if (m.is_torus()) {
      int fwd = ((l - k) % n + n) % n;
      double w = 0.0;
      if (fwd == 1) w += 0.5 / h;
      if (fwd == n - 1) w -= 0.5 / h;
      return w;
    }
    if (l == k + 1) return 0.5 / h;
    if (l == k - 1) return -0.5 / h;
    return 0.0;
  }
  const double sign = (std::abs(d) % 2) ? -1.0 : 1.0;
  if (m.is_torus()) {
    if (n % 2 == 0) throw Error("spectral differencing on a torus needs an odd site count per axis");
    const double c = m.extent(axis);
    return (std::numbers::pi / c) * sign / std::sin(std::numbers::pi * d / n);
  }
  return sign / (d * h);
}

inline DiracOperator assemble_dirac(std::shared_ptr<const LatticeModel> model, std::shared_ptr<const CliffordBundle> bundle,
                                    DifferenceScheme scheme = DifferenceScheme::central, double mass = 0.0) {
  if (!model || !bundle) throw Error("assemble_dirac: null model or bundle");
  if (model->dim() != bundle->dim) throw Error("assemble_dirac: model and bundle dimensions differ");
  if (mass != 0.0 && !bundle->mass_generator) throw Error("assemble_dirac: bundle has no anticommuting mass generator");
  const int f = bundle->fiber_dim;
  const std::size_t ns = model->size();
  std::vector<Eigen::Triplet<cplx>> trip;
  for (int axis = 0; axis < model->dim(); ++axis) {
    const CMat& c = bundle->generators[axis];
    const int n = model->count(axis);
    const std::size_t st = model->stride(axis);
    std::vector<double> w(n * n);
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) w[k * n + l] = derivative_weight(*model, axis, scheme, k, l);
    for (std::size_t s = 0; s < ns; ++s) {
      const int k = model->axis_index(s, axis);
      const std::size_t base = s - k * st;
      for (int l = 0; l < n; ++l) {
        double wk = w[k * n + l];
        if (wk == 0.0) continue;
        const std::size_t t = base + l * st;
        for (int a = 0; a < f; ++a)
          for (int b = 0; b < f; ++b)
            if (c(a, b) != cplx(0)) trip.emplace_back(s * f + a, t * f + b, c(a, b) * wk);
      }
    }
  }
  if (mass != 0.0) {
    const CMat& e = *bundle->mass_generator;
    for (std::size_t s = 0; s < ns; ++s)
      for (int a = 0; a < f; ++a)
        for (int b = 0; b < f; ++b)
          if (e(a, b) != cplx(0)) trip.emplace_back(s * f + a, s * f + b, mass * e(a, b));
  }
  DiracOperator d;
  d.model = std::move(model);
  d.bundle = std::move(bundle);
  d.scheme = scheme;
  d.mass = mass;
  d.matrix.resize(ns * f, ns * f);
  d.matrix.setFromTriplets(trip.begin(), trip.end());
  d.matrix.prune(cplx(0));
  return d;
}

// ||D Phi - Phi D||_2 by power iteration.
inline double commutator_norm(const DiracOperator& d, const IsometryPair& g, std::uint64_t seed = 1) {
  if (g.fiber_dim() != d.fiber_dim() || g.model->size() != d.model->size())
    throw Error("commutator_norm: incompatible shapes");
  SpMat p = action_matrix(g);
  SpMat c = d.matrix * p - p * d.matrix;
  c.prune(cplx(0), 1e-15);
  if (c.nonZeros() == 0) return 0.0;
  return sparse_norm(c, seed);
}

}  // namespace locidx
