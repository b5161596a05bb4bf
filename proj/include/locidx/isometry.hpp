#pragma once
// Affine lattice isometries, bundle lifts and the action on sections.

#include "clifford.hpp"
#include "geometry.hpp"

#include <memory>

namespace locidx {

struct IsometryPair {
  std::shared_ptr<const LatticeModel> model;
  RMat orthogonal;
  RVec translation;
  CMat lift;  // constant fiber map
  bool preserves_grading = true;
  std::vector<std::size_t> forward;   // m -> phi(m)
  std::vector<std::size_t> backward;  // m -> phi^{-1}(m)

  int fiber_dim() const { return static_cast<int>(lift.rows()); }
  std::size_t apply(std::size_t m) const { return forward[m]; }
  std::size_t apply_inverse(std::size_t m) const { return backward[m]; }
  bool is_fixed(std::size_t m) const { return forward[m] == m; }
  // dimension of ker(O - I)
  int fixed_dim() const {
    const auto n = orthogonal.rows();
    Eigen::FullPivLU<RMat> lu(orthogonal - RMat::Identity(n, n));
    lu.setThreshold(1e-9);
    return static_cast<int>(n - lu.rank());
  }
  // Orthogonal projector onto the fixed directions ker(O - I).
  RMat fixed_projector() const {
    const auto n = orthogonal.rows();
    Eigen::SelfAdjointEigenSolver<RMat> es((orthogonal - RMat::Identity(n, n)).transpose() *
                                           (orthogonal - RMat::Identity(n, n)));
    RMat p = RMat::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k)
      if (es.eigenvalues()(k) < 1e-9) p += es.eigenvectors().col(k) * es.eigenvectors().col(k).transpose();
    return p;
  }
};

inline Region fixed_sites(const IsometryPair& g) {
  return select_sites(*g.model, [&](std::size_t m) { return g.is_fixed(m); }, "Fix");
}

// grading may be empty (ungraded check skipped).
inline IsometryPair make_isometry(std::shared_ptr<const LatticeModel> model, const RMat& o, const RVec& b,
                                  const CMat& lift, const CMat& grading = CMat()) {
  if (!model) throw Error("make_isometry: null model");
  const int n = model->dim();
  if (o.rows() != n || o.cols() != n || b.size() != n) throw Error("make_isometry: O/b shape does not match dimension");
  if ((o.transpose() * o - RMat::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-12)
    throw Error("make_isometry: O is not orthogonal");
  if (lift.rows() != lift.cols() || lift.rows() == 0) throw Error("make_isometry: lift must be a square matrix");
  if ((lift.adjoint() * lift - CMat::Identity(lift.rows(), lift.rows())).cwiseAbs().maxCoeff() > 1e-12)
    throw Error("make_isometry: lift is not unitary");
  if (model->is_torus()) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = std::abs(o(i, j));
        if (v > 1e-12 && std::abs(v - 1.0) > 1e-12)
          throw Error("make_isometry: torus isometries need a signed permutation O");
        if (v > 0.5 && std::abs(model->extent(i) - model->extent(j)) > 1e-9)
          throw Error("make_isometry: O mixes axes of unequal period");
      }
  }
  IsometryPair g;
  g.model = model;
  g.orthogonal = o;
  g.translation = b;
  g.lift = lift;
  if (grading.size()) {
    if (grading.rows() != lift.rows()) throw Error("make_isometry: lift and grading fiber sizes differ");
    g.preserves_grading = (lift * grading - grading * lift).cwiseAbs().maxCoeff() < 1e-12;
  }
  const std::size_t ns = model->size();
  g.forward.assign(ns, 0);
  g.backward.assign(ns, ns);
  RVec x(n);
  std::vector<double> y(n);
  for (std::size_t s = 0; s < ns; ++s) {
    for (int a = 0; a < n; ++a) x(a) = model->coord(s, a);
    RVec z = o * x + b;
    for (int a = 0; a < n; ++a) y[a] = z(a);
    auto t = model->locate(y);
    if (!t) throw Error("make_isometry: site set is not invariant under phi");
    g.forward[s] = *t;
    if (g.backward[*t] != ns) throw Error("make_isometry: phi is not injective on sites");
    g.backward[*t] = s;
  }
  return g;
}

// g o h
inline IsometryPair compose(const IsometryPair& g, const IsometryPair& h) {
  if (g.model != h.model && (g.model->size() != h.model->size()))
    throw Error("compose: pairs act on different models");
  return make_isometry(g.model, g.orthogonal * h.orthogonal, g.orthogonal * h.translation + g.translation,
                       g.lift * h.lift);
}

// (Phi s)(m) = lift s(phi^{-1} m)
inline CVec act_on_section(const IsometryPair& g, const CVec& s) {
  const Eigen::Index f = g.fiber_dim();
  const std::size_t ns = g.model->size();
  if (s.size() != static_cast<Eigen::Index>(ns) * f) throw Error("act_on_section: section length mismatch");
  CVec out(s.size());
  for (std::size_t m = 0; m < ns; ++m)
    out.segment(g.forward[m] * f, f) = g.lift * s.segment(m * f, f);
  return out;
}

inline SpMat action_matrix(const IsometryPair& g) {
  const Eigen::Index f = g.fiber_dim();
  const std::size_t ns = g.model->size();
  std::vector<Eigen::Triplet<cplx>> trip;
  trip.reserve(ns * f * f);
  for (std::size_t m = 0; m < ns; ++m)
    for (Eigen::Index a = 0; a < f; ++a)
      for (Eigen::Index b = 0; b < f; ++b)
        if (g.lift(a, b) != cplx(0)) trip.emplace_back(g.forward[m] * f + a, m * f + b, g.lift(a, b));
  SpMat p(ns * f, ns * f);
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

// min over the region of d(phi(m), m); +inf when empty
inline double displacement_lower_bound(const LatticeModel& model, const IsometryPair& g, const Region& region) {
  check_subset(model, region);
  double best = kInf;
  for (auto m : region.sites) best = std::min(best, model.distance(g.forward[m], m));
  return best;
}

// ---------------------------------------------------------------------------
// Built-in lifts

// Lambda(O) on forms, basis by bitmask: e_I -> wedge_{i in I} O e_i.
inline CMat exterior_lift(const RMat& o) {
  const int n = static_cast<int>(o.rows());
  const int f = 1 << n;
  CMat out = CMat::Zero(f, f);
  auto bits = [n](int mask) {
    std::vector<int> v;
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) v.push_back(i);
    return v;
  };
  for (int cm = 0; cm < f; ++cm) {
    auto cols = bits(cm);
    for (int rm = 0; rm < f; ++rm) {
      auto rows = bits(rm);
      if (rows.size() != cols.size()) continue;
      if (rows.empty()) {
        out(rm, cm) = 1.0;
        continue;
      }
      RMat sub(rows.size(), cols.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) sub(i, j) = o(rows[i], cols[j]);
      out(rm, cm) = sub.determinant();
    }
  }
  return out;
}

inline CMat scalar_sign_lift(int fiber_dim, int sign = 1) {
  if (sign != 1 && sign != -1) throw Error("scalar_sign_lift: sign must be +1 or -1");
  return double(sign) * CMat::Identity(fiber_dim, fiber_dim);
}

inline RMat reflection_matrix(int n, int k) {
  RMat o = RMat::Identity(n, n);
  for (int i = 0; i < k; ++i) o(i, i) = -1.0;
  return o;
}

// Smallest p with Phi^p acting as the identity (0 if none within limit).
inline int action_order(const IsometryPair& g, int limit = 64) {
  IsometryPair cur = g;
  for (int p = 1; p <= limit; ++p) {
    bool id = (cur.lift - CMat::Identity(cur.fiber_dim(), cur.fiber_dim())).cwiseAbs().maxCoeff() < 1e-12;
    for (std::size_t m = 0; id && m < cur.forward.size(); ++m) id = cur.forward[m] == m;
    if (id) return p;
    cur = compose(cur, g);
  }
  return 0;
}

}  // namespace locidx
