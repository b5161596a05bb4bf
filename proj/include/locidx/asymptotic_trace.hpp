#pragma once
// Region decomposition V/W/X/Y, the commutator (asymptotic trace) test and the graded heat idempotent.

#include "exhaustion.hpp"

#include <array>

namespace locidx {

enum class PairRegion : std::uint8_t { V = 0, W = 1, X = 2, Y = 3 };

struct RegionDecomposition {
  int j = 0;
  double r = 0.0;
  std::vector<std::size_t> u_sites;  // U_j
  std::size_t n_sites = 0;           // |M|
  std::vector<PairRegion> labels;    // row-major |U_j| x |M|
  std::array<std::size_t, 4> counts{};

  PairRegion label(std::size_t row, std::size_t mp) const { return labels[row * n_sites + mp]; }
};

inline RegionDecomposition decompose_regions(const ExhaustionPlan& p, const IsometryPair& g, int j, double r) {
  if (!(r > 0.0)) throw Error("decompose_regions: r must be positive");
  const auto& model = *p.model;
  Region mj = p.stage(j);
  Region uj = intersect(p.U, mj);
  auto in_mj = mj.mask(model.size());
  auto in_uj = uj.mask(model.size());
  RegionDecomposition dec;
  dec.j = j;
  dec.r = r;
  dec.u_sites = uj.sites;
  dec.n_sites = model.size();
  dec.labels.resize(uj.size() * model.size());
  for (std::size_t row = 0; row < uj.size(); ++row) {
    const std::size_t m = uj.sites[row];
    const std::size_t pm = g.apply_inverse(m);
    for (std::size_t mp = 0; mp < model.size(); ++mp) {
      PairRegion lab;
      if (in_uj[mp]) {
        lab = PairRegion::V;
      } else if (in_mj[mp]) {
        lab = PairRegion::Y;
      } else {
        lab = (model.distance(m, mp) < r || model.distance(pm, mp) < r) ? PairRegion::W : PairRegion::X;
      }
      dec.labels[row * model.size() + mp] = lab;
      ++dec.counts[static_cast<int>(lab)];
    }
  }
  return dec;
}

struct RegionIntegrals {
  double V = 0.0, W = 0.0, X = 0.0, Y = 0.0;
  double total() const { return V + W + X + Y; }
};

// Partial integrals of tr(Phi k(phi^{-1}m, m') l(m', m) - Phi l(phi^{-1}m, m') k(m', m)) / vol(U_j).
inline RegionIntegrals commutator_region_integrals(const IsometryPair& g, const KernelAt& a, const KernelAt& b,
                                                   const RegionDecomposition& dec) {
  const auto& model = a.model();
  const double w = model.weight();
  std::array<cplx, 4> acc{};
  for (std::size_t row = 0; row < dec.u_sites.size(); ++row) {
    const std::size_t m = dec.u_sites[row];
    const std::size_t pm = g.apply_inverse(m);
    for (std::size_t mp = 0; mp < dec.n_sites; ++mp) {
      cplx v = (g.lift * (a.block(pm, mp) * b.block(mp, m) - b.block(pm, mp) * a.block(mp, m))).trace();
      acc[static_cast<int>(dec.label(row, mp))] += v;
    }
  }
  if (dec.u_sites.empty()) throw Error("commutator_region_integrals: empty U_j");
  const double norm = w * w / (w * static_cast<double>(dec.u_sites.size()));
  RegionIntegrals out;
  out.V = (acc[0] * norm).real();
  out.W = (acc[1] * norm).real();
  out.X = (acc[2] * norm).real();
  out.Y = (acc[3] * norm).real();
  return out;
}

// Cauchy-Schwarz bound on |Y part| from measured masses; every m' in Y is delta/2 away from m or phi^{-1}m.
inline double y_region_bound(const IsometryPair& g, const KernelAt& a, const KernelAt& b, const RegionDecomposition& dec,
                             double delta) {
  const auto& model = a.model();
  const double w = model.weight();
  const double half = 0.5 * delta;
  double total = 0.0;
  for (auto m : dec.u_sites) {
    const std::size_t pm = g.apply_inverse(m);
    // far/all masses of rows at pm and columns at m
    double a_row_far = 0, a_row_all = 0, b_row_far = 0, b_row_all = 0;
    double a_col_far = 0, a_col_all = 0, b_col_far = 0, b_col_all = 0;
    for (std::size_t mp = 0; mp < model.size(); ++mp) {
      const bool far_p = model.distance(pm, mp) >= half;
      const bool far_m = model.distance(m, mp) >= half;
      double ar = a.block(pm, mp).squaredNorm() * w, br = b.block(pm, mp).squaredNorm() * w;
      double ac = a.block(mp, m).squaredNorm() * w, bc = b.block(mp, m).squaredNorm() * w;
      a_row_all += ar, b_row_all += br, a_col_all += ac, b_col_all += bc;
      if (far_p) a_row_far += ar, b_row_far += br;
      if (far_m) a_col_far += ac, b_col_far += bc;
    }
    // kappa lambda term and lambda kappa term
    total += std::sqrt(a_row_far * b_col_all) + std::sqrt(a_row_all * b_col_far);
    total += std::sqrt(b_row_far * a_col_all) + std::sqrt(b_row_all * a_col_far);
  }
  return total / static_cast<double>(dec.u_sites.size());
}

// ---------------------------------------------------------------------------
// Commutator test

struct AsymptoticTraceOptions {
  double decay_tol = 1e-4;
  double r = 1.0;  // W/X split radius
  AccumulationOptions accumulation{};
  SelectionRule rule = SelectionRule::first;
  bool region_split = true;
};

struct AsymptoticTraceRow {
  double t = 0.0;
  std::vector<int> stages;
  std::vector<double> stage_values;
  AccumulationSet points;
  std::optional<double> value;  // selected accumulation point
  RegionIntegrals regions;      // at the last stage
  std::vector<double> stage_v;  // V part at every stage
  double y_bound = 0.0;
};

struct AsymptoticTraceReport {
  std::vector<AsymptoticTraceRow> rows;  // ordered by decreasing t
  double trend_slope = 0.0;
  bool identically_zero = false;
  bool decays = false;
  bool below_tol = false;
  bool pass = false;
  double delta = 0.0;
  std::string note;
};

// Operator families here are dense (materialized) kernels.
inline AsymptoticTraceReport asymptotic_trace_test(const IsometryPair& g, const KernelFamily& a, const KernelFamily& b,
                                                   const ExhaustionPlan& plan, std::vector<double> t_grid,
                                                   const std::vector<int>& js, const AsymptoticTraceOptions& opt = {}) {
  if (t_grid.size() < 2) throw Error("asymptotic_trace_test: need at least two t values");
  std::sort(t_grid.begin(), t_grid.end(), std::greater<>());
  AsymptoticTraceReport rep;
  const int jlast = *std::max_element(js.begin(), js.end());
  Region top = plan.stage(jlast);
  // displacement outside U within the last stage; sites beyond M_{j_max} never enter Y
  rep.delta = displacement_lower_bound(*plan.model, g, difference(top, plan.U));
  std::optional<RegionDecomposition> dec;
  std::vector<RegionDecomposition> stage_decs;
  if (opt.region_split) {
    dec = decompose_regions(plan, g, jlast, opt.r);
    for (int j : js) stage_decs.push_back(decompose_regions(plan, g, j, opt.r));
  }
  for (double t : t_grid) {
    AsymptoticTraceRow row;
    row.t = t;
    KernelAt ka = a.at(t), kb = b.at(t);
    CMat am = ka.matrix(), bm = kb.matrix();
    // separate products: a fused GEMM update rounds differently and spoils the A = B zero
    CMat ab = am * bm, ba = bm * am;
    KernelAt comm = KernelAt::from_matrix(t, a.model, a.fiber_dim, ab - ba);
    row.stages = js;
    row.stage_values = tr_u_phi_stages(plan, g, comm, js);
    row.points = accumulation_points(row.stage_values, opt.accumulation);
    row.value = select_point(row.points, opt.rule);
    if (dec) {
      auto da = KernelAt::from_matrix(t, a.model, a.fiber_dim, am);
      auto db = KernelAt::from_matrix(t, b.model, b.fiber_dim, bm);
      row.regions = commutator_region_integrals(g, da, db, *dec);
      row.y_bound = std::isfinite(rep.delta) ? y_region_bound(g, da, db, *dec, rep.delta) : 0.0;
      for (const auto& sd : stage_decs) row.stage_v.push_back(commutator_region_integrals(g, da, db, sd).V);
    }
    rep.rows.push_back(std::move(row));
  }
  bool all_zero = true;
  for (const auto& r : rep.rows)
    for (double v : r.stage_values) all_zero = all_zero && v == 0.0;
  rep.identically_zero = all_zero;
  const AsymptoticTraceRow& last = rep.rows.back();
  if (all_zero) {
    rep.decays = rep.below_tol = rep.pass = true;
    rep.note = "identically zero";
    return rep;
  }
  for (const auto& r : rep.rows)
    if (!r.value) rep.note += "unstable accumulation at t=" + std::to_string(r.t) + "; ";
  // smallest half of the grid
  const std::size_t half = (rep.rows.size() + 1) / 2;
  std::vector<double> lx, ly;
  for (std::size_t i = rep.rows.size() - std::max<std::size_t>(half, 2); i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    double v = r.value ? *r.value : r.stage_values.back();
    lx.push_back(std::log(r.t));
    ly.push_back(std::log(std::max(std::abs(v), 1e-300)));
  }
  rep.trend_slope = ls_slope(lx, ly);
  rep.decays = rep.trend_slope > 0.0;
  double final_value = last.value ? *last.value : last.stage_values.back();
  rep.below_tol = last.value.has_value() && std::abs(final_value) < opt.decay_tol;
  rep.pass = rep.decays && rep.below_tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Graded heat idempotent

struct GradedIdempotent {
  double t = 0.0;
  CMat e;  // section-space ordering, operator units
  CMat f;  // projector onto the odd part
  double idempotency_defect() const { return spectral_norm(e * e - e); }
  double distance_to_reference() const { return spectral_norm(e - f); }
};

// (1 - e^{-t^2 x}) / x with a series below t^2 x < threshold
inline double heat_quotient(double t, double x, double threshold = 1e-6) {
  const double y = t * t * x;
  if (std::abs(y) < threshold) return t * t * (1.0 - y / 2.0 + y * y / 6.0 - y * y * y / 24.0);
  return -std::expm1(-y) / x;
}

inline GradedIdempotent graded_idempotent(const DiracOperator& d, double t, std::size_t budget = kDefaultEigBudget) {
  if (static_cast<std::size_t>(d.dim()) > budget) throw Error("graded_idempotent: dense eigensolver budget exceeded");
  const CMat& gam = d.bundle->grading;
  const int f = d.fiber_dim();
  if ((gam - CMat(gam.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 0.0)
    throw Error("graded_idempotent: grading must be diagonal in the fiber basis");
  std::vector<Eigen::Index> ev, od;
  for (Eigen::Index s = 0; s < d.dim(); ++s) (gam(s % f, s % f).real() > 0 ? ev : od).push_back(s);
  CMat dd = d.dense();
  CMat dplus = dd(od, ev);   // S+ -> S-
  CMat dminus = dd(ev, od);  // S- -> S+
  auto pe = eigh(CMat(dminus * dplus));
  auto qe = eigh(CMat(dplus * dminus));
  auto fn = [](const HermitianEigen& e, auto&& g) { return apply_function(e, g); };
  const double t2 = t * t;
  CMat e11 = fn(pe, [t2](double x) { return std::exp(-t2 * x); });
  CMat e12 = fn(pe, [t, t2](double x) { return std::exp(-0.5 * t2 * x) * heat_quotient(t, x); }) * dminus;
  CMat e21 = fn(qe, [t2](double x) { return std::exp(-0.5 * t2 * x); }) * dplus;
  CMat e22 = fn(qe, [t2](double x) { return -std::expm1(-t2 * x); });
  GradedIdempotent out;
  out.t = t;
  out.e = CMat::Zero(d.dim(), d.dim());
  out.f = CMat::Zero(d.dim(), d.dim());
  out.e(ev, ev) = e11;
  out.e(ev, od) = e12;
  out.e(od, ev) = e21;
  out.e(od, od) = e22;
  for (auto i : od) out.f(i, i) = 1.0;
  return out;
}

// Tr^U_Phi(e) - Tr^U_Phi(f) at stage j, matrix trace over the grading blocks.
inline double idempotent_pairing(const ExhaustionPlan& p, const IsometryPair& g, const GradedIdempotent& e, int j) {
  auto k = KernelAt::from_matrix(e.t, p.model, g.fiber_dim(), e.e - e.f);
  return tr_u_phi(p, g, k, j);
}

}  // namespace locidx
