#pragma once
// Analytic side (small-t localized supertraces), geometric side (fixed-set averages) and verdict checks.

#include "asymptotic_trace.hpp"
#include "parallel.hpp"

#include <Eigen/Eigenvalues>

namespace locidx {

struct Tolerances {
  double cluster_tol = 1e-3;
  double agreement_tol = 0.01;  // relative
  double decay_tol = 1e-6;
  double oracle_tol = 1e-2;
  double min_t_over_h = 4.0;  // certification: t >= 4h
  double margin_tol = 1e-6;   // certification: box-edge Gaussian estimate
};

inline std::vector<double> default_t_grid() {
  std::vector<double> ts;
  for (double t2 : {0.4, 0.2, 0.1, 0.05, 0.025}) ts.push_back(std::sqrt(t2));
  return ts;
}

// ---------------------------------------------------------------------------
// Geometric side

struct GeometricStage {
  int j = 0;
  double vol_u = 0.0;
  double fixed_volume = 0.0;  // h^{dim fix} * #(U_j^phi)
  double fixed_integral = 0.0;
  double value = 0.0;
};

struct GeometricSide {
  std::vector<GeometricStage> stages;
  AccumulationSet points;
  std::optional<double> value;
  bool empty_fixed_set = false;
};

inline GeometricStage geometric_stage(const ExhaustionPlan& p, const IsometryPair& g,
                                      const std::function<double(std::size_t)>& integrand, int j) {
  const auto& m = *p.model;
  Region uj = p.u_stage(j);
  if (uj.empty()) throw Error("geometric_side: empty U_j at stage " + std::to_string(j));
  const double w = std::pow(m.spacing(), g.fixed_dim());
  GeometricStage s;
  s.j = j;
  s.vol_u = uj.volume(m);
  for (auto site : uj.sites)
    if (g.is_fixed(site)) {
      s.fixed_volume += w;
      s.fixed_integral += w * integrand(site);
    }
  s.value = s.fixed_integral / s.vol_u;
  return s;
}

inline GeometricSide geometric_side(const ExhaustionPlan& p, const IsometryPair& g,
                                    const std::function<double(std::size_t)>& integrand, const std::vector<int>& js,
                                    const AccumulationOptions& acc = {}, SelectionRule rule = SelectionRule::first) {
  GeometricSide out;
  std::vector<double> vals;
  bool any_fixed = false;
  for (int j : js) {
    out.stages.push_back(geometric_stage(p, g, integrand, j));
    vals.push_back(out.stages.back().value);
    any_fixed = any_fixed || out.stages.back().fixed_volume > 0.0;
  }
  out.empty_fixed_set = !any_fixed;
  out.points = accumulation_points(vals, acc);
  out.value = select_point(out.points, rule);
  return out;
}

// ---------------------------------------------------------------------------
// Fixed-point integrand on flat space

// tr(G Phi) / |det(1 - O_N)|, O_N the normal part of O.
inline double lefschetz_closed_form(const IsometryPair& g, const CMat& grading) {
  cplx tr = ((grading.size() ? grading : CMat::Identity(g.fiber_dim(), g.fiber_dim())) * g.lift).trace();
  Eigen::EigenSolver<RMat> es(g.orthogonal);
  cplx det = 1.0;
  for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) {
    cplx l = es.eigenvalues()(k);
    if (std::abs(l - 1.0) > 1e-9) det *= 1.0 - l;
  }
  return tr.real() / std::abs(det);
}

// h^{codim} * sum over the normal slice through m0 of tr(G Phi k(phi^{-1}m, m)), restricted to
// normal distance < window (keeps other torus fixed components out).
inline double normal_slice_integral(const IsometryPair& g, const KernelAt& k, std::size_t m0, const CMat* grading,
                                    double window = kInf) {
  const auto& m = *g.model;
  const int n = m.dim();
  RMat pf = g.fixed_projector();
  const double w = std::pow(m.spacing(), n - g.fixed_dim());
  auto x0 = m.coords(m0);
  std::vector<std::size_t> slice;
  for (std::size_t s = 0; s < m.size(); ++s) {
    RVec dx(n);
    for (int a = 0; a < n; ++a) dx(a) = m.axis_delta(x0[a], m.coord(s, a), a);
    if ((pf * dx).norm() < 0.5 * m.spacing() && dx.norm() < window) slice.push_back(s);
  }
  double sum = 0.0;
  for (double v : trace_density(g, k, slice, grading)) sum += v;
  return w * sum;
}

struct IntegrandOracle {
  std::size_t site = 0;
  std::vector<double> ts;  // decreasing
  std::vector<double> values;
  double value = 0.0;  // smallest t
  double spread = 0.0;
  double closed_form = 0.0;
  bool converged = false;
  bool closed_form_agrees = false;
  std::string note;
};

// Fixed site closest to the origin (centered coordinates) inside the region.
inline std::optional<std::size_t> central_fixed_site(const IsometryPair& g, const Region& where) {
  std::optional<std::size_t> best;
  double bd = kInf;
  for (auto s : where.sites) {
    if (!g.is_fixed(s)) continue;
    double r2 = 0.0;
    for (int a = 0; a < g.model->dim(); ++a) r2 += std::pow(g.model->centered_coord(s, a), 2);
    if (r2 < bd) bd = r2, best = s;
  }
  return best;
}

// Small-t limit of the slice-integrated supertrace density at a fixed site; the
// closed form is only a cross-check.
inline IntegrandOracle ass_integrand_flat(const KernelFamily& heat, const IsometryPair& g, const CMat& grading,
                                          std::size_t site, std::vector<double> ts, double tol = 1e-2,
                                          double window = kInf) {
  if (ts.empty()) throw Error("ass_integrand_flat: empty t grid");
  if (!g.is_fixed(site)) throw Error("ass_integrand_flat: site is not fixed");
  std::sort(ts.begin(), ts.end(), std::greater<>());
  IntegrandOracle o;
  o.site = site;
  o.ts = ts;
  for (double t : ts) o.values.push_back(normal_slice_integral(g, heat.at(t), site, &grading, window));
  o.value = o.values.back();
  o.spread = ts.size() > 1 ? std::abs(o.values.back() - o.values[o.values.size() - 2]) : 0.0;
  o.converged = ts.size() > 1 && o.spread <= tol * std::max(1.0, std::abs(o.value));
  if (!o.converged) o.note = "integrand oracle not converged in t (spread " + std::to_string(o.spread) + ")";
  o.closed_form = lefschetz_closed_form(g, grading);
  o.closed_form_agrees = std::abs(o.closed_form - o.value) <= tol * std::max(1.0, std::abs(o.value));
  return o;
}

// ---------------------------------------------------------------------------
// Analytic side

struct AnalyticRow {
  double t = 0.0;
  bool certified = false;
  double margin_estimate = 0.0;
  std::vector<double> stage_values;
  AccumulationSet points;
  std::optional<double> value;
  double displaced_block_norm = 0.0;  // max_m ||k(phi^{-1}m, m)||_F over U_{j_max}
};

struct AnalyticSide {
  std::vector<int> stages;
  std::vector<AnalyticRow> rows;  // decreasing t
  double margin = kInf;           // distance from U_{j_max} and its preimage to the box exterior
  std::optional<double> value;    // selected point at the smallest certified t
  std::optional<double> richardson;
  double trend_slope = 0.0;  // log|v| vs log t over certified rows
  std::string note;

  const AnalyticRow* smallest_certified() const {
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
      if (it->certified) return &*it;
    return nullptr;
  }
};

struct AnalyticOptions {
  AccumulationOptions accumulation{};
  SelectionRule rule = SelectionRule::first;
  double min_t_over_h = 4.0;
  double margin_tol = 1e-6;
  int threads = 1;
};

inline AnalyticSide analytic_side(const ExhaustionPlan& p, const IsometryPair& g, const KernelFamily& heat,
                                  const CMat& grading, std::vector<double> ts, const std::vector<int>& js,
                                  const AnalyticOptions& opt = {}) {
  if (ts.empty() || js.empty()) throw Error("analytic_side: empty grid");
  std::sort(ts.begin(), ts.end(), std::greater<>());
  const auto& m = *p.model;
  AnalyticSide out;
  out.stages = js;
  Region top = p.u_stage(*std::max_element(js.begin(), js.end()));
  auto edge = distance_to_box_exterior(m);
  for (auto s : top.sites) out.margin = std::min({out.margin, edge[s], edge[g.apply_inverse(s)]});
  out.rows.resize(ts.size());
  parallel_for(ts.size(), opt.threads, [&](std::size_t i) {
    AnalyticRow& row = out.rows[i];
    row.t = ts[i];
    row.margin_estimate = std::isfinite(out.margin) ? std::exp(-out.margin * out.margin / (4.0 * row.t * row.t)) : 0.0;
    row.certified = row.t >= opt.min_t_over_h * m.spacing() * (1.0 - 1e-12) && row.margin_estimate <= opt.margin_tol;
    KernelAt k = heat.at(row.t);
    row.stage_values = tr_u_phi_stages(p, g, k, js, &grading);
    row.points = accumulation_points(row.stage_values, opt.accumulation);
    row.value = select_point(row.points, opt.rule);
    for (auto s : top.sites) row.displaced_block_norm = std::max(row.displaced_block_norm, k.block(g.apply_inverse(s), s).norm());
  });
  std::vector<const AnalyticRow*> cert;
  for (const auto& r : out.rows)
    if (r.certified) cert.push_back(&r);
  if (cert.empty()) {
    out.note = "no certified t: t >= " + std::to_string(opt.min_t_over_h) + "h or the box margin fails";
    return out;
  }
  const AnalyticRow& last = *cert.back();
  out.value = last.value;
  if (!out.value) out.note = "no stable accumulation point at the smallest certified t";
  if (cert.size() >= 2 && cert[cert.size() - 2]->value && last.value) {
    // one Richardson step in t^2
    double t1 = cert[cert.size() - 2]->t, t0 = last.t;
    double v1 = *cert[cert.size() - 2]->value, v0 = *last.value;
    out.richardson = v0 + (v0 - v1) * t0 * t0 / (t1 * t1 - t0 * t0);
  }
  std::vector<double> lx, ly;
  for (auto* r : cert) {
    double v = r->value ? *r->value : r->stage_values.back();
    lx.push_back(std::log(r->t));
    ly.push_back(std::log(std::max(std::abs(v), 1e-300)));
  }
  if (lx.size() >= 2) out.trend_slope = ls_slope(lx, ly);
  return out;
}

// ---------------------------------------------------------------------------
// Clause (a): displacement vanishing with a Gaussian envelope

struct VanishingCheck {
  double delta = 0.0;
  DecayEnvelope envelope;
  std::vector<EnvelopeSample> samples;  // value = sqrt(fiber) * displaced block norm
  EnvelopeReport norm_report;
  bool values_dominated = false;
  bool below_tol = false;
  bool pass = false;
};

// Envelope fitted on the larger half of the certified t, verified on all of them. Since
// |tr(G Phi k)| <= sqrt(fiber) ||k||_F the measured traces are checked against it too.
inline VanishingCheck vanishing_check(const AnalyticSide& a, double delta, int fiber, double decay_tol) {
  VanishingCheck c;
  c.delta = delta;
  std::vector<const AnalyticRow*> cert;
  for (const auto& r : a.rows)
    if (r.certified) cert.push_back(&r);
  if (cert.size() < 2 || !(delta > 0.0) || !std::isfinite(delta)) return c;
  for (auto* r : cert) c.samples.push_back({0, delta, r->t, std::sqrt(double(fiber)) * r->displaced_block_norm});
  std::size_t ncal = std::max<std::size_t>(2, (cert.size() + 1) / 2);
  std::vector<EnvelopeSample> cal(c.samples.begin(), c.samples.begin() + ncal);
  bool degenerate = true;
  for (const auto& s : cal) degenerate = degenerate && s.value < 1e-300;
  if (degenerate) {
    c.envelope = gaussian_envelope(0.0, 1.0);
  } else {
    c.envelope = fit_gaussian_envelope(cal);
  }
  c.norm_report = check_envelope(c.samples, c.envelope);
  c.values_dominated = true;
  for (auto* r : cert) {
    double v = r->value ? std::abs(*r->value) : std::abs(r->stage_values.back());
    c.values_dominated = c.values_dominated && v <= c.envelope(delta, r->t) + 1e-15;
  }
  const AnalyticRow& last = *cert.back();
  c.below_tol = last.value && std::abs(*last.value) < decay_tol;
  c.pass = c.norm_report.all_pass && c.values_dominated && c.below_tol;
  return c;
}

// ---------------------------------------------------------------------------
// U = M: geometric stage values against the fixed-volume ratio

struct UmmRow {
  int j = 0;
  double fixed_volume = 0.0;
  double volume = 0.0;
  double ratio = 0.0;
  double geometric = 0.0;
};

struct UmmDiagnostic {
  std::vector<UmmRow> rows;
  double constant = 0.0;
  bool bounded = false;
  bool ratio_decreasing = false;
  bool pass = false;
};

inline UmmDiagnostic umm_diagnostic(const ExhaustionPlan& p, const IsometryPair& g, const GeometricSide& geo,
                                    double integrand_bound) {
  UmmDiagnostic d;
  d.constant = std::abs(integrand_bound);
  d.bounded = true;
  for (const auto& s : geo.stages) {
    UmmRow r{s.j, s.fixed_volume, p.stage(s.j).volume(*p.model), 0.0, s.value};
    r.ratio = r.fixed_volume / r.volume;
    d.bounded = d.bounded && std::abs(r.geometric) <= d.constant * r.ratio * (1.0 + 1e-9) + 1e-15;
    d.rows.push_back(r);
  }
  d.ratio_decreasing = d.rows.size() >= 2 && d.rows.back().ratio < d.rows.front().ratio;
  for (std::size_t i = 1; i < d.rows.size(); ++i)
    d.ratio_decreasing = d.ratio_decreasing && d.rows[i].ratio <= d.rows[i - 1].ratio * (1.0 + 1e-12);
  d.pass = d.bounded && d.ratio_decreasing;
  return d;
}

// ---------------------------------------------------------------------------
// Invertible D: idempotent convergence and vanishing pairing

struct MassGapRow {
  double t = 0.0;
  double distance = 0.0;  // ||e(t) - f||
  double pairing = 0.0;
};

struct MassGapCheck {
  std::vector<MassGapRow> rows;
  bool decreasing = false;
  bool pairing_small = false;
  bool pass = false;
};

inline MassGapCheck mass_gap_check(const DiracOperator& d, const ExhaustionPlan& p, const IsometryPair& g,
                                   std::vector<double> ts, int j, double decay_tol) {
  std::sort(ts.begin(), ts.end());
  MassGapCheck c;
  for (double t : ts) {
    auto e = graded_idempotent(d, t);
    c.rows.push_back({t, e.distance_to_reference(), idempotent_pairing(p, g, e, j)});
  }
  c.decreasing = c.rows.size() >= 2;
  for (std::size_t i = 1; i < c.rows.size(); ++i) c.decreasing = c.decreasing && c.rows[i].distance < c.rows[i - 1].distance;
  c.pairing_small = !c.rows.empty() && std::abs(c.rows.back().pairing) < decay_tol;
  c.pass = c.decreasing && c.pairing_small;
  return c;
}

// ---------------------------------------------------------------------------
// Verdicts

struct Verdict {
  std::string clause;
  bool pass = false;
  std::string detail;
};

inline bool all_pass(const std::vector<Verdict>& v) {
  return !v.empty() && std::all_of(v.begin(), v.end(), [](const Verdict& x) { return x.pass; });
}

// Clause (b): both sides singletons within cluster_tol and agreeing within tolerance.
inline Verdict agreement_verdict(const AnalyticSide& a, const GeometricSide& geo, const Tolerances& tol) {
  Verdict v{"b", false, {}};
  const AnalyticRow* last = a.smallest_certified();
  if (!last) {
    v.detail = "analytic side not certified";
    return v;
  }
  if (last->points.clusters.size() != 1 || !a.value) {
    v.detail = "analytic accumulation set is not a singleton";
    return v;
  }
  if (geo.points.clusters.size() != 1 || !geo.value) {
    v.detail = "geometric accumulation set is not a singleton";
    return v;
  }
  double an = *a.value, ge = *geo.value;
  double diff = std::abs(an - ge);
  double allowed = tol.agreement_tol * std::max(std::abs(an), std::abs(ge)) + tol.decay_tol;
  v.pass = diff <= allowed;
  v.detail = "analytic " + std::to_string(an) + " geometric " + std::to_string(ge) + " diff " + std::to_string(diff);
  return v;
}

}  // namespace locidx
