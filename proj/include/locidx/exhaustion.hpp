#pragma once
// Exhaustions M_j, U-regularity, averaged integrals, accumulation points and Tr^U_Phi.

#include "heat.hpp"

#include <functional>
#include <map>

namespace locidx {

struct ExhaustionPlan {
  std::shared_ptr<const LatticeModel> model;
  Region U;
  std::function<Region(int)> builder;
  int j_min = 1;
  int j_max = 1;
  std::string family;

  Region stage(int j) const {
    if (j < j_min || j > j_max) throw Error("exhaustion stage " + std::to_string(j) + " out of range");
    Region r = builder(j);
    check_subset(*model, r);
    if (r.tag.empty()) r.tag = "M" + std::to_string(j);
    return r;
  }
  Region u_stage(int j) const { return intersect(U, stage(j), "U" + std::to_string(j)); }
  std::vector<int> stages() const {
    std::vector<int> js;
    for (int j = j_min; j <= j_max; ++j) js.push_back(j);
    return js;
  }
};

// Cube of half width w in centered coordinates.
inline Region centered_cube(const LatticeModel& m, double w, std::string tag = {}) {
  const int n = m.dim();
  return product_region(m, std::vector<double>(n, -w), std::vector<double>(n, w), std::vector<bool>(n, false),
                        std::move(tag));
}

inline ExhaustionPlan make_cube_plan(std::shared_ptr<const LatticeModel> model, Region u, int j_max, double scale = 1.0,
                                     int j_min = 1) {
  if (j_max < j_min) throw Error("cube plan: j_max < j_min");
  ExhaustionPlan p{model, std::move(u), {}, j_min, j_max, "cubes"};
  p.builder = [model, scale](int j) { return centered_cube(*model, j * scale); };
  return p;
}

// M_j = [-2^{j+1}, 2^{j+1}]^n (times scale)
inline ExhaustionPlan make_dyadic_plan(std::shared_ptr<const LatticeModel> model, Region u, int j_max, double scale = 1.0,
                                       int j_min = 0) {
  if (j_max < j_min) throw Error("dyadic plan: j_max < j_min");
  ExhaustionPlan p{model, std::move(u), {}, j_min, j_max, "dyadic"};
  p.builder = [model, scale](int j) { return centered_cube(*model, std::ldexp(scale, j + 1)); };
  return p;
}

// M_j = cube with half width radii[j - 1]
inline ExhaustionPlan make_radii_plan(std::shared_ptr<const LatticeModel> model, Region u, std::vector<double> radii) {
  if (radii.empty()) throw Error("radii plan: empty radius list");
  for (std::size_t i = 1; i < radii.size(); ++i)
    if (radii[i] < radii[i - 1]) throw Error("radii plan: radii must be nondecreasing");
  ExhaustionPlan p{model, std::move(u), {}, 1, static_cast<int>(radii.size()), "radii"};
  p.builder = [model, radii](int j) { return centered_cube(*model, radii[j - 1]); };
  return p;
}

// Sites within distance < rho of the fixed set of phi.
inline Region tube_region(const LatticeModel& m, const IsometryPair& g, double rho) {
  auto d = distance_to_set(m, fixed_sites(g));
  const double eps = 1e-9 * m.spacing();
  return select_sites(m, [&](std::size_t s) { return d[s] < rho - eps; }, "tube");
}

struct PlanDiagnostics {
  bool nested = true;
  bool exhausts = true;
  bool u_invariant = true;
  double delta = kInf;  // min displacement off U
  std::vector<std::string> problems;
  bool ok() const { return problems.empty(); }
};

inline PlanDiagnostics validate_plan(const ExhaustionPlan& p, const IsometryPair* g = nullptr) {
  PlanDiagnostics d;
  check_subset(*p.model, p.U);
  Region prev;
  for (int j = p.j_min; j <= p.j_max; ++j) {
    Region cur = p.stage(j);
    if (j > p.j_min && !is_subset(prev, cur)) d.nested = false;
    prev = std::move(cur);
  }
  if (prev.size() != p.model->size()) d.exhausts = false;
  if (!d.nested) d.problems.push_back("stages are not nested");
  if (!d.exhausts) d.problems.push_back("last stage does not cover the lattice");
  if (g) {
    for (auto s : p.U.sites)
      if (!p.U.contains(g->apply(s))) {
        d.u_invariant = false;
        break;
      }
    if (!d.u_invariant) d.problems.push_back("U is not invariant under phi");
    d.delta = displacement_lower_bound(*p.model, *g, complement(*p.model, p.U));
    if (!(d.delta > 0.0)) d.problems.push_back("displacement off U is not bounded below");
  }
  return d;
}

// (vol U_j - vol Pen^-_U(U_j, r)) / vol U_j
inline double u_regularity_ratio(const ExhaustionPlan& p, double r, int j) {
  Region mj = p.stage(j);
  Region uj = intersect(p.U, mj);
  if (uj.empty()) throw Error("u_regularity_ratio: vol(U_j) = 0");
  Region pen = inner_penumbra_U(*p.model, p.U, mj, r);
  return (uj.volume(*p.model) - pen.volume(*p.model)) / uj.volume(*p.model);
}

inline double averaged_integral(const ExhaustionPlan& p, const std::function<double(std::size_t)>& density, int j) {
  Region uj = p.u_stage(j);
  if (uj.empty()) throw Error("averaged_integral: empty U_j");
  double s = 0.0;
  for (auto m : uj.sites) s += density(m);
  return s / static_cast<double>(uj.size());  // weights cancel
}

// ---------------------------------------------------------------------------
// Accumulation points

enum class SelectionRule { first, min, max, nearest };

inline SelectionRule parse_selection(const std::string& s) {
  if (s == "first") return SelectionRule::first;
  if (s == "min") return SelectionRule::min;
  if (s == "max") return SelectionRule::max;
  if (s == "nearest" || s == "nearest-to-target") return SelectionRule::nearest;
  throw Error("unknown selection rule '" + s + "'");
}

struct Cluster {
  double center = 0.0;
  std::vector<std::size_t> indices;  // witnessing subsequence (positions in the input)
};

struct AccumulationSet {
  std::vector<Cluster> clusters;
  bool stable = false;
  std::string note;
  std::vector<double> centers() const {
    std::vector<double> c;
    for (const auto& k : clusters) c.push_back(k.center);
    return c;
  }
};

struct AccumulationOptions {
  double cluster_tol = 1e-3;
  double burn_in = 0.25;       // fraction of leading stages discarded
  double final_window = 0.25;  // fraction of the tail a cluster must revisit
  std::size_t min_stages = 8;
  std::size_t center_members = 3;
};

// Single-linkage clusters of the tail; a cluster counts if it recurs in the final window.
inline AccumulationSet accumulation_points(const std::vector<double>& seq, const AccumulationOptions& opt = {}) {
  AccumulationSet out;
  if (seq.size() < opt.min_stages) {
    out.note = "fewer than " + std::to_string(opt.min_stages) + " stages";
    return out;
  }
  const std::size_t start = static_cast<std::size_t>(std::floor(opt.burn_in * seq.size()));
  std::vector<std::size_t> tail;
  for (std::size_t i = start; i < seq.size(); ++i) tail.push_back(i);
  const std::size_t window = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(opt.final_window * tail.size())));
  const std::size_t window_start = seq.size() - std::min(window, tail.size());
  std::vector<std::size_t> order = tail;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seq[a] < seq[b]; });
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (k == 0 || seq[order[k]] - seq[order[k - 1]] > opt.cluster_tol) groups.emplace_back();
    groups.back().push_back(order[k]);
  }
  for (auto& gidx : groups) {
    std::sort(gidx.begin(), gidx.end());
    if (gidx.size() < 2 || gidx.back() < window_start) continue;
    Cluster c;
    c.indices = gidx;
    const std::size_t take = std::min(opt.center_members, gidx.size());
    double s = 0.0;
    for (std::size_t k = gidx.size() - take; k < gidx.size(); ++k) s += seq[gidx[k]];
    c.center = s / take;
    out.clusters.push_back(std::move(c));
  }
  out.stable = !out.clusters.empty();
  if (!out.stable) out.note = "no stable cluster at tolerance " + std::to_string(opt.cluster_tol);
  return out;
}

inline std::optional<double> select_point(const AccumulationSet& a, SelectionRule rule, double target = 0.0) {
  if (a.clusters.empty()) return std::nullopt;
  const Cluster* best = &a.clusters.front();
  for (const auto& c : a.clusters) {
    switch (rule) {
      case SelectionRule::first:
        if (c.indices.front() < best->indices.front()) best = &c;
        break;
      case SelectionRule::min:
        if (c.center < best->center) best = &c;
        break;
      case SelectionRule::max:
        if (c.center > best->center) best = &c;
        break;
      case SelectionRule::nearest:
        if (std::abs(c.center - target) < std::abs(best->center - target)) best = &c;
        break;
    }
  }
  return best->center;
}

struct AveragedFunctional {
  std::vector<int> stages;
  std::vector<double> volumes;  // vol U_j
  std::vector<double> values;   // stage averages
  AccumulationSet points;
};

// ---------------------------------------------------------------------------
// Zeta example: zeta(x) = sum_j (-1)^j chi(2^{-j} x - 1)

struct ZetaSpec {
  std::vector<double> coefficients = {0, 0, 30, -60, 30};  // chi(x) = sum c_k x^k on [0,1]
  double expected_integral = 1.0;
  double h = 0.125;
  int j_max = 13;
  double tol = 1e-9;
  AccumulationOptions accumulation{};
};

inline double eval_poly(const std::vector<double>& c, double x) {
  double s = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) s = s * x + *it;
  return s;
}

inline AveragedFunctional zeta_example(const ZetaSpec& spec) {
  const auto& c = spec.coefficients;
  if (std::abs(eval_poly(c, 0.0)) > spec.tol || std::abs(eval_poly(c, 1.0)) > spec.tol)
    throw Error("zeta_example: bump does not vanish at the support ends");
  double integral = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) integral += c[k] / (k + 1.0);
  if (std::abs(integral - spec.expected_integral) > spec.tol)
    throw Error("zeta_example: bump integral " + std::to_string(integral) + " differs from " +
                std::to_string(spec.expected_integral));
  auto model = std::make_shared<const LatticeModel>(build_box_lattice(1, {std::ldexp(1.0, spec.j_max + 1)}, spec.h));
  std::vector<double> zeta(model->size(), 0.0);
  for (std::size_t s = 0; s < model->size(); ++s) {
    const double x = model->coord(s, 0);
    if (x <= 0.0) continue;
    for (int j = 0; j <= spec.j_max + 1; ++j) {
      double y = std::ldexp(x, -j) - 1.0;
      if (y >= 0.0 && y <= 1.0) zeta[s] += ((j % 2) ? -1.0 : 1.0) * eval_poly(c, y);
    }
  }
  auto plan = make_dyadic_plan(model, all_sites(*model, "U"), spec.j_max, 1.0, 0);
  AveragedFunctional out;
  for (int j = plan.j_min; j <= plan.j_max; ++j) {
    out.stages.push_back(j);
    out.volumes.push_back(plan.u_stage(j).volume(*model));
    out.values.push_back(averaged_integral(plan, [&](std::size_t s) { return zeta[s]; }, j));
  }
  out.points = accumulation_points(out.values, spec.accumulation);
  return out;
}

// ---------------------------------------------------------------------------
// Localized trace

// tr(G Phi kappa(phi^{-1} m, m)) at each requested site, G = grading or identity.
inline std::vector<double> trace_density(const IsometryPair& g, const KernelAt& k, const std::vector<std::size_t>& sites,
                                         const CMat* grading = nullptr) {
  if (k.fiber_dim() != g.fiber_dim()) throw Error("trace_density: kernel and lift fiber sizes differ");
  CMat pre = g.lift;
  if (grading && grading->size()) pre = *grading * g.lift;
  std::vector<double> out;
  out.reserve(sites.size());
  for (auto m : sites) {
    cplx v = (pre * k.block(g.apply_inverse(m), m)).trace();
    if (std::abs(v.imag()) > 1e-9 * (1.0 + std::abs(v.real())))
      throw Error("trace_density: fiber trace has a significant imaginary part");
    out.push_back(v.real());
  }
  return out;
}

// Stage-j average over U_j of the Phi-twisted (optionally graded) fiber trace.
inline double tr_u_phi(const ExhaustionPlan& p, const IsometryPair& g, const KernelAt& k, int j,
                       const CMat* grading = nullptr) {
  Region uj = p.u_stage(j);
  if (uj.empty()) throw Error("tr_u_phi: empty U_j");
  auto dens = trace_density(g, k, uj.sites, grading);
  double s = 0.0;
  for (double v : dens) s += v;
  return s / static_cast<double>(uj.size());
}

// All stages in one pass over U_{j_max}.
inline std::vector<double> tr_u_phi_stages(const ExhaustionPlan& p, const IsometryPair& g, const KernelAt& k,
                                           const std::vector<int>& js, const CMat* grading = nullptr) {
  int jmax = *std::max_element(js.begin(), js.end());
  Region top = p.u_stage(jmax);
  auto dens = trace_density(g, k, top.sites, grading);
  std::map<std::size_t, double> at;
  for (std::size_t i = 0; i < top.sites.size(); ++i) at[top.sites[i]] = dens[i];
  std::vector<double> out;
  for (int j : js) {
    Region uj = p.u_stage(j);
    if (uj.empty()) throw Error("tr_u_phi: empty U_j at stage " + std::to_string(j));
    double s = 0.0;
    for (auto m : uj.sites) s += at.at(m);
    out.push_back(s / static_cast<double>(uj.size()));
  }
  return out;
}

}  // namespace locidx
