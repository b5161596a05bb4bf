#pragma once
// Stage commands shared by the CLI and the acceptance runner.

#include "scenario.hpp"

namespace locidx {

struct CommandResult {
  std::string name;
  std::vector<Table> tables;
  std::vector<Verdict> verdicts;
  nlohmann::json summary;

  bool pass() const { return all_pass(verdicts); }
};

inline void write_result(const std::filesystem::path& dir, const CommandResult& r, OutputFormat f) {
  for (const auto& t : r.tables) write_table(dir, t, f);
  Table v{"verdicts", {"command", "clause", "pass", "detail"}, {}};
  for (const auto& x : r.verdicts) v.add({r.name, x.clause, x.pass, x.detail});
  write_table(dir, v, f);
  nlohmann::json s = r.summary;
  s["command"] = r.name;
  s["pass"] = r.pass();
  if (f == OutputFormat::json) {
    std::ofstream(dir / "summary.json") << s.dump(2) << '\n';
  } else {
    Table t{"summary", {"command", "pass"}, {}};
    t.add({r.name, r.pass()});
    write_table(dir, t, f);
  }
}

// ---------------------------------------------------------------------------
// exhaustion-check

inline CommandResult exhaustion_check(const ScenarioConfig& c, double r) {
  CommandResult out{"exhaustion-check", {}, {}, {}};
  auto s = build_objects(c);
  auto diag = validate_plan(s.plan, &s.pair);
  Table t{"exhaustion", {"j", "sites_M_j", "sites_U_j", "vol_U_j", "u_regularity_ratio"}, {}};
  std::vector<double> ratios;
  for (int j : s.plan.stages()) {
    Region mj = s.plan.stage(j), uj = s.plan.u_stage(j);
    double ratio = uj.empty() ? kInf : u_regularity_ratio(s.plan, r, j);
    ratios.push_back(ratio);
    t.add({(long long)j, (long long)mj.size(), (long long)uj.size(), uj.volume(*s.model), ratio});
  }
  out.tables.push_back(t);
  std::string problems;
  for (const auto& p : diag.problems) problems += p + "; ";
  out.verdicts.push_back({"plan", diag.nested && diag.u_invariant, problems.empty() ? "ok" : problems});
  out.summary["scenario"] = c.id;
  out.summary["exhausts"] = diag.exhausts;
  out.summary["delta"] = std::isfinite(diag.delta) ? nlohmann::json(diag.delta) : nlohmann::json("inf");

  auto z = zeta_example(ZetaSpec{});
  Table zt{"zeta_stages", {"j", "volume", "value"}, {}};
  for (std::size_t i = 0; i < z.stages.size(); ++i) zt.add({(long long)z.stages[i], z.volumes[i], z.values[i]});
  out.tables.push_back(zt);
  auto centers = z.points.centers();
  std::sort(centers.begin(), centers.end());
  bool zeta_ok = z.points.stable && centers.size() == 2 && std::abs(centers[0] + 1.0 / 6.0) < 1e-3 &&
                 std::abs(centers[1] - 1.0 / 6.0) < 1e-3;
  out.verdicts.push_back({"zeta", zeta_ok, "accumulation points " + std::to_string(centers.size())});
  return out;
}

// ---------------------------------------------------------------------------
// heat-trace: McKean-Singer supertrace and equivariance defect

inline double global_supertrace(const KernelAt& k, const CMat& grading) {
  const auto& m = k.model();
  double s = 0.0;
  for (std::size_t site = 0; site < m.size(); ++site) s += (grading * k.block(site, site)).trace().real();
  return s * m.weight();
}

inline CommandResult heat_trace(const ScenarioConfig& c, std::uint64_t seed, int threads) {
  CommandResult out{"heat-trace", {}, {}, {}};
  auto s = build_objects(c);
  auto data = spectral_decomposition(s.d, c.op.eig_budget);
  auto heat = heat_family(s.d, data);
  std::vector<double> ts;
  for (double t2 : c.grids.t2) ts.push_back(std::sqrt(t2));
  std::vector<double> str(ts.size()), loc(ts.size());
  const CMat& gam = s.bundle->grading;
  parallel_for(ts.size(), threads, [&](std::size_t i) {
    auto k = heat.at(ts[i]);
    str[i] = global_supertrace(k, gam);
    loc[i] = tr_u_phi(s.plan, s.pair, k, s.plan.j_max, &gam);
  });
  Table t{"heat_trace", {"t", "t2", "supertrace", "localized_trace_jmax"}, {}};
  double lo = kInf, hi = -kInf;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    t.add({ts[i], ts[i] * ts[i], str[i], loc[i]});
    lo = std::min(lo, str[i]), hi = std::max(hi, str[i]);
  }
  out.tables.push_back(t);
  out.verdicts.push_back({"mckean-singer", hi - lo < 1e-8, "spread " + std::to_string(hi - lo)});
  double comm = commutator_norm(s.d, s.pair, seed);
  out.verdicts.push_back({"equivariance", comm < 1e-8 * std::max(1.0, sparse_norm(s.d.matrix, seed)),
                          "||[D, Phi]|| = " + std::to_string(comm)});
  out.summary["scenario"] = c.id;
  out.summary["supertrace_spread"] = hi - lo;
  out.summary["commutator_norm"] = comm;
  out.summary["seed"] = seed;
  return out;
}

// ---------------------------------------------------------------------------
// commutator-test

// B(t) = M_psi D Q(t) e^{-t^2 D^2}; the bump keeps B from commuting with the heat family.
inline KernelFamily localized_parametrix_family(const DiracOperator& d, std::shared_ptr<const SpectralData> data,
                                                double center) {
  auto model = d.model;
  const int f = d.fiber_dim();
  CMat psi = multiplication_operator(*model, f, [&](std::size_t m) {
    double r2 = 0.0;
    for (int a = 0; a < model->dim(); ++a) r2 += std::pow(model->centered_coord(m, a) - center, 2);
    return std::exp(-r2);
  });
  auto q = parametrix_family(d, data);
  auto e = heat_family(d, data);
  CMat dd = d.dense();
  return matrix_family(model, f, "psi D Q e", [=](double t) {
    return CMat(psi * dd * q.at(t).matrix() * e.at(t).matrix());
  });
}

inline CommandResult commutator_test(const ScenarioConfig& c, double center, double decay_tol = 1e-4) {
  CommandResult out{"commutator-test", {}, {}, {}};
  auto s = build_objects(c);
  auto data = spectral_decomposition(s.d, c.op.eig_budget);
  auto a = heat_family(s.d, data);
  auto b = localized_parametrix_family(s.d, data, center);
  std::vector<double> ts;
  for (double t2 : c.grids.t2) ts.push_back(std::sqrt(t2));
  AsymptoticTraceOptions opt;
  opt.decay_tol = decay_tol;
  opt.accumulation.cluster_tol = c.tolerances.cluster_tol;
  opt.rule = parse_selection(c.exhaustion.selection);
  auto js = s.plan.stages();
  auto rep = asymptotic_trace_test(s.pair, a, b, s.plan, ts, js, opt);
  Table t{"commutator", {"t", "j", "value"}, {}};
  Table rt{"commutator_regions", {"t", "selected", "V", "W", "X", "Y", "Y_bound"}, {}};
  double vmax = 0.0;
  for (const auto& row : rep.rows) {
    for (std::size_t i = 0; i < row.stages.size(); ++i) t.add({row.t, (long long)row.stages[i], row.stage_values[i]});
    rt.add({row.t, row.value ? Cell(*row.value) : Cell(std::string("none")), row.regions.V, row.regions.W,
            row.regions.X, row.regions.Y, row.y_bound});
    for (double v : row.stage_v) vmax = std::max(vmax, std::abs(v));
  }
  out.tables.push_back(t);
  out.tables.push_back(rt);
  out.verdicts.push_back({"decay", rep.pass,
                          "slope " + std::to_string(rep.trend_slope) +
                              (rep.rows.back().value ? ", final " + std::to_string(*rep.rows.back().value) : "")});
  // Y part within its Cauchy-Schwarz bound
  bool y_ok = true;
  for (const auto& row : rep.rows) y_ok = y_ok && std::abs(row.regions.Y) <= row.y_bound * (1.0 + 1e-9) + 1e-15;
  out.verdicts.push_back({"V-part", vmax < 1e-8, "max |V| = " + std::to_string(vmax)});
  out.verdicts.push_back({"Y-bound", y_ok, "delta " + std::to_string(rep.delta)});
  AsymptoticTraceOptions same = opt;
  same.region_split = false;
  auto zero = asymptotic_trace_test(s.pair, a, a, s.plan, ts, js, same);
  out.verdicts.push_back({"A=B", zero.identically_zero, "commutator of the heat family with itself"});
  out.summary["scenario"] = c.id;
  out.summary["trend_slope"] = rep.trend_slope;
  out.summary["delta"] = rep.delta;
  return out;
}

}  // namespace locidx
