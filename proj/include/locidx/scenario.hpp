#pragma once
// End-to-end scenario runner producing an IndexReport.

#include "config.hpp"
#include "report.hpp"

#include <chrono>
#include <filesystem>

namespace locidx {

struct IndexReport {
  std::string id;
  ScenarioConfig config;
  double delta_m = 0.0;  // min displacement over M
  int fixed_dim = 0;
  std::size_t sites = 0;
  PlanDiagnostics plan;
  AnalyticSide analytic;
  GeometricSide geometric;
  std::optional<IntegrandOracle> oracle;
  std::optional<VanishingCheck> vanishing;
  std::optional<UmmDiagnostic> umm;
  std::optional<MassGapCheck> mass_gap;
  std::vector<Verdict> verdicts;
  double seconds = 0.0;

  bool pass() const { return all_pass(verdicts); }
};

inline Verdict expected_verdict(const std::string& side, std::optional<double> v, double expected, double rel,
                                double abs_floor) {
  Verdict out{"expected-" + side, false, {}};
  if (!v) {
    out.detail = side + " side has no value";
    return out;
  }
  double diff = std::abs(*v - expected);
  out.pass = diff <= rel * std::abs(expected) + abs_floor;
  out.detail = side + " " + std::to_string(*v) + " expected " + std::to_string(expected);
  return out;
}

inline IndexReport run_scenario(const ScenarioConfig& c, int threads = 1) {
  auto start = std::chrono::steady_clock::now();
  IndexReport rep;
  rep.id = c.id;
  rep.config = c;
  try {
    ScenarioObjects s = build_objects(c);
    const auto& tol = c.tolerances;
    rep.sites = s.model->size();
    rep.fixed_dim = s.pair.fixed_dim();
    rep.delta_m = displacement_lower_bound(*s.model, s.pair, all_sites(*s.model));
    rep.plan = validate_plan(s.plan, &s.pair);
    rep.verdicts.push_back({"plan", rep.plan.nested && rep.plan.u_invariant,
                            rep.plan.problems.empty() ? "ok" : rep.plan.problems.front()});

    auto data = spectral_decomposition(s.d, c.op.eig_budget);
    auto heat = heat_family(s.d, data);
    std::vector<double> ts;
    for (double t2 : c.grids.t2) ts.push_back(std::sqrt(t2));
    const auto js = s.plan.stages();
    AccumulationOptions acc;
    acc.cluster_tol = tol.cluster_tol;
    SelectionRule rule = parse_selection(c.exhaustion.selection);
    AnalyticOptions aopt{acc, rule, tol.min_t_over_h, tol.margin_tol, threads};
    const CMat& gam = s.bundle->grading;
    rep.analytic = analytic_side(s.plan, s.pair, heat, gam, ts, js, aopt);
    const AnalyticRow* last = rep.analytic.smallest_certified();
    rep.verdicts.push_back({"certified", last != nullptr, last ? "t=" + std::to_string(last->t) : rep.analytic.note});

    // fixed-point integrand from the small-t oracle, constant on the flat fixed set
    Region top = s.plan.u_stage(s.plan.j_max);
    auto site = central_fixed_site(s.pair, top);
    double integrand = 0.0;
    if (site && last) {
      std::vector<double> cert;
      for (const auto& r : rep.analytic.rows)
        if (r.certified) cert.push_back(r.t);
      // the truncated spectral derivative couples opposite box faces, so the slice stays
      // away from them as it stays away from the other fixed components of a torus
      double window = std::min(0.5 * distance_to_box_exterior(*s.model)[*site], 5.0 * cert.front());
      if (s.model->is_torus())
        for (int a = 0; a < s.model->dim(); ++a) window = std::min(window, 0.25 * s.model->extent(a));
      rep.oracle = ass_integrand_flat(heat, s.pair, gam, *site, cert, tol.oracle_tol, window);
      integrand = rep.oracle->value;
      rep.verdicts.push_back({"oracle", rep.oracle->converged && rep.oracle->closed_form_agrees,
                              "integrand " + std::to_string(rep.oracle->value) + " closed form " +
                                  std::to_string(rep.oracle->closed_form) +
                                  (rep.oracle->note.empty() ? "" : "; " + rep.oracle->note)});
    }
    rep.geometric = geometric_side(s.plan, s.pair, [integrand](std::size_t) { return integrand; }, js, acc, rule);

    const bool u_is_m = s.plan.U.size() == s.model->size();
    if (rep.delta_m > 0.0) {
      rep.vanishing = vanishing_check(rep.analytic, rep.delta_m, s.d.fiber_dim(), tol.decay_tol);
      const auto& v = *rep.vanishing;
      rep.verdicts.push_back({"a", v.pass,
                              "delta " + std::to_string(v.delta) + ", " + v.envelope.describe() +
                                  (v.below_tol ? "" : ", above decay_tol at smallest t")});
      rep.verdicts.push_back({"geometric-zero", rep.geometric.empty_fixed_set && rep.geometric.value &&
                                                    *rep.geometric.value == 0.0,
                              "fixed set empty"});
    } else if (u_is_m && rep.fixed_dim < s.model->dim()) {
      rep.umm = umm_diagnostic(s.plan, s.pair, rep.geometric, integrand);
      rep.verdicts.push_back({"U=M", rep.umm->pass,
                              "ratio " + std::to_string(rep.umm->rows.front().ratio) + " -> " +
                                  std::to_string(rep.umm->rows.back().ratio)});
    } else {
      rep.verdicts.push_back(agreement_verdict(rep.analytic, rep.geometric, tol));
    }
    if (c.expected) {
      rep.verdicts.push_back(expected_verdict("analytic", rep.analytic.value, *c.expected, c.expected_tol, tol.decay_tol));
      rep.verdicts.push_back(
          expected_verdict("geometric", rep.geometric.value, *c.expected, c.expected_tol, tol.decay_tol));
    }
    if (c.op.mass != 0.0) {
      rep.mass_gap = mass_gap_check(s.d, s.plan, s.pair, c.grids.t_idempotent, s.plan.j_max, tol.decay_tol);
      bool sides = rep.analytic.value && std::abs(*rep.analytic.value) < tol.decay_tol && rep.geometric.value &&
                   std::abs(*rep.geometric.value) < tol.decay_tol;
      rep.verdicts.push_back({"invertible", sides && rep.mass_gap->pass,
                              "both sides below decay_tol and ||e(t)-f|| decreasing"});
    }
  } catch (const std::exception& e) {
    throw Error("scenario '" + c.id + "': " + e.what());
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

// ---------------------------------------------------------------------------
// Output tables

inline std::vector<Table> report_tables(const IndexReport& r) {
  std::vector<Table> out;
  Table an{"analytic_stages", {"t", "t2", "certified", "margin_estimate", "j", "value"}, {}};
  Table ans{"analytic_summary", {"t", "certified", "clusters", "selected", "displaced_block_norm"}, {}};
  for (const auto& row : r.analytic.rows) {
    for (std::size_t i = 0; i < row.stage_values.size(); ++i)
      an.add({row.t, row.t * row.t, row.certified, row.margin_estimate, (long long)r.analytic.stages[i],
              row.stage_values[i]});
    ans.add({row.t, row.certified, (long long)row.points.clusters.size(),
             row.value ? Cell(*row.value) : Cell(std::string("none")), row.displaced_block_norm});
  }
  out.push_back(an);
  out.push_back(ans);
  Table ge{"geometric_stages", {"j", "vol_U_j", "fixed_volume", "fixed_integral", "value"}, {}};
  for (const auto& s : r.geometric.stages) ge.add({(long long)s.j, s.vol_u, s.fixed_volume, s.fixed_integral, s.value});
  out.push_back(ge);
  if (r.oracle) {
    Table o{"integrand_oracle", {"t", "slice_integral", "closed_form"}, {}};
    for (std::size_t i = 0; i < r.oracle->ts.size(); ++i) o.add({r.oracle->ts[i], r.oracle->values[i], r.oracle->closed_form});
    out.push_back(o);
  }
  if (r.vanishing) {
    Table v{"vanishing", {"t", "delta", "bound_value", "envelope", "pass"}, {}};
    const auto& rep = r.vanishing->norm_report;
    for (std::size_t i = 0; i < rep.samples.size(); ++i)
      v.add({rep.samples[i].t, rep.samples[i].r, rep.samples[i].value, rep.bound[i], (bool)rep.pass[i]});
    out.push_back(v);
  }
  if (r.umm) {
    Table u{"umm_ratio", {"j", "fixed_volume", "volume", "ratio", "geometric"}, {}};
    for (const auto& row : r.umm->rows) u.add({(long long)row.j, row.fixed_volume, row.volume, row.ratio, row.geometric});
    out.push_back(u);
  }
  if (r.mass_gap) {
    Table m{"mass_gap", {"t", "distance_e_f", "pairing"}, {}};
    for (const auto& row : r.mass_gap->rows) m.add({row.t, row.distance, row.pairing});
    out.push_back(m);
  }
  Table v{"verdicts", {"scenario", "clause", "pass", "detail"}, {}};
  for (const auto& x : r.verdicts) v.add({r.id, x.clause, x.pass, x.detail});
  out.push_back(v);
  return out;
}

inline nlohmann::json summary_json(const IndexReport& r) {
  nlohmann::json j;
  j["scenario"] = r.id;
  j["pass"] = r.pass();
  j["seconds"] = r.seconds;
  j["sites"] = r.sites;
  j["fixed_dim"] = r.fixed_dim;
  j["delta_m"] = std::isfinite(r.delta_m) ? nlohmann::json(r.delta_m) : nlohmann::json("inf");
  j["analytic"] = r.analytic.value ? nlohmann::json(*r.analytic.value) : nlohmann::json(nullptr);
  j["analytic_richardson"] = r.analytic.richardson ? nlohmann::json(*r.analytic.richardson) : nlohmann::json(nullptr);
  j["analytic_trend_slope"] = r.analytic.trend_slope;
  j["truncation_margin"] = std::isfinite(r.analytic.margin) ? nlohmann::json(r.analytic.margin) : nlohmann::json("inf");
  j["geometric"] = r.geometric.value ? nlohmann::json(*r.geometric.value) : nlohmann::json(nullptr);
  if (r.oracle) j["integrand"] = r.oracle->value;
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : r.verdicts) j["verdicts"].push_back({{"clause", v.clause}, {"pass", v.pass}, {"detail", v.detail}});
  j["config"] = to_json(r.config);
  return j;
}

// Writes all tables and summary.{csv,json} into dir.
inline void write_report(const std::filesystem::path& dir, const IndexReport& r, OutputFormat f) {
  for (const auto& t : report_tables(r)) write_table(dir, t, f);
  std::filesystem::create_directories(dir);
  if (f == OutputFormat::json) {
    std::ofstream(dir / "summary.json") << summary_json(r).dump(2) << '\n';
  } else {
    Table s{"summary", {"scenario", "pass", "analytic", "geometric", "seconds"}, {}};
    s.add({r.id, r.pass(), r.analytic.value ? Cell(*r.analytic.value) : Cell(std::string("none")),
           r.geometric.value ? Cell(*r.geometric.value) : Cell(std::string("none")), r.seconds});
    write_table(dir, s, f);
  }
}

// ---------------------------------------------------------------------------
// Bundled scenarios

#ifndef LOCIDX_SCENARIO_DIR
#define LOCIDX_SCENARIO_DIR "scenarios"
#endif

inline std::filesystem::path scenario_dir() {
  if (const char* env = std::getenv("LOCIDX_SCENARIOS")) return env;
  return LOCIDX_SCENARIO_DIR;
}

inline std::vector<std::filesystem::path> list_scenarios(const std::filesystem::path& dir = scenario_dir()) {
  std::vector<std::filesystem::path> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

// Accepts a path or a bundled id.
inline ScenarioConfig resolve_scenario(const std::string& name) {
  if (std::filesystem::exists(name)) return load_scenario(name);
  auto p = scenario_dir() / (name + ".json");
  if (std::filesystem::exists(p)) return load_scenario(p.string());
  throw Error("no scenario file or bundled id '" + name + "'");
}

}  // namespace locidx
