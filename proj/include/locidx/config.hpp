#pragma once
// Scenario configuration: JSON with blocks geometry, isometry, operator, exhaustion, grids, tolerances.

#include "index_verify.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace locidx {

using Json = nlohmann::json;

struct GeometryConfig {
  std::string kind = "box";       // box | torus
  int dim = 1;
  std::vector<double> extent{4.0};  // half widths (box) or circumferences (torus)
  double spacing = 0.05;
  std::size_t max_sites = kDefaultMaxSites;
};

struct IsometryConfig {
  std::string type = "identity";  // identity | reflection | translation | orthogonal
  int reflect_axes = 1;
  std::vector<double> shift;
  std::vector<std::vector<double>> orthogonal;
  std::string lift = "exterior";  // exterior | scalar
  int sign = 1;
};

struct OperatorConfig {
  std::string bundle = "exterior";
  std::string scheme = "spectral";
  double mass = 0.0;
  std::size_t eig_budget = kDefaultEigBudget;
};

struct ExhaustionConfig {
  std::string u = "box";  // box | all | tube
  std::vector<double> u_lo{-1.0}, u_hi{1.0};
  bool u_open = true;
  double tube_radius = 0.5;
  std::string plan = "cubes";  // cubes | dyadic | radii
  double scale = 1.0;
  int j_min = 1;
  int j_max = 8;
  std::vector<double> radii;
  std::string selection = "first";
};

struct GridConfig {
  std::vector<double> t2{0.4, 0.2, 0.1, 0.05, 0.025};
  std::vector<double> t_idempotent{1.0, 2.0, 3.0, 4.0};
};

struct ScenarioConfig {
  std::string id;
  std::string description;
  GeometryConfig geometry;
  IsometryConfig isometry;
  OperatorConfig op;
  ExhaustionConfig exhaustion;
  GridConfig grids;
  Tolerances tolerances;
  std::optional<double> expected;
  double expected_tol = 0.01;  // relative
};

namespace detail {

template <class T>
void get_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline std::vector<double> broadcast(std::vector<double> v, int n, const std::string& what) {
  if (v.size() == 1) v.assign(n, v[0]);
  if (static_cast<int>(v.size()) != n) throw Error(what + ": expected 1 or " + std::to_string(n) + " entries");
  return v;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const Json& j) {
  static const std::vector<std::string> known = {"id", "description", "geometry", "isometry", "operator",
                                                 "exhaustion", "grids", "tolerances"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw Error("scenario: unknown block '" + it.key() + "'");
  ScenarioConfig c;
  try {
    c.id = j.at("id").get<std::string>();
    detail::get_opt(j, "description", c.description);
    if (j.contains("geometry")) {
      const auto& g = j["geometry"];
      detail::get_opt(g, "kind", c.geometry.kind);
      detail::get_opt(g, "dim", c.geometry.dim);
      detail::get_opt(g, "extent", c.geometry.extent);
      detail::get_opt(g, "spacing", c.geometry.spacing);
      detail::get_opt(g, "max_sites", c.geometry.max_sites);
    }
    if (j.contains("isometry")) {
      const auto& g = j["isometry"];
      detail::get_opt(g, "type", c.isometry.type);
      detail::get_opt(g, "reflect_axes", c.isometry.reflect_axes);
      detail::get_opt(g, "shift", c.isometry.shift);
      detail::get_opt(g, "orthogonal", c.isometry.orthogonal);
      detail::get_opt(g, "lift", c.isometry.lift);
      detail::get_opt(g, "sign", c.isometry.sign);
    }
    if (j.contains("operator")) {
      const auto& g = j["operator"];
      detail::get_opt(g, "bundle", c.op.bundle);
      detail::get_opt(g, "scheme", c.op.scheme);
      detail::get_opt(g, "mass", c.op.mass);
      detail::get_opt(g, "eig_budget", c.op.eig_budget);
    }
    if (j.contains("exhaustion")) {
      const auto& g = j["exhaustion"];
      detail::get_opt(g, "u", c.exhaustion.u);
      detail::get_opt(g, "u_lo", c.exhaustion.u_lo);
      detail::get_opt(g, "u_hi", c.exhaustion.u_hi);
      detail::get_opt(g, "u_open", c.exhaustion.u_open);
      detail::get_opt(g, "tube_radius", c.exhaustion.tube_radius);
      detail::get_opt(g, "plan", c.exhaustion.plan);
      detail::get_opt(g, "scale", c.exhaustion.scale);
      detail::get_opt(g, "j_min", c.exhaustion.j_min);
      detail::get_opt(g, "j_max", c.exhaustion.j_max);
      detail::get_opt(g, "radii", c.exhaustion.radii);
      detail::get_opt(g, "selection", c.exhaustion.selection);
    }
    if (j.contains("grids")) {
      const auto& g = j["grids"];
      detail::get_opt(g, "t2", c.grids.t2);
      detail::get_opt(g, "t_idempotent", c.grids.t_idempotent);
    }
    if (j.contains("tolerances")) {
      const auto& g = j["tolerances"];
      auto& t = c.tolerances;
      detail::get_opt(g, "cluster_tol", t.cluster_tol);
      detail::get_opt(g, "agreement_tol", t.agreement_tol);
      detail::get_opt(g, "decay_tol", t.decay_tol);
      detail::get_opt(g, "oracle_tol", t.oracle_tol);
      detail::get_opt(g, "min_t_over_h", t.min_t_over_h);
      detail::get_opt(g, "margin_tol", t.margin_tol);
      if (g.contains("expected")) c.expected = g["expected"].get<double>();
      detail::get_opt(g, "expected_tol", c.expected_tol);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("scenario '" + c.id + "': " + e.what());
  }
  if (c.id.empty()) throw Error("scenario: empty id");
  if (c.geometry.dim < 1) throw Error("scenario '" + c.id + "': dim must be >= 1");
  for (double t2 : c.grids.t2)
    if (!(t2 > 0)) throw Error("scenario '" + c.id + "': t2 entries must be positive");
  return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open scenario file " + path);
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error("scenario file " + path + ": " + e.what());
  }
  return parse_scenario(j);
}

inline Json to_json(const ScenarioConfig& c) {
  Json j;
  j["id"] = c.id;
  j["description"] = c.description;
  j["geometry"] = {{"kind", c.geometry.kind},
                   {"dim", c.geometry.dim},
                   {"extent", c.geometry.extent},
                   {"spacing", c.geometry.spacing},
                   {"max_sites", c.geometry.max_sites}};
  j["isometry"] = {{"type", c.isometry.type},     {"reflect_axes", c.isometry.reflect_axes},
                   {"shift", c.isometry.shift},   {"orthogonal", c.isometry.orthogonal},
                   {"lift", c.isometry.lift},     {"sign", c.isometry.sign}};
  j["operator"] = {
      {"bundle", c.op.bundle}, {"scheme", c.op.scheme}, {"mass", c.op.mass}, {"eig_budget", c.op.eig_budget}};
  const auto& e = c.exhaustion;
  j["exhaustion"] = {{"u", e.u},           {"u_lo", e.u_lo},   {"u_hi", e.u_hi},   {"u_open", e.u_open},
                     {"tube_radius", e.tube_radius}, {"plan", e.plan}, {"scale", e.scale}, {"j_min", e.j_min},
                     {"j_max", e.j_max},   {"radii", e.radii}, {"selection", e.selection}};
  j["grids"] = {{"t2", c.grids.t2}, {"t_idempotent", c.grids.t_idempotent}};
  const auto& t = c.tolerances;
  j["tolerances"] = {{"cluster_tol", t.cluster_tol},   {"agreement_tol", t.agreement_tol},
                     {"decay_tol", t.decay_tol},       {"oracle_tol", t.oracle_tol},
                     {"min_t_over_h", t.min_t_over_h}, {"margin_tol", t.margin_tol},
                     {"expected_tol", c.expected_tol}};
  if (c.expected) j["tolerances"]["expected"] = *c.expected;
  return j;
}

// ---------------------------------------------------------------------------
// Building the objects

struct ScenarioObjects {
  std::shared_ptr<const LatticeModel> model;
  std::shared_ptr<const CliffordBundle> bundle;
  DiracOperator d;
  IsometryPair pair;
  ExhaustionPlan plan;
};

inline std::shared_ptr<const LatticeModel> build_model(const GeometryConfig& g) {
  if (g.kind == "box") return std::make_shared<const LatticeModel>(build_box_lattice(g.dim, g.extent, g.spacing, g.max_sites));
  if (g.kind == "torus")
    return std::make_shared<const LatticeModel>(build_torus_lattice(g.dim, g.extent, g.spacing, g.max_sites));
  throw Error("unknown geometry kind '" + g.kind + "'");
}

inline IsometryPair build_pair(std::shared_ptr<const LatticeModel> model, const CliffordBundle& b, const IsometryConfig& c) {
  const int n = model->dim();
  RMat o = RMat::Identity(n, n);
  RVec shift = RVec::Zero(n);
  if (c.type == "identity") {
  } else if (c.type == "reflection") {
    if (c.reflect_axes < 1 || c.reflect_axes > n) throw Error("reflect_axes out of range");
    o = reflection_matrix(n, c.reflect_axes);
  } else if (c.type == "translation") {
    auto s = detail::broadcast(c.shift, n, "isometry.shift");
    for (int a = 0; a < n; ++a) shift(a) = s[a];
  } else if (c.type == "orthogonal") {
    if (static_cast<int>(c.orthogonal.size()) != n) throw Error("isometry.orthogonal: wrong row count");
    for (int r = 0; r < n; ++r) {
      if (static_cast<int>(c.orthogonal[r].size()) != n) throw Error("isometry.orthogonal: wrong column count");
      for (int k = 0; k < n; ++k) o(r, k) = c.orthogonal[r][k];
    }
    if (!c.shift.empty()) {
      auto s = detail::broadcast(c.shift, n, "isometry.shift");
      for (int a = 0; a < n; ++a) shift(a) = s[a];
    }
  } else {
    throw Error("unknown isometry type '" + c.type + "'");
  }
  CMat lift;
  if (c.lift == "exterior") {
    if (b.kind != BundleKind::exterior) throw Error("exterior lift requires the exterior bundle");
    lift = exterior_lift(o) * double(c.sign);
  } else if (c.lift == "scalar") {
    lift = scalar_sign_lift(b.fiber_dim, c.sign);
  } else {
    throw Error("unknown lift '" + c.lift + "'");
  }
  return make_isometry(model, o, shift, lift, b.grading);
}

inline Region build_u(const LatticeModel& m, const IsometryPair& g, const ExhaustionConfig& e) {
  const int n = m.dim();
  if (e.u == "all") return all_sites(m, "U");
  if (e.u == "box")
    return product_region(m, detail::broadcast(e.u_lo, n, "u_lo"), detail::broadcast(e.u_hi, n, "u_hi"),
                          std::vector<bool>(n, e.u_open), "U");
  if (e.u == "tube") {
    Region r = tube_region(m, g, e.tube_radius);
    r.tag = "U";
    return r;
  }
  throw Error("unknown U type '" + e.u + "'");
}

inline ExhaustionPlan build_plan(std::shared_ptr<const LatticeModel> model, Region u, const ExhaustionConfig& e) {
  if (e.plan == "cubes") return make_cube_plan(model, std::move(u), e.j_max, e.scale, e.j_min);
  if (e.plan == "dyadic") return make_dyadic_plan(model, std::move(u), e.j_max, e.scale, e.j_min);
  if (e.plan == "radii") return make_radii_plan(model, std::move(u), e.radii);
  throw Error("unknown exhaustion plan '" + e.plan + "'");
}

inline ScenarioObjects build_objects(const ScenarioConfig& c) {
  ScenarioObjects s;
  s.model = build_model(c.geometry);
  s.bundle = std::make_shared<const CliffordBundle>(build_clifford(c.geometry.dim, parse_bundle_kind(c.op.bundle)));
  s.d = assemble_dirac(s.model, s.bundle, parse_scheme(c.op.scheme), c.op.mass);
  s.pair = build_pair(s.model, *s.bundle, c.isometry);
  s.plan = build_plan(s.model, build_u(*s.model, s.pair, c.exhaustion), c.exhaustion);
  return s;
}

}  // namespace locidx
