#include <gtest/gtest.h>

#include <locidx/index_verify.hpp>

using namespace locidx;

namespace {

std::shared_ptr<const CliffordBundle> ext(int n) {
  return std::make_shared<const CliffordBundle>(build_clifford(n, BundleKind::exterior));
}

IsometryPair reflection(std::shared_ptr<const LatticeModel> m, int k, const CliffordBundle& b) {
  RMat o = reflection_matrix(m->dim(), k);
  return make_isometry(m, o, RVec::Zero(m->dim()), exterior_lift(o), b.grading);
}

}  // namespace

TEST(GeometricSide, NoFixedPointsGivesZero) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(1, {4.0}, 0.25));
  RVec c(1);
  c << 0.5;
  auto g = make_isometry(m, RMat::Identity(1, 1), c, scalar_sign_lift(2));
  auto plan = make_cube_plan(m, all_sites(*m, "U"), 8, 0.25);
  auto geo = geometric_side(plan, g, [](std::size_t) { return 3.0; }, plan.stages());
  EXPECT_TRUE(geo.empty_fixed_set);
  for (const auto& s : geo.stages) EXPECT_EQ(s.value, 0.0);
  ASSERT_TRUE(geo.value);
  EXPECT_EQ(*geo.value, 0.0);
}

TEST(GeometricSide, ReflectionVolumeRatio) {
  const double h = 0.1, c = 1.7;
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(2, {4.0}, h));
  auto b = ext(2);
  auto plan = make_cube_plan(m, all_sites(*m, "U"), 8, 0.5);
  for (int k : {1, 2}) {
    auto g = reflection(m, k, *b);
    for (int j : {2, 5, 8}) {
      auto s = geometric_stage(plan, g, [c](std::size_t) { return c; }, j);
      // lattice: (2K+1)^{2-k} fixed sites of weight h^{2-k} over (2K+1)^2 sites of weight h^2
      const double w = 0.5 * j;
      const int sites = 2 * static_cast<int>(std::floor(w / h + 1e-9)) + 1;
      EXPECT_NEAR(s.value, c * std::pow(sites, 2 - k) * std::pow(h, 2 - k) / (std::pow(sites * h, 2)), 1e-12);
      // continuum closed form c (2w)^{-k}, lattice offset of order h/w
      double closed = c * std::pow(2.0 * w, -k);
      EXPECT_NEAR(s.value / closed, 1.0, 2.0 * k * h / w);
    }
  }
}

TEST(GeometricSide, IdentityOnTorusReturnsConstant) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(2, {3.0}, 0.25));
  auto g = make_isometry(m, RMat::Identity(2, 2), RVec::Zero(2), scalar_sign_lift(1));
  auto plan = make_cube_plan(m, all_sites(*m, "U"), 8, 0.25);
  auto geo = geometric_side(plan, g, [](std::size_t) { return 0.75; }, plan.stages());
  for (const auto& s : geo.stages) EXPECT_NEAR(s.value, 0.75, 1e-14);
}

TEST(Integrand, ClosedForms) {
  auto m1 = std::make_shared<const LatticeModel>(build_torus_lattice(1, {2.0}, 0.25));
  auto m2 = std::make_shared<const LatticeModel>(build_torus_lattice(2, {2.0}, 0.25));
  auto b1 = ext(1), b2 = ext(2);
  EXPECT_NEAR(lefschetz_closed_form(reflection(m1, 1, *b1), b1->grading), 1.0, 1e-14);
  EXPECT_NEAR(lefschetz_closed_form(reflection(m2, 2, *b2), b2->grading), 1.0, 1e-14);
  EXPECT_NEAR(lefschetz_closed_form(reflection(m2, 1, *b2), b2->grading), 0.0, 1e-14);
  auto id = make_isometry(m2, RMat::Identity(2, 2), RVec::Zero(2), scalar_sign_lift(4), b2->grading);
  EXPECT_NEAR(lefschetz_closed_form(id, b2->grading), 0.0, 1e-14);  // flat Euler form
  auto sp = build_clifford(1, BundleKind::spinor);
  auto ids = make_isometry(m1, RMat::Identity(1, 1), RVec::Zero(1), scalar_sign_lift(sp.fiber_dim), sp.grading);
  EXPECT_NEAR(lefschetz_closed_form(ids, sp.grading), 0.0, 1e-14);
}

TEST(Integrand, ReflectionOracleLine) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(1, {4.05}, 0.05));
  auto b = ext(1);
  auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
  auto g = reflection(m, 1, *b);
  auto o = ass_integrand_flat(heat_family(d), g, b->grading, 0, {std::sqrt(0.1), std::sqrt(0.05), 0.2}, 1e-3,
                              0.25 * 4.05);
  EXPECT_TRUE(o.converged);
  EXPECT_NEAR(o.value, 1.0, 1e-6);
  EXPECT_TRUE(o.closed_form_agrees);
  EXPECT_THROW(ass_integrand_flat(heat_family(d), g, b->grading, 3, {0.3}), Error);  // not fixed
}

TEST(Integrand, IsolatedFixedPointInPlane) {
  // phi = -I on a plane torus; other fixed components stay outside the window
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(2, {5.25}, 0.35));
  auto b = ext(2);
  auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
  auto g = reflection(m, 2, *b);
  auto heat = heat_family(d);
  auto o = ass_integrand_flat(heat, g, b->grading, 0, {0.45, 0.4}, 1e-3, 0.25 * 5.25);
  EXPECT_NEAR(o.value, 1.0, 1e-3);
  EXPECT_NEAR(o.closed_form, 1.0, 1e-14);
  EXPECT_TRUE(o.converged);
  // one reflected axis: fixed line, zero integrand
  auto g1 = reflection(m, 1, *b);
  auto o1 = ass_integrand_flat(heat, g1, b->grading, 0, {0.45, 0.4}, 1e-3, 0.25 * 5.25);
  EXPECT_NEAR(o1.value, 0.0, 1e-12);
}

TEST(Integrand, BoxSpectralSliceExcessScalesWithSpacing) {
  // the truncated spectral derivative on a box leaves an excess of order h w / t in the slice integral
  std::vector<double> excess;
  for (double h : {0.02, 0.01}) {
    auto m = std::make_shared<const LatticeModel>(build_box_lattice(1, {2.0}, h));
    auto b = ext(1);
    auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
    auto g = reflection(m, 1, *b);
    double x0[1] = {0.0};
    auto k = heat_family(d).at(std::sqrt(0.025));
    excess.push_back(normal_slice_integral(g, k, *m->locate(x0), &b->grading, 1.0) - 1.0);
  }
  EXPECT_GT(excess[0], 0.0);
  EXPECT_NEAR(excess[0] / excess[1], 2.0, 0.2);
}

TEST(AnalyticSide, ConsistentWithLocalizedTrace) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(1, {4.05}, 0.05));
  auto b = ext(1);
  auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
  auto g = reflection(m, 1, *b);
  auto plan = make_cube_plan(m, product_region(*m, {-1.0}, {1.0}, {true}, "U"), 8, 0.25);
  auto heat = heat_family(d);
  std::vector<double> ts = {std::sqrt(0.1), std::sqrt(0.05), std::sqrt(0.025)};
  AnalyticOptions opt;
  opt.threads = 3;
  auto a = analytic_side(plan, g, heat, b->grading, ts, plan.stages(), opt);
  ASSERT_EQ(a.rows.size(), 3u);
  for (const auto& r : a.rows) {
    auto k = heat.at(r.t);
    for (std::size_t i = 0; i < a.stages.size(); ++i)
      EXPECT_NEAR(r.stage_values[i], tr_u_phi(plan, g, k, a.stages[i], &b->grading), 1e-12);
  }
  EXPECT_TRUE(a.rows[0].certified && a.rows[1].certified);
  EXPECT_FALSE(a.rows[2].certified);  // t < 4h
  ASSERT_TRUE(a.value);
  EXPECT_EQ(*a.value, *a.rows[1].value);
  EXPECT_NEAR(*a.value, 1.0 / plan.U.volume(*m), 1e-4);
  ASSERT_TRUE(a.richardson);
}

TEST(AnalyticSide, RefusesToCertifyNearBoxEdge) {
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(1, {1.5}, 0.05));
  auto b = ext(1);
  auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
  auto g = reflection(m, 1, *b);
  auto plan = make_cube_plan(m, product_region(*m, {-1.0}, {1.0}, {true}, "U"), 8, 0.25);
  auto a = analytic_side(plan, g, heat_family(d), b->grading, {0.6, 0.4}, plan.stages());
  EXPECT_NEAR(a.margin, 0.6, 1e-9);
  EXPECT_EQ(a.smallest_certified(), nullptr);
  EXPECT_FALSE(a.value);
  EXPECT_FALSE(a.note.empty());
}

TEST(Vanishing, TranslationEnvelope) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(1, {6.05}, 0.05));
  auto b = ext(1);
  auto d = assemble_dirac(m, b, DifferenceScheme::spectral);
  RVec c(1);
  c << 1.0;
  auto g = make_isometry(m, RMat::Identity(1, 1), c, scalar_sign_lift(2), b->grading);
  auto plan = make_cube_plan(m, all_sites(*m, "U"), 8, 0.4);
  auto a = analytic_side(plan, g, heat_family(d), b->grading, default_t_grid(), plan.stages());
  auto v = vanishing_check(a, 1.0, 2, 1e-6);
  EXPECT_TRUE(v.norm_report.all_pass);
  EXPECT_TRUE(v.values_dominated);
  EXPECT_TRUE(v.below_tol);
  EXPECT_TRUE(v.pass);
  EXPECT_GT(v.envelope.a, 0.0);
  // the displaced block norms decrease as t shrinks
  for (std::size_t i = 1; i < v.samples.size(); ++i) EXPECT_LT(v.samples[i].value, v.samples[i - 1].value);
  // a value above decay_tol fails the clause
  auto bad = a;
  for (auto& r : bad.rows) r.value = 1e-3;
  EXPECT_FALSE(vanishing_check(bad, 1.0, 2, 1e-6).pass);
}

TEST(Umm, RatioMechanism) {
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(1, {4.0}, 0.05));
  auto b = ext(1);
  auto g = reflection(m, 1, *b);
  auto plan = make_dyadic_plan(m, all_sites(*m, "U"), 2, 0.5, 0);
  auto geo = geometric_side(plan, g, [](std::size_t) { return 1.0; }, plan.stages());
  auto d = umm_diagnostic(plan, g, geo, 1.0);
  EXPECT_TRUE(d.bounded);
  EXPECT_TRUE(d.ratio_decreasing);
  EXPECT_TRUE(d.pass);
  EXPECT_LT(d.rows.back().ratio, 0.2);
  auto d_small = umm_diagnostic(plan, g, geo, 0.5);  // constant too small
  EXPECT_FALSE(d_small.bounded);
}

TEST(MassGap, IdempotentConverges) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(1, {4.05}, 0.05));
  auto b = ext(1);
  auto g = make_isometry(m, RMat::Identity(1, 1), RVec::Zero(1), scalar_sign_lift(2), b->grading);
  auto plan = make_cube_plan(m, product_region(*m, {-1.0}, {1.0}, {true}, "U"), 8, 0.25);
  auto massive = assemble_dirac(m, b, DifferenceScheme::spectral, 1.0);
  auto c = mass_gap_check(massive, plan, g, {1.0, 2.0, 3.0}, 8, 1e-6);
  EXPECT_TRUE(c.pass);
  EXPECT_LT(c.rows.back().distance, 2.0 * std::exp(-0.5 * 9.0));  // e^{-t^2 m^2 / 2}
  auto massless = assemble_dirac(m, b, DifferenceScheme::spectral);
  auto z = mass_gap_check(massless, plan, g, {1.0, 2.0, 3.0}, 8, 1e-6);
  for (const auto& r : z.rows) EXPECT_NEAR(r.distance, 1.0, 1e-8);  // zero modes do not decay
}

TEST(Verdicts, Agreement) {
  AnalyticSide a;
  AnalyticRow r;
  r.t = 0.2;
  r.certified = true;
  r.points.clusters.push_back({0.5, {1, 2, 3}});
  r.value = 0.5;
  a.rows.push_back(r);
  a.value = 0.5;
  GeometricSide g;
  g.points.clusters.push_back({0.503, {1, 2}});
  g.value = 0.503;
  Tolerances tol;
  EXPECT_TRUE(agreement_verdict(a, g, tol).pass);
  g.value = 0.52;
  EXPECT_FALSE(agreement_verdict(a, g, tol).pass);
  g.points.clusters.push_back({0.1, {4, 5}});
  g.value = 0.503;
  EXPECT_FALSE(agreement_verdict(a, g, tol).pass);  // two accumulation points
  a.rows[0].certified = false;
  EXPECT_FALSE(agreement_verdict(a, g, tol).pass);
  EXPECT_FALSE(all_pass({}));
}

TEST(Parallel, ForCoversRangeAndPropagates) {
  std::vector<int> hit(1000, 0);
  parallel_for(hit.size(), 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) EXPECT_EQ(h, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw Error("boom");
               }),
               Error);
  int count = 0;
  parallel_for(0, 4, [&](std::size_t) { ++count; });
  EXPECT_EQ(count, 0);
}
