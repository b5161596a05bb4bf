#include <gtest/gtest.h>

#include <locidx/isometry.hpp>

#include <random>

using namespace locidx;

namespace {

CVec random_section(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
  return v;
}

auto box2() { return std::make_shared<const LatticeModel>(build_box_lattice(2, {2.0}, 0.5)); }

}  // namespace

TEST(Isometry, ReflectionFixedSet) {
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(3, {1.0}, 0.5));
  auto g = make_isometry(m, reflection_matrix(3, 2), RVec::Zero(3), scalar_sign_lift(1));
  auto fix = fixed_sites(g);
  EXPECT_EQ(fix.size(), 5u);  // {0}^2 x grid
  for (auto s : fix.sites) {
    EXPECT_DOUBLE_EQ(m->coord(s, 0), 0.0);
    EXPECT_DOUBLE_EQ(m->coord(s, 1), 0.0);
  }
  EXPECT_EQ(g.fixed_dim(), 1);
}

TEST(Isometry, IdentityAndInvalid) {
  auto m = box2();
  auto id = make_isometry(m, RMat::Identity(2, 2), RVec::Zero(2), scalar_sign_lift(1));
  EXPECT_EQ(fixed_sites(id).size(), m->size());
  RVec b = RVec::Zero(2);
  b(0) = 0.25;  // half a lattice step
  EXPECT_THROW(make_isometry(m, RMat::Identity(2, 2), b, scalar_sign_lift(1)), Error);
  RMat o = RMat::Identity(2, 2);
  o(0, 1) = 0.1;
  EXPECT_THROW(make_isometry(m, o, RVec::Zero(2), scalar_sign_lift(1)), Error);
  CMat nonunitary = 2.0 * CMat::Identity(1, 1);
  EXPECT_THROW(make_isometry(m, RMat::Identity(2, 2), RVec::Zero(2), nonunitary), Error);
  // box is not translation invariant
  RVec shift = RVec::Zero(2);
  shift(0) = 0.5;
  EXPECT_THROW(make_isometry(m, RMat::Identity(2, 2), shift, scalar_sign_lift(1)), Error);
}

TEST(Isometry, ActOnSectionExamples) {
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(1, {4.0}, 1.0));
  auto g = make_isometry(m, reflection_matrix(1, 1), RVec::Zero(1), scalar_sign_lift(1));
  CVec s = CVec::Zero(9);
  s(*m->locate(std::vector{2.0})) = 1.0;
  CVec t = act_on_section(g, s);
  EXPECT_EQ(t(*m->locate(std::vector{-2.0})), cplx(1.0));
  EXPECT_NEAR(t.norm(), 1.0, 1e-15);
  auto id = make_isometry(m, RMat::Identity(1, 1), RVec::Zero(1), scalar_sign_lift(1));
  EXPECT_EQ((act_on_section(id, s) - s).norm(), 0.0);
  EXPECT_THROW(act_on_section(g, CVec::Zero(3)), Error);
}

TEST(Isometry, UnitaryOnRandomSections) {
  std::mt19937_64 rng(11);
  auto m = box2();
  auto g = make_isometry(m, reflection_matrix(2, 2), RVec::Zero(2), exterior_lift(reflection_matrix(2, 2)));
  for (int k = 0; k < 20; ++k) {
    CVec s = random_section(m->size() * 4, rng);
    EXPECT_NEAR(act_on_section(g, s).norm(), s.norm(), 1e-12 * s.norm());
  }
}

TEST(Isometry, GroupActionProperty) {
  std::mt19937_64 rng(3);
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(2, {2.0}, 0.25));
  RMat rot(2, 2);
  rot << 0, -1, 1, 0;
  RVec b(2);
  b << 0.5, 0.25;
  auto g = make_isometry(m, rot, RVec::Zero(2), exterior_lift(rot));
  auto h = make_isometry(m, reflection_matrix(2, 1), b, exterior_lift(reflection_matrix(2, 1)));
  auto gh = compose(g, h);
  for (int k = 0; k < 10; ++k) {
    CVec s = random_section(m->size() * 4, rng);
    EXPECT_LT((act_on_section(gh, s) - act_on_section(g, act_on_section(h, s))).norm(), 1e-12 * s.norm());
  }
}

TEST(Isometry, FiniteOrder) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(2, {2.0}, 0.25));
  RMat rot(2, 2);
  rot << 0, -1, 1, 0;
  auto g = make_isometry(m, rot, RVec::Zero(2), exterior_lift(rot));
  EXPECT_EQ(action_order(g), 4);
  auto r = make_isometry(m, reflection_matrix(2, 1), RVec::Zero(2), scalar_sign_lift(4, -1));
  EXPECT_EQ(action_order(r), 2);
}

TEST(Isometry, FixedSetIsZeroDisplacement) {
  auto m = std::make_shared<const LatticeModel>(build_torus_lattice(2, {3.0, 2.0}, 0.5));
  auto g = make_isometry(m, reflection_matrix(2, 1), RVec::Zero(2), scalar_sign_lift(1));
  for (std::size_t s = 0; s < m->size(); ++s) EXPECT_EQ(g.is_fixed(s), m->distance(g.apply(s), s) == 0.0);
  EXPECT_EQ(g.fixed_dim(), 1);
}

TEST(Isometry, DisplacementExamples) {
  auto m = std::make_shared<const LatticeModel>(build_box_lattice(1, {4.0}, 0.25));
  auto refl = make_isometry(m, reflection_matrix(1, 1), RVec::Zero(1), scalar_sign_lift(1));
  auto u = product_region(*m, {-1.0}, {1.0}, {true}, "U");
  EXPECT_DOUBLE_EQ(displacement_lower_bound(*m, refl, complement(*m, u)), 2.0);
  auto id = make_isometry(m, RMat::Identity(1, 1), RVec::Zero(1), scalar_sign_lift(1));
  EXPECT_DOUBLE_EQ(displacement_lower_bound(*m, id, complement(*m, u)), 0.0);
  EXPECT_TRUE(std::isinf(displacement_lower_bound(*m, refl, Region{})));
  auto t = std::make_shared<const LatticeModel>(build_torus_lattice(1, {8.0}, 0.25));
  RVec c(1);
  c << 1.0;
  auto tr = make_isometry(t, RMat::Identity(1, 1), c, scalar_sign_lift(1));
  EXPECT_DOUBLE_EQ(displacement_lower_bound(*t, tr, all_sites(*t)), 1.0);
}

TEST(Isometry, ExteriorLiftCommutesWithGrading) {
  for (int n = 1; n <= 3; ++n) {
    auto b = build_clifford(n, BundleKind::exterior);
    for (int k = 0; k <= n; ++k) {
      CMat l = exterior_lift(reflection_matrix(n, k));
      EXPECT_LT((l * b.grading - b.grading * l).cwiseAbs().maxCoeff(), 1e-14);
      EXPECT_LT((l.adjoint() * l - CMat::Identity(l.rows(), l.rows())).cwiseAbs().maxCoeff(), 1e-14);
    }
  }
}
