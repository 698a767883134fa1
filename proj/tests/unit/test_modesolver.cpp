#include <gtest/gtest.h>

#include <cmath>

#include "molwg/error.hpp"
#include "molwg/modesolver.hpp"
#include "support/oracles.hpp"

using namespace molwg;
using namespace molwg::modes;

namespace {

constexpr double kLambda = 785.0;

SolverOptions coarse(Family f = Family::QuasiTE) {
  SolverOptions o;
  o.dx_nm = o.dy_nm = 20.0;
  o.family = f;
  return o;
}

class ReferenceRidge : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    geometry_ = new RidgeGeometry{};
    modes_ = new std::vector<ModeField>(
        solve_modes(CrossSection::ridge(*geometry_), kLambda, 3, coarse()));
  }
  static void TearDownTestSuite() {
    delete modes_;
    delete geometry_;
  }
  static const ModeField& fundamental() { return modes_->front(); }

  static RidgeGeometry* geometry_;
  static std::vector<ModeField>* modes_;
};

RidgeGeometry* ReferenceRidge::geometry_ = nullptr;
std::vector<ModeField>* ReferenceRidge::modes_ = nullptr;

double max_abs(const ModeField& m, int c) {
  double v = 0.0;
  for (const auto& e : m.E) v = std::max(v, std::abs(e[c]));
  return v;
}

}  // namespace

TEST_F(ReferenceRidge, SingleGuidedQuasiTEMode) {
  ASSERT_EQ(modes_->size(), 1u);
  const auto& m = fundamental();
  EXPECT_GT(m.n_eff, 1.51);
  EXPECT_LT(m.n_eff, 2.0);
  EXPECT_GT(max_abs(m, 0), 100.0 * max_abs(m, 1));
  EXPECT_NEAR(energy_norm(m), 1.0, 1e-9);
  EXPECT_LT(m.boundary_ratio, 1e-3);
  EXPECT_EQ(m.family, Family::QuasiTE);
}

TEST_F(ReferenceRidge, FieldInterpolationExactAtNodesAndLinearBetween) {
  const auto& m = fundamental();
  const auto& g = m.grid;
  for (std::size_t i : {g.nx / 3, g.nx / 2, g.nx / 2 + 7}) {
    for (std::size_t j : {g.ny / 2, g.ny / 2 + 3}) {
      const auto at = field_at(m, g.x(i), g.y(j));
      EXPECT_NEAR(std::abs(at[0] - m.at(i, j)[0]), 0.0, 1e-15);
      const auto mid = field_at(m, 0.5 * (g.x(i) + g.x(i + 1)), g.y(j));
      const auto mean = 0.5 * (m.at(i, j)[0] + m.at(i + 1, j)[0]);
      EXPECT_NEAR(std::abs(mid[0] - mean), 0.0, 1e-12 * std::abs(mean) + 1e-18);
    }
  }
}

TEST_F(ReferenceRidge, FieldIsMirrorSymmetric) {
  const auto& m = fundamental();
  const auto& g = m.grid;
  ASSERT_NEAR(g.x(0), -g.x(g.nx - 1), 1e-9);
  const double peak = max_abs(m, 0);
  double worst = 0.0;
  for (std::size_t j = 0; j < g.ny; ++j)
    for (std::size_t i = 0; i < g.nx; ++i)
      worst = std::max(worst, std::abs(std::abs(m.at(i, j)[0]) - std::abs(m.at(g.nx - 1 - i, j)[0])));
  EXPECT_LT(worst / peak, 1e-6);
}

TEST_F(ReferenceRidge, FundamentalHasNoNodeInTheCore) {
  const auto& m = fundamental();
  const auto ref = field_at(m, 0.0, 0.5 * geometry_->ridge_thickness_nm)[0];
  for (double x = -240.0; x <= 240.0; x += 20.0)
    for (double y = 10.0; y <= 165.0; y += 15.0)
      EXPECT_GT((field_at(m, x, y)[0] / ref).real(), 0.0) << x << "," << y;
}

TEST_F(ReferenceRidge, EffectiveAreaGrowsAwayFromTheGuide) {
  const auto& m = fundamental();
  const double top = geometry_->ridge_thickness_nm + geometry_->film_thickness_nm;
  double prev = 0.0;
  for (double y = top + 20.0; y < top + 600.0; y += 40.0) {
    const double a = effective_area(m, 0.0, y, {1.0, 0.0, 0.0});
    EXPECT_GT(a, prev);
    prev = a;
  }
  EXPECT_TRUE(std::isinf(effective_area(m, 0.0, top - 10.0, {0.0, 1.0, 0.0})));
}

TEST_F(ReferenceRidge, GroupIndexExceedsPhaseIndex) {
  const double ng = group_index(CrossSection::ridge(*geometry_), kLambda, 1.0, coarse());
  EXPECT_GT(ng, fundamental().n_eff);
  EXPECT_LT(ng, 3.0);
}

TEST_F(ReferenceRidge, OverlapIsTheEnergyNorm) {
  EXPECT_NEAR(overlap(fundamental(), fundamental()).real(), energy_norm(fundamental()), 1e-12);
}

TEST(ModeSolver, UniformIndexHasNoGuidedModes) {
  const CrossSection cs(-1500.0, 1500.0, -1500.0, 1500.0, 1.5);
  EXPECT_TRUE(solve_modes(cs, kLambda, 2, coarse()).empty());
}

TEST(ModeSolver, RejectsNarrowMargins) {
  RidgeGeometry g;
  g.margin_side_nm = 900.0;
  EXPECT_THROW(CrossSection::ridge(g), StructuralError);
  g = {};
  g.margin_top_nm = 999.0;
  EXPECT_THROW(CrossSection::ridge(g), StructuralError);
}

TEST(ModeSolver, RejectsBadGridSteps) {
  SolverOptions o;
  o.dx_nm = 0.0;
  EXPECT_THROW(solve_modes(CrossSection::ridge({}), kLambda, 1, o), StructuralError);
}

TEST(ModeSolver, WindowSizeDoesNotMoveTheIndex) {
  RidgeGeometry small, large;
  large.margin_side_nm = 2000.0;
  large.margin_bottom_nm = 2000.0;
  large.margin_top_nm = 1500.0;
  const auto a = solve_modes(CrossSection::ridge(small), kLambda, 1, coarse());
  const auto b = solve_modes(CrossSection::ridge(large), kLambda, 1, coarse());
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_LT(std::abs(a[0].n_eff - b[0].n_eff), 1e-5);
}

TEST(ModeSolver, ScaleInvariance) {
  RidgeGeometry g, s;
  const double k = 1.5;
  s.ridge_width_nm *= k;
  s.ridge_thickness_nm *= k;
  s.film_thickness_nm *= k;
  s.margin_side_nm *= k;
  s.margin_bottom_nm *= k;
  s.margin_top_nm *= k;
  SolverOptions os = coarse();
  os.dx_nm *= k;
  os.dy_nm *= k;
  const auto a = solve_modes(CrossSection::ridge(g), kLambda, 1, coarse());
  const auto b = solve_modes(CrossSection::ridge(s), kLambda * k, 1, os);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_NEAR(a[0].n_eff, b[0].n_eff, 1e-9);
}

TEST(ModeSolver, QuasiTMIsVerticallyPolarized) {
  const auto m = solve_modes(CrossSection::ridge({}), kLambda, 1, coarse(Family::QuasiTM));
  ASSERT_EQ(m.size(), 1u);
  EXPECT_GT(max_abs(m[0], 1), 100.0 * max_abs(m[0], 0));
  EXPECT_EQ(m[0].family, Family::QuasiTM);
  EXPECT_GT(m[0].n_eff, 1.51);
}

TEST(ModeSolver, ModesOfOppositeParityAreOrthogonal) {
  RidgeGeometry g;
  g.ridge_width_nm = 1500.0;
  const auto m = solve_modes(CrossSection::ridge(g), kLambda, 4, coarse());
  ASSERT_GE(m.size(), 2u);
  auto parity = [](const ModeField& f) {
    const auto& gr = f.grid;
    double even = 0.0, odd = 0.0;
    for (std::size_t j = 0; j < gr.ny; ++j)
      for (std::size_t i = 0; i < gr.nx; ++i) {
        const auto a = f.at(i, j)[0], b = f.at(gr.nx - 1 - i, j)[0];
        even += std::norm(a - b);
        odd += std::norm(a + b);
      }
    return even < odd ? 1 : -1;
  };
  int checked = 0;
  for (std::size_t a = 0; a < m.size(); ++a)
    for (std::size_t b = a + 1; b < m.size(); ++b)
      if (parity(m[a]) != parity(m[b])) {
        EXPECT_LT(std::abs(overlap(m[a], m[b])), 1e-6);
        ++checked;
      }
  EXPECT_GT(checked, 0);
  for (std::size_t a = 1; a < m.size(); ++a) EXPECT_LT(m[a].n_eff, m[a - 1].n_eff);
}

TEST(ModeSolver, GroupIndexCenteredDifference) {
  // Exact for a quadratic dispersion.
  const double c0 = 1.9, c1 = -4e-4, c2 = 1e-7;
  auto quad = [&](double lam) { return c0 + c1 * lam + c2 * lam * lam; };
  const double exact = quad(kLambda) - kLambda * (c1 + 2.0 * c2 * kLambda);
  EXPECT_NEAR(group_index_from(quad, kLambda, 2.5), exact, 1e-12);
  // Cauchy form: truncation error is 4 b delta^2 / lambda^4.
  const double a = 1.7, b = 2.0e4;
  auto cauchy = [&](double lam) { return a + b / (lam * lam); };
  const double expect = a + 3.0 * b / (kLambda * kLambda);
  const double bound = 4.0 * b / std::pow(kLambda, 4) * 1.05;
  EXPECT_NEAR(group_index_from(cauchy, kLambda, 1.0), expect, bound);
  EXPECT_THROW(group_index_from(cauchy, kLambda, 10.0), DomainError);
  EXPECT_THROW(group_index_from(cauchy, kLambda, 0.05), DomainError);
}

TEST(ModeSolver, WideRidgeApproachesTheSlabIndex) {
  RidgeGeometry g;
  g.ridge_width_nm = 20000.0;
  g.film_thickness_nm = 0.0;
  const auto m = solve_modes(CrossSection::ridge(g), kLambda, 1, coarse());
  ASSERT_EQ(m.size(), 1u);
  const double slab = oracle::slab_te_neff(kLambda, 175.0, 1.51, 2.0, 1.0);
  EXPECT_NEAR(m[0].n_eff, slab, 5e-3);
}

TEST(ModeSolver, FieldAtRejectsOutsidePoints) {
  const auto m = solve_modes(CrossSection::ridge({}), kLambda, 1, coarse());
  ASSERT_FALSE(m.empty());
  EXPECT_THROW(field_at(m[0], 1e6, 0.0), DomainError);
}
