#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace pencillab;
using pltest::germ;
using pltest::pt;

namespace {
const Complex I(0.0, 1.0);
constexpr double kPi = std::numbers::pi;
}  // namespace

TEST(Pencil, HThetaExamples) {
  const MixedGerm g = germ("z1", 2);
  const RealVector x = pt({{3.0, 4.0}, 0.5});
  EXPECT_NEAR(h_theta(g, 0.0, x), 4.0, 1e-15);
  EXPECT_NEAR(h_theta(g, kPi / 2, x), -3.0, 1e-15);
}

TEST(Pencil, HThetaVanishesAtOwnAngle) {
  std::mt19937_64 rng(21);
  const MixedGerm g = germ("z1^2*conj(z2) + z2^2*conj(z1) + 0.3i*z1^3", 2);
  for (int k = 0; k < 200; ++k) {
    const RealVector x = pltest::random_point(rng, 4, 1.0);
    const Complex v = g.value(x);
    EXPECT_LE(std::abs(h_theta(g, std::arg(v), x)), 1e-14 * std::abs(v));
    EXPECT_GT(pencil_side(g, std::arg(v), x), 0.0);
  }
}

TEST(Pencil, Classify) {
  const MixedGerm b = germ("z1^2 + z2^3", 2);
  EXPECT_TRUE(classify(b, pt({0.001, -0.01})).is_axis());
  const MixedGerm g = germ("z1", 2);
  const auto up = classify(g, pt({I, 0.0}));
  ASSERT_FALSE(up.is_axis());
  EXPECT_NEAR(up.theta, kPi / 2, 1e-15);
  EXPECT_EQ(up.modulus, 1.0);
  const auto left = classify(g, pt({-2.0, 0.0}));
  ASSERT_FALSE(left.is_axis());
  EXPECT_NEAR(left.theta, kPi, 1e-15);
  EXPECT_EQ(left.modulus, 2.0);
}

TEST(Pencil, PhaseAndProjectivePhase) {
  const MixedGerm g = germ("z1", 2);
  EXPECT_EQ(phase(g, pt({2.0 * I, 5.0})), I);
  EXPECT_EQ(phase(g, pt({-2.0 * I, 5.0})), -I);
  EXPECT_EQ(projective_phase(g, pt({2.0 * I, 5.0})), (ProjectivePair{0.0, 1.0}));
  EXPECT_EQ(projective_phase(g, pt({-2.0 * I, 5.0})), (ProjectivePair{0.0, 1.0}));
  EXPECT_EQ(phase(germ("z1^2 + z2^3", 2), pt({1.0, 1.0})), Complex(1.0));
  EXPECT_THROW((void)phase(germ("z1^2 + z2^3", 2), pt({0.0, 0.0})), Error);
}

TEST(Pencil, Spherefication) {
  const MixedGerm g = germ("z1", 2);
  for (double alpha : {0.0, 0.4, 2.0, -2.9}) {
    const Complex z = std::polar(0.7, alpha);
    const Complex s = spherefication(g, pt({z, 0.0}));
    EXPECT_NEAR(s.real(), z.real(), 1e-15);
    EXPECT_NEAR(s.imag(), z.imag(), 1e-15);
  }
  const Complex s = spherefication(germ("z1^2 + z2^3", 2), pt({1.0, 1.0}));
  EXPECT_NEAR(s.real(), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(s.imag(), 0.0);
}

TEST(Pencil, BlowupResidual) {
  const MixedGerm g = germ("z1", 1);
  const RealVector x = pt({{3.0, 4.0}});
  EXPECT_NEAR(blowup_residual(g, x, ProjectivePair::normalized(3.0, 4.0)), 0.0, 1e-15);
  EXPECT_EQ(blowup_residual(g, x, ProjectivePair{1.0, 0.0}), -4.0);
  const MixedGerm b = germ("z1^2 + z2^3", 2);
  for (double t1 : {0.0, 0.3, 1.0})
    EXPECT_EQ(blowup_residual(b, pt({0.0, 0.0}), ProjectivePair::normalized(t1, 1.0)), 0.0);
  EXPECT_NEAR(blowup_residual(g, blowup_lift(g, x)), 0.0, 1e-15);
}

TEST(Pencil, SampleFiberLinearClosedForm) {
  const MixedGerm g = germ("z1", 2);
  const FiberSample s = sample_fiber(g, 0.0, 1.0, 200, 3);
  ASSERT_GE(s.points.size(), 100U);
  for (const RealVector& x : s.points) {
    EXPECT_NEAR(x.norm(), 1.0, 1e-12);
    EXPECT_LT(std::abs(x[1]), 1e-10);  // z1 real
    EXPECT_GT(x[0], 0.0);
    EXPECT_LE(x[0], 1.0 + 1e-12);
  }
}

TEST(Pencil, SampleFiberBrieskorn) {
  const MixedGerm g = germ("z1^2 + z2^3", 2);
  const FiberSample s = sample_fiber(g, 0.0, 0.5, 500, 1);
  EXPECT_EQ(s.requested, 500U);
  EXPECT_GE(s.points.size(), 250U);
  EXPECT_EQ(s.points.size() + s.dropped, 500U);
  for (const RealVector& x : s.points) {
    EXPECT_LT(std::abs(h_theta(g, 0.0, x)), 1e-10 * g.scale(0.5));
    EXPECT_GT(pencil_side(g, 0.0, x), 0.0);
    EXPECT_NEAR(x.norm(), 0.5, 1e-12 * 0.5);
  }
}

TEST(Pencil, SampleFiberEmpty) {
  EXPECT_TRUE(sample_fiber(germ("z1^2 + z2^3", 2), 0.0, 0.5, 0, 1).points.empty());
}

TEST(Pencil, AxisAccumulationLinear) {
  const MixedGerm g = germ("z1", 2);
  std::vector<double> thetas;
  for (int k = 0; k < 8; ++k) thetas.push_back(2.0 * kPi * k / 8);
  double previous = std::numeric_limits<double>::infinity();
  for (double s : {1e-1, 1e-2, 1e-3}) {
    const auto r = axis_accumulation_probe(g, pt({0.0, 1.0}), thetas, 0.5, s);
    double worst = 0.0;
    for (const auto& e : r) {
      ASSERT_TRUE(e.found);
      worst = std::max(worst, e.distance);
      EXPECT_NEAR(std::arg(g.value(e.point)), wrap_signed(e.theta), 1e-9);
    }
    EXPECT_NEAR(worst, s, 1e-9);
    EXPECT_LT(worst, previous);
    previous = worst;
  }
}

TEST(Pencil, AxisAccumulationBrieskorn) {
  const double t = 0.3;
  std::vector<double> thetas;
  for (int k = 0; k < 16; ++k) thetas.push_back(2.0 * kPi * k / 16);
  const auto r = axis_accumulation_probe(germ("z1^2 + z2^3", 2), pt({t * t * t, -t * t}), thetas, 0.05);
  ASSERT_EQ(r.size(), 16U);
  for (const auto& e : r) {
    EXPECT_TRUE(e.found) << e.theta;
    EXPECT_LT(e.distance, 0.05);
  }
}

TEST(Pencil, AxisAccumulationNeedsAxisPoint) {
  EXPECT_THROW((void)axis_accumulation_probe(germ("z1", 2), pt({1.0, 1.0}), {0.0}, 0.05), Error);
}
