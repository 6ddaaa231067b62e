#include "test_util.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace pencillab;
using pltest::germ;
using pltest::pt;

TEST(Stereographic, AntipodeAndEquator) {
  RealVector pole = RealVector::Unit(4, 3);
  EXPECT_LT(stereographic(-pole, pole).norm(), 1e-15);
  // the equator is fixed up to the choice of basis: its image is the unit sphere
  std::mt19937_64 rng(61);
  for (int k = 0; k < 50; ++k) {
    RealVector x = random_unit_vector(rng, 4);
    x[3] = 0.0;
    EXPECT_NEAR(stereographic(2.0 * x, pole).norm(), 1.0, 1e-14);
  }
}

TEST(Stereographic, PoleChoice) {
  const MixedGerm g = germ("z1^2 + z2^3", 2);
  // f(r, 0) = r^2 is real, so e1 lies on X_0 but not on X_{pi/2}
  const PoleChoice on = choose_pole(g, 0.0, 0.5, RealVector::Unit(4, 0));
  EXPECT_TRUE(on.perturbed);
  EXPECT_GT(std::abs(h_theta(g, 0.0, 0.5 * on.pole)), 1e-9 * g.scale(0.5));
  EXPECT_NEAR(on.pole.norm(), 1.0, 1e-15);
  const PoleChoice off = choose_pole(g, 1.0, 0.5, RealVector::Unit(4, 0));
  EXPECT_FALSE(off.perturbed);
}

TEST(Csv, PointsAndTrace) {
  const MixedGerm g = germ("z1", 2);
  std::ostringstream pts;
  write_points_csv(pts, g, {pt({{3.0, 4.0}, 0.0})});
  EXPECT_EQ(pts.str(),
            "re_z1,im_z1,re_z2,im_z2,theta,norm,modulus\n3,4,0,0," + detail::format_double(std::atan2(4.0, 3.0)) +
                ",5,5\n");
  const FlowTrace tr = integrate(g, FlowKind::Monodromy, pt({1.0, 0.5}), 0.0, 1.0);
  std::ostringstream csv;
  write_trace_csv(csv, tr);
  std::size_t lines = 0;
  for (char c : csv.str()) lines += c == '\n';
  EXPECT_EQ(lines, tr.samples.size() + 1);
  EXPECT_EQ(csv.str().rfind("t,re_z1,im_z1,re_z2,im_z2,norm,modulus,theta\n", 0), 0U);
}
