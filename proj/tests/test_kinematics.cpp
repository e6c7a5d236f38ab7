#include "reachprecise/errors.hpp"
#include "reachprecise/kinematics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace kin = rp::kinematics;
using kin::Mat3;
using kin::Vec3;
using kin::Vec6;

using rp::testing::PoeArm;

namespace {

kin::JointConfig random_config(kin::Rng& rng, const kin::ArmGeometry& g) {
  return kin::sample_config(g, rng);
}

}  // namespace

TEST(Kinematics, DhChainMatchesProductOfExponentials) {
  const auto g = kin::ArmGeometry::ur3();
  const PoeArm poe(g);
  kin::Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    // Sample beyond the configured ranges too; the oracle has no limits.
    Vec6 q;
    std::uniform_real_distribution<double> u(-M_PI, M_PI);
    for (int j = 0; j < 6; ++j) q[j] = u(rng);
    const auto pose = kin::forward_kinematics_unchecked(q, g);
    const Eigen::Matrix4d ref = poe.fk(q);
    worst = std::max(worst, (pose.position - ref.block<3, 1>(0, 3)).norm());
    EXPECT_LT((pose.orientation - ref.block<3, 3>(0, 0)).cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Kinematics, OrientationIsOrthonormal) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const auto pose = kin::forward_kinematics(random_config(rng, g), g);
    const Mat3 e = pose.orientation.transpose() * pose.orientation - Mat3::Identity();
    EXPECT_LT(e.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_NEAR(pose.orientation.determinant(), 1.0, 1e-9);
  }
}

TEST(Kinematics, OutOfRangeConfigurationNamesTheJoint) {
  const auto g = kin::ArmGeometry::ur3();
  kin::JointConfig q = g.reference_config;
  q.angles[3] = kin::deg_to_rad(10.0);
  try {
    kin::forward_kinematics(q, g);
    FAIL() << "expected DomainError";
  } catch (const rp::DomainError& e) {
    EXPECT_EQ(e.joint(), 3);
  }
}

TEST(Kinematics, QuantizeIsIdempotentWithHalfStepError) {
  const auto res = kin::JointResolution::from_degrees(0.01);
  kin::Rng rng(5);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  for (int i = 0; i < 5000; ++i) {
    const double x = u(rng);
    const double qx = kin::quantize(x, res);
    EXPECT_EQ(kin::quantize(qx, res), qx);
    EXPECT_LE(std::abs(qx - x), res.alpha / 2 + 1e-15);
    const double steps = qx / res.alpha;
    EXPECT_NEAR(steps, std::round(steps), 1e-9);
  }
}

TEST(Kinematics, QuantizeTiesAwayFromZero) {
  const kin::JointResolution res{1.0};
  EXPECT_EQ(kin::quantize(0.5, res), 1.0);
  EXPECT_EQ(kin::quantize(-0.5, res), -1.0);
  EXPECT_EQ(kin::quantize(0.49, res), 0.0);
}

TEST(Kinematics, ResolutionMustBePositive) {
  EXPECT_THROW(kin::JointResolution::from_degrees(0.0), rp::InvalidArgument);
  EXPECT_THROW(kin::JointResolution::from_degrees(-1.0), rp::InvalidArgument);
}

TEST(Kinematics, FeasibleQuantizedStaysInRange) {
  const auto g = kin::ArmGeometry::ur3();
  const auto res = kin::JointResolution::from_degrees(1.0);
  kin::Rng rng(8);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 2000; ++i) {
    const auto q = random_config(rng, g);
    kin::JointDelta dq;
    for (int j = 0; j < 6; ++j) dq.deltas[j] = u(rng);
    const auto f = kin::feasible_quantized(q, dq, res, g);
    EXPECT_TRUE(kin::is_quantized(f, res));
    EXPECT_TRUE(g.in_range(kin::apply(q, f)));
  }
}

TEST(Kinematics, ZeroMotionLeavesTargetUnchanged) {
  const auto g = kin::ArmGeometry::ur3();
  const kin::RelativePosition t{Vec3(0.01, -0.02, 0.03)};
  const auto r = kin::residual_after(g.reference_config, kin::JointDelta{}, t, g);
  EXPECT_LT((r.residual.p - t.p).norm(), 1e-15);
}

TEST(Kinematics, DisplacementAndResidualAreConsistent) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(21);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_config(rng, g);
    const auto dq = kin::sample_delta(q, g.delta_bound, g, rng);
    const auto disp = kin::displacement_in_tool_frame(q, dq, g);
    EXPECT_LT(kin::residual_after(q, dq, disp, g).residual.norm(), 1e-9);
  }
}

TEST(Kinematics, ResidualNormIsBaseFrameDistance) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(22);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  for (int i = 0; i < 500; ++i) {
    const auto q = random_config(rng, g);
    const auto dq = kin::sample_delta(q, g.delta_bound, g, rng);
    const kin::RelativePosition t{Vec3(u(rng), u(rng), u(rng))};
    const auto pre = kin::forward_kinematics(q, g);
    const Vec3 target = pre.position + pre.orientation * t.p;
    const auto post = kin::forward_kinematics(kin::apply(q, dq), g);
    const auto r = kin::residual_after(q, dq, t, g);
    EXPECT_NEAR(r.residual.norm(), (target - post.position).norm(), 1e-12);
    // The residual is the target in the post-motion tool frame.
    EXPECT_LT((post.position + post.orientation * r.residual.p - target).norm(), 1e-12);
  }
}

TEST(Kinematics, MinimumDisplacementTable) {
  const auto g = kin::ArmGeometry::ur3();
  EXPECT_NEAR(g.tool_lever_arm(), 0.16676, 1e-12);
  const struct {
    double deg;
    double expected_mm;
  } rows[] = {{1.0, 2.91}, {0.1, 0.29}, {0.01, 0.03}};
  for (const auto& row : rows) {
    const auto res = kin::JointResolution::from_degrees(row.deg);
    const auto md = kin::min_end_displacement(g.reference_config, res, g);
    // Reported to two decimals.
    EXPECT_NEAR(md.small_angle_estimate * 1e3, row.expected_mm, 0.005) << row.deg;
    EXPECT_NEAR(md.exact * 1e3, row.expected_mm, 0.005) << row.deg;
  }
}

TEST(Kinematics, SmallAngleEstimateMatchesExactBelowOneDegree) {
  const auto g = kin::ArmGeometry::ur3();
  for (double deg : {1.0, 0.5, 0.1, 0.01}) {
    const auto md = kin::min_end_displacement(g.reference_config,
                                              kin::JointResolution::from_degrees(deg), g);
    EXPECT_LT(std::abs(md.exact - md.small_angle_estimate) / md.exact, 0.01) << deg;
  }
}

TEST(Kinematics, SmallAngleEstimateIsLinear) {
  const auto g = kin::ArmGeometry::ur3();
  const double a = kin::min_displacement_threshold(kin::JointResolution{0.002}, g);
  const double b = kin::min_displacement_threshold(kin::JointResolution{0.001}, g);
  EXPECT_DOUBLE_EQ(a, 2 * b);
}

TEST(Kinematics, MaxRelativeDistance) {
  const auto g = kin::ArmGeometry::ur3();
  EXPECT_EQ(kin::max_relative_distance(0.0, g, 100, 1), 0.0);
  double prev = 0.0;
  for (double deg : {1.0, 5.0, 10.0}) {
    const double d = kin::max_relative_distance(kin::deg_to_rad(deg), g, 20000, 4);
    EXPECT_GE(d, prev);
    prev = d;
  }
  EXPECT_THROW(kin::max_relative_distance(0.1, g, 0, 1), rp::InvalidArgument);
}

TEST(Kinematics, SampleDeltaRespectsBoundAndRanges) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(9);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_config(rng, g);
    const auto dq = kin::sample_delta(q, g.delta_bound, g, rng);
    EXPECT_LE(dq.deltas.cwiseAbs().maxCoeff(), g.delta_bound);
    EXPECT_TRUE(g.in_range(kin::apply(q, dq)));
  }
}
