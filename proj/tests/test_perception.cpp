#include "reachprecise/errors.hpp"
#include "reachprecise/perception.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace kin = rp::kinematics;
namespace per = rp::perception;
using kin::Vec3;

namespace {

per::StereoRig exact_rig() {
  auto rig = per::StereoRig::default_rig();
  rig.pixel_quantization = false;
  return rig;
}

// Random point that both cameras see.
Vec3 visible_point(kin::Rng& rng, const per::StereoRig& rig, double zmin = 0.1, double zmax = 1.0) {
  std::uniform_real_distribution<double> uz(zmin, zmax), uu(0.1, 0.9);
  const auto& in = rig.intrinsics;
  for (;;) {
    const double z = uz(rng);
    const double u = uu(rng) * in.width;
    const double v = uu(rng) * in.height;
    const Vec3 p((u - in.cx) * z / in.fx, (v - in.cy) * z / in.fy, z);
    const double ur = in.fx * (p.x() - rig.baseline) / z + in.cx;
    if (ur >= 1.0) return p;
  }
}

// Worst recovered-position error when each measured pixel coordinate may sit
// anywhere within half a pixel of its true value: the recovery is smooth on
// that small box, so the corners bound it up to second-order terms.
double corner_bound(const Vec3& p, const per::StereoRig& rig) {
  const auto& in = rig.intrinsics;
  const double ul = in.fx * p.x() / p.z() + in.cx;
  const double vl = in.fy * p.y() / p.z() + in.cy;
  const double ur = in.fx * (p.x() - rig.baseline) / p.z() + in.cx;
  double worst = 0.0;
  for (int c = 0; c < 8; ++c) {
    const double a = ul + ((c & 1) ? 0.5 : -0.5);
    const double b = vl + ((c & 2) ? 0.5 : -0.5);
    const double d = ur + ((c & 4) ? 0.5 : -0.5);
    const double z = in.fx * rig.baseline / (a - d);
    const Vec3 q((a - in.cx) * z / in.fx, (b - in.cy) * z / in.fy, z);
    worst = std::max(worst, (q - p).norm());
  }
  return worst;
}

}  // namespace

TEST(Perception, OpticalAxisPoint) {
  const auto rig = exact_rig();
  const double z = 0.5;
  const auto px = per::project(Vec3(0, 0, z), rig);
  EXPECT_DOUBLE_EQ(px.u_l, rig.intrinsics.cx);
  EXPECT_DOUBLE_EQ(px.v_l, rig.intrinsics.cy);
  EXPECT_NEAR(px.disparity(), rig.intrinsics.fx * rig.baseline / z, 1e-12);
}

TEST(Perception, TriangulateInvertsDisparity) {
  const auto in = per::CameraIntrinsics{};
  const double b = 0.063;
  const double z = 0.37;
  const double d = in.fx * b / z;
  EXPECT_NEAR(per::triangulate(in.cx + d, in.cy, in.cx, in, b).z(), z, 1e-15);
  const double z1 = per::triangulate(in.cx + 40, in.cy, in.cx, in, b).z();
  const double z2 = per::triangulate(in.cx + 80, in.cy, in.cx, in, b).z();
  EXPECT_DOUBLE_EQ(z2, z1 / 2);
}

TEST(Perception, RoundTripWithoutQuantization) {
  const auto rig = exact_rig();
  kin::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = visible_point(rng, rig);
    const auto px = per::project(p, rig);
    const Vec3 q = per::triangulate(px.u_l, px.v_l, px.u_r, rig.intrinsics, rig.baseline);
    EXPECT_LT((q - p).norm(), 1e-12);
  }
}

TEST(Perception, RectifiedRowsMatch) {
  auto rig = per::StereoRig::default_rig();
  kin::Rng rng(2);
  for (bool quant : {false, true}) {
    rig.pixel_quantization = quant;
    for (int i = 0; i < 200; ++i) {
      const auto px = per::project(visible_point(rng, rig), rig);
      EXPECT_EQ(px.v_l, px.v_r);
    }
  }
}

TEST(Perception, QuantizedErrorWithinRoundingBound) {
  const auto rig = per::StereoRig::default_rig();
  kin::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p = visible_point(rng, rig);
    const auto px = per::project(p, rig);
    const Vec3 q = per::triangulate(px.u_l, px.v_l, px.u_r, rig.intrinsics, rig.baseline);
    EXPECT_LE((q - p).norm(), corner_bound(p, rig) * 1.05 + 1e-12);
  }
}

TEST(Perception, DepthAtHalfMeterWithinHalfPixelSensitivity) {
  const auto rig = per::StereoRig::default_rig();
  const double z = 0.5;
  const auto px = per::project(Vec3(0.01, 0.0, z), rig);
  const double rz = per::triangulate(px.u_l, px.v_l, px.u_r, rig.intrinsics, rig.baseline).z();
  // Disparity can be off by up to one pixel after rounding both columns.
  EXPECT_LE(std::abs(rz - z), per::depth_error_bound(z, rig.intrinsics, rig.baseline, 1.0));
}

TEST(Perception, DepthErrorGrowsWithDepth) {
  const per::CameraIntrinsics in{};
  double prev = 0.0;
  for (double z = 0.1; z <= 2.0; z += 0.05) {
    const double e = per::depth_error_bound(z, in, 0.063, 0.5);
    EXPECT_GT(e, prev);
    prev = e;
  }
}

TEST(Perception, CloserTargetsAreRecoveredMoreAccurately) {
  const auto rig = per::StereoRig::default_rig();
  kin::Rng rng(4);
  std::uniform_real_distribution<double> u(-0.2, 0.2);
  double near_worst = 0.0, far_worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Vec3 dir(u(rng), u(rng), 1.0);
    for (auto [scale, worst] : {std::pair{0.2, &near_worst}, std::pair{0.4, &far_worst}}) {
      const Vec3 p = dir * scale;
      const auto px = per::project(p, rig);
      const Vec3 q = per::triangulate(px.u_l, px.v_l, px.u_r, rig.intrinsics, rig.baseline);
      *worst = std::max(*worst, (q - p).norm());
    }
  }
  EXPECT_LT(near_worst, far_worst);
}

TEST(Perception, ErrorKinds) {
  const auto rig = per::StereoRig::default_rig();
  EXPECT_THROW(per::project(Vec3(0, 0, 0), rig), rp::DomainError);
  EXPECT_THROW(per::project(Vec3(0, 0, -1), rig), rp::DomainError);
  EXPECT_THROW(per::project(Vec3(5, 0, 0.1), rig), rp::OutOfViewError);
  EXPECT_THROW(per::triangulate(100, 100, 100, rig.intrinsics, rig.baseline),
               rp::DegenerateGeometryError);
}

TEST(Perception, ObserveExactPathsReturnGroundTruth) {
  const auto g = kin::ArmGeometry::ur3();
  const auto rig = exact_rig();
  const auto q = g.reference_config;
  const auto pose = kin::forward_kinematics(q, g);
  // A point 30 cm in front of the left camera, slightly off axis.
  const Vec3 in_tool = rig.camera_in_tool * Vec3(0.01, -0.02, 0.3);
  const Vec3 target = pose.position + pose.orientation * in_tool;
  const auto stereo = per::observe_relative(target, q, rig, g);
  EXPECT_LT((stereo.p - in_tool).norm(), 1e-12);
  const auto exact = per::observe(target, q, per::PerceptionMode::exact, rig, g, false);
  EXPECT_LT((exact.p - in_tool).norm(), 1e-12);
}

TEST(Perception, FallbackToTruthWhenOutOfView) {
  const auto g = kin::ArmGeometry::ur3();
  const auto rig = per::StereoRig::default_rig();
  const auto q = g.reference_config;
  const auto pose = kin::forward_kinematics(q, g);
  const Vec3 behind = rig.camera_in_tool * Vec3(0, 0, -0.2);
  const Vec3 target = pose.position + pose.orientation * behind;
  const auto r = per::observe(target, q, per::PerceptionMode::stereo_quantized, rig, g, true);
  EXPECT_LT((r.p - behind).norm(), 1e-12);
  EXPECT_THROW(per::observe(target, q, per::PerceptionMode::stereo_quantized, rig, g, false),
               rp::Error);
}
