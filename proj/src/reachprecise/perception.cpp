#include "reachprecise/perception.hpp"

#include "reachprecise/errors.hpp"

#include <cmath>
#include <string>

namespace rp::perception {

using kinematics::ArmGeometry;
using kinematics::JointConfig;
using kinematics::RelativePosition;

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("focal lengths must be > 0");
  if (width <= 0 || height <= 0) throw ConfigError("sensor size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw ConfigError("principal point must lie on the sensor");
  }
}

StereoRig StereoRig::default_rig() {
  StereoRig rig;
  rig.camera_in_tool = Eigen::Isometry3d::Identity();
  // Image y points down, so "above" is -y.
  rig.camera_in_tool.translation() = Vec3(0.0, -0.040, -0.030);
  return rig;
}

void StereoRig::validate() const {
  intrinsics.validate();
  if (!(baseline > 0.0)) throw ConfigError("stereo baseline must be > 0");
}

PixelPair project(const Vec3& point_cam, const StereoRig& rig) {
  const CameraIntrinsics& in = rig.intrinsics;
  const double z = point_cam.z();
  if (!(z > 0.0)) {
    throw DomainError(-1, "point depth must be > 0, got " + std::to_string(z));
  }
  PixelPair px;
  px.u_l = in.fx * point_cam.x() / z + in.cx;
  px.v_l = in.fy * point_cam.y() / z + in.cy;
  px.u_r = in.fx * (point_cam.x() - rig.baseline) / z + in.cx;
  px.v_r = px.v_l;
  if (rig.pixel_quantization) {
    px.u_l = std::round(px.u_l);
    px.v_l = std::round(px.v_l);
    px.u_r = std::round(px.u_r);
    px.v_r = px.v_l;
  }
  const auto inside = [&](double u, double v) {
    return u >= 0.0 && u < in.width && v >= 0.0 && v < in.height;
  };
  if (!inside(px.u_l, px.v_l) || !inside(px.u_r, px.v_r)) {
    throw OutOfViewError("point projects outside the sensor");
  }
  return px;
}

Vec3 triangulate(double u_l, double v_l, double u_r, const CameraIntrinsics& intr,
                 double baseline) {
  const double disparity = u_l - u_r;
  if (!(disparity > 0.0)) {
    throw DegenerateGeometryError("disparity must be > 0, got " + std::to_string(disparity));
  }
  const double z = intr.fx * baseline / disparity;
  return Vec3((u_l - intr.cx) * z / intr.fx, (v_l - intr.cy) * z / intr.fy, z);
}

RelativePosition observe_relative(const Vec3& target_base, const JointConfig& q,
                                  const StereoRig& rig, const ArmGeometry& geom) {
  const kinematics::EndPose pose = kinematics::forward_kinematics(q, geom);
  const Vec3 in_tool = pose.orientation.transpose() * (target_base - pose.position);
  const Vec3 in_cam = rig.camera_in_tool.inverse() * in_tool;
  const PixelPair px = project(in_cam, rig);
  const Vec3 recovered = triangulate(px.u_l, px.v_l, px.u_r, rig.intrinsics, rig.baseline);
  return RelativePosition{rig.camera_in_tool * recovered};
}

RelativePosition observe(const Vec3& target_base, const JointConfig& q, PerceptionMode mode,
                         const StereoRig& rig, const ArmGeometry& geom, bool fallback_to_truth) {
  const auto truth = [&] {
    const kinematics::EndPose pose = kinematics::forward_kinematics(q, geom);
    return RelativePosition{pose.orientation.transpose() * (target_base - pose.position)};
  };
  if (mode == PerceptionMode::exact) return truth();
  try {
    return observe_relative(target_base, q, rig, geom);
  } catch (const OutOfViewError&) {
    if (fallback_to_truth) return truth();
    throw;
  } catch (const DomainError& e) {
    // Behind the camera counts as out of view; joint range errors propagate.
    if (e.joint() >= 0 || !fallback_to_truth) throw;
    return truth();
  }
}

double depth_error_bound(double depth, const CameraIntrinsics& intr, double baseline,
                         double disparity_error_px) {
  const double d = intr.fx * baseline / depth;
  double worst = depth - intr.fx * baseline / (d + disparity_error_px);
  if (d > disparity_error_px) {
    worst = std::max(worst, intr.fx * baseline / (d - disparity_error_px) - depth);
  } else {
    worst = std::numeric_limits<double>::infinity();
  }
  return worst;
}

}  // namespace rp::perception
