#pragma once

// Simulated stereo pair mounted at the end of the arm. Rectified: both
// cameras share intrinsics and orientation, the right one sits `baseline`
// meters along the left camera's +x axis.

#include "reachprecise/kinematics.hpp"

namespace rp::perception {

using kinematics::Vec3;

struct CameraIntrinsics {
  double fx = 700.0;
  double fy = 700.0;
  double cx = 640.0;
  double cy = 360.0;
  int width = 1280;
  int height = 720;

  void validate() const;
};

struct StereoRig {
  CameraIntrinsics intrinsics{};
  double baseline = 0.063;  // m
  // Left-camera pose in the tool frame (maps camera coordinates to tool
  // coordinates). Camera z is the optical axis.
  Eigen::Isometry3d camera_in_tool = Eigen::Isometry3d::Identity();
  bool pixel_quantization = true;

  // 40 mm above and 30 mm behind the needle tip, looking along the needle.
  static StereoRig default_rig();
  void validate() const;
};

enum class PerceptionMode {
  exact,             // ground-truth relative position
  stereo_quantized,  // project, round to pixels, triangulate
};

struct PixelPair {
  double u_l = 0.0;
  double v_l = 0.0;
  double u_r = 0.0;
  double v_r = 0.0;

  double disparity() const { return u_l - u_r; }
};

// Throws DomainError for non-positive depth and OutOfViewError when either
// projection leaves the sensor.
PixelPair project(const Vec3& point_cam, const StereoRig& rig);

// Throws DegenerateGeometryError for non-positive disparity.
Vec3 triangulate(double u_l, double v_l, double u_r, const CameraIntrinsics& intr, double baseline);

// Target given in the base frame, observed from configuration q.
kinematics::RelativePosition observe_relative(const Vec3& target_base,
                                              const kinematics::JointConfig& q,
                                              const StereoRig& rig,
                                              const kinematics::ArmGeometry& geom);

// Dispatches on mode; exact mode skips the cameras entirely. With
// fallback_to_truth an out-of-view target yields the ground truth instead of
// throwing.
kinematics::RelativePosition observe(const Vec3& target_base, const kinematics::JointConfig& q,
                                     PerceptionMode mode, const StereoRig& rig,
                                     const kinematics::ArmGeometry& geom,
                                     bool fallback_to_truth);

// Worst-case depth error when the disparity is off by up to
// `disparity_error_px` pixels.
double depth_error_bound(double depth, const CameraIntrinsics& intr, double baseline,
                         double disparity_error_px = 1.0);

}  // namespace rp::perception
