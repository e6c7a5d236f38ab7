#pragma once

// Ground-truth forward model of a 6-DOF serial arm with a rigid needle tool.
//
// Angles are radians internally. Degrees appear only at the configuration
// and report boundaries (see config.hpp / bench.hpp).

#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <numbers>
#include <random>

namespace rp::kinematics {

inline constexpr int kJoints = 6;

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Rng = std::mt19937_64;

constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / std::numbers::pi; }

struct JointConfig {
  Vec6 angles = Vec6::Zero();
};

struct JointDelta {
  Vec6 deltas = Vec6::Zero();
};

struct JointResolution {
  double alpha = 0.0;  // radians, > 0

  static JointResolution from_degrees(double deg);
  double degrees() const { return rad_to_deg(alpha); }
};

// Target position in the current tool frame, meters.
struct RelativePosition {
  Vec3 p = Vec3::Zero();

  double norm() const { return p.norm(); }
};

struct EndPose {
  Vec3 position = Vec3::Zero();
  Mat3 orientation = Mat3::Identity();  // columns are tool axes in the base frame
};

// Standard Denavit-Hartenberg row: Rz(theta + theta_offset) Tz(d) Tx(a) Rx(twist).
struct DhRow {
  double a = 0.0;
  double d = 0.0;
  double twist = 0.0;
  double theta_offset = 0.0;
};

struct JointRange {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const;
  double mid() const { return 0.5 * (lo + hi); }
  double half_width() const { return 0.5 * (hi - lo); }
};

struct ArmGeometry {
  std::array<DhRow, kJoints> dh{};
  // Flange (last DH frame) to needle tip. Tool z is the needle axis.
  Eigen::Isometry3d tool_offset = Eigen::Isometry3d::Identity();
  std::array<JointRange, kJoints> ranges{};
  double delta_bound = deg_to_rad(10.0);
  // Configuration used for the reported minimum-displacement table.
  JointConfig reference_config{};

  // UR3 standard DH table, joint ranges of the experiment platform and a
  // needle whose tip sits 166.76 mm off the wrist-3 axis.
  static ArmGeometry ur3();

  // Distance from the wrist-3 axis (flange z) to the needle tip.
  double tool_lever_arm() const;

  // Throws ConfigError when an invariant is violated.
  void validate() const;

  // Throws DomainError naming the first offending joint.
  void check_in_range(const JointConfig& q, const char* what = "joint angle") const;
  bool in_range(const JointConfig& q) const;
};

// Tip pose via the DH chain composed with the tool offset.
EndPose forward_kinematics(const JointConfig& q, const ArmGeometry& geom);

// Same chain without the range check; used where the configuration is
// already known to be valid or where probing just past a limit is intended.
EndPose forward_kinematics_unchecked(const Vec6& angles, const ArmGeometry& geom);

double quantize(double delta, JointResolution res);
JointDelta quantize(const JointDelta& dq, JointResolution res);
bool is_quantized(const JointDelta& dq, JointResolution res);

// Clamps dq so that q + dq stays inside the joint ranges, then quantizes,
// stepping back toward zero by whole multiples of alpha when rounding would
// leave the range again. q must be in range.
JointDelta feasible_quantized(const JointConfig& q, const JointDelta& dq, JointResolution res,
                              const ArmGeometry& geom);

JointConfig apply(const JointConfig& q, const JointDelta& dq);

// Tip position after executing dq, expressed in the pre-motion tool frame.
RelativePosition displacement_in_tool_frame(const JointConfig& q, const JointDelta& dq,
                                            const ArmGeometry& geom);

struct Residual {
  JointConfig q_after;
  RelativePosition residual;  // target in the post-motion tool frame
};

// Re-expresses a target given in the tool frame of q in the tool frame of
// q + dq. The norm of the residual is the reaching precision.
Residual residual_after(const JointConfig& q, const JointDelta& dq,
                        const RelativePosition& target_rel, const ArmGeometry& geom);

struct MinDisplacement {
  double exact = 0.0;                 // smallest single-joint single-step tip motion, m
  int joint = -1;                     // joint realising it
  double small_angle_estimate = 0.0;  // tool lever arm * alpha, m
};

MinDisplacement min_end_displacement(const JointConfig& q, JointResolution res,
                                     const ArmGeometry& geom);

// Lever-arm small-angle value; the global precision threshold.
double min_displacement_threshold(JointResolution res, const ArmGeometry& geom);

// Uniform over the joint ranges.
JointConfig sample_config(const ArmGeometry& geom, Rng& rng);

// Uniform over [-bound, bound]^6, rejecting draws that leave the joint ranges.
JointDelta sample_delta(const JointConfig& q, double bound, const ArmGeometry& geom, Rng& rng);

// Seeded random search for the largest tool-frame displacement reachable
// with |dq_i| <= delta_bound.
double max_relative_distance(double delta_bound, const ArmGeometry& geom, std::size_t n_samples,
                             std::uint64_t seed);

}  // namespace rp::kinematics
