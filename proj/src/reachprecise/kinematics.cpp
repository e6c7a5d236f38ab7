#include "reachprecise/kinematics.hpp"

#include "reachprecise/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rp::kinematics {

namespace {

// Slack for range checks on sums of quantized steps.
constexpr double kRangeEps = 1e-12;

constexpr const char* kJointNames[kJoints] = {"base",    "shoulder", "elbow",
                                              "wrist1",  "wrist2",   "wrist3"};

Eigen::Isometry3d dh_transform(const DhRow& row, double theta) {
  const double ct = std::cos(theta + row.theta_offset);
  const double st = std::sin(theta + row.theta_offset);
  const double ca = std::cos(row.twist);
  const double sa = std::sin(row.twist);
  Eigen::Matrix4d m;
  m << ct, -st * ca, st * sa, row.a * ct,
       st, ct * ca, -ct * sa, row.a * st,
       0.0, sa, ca, row.d,
       0.0, 0.0, 0.0, 1.0;
  return Eigen::Isometry3d(m);
}

}  // namespace

JointResolution JointResolution::from_degrees(double deg) {
  if (!(deg > 0.0) || !std::isfinite(deg)) {
    throw InvalidArgument("joint resolution must be > 0 degrees, got " + std::to_string(deg));
  }
  return JointResolution{deg_to_rad(deg)};
}

bool JointRange::contains(double x) const { return x >= lo - kRangeEps && x <= hi + kRangeEps; }

ArmGeometry ArmGeometry::ur3() {
  ArmGeometry g;
  const double half_pi = std::numbers::pi / 2.0;
  g.dh = {{
      {0.0, 0.1519, half_pi, 0.0},
      {-0.24365, 0.0, 0.0, 0.0},
      {-0.21325, 0.0, 0.0, 0.0},
      {0.0, 0.11235, half_pi, 0.0},
      {0.0, 0.08535, -half_pi, 0.0},
      {0.0, 0.0819, 0.0, 0.0},
  }};
  g.tool_offset = Eigen::Isometry3d::Identity();
  g.tool_offset.translation() = Vec3(0.16676, 0.0, 0.0);
  const double deg_ranges[kJoints][2] = {{-90, 0}, {-180, -90}, {-90, 0},
                                         {-135, -45}, {45, 135}, {90, 180}};
  for (int j = 0; j < kJoints; ++j) {
    g.ranges[j] = {deg_to_rad(deg_ranges[j][0]), deg_to_rad(deg_ranges[j][1])};
  }
  g.delta_bound = deg_to_rad(10.0);
  const double ref_deg[kJoints] = {-5, -120, -60, -90, 50, 175};
  for (int j = 0; j < kJoints; ++j) g.reference_config.angles[j] = deg_to_rad(ref_deg[j]);
  return g;
}

double ArmGeometry::tool_lever_arm() const {
  // Wrist-3 rotates about the flange z axis through the flange origin.
  const Vec3 t = tool_offset.translation();
  return std::hypot(t.x(), t.y());
}

void ArmGeometry::validate() const {
  for (int j = 0; j < kJoints; ++j) {
    if (!(ranges[j].lo < ranges[j].hi)) {
      throw ConfigError(std::string("joint range of ") + kJointNames[j] + " is empty");
    }
  }
  if (!(delta_bound >= 0.0) || !std::isfinite(delta_bound)) {
    throw ConfigError("delta_bound must be finite and >= 0");
  }
  if (!(tool_lever_arm() > 0.0)) {
    throw ConfigError("tool lever arm (wrist-3 axis to needle tip) must be > 0");
  }
  const Mat3 r = tool_offset.linear();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(r.determinant() - 1.0) > 1e-9) {
    throw ConfigError("tool offset rotation is not a proper rotation");
  }
  if (!in_range(reference_config)) {
    throw ConfigError("reference configuration lies outside the joint ranges");
  }
}

bool ArmGeometry::in_range(const JointConfig& q) const {
  for (int j = 0; j < kJoints; ++j) {
    if (!ranges[j].contains(q.angles[j])) return false;
  }
  return true;
}

void ArmGeometry::check_in_range(const JointConfig& q, const char* what) const {
  for (int j = 0; j < kJoints; ++j) {
    const double x = q.angles[j];
    if (!std::isfinite(x) || !ranges[j].contains(x)) {
      throw DomainError(j, std::string(what) + " of joint " + std::to_string(j) + " (" +
                               kJointNames[j] + ") = " + std::to_string(rad_to_deg(x)) +
                               " deg outside [" + std::to_string(rad_to_deg(ranges[j].lo)) +
                               ", " + std::to_string(rad_to_deg(ranges[j].hi)) + "]");
    }
  }
}

EndPose forward_kinematics_unchecked(const Vec6& angles, const ArmGeometry& geom) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  for (int j = 0; j < kJoints; ++j) t = t * dh_transform(geom.dh[j], angles[j]);
  t = t * geom.tool_offset;
  return EndPose{t.translation(), t.linear()};
}

EndPose forward_kinematics(const JointConfig& q, const ArmGeometry& geom) {
  geom.check_in_range(q);
  return forward_kinematics_unchecked(q.angles, geom);
}

double quantize(double delta, JointResolution res) {
  // std::round breaks ties away from zero.
  return res.alpha * std::round(delta / res.alpha);
}

JointDelta quantize(const JointDelta& dq, JointResolution res) {
  JointDelta out;
  for (int j = 0; j < kJoints; ++j) out.deltas[j] = quantize(dq.deltas[j], res);
  return out;
}

bool is_quantized(const JointDelta& dq, JointResolution res) {
  for (int j = 0; j < kJoints; ++j) {
    if (dq.deltas[j] != quantize(dq.deltas[j], res)) return false;
  }
  return true;
}

JointDelta feasible_quantized(const JointConfig& q, const JointDelta& dq, JointResolution res,
                              const ArmGeometry& geom) {
  JointDelta out;
  for (int j = 0; j < kJoints; ++j) {
    const JointRange& r = geom.ranges[j];
    const double x = q.angles[j];
    double d = dq.deltas[j];
    if (!std::isfinite(d)) d = 0.0;
    d = std::clamp(d, r.lo - x, r.hi - x);
    double k = quantize(d, res);
    while (k != 0.0 && !r.contains(x + k)) {
      k = res.alpha * (std::round(k / res.alpha) - std::copysign(1.0, k));
    }
    out.deltas[j] = k;
  }
  return out;
}

JointConfig apply(const JointConfig& q, const JointDelta& dq) {
  return JointConfig{q.angles + dq.deltas};
}

RelativePosition displacement_in_tool_frame(const JointConfig& q, const JointDelta& dq,
                                            const ArmGeometry& geom) {
  const EndPose pre = forward_kinematics(q, geom);
  const JointConfig after = apply(q, dq);
  geom.check_in_range(after, "post-motion angle");
  const EndPose post = forward_kinematics_unchecked(after.angles, geom);
  return RelativePosition{pre.orientation.transpose() * (post.position - pre.position)};
}

Residual residual_after(const JointConfig& q, const JointDelta& dq,
                        const RelativePosition& target_rel, const ArmGeometry& geom) {
  const EndPose pre = forward_kinematics(q, geom);
  const JointConfig after = apply(q, dq);
  geom.check_in_range(after, "post-motion angle");
  const EndPose post = forward_kinematics_unchecked(after.angles, geom);
  const Vec3 target_base = pre.position + pre.orientation * target_rel.p;
  return Residual{after,
                  RelativePosition{post.orientation.transpose() * (target_base - post.position)}};
}

MinDisplacement min_end_displacement(const JointConfig& q, JointResolution res,
                                     const ArmGeometry& geom) {
  const EndPose base = forward_kinematics(q, geom);
  MinDisplacement out;
  out.exact = std::numeric_limits<double>::infinity();
  for (int j = 0; j < kJoints; ++j) {
    for (const double sign : {-1.0, 1.0}) {
      Vec6 moved = q.angles;
      moved[j] += sign * res.alpha;
      const double disp =
          (forward_kinematics_unchecked(moved, geom).position - base.position).norm();
      if (disp > 0.0 && disp < out.exact) {
        out.exact = disp;
        out.joint = j;
      }
    }
  }
  out.small_angle_estimate = min_displacement_threshold(res, geom);
  return out;
}

double min_displacement_threshold(JointResolution res, const ArmGeometry& geom) {
  return geom.tool_lever_arm() * res.alpha;
}

JointConfig sample_config(const ArmGeometry& geom, Rng& rng) {
  JointConfig q;
  for (int j = 0; j < kJoints; ++j) {
    std::uniform_real_distribution<double> u(geom.ranges[j].lo, geom.ranges[j].hi);
    q.angles[j] = u(rng);
  }
  return q;
}

JointDelta sample_delta(const JointConfig& q, double bound, const ArmGeometry& geom, Rng& rng) {
  JointDelta dq;
  if (bound <= 0.0) return dq;
  std::uniform_real_distribution<double> u(-bound, bound);
  // Coordinates are independent and the feasible set is a box, so rejecting
  // per coordinate yields the same distribution as rejecting whole vectors.
  for (int j = 0; j < kJoints; ++j) {
    double d;
    do {
      d = u(rng);
    } while (!geom.ranges[j].contains(q.angles[j] + d));
    dq.deltas[j] = d;
  }
  return dq;
}

double max_relative_distance(double delta_bound, const ArmGeometry& geom, std::size_t n_samples,
                             std::uint64_t seed) {
  if (n_samples == 0) throw InvalidArgument("max_relative_distance needs n_samples >= 1");
  if (delta_bound <= 0.0) return 0.0;
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const JointConfig q = sample_config(geom, rng);
    const JointDelta dq = sample_delta(q, delta_bound, geom, rng);
    const Vec3 p0 = forward_kinematics_unchecked(q.angles, geom).position;
    const Vec3 p1 = forward_kinematics_unchecked(q.angles + dq.deltas, geom).position;
    best = std::max(best, (p1 - p0).norm());
  }
  return best;
}

}  // namespace rp::kinematics
