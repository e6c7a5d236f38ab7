#pragma once

// Independent reference implementations shared by the unit and acceptance
// tests.

#include "reachprecise/kinematics.hpp"
#include "reachprecise/model.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace rp::testing {

namespace kin = rp::kinematics;
using kin::Mat3;
using kin::Vec3;
using kin::Vec6;

Mat3 skew(const Vec3& w) {
  Mat3 m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// exp of a unit-axis revolute twist (w, v = -w x p) by theta, as a 4x4.
Eigen::Matrix4d twist_exp(const Vec3& w, const Vec3& p, double theta) {
  const Mat3 W = skew(w);
  const Mat3 R = Mat3::Identity() + std::sin(theta) * W + (1 - std::cos(theta)) * W * W;
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  T.block<3, 3>(0, 0) = R;
  T.block<3, 1>(0, 3) = (Mat3::Identity() - R) * p;
  return T;
}

// Product-of-exponentials model built from the home configuration only:
// joint axes and points come from the DH rows at q = 0, then every other
// configuration uses rotations about those fixed spatial axes.
struct PoeArm {
  Vec3 w[kin::kJoints];
  Vec3 p[kin::kJoints];
  Eigen::Matrix4d M;

  explicit PoeArm(const kin::ArmGeometry& g) {
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    for (int i = 0; i < kin::kJoints; ++i) {
      w[i] = T.block<3, 1>(0, 2);
      p[i] = T.block<3, 1>(0, 3);
      const auto& r = g.dh[static_cast<std::size_t>(i)];
      const double th = r.theta_offset;
      Eigen::Matrix4d A;
      A << std::cos(th), -std::sin(th) * std::cos(r.twist), std::sin(th) * std::sin(r.twist),
          r.a * std::cos(th), std::sin(th), std::cos(th) * std::cos(r.twist),
          -std::cos(th) * std::sin(r.twist), r.a * std::sin(th), 0, std::sin(r.twist),
          std::cos(r.twist), r.d, 0, 0, 0, 1;
      T = T * A;
    }
    M = T * g.tool_offset.matrix();
  }

  Eigen::Matrix4d fk(const Vec6& q) const {
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    for (int i = 0; i < kin::kJoints; ++i) T = T * twist_exp(w[i], p[i], q[i]);
    return T * M;
  }
};

// Worst relative difference between the analytic gradient and central
// differences of the loss over every parameter.
inline double gradient_check(model::InverseModel& m, const std::vector<model::TrainSample>& batch,
                             double h = 1e-6) {
  model::ParamVector grad;
  model::loss_and_gradient(m, batch, &grad);
  auto params = m.parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = model::loss_and_gradient(m, batch, nullptr);
    params[i] = keep - h;
    const double down = model::loss_and_gradient(m, batch, nullptr);
    params[i] = keep;
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

}  // namespace rp::testing
