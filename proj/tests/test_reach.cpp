#include "reachprecise/errors.hpp"
#include "reachprecise/reach.hpp"

#include <gtest/gtest.h>

#include <limits>

namespace kin = rp::kinematics;
namespace mdl = rp::model;
namespace rch = rp::reach;

namespace {

mdl::InverseModel small_model(const kin::ArmGeometry& g, std::uint64_t seed = 3) {
  return mdl::InverseModel::initialized({9, 32, 32, 6}, mdl::Normalization::for_geometry(g, 0.2226),
                                        g.delta_bound, seed);
}

mdl::InverseModel zero_model(const kin::ArmGeometry& g) {
  auto m = small_model(g);
  for (double& p : m.parameters()) p = 0.0;
  return m;
}

rch::ReachTask task_for(const kin::ArmGeometry& g, kin::Rng& rng, double res_deg) {
  rch::ReachTask t;
  t.start = kin::sample_config(g, rng);
  t.target_rel = kin::displacement_in_tool_frame(t.start, kin::sample_delta(t.start, 0.05, g, rng), g);
  t.resolution = kin::JointResolution::from_degrees(res_deg);
  t.threshold = rch::threshold_for(t.resolution, rch::ThresholdMode::min_disp, g);
  t.online.iterations = 10;
  t.online.max_fs_steps = 3;
  t.online.wall_budget_s = 0.0;
  return t;
}

}  // namespace

TEST(Reach, ParseNames) {
  EXPECT_EQ(rch::parse_strategy("fixed-im"), rch::Strategy::fixed_im);
  EXPECT_EQ(rch::parse_strategy("s2"), rch::Strategy::s2);
  EXPECT_THROW(rch::parse_strategy("s3"), rp::InvalidArgument);
  EXPECT_EQ(rch::parse_threshold_mode("half"), rch::ThresholdMode::half_min_disp);
  EXPECT_THROW(rch::parse_threshold_mode("quarter"), rp::InvalidArgument);
}

TEST(Reach, ThresholdModes) {
  const auto g = kin::ArmGeometry::ur3();
  const auto res = kin::JointResolution::from_degrees(0.1);
  const double full = rch::threshold_for(res, rch::ThresholdMode::min_disp, g);
  EXPECT_NEAR(full, g.tool_lever_arm() * res.alpha, 1e-15);
  EXPECT_DOUBLE_EQ(rch::threshold_for(res, rch::ThresholdMode::half_min_disp, g), full / 2);
}

TEST(Reach, BestPrecisionNeverIncreases) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(1);
  const auto base = small_model(g);
  for (int i = 0; i < 20; ++i) {
    const auto t = task_for(g, rng, 0.01);
    auto replica = base.replicate();
    mdl::AdamOptimizer opt(replica.parameter_count(), {.learning_rate = 1e-3});
    auto settings = t.online;
    settings.iterations = 25;
    const auto r = rch::online_iterate(replica, opt, t.start, t.target_rel, 0.0, settings,
                                       t.resolution, g, rch::Budget(0.0));
    ASSERT_EQ(r.pr_best_trace.size(), static_cast<std::size_t>(r.iterations));
    EXPECT_EQ(r.iterations, 25);
    for (std::size_t k = 1; k < r.pr_best_trace.size(); ++k)
      EXPECT_LE(r.pr_best_trace[k], r.pr_best_trace[k - 1]);
    EXPECT_TRUE(kin::is_quantized(r.dq_best, t.resolution));
    // The replica is left holding the parameters that produced pr_best.
    const auto dq = kin::feasible_quantized(t.start, replica.infer(t.start, t.target_rel),
                                            t.resolution, g);
    EXPECT_DOUBLE_EQ(kin::residual_after(t.start, dq, t.target_rel, g).residual.norm(), r.pr_best);
  }
}

TEST(Reach, InfiniteThresholdStopsAfterOneIteration) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(2);
  const auto t = task_for(g, rng, 0.1);
  auto replica = small_model(g);
  mdl::AdamOptimizer opt(replica.parameter_count(), {});
  const auto r = rch::online_iterate(replica, opt, t.start, t.target_rel,
                                     std::numeric_limits<double>::infinity(), t.online,
                                     t.resolution, g, rch::Budget(0.0));
  EXPECT_EQ(r.iterations, 1);
}

TEST(Reach, ZeroModelIsAForwardSimulationFixedPoint) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = zero_model(g);
  kin::Rng rng(3);
  const auto t = task_for(g, rng, 0.01);
  const auto st = rch::forward_sim_step(m, t.start, t.target_rel, g, t.resolution);
  EXPECT_TRUE(st.dq_step.deltas.isZero(0.0));
  EXPECT_EQ(st.s_new.angles, t.start.angles);
  EXPECT_LT((st.dp_new.p - t.target_rel.p).norm(), 1e-15);
}

TEST(Reach, ForwardSimulationAgreesWithReplay) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  kin::Rng rng(4);
  for (int i = 0; i < 50; ++i) {
    const auto t = task_for(g, rng, 0.1);
    const auto st = rch::forward_sim_step(m, t.start, t.target_rel, g, t.resolution);
    EXPECT_TRUE(kin::is_quantized(st.dq_step, t.resolution));
    rch::ReachReport rep;
    rep.start = t.start;
    rep.target_rel = t.target_rel;
    rep.trajectory = {st.dq_step};
    EXPECT_NEAR(rch::replay_precision(rep, g), st.dp_new.norm(), 1e-12);
  }
}

TEST(Reach, ReportsAreAuditableAndQuantized) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  kin::Rng rng(5);
  for (auto s : {rch::Strategy::basic, rch::Strategy::s1, rch::Strategy::s2,
                 rch::Strategy::fixed_im}) {
    for (int i = 0; i < 8; ++i) {
      const auto t = task_for(g, rng, i % 2 ? 0.1 : 1.0);
      const auto rep = rch::run(t, m, s, g, rch::RaceMode::deterministic);
      EXPECT_NEAR(rch::replay_precision(rep, g), rep.precision, 1e-9);
      EXPECT_EQ(rep.success, rep.precision < t.threshold);
      EXPECT_FALSE(rep.trajectory.empty() && s != rch::Strategy::fixed_im);
      for (const auto& dq : rep.trajectory) EXPECT_TRUE(kin::is_quantized(dq, t.resolution));
      if (s == rch::Strategy::basic) {
        EXPECT_EQ(rep.fs_steps, 0);
      }
      if (s == rch::Strategy::s2) {
        EXPECT_GE(rep.fs_steps, 1);
      }
    }
  }
}

TEST(Reach, PretrainedModelIsNeverModified) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  const auto before = m.checksum();
  kin::Rng rng(6);
  for (int i = 0; i < 5; ++i) {
    const auto t = task_for(g, rng, 0.01);
    rch::run(t, m, rch::Strategy::parallel, g, rch::RaceMode::race);
    rch::run(t, m, rch::Strategy::s2, g, rch::RaceMode::deterministic);
  }
  EXPECT_EQ(m.checksum(), before);
}

TEST(Reach, TargetAtTheTipNeedsNoMotion) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(7);
  auto t = task_for(g, rng, 0.01);
  t.target_rel = kin::RelativePosition{kin::Vec3::Zero()};
  const auto rep = rch::run_strategy(t, zero_model(g), rch::Strategy::s1, g);
  EXPECT_TRUE(rep.success);
  EXPECT_EQ(rep.precision, 0.0);
  ASSERT_EQ(rep.trajectory.size(), 1u);
  EXPECT_TRUE(rep.trajectory[0].deltas.isZero(0.0));
  EXPECT_EQ(rep.fs_steps, 0);
}

TEST(Reach, InvalidTasksAreRejected) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(8);
  auto t = task_for(g, rng, 0.1);
  const auto m = small_model(g);
  auto bad = t;
  bad.threshold = 0.0;
  EXPECT_THROW(rch::run_strategy(bad, m, rch::Strategy::s1, g), rp::InvalidArgument);
  bad = t;
  bad.online.iterations = 0;
  EXPECT_THROW(rch::run_strategy(bad, m, rch::Strategy::s1, g), rp::InvalidArgument);
  bad = t;
  bad.start.angles[3] = 0.5;
  EXPECT_THROW(rch::run_strategy(bad, m, rch::Strategy::s1, g), rp::DomainError);
  EXPECT_THROW(rch::run_strategy(t, m, rch::Strategy::parallel, g), rp::InvalidArgument);
}

namespace {

rch::ReachReport fake(const std::string& branch, double precision, double threshold, int iters,
                      double wall) {
  rch::ReachReport r;
  r.branch = branch;
  r.precision = precision;
  r.threshold = threshold;
  r.success = precision < threshold;
  r.online_iterations = iters;
  r.wall_time_s = wall;
  return r;
}

}  // namespace

TEST(Reach, BranchSelection) {
  rch::ReachTask task;
  const auto a_ok = fake("s1", 0.1, 1.0, 10, 0.5);
  const auto b_ok = fake("s2", 0.05, 1.0, 4, 0.7);
  const auto a_bad = fake("s1", 2.0, 1.0, 30, 1.0);
  const auto b_bad = fake("s2", 3.0, 1.0, 30, 0.2);

  // Earliest satisfier wins even when the other branch is more precise.
  EXPECT_EQ(rch::select_branch(a_ok, b_ok, true, task).branch, "s1");
  EXPECT_EQ(rch::select_branch(a_ok, b_ok, false, task).branch, "s2");
  EXPECT_EQ(rch::select_branch(a_bad, b_ok, true, task).branch, "s2");
  const auto worse = rch::select_branch(a_bad, b_bad, false, task);
  EXPECT_EQ(worse.branch, "s1");
  EXPECT_FALSE(worse.success);
  EXPECT_EQ(worse.strategy, rch::Strategy::parallel);
  EXPECT_EQ(worse.online_iterations, 60);

  const auto det = rch::select_deterministic(a_ok, b_ok, task);
  EXPECT_EQ(det.branch, "s2");
  EXPECT_DOUBLE_EQ(det.wall_time_s, 1.2);
  EXPECT_EQ(rch::select_deterministic(a_ok, b_bad, task).branch, "s1");
}

TEST(Reach, DeterministicParallelIsReproducible) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  kin::Rng rng(9);
  const auto t = task_for(g, rng, 0.1);
  const auto a = rch::run_parallel(t, m, g, rch::RaceMode::deterministic);
  const auto b = rch::run_parallel(t, m, g, rch::RaceMode::deterministic);
  EXPECT_EQ(a.branch, b.branch);
  EXPECT_EQ(a.precision, b.precision);
  ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
  for (std::size_t i = 0; i < a.trajectory.size(); ++i)
    EXPECT_EQ(a.trajectory[i].deltas, b.trajectory[i].deltas);
}

TEST(Reach, RaceModeProducesAValidReport) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  kin::Rng rng(10);
  for (int i = 0; i < 5; ++i) {
    const auto t = task_for(g, rng, 1.0);
    const auto r = rch::run_parallel(t, m, g, rch::RaceMode::race);
    EXPECT_EQ(r.strategy, rch::Strategy::parallel);
    EXPECT_TRUE(r.branch == "s1" || r.branch == "s2");
    EXPECT_NEAR(rch::replay_precision(r, g), r.precision, 1e-9);
    EXPECT_GT(r.wall_time_s, 0.0);
  }
}

TEST(Reach, CancelledBranchStopsEarly) {
  const auto g = kin::ArmGeometry::ur3();
  const auto m = small_model(g);
  kin::Rng rng(11);
  auto t = task_for(g, rng, 0.01);
  t.online.iterations = 1000;
  std::stop_source src;
  src.request_stop();
  const auto r = rch::run_strategy(t, m, rch::Strategy::s1, g, src.get_token());
  EXPECT_TRUE(r.cancelled);
  EXPECT_EQ(r.online_iterations, 1);
  EXPECT_EQ(r.fs_steps, 0);
}
