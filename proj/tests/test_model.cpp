#include "reachprecise/errors.hpp"
#include "reachprecise/model.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

namespace kin = rp::kinematics;
namespace mdl = rp::model;

namespace {

mdl::InverseModel small_model(std::uint64_t seed, std::vector<int> dims = {9, 8, 6}) {
  const auto g = kin::ArmGeometry::ur3();
  return mdl::InverseModel::initialized(std::move(dims), mdl::Normalization::for_geometry(g, 0.2226),
                                        g.delta_bound, seed);
}

std::vector<mdl::TrainSample> random_batch(std::size_t n, std::uint64_t seed) {
  const auto g = kin::ArmGeometry::ur3();
  kin::Rng rng(seed);
  std::vector<mdl::TrainSample> out;
  for (std::size_t i = 0; i < n; ++i) {
    mdl::TrainSample t;
    t.s = kin::sample_config(g, rng);
    t.dq = kin::sample_delta(t.s, g.delta_bound, g, rng);
    t.dp = kin::displacement_in_tool_frame(t.s, t.dq, g);
    out.push_back(t);
  }
  return out;
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rp_test_model_" + name);
}

}  // namespace

TEST(Model, GradientMatchesCentralDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto m = small_model(seed);
    // Larger output weights so the logistic is away from its linear regime.
    for (double& p : m.parameters()) p *= 3.0;
    const auto batch = random_batch(5, seed + 10);
    const double worst = rp::testing::gradient_check(m, batch);
    EXPECT_LT(worst, 1e-5) << "seed " << seed;
  }
}

TEST(Model, OutputsRespectTheStepBound) {
  auto m = small_model(4, {9, 16, 6});
  for (double& p : m.parameters()) p *= 50.0;
  const auto batch = random_batch(200, 5);
  for (const auto& t : batch) {
    const auto dq = m.infer(t.s, t.dp);
    EXPECT_LE(dq.deltas.cwiseAbs().maxCoeff(), m.delta_bound());
  }
}

TEST(Model, InitializationIsSeeded) {
  EXPECT_EQ(small_model(9), small_model(9));
  EXPECT_NE(small_model(9).checksum(), small_model(10).checksum());
}

TEST(Model, RejectsBadTopology) {
  const auto n = mdl::Normalization::identity();
  EXPECT_THROW(mdl::InverseModel({9, 6, 5}, n, 0.1), rp::InvalidArgument);
  EXPECT_THROW(mdl::InverseModel({8, 6}, n, 0.1), rp::InvalidArgument);
  EXPECT_THROW(mdl::InverseModel({9, 0, 6}, n, 0.1), rp::InvalidArgument);
}

TEST(Model, ReplicaIsIndependent) {
  const auto original = small_model(11, {9, 16, 16, 6});
  const auto before = original.checksum();
  auto replica = original.replicate();
  mdl::AdamOptimizer opt(replica.parameter_count(), {.learning_rate = 1e-2});
  const auto batch = random_batch(16, 12);
  for (int i = 0; i < 10; ++i) mdl::train_batch(replica, opt, batch);
  EXPECT_EQ(original.checksum(), before);
  EXPECT_NE(replica.checksum(), before);
}

TEST(Model, TrainingReducesLoss) {
  auto m = small_model(13, {9, 32, 32, 6});
  mdl::AdamOptimizer opt(m.parameter_count(), {.learning_rate = 1e-3});
  const auto batch = random_batch(64, 14);
  const double first = mdl::train_batch(m, opt, batch);
  double last = first;
  for (int i = 0; i < 300; ++i) last = mdl::train_batch(m, opt, batch);
  EXPECT_LT(last, 0.5 * first);
}

TEST(Model, NonFiniteGradientLeavesStateUntouched) {
  auto m = small_model(15);
  mdl::AdamOptimizer opt(m.parameter_count(), {});
  auto batch = random_batch(4, 16);
  batch[2].dq.deltas[0] = std::numeric_limits<double>::quiet_NaN();
  const auto before = m.checksum();
  EXPECT_THROW(mdl::train_batch(m, opt, batch), rp::NumericError);
  EXPECT_EQ(m.checksum(), before);
  EXPECT_EQ(opt.step_count(), 0u);
}

TEST(Model, AdamFirstStepMovesByLearningRate) {
  mdl::AdamOptimizer opt(3, {.learning_rate = 0.01});
  std::vector<double> p{1.0, 2.0, 3.0};
  const std::vector<double> g{0.5, -2.0, 1e-3};
  opt.step(p, g);
  EXPECT_NEAR(p[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(p[1], 2.0 + 0.01, 1e-9);
  EXPECT_NEAR(p[2], 3.0 - 0.01, 1e-7);
}

TEST(Model, NoiseSchedule) {
  mdl::NoiseSchedule n;
  EXPECT_DOUBLE_EQ(n.sigma(), 0.07);
  n.t = 100;
  EXPECT_NEAR(n.sigma(), 0.07 * std::pow(0.999, 100), 1e-15);
  n.units = mdl::NoiseUnits::variance;
  EXPECT_NEAR(n.sigma(), std::sqrt(0.07) * std::pow(0.999, 100), 1e-15);
  n.units = mdl::NoiseUnits::std_dev;
  n.law = mdl::DecayLaw::subtractive;
  n.t = 30;
  EXPECT_NEAR(n.sigma(), 0.04, 1e-15);
  n.t = 1000;
  EXPECT_EQ(n.sigma(), 0.0);
}

TEST(Model, NoisyInferenceStaysInBound) {
  const auto m = small_model(17);
  mdl::NoiseSchedule n;
  n.sigma0 = 5.0;
  kin::Rng rng(1);
  for (const auto& t : random_batch(100, 18)) {
    const auto dq = mdl::infer_noisy(m, t.s, t.dp, n, rng);
    EXPECT_LE(dq.deltas.cwiseAbs().maxCoeff(), m.delta_bound());
  }
}

TEST(Model, CheckpointRoundTripIsBitExact) {
  auto m = small_model(19, {9, 12, 7, 6});
  const auto path = temp_path("ckpt.bin");
  mdl::save_checkpoint(path, m);
  const auto back = mdl::load_checkpoint(path);
  EXPECT_EQ(back, m);
  EXPECT_EQ(back.checksum(), m.checksum());
  std::filesystem::remove(path);
}

TEST(Model, CorruptCheckpointIsRejected) {
  const auto m = small_model(20);
  const auto path = temp_path("corrupt.bin");
  mdl::save_checkpoint(path, m);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  EXPECT_THROW(mdl::load_checkpoint(path), rp::IoError);
  std::filesystem::remove(path);
}

TEST(Model, OptimizerRoundTrip) {
  auto m = small_model(21);
  mdl::AdamOptimizer opt(m.parameter_count(), {});
  mdl::train_batch(m, opt, random_batch(8, 22));
  const auto path = temp_path("adam.bin");
  mdl::save_optimizer(path, opt);
  const auto back = mdl::load_optimizer(path);
  EXPECT_EQ(back.step_count(), opt.step_count());
  EXPECT_TRUE(std::equal(back.first_moment().begin(), back.first_moment().end(),
                         opt.first_moment().begin()));
  EXPECT_TRUE(std::equal(back.second_moment().begin(), back.second_moment().end(),
                         opt.second_moment().begin()));
  std::filesystem::remove(path);
}
