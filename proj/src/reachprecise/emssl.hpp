#pragma once

// Dataset generation and self-supervised pretraining of the inverse model:
// the model proposes joint variations for unlabeled (state, relative target)
// pairs, the forward model relabels each proposal with the displacement it
// actually produces, and the model is trained on the relabeled triples.

#include "reachprecise/kinematics.hpp"
#include "reachprecise/model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace rp::emssl {

using kinematics::ArmGeometry;
using kinematics::JointConfig;
using kinematics::JointDelta;
using kinematics::JointResolution;
using kinematics::RelativePosition;
using model::InverseModel;
using model::TrainSample;

struct Sample {
  JointConfig s;
  RelativePosition dp;
};

// (state, relative position) pairs; the generating joint variation is not
// part of this type.
struct UnlabeledSet {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Generator output including the sampled variations, for the direct
// regression baseline.
struct GroundTruthSet {
  std::vector<TrainSample> train;
  std::vector<TrainSample> test;
};

GroundTruthSet generate_labeled_dataset(const ArmGeometry& geom, std::size_t n_total,
                                        std::size_t n_train, std::uint64_t seed);
UnlabeledSet generate_dataset(const ArmGeometry& geom, std::size_t n_total, std::size_t n_train,
                              std::uint64_t seed);
UnlabeledSet strip_labels(const GroundTruthSet& set);

// Line-delimited records: 6 state angles (deg), 3 relative position (m),
// optionally 6 joint variations (deg).
void write_samples(const std::filesystem::path& path, std::span<const TrainSample> samples,
                   bool with_labels);
std::vector<Sample> read_unlabeled(const std::filesystem::path& path);
std::vector<TrainSample> read_labeled(const std::filesystem::path& path);

struct PretrainConfig {
  int iterations = 200;       // T
  int epochs = 10;            // E
  int inference_batch = 512;  // M_R
  int train_batch = 128;      // M_T
  int workers = 6;            // K
  double learning_rate = 0.0015;
  model::NoiseSchedule noise{};
  std::uint64_t seed = 0;
  std::size_t eval_subsample = 2000;
  int patience = 0;  // 0 disables the plateau stop
  double eval_resolution_deg = 0.01;

  void validate() const;
};

// Forward-model relabeling of (s, dq) pairs on `workers` threads. Each worker
// owns a disjoint contiguous slice, so the result does not depend on the
// worker count.
std::vector<RelativePosition> relabel(std::span<const JointConfig> states,
                                      std::span<const JointDelta> deltas,
                                      const ArmGeometry& geom, int workers);

struct PrecisionStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

PrecisionStats summarize(std::vector<double> values);

// Quantized open-loop reach of every test sample; precision in meters.
PrecisionStats evaluate_open_loop(const InverseModel& model, std::span<const Sample> test,
                                  const ArmGeometry& geom, JointResolution res);

struct IterationMetrics {
  int iteration = 0;  // 1-based
  double mean_loss = 0.0;
  double noise_sigma = 0.0;
  PrecisionStats test{};
  double seconds = 0.0;
};

// Everything needed to continue a pretraining run bit-identically.
struct PretrainState {
  InverseModel model;
  model::AdamOptimizer optimizer;
  model::NoiseSchedule noise;
  kinematics::Rng rng;
  int completed_iterations = 0;
  std::vector<IterationMetrics> metrics;
  int best_iteration = 0;
  double best_precision = 0.0;

  static PretrainState fresh(InverseModel initial, const PretrainConfig& cfg);
};

using IterationCallback = std::function<void(const PretrainState&)>;

// Runs the remaining iterations of `state`. The callback fires after every
// completed iteration (checkpointing, progress output).
void pretrain(const UnlabeledSet& data, const ArmGeometry& geom, const PretrainConfig& cfg,
              PretrainState& state, const IterationCallback& on_iteration = {});

// Plain supervised training on ground-truth triples with the same
// iteration/epoch/batch budget as pretrain.
InverseModel train_direct_regression(std::span<const TrainSample> labeled, InverseModel model,
                                     const PretrainConfig& cfg);

void save_pretrain_state(const std::filesystem::path& dir, const PretrainState& state);
// Noise parameters come from cfg; only the schedule position is stored.
PretrainState load_pretrain_state(const std::filesystem::path& dir, const PretrainConfig& cfg);

}  // namespace rp::emssl
