#pragma once

// Per-target high-precision reaching. The pretrained inverse model is never
// modified: every reach works on a replica that is fine-tuned online on
// forward-model relabels of its own proposals, optionally stepping the arm
// virtually toward the target between rounds of learning.

#include "reachprecise/kinematics.hpp"
#include "reachprecise/model.hpp"
#include "reachprecise/perception.hpp"

#include <chrono>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

namespace rp::reach {

using kinematics::ArmGeometry;
using kinematics::JointConfig;
using kinematics::JointDelta;
using kinematics::JointResolution;
using kinematics::RelativePosition;
using model::InverseModel;

enum class Strategy { basic, s1, s2, parallel, fixed_im };

std::string_view to_string(Strategy s);
// Throws InvalidArgument for unknown names.
Strategy parse_strategy(std::string_view name);

enum class ThresholdMode { min_disp, half_min_disp };

std::string_view to_string(ThresholdMode m);
ThresholdMode parse_threshold_mode(std::string_view name);

struct OnlineSettings {
  int iterations = 30;         // per online learning round
  int epochs = 5;              // single-sample updates per iteration
  double learning_rate = 1e-4;
  int max_fs_steps = 20;       // forward-simulation steps per reach
  double wall_budget_s = 10.0;
};

struct ReachTask {
  JointConfig start;
  RelativePosition target_rel;  // in the tool frame of start
  JointResolution resolution;
  double threshold = 0.0;  // m
  OnlineSettings online;

  void validate(const ArmGeometry& geom) const;
};

// Threshold for a resolution: the lever-arm minimum displacement, or half
// of it.
double threshold_for(JointResolution res, ThresholdMode mode, const ArmGeometry& geom);

// Stops a reach at iteration boundaries.
class Budget {
 public:
  Budget(double wall_budget_s, std::stop_token stop = {});
  bool exhausted() const;

 private:
  std::chrono::steady_clock::time_point deadline_;
  std::stop_token stop_;
};

struct OnlineResult {
  double pr_best = 0.0;
  JointDelta dq_best;  // quantized
  int iterations = 0;
  bool numeric_failure = false;
  std::vector<double> pr_best_trace;  // pr_best after each iteration
};

// Online iterative learning on `replica` for one (state, target) pair. On
// return the replica holds the best parameters seen.
OnlineResult online_iterate(InverseModel& replica, model::AdamOptimizer& opt,
                            const JointConfig& s, const RelativePosition& dp, double threshold,
                            const OnlineSettings& settings, JointResolution res,
                            const ArmGeometry& geom, const Budget& budget);

struct SimStep {
  JointConfig s_new;
  RelativePosition dp_new;
  JointDelta dq_step;  // quantized
};

// One virtual move: infer, quantize, predict the new state and residual.
SimStep forward_sim_step(const InverseModel& model, const JointConfig& s,
                         const RelativePosition& dp, const ArmGeometry& geom,
                         JointResolution res);

struct ReachReport {
  Strategy strategy = Strategy::basic;
  std::string branch;  // strategy that produced the trajectory
  std::string provenance;
  JointConfig start;
  RelativePosition target_rel;
  double resolution_rad = 0.0;
  double threshold = 0.0;
  double precision = 0.0;  // replayed from the trajectory, m
  bool success = false;
  std::vector<JointDelta> trajectory;
  int online_iterations = 0;
  int fs_steps = 0;
  double wall_time_s = 0.0;
  bool numeric_failure = false;
  bool cancelled = false;

  // Deterministic cost used to rank branches in the reproducible race mode.
  long long work_units() const { return online_iterations * 1000LL + fs_steps; }
};

// Distance between the target and the tip after executing the trajectory
// from the start configuration, recomputed from forward kinematics.
double replay_precision(const ReachReport& report, const ArmGeometry& geom);

// basic, s1 or s2. Cooperative cancellation through `stop`.
ReachReport run_strategy(const ReachTask& task, const InverseModel& pretrained, Strategy which,
                         const ArmGeometry& geom, std::stop_token stop = {});

enum class RaceMode {
  race,           // both branches on their own threads, earliest satisfier wins
  deterministic,  // both branches to completion, earliest by work units
};

// Choice between two completed branch reports. `s1_first` says which one
// returned first.
ReachReport select_branch(const ReachReport& s1, const ReachReport& s2, bool s1_first,
                          const ReachTask& task);

// Reproducible race outcome from two branches run to completion: the
// satisfier with fewer work units wins. Wall time is the sum of both.
ReachReport select_deterministic(const ReachReport& s1, const ReachReport& s2,
                                 const ReachTask& task);

ReachReport run_parallel(const ReachTask& task, const InverseModel& pretrained,
                         const ArmGeometry& geom, RaceMode mode);

struct PerceptionSettings {
  perception::PerceptionMode mode = perception::PerceptionMode::exact;
  perception::StereoRig rig = perception::StereoRig::default_rig();
  bool fallback_to_truth = true;
};

// Visual-servoing style baseline: infer, execute, re-observe; no learning.
ReachReport run_baseline_fixed_im(const ReachTask& task, const InverseModel& pretrained,
                                  const ArmGeometry& geom,
                                  const PerceptionSettings& perception = {});

// Dispatch on strategy (parallel uses `mode`).
ReachReport run(const ReachTask& task, const InverseModel& pretrained, Strategy which,
                const ArmGeometry& geom, RaceMode mode, const PerceptionSettings& perception = {});

}  // namespace rp::reach
