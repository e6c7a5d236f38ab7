#include "reachprecise/reach.hpp"

#include "reachprecise/errors.hpp"

#include <algorithm>
#include <limits>
#include <mutex>
#include <thread>

namespace rp::reach {

namespace kin = rp::kinematics;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::basic: return "basic";
    case Strategy::s1: return "s1";
    case Strategy::s2: return "s2";
    case Strategy::parallel: return "parallel";
    case Strategy::fixed_im: return "fixed-im";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (auto s : {Strategy::basic, Strategy::s1, Strategy::s2, Strategy::parallel,
                 Strategy::fixed_im}) {
    if (name == to_string(s)) return s;
  }
  if (name == "fixed_im") return Strategy::fixed_im;
  throw InvalidArgument("unknown strategy '" + std::string(name) +
                        "' (expected basic, s1, s2, parallel or fixed-im)");
}

std::string_view to_string(ThresholdMode m) {
  return m == ThresholdMode::min_disp ? "min" : "half";
}

ThresholdMode parse_threshold_mode(std::string_view name) {
  if (name == "min" || name == "min-disp") return ThresholdMode::min_disp;
  if (name == "half" || name == "half-min-disp") return ThresholdMode::half_min_disp;
  throw InvalidArgument("unknown threshold mode '" + std::string(name) + "' (expected min or half)");
}

double threshold_for(JointResolution res, ThresholdMode mode, const ArmGeometry& geom) {
  const double t = kin::min_displacement_threshold(res, geom);
  return mode == ThresholdMode::min_disp ? t : 0.5 * t;
}

void ReachTask::validate(const ArmGeometry& geom) const {
  geom.check_in_range(start, "start configuration");
  if (!(resolution.alpha > 0.0)) throw InvalidArgument("resolution must be positive");
  if (!(threshold > 0.0)) throw InvalidArgument("threshold must be positive");
  if (!target_rel.p.allFinite()) throw InvalidArgument("target is not finite");
  if (online.iterations < 1 || online.epochs < 1)
    throw InvalidArgument("online iterations and epochs must be >= 1");
  if (online.max_fs_steps < 0) throw InvalidArgument("max_fs_steps must be >= 0");
  if (!(online.learning_rate > 0.0)) throw InvalidArgument("online learning rate must be positive");
}

Budget::Budget(double wall_budget_s, std::stop_token stop)
    : deadline_(std::chrono::steady_clock::now() +
                std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(wall_budget_s > 0 ? wall_budget_s : 1e9))),
      stop_(std::move(stop)) {}

bool Budget::exhausted() const {
  return stop_.stop_requested() || std::chrono::steady_clock::now() >= deadline_;
}

OnlineResult online_iterate(InverseModel& replica, model::AdamOptimizer& opt,
                            const JointConfig& s, const RelativePosition& dp, double threshold,
                            const OnlineSettings& settings, JointResolution res,
                            const ArmGeometry& geom, const Budget& budget) {
  OnlineResult out;
  out.pr_best = std::numeric_limits<double>::infinity();
  std::vector<double> best_params(replica.parameters().begin(), replica.parameters().end());

  for (int it = 0; it < settings.iterations; ++it) {
    if (it > 0 && budget.exhausted()) break;

    const JointDelta dq = kin::feasible_quantized(s, replica.infer(s, dp), res, geom);
    const model::TrainSample sample{s, kin::displacement_in_tool_frame(s, dq, geom), dq};
    try {
      for (int e = 0; e < settings.epochs; ++e) {
        model::train_batch(replica, opt, std::span<const model::TrainSample>(&sample, 1));
      }
    } catch (const NumericError&) {
      out.numeric_failure = true;
    }

    const JointDelta dq_new = kin::feasible_quantized(s, replica.infer(s, dp), res, geom);
    const double pr = kin::residual_after(s, dq_new, dp, geom).residual.norm();
    ++out.iterations;
    if (pr < out.pr_best) {
      out.pr_best = pr;
      out.dq_best = dq_new;
      auto p = replica.parameters();
      best_params.assign(p.begin(), p.end());
    }
    out.pr_best_trace.push_back(out.pr_best);
    if (out.numeric_failure || out.pr_best < threshold) break;
  }

  if (out.iterations == 0) {
    out.pr_best = dp.norm();
  }
  std::copy(best_params.begin(), best_params.end(), replica.parameters().begin());
  return out;
}

SimStep forward_sim_step(const InverseModel& model, const JointConfig& s,
                         const RelativePosition& dp, const ArmGeometry& geom,
                         JointResolution res) {
  SimStep step;
  step.dq_step = kin::feasible_quantized(s, model.infer(s, dp), res, geom);
  const auto r = kin::residual_after(s, step.dq_step, dp, geom);
  step.s_new = r.q_after;
  step.dp_new = r.residual;
  return step;
}

double replay_precision(const ReachReport& report, const ArmGeometry& geom) {
  const kin::EndPose p0 = kin::forward_kinematics(report.start, geom);
  const kin::Vec3 target = p0.position + p0.orientation * report.target_rel.p;
  JointConfig q = report.start;
  for (const auto& dq : report.trajectory) q = kin::apply(q, dq);
  return (kin::forward_kinematics(q, geom).position - target).norm();
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

ReachReport blank_report(const ReachTask& task, Strategy s) {
  ReachReport r;
  r.strategy = s;
  r.branch = std::string(to_string(s));
  r.start = task.start;
  r.target_rel = task.target_rel;
  r.resolution_rad = task.resolution.alpha;
  r.threshold = task.threshold;
  return r;
}

}  // namespace

ReachReport run_strategy(const ReachTask& task, const InverseModel& pretrained, Strategy which,
                         const ArmGeometry& geom, std::stop_token stop) {
  if (which != Strategy::basic && which != Strategy::s1 && which != Strategy::s2)
    throw InvalidArgument("run_strategy handles basic, s1 and s2 only");
  task.validate(geom);

  const auto t0 = Clock::now();
  ReachReport rep = blank_report(task, which);
  const Budget budget(task.online.wall_budget_s, stop);

  InverseModel replica = pretrained.replicate();
  model::AdamOptimizer opt(replica.parameter_count(),
                           model::AdamSettings{.learning_rate = task.online.learning_rate});

  JointConfig s = task.start;
  RelativePosition dp = task.target_rel;
  std::vector<JointDelta> prefix;

  auto virtual_step = [&] {
    const SimStep st = forward_sim_step(replica, s, dp, geom, task.resolution);
    prefix.push_back(st.dq_step);
    s = st.s_new;
    dp = st.dp_new;
    ++rep.fs_steps;
  };

  if (which == Strategy::s2 && task.online.max_fs_steps > 0) virtual_step();

  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    const OnlineResult r = online_iterate(replica, opt, s, dp, task.threshold, task.online,
                                          task.resolution, geom, budget);
    rep.online_iterations += r.iterations;
    rep.numeric_failure = rep.numeric_failure || r.numeric_failure;
    if (r.pr_best < best) {
      best = r.pr_best;
      rep.trajectory = prefix;
      rep.trajectory.push_back(r.dq_best);
      rep.provenance = "online round after " + std::to_string(prefix.size()) + " virtual steps";
    }
    if (best < task.threshold) break;
    if (which == Strategy::basic || r.numeric_failure) break;
    if (rep.fs_steps >= task.online.max_fs_steps || budget.exhausted()) break;
    virtual_step();
  }

  rep.cancelled = stop.stop_requested();
  rep.precision = replay_precision(rep, geom);
  rep.success = rep.precision < task.threshold;
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

ReachReport select_branch(const ReachReport& s1, const ReachReport& s2, bool s1_first,
                          const ReachTask& task) {
  (void)task;
  const ReachReport& first = s1_first ? s1 : s2;
  const ReachReport& second = s1_first ? s2 : s1;
  ReachReport out;
  if (first.success) {
    out = first;
    out.provenance = out.branch + " satisfied the threshold first";
  } else if (second.success) {
    out = second;
    out.provenance = out.branch + " satisfied the threshold (other branch did not)";
  } else {
    bool pick_s1 = s1.precision < s2.precision ||
                   (s1.precision == s2.precision && s1.wall_time_s <= s2.wall_time_s);
    out = pick_s1 ? s1 : s2;
    out.provenance = out.branch + " had the better precision; neither met the threshold";
  }
  out.strategy = Strategy::parallel;
  out.numeric_failure = s1.numeric_failure && s2.numeric_failure;
  out.online_iterations = s1.online_iterations + s2.online_iterations;
  out.fs_steps = s1.fs_steps + s2.fs_steps;
  return out;
}

ReachReport select_deterministic(const ReachReport& s1, const ReachReport& s2,
                                 const ReachTask& task) {
  bool s1_first = true;
  if (s1.success && s2.success) s1_first = s1.work_units() <= s2.work_units();
  else if (s2.success) s1_first = false;
  ReachReport out = select_branch(s1, s2, s1_first, task);
  out.wall_time_s = s1.wall_time_s + s2.wall_time_s;
  return out;
}

ReachReport run_parallel(const ReachTask& task, const InverseModel& pretrained,
                         const ArmGeometry& geom, RaceMode mode) {
  task.validate(geom);
  if (mode == RaceMode::deterministic) {
    const ReachReport a = run_strategy(task, pretrained, Strategy::s1, geom);
    const ReachReport b = run_strategy(task, pretrained, Strategy::s2, geom);
    return select_deterministic(a, b, task);
  }

  const auto t0 = Clock::now();
  std::mutex mu;
  ReachReport reports[2];
  int done_order[2] = {-1, -1};
  int n_done = 0;
  std::stop_source sources[2];

  auto branch = [&](int idx, Strategy which) {
    ReachReport r;
    try {
      r = run_strategy(task, pretrained, which, geom, sources[idx].get_token());
    } catch (const NumericError&) {
      r = blank_report(task, which);
      r.numeric_failure = true;
      r.precision = task.target_rel.norm();
    }
    std::lock_guard lk(mu);
    reports[idx] = std::move(r);
    done_order[n_done++] = idx;
    if (reports[idx].success) sources[1 - idx].request_stop();
  };

  {
    std::jthread t1(branch, 0, Strategy::s1);
    std::jthread t2(branch, 1, Strategy::s2);
  }

  ReachReport out = select_branch(reports[0], reports[1], done_order[0] == 0, task);
  out.wall_time_s = seconds_since(t0);
  return out;
}

ReachReport run_baseline_fixed_im(const ReachTask& task, const InverseModel& pretrained,
                                  const ArmGeometry& geom, const PerceptionSettings& perception) {
  task.validate(geom);
  const auto t0 = Clock::now();
  ReachReport rep = blank_report(task, Strategy::fixed_im);

  const kin::EndPose p0 = kin::forward_kinematics(task.start, geom);
  const kin::Vec3 target = p0.position + p0.orientation * task.target_rel.p;

  JointConfig s = task.start;
  RelativePosition dp = task.target_rel;
  for (int step = 0; step < task.online.iterations; ++step) {
    const JointDelta dq = kin::feasible_quantized(s, pretrained.infer(s, dp), task.resolution, geom);
    if (dq.deltas.isZero(0.0)) break;
    rep.trajectory.push_back(dq);
    s = kin::apply(s, dq);
    ++rep.fs_steps;
    const kin::EndPose pose = kin::forward_kinematics(s, geom);
    if ((pose.position - target).norm() < task.threshold) break;
    dp = perception::observe(target, s, perception.mode, perception.rig, geom,
                             perception.fallback_to_truth);
  }

  rep.provenance = "executed " + std::to_string(rep.trajectory.size()) + " steps without learning";
  rep.precision = replay_precision(rep, geom);
  rep.success = rep.precision < task.threshold;
  rep.wall_time_s = seconds_since(t0);
  return rep;
}

ReachReport run(const ReachTask& task, const InverseModel& pretrained, Strategy which,
                const ArmGeometry& geom, RaceMode mode, const PerceptionSettings& perception) {
  switch (which) {
    case Strategy::parallel: return run_parallel(task, pretrained, geom, mode);
    case Strategy::fixed_im: return run_baseline_fixed_im(task, pretrained, geom, perception);
    default: return run_strategy(task, pretrained, which, geom);
  }
}

}  // namespace rp::reach
