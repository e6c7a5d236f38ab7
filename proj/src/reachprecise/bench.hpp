#pragma once

// Experiment harness behind the command-line tool: dataset files,
// pretraining runs, reach suites, aggregate tables and report audits.
//
// Output layout under the configured directory:
//   data/{train,test}.txt, data/manifest.json
//   pretrain/<method>/{model.ckpt, metrics.csv, state/}
//   reach/<strategy>_<res>_<mode>/{reports.jsonl, summary.json}
//   tables/table<N>.{csv,txt} plus the raw reports each table used

#include "reachprecise/config.hpp"
#include "reachprecise/emssl.hpp"
#include "reachprecise/reach.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace rp::bench {

using config::BenchConfig;
namespace fs = std::filesystem;

// Version string embedded in every output (project version plus commit when
// known at build time).
std::string code_version();

// ---- data -----------------------------------------------------------------

struct DataPaths {
  fs::path train;
  fs::path test;
  fs::path manifest;
};

DataPaths data_paths(const fs::path& out_dir);

// Generates and writes the labeled dataset. The label columns are ignored by
// self-supervised pretraining.
DataPaths cmd_gen_data(const BenchConfig& cfg, const fs::path& out_dir);

// Reuses files from cmd_gen_data when their manifest matches the config,
// otherwise regenerates them.
emssl::GroundTruthSet ensure_data(const BenchConfig& cfg, const fs::path& out_dir);

// ---- pretraining ----------------------------------------------------------

enum class Method { emssl, drl };

std::string_view to_string(Method m);
Method parse_method(std::string_view name);

struct PretrainOutcome {
  model::InverseModel model;
  std::vector<emssl::IterationMetrics> metrics;  // one row per iteration (emssl)
  emssl::PrecisionStats test{};                  // final, full test split
  fs::path checkpoint;
};

model::InverseModel initial_model(const BenchConfig& cfg);

// Trains with `method`, writing checkpoint and metrics CSV. With `resume`
// an interrupted emssl run continues from its saved state.
PretrainOutcome cmd_pretrain(const BenchConfig& cfg, const fs::path& out_dir, Method method,
                             bool resume, std::ostream* progress);

// Loads the emssl checkpoint when it was produced by an equivalent config,
// otherwise trains it.
model::InverseModel ensure_pretrained(const BenchConfig& cfg, const fs::path& out_dir,
                                      std::ostream* progress, Method method = Method::emssl);

// ---- suites ---------------------------------------------------------------

struct SuiteTarget {
  std::size_t index = 0;
  kinematics::JointConfig start;
  kinematics::RelativePosition target_rel;
};

// Start uniform over the joint ranges, target reached by a uniform joint
// variation within the step bound. Target i depends only on (seed, i).
std::vector<SuiteTarget> sample_suite(const BenchConfig& cfg, std::size_t n);

reach::ReachTask make_task(const BenchConfig& cfg, const SuiteTarget& t, double resolution_deg,
                           reach::ThresholdMode mode);

// Runs fn(i) for i in [0, n) on `workers` threads. The first exception is
// rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

// One report per target, in target order.
std::vector<reach::ReachReport> run_suite(const BenchConfig& cfg, const model::InverseModel& im,
                                          const std::vector<SuiteTarget>& targets,
                                          reach::Strategy strategy, double resolution_deg,
                                          reach::ThresholdMode mode, reach::RaceMode race_mode,
                                          int workers);

struct SuiteSummary {
  std::size_t n = 0;
  std::size_t successes = 0;
  double mean_precision = 0.0;  // m
  double worst_precision = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_online_iterations = 0.0;
  std::size_t numeric_failures = 0;

  double success_rate() const { return n ? static_cast<double>(successes) / n : 0.0; }
};

SuiteSummary summarize(const std::vector<reach::ReachReport>& reports);

// ---- reports --------------------------------------------------------------

std::string report_to_json(const reach::ReachReport& r, std::size_t task_id);
reach::ReachReport report_from_json(const std::string& line, std::size_t* task_id = nullptr);

void write_reports(const fs::path& path, const std::vector<reach::ReachReport>& reports);
std::vector<reach::ReachReport> read_reports(const fs::path& path);

struct AuditResult {
  std::size_t n = 0;
  double max_discrepancy = 0.0;  // |replayed - reported| precision, m
  std::size_t unquantized_steps = 0;
  std::size_t success_mismatches = 0;

  bool ok(double tol = 1e-9) const {
    return max_discrepancy <= tol && unquantized_steps == 0 && success_mismatches == 0;
  }
};

AuditResult audit(const std::vector<reach::ReachReport>& reports,
                  const kinematics::ArmGeometry& geom);

// ---- commands -------------------------------------------------------------

struct ReachCommand {
  reach::Strategy strategy = reach::Strategy::parallel;
  double resolution_deg = 0.01;
  reach::ThresholdMode threshold_mode = reach::ThresholdMode::min_disp;
  std::size_t n_targets = 200;
  bool race = false;
  bool audit = false;
};

struct ReachOutcome {
  fs::path reports_path;
  SuiteSummary summary;
  AuditResult audit;
};

ReachOutcome cmd_reach(const BenchConfig& cfg, const fs::path& out_dir, const ReachCommand& cmd,
                       std::ostream* progress);

// Table numbers: 2, 4, 5, 6, 7. Returns the CSV paths written.
std::vector<fs::path> cmd_tables(const BenchConfig& cfg, const fs::path& out_dir,
                                 const std::vector<int>& tables, std::ostream* progress);

}  // namespace rp::bench
