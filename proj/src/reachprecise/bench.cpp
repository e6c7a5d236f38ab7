#include "reachprecise/bench.hpp"

#include "reachprecise/binio.hpp"
#include "reachprecise/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#ifndef RP_VERSION
#define RP_VERSION "0.0.0"
#endif
#ifndef RP_GIT_COMMIT
#define RP_GIT_COMMIT ""
#endif

namespace rp::bench {

namespace kin = rp::kinematics;
using nlohmann::json;
using reach::ReachReport;
using reach::Strategy;

std::string code_version() {
  std::string v = RP_VERSION;
  const std::string commit = RP_GIT_COMMIT;
  if (!commit.empty()) v += "+" + commit;
  return v;
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string mm(double m) { return fmt("%.6f", m * 1e3); }
std::string pct(double frac) { return fmt("%.2f", frac * 100.0); }

std::string res_tag(double deg) {
  std::string s = fmt("%g", deg);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool file_equals(const fs::path& path, const std::string& expected) {
  std::error_code ec;
  if (!fs::exists(path, ec)) return false;
  std::string s = read_text(path);
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s == expected;
}

// Paths inside CSV cells are relative to the tables directory so the bytes
// do not depend on where the output tree lives.
std::string rel(const fs::path& p, const fs::path& base) {
  return p.lexically_relative(base).generic_string();
}

void say(std::ostream* progress, const std::string& line) {
  if (progress) *progress << line << std::endl;
}

// Simple table writer: CSV plus an aligned text rendering with provenance.
struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Every row carries its provenance.
  std::string csv(const BenchConfig& cfg) const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells, const std::string& tail) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out += ',';
        out += cells[i];
      }
      out += tail + '\n';
    };
    line(header, ",config_hash,base_seed,code_version");
    const std::string tail = "," + cfg.hash() + "," + std::to_string(cfg.seed) + "," + code_version();
    for (const auto& r : rows) line(r, tail);
    return out;
  }

  std::string text(const BenchConfig& cfg) const {
    std::vector<std::size_t> width(header.size(), 0);
    for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
        width[i] = std::max(width[i], r[i].size());
    std::string out = title + "\n";
    out += "config " + cfg.hash() + "  seed " + std::to_string(cfg.seed) + "  code " +
           code_version() + "  scale " + cfg.scale + "\n\n";
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        out += cells[i];
        if (i + 1 < cells.size()) out += std::string(width[i] - cells[i].size() + 2, ' ');
      }
      out += '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out;
  }

  fs::path write(const fs::path& dir, const std::string& stem, const BenchConfig& cfg) const {
    const fs::path csv_path = dir / (stem + ".csv");
    write_text(csv_path, csv(cfg));
    write_text(dir / (stem + ".txt"), text(cfg));
    return csv_path;
  }
};

json joints_deg(const kin::Vec6& v) {
  json a = json::array();
  for (int i = 0; i < kin::kJoints; ++i) a.push_back(kin::rad_to_deg(v[i]));
  return a;
}

kin::Vec6 joints_from_deg(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != kin::kJoints) throw IoError("report: expected 6 joint values");
  kin::Vec6 v;
  for (int i = 0; i < kin::kJoints; ++i) v[i] = kin::deg_to_rad(a[static_cast<std::size_t>(i)]);
  return v;
}

}  // namespace

// ---- data -----------------------------------------------------------------

DataPaths data_paths(const fs::path& out_dir) {
  const fs::path d = out_dir / "data";
  return {d / "train.txt", d / "test.txt", d / "manifest.json"};
}

DataPaths cmd_gen_data(const BenchConfig& cfg, const fs::path& out_dir) {
  cfg.validate();
  const DataPaths paths = data_paths(out_dir);
  fs::create_directories(paths.train.parent_path());
  const std::uint64_t seed = config::derive_seed(cfg.seed, "dataset");
  const auto set = emssl::generate_labeled_dataset(cfg.geometry, cfg.dataset.n_total,
                                                   cfg.dataset.n_train, seed);
  emssl::write_samples(paths.train, set.train, true);
  emssl::write_samples(paths.test, set.test, true);
  const json manifest{{"seed", seed},
                      {"base_seed", cfg.seed},
                      {"n_total", cfg.dataset.n_total},
                      {"n_train", set.train.size()},
                      {"n_test", set.test.size()},
                      {"config_hash", cfg.pretrain_hash()},
                      {"code_version", code_version()},
                      {"columns",
                       "q1..q6 (deg), dp_x dp_y dp_z (m, tool frame), dq1..dq6 (deg)"}};
  write_text(paths.manifest, manifest.dump(2) + "\n");
  return paths;
}

emssl::GroundTruthSet ensure_data(const BenchConfig& cfg, const fs::path& out_dir) {
  const DataPaths paths = data_paths(out_dir);
  bool fresh = false;
  std::error_code ec;
  if (fs::exists(paths.manifest, ec) && fs::exists(paths.train, ec) && fs::exists(paths.test, ec)) {
    try {
      const json m = json::parse(read_text(paths.manifest));
      fresh = m.at("config_hash").get<std::string>() == cfg.pretrain_hash();
    } catch (const json::exception&) {
      fresh = false;
    }
  }
  if (!fresh) cmd_gen_data(cfg, out_dir);
  return {emssl::read_labeled(paths.train), emssl::read_labeled(paths.test)};
}

// ---- pretraining ----------------------------------------------------------

std::string_view to_string(Method m) { return m == Method::emssl ? "emssl" : "drl"; }

Method parse_method(std::string_view name) {
  if (name == "emssl") return Method::emssl;
  if (name == "drl") return Method::drl;
  throw InvalidArgument("unknown method '" + std::string(name) + "' (expected emssl or drl)");
}

model::InverseModel initial_model(const BenchConfig& cfg) {
  return model::InverseModel::initialized(
      cfg.model.layer_dims, model::Normalization::for_geometry(cfg.geometry, cfg.model.envelope_m),
      cfg.geometry.delta_bound, config::derive_seed(cfg.seed, "init"));
}

namespace {

emssl::PretrainConfig pretrain_settings(const BenchConfig& cfg) {
  emssl::PretrainConfig pc = cfg.pretrain;
  pc.seed = config::derive_seed(cfg.seed, "pretrain");
  return pc;
}

std::string metrics_csv(const std::vector<emssl::IterationMetrics>& metrics,
                        const std::string& config_hash) {
  std::string out =
      "iteration,mean_loss,noise_sigma,test_mean_mm,test_median_mm,test_p95_mm,test_max_mm,"
      "seconds,config_hash\n";
  for (const auto& m : metrics) {
    out += std::to_string(m.iteration) + "," + fmt("%.9g", m.mean_loss) + "," +
           fmt("%.9g", m.noise_sigma) + "," + mm(m.test.mean) + "," + mm(m.test.median) + "," +
           mm(m.test.p95) + "," + mm(m.test.max) + "," + fmt("%.3f", m.seconds) + "," +
           config_hash + "\n";
  }
  return out;
}

fs::path pretrain_dir(const fs::path& out_dir, Method m) {
  return out_dir / "pretrain" / std::string(to_string(m));
}

}  // namespace

PretrainOutcome cmd_pretrain(const BenchConfig& cfg, const fs::path& out_dir, Method method,
                             bool resume, std::ostream* progress) {
  cfg.validate();
  const auto data = ensure_data(cfg, out_dir);
  const emssl::PretrainConfig pc = pretrain_settings(cfg);
  const fs::path dir = pretrain_dir(out_dir, method);
  fs::create_directories(dir);
  const fs::path hash_file = dir / "config_hash";
  std::error_code ec;
  fs::remove(hash_file, ec);

  const auto unlabeled = emssl::strip_labels(data);
  const kin::JointResolution eval_res = kin::JointResolution::from_degrees(pc.eval_resolution_deg);

  PretrainOutcome out{initial_model(cfg), {}, {}, dir / "model.ckpt"};

  if (method == Method::emssl) {
    const fs::path state_dir = dir / "state";
    const fs::path state_hash = state_dir / "config_hash";
    emssl::PretrainState st = [&] {
      if (resume && fs::exists(state_dir / "state.json", ec) &&
          file_equals(state_hash, cfg.pretrain_hash())) {
        say(progress, "resuming pretraining from " + state_dir.string());
        return emssl::load_pretrain_state(state_dir, pc);
      }
      return emssl::PretrainState::fresh(initial_model(cfg), pc);
    }();
    fs::create_directories(state_dir);
    write_text(state_hash, cfg.pretrain_hash() + "\n");

    emssl::pretrain(unlabeled, cfg.geometry, pc, st, [&](const emssl::PretrainState& s) {
      emssl::save_pretrain_state(state_dir, s);
      const auto& m = s.metrics.back();
      say(progress, "iteration " + std::to_string(m.iteration) + "/" +
                        std::to_string(pc.iterations) + "  loss " + fmt("%.5g", m.mean_loss) +
                        "  test mean " + mm(m.test.mean) + " mm  (" + fmt("%.1f", m.seconds) +
                        " s)");
    });
    out.model = st.model;
    out.metrics = st.metrics;
    write_text(dir / "metrics.csv", metrics_csv(out.metrics, cfg.pretrain_hash()));
  } else {
    say(progress, "direct regression on " + std::to_string(data.train.size()) + " labeled samples");
    out.model = emssl::train_direct_regression(data.train, initial_model(cfg), pc);
  }

  model::save_checkpoint(out.checkpoint, out.model);
  out.test = emssl::evaluate_open_loop(out.model, unlabeled.test, cfg.geometry, eval_res);
  const json summary{{"method", std::string(to_string(method))},
                     {"test_mean_mm", out.test.mean * 1e3},
                     {"test_median_mm", out.test.median * 1e3},
                     {"test_p95_mm", out.test.p95 * 1e3},
                     {"test_max_mm", out.test.max * 1e3},
                     {"n_test", out.test.n},
                     {"eval_resolution_deg", pc.eval_resolution_deg},
                     {"checkpoint_checksum", binio::hex64(out.model.checksum())},
                     {"config_hash", cfg.pretrain_hash()},
                     {"code_version", code_version()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  write_text(hash_file, cfg.pretrain_hash() + "\n");
  say(progress, std::string(to_string(method)) + " test mean precision " + mm(out.test.mean) +
                    " mm over " + std::to_string(out.test.n) + " samples");
  return out;
}

model::InverseModel ensure_pretrained(const BenchConfig& cfg, const fs::path& out_dir,
                                      std::ostream* progress, Method method) {
  const fs::path dir = pretrain_dir(out_dir, method);
  if (file_equals(dir / "config_hash", cfg.pretrain_hash()) && fs::exists(dir / "model.ckpt")) {
    return model::load_checkpoint(dir / "model.ckpt");
  }
  return cmd_pretrain(cfg, out_dir, method, true, progress).model;
}

// ---- suites ---------------------------------------------------------------

std::vector<SuiteTarget> sample_suite(const BenchConfig& cfg, std::size_t n) {
  std::vector<SuiteTarget> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    kin::Rng rng(config::derive_seed(cfg.seed, "suite", i));
    SuiteTarget t;
    t.index = i;
    t.start = kin::sample_config(cfg.geometry, rng);
    const auto dq = kin::sample_delta(t.start, cfg.geometry.delta_bound, cfg.geometry, rng);
    t.target_rel = kin::displacement_in_tool_frame(t.start, dq, cfg.geometry);
    out.push_back(t);
  }
  return out;
}

reach::ReachTask make_task(const BenchConfig& cfg, const SuiteTarget& t, double resolution_deg,
                           reach::ThresholdMode mode) {
  reach::ReachTask task;
  task.start = t.start;
  task.target_rel = t.target_rel;
  task.resolution = kin::JointResolution::from_degrees(resolution_deg);
  task.threshold = reach::threshold_for(task.resolution, mode, cfg.geometry);
  task.online = cfg.online;
  return task;
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    for (std::size_t w = 0; w < k; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          {
            std::lock_guard lk(mu);
            if (error) return;
          }
          const std::size_t i = next.fetch_add(1);
          if (i >= n) return;
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lk(mu);
            if (!error) error = std::current_exception();
          }
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

std::vector<ReachReport> run_suite(const BenchConfig& cfg, const model::InverseModel& im,
                                   const std::vector<SuiteTarget>& targets, Strategy strategy,
                                   double resolution_deg, reach::ThresholdMode mode,
                                   reach::RaceMode race_mode, int workers) {
  std::vector<ReachReport> reports(targets.size());
  parallel_for(targets.size(), workers, [&](std::size_t i) {
    const auto task = make_task(cfg, targets[i], resolution_deg, mode);
    reports[i] = reach::run(task, im, strategy, cfg.geometry, race_mode, cfg.perception);
  });
  return reports;
}

SuiteSummary summarize(const std::vector<ReachReport>& reports) {
  SuiteSummary s;
  s.n = reports.size();
  for (const auto& r : reports) {
    s.successes += r.success ? 1 : 0;
    s.mean_precision += r.precision;
    s.worst_precision = std::max(s.worst_precision, r.precision);
    s.mean_wall_time_s += r.wall_time_s;
    s.mean_online_iterations += r.online_iterations;
    s.numeric_failures += r.numeric_failure ? 1 : 0;
  }
  if (s.n) {
    const double n = static_cast<double>(s.n);
    s.mean_precision /= n;
    s.mean_wall_time_s /= n;
    s.mean_online_iterations /= n;
  }
  return s;
}

// ---- reports --------------------------------------------------------------

std::string report_to_json(const ReachReport& r, std::size_t task_id) {
  json traj = json::array();
  for (const auto& dq : r.trajectory) traj.push_back(joints_deg(dq.deltas));
  const json j{{"task_id", task_id},
               {"strategy", std::string(reach::to_string(r.strategy))},
               {"branch", r.branch},
               {"provenance", r.provenance},
               {"start_deg", joints_deg(r.start.angles)},
               {"target_rel_m", {r.target_rel.p.x(), r.target_rel.p.y(), r.target_rel.p.z()}},
               {"resolution_deg", kin::rad_to_deg(r.resolution_rad)},
               {"threshold_m", r.threshold},
               {"precision_m", r.precision},
               {"success", r.success},
               {"trajectory_deg", traj},
               {"online_iterations", r.online_iterations},
               {"fs_steps", r.fs_steps},
               {"wall_time_s", r.wall_time_s},
               {"numeric_failure", r.numeric_failure},
               {"cancelled", r.cancelled}};
  return j.dump();
}

ReachReport report_from_json(const std::string& line, std::size_t* task_id) {
  try {
    const json j = json::parse(line);
    ReachReport r;
    r.strategy = reach::parse_strategy(j.at("strategy").get<std::string>());
    r.branch = j.at("branch").get<std::string>();
    r.provenance = j.at("provenance").get<std::string>();
    r.start.angles = joints_from_deg(j.at("start_deg"));
    const auto t = j.at("target_rel_m").get<std::vector<double>>();
    if (t.size() != 3) throw IoError("report: target_rel_m must have 3 values");
    r.target_rel.p = {t[0], t[1], t[2]};
    r.resolution_rad = kin::deg_to_rad(j.at("resolution_deg").get<double>());
    r.threshold = j.at("threshold_m").get<double>();
    r.precision = j.at("precision_m").get<double>();
    r.success = j.at("success").get<bool>();
    for (const auto& step : j.at("trajectory_deg")) r.trajectory.push_back({joints_from_deg(step)});
    r.online_iterations = j.at("online_iterations").get<int>();
    r.fs_steps = j.at("fs_steps").get<int>();
    r.wall_time_s = j.at("wall_time_s").get<double>();
    r.numeric_failure = j.at("numeric_failure").get<bool>();
    r.cancelled = j.at("cancelled").get<bool>();
    if (task_id) *task_id = j.at("task_id").get<std::size_t>();
    return r;
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed report: ") + e.what());
  }
}

void write_reports(const fs::path& path, const std::vector<ReachReport>& reports) {
  std::string text;
  for (std::size_t i = 0; i < reports.size(); ++i) text += report_to_json(reports[i], i) + "\n";
  write_text(path, text);
}

std::vector<ReachReport> read_reports(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<ReachReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(report_from_json(line));
  }
  return out;
}

AuditResult audit(const std::vector<ReachReport>& reports, const kin::ArmGeometry& geom) {
  AuditResult a;
  a.n = reports.size();
  for (const auto& r : reports) {
    const double replayed = reach::replay_precision(r, geom);
    a.max_discrepancy = std::max(a.max_discrepancy, std::abs(replayed - r.precision));
    const kin::JointResolution res{r.resolution_rad};
    for (const auto& dq : r.trajectory) {
      // Degrees at the report boundary; compare in steps of alpha.
      for (int i = 0; i < kin::kJoints; ++i) {
        const double steps = dq.deltas[i] / res.alpha;
        if (std::abs(steps - std::round(steps)) > 1e-6) ++a.unquantized_steps;
      }
    }
    if ((replayed < r.threshold) != r.success) ++a.success_mismatches;
  }
  return a;
}

// ---- commands -------------------------------------------------------------

ReachOutcome cmd_reach(const BenchConfig& cfg, const fs::path& out_dir, const ReachCommand& cmd,
                       std::ostream* progress) {
  cfg.validate();
  const auto im = ensure_pretrained(cfg, out_dir, progress);
  const auto targets = sample_suite(cfg, cmd.n_targets);
  const auto race = cmd.race ? reach::RaceMode::race : reach::RaceMode::deterministic;
  const auto reports = run_suite(cfg, im, targets, cmd.strategy, cmd.resolution_deg,
                                 cmd.threshold_mode, race, cfg.workers);

  const fs::path dir = out_dir / "reach" /
                       (std::string(reach::to_string(cmd.strategy)) + "_" +
                        res_tag(cmd.resolution_deg) + "_" +
                        std::string(reach::to_string(cmd.threshold_mode)));
  ReachOutcome out;
  out.reports_path = dir / "reports.jsonl";
  write_reports(out.reports_path, reports);
  out.summary = summarize(reports);
  const json summary{{"strategy", std::string(reach::to_string(cmd.strategy))},
                     {"resolution_deg", cmd.resolution_deg},
                     {"threshold_mode", std::string(reach::to_string(cmd.threshold_mode))},
                     {"race_mode", cmd.race ? "race" : "deterministic"},
                     {"n", out.summary.n},
                     {"mean_precision_mm", out.summary.mean_precision * 1e3},
                     {"success_rate_pct", out.summary.success_rate() * 100.0},
                     {"worst_precision_mm", out.summary.worst_precision * 1e3},
                     {"mean_wall_time_s", out.summary.mean_wall_time_s},
                     {"numeric_failures", out.summary.numeric_failures},
                     {"seed", cfg.seed},
                     {"config_hash", cfg.hash()},
                     {"code_version", code_version()}};
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  say(progress, std::string(reach::to_string(cmd.strategy)) + " @ " + fmt("%g", cmd.resolution_deg) +
                    " deg: mean " + mm(out.summary.mean_precision) + " mm, success " +
                    pct(out.summary.success_rate()) + " %, worst " +
                    mm(out.summary.worst_precision) + " mm, mean time " +
                    fmt("%.4f", out.summary.mean_wall_time_s) + " s");
  if (cmd.audit) {
    out.audit = audit(read_reports(out.reports_path), cfg.geometry);
    say(progress, "audit: max discrepancy " + fmt("%.3g", out.audit.max_discrepancy) + " m, " +
                      std::to_string(out.audit.unquantized_steps) + " unquantized steps, " +
                      std::to_string(out.audit.success_mismatches) + " success mismatches");
  }
  return out;
}

namespace {

fs::path table2(const BenchConfig& cfg, const fs::path& dir, std::ostream* progress) {
  Table t{"Maximum relative distance per joint variation bound",
          {"bound_deg", "max_relative_distance_cm", "samples", "envelope_seed"}, {}};
  const double bounds[] = {1.0, 5.0, 10.0};
  for (std::size_t i = 0; i < 3; ++i) {
    const std::uint64_t seed = config::derive_seed(cfg.seed, "envelope", i);
    const double d = kin::max_relative_distance(kin::deg_to_rad(bounds[i]), cfg.geometry,
                                                cfg.suite.envelope_samples, seed);
    t.rows.push_back({fmt("%g", bounds[i]), fmt("%.4f", d * 100.0),
                      std::to_string(cfg.suite.envelope_samples), std::to_string(seed)});
    say(progress, "table 2: +/-" + fmt("%g", bounds[i]) + " deg -> " + fmt("%.4f", d * 100.0) + " cm");
  }
  return t.write(dir, "table2", cfg);
}

fs::path table4(const BenchConfig& cfg, const fs::path& out_dir, const fs::path& dir,
                std::ostream* progress) {
  const auto data = ensure_data(cfg, out_dir);
  const auto test = emssl::strip_labels(data).test;
  const auto res = kin::JointResolution::from_degrees(cfg.pretrain.eval_resolution_deg);
  Table t{"Open-loop precision after pretraining (relative-position inverse model)",
          {"method", "mean_precision_mm", "median_mm", "p95_mm", "max_mm", "n_test",
           "iterations", "resolution_deg", "checkpoint"},
          {}};
  for (Method m : {Method::drl, Method::emssl}) {
    const auto im = ensure_pretrained(cfg, out_dir, progress, m);
    const auto s = emssl::evaluate_open_loop(im, test, cfg.geometry, res);
    t.rows.push_back({std::string(to_string(m)), mm(s.mean), mm(s.median), mm(s.p95), mm(s.max),
                      std::to_string(s.n), std::to_string(cfg.pretrain.iterations),
                      fmt("%g", cfg.pretrain.eval_resolution_deg),
                      rel(pretrain_dir(out_dir, m) / "model.ckpt", dir)});
    say(progress, "table 4: " + std::string(to_string(m)) + " mean " + mm(s.mean) + " mm");
  }
  return t.write(dir, "table4", cfg);
}

std::vector<std::string> suite_row(const std::string& label, double res_deg,
                                   const std::vector<ReachReport>& reports, const std::string& raw) {
  const auto s = summarize(reports);
  return {label,
          fmt("%g", res_deg),
          std::to_string(s.n),
          mm(s.mean_precision),
          pct(s.success_rate()),
          mm(s.worst_precision),
          fmt("%.2f", s.mean_online_iterations),
          raw};
}

const std::vector<std::string> kSuiteHeader{"method", "resolution_deg", "n",
                                            "mean_precision_mm", "success_rate_pct",
                                            "worst_precision_mm", "mean_online_iterations",
                                            "reports"};

fs::path table5(const BenchConfig& cfg, const model::InverseModel& im, const fs::path& dir,
                std::ostream* progress) {
  const double res = 0.01;
  const auto targets = sample_suite(cfg, cfg.suite.study_targets);
  const auto mode = reach::ThresholdMode::min_disp;
  const auto det = reach::RaceMode::deterministic;
  Table t{"Reaching with and without online updating of the inverse model", kSuiteHeader, {}};

  BenchConfig one_step = cfg;
  one_step.online.iterations = 1;
  auto open_loop = run_suite(one_step, im, targets, Strategy::fixed_im, res, mode, det, cfg.workers);
  for (auto& r : open_loop) r.branch = "open-loop";
  const auto fixed = run_suite(cfg, im, targets, Strategy::fixed_im, res, mode, det, cfg.workers);
  const auto online = run_suite(cfg, im, targets, Strategy::parallel, res, mode, det, cfg.workers);

  const std::pair<const char*, const std::vector<ReachReport>*> cells[] = {
      {"open-loop", &open_loop}, {"fixed-im", &fixed}, {"online", &online}};
  for (const auto& [name, reps] : cells) {
    const fs::path raw = dir / "table5" / (std::string(name) + ".jsonl");
    write_reports(raw, *reps);
    t.rows.push_back(suite_row(name, res, *reps, rel(raw, dir)));
    say(progress, "table 5: " + std::string(name) + " mean " + mm(summarize(*reps).mean_precision) +
                      " mm");
  }
  return t.write(dir, "table5", cfg);
}

fs::path table6(const BenchConfig& cfg, const model::InverseModel& im, const fs::path& dir,
                std::ostream* progress) {
  const auto targets = sample_suite(cfg, cfg.suite.study_targets);
  Table t{"Precision with half of the minimum displacement as threshold",
          {"resolution_deg", "min_displacement_mm", "min_displacement_reference_mm",
           "half_min_displacement_mm", "mean_precision_mm", "ratio_to_half", "success_rate_pct",
           "n", "reports"},
          {}};
  for (double res_deg : cfg.suite.resolutions_deg) {
    const auto res = kin::JointResolution::from_degrees(res_deg);
    const double thr = kin::min_displacement_threshold(res, cfg.geometry);
    const double ref = kin::min_end_displacement(cfg.geometry.reference_config, res, cfg.geometry).exact;
    const auto reps = run_suite(cfg, im, targets, Strategy::parallel, res_deg,
                                reach::ThresholdMode::half_min_disp,
                                reach::RaceMode::deterministic, cfg.workers);
    const fs::path raw = dir / "table6" / ("parallel_" + res_tag(res_deg) + ".jsonl");
    write_reports(raw, reps);
    const auto s = summarize(reps);
    t.rows.push_back({fmt("%g", res_deg), mm(thr), mm(ref), mm(0.5 * thr), mm(s.mean_precision),
                      fmt("%.4f", s.mean_precision / (0.5 * thr)), pct(s.success_rate()),
                      std::to_string(s.n), rel(raw, dir)});
    say(progress, "table 6: " + fmt("%g", res_deg) + " deg mean " + mm(s.mean_precision) +
                      " mm vs half " + mm(0.5 * thr) + " mm");
  }
  return t.write(dir, "table6", cfg);
}

std::vector<fs::path> table7(const BenchConfig& cfg, const model::InverseModel& im,
                             const fs::path& dir, std::ostream* progress) {
  const auto targets = sample_suite(cfg, cfg.suite.n_targets);
  const auto mode = reach::ThresholdMode::min_disp;
  const auto det = reach::RaceMode::deterministic;
  Table t{"Strategy comparison", kSuiteHeader, {}};
  Table timing{"Mean computation time per target (monotonic clock, pretraining excluded)",
               {"method", "resolution_deg", "n", "mean_wall_time_s", "timing_mode", "workers"},
               {}};

  auto wants = [&](Strategy s) {
    return std::find(cfg.suite.strategies.begin(), cfg.suite.strategies.end(), s) !=
           cfg.suite.strategies.end();
  };
  const bool want_parallel = wants(Strategy::parallel);

  for (double res_deg : cfg.suite.resolutions_deg) {
    std::vector<std::pair<Strategy, std::vector<ReachReport>>> cells;
    for (Strategy s : {Strategy::basic, Strategy::s1, Strategy::s2}) {
      if (wants(s) || (want_parallel && s != Strategy::basic))
        cells.emplace_back(s, run_suite(cfg, im, targets, s, res_deg, mode, det, cfg.workers));
    }
    auto find = [&](Strategy s) -> const std::vector<ReachReport>* {
      for (const auto& [k, v] : cells)
        if (k == s) return &v;
      return nullptr;
    };
    if (want_parallel) {
      // Same branches, reproducible selection.
      const auto* a = find(Strategy::s1);
      const auto* b = find(Strategy::s2);
      std::vector<ReachReport> par(targets.size());
      for (std::size_t i = 0; i < targets.size(); ++i)
        par[i] = reach::select_deterministic((*a)[i], (*b)[i], make_task(cfg, targets[i], res_deg, mode));
      cells.emplace_back(Strategy::parallel, std::move(par));
    }

    for (const auto& [s, reps] : cells) {
      if (!wants(s)) continue;
      const std::string name(reach::to_string(s));
      const fs::path raw = dir / "table7" / (name + "_" + res_tag(res_deg) + ".jsonl");
      write_reports(raw, reps);
      t.rows.push_back(suite_row(name, res_deg, reps, rel(raw, dir)));
      const auto sum = summarize(reps);
      say(progress, "table 7: " + name + " @ " + fmt("%g", res_deg) + " deg: mean " +
                        mm(sum.mean_precision) + " mm, success " + pct(sum.success_rate()) +
                        " %, worst " + mm(sum.worst_precision) + " mm");
      if (s != Strategy::parallel) {
        timing.rows.push_back({name, fmt("%g", res_deg), std::to_string(sum.n),
                               fmt("%.5f", sum.mean_wall_time_s), "sequential",
                               std::to_string(cfg.workers)});
      }
    }

    if (want_parallel) {
      // Real race on two threads, one target at a time.
      const auto raced = run_suite(cfg, im, targets, Strategy::parallel, res_deg, mode,
                                   reach::RaceMode::race, 1);
      const fs::path raw = dir / "table7" / ("parallel_race_" + res_tag(res_deg) + ".jsonl");
      write_reports(raw, raced);
      const auto sum = summarize(raced);
      timing.rows.push_back({"parallel", fmt("%g", res_deg), std::to_string(sum.n),
                             fmt("%.5f", sum.mean_wall_time_s), "race", "1"});
      say(progress, "table 7: parallel race @ " + fmt("%g", res_deg) + " deg: mean time " +
                        fmt("%.4f", sum.mean_wall_time_s) + " s, success " +
                        pct(sum.success_rate()) + " %");
    }
  }
  return {t.write(dir, "table7", cfg), timing.write(dir, "table7_timing", cfg)};
}

}  // namespace

std::vector<fs::path> cmd_tables(const BenchConfig& cfg, const fs::path& out_dir,
                                 const std::vector<int>& tables, std::ostream* progress) {
  cfg.validate();
  for (int n : tables) {
    if (n != 2 && n != 4 && n != 5 && n != 6 && n != 7)
      throw InvalidArgument("unknown table " + std::to_string(n) + " (expected 2, 4, 5, 6 or 7)");
  }
  const fs::path dir = out_dir / "tables";
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::optional<model::InverseModel> im;
  auto pretrained = [&]() -> const model::InverseModel& {
    if (!im) im = ensure_pretrained(cfg, out_dir, progress);
    return *im;
  };
  for (int n : tables) {
    switch (n) {
      case 2: written.push_back(table2(cfg, dir, progress)); break;
      case 4: written.push_back(table4(cfg, out_dir, dir, progress)); break;
      case 5: written.push_back(table5(cfg, pretrained(), dir, progress)); break;
      case 6: written.push_back(table6(cfg, pretrained(), dir, progress)); break;
      case 7:
        for (auto& p : table7(cfg, pretrained(), dir, progress)) written.push_back(p);
        break;
    }
  }
  return written;
}

}  // namespace rp::bench
