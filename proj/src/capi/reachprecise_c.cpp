#include "reachprecise/reachprecise.h"

#include "reachprecise/bench.hpp"
#include "reachprecise/config.hpp"
#include "reachprecise/errors.hpp"
#include "reachprecise/kinematics.hpp"
#include "reachprecise/model.hpp"
#include "reachprecise/perception.hpp"
#include "reachprecise/reach.hpp"

#include <cstring>
#include <exception>
#include <iostream>
#include <new>
#include <string>

struct rp_config {
  rp::config::BenchConfig cfg;
};

struct rp_model {
  rp::model::InverseModel model;
};

struct rp_report {
  rp::reach::ReachReport report;
};

namespace {

namespace kin = rp::kinematics;

thread_local std::string g_last_error;

rp_status status_for(rp::ErrorKind kind) {
  switch (kind) {
    case rp::ErrorKind::invalid_argument: return RP_ERR_INVALID_ARGUMENT;
    case rp::ErrorKind::domain: return RP_ERR_DOMAIN;
    case rp::ErrorKind::out_of_view: return RP_ERR_OUT_OF_VIEW;
    case rp::ErrorKind::degenerate_geometry: return RP_ERR_DEGENERATE;
    case rp::ErrorKind::numeric: return RP_ERR_NUMERIC;
    case rp::ErrorKind::io: return RP_ERR_IO;
    case rp::ErrorKind::config: return RP_ERR_CONFIG;
    case rp::ErrorKind::audit: return RP_ERR_AUDIT;
  }
  return RP_ERR_INTERNAL;
}

rp_status fail(rp_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn>
rp_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const rp::Error& e) {
    return fail(status_for(e.kind()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(RP_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(RP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(RP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(RP_ERR_INTERNAL, "unknown error");
  }
}

#define RP_REQUIRE(cond, what) \
  if (!(cond)) return fail(RP_ERR_INVALID_ARGUMENT, what)

kin::JointConfig joints(const double deg[6]) {
  kin::JointConfig q;
  for (int i = 0; i < kin::kJoints; ++i) q.angles[i] = kin::deg_to_rad(deg[i]);
  return q;
}

rp_status copy_string(const std::string& s, char* buf, size_t buf_len, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (buf == nullptr) return RP_OK;
  if (buf_len < s.size() + 1) return fail(RP_ERR_INVALID_ARGUMENT, "buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
  return RP_OK;
}

std::ostream* progress(int verbose) { return verbose ? &std::cerr : nullptr; }

void fill(rp_suite_summary* out, const rp::bench::SuiteSummary& s) {
  out->n = s.n;
  out->mean_precision_m = s.mean_precision;
  out->success_rate = s.success_rate();
  out->worst_precision_m = s.worst_precision;
  out->mean_wall_time_s = s.mean_wall_time_s;
}

}  // namespace

extern "C" {

const char* rp_last_error(void) { return g_last_error.c_str(); }

const char* rp_status_name(rp_status status) {
  switch (status) {
    case RP_OK: return "ok";
    case RP_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RP_ERR_DOMAIN: return "domain error";
    case RP_ERR_OUT_OF_VIEW: return "out of view";
    case RP_ERR_DEGENERATE: return "degenerate geometry";
    case RP_ERR_NUMERIC: return "numeric failure";
    case RP_ERR_IO: return "i/o error";
    case RP_ERR_CONFIG: return "configuration error";
    case RP_ERR_AUDIT: return "audit failure";
    case RP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* rp_version(void) {
  static const std::string v = rp::bench::code_version();
  return v.c_str();
}

// ---- configuration ----------------------------------------------------------

rp_status rp_config_preset(const char* scale, rp_config** out) {
  RP_REQUIRE(scale && out, "null argument");
  return guarded([&] {
    *out = new rp_config{rp::config::BenchConfig::preset(scale)};
    return RP_OK;
  });
}

rp_status rp_config_load(const char* path, rp_config** out) {
  RP_REQUIRE(path && out, "null argument");
  return guarded([&] {
    auto cfg = rp::config::BenchConfig::load(path);
    cfg.validate();
    *out = new rp_config{std::move(cfg)};
    return RP_OK;
  });
}

rp_status rp_config_default(const char* scale, rp_config** out) {
  RP_REQUIRE(scale && out, "null argument");
  if (const auto env = rp::config::config_path_from_env()) return rp_config_load(env->c_str(), out);
  return rp_config_preset(scale, out);
}

rp_status rp_config_apply_json(rp_config* cfg, const char* json) {
  RP_REQUIRE(cfg && json, "null argument");
  return guarded([&] {
    auto next = cfg->cfg;
    next.apply_json_text(json);
    next.validate();
    cfg->cfg = std::move(next);
    return RP_OK;
  });
}

rp_status rp_config_set_seed(rp_config* cfg, uint64_t seed) {
  RP_REQUIRE(cfg, "null config");
  cfg->cfg.seed = seed;
  return RP_OK;
}

rp_status rp_config_set_workers(rp_config* cfg, int workers) {
  RP_REQUIRE(cfg, "null config");
  RP_REQUIRE(workers >= 1, "workers must be >= 1");
  cfg->cfg.workers = workers;
  return RP_OK;
}

rp_status rp_config_set_out_dir(rp_config* cfg, const char* dir) {
  RP_REQUIRE(cfg && dir && *dir, "empty output directory");
  cfg->cfg.out_dir = dir;
  return RP_OK;
}

rp_status rp_config_hash(const rp_config* cfg, char* buf, size_t buf_len) {
  RP_REQUIRE(cfg && buf, "null argument");
  return guarded([&] { return copy_string(cfg->cfg.hash(), buf, buf_len, nullptr); });
}

rp_status rp_config_to_json(const rp_config* cfg, char* buf, size_t buf_len, size_t* needed) {
  RP_REQUIRE(cfg, "null config");
  return guarded([&] { return copy_string(cfg->cfg.to_json_text(), buf, buf_len, needed); });
}

void rp_config_free(rp_config* cfg) { delete cfg; }

// ---- kinematics and perception -------------------------------------------------

rp_status rp_forward_kinematics(const rp_config* cfg, const double q_deg[6], double position_m[3],
                                double rotation[9]) {
  RP_REQUIRE(cfg && q_deg && position_m, "null argument");
  return guarded([&] {
    const auto pose = kin::forward_kinematics(joints(q_deg), cfg->cfg.geometry);
    for (int i = 0; i < 3; ++i) position_m[i] = pose.position[i];
    if (rotation)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rotation[r * 3 + c] = pose.orientation(r, c);
    return RP_OK;
  });
}

rp_status rp_min_end_displacement(const rp_config* cfg, const double q_deg[6],
                                  double resolution_deg, double* exact_m, double* small_angle_m) {
  RP_REQUIRE(cfg && q_deg, "null argument");
  return guarded([&] {
    const auto md = kin::min_end_displacement(
        joints(q_deg), kin::JointResolution::from_degrees(resolution_deg), cfg->cfg.geometry);
    if (exact_m) *exact_m = md.exact;
    if (small_angle_m) *small_angle_m = md.small_angle_estimate;
    return RP_OK;
  });
}

rp_status rp_max_relative_distance(const rp_config* cfg, double bound_deg, uint64_t n_samples,
                                   uint64_t seed, double* out_m) {
  RP_REQUIRE(cfg && out_m, "null argument");
  return guarded([&] {
    *out_m = kin::max_relative_distance(kin::deg_to_rad(bound_deg), cfg->cfg.geometry, n_samples,
                                        seed);
    return RP_OK;
  });
}

rp_status rp_observe(const rp_config* cfg, const double target_base_m[3], const double q_deg[6],
                     double target_rel_m[3]) {
  RP_REQUIRE(cfg && target_base_m && q_deg && target_rel_m, "null argument");
  return guarded([&] {
    const auto& p = cfg->cfg.perception;
    const auto rel = rp::perception::observe(
        kin::Vec3(target_base_m[0], target_base_m[1], target_base_m[2]), joints(q_deg), p.mode,
        p.rig, cfg->cfg.geometry, p.fallback_to_truth);
    for (int i = 0; i < 3; ++i) target_rel_m[i] = rel.p[i];
    return RP_OK;
  });
}

// ---- inverse model ----------------------------------------------------------

rp_status rp_model_create(const rp_config* cfg, rp_model** out) {
  RP_REQUIRE(cfg && out, "null argument");
  return guarded([&] {
    *out = new rp_model{rp::bench::initial_model(cfg->cfg)};
    return RP_OK;
  });
}

rp_status rp_model_load(const char* path, rp_model** out) {
  RP_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new rp_model{rp::model::load_checkpoint(path)};
    return RP_OK;
  });
}

rp_status rp_model_save(const rp_model* model, const char* path) {
  RP_REQUIRE(model && path, "null argument");
  return guarded([&] {
    rp::model::save_checkpoint(path, model->model);
    return RP_OK;
  });
}

rp_status rp_model_infer(const rp_model* model, const double q_deg[6],
                         const double target_rel_m[3], double dq_deg[6]) {
  RP_REQUIRE(model && q_deg && target_rel_m && dq_deg, "null argument");
  return guarded([&] {
    const auto dq = model->model.infer(
        joints(q_deg), {kin::Vec3(target_rel_m[0], target_rel_m[1], target_rel_m[2])});
    for (int i = 0; i < kin::kJoints; ++i) dq_deg[i] = kin::rad_to_deg(dq.deltas[i]);
    return RP_OK;
  });
}

uint64_t rp_model_checksum(const rp_model* model) { return model ? model->model.checksum() : 0; }

void rp_model_free(rp_model* model) { delete model; }

// ---- reaching ----------------------------------------------------------------

rp_status rp_reach(const rp_config* cfg, const rp_model* model, const char* strategy,
                   const double start_deg[6], const double target_rel_m[3],
                   double resolution_deg, const char* threshold_mode, int race, rp_report** out) {
  RP_REQUIRE(cfg && model && strategy && start_deg && target_rel_m && out, "null argument");
  return guarded([&] {
    const auto which = rp::reach::parse_strategy(strategy);
    const auto mode = rp::reach::parse_threshold_mode(threshold_mode ? threshold_mode : "min");
    rp::bench::SuiteTarget t;
    t.start = joints(start_deg);
    t.target_rel.p = kin::Vec3(target_rel_m[0], target_rel_m[1], target_rel_m[2]);
    const auto task = rp::bench::make_task(cfg->cfg, t, resolution_deg, mode);
    auto report = rp::reach::run(task, model->model, which, cfg->cfg.geometry,
                                 race ? rp::reach::RaceMode::race
                                      : rp::reach::RaceMode::deterministic,
                                 cfg->cfg.perception);
    *out = new rp_report{std::move(report)};
    return RP_OK;
  });
}

double rp_report_precision(const rp_report* r) { return r ? r->report.precision : -1.0; }
double rp_report_threshold(const rp_report* r) { return r ? r->report.threshold : -1.0; }
int rp_report_success(const rp_report* r) { return r && r->report.success ? 1 : 0; }
double rp_report_wall_time(const rp_report* r) { return r ? r->report.wall_time_s : -1.0; }
size_t rp_report_step_count(const rp_report* r) { return r ? r->report.trajectory.size() : 0; }

rp_status rp_report_step(const rp_report* r, size_t index, double dq_deg[6]) {
  RP_REQUIRE(r && dq_deg, "null argument");
  RP_REQUIRE(index < r->report.trajectory.size(), "step index out of range");
  const auto& dq = r->report.trajectory[index];
  for (int i = 0; i < kin::kJoints; ++i) dq_deg[i] = kin::rad_to_deg(dq.deltas[i]);
  return RP_OK;
}

rp_status rp_report_replay(const rp_config* cfg, const rp_report* r, double* precision_m) {
  RP_REQUIRE(cfg && r && precision_m, "null argument");
  return guarded([&] {
    *precision_m = rp::reach::replay_precision(r->report, cfg->cfg.geometry);
    return RP_OK;
  });
}

rp_status rp_report_to_json(const rp_report* r, char* buf, size_t buf_len, size_t* needed) {
  RP_REQUIRE(r, "null report");
  return guarded(
      [&] { return copy_string(rp::bench::report_to_json(r->report, 0), buf, buf_len, needed); });
}

void rp_report_free(rp_report* r) { delete r; }

// ---- experiment commands ---------------------------------------------------

rp_status rp_cmd_gen_data(const rp_config* cfg) {
  RP_REQUIRE(cfg, "null config");
  return guarded([&] {
    rp::bench::cmd_gen_data(cfg->cfg, cfg->cfg.out_dir);
    return RP_OK;
  });
}

rp_status rp_cmd_pretrain(const rp_config* cfg, const char* method, int resume, int verbose) {
  RP_REQUIRE(cfg && method, "null argument");
  return guarded([&] {
    rp::bench::cmd_pretrain(cfg->cfg, cfg->cfg.out_dir, rp::bench::parse_method(method),
                            resume != 0, progress(verbose));
    return RP_OK;
  });
}

rp_status rp_cmd_reach(const rp_config* cfg, const char* strategy, double resolution_deg,
                       const char* threshold_mode, size_t n_targets, int race, int audit,
                       int verbose, rp_suite_summary* out) {
  RP_REQUIRE(cfg && strategy, "null argument");
  RP_REQUIRE(n_targets > 0, "n_targets must be positive");
  return guarded([&] {
    rp::bench::ReachCommand cmd;
    cmd.strategy = rp::reach::parse_strategy(strategy);
    cmd.resolution_deg = resolution_deg;
    cmd.threshold_mode = rp::reach::parse_threshold_mode(threshold_mode ? threshold_mode : "min");
    cmd.n_targets = n_targets;
    cmd.race = race != 0;
    cmd.audit = audit != 0;
    const auto res = rp::bench::cmd_reach(cfg->cfg, cfg->cfg.out_dir, cmd, progress(verbose));
    if (out) {
      *out = rp_suite_summary{};
      fill(out, res.summary);
      out->audited = cmd.audit ? 1 : 0;
      out->audit_max_discrepancy_m = res.audit.max_discrepancy;
      out->audit_unquantized_steps = res.audit.unquantized_steps;
    }
    if (cmd.audit && !res.audit.ok())
      return fail(RP_ERR_AUDIT, "audit failed for " + res.reports_path.string());
    return RP_OK;
  });
}

rp_status rp_cmd_tables(const rp_config* cfg, const int* tables, size_t n_tables, int verbose) {
  RP_REQUIRE(cfg && (tables || n_tables == 0), "null argument");
  return guarded([&] {
    std::vector<int> list(tables, tables + n_tables);
    if (list.empty()) list = {2, 4, 5, 6, 7};
    rp::bench::cmd_tables(cfg->cfg, cfg->cfg.out_dir, list, progress(verbose));
    return RP_OK;
  });
}

rp_status rp_cmd_audit(const rp_config* cfg, const char* reports_path, rp_suite_summary* out) {
  RP_REQUIRE(cfg && reports_path, "null argument");
  return guarded([&] {
    const auto reports = rp::bench::read_reports(reports_path);
    const auto a = rp::bench::audit(reports, cfg->cfg.geometry);
    if (out) {
      *out = rp_suite_summary{};
      fill(out, rp::bench::summarize(reports));
      out->audited = 1;
      out->audit_max_discrepancy_m = a.max_discrepancy;
      out->audit_unquantized_steps = a.unquantized_steps;
    }
    if (!a.ok())
      return fail(RP_ERR_AUDIT, std::string("audit failed for ") + reports_path);
    return RP_OK;
  });
}

}  // extern "C"
