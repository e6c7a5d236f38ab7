/*
 * reachprecise: high-precision reaching for a 6-DOF arm with quantized joints.
 *
 * C interface to the shared library. Objects are opaque handles created by
 * rp_*_create/load functions and released with the matching rp_*_free.
 * Every fallible call returns an rp_status; on failure rp_last_error()
 * describes the cause for the calling thread.
 *
 * Units at this boundary: angles in degrees, lengths in meters.
 */
#ifndef REACHPRECISE_H
#define REACHPRECISE_H

#include <stddef.h>
#include <stdint.h>

#if defined(RP_BUILDING_LIBRARY)
#define RP_API __attribute__((visibility("default")))
#else
#define RP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rp_status {
  RP_OK = 0,
  RP_ERR_INVALID_ARGUMENT = 1,
  RP_ERR_DOMAIN = 2,
  RP_ERR_OUT_OF_VIEW = 3,
  RP_ERR_DEGENERATE = 4,
  RP_ERR_NUMERIC = 5,
  RP_ERR_IO = 6,
  RP_ERR_CONFIG = 7,
  RP_ERR_AUDIT = 8,
  RP_ERR_INTERNAL = 9
} rp_status;

typedef struct rp_config rp_config;
typedef struct rp_model rp_model;
typedef struct rp_report rp_report;

/* Message for the last failed call on this thread; "" when none. */
RP_API const char* rp_last_error(void);
RP_API const char* rp_status_name(rp_status status);
RP_API const char* rp_version(void);

/* ---- configuration ---------------------------------------------------- */

/* scale: "desk" or "paper". */
RP_API rp_status rp_config_preset(const char* scale, rp_config** out);
/* JSON file; its "scale" field selects the preset it overrides. */
RP_API rp_status rp_config_load(const char* path, rp_config** out);
/* Loads the file named by REACH_PRECISE_CONFIG when set, else the preset. */
RP_API rp_status rp_config_default(const char* scale, rp_config** out);
RP_API rp_status rp_config_apply_json(rp_config* cfg, const char* json);
RP_API rp_status rp_config_set_seed(rp_config* cfg, uint64_t seed);
RP_API rp_status rp_config_set_workers(rp_config* cfg, int workers);
RP_API rp_status rp_config_set_out_dir(rp_config* cfg, const char* dir);
/* Writes 16 hex digits and a terminator; buf_len must be at least 17. */
RP_API rp_status rp_config_hash(const rp_config* cfg, char* buf, size_t buf_len);
/* Canonical JSON. *needed receives the size including the terminator. */
RP_API rp_status rp_config_to_json(const rp_config* cfg, char* buf, size_t buf_len,
                                   size_t* needed);
RP_API void rp_config_free(rp_config* cfg);

/* ---- kinematics and perception ----------------------------------------- */

/* Tip position (m) and orientation (row-major 3x3) in the base frame. */
RP_API rp_status rp_forward_kinematics(const rp_config* cfg, const double q_deg[6],
                                       double position_m[3], double rotation[9]);
/* Smallest single-joint single-step tip motion at q and the lever-arm
   small-angle value. */
RP_API rp_status rp_min_end_displacement(const rp_config* cfg, const double q_deg[6],
                                         double resolution_deg, double* exact_m,
                                         double* small_angle_m);
RP_API rp_status rp_max_relative_distance(const rp_config* cfg, double bound_deg,
                                          uint64_t n_samples, uint64_t seed, double* out_m);
/* Relative position of a base-frame target as seen by the configured
   perception mode from configuration q. */
RP_API rp_status rp_observe(const rp_config* cfg, const double target_base_m[3],
                            const double q_deg[6], double target_rel_m[3]);

/* ---- inverse model ------------------------------------------------------ */

/* Untrained network with the configured topology and seed. */
RP_API rp_status rp_model_create(const rp_config* cfg, rp_model** out);
RP_API rp_status rp_model_load(const char* path, rp_model** out);
RP_API rp_status rp_model_save(const rp_model* model, const char* path);
RP_API rp_status rp_model_infer(const rp_model* model, const double q_deg[6],
                                const double target_rel_m[3], double dq_deg[6]);
RP_API uint64_t rp_model_checksum(const rp_model* model);
RP_API void rp_model_free(rp_model* model);

/* ---- reaching ----------------------------------------------------------- */

/* strategy: basic, s1, s2, parallel or fixed-im.
   threshold_mode: "min" or "half". race != 0 runs the parallel strategy as a
   real two-thread race; otherwise both branches run to completion. */
RP_API rp_status rp_reach(const rp_config* cfg, const rp_model* model, const char* strategy,
                          const double start_deg[6], const double target_rel_m[3],
                          double resolution_deg, const char* threshold_mode, int race,
                          rp_report** out);
RP_API double rp_report_precision(const rp_report* report);
RP_API double rp_report_threshold(const rp_report* report);
RP_API int rp_report_success(const rp_report* report);
RP_API double rp_report_wall_time(const rp_report* report);
RP_API size_t rp_report_step_count(const rp_report* report);
RP_API rp_status rp_report_step(const rp_report* report, size_t index, double dq_deg[6]);
/* Precision recomputed by replaying the trajectory. */
RP_API rp_status rp_report_replay(const rp_config* cfg, const rp_report* report,
                                  double* precision_m);
RP_API rp_status rp_report_to_json(const rp_report* report, char* buf, size_t buf_len,
                                   size_t* needed);
RP_API void rp_report_free(rp_report* report);

/* ---- experiment commands ------------------------------------------------ */

typedef struct rp_suite_summary {
  size_t n;
  double mean_precision_m;
  double success_rate;
  double worst_precision_m;
  double mean_wall_time_s;
  double audit_max_discrepancy_m;
  size_t audit_unquantized_steps;
  int audited;
} rp_suite_summary;

/* Progress lines go to stderr when verbose is nonzero. */
RP_API rp_status rp_cmd_gen_data(const rp_config* cfg);
/* method: "emssl" or "drl". */
RP_API rp_status rp_cmd_pretrain(const rp_config* cfg, const char* method, int resume,
                                 int verbose);
/* Returns RP_ERR_AUDIT when audit is requested and a replayed precision
   differs from the reported one by more than 1e-9 m. */
RP_API rp_status rp_cmd_reach(const rp_config* cfg, const char* strategy, double resolution_deg,
                              const char* threshold_mode, size_t n_targets, int race, int audit,
                              int verbose, rp_suite_summary* out);
RP_API rp_status rp_cmd_tables(const rp_config* cfg, const int* tables, size_t n_tables,
                               int verbose);
RP_API rp_status rp_cmd_audit(const rp_config* cfg, const char* reports_path,
                              rp_suite_summary* out);

#ifdef __cplusplus
}
#endif

#endif /* REACHPRECISE_H */
