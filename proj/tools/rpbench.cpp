// rpbench: dataset generation, pretraining, reach suites, tables and audits.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 audit failure.

#include "reachprecise/reachprecise.h"

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAudit = 3;

struct ConfigDeleter {
  void operator()(rp_config* c) const { rp_config_free(c); }
};
using ConfigPtr = std::unique_ptr<rp_config, ConfigDeleter>;

int report_failure(rp_status s) {
  std::fprintf(stderr, "rpbench: %s: %s\n", rp_status_name(s), rp_last_error());
  if (s == RP_ERR_AUDIT) return kExitAudit;
  if (s == RP_ERR_INVALID_ARGUMENT || s == RP_ERR_CONFIG) return kExitUsage;
  return kExitFailure;
}

void print_summary(const rp_suite_summary& s) {
  std::printf("targets            %zu\n", s.n);
  std::printf("mean precision     %.6f mm\n", s.mean_precision_m * 1e3);
  std::printf("success rate       %.2f %%\n", s.success_rate * 100.0);
  std::printf("worst precision    %.6f mm\n", s.worst_precision_m * 1e3);
  std::printf("mean wall time     %.4f s\n", s.mean_wall_time_s);
  if (s.audited) {
    std::printf("audit discrepancy  %.3g m\n", s.audit_max_discrepancy_m);
    std::printf("unquantized steps  %zu\n", s.audit_unquantized_steps);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"High-precision reaching benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(rp_version()));

  std::string config_path;
  std::string scale;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string out_dir;
  bool quiet = false;

  app.add_option("--config", config_path, "JSON config file (falls back to REACH_PRECISE_CONFIG)")
      ->check(CLI::ExistingFile);
  app.add_option("--scale", scale, "Preset when no config file is given")
      ->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", seed, "Base seed for every random stream");
  app.add_option("--workers", workers, "Worker threads for suites (1 = reference mode)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");
  app.add_flag("-q,--quiet", quiet, "No progress output");

  auto* gen = app.add_subcommand("gen-data", "Generate the train/test dataset files");

  auto* pre = app.add_subcommand("pretrain", "Pretrain the inverse model");
  std::string method = "emssl";
  bool fresh = false;
  pre->add_option("--method", method, "emssl or drl (direct regression)")
      ->check(CLI::IsMember({"emssl", "drl"}));
  pre->add_flag("--fresh", fresh, "Ignore saved state and start over");

  auto* rch = app.add_subcommand("reach", "Run a reach suite and write per-target reports");
  std::string strategy = "parallel";
  double resolution = 0.01;
  std::string threshold_mode = "min";
  std::size_t targets = 200;
  bool race = false;
  bool audit = false;
  rch->add_option("--strategy", strategy)
      ->check(CLI::IsMember({"basic", "s1", "s2", "parallel", "fixed-im"}));
  rch->add_option("--resolution", resolution, "Joint angle resolution, degrees")
      ->check(CLI::PositiveNumber);
  rch->add_option("--threshold-mode", threshold_mode)->check(CLI::IsMember({"min", "half"}));
  rch->add_option("--targets", targets, "Number of suite targets")->check(CLI::PositiveNumber);
  rch->add_flag("--race", race, "Race the parallel branches on two threads");
  rch->add_flag("--audit", audit, "Replay every trajectory and verify the reported precision");

  auto* tab = app.add_subcommand("tables", "Produce result tables (CSV and text)");
  std::vector<int> tables;
  tab->add_option("--table", tables, "Table number (repeatable): 2, 4, 5, 6, 7")
      ->check(CLI::IsMember({2, 4, 5, 6, 7}));

  auto* aud = app.add_subcommand("audit", "Replay a reports file and verify every precision");
  std::string reports_path;
  aud->add_option("reports", reports_path, "reports.jsonl")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  rp_config* raw = nullptr;
  rp_status st = RP_OK;
  if (!config_path.empty()) {
    st = rp_config_load(config_path.c_str(), &raw);
  } else if (!scale.empty()) {
    st = rp_config_preset(scale.c_str(), &raw);
  } else {
    st = rp_config_default("desk", &raw);
  }
  if (st != RP_OK) return report_failure(st);
  ConfigPtr cfg(raw);

  if (seed) rp_config_set_seed(cfg.get(), *seed);
  if (workers > 0) rp_config_set_workers(cfg.get(), workers);
  if (!out_dir.empty()) rp_config_set_out_dir(cfg.get(), out_dir.c_str());
  const int verbose = quiet ? 0 : 1;

  if (*gen) {
    st = rp_cmd_gen_data(cfg.get());
  } else if (*pre) {
    st = rp_cmd_pretrain(cfg.get(), method.c_str(), fresh ? 0 : 1, verbose);
  } else if (*rch) {
    rp_suite_summary s{};
    st = rp_cmd_reach(cfg.get(), strategy.c_str(), resolution, threshold_mode.c_str(), targets,
                      race ? 1 : 0, audit ? 1 : 0, verbose, &s);
    if (st == RP_OK || st == RP_ERR_AUDIT) print_summary(s);
  } else if (*tab) {
    st = rp_cmd_tables(cfg.get(), tables.data(), tables.size(), verbose);
  } else if (*aud) {
    rp_suite_summary s{};
    st = rp_cmd_audit(cfg.get(), reports_path.c_str(), &s);
    if (st == RP_OK || st == RP_ERR_AUDIT) print_summary(s);
  }
  return st == RP_OK ? 0 : report_failure(st);
}
