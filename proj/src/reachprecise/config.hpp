#pragma once

// Benchmark configuration: presets, JSON overrides and seed derivation.
//
// Angles are degrees and lengths meters in every JSON field. A config file
// names a preset through "scale" and overrides any subset of its fields.

#include "reachprecise/emssl.hpp"
#include "reachprecise/kinematics.hpp"
#include "reachprecise/perception.hpp"
#include "reachprecise/reach.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rp::config {

inline constexpr const char* kConfigEnvVar = "REACH_PRECISE_CONFIG";

struct DatasetConfig {
  std::size_t n_total = 28000;
  std::size_t n_train = 20000;
};

struct ModelConfig {
  std::vector<int> layer_dims{9, 256, 256, 128, 6};
  double envelope_m = 0.2226;  // relative-position normalization scale
};

struct SuiteConfig {
  std::size_t n_targets = 1000;    // strategy comparison
  std::size_t study_targets = 200;  // baseline and half-threshold studies
  std::vector<double> resolutions_deg{0.01, 0.1, 1.0};
  std::vector<reach::Strategy> strategies{reach::Strategy::basic, reach::Strategy::s1,
                                          reach::Strategy::s2, reach::Strategy::parallel};
  reach::ThresholdMode threshold_mode = reach::ThresholdMode::min_disp;
  std::size_t envelope_samples = 1000000;
};

struct BenchConfig {
  std::string scale = "desk";
  kinematics::ArmGeometry geometry = kinematics::ArmGeometry::ur3();
  reach::PerceptionSettings perception{};
  DatasetConfig dataset{};
  ModelConfig model{};
  emssl::PretrainConfig pretrain{};
  reach::OnlineSettings online{};
  SuiteConfig suite{};
  std::uint64_t seed = 20240607;
  int workers = 1;
  std::filesystem::path out_dir = "out";

  // "desk" or "paper"; throws ConfigError otherwise.
  static BenchConfig preset(std::string_view scale);

  // Reads a JSON document: its "scale" (default desk) selects the preset,
  // remaining fields override it.
  static BenchConfig from_json_text(std::string_view text);
  static BenchConfig load(const std::filesystem::path& path);

  // Applies a JSON object of overrides on top of this config.
  void apply_json_text(std::string_view text);

  // Canonical JSON (sorted keys, fixed formatting).
  std::string to_json_text() const;

  // FNV-1a of the canonical JSON, 16 hex digits.
  std::string hash() const;

  // Hash of the fields that determine the dataset and pretrained model.
  std::string pretrain_hash() const;

  // Throws ConfigError.
  void validate() const;
};

// Config path from REACH_PRECISE_CONFIG, if set and non-empty.
std::optional<std::filesystem::path> config_path_from_env();

// Independent 64-bit seed for a named stream and index (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index = 0);

}  // namespace rp::config
