#include "reachprecise/config.hpp"

#include "reachprecise/binio.hpp"
#include "reachprecise/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>

namespace rp::config {

namespace kin = rp::kinematics;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::string_view where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json vec3_json(const kin::Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

kin::Vec3 vec3_from(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != 3) throw ConfigError("expected a 3-vector");
  return {a[0], a[1], a[2]};
}

json transform_json(const Eigen::Isometry3d& t) {
  json rows = json::array();
  for (int r = 0; r < 3; ++r)
    rows.push_back(json::array({t.linear()(r, 0), t.linear()(r, 1), t.linear()(r, 2)}));
  return json{{"translation", vec3_json(t.translation())}, {"rotation", rows}};
}

void read_transform(const json& j, const char* where, Eigen::Isometry3d& t) {
  check_keys(j, where, {"translation", "rotation"});
  if (j.contains("translation")) t.translation() = vec3_from(j.at("translation"));
  if (j.contains("rotation")) {
    const auto rows = j.at("rotation").get<std::vector<std::vector<double>>>();
    if (rows.size() != 3) throw ConfigError(std::string(where) + ": rotation must be 3x3");
    for (int r = 0; r < 3; ++r) {
      if (rows[r].size() != 3) throw ConfigError(std::string(where) + ": rotation must be 3x3");
      for (int c = 0; c < 3; ++c) t.linear()(r, c) = rows[r][c];
    }
  }
}

json joints_deg(const kin::Vec6& v) {
  json a = json::array();
  for (int i = 0; i < kin::kJoints; ++i) a.push_back(kin::rad_to_deg(v[i]));
  return a;
}

kin::Vec6 joints_from_deg(const json& j) {
  const auto a = j.get<std::vector<double>>();
  if (a.size() != kin::kJoints) throw ConfigError("expected 6 joint values");
  kin::Vec6 v;
  for (int i = 0; i < kin::kJoints; ++i) v[i] = kin::deg_to_rad(a[static_cast<std::size_t>(i)]);
  return v;
}

json geometry_json(const kin::ArmGeometry& g) {
  json dh = json::array();
  for (const auto& row : g.dh) {
    dh.push_back({{"a", row.a},
                  {"d", row.d},
                  {"twist_deg", kin::rad_to_deg(row.twist)},
                  {"theta_offset_deg", kin::rad_to_deg(row.theta_offset)}});
  }
  json ranges = json::array();
  for (const auto& r : g.ranges)
    ranges.push_back(json::array({kin::rad_to_deg(r.lo), kin::rad_to_deg(r.hi)}));
  return {{"dh", dh},
          {"tool_offset", transform_json(g.tool_offset)},
          {"ranges_deg", ranges},
          {"delta_bound_deg", kin::rad_to_deg(g.delta_bound)},
          {"reference_config_deg", joints_deg(g.reference_config.angles)}};
}

void read_geometry(const json& j, kin::ArmGeometry& g) {
  check_keys(j, "geometry",
             {"dh", "tool_offset", "ranges_deg", "delta_bound_deg", "reference_config_deg"});
  if (j.contains("dh")) {
    const auto& rows = j.at("dh");
    if (!rows.is_array() || rows.size() != kin::kJoints)
      throw ConfigError("geometry.dh: expected 6 rows");
    for (std::size_t i = 0; i < kin::kJoints; ++i) {
      const auto& r = rows[i];
      check_keys(r, "geometry.dh[]", {"a", "d", "twist_deg", "theta_offset_deg"});
      auto& row = g.dh[i];
      read(r, "a", row.a);
      read(r, "d", row.d);
      if (r.contains("twist_deg")) row.twist = kin::deg_to_rad(r.at("twist_deg").get<double>());
      if (r.contains("theta_offset_deg"))
        row.theta_offset = kin::deg_to_rad(r.at("theta_offset_deg").get<double>());
    }
  }
  if (j.contains("tool_offset")) read_transform(j.at("tool_offset"), "geometry.tool_offset", g.tool_offset);
  if (j.contains("ranges_deg")) {
    const auto r = j.at("ranges_deg").get<std::vector<std::vector<double>>>();
    if (r.size() != kin::kJoints) throw ConfigError("geometry.ranges_deg: expected 6 ranges");
    for (std::size_t i = 0; i < kin::kJoints; ++i) {
      if (r[i].size() != 2) throw ConfigError("geometry.ranges_deg: expected [lo, hi] pairs");
      g.ranges[i] = {kin::deg_to_rad(r[i][0]), kin::deg_to_rad(r[i][1])};
    }
  }
  if (j.contains("delta_bound_deg"))
    g.delta_bound = kin::deg_to_rad(j.at("delta_bound_deg").get<double>());
  if (j.contains("reference_config_deg"))
    g.reference_config.angles = joints_from_deg(j.at("reference_config_deg"));
}

json perception_json(const reach::PerceptionSettings& p) {
  const auto& in = p.rig.intrinsics;
  return {{"mode", p.mode == perception::PerceptionMode::exact ? "exact" : "stereo-quantized"},
          {"fallback_to_truth", p.fallback_to_truth},
          {"rig",
           {{"fx", in.fx},
            {"fy", in.fy},
            {"cx", in.cx},
            {"cy", in.cy},
            {"width", in.width},
            {"height", in.height},
            {"baseline", p.rig.baseline},
            {"pixel_quantization", p.rig.pixel_quantization},
            {"camera_in_tool", transform_json(p.rig.camera_in_tool)}}}};
}

void read_perception(const json& j, reach::PerceptionSettings& p) {
  check_keys(j, "perception", {"mode", "fallback_to_truth", "rig"});
  if (j.contains("mode")) {
    const auto m = j.at("mode").get<std::string>();
    if (m == "exact") p.mode = perception::PerceptionMode::exact;
    else if (m == "stereo-quantized") p.mode = perception::PerceptionMode::stereo_quantized;
    else throw ConfigError("perception.mode: expected exact or stereo-quantized");
  }
  read(j, "fallback_to_truth", p.fallback_to_truth);
  if (j.contains("rig")) {
    const auto& r = j.at("rig");
    check_keys(r, "perception.rig", {"fx", "fy", "cx", "cy", "width", "height", "baseline",
                                     "pixel_quantization", "camera_in_tool"});
    auto& in = p.rig.intrinsics;
    read(r, "fx", in.fx);
    read(r, "fy", in.fy);
    read(r, "cx", in.cx);
    read(r, "cy", in.cy);
    read(r, "width", in.width);
    read(r, "height", in.height);
    read(r, "baseline", p.rig.baseline);
    read(r, "pixel_quantization", p.rig.pixel_quantization);
    if (r.contains("camera_in_tool"))
      read_transform(r.at("camera_in_tool"), "perception.rig.camera_in_tool", p.rig.camera_in_tool);
  }
}

const char* units_name(model::NoiseUnits u) {
  return u == model::NoiseUnits::std_dev ? "std" : "variance";
}
const char* law_name(model::DecayLaw l) {
  return l == model::DecayLaw::multiplicative ? "multiplicative" : "subtractive";
}

json pretrain_json(const emssl::PretrainConfig& p) {
  return {{"iterations", p.iterations},
          {"epochs", p.epochs},
          {"inference_batch", p.inference_batch},
          {"train_batch", p.train_batch},
          {"workers", p.workers},
          {"learning_rate", p.learning_rate},
          {"eval_subsample", p.eval_subsample},
          {"patience", p.patience},
          {"eval_resolution_deg", p.eval_resolution_deg},
          {"noise",
           {{"sigma0", p.noise.sigma0},
            {"decay", p.noise.decay},
            {"units", units_name(p.noise.units)},
            {"law", law_name(p.noise.law)}}}};
}

void read_pretrain(const json& j, emssl::PretrainConfig& p) {
  check_keys(j, "pretrain", {"iterations", "epochs", "inference_batch", "train_batch", "workers",
                             "learning_rate", "eval_subsample", "patience",
                             "eval_resolution_deg", "noise"});
  read(j, "iterations", p.iterations);
  read(j, "epochs", p.epochs);
  read(j, "inference_batch", p.inference_batch);
  read(j, "train_batch", p.train_batch);
  read(j, "workers", p.workers);
  read(j, "learning_rate", p.learning_rate);
  read(j, "eval_subsample", p.eval_subsample);
  read(j, "patience", p.patience);
  read(j, "eval_resolution_deg", p.eval_resolution_deg);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    check_keys(n, "pretrain.noise", {"sigma0", "decay", "units", "law"});
    read(n, "sigma0", p.noise.sigma0);
    read(n, "decay", p.noise.decay);
    if (n.contains("units")) {
      const auto u = n.at("units").get<std::string>();
      if (u == "std") p.noise.units = model::NoiseUnits::std_dev;
      else if (u == "variance") p.noise.units = model::NoiseUnits::variance;
      else throw ConfigError("pretrain.noise.units: expected std or variance");
    }
    if (n.contains("law")) {
      const auto l = n.at("law").get<std::string>();
      if (l == "multiplicative") p.noise.law = model::DecayLaw::multiplicative;
      else if (l == "subtractive") p.noise.law = model::DecayLaw::subtractive;
      else throw ConfigError("pretrain.noise.law: expected multiplicative or subtractive");
    }
  }
}

json online_json(const reach::OnlineSettings& o) {
  return {{"iterations", o.iterations},
          {"epochs", o.epochs},
          {"learning_rate", o.learning_rate},
          {"max_fs_steps", o.max_fs_steps},
          {"wall_budget_s", o.wall_budget_s}};
}

void read_online(const json& j, reach::OnlineSettings& o) {
  check_keys(j, "reach", {"iterations", "epochs", "learning_rate", "max_fs_steps", "wall_budget_s"});
  read(j, "iterations", o.iterations);
  read(j, "epochs", o.epochs);
  read(j, "learning_rate", o.learning_rate);
  read(j, "max_fs_steps", o.max_fs_steps);
  read(j, "wall_budget_s", o.wall_budget_s);
}

json suite_json(const SuiteConfig& s) {
  json strategies = json::array();
  for (auto st : s.strategies) strategies.push_back(std::string(reach::to_string(st)));
  return {{"n_targets", s.n_targets},
          {"study_targets", s.study_targets},
          {"resolutions_deg", s.resolutions_deg},
          {"strategies", strategies},
          {"threshold_mode", std::string(reach::to_string(s.threshold_mode))},
          {"envelope_samples", s.envelope_samples}};
}

void read_suite(const json& j, SuiteConfig& s) {
  check_keys(j, "suite",
             {"n_targets", "study_targets", "resolutions_deg", "strategies", "threshold_mode", "envelope_samples"});
  read(j, "n_targets", s.n_targets);
  read(j, "study_targets", s.study_targets);
  read(j, "resolutions_deg", s.resolutions_deg);
  read(j, "envelope_samples", s.envelope_samples);
  try {
    if (j.contains("strategies")) {
      s.strategies.clear();
      for (const auto& name : j.at("strategies").get<std::vector<std::string>>())
        s.strategies.push_back(reach::parse_strategy(name));
    }
    if (j.contains("threshold_mode"))
      s.threshold_mode = reach::parse_threshold_mode(j.at("threshold_mode").get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("suite: ") + e.what());
  }
}

}  // namespace

BenchConfig BenchConfig::preset(std::string_view scale) {
  BenchConfig c;
  if (scale == "desk") {
    c.scale = "desk";
    c.dataset = {28000, 20000};
    c.model.layer_dims = {9, 256, 256, 128, 6};
    c.pretrain.iterations = 30;
  } else if (scale == "paper") {
    c.scale = "paper";
    c.dataset = {140000, 100000};
    c.model.layer_dims = {9, 1024, 512, 256, 128, 6};
    c.pretrain.iterations = 200;
  } else {
    throw ConfigError("unknown scale '" + std::string(scale) + "' (expected desk or paper)");
  }
  return c;
}

BenchConfig BenchConfig::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const std::string scale = j.value("scale", std::string("desk"));
  BenchConfig c = preset(scale);
  c.apply_json_text(text);
  return c;
}

BenchConfig BenchConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

void BenchConfig::apply_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    check_keys(j, "config", {"scale", "geometry", "perception", "dataset", "model", "pretrain",
                             "reach", "suite", "seed", "workers", "out_dir"});
    read(j, "scale", scale);
    if (j.contains("geometry")) read_geometry(j.at("geometry"), geometry);
    if (j.contains("perception")) read_perception(j.at("perception"), perception);
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, "dataset", {"n_total", "n_train"});
      read(d, "n_total", dataset.n_total);
      read(d, "n_train", dataset.n_train);
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model", {"layer_dims", "envelope_m"});
      read(m, "layer_dims", model.layer_dims);
      read(m, "envelope_m", model.envelope_m);
    }
    if (j.contains("pretrain")) read_pretrain(j.at("pretrain"), pretrain);
    if (j.contains("reach")) read_online(j.at("reach"), online);
    if (j.contains("suite")) read_suite(j.at("suite"), suite);
    read(j, "seed", seed);
    read(j, "workers", workers);
    if (j.contains("out_dir")) out_dir = j.at("out_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

std::string BenchConfig::to_json_text() const {
  json j{{"scale", scale},
         {"geometry", geometry_json(geometry)},
         {"perception", perception_json(perception)},
         {"dataset", {{"n_total", dataset.n_total}, {"n_train", dataset.n_train}}},
         {"model", {{"layer_dims", model.layer_dims}, {"envelope_m", model.envelope_m}}},
         {"pretrain", pretrain_json(pretrain)},
         {"reach", online_json(online)},
         {"suite", suite_json(suite)},
         {"seed", seed},
         {"workers", workers},
         {"out_dir", out_dir.generic_string()}};
  return j.dump(2);
}

std::string BenchConfig::hash() const {
  // out_dir and workers do not change any result.
  BenchConfig c = *this;
  c.out_dir = "";
  c.workers = 1;
  binio::Fnv1a h;
  h.update(c.to_json_text());
  return binio::hex64(h.digest());
}

std::string BenchConfig::pretrain_hash() const {
  const json j{{"geometry", geometry_json(geometry)},
               {"dataset", {{"n_total", dataset.n_total}, {"n_train", dataset.n_train}}},
               {"model", {{"layer_dims", model.layer_dims}, {"envelope_m", model.envelope_m}}},
               {"pretrain", pretrain_json(pretrain)},
               {"seed", seed}};
  binio::Fnv1a h;
  h.update(j.dump());
  return binio::hex64(h.digest());
}

void BenchConfig::validate() const {
  geometry.validate();
  perception.rig.validate();
  pretrain.validate();
  if (dataset.n_train == 0 || dataset.n_train >= dataset.n_total)
    throw ConfigError("dataset: need 0 < n_train < n_total");
  if (model.layer_dims.size() < 2 || model.layer_dims.front() != model::kInputDim ||
      model.layer_dims.back() != model::kOutputDim)
    throw ConfigError("model.layer_dims must start with 9 and end with 6");
  for (int d : model.layer_dims)
    if (d <= 0) throw ConfigError("model.layer_dims must be positive");
  if (!(model.envelope_m > 0.0)) throw ConfigError("model.envelope_m must be positive");
  if (online.iterations < 1 || online.epochs < 1 || online.max_fs_steps < 0 ||
      !(online.learning_rate > 0.0))
    throw ConfigError("reach: invalid online settings");
  if (suite.n_targets == 0 || suite.study_targets == 0)
    throw ConfigError("suite target counts must be positive");
  if (suite.resolutions_deg.empty()) throw ConfigError("suite.resolutions_deg is empty");
  for (double r : suite.resolutions_deg)
    if (!(r > 0.0)) throw ConfigError("suite.resolutions_deg must be positive");
  if (suite.envelope_samples == 0) throw ConfigError("suite.envelope_samples must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

std::optional<std::filesystem::path> config_path_from_env() {
  const char* v = std::getenv(kConfigEnvVar);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::filesystem::path(v);
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view stream, std::uint64_t index) {
  binio::Fnv1a h;
  h.update(stream);
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(base ^ h.digest()) + index);
}

}  // namespace rp::config
