#include "reachprecise/emssl.hpp"

#include "reachprecise/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

namespace rp::emssl {

namespace {

using kinematics::deg_to_rad;
using kinematics::rad_to_deg;

constexpr std::size_t kEvalChunk = 512;

std::vector<TrainSample> generate_triples(const ArmGeometry& geom, std::size_t n,
                                          std::uint64_t seed) {
  kinematics::Rng rng(seed);
  std::vector<TrainSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TrainSample t;
    t.s = kinematics::sample_config(geom, rng);
    t.dq = kinematics::sample_delta(t.s, geom.delta_bound, geom, rng);
    t.dp = kinematics::displacement_in_tool_frame(t.s, t.dq, geom);
    out.push_back(t);
  }
  return out;
}

// Column-wise network outputs (radians) for a list of samples.
Eigen::MatrixXd infer_all(const InverseModel& model, std::span<const Sample> samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd out(model::kOutputDim, n);
  for (Eigen::Index start = 0; start < n; start += kEvalChunk) {
    const Eigen::Index len = std::min<Eigen::Index>(kEvalChunk, n - start);
    Eigen::MatrixXd x(model::kInputDim, len);
    for (Eigen::Index b = 0; b < len; ++b) {
      const Sample& s = samples[static_cast<std::size_t>(start + b)];
      x.col(b) = model.encode(s.s, s.dp);
    }
    out.middleCols(start, len) = model.forward(x);
  }
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> fields;
  std::string f;
  while (in >> f) fields.push_back(f);
  return fields;
}

template <typename Fn>
void for_each_record(const std::filesystem::path& path, std::size_t min_fields, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto fields = split_fields(line);
    if (fields.size() < min_fields) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected at least " +
                    std::to_string(min_fields) + " columns");
    }
    std::vector<double> values(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) {
      try {
        values[i] = std::stod(fields[i]);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad number '" +
                      fields[i] + "'");
      }
    }
    fn(values);
  }
}

}  // namespace

GroundTruthSet generate_labeled_dataset(const ArmGeometry& geom, std::size_t n_total,
                                        std::size_t n_train, std::uint64_t seed) {
  if (n_train == 0 || n_train >= n_total)
    throw InvalidArgument("need 0 < n_train < n_total so both splits are nonempty");
  std::vector<TrainSample> all = generate_triples(geom, n_total, seed);
  GroundTruthSet set;
  set.train.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  set.test.assign(all.begin() + static_cast<std::ptrdiff_t>(n_train), all.end());
  return set;
}

UnlabeledSet strip_labels(const GroundTruthSet& set) {
  const auto strip = [](const std::vector<TrainSample>& xs) {
    std::vector<Sample> out;
    out.reserve(xs.size());
    for (const TrainSample& t : xs) out.push_back(Sample{t.s, t.dp});
    return out;
  };
  return UnlabeledSet{strip(set.train), strip(set.test)};
}

UnlabeledSet generate_dataset(const ArmGeometry& geom, std::size_t n_total, std::size_t n_train,
                              std::uint64_t seed) {
  return strip_labels(generate_labeled_dataset(geom, n_total, n_train, seed));
}

void write_samples(const std::filesystem::path& path, std::span<const TrainSample> samples,
                   bool with_labels) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw IoError("cannot open " + path.string() + " for writing");
  std::fputs(with_labels ? "# q1..q6 [deg] dp_x dp_y dp_z [m] dq1..dq6 [deg]\n"
                         : "# q1..q6 [deg] dp_x dp_y dp_z [m]\n",
             f);
  for (const TrainSample& t : samples) {
    for (int j = 0; j < 6; ++j) std::fprintf(f, "%.17g ", rad_to_deg(t.s.angles[j]));
    std::fprintf(f, "%.17g %.17g %.17g", t.dp.p.x(), t.dp.p.y(), t.dp.p.z());
    if (with_labels) {
      for (int j = 0; j < 6; ++j) std::fprintf(f, " %.17g", rad_to_deg(t.dq.deltas[j]));
    }
    std::fputc('\n', f);
  }
  const bool ok = std::ferror(f) == 0;
  std::fclose(f);
  if (!ok) throw IoError("write failed: " + path.string());
}

std::vector<Sample> read_unlabeled(const std::filesystem::path& path) {
  std::vector<Sample> out;
  for_each_record(path, 9, [&](const std::vector<double>& v) {
    Sample s;
    for (int j = 0; j < 6; ++j) s.s.angles[j] = deg_to_rad(v[static_cast<std::size_t>(j)]);
    s.dp.p = kinematics::Vec3(v[6], v[7], v[8]);
    out.push_back(s);
  });
  return out;
}

std::vector<TrainSample> read_labeled(const std::filesystem::path& path) {
  std::vector<TrainSample> out;
  for_each_record(path, 15, [&](const std::vector<double>& v) {
    TrainSample t;
    for (int j = 0; j < 6; ++j) {
      t.s.angles[j] = deg_to_rad(v[static_cast<std::size_t>(j)]);
      t.dq.deltas[j] = deg_to_rad(v[static_cast<std::size_t>(9 + j)]);
    }
    t.dp.p = kinematics::Vec3(v[6], v[7], v[8]);
    out.push_back(t);
  });
  return out;
}

void PretrainConfig::validate() const {
  if (iterations < 1 || epochs < 1 || inference_batch < 1 || train_batch < 1 || workers < 1) {
    throw ConfigError("pretrain counts (T, E, M_R, M_T, K) must all be >= 1");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("pretrain learning rate must be > 0");
  if (!(noise.sigma0 >= 0.0) || !(noise.decay >= 0.0) || noise.decay >= 1.0) {
    throw ConfigError("noise sigma0 must be >= 0 and decay in [0, 1)");
  }
  if (!(eval_resolution_deg > 0.0)) throw ConfigError("eval resolution must be > 0");
}

std::vector<RelativePosition> relabel(std::span<const JointConfig> states,
                                      std::span<const JointDelta> deltas,
                                      const ArmGeometry& geom, int workers) {
  if (states.size() != deltas.size()) throw InvalidArgument("relabel: size mismatch");
  const std::size_t n = states.size();
  std::vector<RelativePosition> out(n);
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1,
                                                std::max<std::size_t>(n, 1));
  const auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = kinematics::displacement_in_tool_frame(states[i], deltas[i], geom);
    }
  };
  if (k == 1) {
    work(0, n);
    return out;
  }
  std::vector<std::exception_ptr> errors(k);
  {
    std::vector<std::jthread> pool;
    pool.reserve(k);
    for (std::size_t w = 0; w < k; ++w) {
      const std::size_t begin = n * w / k;
      const std::size_t end = n * (w + 1) / k;
      pool.emplace_back([&, w, begin, end] {
        try {
          work(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

PrecisionStats summarize(std::vector<double> values) {
  PrecisionStats st;
  st.n = values.size();
  if (values.empty()) return st;
  std::sort(values.begin(), values.end());
  st.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(st.n);
  const auto at = [&](double frac) {
    const double pos = frac * static_cast<double>(st.n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, st.n - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  st.median = at(0.5);
  st.p95 = at(0.95);
  st.max = values.back();
  return st;
}

PrecisionStats evaluate_open_loop(const InverseModel& model, std::span<const Sample> test,
                                  const ArmGeometry& geom, JointResolution res) {
  const Eigen::MatrixXd dq_all = infer_all(model, test);
  std::vector<double> precision;
  precision.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const JointDelta raw{dq_all.col(static_cast<Eigen::Index>(i))};
    const JointDelta dq = kinematics::feasible_quantized(test[i].s, raw, res, geom);
    precision.push_back(kinematics::residual_after(test[i].s, dq, test[i].dp, geom).residual.norm());
  }
  return summarize(std::move(precision));
}

PretrainState PretrainState::fresh(InverseModel initial, const PretrainConfig& cfg) {
  model::AdamSettings adam;
  adam.learning_rate = cfg.learning_rate;
  model::AdamOptimizer opt(initial.parameter_count(), adam);
  return PretrainState{std::move(initial), std::move(opt), cfg.noise, kinematics::Rng(cfg.seed),
                       0, {}, 0, 0.0};
}

void pretrain(const UnlabeledSet& data, const ArmGeometry& geom, const PretrainConfig& cfg,
              PretrainState& state, const IterationCallback& on_iteration) {
  cfg.validate();
  if (data.train.empty()) throw InvalidArgument("pretrain needs a nonempty training set");
  InverseModel& net = state.model;
  if (net.layer_dims().front() != model::kInputDim || net.layer_dims().back() != model::kOutputDim) {
    throw InvalidArgument("inverse model must map 9 inputs to 6 outputs");
  }
  const std::size_t n = data.train.size();
  const std::span<const Sample> eval_set(
      data.test.data(), std::min(cfg.eval_subsample, data.test.size()));
  const JointResolution eval_res = JointResolution::from_degrees(cfg.eval_resolution_deg);
  const double bound = net.delta_bound();

  std::vector<JointConfig> states(n);
  std::vector<JointDelta> proposals(n);
  std::vector<TrainSample> dataset(n);
  std::vector<std::size_t> order(n);

  for (int it = state.completed_iterations + 1; it <= cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();

    // Data sampling: the working sets start empty every iteration.
    const double stddev = state.noise.sigma() * bound;
    std::normal_distribution<double> gauss(0.0, stddev > 0.0 ? stddev : 1.0);
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.inference_batch)) {
      const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.inference_batch),
                                                    n - start);
      Eigen::MatrixXd x(model::kInputDim, static_cast<Eigen::Index>(len));
      for (std::size_t b = 0; b < len; ++b) {
        x.col(static_cast<Eigen::Index>(b)) = net.encode(data.train[start + b].s,
                                                          data.train[start + b].dp);
      }
      const Eigen::MatrixXd q = net.forward(x);
      for (std::size_t b = 0; b < len; ++b) {
        const JointConfig& s = data.train[start + b].s;
        JointDelta dq{q.col(static_cast<Eigen::Index>(b))};
        for (int j = 0; j < 6; ++j) {
          double d = dq.deltas[j];
          if (stddev > 0.0) d = std::clamp(d + gauss(state.rng), -bound, bound);
          // Keep q + dq inside the joint ranges before relabeling.
          d = std::clamp(d, geom.ranges[j].lo - s.angles[j], geom.ranges[j].hi - s.angles[j]);
          dq.deltas[j] = d;
        }
        states[start + b] = s;
        proposals[start + b] = dq;
      }
    }

    // Forward-model relabeling.
    const std::vector<RelativePosition> relabeled = relabel(states, proposals, geom, cfg.workers);
    for (std::size_t i = 0; i < n; ++i) dataset[i] = TrainSample{states[i], relabeled[i], proposals[i]};

    // Model training.
    std::iota(order.begin(), order.end(), std::size_t{0});
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    std::vector<TrainSample> batch;
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), state.rng);
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.train_batch)) {
        const std::size_t len =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.train_batch), n - start);
        batch.clear();
        for (std::size_t b = 0; b < len; ++b) batch.push_back(dataset[order[start + b]]);
        loss_sum += model::train_batch(net, state.optimizer, batch);
        ++loss_count;
      }
    }

    IterationMetrics m;
    m.iteration = it;
    m.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(loss_count, 1));
    m.noise_sigma = state.noise.sigma();
    state.noise.advance();
    m.test = evaluate_open_loop(net, eval_set, geom, eval_res);
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    state.metrics.push_back(m);
    state.completed_iterations = it;
    if (state.best_iteration == 0 || m.test.mean < state.best_precision) {
      state.best_iteration = it;
      state.best_precision = m.test.mean;
    }
    if (on_iteration) on_iteration(state);
    if (cfg.patience > 0 && it - state.best_iteration >= cfg.patience) break;
  }
}

InverseModel train_direct_regression(std::span<const TrainSample> labeled, InverseModel model,
                                     const PretrainConfig& cfg) {
  cfg.validate();
  if (labeled.empty()) throw InvalidArgument("direct regression needs labeled samples");
  model::AdamSettings adam;
  adam.learning_rate = cfg.learning_rate;
  model::AdamOptimizer opt(model.parameter_count(), adam);
  kinematics::Rng rng(cfg.seed);
  const std::size_t n = labeled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<TrainSample> batch;
  for (int it = 0; it < cfg.iterations; ++it) {
    for (int e = 0; e < cfg.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.train_batch)) {
        const std::size_t len =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.train_batch), n - start);
        batch.clear();
        for (std::size_t b = 0; b < len; ++b) batch.push_back(labeled[order[start + b]]);
        model::train_batch(model, opt, batch);
      }
    }
  }
  return model;
}

void save_pretrain_state(const std::filesystem::path& dir, const PretrainState& state) {
  std::filesystem::create_directories(dir);
  model::save_checkpoint(dir / "model.ckpt", state.model);
  model::save_optimizer(dir / "optimizer.bin", state.optimizer);
  std::ostringstream rng_state;
  rng_state << state.rng;
  nlohmann::json j;
  j["completed_iterations"] = state.completed_iterations;
  j["noise_t"] = state.noise.t;
  j["rng"] = rng_state.str();
  j["best_iteration"] = state.best_iteration;
  j["best_precision_m"] = state.best_precision;
  nlohmann::json rows = nlohmann::json::array();
  for (const IterationMetrics& m : state.metrics) {
    rows.push_back({{"iteration", m.iteration},
                    {"mean_loss", m.mean_loss},
                    {"noise_sigma", m.noise_sigma},
                    {"n", m.test.n},
                    {"mean", m.test.mean},
                    {"median", m.test.median},
                    {"p95", m.test.p95},
                    {"max", m.test.max},
                    {"seconds", m.seconds}});
  }
  j["metrics"] = rows;
  const auto tmp = dir / "state.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << j.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, dir / "state.json");
}

PretrainState load_pretrain_state(const std::filesystem::path& dir, const PretrainConfig& cfg) {
  std::ifstream in(dir / "state.json");
  if (!in) throw IoError("no pretrain state in " + dir.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(dir.string() + "/state.json: " + e.what());
  }
  InverseModel m = model::load_checkpoint(dir / "model.ckpt");
  model::AdamOptimizer opt = model::load_optimizer(dir / "optimizer.bin");
  if (opt.first_moment().size() != m.parameter_count()) {
    throw IoError(dir.string() + ": optimizer does not match the model");
  }
  PretrainState st{std::move(m), std::move(opt), {}, kinematics::Rng{}, 0, {}, 0, 0.0};
  st.completed_iterations = j.at("completed_iterations").get<int>();
  st.noise = cfg.noise;
  st.noise.t = j.at("noise_t").get<std::uint64_t>();
  std::istringstream rng_state(j.at("rng").get<std::string>());
  rng_state >> st.rng;
  st.best_iteration = j.at("best_iteration").get<int>();
  st.best_precision = j.at("best_precision_m").get<double>();
  for (const auto& row : j.at("metrics")) {
    IterationMetrics m;
    m.iteration = row.at("iteration").get<int>();
    m.mean_loss = row.at("mean_loss").get<double>();
    m.noise_sigma = row.at("noise_sigma").get<double>();
    m.test.n = row.at("n").get<std::size_t>();
    m.test.mean = row.at("mean").get<double>();
    m.test.median = row.at("median").get<double>();
    m.test.p95 = row.at("p95").get<double>();
    m.test.max = row.at("max").get<double>();
    m.seconds = row.at("seconds").get<double>();
    st.metrics.push_back(m);
  }
  return st;
}

}  // namespace rp::emssl
