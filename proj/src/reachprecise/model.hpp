#pragma once

// Fully-connected inverse model: (joint state, relative target) -> joint
// variation. Rectified hidden layers, logistic output mapped affinely onto
// [-delta_bound, +delta_bound] so every inference respects the step bound.

#include "reachprecise/kinematics.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rp::model {

using kinematics::JointConfig;
using kinematics::JointDelta;
using kinematics::RelativePosition;
using kinematics::Rng;

inline constexpr int kInputDim = 9;
inline constexpr int kOutputDim = 6;

// Flat parameter and gradient storage. Eigen picks its vectorized loop split
// from the runtime address, so a fixed alignment keeps results bit-identical
// between runs.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

// Per-input affine normalization: x_norm = (x - shift) / scale.
struct Normalization {
  std::array<double, kInputDim> shift{};
  std::array<double, kInputDim> scale{};

  // Joint angles onto [-1, 1] by their ranges; relative positions divided by
  // the reachability envelope.
  static Normalization for_geometry(const kinematics::ArmGeometry& geom, double envelope_m);
  static Normalization identity();

  friend bool operator==(const Normalization&, const Normalization&) = default;
};

enum class NoiseUnits { std_dev, variance };
enum class DecayLaw { multiplicative, subtractive };

// Exploration noise, expressed as a fraction of delta_bound.
struct NoiseSchedule {
  double sigma0 = 0.07;
  double decay = 0.001;
  std::uint64_t t = 0;
  NoiseUnits units = NoiseUnits::std_dev;
  DecayLaw law = DecayLaw::multiplicative;

  // Standard deviation at the current iteration, normalized units.
  double sigma() const;
  void advance() { ++t; }
};

class InverseModel {
 public:
  InverseModel(std::vector<int> layer_dims, Normalization norm, double delta_bound);

  // He-scaled weights for rectified layers, small centered output layer,
  // zero biases.
  static InverseModel initialized(std::vector<int> layer_dims, Normalization norm,
                                  double delta_bound, std::uint64_t seed);

  const std::vector<int>& layer_dims() const { return dims_; }
  const Normalization& normalization() const { return norm_; }
  double delta_bound() const { return delta_bound_; }
  int layer_count() const { return static_cast<int>(dims_.size()) - 1; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // Weight matrix (out x in, column-major) and bias of layer l.
  Eigen::Map<Eigen::MatrixXd> weights(int l);
  Eigen::Map<const Eigen::MatrixXd> weights(int l) const;
  Eigen::Map<Eigen::VectorXd> bias(int l);
  Eigen::Map<const Eigen::VectorXd> bias(int l) const;
  // Index of W_l in parameters(); b_l follows W_l.
  std::size_t weight_offset(int l) const { return offsets_[static_cast<std::size_t>(l)]; }

  // Raw (state, relative position) -> normalized network input.
  Eigen::Matrix<double, kInputDim, 1> encode(const JointConfig& s,
                                             const RelativePosition& dp) const;

  // Normalized inputs (9 x B) -> joint variations in radians (6 x B).
  Eigen::MatrixXd forward(const Eigen::MatrixXd& inputs) const;

  JointDelta infer(const JointConfig& s, const RelativePosition& dp) const;

  // Independent deep copy. Optimizer state lives outside the model, so a
  // replica starts with whatever fresh optimizer the caller gives it.
  InverseModel replicate() const { return *this; }

  // FNV-1a over topology, normalization, bound and parameter bytes.
  std::uint64_t checksum() const;

  friend bool operator==(const InverseModel&, const InverseModel&) = default;

 private:
  std::vector<int> dims_;
  Normalization norm_;
  double delta_bound_;
  ParamVector params_;
  std::vector<std::size_t> offsets_;  // start of W_l; b_l follows it
};

struct AdamSettings {
  double learning_rate = 0.0015;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t parameter_count, AdamSettings settings);

  void step(std::span<double> params, std::span<const double> grads);

  const AdamSettings& settings() const { return settings_; }
  std::uint64_t step_count() const { return t_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  // Restores a saved state; sizes must match.
  void restore(std::uint64_t step_count, std::vector<double> m, std::vector<double> v);

 private:
  AdamSettings settings_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

struct TrainSample {
  JointConfig s;
  RelativePosition dp;
  JointDelta dq;  // label, radians
};

// Mean over the batch of the squared label error summed over joints, in
// normalized output units (label / delta_bound). Fills grad when non-null.
double loss_and_gradient(const InverseModel& model, std::span<const TrainSample> batch,
                         ParamVector* grad);

// One Adam step on the batch. Returns the pre-step loss. Throws NumericError
// and leaves model and optimizer untouched when loss or gradient is not
// finite.
double train_batch(InverseModel& model, AdamOptimizer& opt, std::span<const TrainSample> batch);

// infer plus i.i.d. Gaussian noise of std sigma() * delta_bound, clamped
// back into the bound.
JointDelta infer_noisy(const InverseModel& model, const JointConfig& s,
                       const RelativePosition& dp, const NoiseSchedule& noise, Rng& rng);

// Self-describing binary checkpoint; round trips bit-exactly.
void save_checkpoint(const std::filesystem::path& path, const InverseModel& model);
InverseModel load_checkpoint(const std::filesystem::path& path);

void save_optimizer(const std::filesystem::path& path, const AdamOptimizer& opt);
AdamOptimizer load_optimizer(const std::filesystem::path& path);

}  // namespace rp::model
