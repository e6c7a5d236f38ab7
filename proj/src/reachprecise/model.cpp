#include "reachprecise/model.hpp"

#include "reachprecise/binio.hpp"
#include "reachprecise/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace rp::model {

namespace {

constexpr std::string_view kCheckpointMagic = "RPIMCKPT";
constexpr std::string_view kOptimizerMagic = "RPADAMST";
constexpr std::uint32_t kFormatVersion = 1;

Eigen::MatrixXd logistic(const Eigen::MatrixXd& z) {
  return (1.0 + (-z.array()).exp()).inverse().matrix();
}

bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Normalization Normalization::for_geometry(const kinematics::ArmGeometry& geom, double envelope_m) {
  if (!(envelope_m > 0.0)) throw InvalidArgument("normalization envelope must be > 0");
  Normalization n;
  for (int j = 0; j < kinematics::kJoints; ++j) {
    n.shift[j] = geom.ranges[j].mid();
    n.scale[j] = geom.ranges[j].half_width();
  }
  for (int k = 0; k < 3; ++k) {
    n.shift[6 + k] = 0.0;
    n.scale[6 + k] = envelope_m;
  }
  return n;
}

Normalization Normalization::identity() {
  Normalization n;
  n.shift.fill(0.0);
  n.scale.fill(1.0);
  return n;
}

double NoiseSchedule::sigma() const {
  const double base = units == NoiseUnits::variance ? std::sqrt(sigma0) : sigma0;
  const double td = static_cast<double>(t);
  if (law == DecayLaw::multiplicative) return base * std::pow(1.0 - decay, td);
  return std::max(0.0, base - decay * td);
}

InverseModel::InverseModel(std::vector<int> layer_dims, Normalization norm, double delta_bound)
    : dims_(std::move(layer_dims)), norm_(norm), delta_bound_(delta_bound) {
  if (dims_.size() < 2 || dims_.front() != kInputDim || dims_.back() != kOutputDim) {
    throw InvalidArgument("layer_dims must start with 9 and end with 6");
  }
  if (std::any_of(dims_.begin(), dims_.end(), [](int d) { return d <= 0; })) {
    throw InvalidArgument("layer widths must be positive");
  }
  if (!(delta_bound_ > 0.0)) throw InvalidArgument("delta_bound must be > 0");
  for (double s : norm_.scale) {
    if (!(s > 0.0)) throw InvalidArgument("normalization scales must be > 0");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    offsets_.push_back(total);
    total += static_cast<std::size_t>(dims_[l + 1]) * (static_cast<std::size_t>(dims_[l]) + 1);
  }
  params_.assign(total, 0.0);
}

InverseModel InverseModel::initialized(std::vector<int> layer_dims, Normalization norm,
                                       double delta_bound, std::uint64_t seed) {
  InverseModel m(std::move(layer_dims), norm, delta_bound);
  Rng rng(seed);
  for (int l = 0; l < m.layer_count(); ++l) {
    const int fan_in = m.dims_[static_cast<std::size_t>(l)];
    const bool output = l + 1 == m.layer_count();
    const double stddev = output ? 0.01 : std::sqrt(2.0 / fan_in);
    std::normal_distribution<double> dist(0.0, stddev);
    auto w = m.weights(l);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  }
  return m;
}

Eigen::Map<Eigen::MatrixXd> InverseModel::weights(int l) {
  const auto li = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[li], dims_[li + 1], dims_[li]};
}

Eigen::Map<const Eigen::MatrixXd> InverseModel::weights(int l) const {
  const auto li = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[li], dims_[li + 1], dims_[li]};
}

Eigen::Map<Eigen::VectorXd> InverseModel::bias(int l) {
  const auto li = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[li] + static_cast<std::size_t>(dims_[li + 1]) * dims_[li],
          dims_[li + 1]};
}

Eigen::Map<const Eigen::VectorXd> InverseModel::bias(int l) const {
  const auto li = static_cast<std::size_t>(l);
  return {params_.data() + offsets_[li] + static_cast<std::size_t>(dims_[li + 1]) * dims_[li],
          dims_[li + 1]};
}

Eigen::Matrix<double, kInputDim, 1> InverseModel::encode(const JointConfig& s,
                                                         const RelativePosition& dp) const {
  Eigen::Matrix<double, kInputDim, 1> x;
  for (int j = 0; j < 6; ++j) x[j] = s.angles[j];
  for (int k = 0; k < 3; ++k) x[6 + k] = dp.p[k];
  for (int i = 0; i < kInputDim; ++i) x[i] = (x[i] - norm_.shift[i]) / norm_.scale[i];
  return x;
}

Eigen::MatrixXd InverseModel::forward(const Eigen::MatrixXd& inputs) const {
  Eigen::MatrixXd a = inputs;
  for (int l = 0; l < layer_count(); ++l) {
    Eigen::MatrixXd z = weights(l) * a;
    z.colwise() += bias(l);
    if (l + 1 < layer_count()) {
      a = z.cwiseMax(0.0);
    } else {
      a = (delta_bound_ * (2.0 * logistic(z).array() - 1.0)).matrix();
    }
  }
  return a;
}

JointDelta InverseModel::infer(const JointConfig& s, const RelativePosition& dp) const {
  const Eigen::MatrixXd out = forward(encode(s, dp));
  return JointDelta{out.col(0)};
}

std::uint64_t InverseModel::checksum() const {
  binio::Fnv1a h;
  for (int d : dims_) h.update_value(d);
  h.update(norm_.shift.data(), sizeof(double) * norm_.shift.size());
  h.update(norm_.scale.data(), sizeof(double) * norm_.scale.size());
  h.update_value(delta_bound_);
  h.update(params_.data(), sizeof(double) * params_.size());
  return h.digest();
}

AdamOptimizer::AdamOptimizer(std::size_t parameter_count, AdamSettings settings)
    : settings_(settings), m_(parameter_count, 0.0), v_(parameter_count, 0.0) {
  if (!(settings_.learning_rate > 0.0)) throw InvalidArgument("learning rate must be > 0");
}

constexpr double kTinyMoment = 1e-250;

void AdamOptimizer::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InvalidArgument("optimizer state does not match the parameter count");
  }
  ++t_;
  const double b1 = settings_.beta1;
  const double b2 = settings_.beta2;
  const double td = static_cast<double>(t_);
  const double corr1 = 1.0 - std::pow(b1, td);
  const double corr2 = 1.0 - std::pow(b2, td);
  const double lr = settings_.learning_rate;
  const double eps = settings_.epsilon;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    // Moments of inactive units decay geometrically into subnormals, which
    // are very slow on x86.
    if (std::abs(m_[i]) < kTinyMoment) m_[i] = 0.0;
    if (v_[i] < kTinyMoment) v_[i] = 0.0;
    params[i] -= lr * (m_[i] / corr1) / (std::sqrt(v_[i] / corr2) + eps);
  }
}

void AdamOptimizer::restore(std::uint64_t step_count, std::vector<double> m,
                            std::vector<double> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw InvalidArgument("restored optimizer state has the wrong size");
  }
  t_ = step_count;
  m_ = std::move(m);
  v_ = std::move(v);
}

double loss_and_gradient(const InverseModel& model, std::span<const TrainSample> batch,
                         ParamVector* grad) {
  if (batch.empty()) throw InvalidArgument("training batch is empty");
  const int layers = model.layer_count();
  const auto n = static_cast<Eigen::Index>(batch.size());

  Eigen::MatrixXd x(kInputDim, n);
  Eigen::MatrixXd target(kOutputDim, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const TrainSample& s = batch[static_cast<std::size_t>(b)];
    x.col(b) = model.encode(s.s, s.dp);
    target.col(b) = s.dq.deltas / model.delta_bound();
  }

  // Pre-activations per layer; activations[0] is the input.
  std::vector<Eigen::MatrixXd> pre(static_cast<std::size_t>(layers));
  std::vector<Eigen::MatrixXd> act(static_cast<std::size_t>(layers));
  act[0] = x;
  Eigen::MatrixXd sig;
  for (int l = 0; l < layers; ++l) {
    const auto li = static_cast<std::size_t>(l);
    pre[li] = model.weights(l) * act[li];
    pre[li].colwise() += model.bias(l);
    if (l + 1 < layers) {
      act[li + 1] = pre[li].cwiseMax(0.0);
    } else {
      sig = logistic(pre[li]);
    }
  }
  const Eigen::MatrixXd y = (2.0 * sig.array() - 1.0).matrix();
  const Eigen::MatrixXd err = y - target;
  const double loss = err.squaredNorm() / static_cast<double>(n);
  if (grad == nullptr) return loss;

  grad->assign(model.parameter_count(), 0.0);
  // d loss / d y, then through y = 2 sigma(z) - 1.
  Eigen::MatrixXd delta =
      ((2.0 / static_cast<double>(n)) * err.array() * 2.0 * sig.array() * (1.0 - sig.array()))
          .matrix();
  for (int l = layers - 1; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    // The gradient shares the parameter layout.
    const auto w = model.weights(l);
    double* w_grad = grad->data() + model.weight_offset(l);
    Eigen::Map<Eigen::MatrixXd> gw(w_grad, w.rows(), w.cols());
    Eigen::Map<Eigen::VectorXd> gb(w_grad + w.size(), w.rows());
    gw.noalias() = delta * act[li].transpose();
    gb = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = model.weights(l).transpose() * delta;
      delta = (back.array() * (pre[li - 1].array() > 0.0).cast<double>()).matrix();
    }
  }
  return loss;
}

double train_batch(InverseModel& model, AdamOptimizer& opt, std::span<const TrainSample> batch) {
  ParamVector grad;
  const double loss = loss_and_gradient(model, batch, &grad);
  if (!std::isfinite(loss) || !all_finite(grad)) {
    throw NumericError("non-finite loss or gradient in train_batch");
  }
  opt.step(model.parameters(), grad);
  return loss;
}

JointDelta infer_noisy(const InverseModel& model, const JointConfig& s,
                       const RelativePosition& dp, const NoiseSchedule& noise, Rng& rng) {
  JointDelta dq = model.infer(s, dp);
  const double bound = model.delta_bound();
  const double stddev = noise.sigma() * bound;
  if (stddev <= 0.0) return dq;
  std::normal_distribution<double> gauss(0.0, stddev);
  for (int j = 0; j < kOutputDim; ++j) {
    dq.deltas[j] = std::clamp(dq.deltas[j] + gauss(rng), -bound, bound);
  }
  return dq;
}

void save_checkpoint(const std::filesystem::path& path, const InverseModel& model) {
  binio::Writer w;
  w.bytes(kCheckpointMagic);
  w.u32(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.layer_dims().size()));
  for (int d : model.layer_dims()) w.u32(static_cast<std::uint32_t>(d));
  w.f64(model.delta_bound());
  w.f64s(model.normalization().shift);
  w.f64s(model.normalization().scale);
  w.u64(model.parameter_count());
  w.f64s(model.parameters());
  w.save(path);
}

InverseModel load_checkpoint(const std::filesystem::path& path) {
  binio::Reader r(path);
  if (r.bytes(kCheckpointMagic.size()) != kCheckpointMagic) {
    throw IoError(r.path() + ": not an inverse-model checkpoint");
  }
  const std::uint32_t version = r.u32();
  if (version != kFormatVersion) {
    throw IoError(r.path() + ": unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t n_dims = r.u32();
  if (n_dims < 2 || n_dims > 64) throw IoError(r.path() + ": bad layer count");
  std::vector<int> dims(n_dims);
  for (int& d : dims) d = static_cast<int>(r.u32());
  const double bound = r.f64();
  Normalization norm;
  r.f64s(norm.shift);
  r.f64s(norm.scale);
  InverseModel model(std::move(dims), norm, bound);
  if (r.u64() != model.parameter_count()) throw IoError(r.path() + ": parameter count mismatch");
  r.f64s(model.parameters());
  if (!r.at_end()) throw IoError(r.path() + ": trailing bytes");
  return model;
}

void save_optimizer(const std::filesystem::path& path, const AdamOptimizer& opt) {
  binio::Writer w;
  w.bytes(kOptimizerMagic);
  w.u32(kFormatVersion);
  const AdamSettings& s = opt.settings();
  w.f64(s.learning_rate);
  w.f64(s.beta1);
  w.f64(s.beta2);
  w.f64(s.epsilon);
  w.u64(opt.step_count());
  w.u64(opt.first_moment().size());
  w.f64s(opt.first_moment());
  w.f64s(opt.second_moment());
  w.save(path);
}

AdamOptimizer load_optimizer(const std::filesystem::path& path) {
  binio::Reader r(path);
  if (r.bytes(kOptimizerMagic.size()) != kOptimizerMagic) {
    throw IoError(r.path() + ": not an optimizer state file");
  }
  if (r.u32() != kFormatVersion) throw IoError(r.path() + ": unsupported version");
  AdamSettings s;
  s.learning_rate = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.epsilon = r.f64();
  const std::uint64_t steps = r.u64();
  const std::uint64_t n = r.u64();
  std::vector<double> m(n), v(n);
  r.f64s(m);
  r.f64s(v);
  AdamOptimizer opt(n, s);
  opt.restore(steps, std::move(m), std::move(v));
  return opt;
}

}  // namespace rp::model
