#pragma once

// Conditional-Gaussian waypoint generator: featurization, a SiLU MLP with a
// diagonal Gaussian head, hand-written backpropagation, reward-weighted MLE
// training and inference.

#include "itg/graph.hpp"
#include "itg/reward.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace itg {

inline constexpr int kBehaviorCategories = kNumPrimitives + 1;  // last one is the no-op pad
inline constexpr int kFeatureDim = 6 + 1 + kMaxPhases * kBehaviorCategories + 4;
inline constexpr int kOutputDim = 3 * kMaxPhases;               // (d_lambda, d_eyiy, d_k) per phase
inline constexpr int kPolicySchemaVersion = 1;

/// Everything the generator conditions on.
struct PolicyConditioning {
  RoeState x0;
  double t_f = 0.0;                  // s
  std::vector<Primitive> behaviors;  // at most kMaxPhases
  double mean_anomaly = 0.0;         // rad, chief
  double r_koz = 30.0;               // m
  double beta = 1.0;
};

inline Eigen::VectorXd raw_features(const PolicyConditioning& c) {
  if (c.behaviors.size() > static_cast<std::size_t>(kMaxPhases)) {
    throw std::domain_error("featurize: behavior sequence longer than K_max");
  }
  Eigen::VectorXd f = Eigen::VectorXd::Zero(kFeatureDim);
  f.head<6>() = c.x0.v;
  f[6] = c.t_f;
  for (int k = 0; k < kMaxPhases; ++k) {
    const int cat = k < static_cast<int>(c.behaviors.size()) ? static_cast<int>(c.behaviors[k]) - 1
                                                             : kBehaviorCategories - 1;
    f[7 + k * kBehaviorCategories + cat] = 1.0;
  }
  const int z = 7 + kMaxPhases * kBehaviorCategories;
  f[z] = std::sin(c.mean_anomaly);
  f[z + 1] = std::cos(c.mean_anomaly);
  f[z + 2] = c.r_koz;
  f[z + 3] = c.beta;
  return f;
}

/// Affine map of plan coordinates onto [-1, 1]: the domain-box hull and the
/// duration-window hull.
struct OutputScale {
  Interval d_lambda{-250.0, 250.0};
  Interval d_eyiy{-5.0, 70.0};
  Interval duration{4.0, 40.0};

  const Interval& axis(int i) const { return i % 3 == 0 ? d_lambda : (i % 3 == 1 ? d_eyiy : duration); }
  double encode(int i, double v) const {
    const Interval& a = axis(i);
    return (2.0 * v - (a.lo + a.hi)) / a.width();
  }
  double decode(int i, double y) const {
    const Interval& a = axis(i);
    return 0.5 * (y * a.width() + a.lo + a.hi);
  }
};

struct DenseLayer {
  Eigen::MatrixXd w;  // out x in
  Eigen::VectorXd b;
};

struct PolicyWeights {
  int schema_version = kPolicySchemaVersion;
  Eigen::VectorXd feature_mean = Eigen::VectorXd::Zero(kFeatureDim);
  Eigen::VectorXd feature_std = Eigen::VectorXd::Ones(kFeatureDim);
  std::vector<DenseLayer> layers;  // hidden layers then the head (2 * kOutputDim outputs)
  double log_sigma_min = -5.0;
  double log_sigma_max = 2.0;
  OutputScale scale;

  int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().w.cols()); }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
  }
};

struct PolicyArchitecture {
  std::vector<int> hidden{128, 128, 128};
  double log_sigma_min = -5.0;
  double log_sigma_max = 2.0;

  void validate() const {
    if (hidden.empty()) throw std::domain_error("policy: at least one hidden layer");
    for (int h : hidden) {
      if (h < 1) throw std::domain_error("policy: hidden widths must be positive");
    }
    if (!(log_sigma_min < log_sigma_max)) throw std::domain_error("policy: log-sigma clamp must be an interval");
  }
};

inline PolicyWeights init_policy(const PolicyArchitecture& arch, std::mt19937_64& rng, int input_dim = kFeatureDim) {
  arch.validate();
  PolicyWeights w;
  w.log_sigma_min = arch.log_sigma_min;
  w.log_sigma_max = arch.log_sigma_max;
  w.feature_mean = Eigen::VectorXd::Zero(input_dim);
  w.feature_std = Eigen::VectorXd::Ones(input_dim);
  std::normal_distribution<double> nd;
  int fan_in = input_dim;
  auto layer = [&](int out, double gain) {
    DenseLayer l{Eigen::MatrixXd(out, fan_in), Eigen::VectorXd::Zero(out)};
    const double s = gain / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < l.w.size(); ++i) l.w.data()[i] = s * nd(rng);
    fan_in = out;
    return l;
  };
  for (int h : arch.hidden) w.layers.push_back(layer(h, std::sqrt(2.0)));
  w.layers.push_back(layer(2 * kOutputDim, 0.1));
  return w;
}

inline Eigen::VectorXd featurize(const PolicyWeights& w, const PolicyConditioning& c) {
  return (raw_features(c) - w.feature_mean).cwiseQuotient(w.feature_std);
}

/// Per-coordinate mean and std of raw features; constant columns keep std 1.
inline void fit_feature_stats(PolicyWeights& w, const Eigen::MatrixXd& raw /* dim x n */) {
  const double n = static_cast<double>(raw.cols());
  w.feature_mean = raw.rowwise().mean();
  w.feature_std.resize(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    const double var = (raw.row(i).array() - w.feature_mean[i]).square().sum() / n;
    w.feature_std[i] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
}

namespace detail {

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }
inline double silu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

struct ForwardPass {
  std::vector<Eigen::MatrixXd> pre;   // pre-activations per layer
  std::vector<Eigen::MatrixXd> act;   // act[0] = input, act[l+1] = output of layer l
};

inline ForwardPass run_forward(const PolicyWeights& w, const Eigen::MatrixXd& x) {
  if (x.rows() != w.input_dim()) throw std::domain_error("policy: input dimension mismatch");
  ForwardPass f;
  f.act.push_back(x);
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    Eigen::MatrixXd z = w.layers[l].w * f.act.back();
    z.colwise() += w.layers[l].b;
    f.pre.push_back(z);
    if (l + 1 < w.layers.size()) z = z.unaryExpr(&silu);
    f.act.push_back(std::move(z));
  }
  return f;
}

}  // namespace detail

struct GaussianHead {
  Eigen::MatrixXd mu;         // kOutputDim x batch
  Eigen::MatrixXd log_sigma;  // clamped
};

inline GaussianHead forward(const PolicyWeights& w, const Eigen::MatrixXd& x) {
  const detail::ForwardPass f = detail::run_forward(w, x);
  const Eigen::MatrixXd& out = f.act.back();
  return {out.topRows(kOutputDim), out.bottomRows(kOutputDim).cwiseMax(w.log_sigma_min).cwiseMin(w.log_sigma_max)};
}

struct NllResult {
  double loss = 0.0;                // sum_i weight_i * NLL_i
  std::vector<DenseLayer> grad;     // same shapes as the weights
};

/// Weighted diagonal-Gaussian NLL over masked outputs and its gradient.
/// y, mask: kOutputDim x batch; sample_weight: batch.
inline NllResult nll(const PolicyWeights& w, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const Eigen::MatrixXd& mask, const Eigen::VectorXd& sample_weight) {
  const detail::ForwardPass f = detail::run_forward(w, x);
  const Eigen::MatrixXd& out = f.act.back();
  const Eigen::Index batch = x.cols();
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);

  NllResult r;
  Eigen::MatrixXd delta(2 * kOutputDim, batch);  // dLoss / d(head pre-activation)
  for (Eigen::Index i = 0; i < batch; ++i) {
    double nll_i = 0.0;
    for (int d = 0; d < kOutputDim; ++d) {
      const double raw_ls = out(kOutputDim + d, i);
      const double ls = std::clamp(raw_ls, w.log_sigma_min, w.log_sigma_max);
      const double m = mask(d, i);
      const double z = (y(d, i) - out(d, i)) * std::exp(-ls);
      nll_i += m * (0.5 * z * z + ls + half_log_2pi);
      delta(d, i) = -sample_weight[i] * m * z * std::exp(-ls);
      const bool inside = raw_ls > w.log_sigma_min && raw_ls < w.log_sigma_max;
      delta(kOutputDim + d, i) = inside ? sample_weight[i] * m * (1.0 - z * z) : 0.0;
    }
    r.loss += sample_weight[i] * nll_i;
  }

  r.grad.resize(w.layers.size());
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    r.grad[l].w = delta * f.act[l].transpose();
    r.grad[l].b = delta.rowwise().sum();
    if (l == 0) break;
    delta = (w.layers[l].w.transpose() * delta).cwiseProduct(f.pre[l - 1].unaryExpr(&detail::silu_grad));
  }
  return r;
}

/// Plan in normalized output space with a mask over the active phases.
struct EncodedPlan {
  Eigen::VectorXd y = Eigen::VectorXd::Zero(kOutputDim);
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(kOutputDim);
};

inline EncodedPlan encode_plan(const WaypointPlan& p, const OutputScale& s = {}) {
  if (p.phases() > kMaxPhases) throw std::domain_error("encode_plan: more phases than K_max");
  EncodedPlan e;
  for (int k = 0; k < p.phases(); ++k) {
    e.y[3 * k] = s.encode(3 * k, p.waypoints[k].d_lambda);
    e.y[3 * k + 1] = s.encode(3 * k + 1, p.waypoints[k].d_eyiy);
    e.y[3 * k + 2] = s.encode(3 * k + 2, p.durations[k]);
    e.mask.segment<3>(3 * k).setOnes();
  }
  return e;
}

/// Rounds positive real durations to integers >= 1 summing to `total`
/// (proportional rescale, then largest remainder).
inline std::vector<int> project_durations(const std::vector<double>& raw, int total) {
  const int k = static_cast<int>(raw.size());
  if (k == 0) return {};
  if (total < k) throw std::domain_error("project_durations: total shorter than one step per phase");
  std::vector<double> r(raw.size());
  double sum = 0.0;
  for (int i = 0; i < k; ++i) sum += (r[i] = std::isfinite(raw[i]) ? std::max(raw[i], 1.0) : 1.0);
  // one step reserved per phase, the rest shared proportionally
  const int spare = total - k;
  std::vector<int> d(k, 1);
  std::vector<std::pair<double, int>> frac;
  int used = 0;
  for (int i = 0; i < k; ++i) {
    const double share = spare * r[i] / sum;
    const int whole = static_cast<int>(std::floor(share));
    d[i] += whole;
    used += whole;
    frac.emplace_back(share - whole, i);
  }
  std::stable_sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int i = 0; used < spare; ++i, ++used) ++d[frac[i].second];
  return d;
}

enum class InferMode { Mean, Sample };

/// Plan for the first |behaviors| phases; durations sum to round(t_f / dt).
inline WaypointPlan infer(const PolicyWeights& w, const PolicyConditioning& c, double dt = 900.0,
                          InferMode mode = InferMode::Mean, std::uint64_t seed = 0) {
  const int k = static_cast<int>(c.behaviors.size());
  if (k < 1) throw std::domain_error("infer: empty behavior sequence");
  const GaussianHead h = forward(w, featurize(w, c));
  Eigen::VectorXd y = h.mu.col(0);
  if (mode == InferMode::Sample) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    for (int d = 0; d < kOutputDim; ++d) y[d] += std::exp(h.log_sigma(d, 0)) * nd(rng);
  }
  WaypointPlan p;
  std::vector<double> raw_d;
  for (int i = 0; i < k; ++i) {
    p.waypoints.push_back({w.scale.decode(3 * i, y[3 * i]), w.scale.decode(3 * i + 1, y[3 * i + 1])});
    raw_d.push_back(w.scale.decode(3 * i + 2, y[3 * i + 2]));
  }
  p.durations = project_durations(raw_d, static_cast<int>(std::lround(c.t_f / dt)));
  return p;
}

struct TrainingSample {
  PolicyConditioning x;
  WaypointPlan y;
  double reward = 0.0;
};

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  double momentum = 0.9;
  int batch = 256;
  double validation_fraction = 0.1;
  double grad_clip = 10.0;  // global gradient-norm cap; <= 0 disables
  bool reward_weighted = true;
  std::uint64_t seed = 0;
  PolicyArchitecture arch;

  void validate() const {
    if (epochs < 1 || batch < 1 || !(lr > 0.0) || momentum < 0.0 || momentum >= 1.0 ||
        validation_fraction < 0.0 || validation_fraction >= 1.0) {
      throw std::domain_error("train: invalid configuration");
    }
    arch.validate();
  }
};

struct EpochStats {
  double train_nll = 0.0;  // mean per-sample NLL, unweighted
  double validation_nll = 0.0;
};

struct TrainingResult {
  PolicyWeights weights;
  double initial_validation_nll = 0.0;
  std::vector<EpochStats> history;
};

struct EncodedSet {
  Eigen::MatrixXd x, y, mask;
  Eigen::VectorXd reward;
};

inline EncodedSet encode_samples(const PolicyWeights& w, const std::vector<TrainingSample>& data,
                                 const std::vector<std::size_t>& idx) {
  const Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  EncodedSet s{Eigen::MatrixXd(w.input_dim(), n), Eigen::MatrixXd(kOutputDim, n), Eigen::MatrixXd(kOutputDim, n),
               Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const TrainingSample& t = data[idx[i]];
    s.x.col(i) = featurize(w, t.x);
    const EncodedPlan e = encode_plan(t.y, w.scale);
    s.y.col(i) = e.y;
    s.mask.col(i) = e.mask;
    s.reward[i] = t.reward;
  }
  return s;
}

/// Mean unweighted NLL per sample.
inline double mean_nll(const PolicyWeights& w, const EncodedSet& s) {
  if (s.x.cols() == 0) return 0.0;
  const Eigen::VectorXd ones = Eigen::VectorXd::Constant(s.x.cols(), 1.0 / static_cast<double>(s.x.cols()));
  return nll(w, s.x, s.y, s.mask, ones).loss;
}

/// Minibatch momentum descent with cosine learning-rate decay on the
/// (optionally reward-weighted) NLL.
inline TrainingResult train(const std::vector<TrainingSample>& data, const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw std::domain_error("train: empty dataset");
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_val = static_cast<std::size_t>(cfg.validation_fraction * static_cast<double>(data.size()));
  const std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (train_idx.empty()) throw std::domain_error("train: no training rows after the validation split");

  TrainingResult out;
  PolicyWeights& w = out.weights;
  w = init_policy(cfg.arch, rng);
  Eigen::MatrixXd raw(kFeatureDim, static_cast<Eigen::Index>(train_idx.size()));
  for (std::size_t i = 0; i < train_idx.size(); ++i) raw.col(static_cast<Eigen::Index>(i)) = raw_features(data[train_idx[i]].x);
  fit_feature_stats(w, raw);

  const EncodedSet train_set = encode_samples(w, data, train_idx);
  const EncodedSet val_set = encode_samples(w, data, val_idx);
  out.initial_validation_nll = mean_nll(w, val_set);

  std::vector<DenseLayer> velocity;
  for (const auto& l : w.layers) velocity.push_back({Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()), Eigen::VectorXd::Zero(l.b.size())});

  const std::size_t n = train_idx.size();
  const std::size_t batches = (n + cfg.batch - 1) / cfg.batch;
  const double total_steps = static_cast<double>(batches * cfg.epochs);
  std::vector<Eigen::Index> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::size_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(perm.begin(), perm.end(), rng);
    for (std::size_t b = 0; b < batches; ++b, ++step) {
      const std::size_t lo = b * cfg.batch, hi = std::min(n, lo + cfg.batch);
      const Eigen::Index m = static_cast<Eigen::Index>(hi - lo);
      Eigen::MatrixXd x(w.input_dim(), m), y(kOutputDim, m), mk(kOutputDim, m);
      std::vector<double> rewards(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        const Eigen::Index c = perm[lo + i];
        x.col(i) = train_set.x.col(c);
        y.col(i) = train_set.y.col(c);
        mk.col(i) = train_set.mask.col(c);
        rewards[i] = train_set.reward[c];
      }
      Eigen::VectorXd sw(m);
      if (cfg.reward_weighted) {
        const std::vector<double> bw = batch_weights(rewards);
        for (Eigen::Index i = 0; i < m; ++i) sw[i] = bw[i];
      } else {
        sw.setConstant(1.0 / static_cast<double>(m));
      }
      const NllResult r = nll(w, x, y, mk, sw);
      if (!std::isfinite(r.loss)) {
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b));
      }
      double norm2 = 0.0;
      for (const auto& g : r.grad) norm2 += g.w.squaredNorm() + g.b.squaredNorm();
      const double clip = cfg.grad_clip > 0.0 && norm2 > cfg.grad_clip * cfg.grad_clip
                              ? cfg.grad_clip / std::sqrt(norm2)
                              : 1.0;
      const double lr = clip * cfg.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      for (std::size_t l = 0; l < w.layers.size(); ++l) {
        velocity[l].w = cfg.momentum * velocity[l].w - lr * r.grad[l].w;
        velocity[l].b = cfg.momentum * velocity[l].b - lr * r.grad[l].b;
        w.layers[l].w += velocity[l].w;
        w.layers[l].b += velocity[l].b;
      }
    }
    out.history.push_back({mean_nll(w, train_set), mean_nll(w, val_set)});
  }
  return out;
}

// Persistence: {schema_version, feature_stats{mean, std}, layers[{rows, cols,
// weights (row-major), bias}], clamp{log_sigma_min, log_sigma_max},
// activation, output_scale}.

inline nlohmann::json to_json(const PolicyWeights& w) {
  using nlohmann::json;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  json layers = json::array();
  for (const auto& l : w.layers) {
    std::vector<double> rm;
    rm.reserve(static_cast<std::size_t>(l.w.size()));
    for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.w.cols(); ++j) rm.push_back(l.w(i, j));
    }
    layers.push_back({{"rows", l.w.rows()}, {"cols", l.w.cols()}, {"weights", rm}, {"bias", vec(l.b)}});
  }
  auto iv = [](const Interval& i) { return json::array({i.lo, i.hi}); };
  return {{"schema_version", w.schema_version},
          {"activation", "silu"},
          {"feature_stats", {{"mean", vec(w.feature_mean)}, {"std", vec(w.feature_std)}}},
          {"layers", layers},
          {"clamp", {{"log_sigma_min", w.log_sigma_min}, {"log_sigma_max", w.log_sigma_max}}},
          {"output_scale", {{"d_lambda", iv(w.scale.d_lambda)}, {"d_eyiy", iv(w.scale.d_eyiy)}, {"duration", iv(w.scale.duration)}}}};
}

inline PolicyWeights policy_from_json(const nlohmann::json& j) {
  PolicyWeights w;
  w.schema_version = j.at("schema_version").get<int>();
  if (w.schema_version != kPolicySchemaVersion) {
    throw std::domain_error("policy weights: unsupported schema_version " + std::to_string(w.schema_version));
  }
  auto vec = [](const nlohmann::json& a) {
    const auto v = a.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  w.feature_mean = vec(j.at("feature_stats").at("mean"));
  w.feature_std = vec(j.at("feature_stats").at("std"));
  for (const auto& l : j.at("layers")) {
    const Eigen::Index rows = l.at("rows").get<Eigen::Index>(), cols = l.at("cols").get<Eigen::Index>();
    const auto rm = l.at("weights").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(rm.size()) != rows * cols) throw std::domain_error("policy weights: layer size mismatch");
    DenseLayer d{Eigen::MatrixXd(rows, cols), vec(l.at("bias"))};
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) d.w(i, c) = rm[static_cast<std::size_t>(i * cols + c)];
    }
    w.layers.push_back(std::move(d));
  }
  w.log_sigma_min = j.at("clamp").at("log_sigma_min").get<double>();
  w.log_sigma_max = j.at("clamp").at("log_sigma_max").get<double>();
  if (j.contains("output_scale")) {
    auto iv = [](const nlohmann::json& a) { return Interval{a.at(0).get<double>(), a.at(1).get<double>()}; };
    const auto& s = j.at("output_scale");
    w.scale = {iv(s.at("d_lambda")), iv(s.at("d_eyiy")), iv(s.at("duration"))};
  }
  if (w.layers.empty() || w.layers.back().w.rows() != 2 * kOutputDim ||
      w.feature_mean.size() != w.input_dim() || w.feature_std.size() != w.input_dim()) {
    throw std::domain_error("policy weights: inconsistent shapes");
  }
  return w;
}

}  // namespace itg
