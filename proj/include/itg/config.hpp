#pragma once

// Single config document: dynamics, uncertainty, koz, scp, graph, reward,
// policy, reasoning and harness sections. Every field has a default; unknown
// keys are rejected.

#include "itg/graph.hpp"
#include "itg/policy.hpp"
#include "itg/reward.hpp"
#include "itg/scp.hpp"

#include <json.hpp>

#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>
#include <string>

namespace itg {

/// Malformed or missing configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DynamicsConfig {
  OrbitalElements chief = reference_chief();  // M is overridden per scenario
  double dt = 900.0;                          // s
  int n_max = kMaxSteps;
  GravityModel gravity = kEarth;
};

struct KozConfig {
  double delta_r_obs = 50.0;  // m, observation shell beyond r_koz
};

struct GraphConfig {
  DurationWindows durations;
  double domain_tolerance = 1.0;  // m
};

enum class ClientKind { Mock, Remote };

struct ReasoningConfig {
  ClientKind client = ClientKind::Mock;
  int candidates = 4;
  double temperature = 0.2;
  int max_tokens = 512;
  double timeout_s = 30.0;
  int max_attempts = 16;  // draws when looking for distinct candidates
  int concurrency = 4;    // in-flight remote requests and dataset worker threads
};

struct HarnessConfig {
  int n_train = 5000;
  int n_test = 100;
  int mean_anomaly_count = 20;  // M = linspace(0, 2 pi, count)
  std::vector<double> r_koz_set{20.0, 30.0, 40.0};
  std::vector<double> beta_set{0.75, 1.0, 1.25, 1.5, 2.0};
  bool train_on_failures = false;
};

struct Config {
  DynamicsConfig dynamics;
  UncertaintyConfig uncertainty;
  KozConfig koz;
  ScpSettings scp;
  GraphConfig graph;
  RewardConfig reward;
  TrainConfig policy;
  ReasoningConfig reasoning;
  HarnessConfig harness;

  void validate() const {
    try {
      dynamics.chief.validate();
      if (!(dynamics.dt > 0.0)) throw std::domain_error("dynamics: dt must be positive");
      if (dynamics.n_max < 1) throw std::domain_error("dynamics: n_max must be positive");
      uncertainty.validate();
      if (!(koz.delta_r_obs >= 0.0)) throw std::domain_error("koz: delta_r_obs must be nonnegative");
      scp.validate();
      graph.durations.validate();
      if (!(graph.domain_tolerance >= 0.0)) throw std::domain_error("graph: domain_tolerance must be nonnegative");
      reward.validate();
      policy.validate();
      if (reasoning.candidates < 2) throw std::domain_error("reasoning: candidates must be at least 2");
      if (reasoning.max_attempts < reasoning.candidates) throw std::domain_error("reasoning: max_attempts < candidates");
      if (reasoning.concurrency < 1) throw std::domain_error("reasoning: concurrency must be positive");
      if (!(reasoning.timeout_s > 0.0)) throw std::domain_error("reasoning: timeout_s must be positive");
      if (harness.n_train < 1 || harness.n_test < 1 || harness.mean_anomaly_count < 1 || harness.r_koz_set.empty() ||
          harness.beta_set.empty()) {
        throw std::domain_error("harness: counts and parameter sets must be non-empty");
      }
    } catch (const std::domain_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
  }
};

namespace detail {

// Reads each listed key into its field; any key left over is an error.
class Section {
 public:
  Section(const nlohmann::json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: section '" + name_ + "' must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("config: unknown key '" + name_ + "." + it.key() + "'");
    }
  }
  Section(const Section&) = delete;
  Section& operator=(const Section&) = delete;

  template <class T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: '" + name_ + "." + key + "': " + e.what());
    }
  }
  void interval(const char* key, Interval& iv) {
    std::vector<double> v{iv.lo, iv.hi};
    get(key, v);
    if (v.size() != 2) throw ConfigError("config: '" + name_ + "." + key + "' must be [lo, hi]");
    iv = {v[0], v[1]};
  }
  void degrees(const char* key, double& radians) {
    double d = radians * 180.0 / std::numbers::pi;
    get(key, d);
    radians = d * std::numbers::pi / 180.0;
  }
  const nlohmann::json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const nlohmann::json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Config config_from_json(const nlohmann::json& j) {
  Config c;
  detail::Section root(j, "root");
  if (const auto* s = root.child("dynamics")) {
    detail::Section d(*s, "dynamics");
    d.get("a_m", c.dynamics.chief.a);
    d.get("e", c.dynamics.chief.e);
    d.degrees("i_deg", c.dynamics.chief.i);
    d.degrees("raan_deg", c.dynamics.chief.raan);
    d.degrees("argp_deg", c.dynamics.chief.argp);
    d.get("dt_s", c.dynamics.dt);
    d.get("n_max", c.dynamics.n_max);
    d.get("j2", c.dynamics.gravity.j2);
  }
  if (const auto* s = root.child("uncertainty")) {
    detail::Section u(*s, "uncertainty");
    double q = c.uncertainty.q_process(0, 0);
    u.get("q_process_m2", q);
    c.uncertainty.q_process = Mat6::Identity() * q;
    u.get("gates_mag_frac", c.uncertainty.gates_mag_frac);
    u.get("gates_mag_fixed_mps", c.uncertainty.gates_mag_fixed);
    u.get("gates_point_sigma_rad", c.uncertainty.gates_point_sigma);
    u.get("tau_s", c.uncertainty.tau_s);
    u.get("drift_step_s", c.uncertainty.drift_step);
    u.get("delta_risk", c.uncertainty.delta_risk);
  }
  if (const auto* s = root.child("koz")) {
    detail::Section k(*s, "koz");
    k.get("delta_r_obs_m", c.koz.delta_r_obs);
  }
  if (const auto* s = root.child("scp")) {
    detail::Section p(*s, "scp");
    p.get("max_iters", c.scp.max_iters);
    p.get("trust_radius_x", c.scp.trust_radius_x);
    p.get("trust_radius_u", c.scp.trust_radius_u);
    p.get("trust_radius_max", c.scp.trust_radius_max);
    p.get("conv_tol_state", c.scp.conv_tol_state);
    p.get("conv_tol_cost", c.scp.conv_tol_cost);
    p.get("slack_penalty", c.scp.slack_penalty);
    p.get("feas_tol", c.scp.feas_tol);
    p.get("margin_buffer", c.scp.margin_buffer);
    p.get("reject_ratio", c.scp.reject_ratio);
    p.get("expand_ratio", c.scp.expand_ratio);
    std::string lin = c.scp.linearization == Linearization::FrozenUncertainty ? "frozen_uncertainty"
                      : c.scp.linearization == Linearization::Full            ? "full"
                                                                              : "frozen_covariance";
    p.get("linearization", lin);
    if (lin == "frozen_uncertainty") c.scp.linearization = Linearization::FrozenUncertainty;
    else if (lin == "frozen_covariance") c.scp.linearization = Linearization::FrozenCovariance;
    else if (lin == "full") c.scp.linearization = Linearization::Full;
    else throw ConfigError("config: scp.linearization must be frozen_uncertainty|frozen_covariance|full");
  }
  if (const auto* s = root.child("graph")) {
    detail::Section g(*s, "graph");
    g.interval("station_keeping_steps", c.graph.durations.station_keeping);
    g.interval("transfer_steps", c.graph.durations.transfer);
    g.interval("ducking_steps", c.graph.durations.ducking);
    g.get("domain_tolerance_m", c.graph.domain_tolerance);
  }
  if (const auto* s = root.child("reward")) {
    detail::Section r(*s, "reward");
    r.get("lambda", c.reward.lambda);
    r.get("sentinel_for_training", c.reward.sentinel_for_training);
    r.get("sentinel_for_reporting", c.reward.sentinel_for_reporting);
  }
  if (const auto* s = root.child("policy")) {
    detail::Section p(*s, "policy");
    p.get("hidden", c.policy.arch.hidden);
    p.get("log_sigma_min", c.policy.arch.log_sigma_min);
    p.get("log_sigma_max", c.policy.arch.log_sigma_max);
    p.get("epochs", c.policy.epochs);
    p.get("lr", c.policy.lr);
    p.get("momentum", c.policy.momentum);
    p.get("batch", c.policy.batch);
    p.get("validation_fraction", c.policy.validation_fraction);
    p.get("grad_clip", c.policy.grad_clip);
    p.get("reward_weighted", c.policy.reward_weighted);
  }
  if (const auto* s = root.child("reasoning")) {
    detail::Section r(*s, "reasoning");
    std::string client = c.reasoning.client == ClientKind::Mock ? "mock" : "remote";
    r.get("client", client);
    if (client != "mock" && client != "remote") throw ConfigError("config: reasoning.client must be mock|remote");
    c.reasoning.client = client == "mock" ? ClientKind::Mock : ClientKind::Remote;
    r.get("candidates", c.reasoning.candidates);
    r.get("temperature", c.reasoning.temperature);
    r.get("max_tokens", c.reasoning.max_tokens);
    r.get("timeout_s", c.reasoning.timeout_s);
    r.get("max_attempts", c.reasoning.max_attempts);
    r.get("concurrency", c.reasoning.concurrency);
  }
  if (const auto* s = root.child("harness")) {
    detail::Section h(*s, "harness");
    h.get("n_train", c.harness.n_train);
    h.get("n_test", c.harness.n_test);
    h.get("mean_anomaly_count", c.harness.mean_anomaly_count);
    h.get("r_koz_set_m", c.harness.r_koz_set);
    h.get("beta_set", c.harness.beta_set);
    h.get("train_on_failures", c.harness.train_on_failures);
  }
  c.validate();
  return c;
}

inline nlohmann::json to_json(const Config& c) {
  constexpr double deg = 180.0 / std::numbers::pi;
  auto iv = [](const Interval& i) { return std::vector<double>{i.lo, i.hi}; };
  const char* lin = c.scp.linearization == Linearization::FrozenUncertainty ? "frozen_uncertainty"
                    : c.scp.linearization == Linearization::Full            ? "full"
                                                                            : "frozen_covariance";
  return {
      {"dynamics",
       {{"a_m", c.dynamics.chief.a}, {"e", c.dynamics.chief.e}, {"i_deg", c.dynamics.chief.i * deg},
        {"raan_deg", c.dynamics.chief.raan * deg}, {"argp_deg", c.dynamics.chief.argp * deg},
        {"dt_s", c.dynamics.dt}, {"n_max", c.dynamics.n_max}, {"j2", c.dynamics.gravity.j2}}},
      {"uncertainty",
       {{"q_process_m2", c.uncertainty.q_process(0, 0)}, {"gates_mag_frac", c.uncertainty.gates_mag_frac},
        {"gates_mag_fixed_mps", c.uncertainty.gates_mag_fixed},
        {"gates_point_sigma_rad", c.uncertainty.gates_point_sigma}, {"tau_s", c.uncertainty.tau_s},
        {"drift_step_s", c.uncertainty.drift_step}, {"delta_risk", c.uncertainty.delta_risk}}},
      {"koz", {{"delta_r_obs_m", c.koz.delta_r_obs}}},
      {"scp",
       {{"max_iters", c.scp.max_iters}, {"trust_radius_x", c.scp.trust_radius_x},
        {"trust_radius_u", c.scp.trust_radius_u}, {"trust_radius_max", c.scp.trust_radius_max},
        {"conv_tol_state", c.scp.conv_tol_state}, {"conv_tol_cost", c.scp.conv_tol_cost},
        {"slack_penalty", c.scp.slack_penalty}, {"feas_tol", c.scp.feas_tol}, {"margin_buffer", c.scp.margin_buffer},
        {"reject_ratio", c.scp.reject_ratio}, {"expand_ratio", c.scp.expand_ratio}, {"linearization", lin}}},
      {"graph",
       {{"station_keeping_steps", iv(c.graph.durations.station_keeping)},
        {"transfer_steps", iv(c.graph.durations.transfer)}, {"ducking_steps", iv(c.graph.durations.ducking)},
        {"domain_tolerance_m", c.graph.domain_tolerance}}},
      {"reward",
       {{"lambda", c.reward.lambda}, {"sentinel_for_training", c.reward.sentinel_for_training},
        {"sentinel_for_reporting", c.reward.sentinel_for_reporting}}},
      {"policy",
       {{"hidden", c.policy.arch.hidden}, {"log_sigma_min", c.policy.arch.log_sigma_min},
        {"log_sigma_max", c.policy.arch.log_sigma_max}, {"epochs", c.policy.epochs}, {"lr", c.policy.lr},
        {"momentum", c.policy.momentum}, {"batch", c.policy.batch},
        {"validation_fraction", c.policy.validation_fraction}, {"grad_clip", c.policy.grad_clip},
        {"reward_weighted", c.policy.reward_weighted}}},
      {"reasoning",
       {{"client", c.reasoning.client == ClientKind::Mock ? "mock" : "remote"},
        {"candidates", c.reasoning.candidates}, {"temperature", c.reasoning.temperature},
        {"max_tokens", c.reasoning.max_tokens}, {"timeout_s", c.reasoning.timeout_s},
        {"max_attempts", c.reasoning.max_attempts}, {"concurrency", c.reasoning.concurrency}}},
      {"harness",
       {{"n_train", c.harness.n_train}, {"n_test", c.harness.n_test},
        {"mean_anomaly_count", c.harness.mean_anomaly_count}, {"r_koz_set_m", c.harness.r_koz_set},
        {"beta_set", c.harness.beta_set}, {"train_on_failures", c.harness.train_on_failures}}},
  };
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace itg
