#pragma once

// Trajectory scoring: control cost, observation reward, composite reward,
// evaluation metrics and batch reward weights.

#include "itg/scp.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace itg {

enum class Metric { Fuel, Time, Observation, SafetyMargin };
inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::Fuel, Metric::Time, Metric::Observation,
                                                      Metric::SafetyMargin};

/// Wire identifiers.
inline constexpr std::string_view metric_name(Metric m) {
  constexpr std::array<std::string_view, 4> names = {"fuel_dv", "transfer_time_sec", "observation_score",
                                                     "safety_margin_m"};
  return names[static_cast<int>(m)];
}

/// Intent vocabulary used in priority lists.
inline constexpr std::string_view intent_name(Metric m) {
  constexpr std::array<std::string_view, 4> names = {"fuel", "time", "observation", "safety_margin"};
  return names[static_cast<int>(m)];
}

inline constexpr bool lower_is_better(Metric m) { return m == Metric::Fuel || m == Metric::Time; }

inline Metric metric_from_string(std::string_view s) {
  for (Metric m : kAllMetrics) {
    if (s == metric_name(m) || s == intent_name(m)) return m;
  }
  throw std::domain_error("unknown metric '" + std::string(s) + "'");
}

/// Ordered permutation of the four metrics.
class IntentPriority {
 public:
  IntentPriority() : order_(kAllMetrics) {}
  explicit IntentPriority(std::array<Metric, 4> order) : order_(order) {
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = i + 1; j < 4; ++j) {
        if (order_[i] == order_[j]) throw std::domain_error("intent priority must list four distinct metrics");
      }
    }
  }

  /// "fuel,time,observation,safety_margin" (wire names accepted too).
  static IntentPriority parse(std::string_view text) {
    std::array<Metric, 4> order{};
    std::size_t count = 0, pos = 0;
    while (pos <= text.size()) {
      std::size_t end = text.find(',', pos);
      if (end == std::string_view::npos) end = text.size();
      std::string_view tok = text.substr(pos, end - pos);
      while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
      while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
      if (count == 4) throw std::domain_error("intent priority has more than four entries");
      order[count++] = metric_from_string(tok);
      pos = end + 1;
    }
    if (count != 4) throw std::domain_error("intent priority needs exactly four entries");
    return IntentPriority(order);
  }

  Metric operator[](std::size_t i) const { return order_[i]; }
  const std::array<Metric, 4>& order() const { return order_; }

  std::string str() const {
    std::string s;
    for (Metric m : order_) s += (s.empty() ? "" : ",") + std::string(intent_name(m));
    return s;
  }

  friend bool operator==(const IntentPriority&, const IntentPriority&) = default;

 private:
  std::array<Metric, 4> order_;
};

struct MetricVector {
  double fuel_dv = 0.0;             // m/s
  double transfer_time_sec = 0.0;   // s
  double observation_score = 0.0;   // m, <= 0
  double safety_margin_m = 0.0;     // m

  double get(Metric m) const {
    switch (m) {
      case Metric::Fuel: return fuel_dv;
      case Metric::Time: return transfer_time_sec;
      case Metric::Observation: return observation_score;
      case Metric::SafetyMargin: return safety_margin_m;
    }
    return 0.0;
  }

  /// Strictly better on one metric, respecting its direction.
  bool better(Metric m, const MetricVector& o) const {
    return lower_is_better(m) ? get(m) < o.get(m) : get(m) > o.get(m);
  }
};

struct RewardConfig {
  double lambda = 10.0;                 // per m/s
  bool sentinel_for_training = true;    // never-observing trajectories score -r_koz in training rewards
  bool sentinel_for_reporting = false;

  void validate() const {
    if (!(lambda >= 0.0)) throw std::domain_error("reward: lambda must be nonnegative");
  }
};

inline double control_cost(const std::vector<Impulse>& u) {
  double c = 0.0;
  for (const Impulse& i : u) c += i.dv.norm();
  return c;
}

inline double control_cost(const Trajectory& t) { return control_cost(t.impulses); }

inline std::vector<double> ranges(const Trajectory& t, const OrbitalElements& oe, const GravityModel& g = kEarth) {
  std::vector<double> r(t.states.size());
  for (std::size_t j = 0; j < r.size(); ++j) r[j] = range(t.states[j], oe, t.epochs[j], g);
  return r;
}

/// Mean negative range over the contiguous interval spanning the first and
/// last epochs inside the observation shell, normalized by the step count.
/// `empty_value` is returned when the shell is never entered.
inline double observation_reward(const std::vector<double>& rho, int n_steps, double shell_radius,
                                 double empty_value = 0.0) {
  int first = -1, last = -1;
  for (int j = 0; j < static_cast<int>(rho.size()); ++j) {
    if (rho[j] <= shell_radius) {
      if (first < 0) first = j;
      last = j;
    }
  }
  if (first < 0) return empty_value;
  double s = 0.0;
  for (int j = first; j <= last; ++j) s += rho[j];
  return -s / std::max(n_steps, 1);
}

inline double observation_reward(const Trajectory& t, const KeepOutZone& koz, const OrbitalElements& oe,
                                 double empty_value = 0.0, const GravityModel& g = kEarth) {
  return observation_reward(ranges(t, oe, g), static_cast<int>(t.impulses.size()), koz.r_koz + koz.delta_r_obs,
                            empty_value);
}

inline double composite_reward(double control, double observation, double lambda) {
  if (!(lambda >= 0.0)) throw std::domain_error("reward: lambda must be nonnegative");
  return -lambda * control + observation;
}

inline double composite_reward(const Trajectory& t, double lambda, const KeepOutZone& koz, const OrbitalElements& oe,
                               double empty_value = 0.0, const GravityModel& g = kEarth) {
  return composite_reward(control_cost(t), observation_reward(t, koz, oe, empty_value, g), lambda);
}

/// Training reward under a config (sentinel for trajectories that never observe).
inline double training_reward(const Trajectory& t, const RewardConfig& cfg, const KeepOutZone& koz,
                              const OrbitalElements& oe, const GravityModel& g = kEarth) {
  return composite_reward(t, cfg.lambda, koz, oe, cfg.sentinel_for_training ? -koz.r_koz : 0.0, g);
}

inline MetricVector metric_vector(const Trajectory& t, const KeepOutZone& koz, const OrbitalElements& oe, double dt,
                                  const RewardConfig& cfg = {}, const GravityModel& g = kEarth) {
  const std::vector<double> rho = ranges(t, oe, g);
  MetricVector m;
  m.fuel_dv = control_cost(t);
  m.transfer_time_sec = static_cast<double>(t.impulses.size()) * dt;
  m.observation_score = observation_reward(rho, static_cast<int>(t.impulses.size()), koz.r_koz + koz.delta_r_obs,
                                           cfg.sentinel_for_reporting ? -koz.r_koz : 0.0);
  m.safety_margin_m = (rho.empty() ? 0.0 : *std::min_element(rho.begin(), rho.end())) - koz.r_koz;
  return m;
}

/// w_i = (R_i - R_min) / sum_j (R_j - R_min); uniform when all rewards are equal.
inline std::vector<double> batch_weights(const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::domain_error("batch_weights: empty batch");
  const double r_min = *std::min_element(rewards.begin(), rewards.end());
  std::vector<double> w(rewards.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += (w[i] = rewards[i] - r_min);
  if (!(sum > 0.0)) {
    std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(w.size()));
    return w;
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace itg
