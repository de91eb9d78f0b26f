#pragma once

// Scenario sampling, per-index seeding and the mission context built from a
// scenario plus the config.

#include "itg/config.hpp"

#include <json.hpp>

#include <cstdint>
#include <numbers>
#include <random>

namespace itg {

/// Initial state, context (chief mean anomaly, KOZ radius, navigation scale)
/// and operator intent.
struct Scenario {
  RoeState x0;
  double mean_anomaly = 0.0;  // rad
  double r_koz = 30.0;        // m
  double beta = 1.0;
  IntentPriority intent;
  std::uint64_t seed = 0;

  void validate() const {
    if (!x0.v.allFinite()) throw std::domain_error("scenario: x0 must be finite");
    if (!std::isfinite(mean_anomaly)) throw std::domain_error("scenario: mean anomaly must be finite");
    if (!(r_koz > 0.0)) throw std::domain_error("scenario: r_koz must be positive");
    if (!(beta > 0.0)) throw std::domain_error("scenario: beta must be positive");
  }
};

/// splitmix64 finalizer over (seed, index); independent streams per row.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<double> mean_anomaly_grid(int count) {
  if (count == 1) return {0.0};
  std::vector<double> m(count);
  for (int i = 0; i < count; ++i) m[i] = 2.0 * std::numbers::pi * i / (count - 1);
  return m;
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

inline IntentPriority random_intent(std::mt19937_64& rng) {
  std::array<Metric, 4> order = kAllMetrics;
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    std::swap(order[i], order[std::uniform_int_distribution<std::size_t>(0, i)(rng)]);
  }
  return IntentPriority(order);
}

/// x0 is uniform inside `start`.
inline Scenario sample_scenario(DomainId start, const HarnessConfig& h, std::mt19937_64& rng) {
  Scenario s;
  s.mean_anomaly = pick(mean_anomaly_grid(h.mean_anomaly_count), rng);
  s.r_koz = pick(h.r_koz_set, rng);
  s.beta = pick(h.beta_set, rng);
  s.x0 = sample_in_domain(start, rng).state();
  s.intent = random_intent(rng);
  return s;
}

/// Start domain uniform over the union of admissible starts.
inline Scenario sample_scenario(const HarnessConfig& h, std::mt19937_64& rng) {
  const std::vector<DomainId> starts = admissible_starts(CampaignType::Circumnavigation);
  return sample_scenario(pick(starts, rng), h, rng);
}

inline MissionContext make_mission_context(const Config& cfg, const Scenario& s) {
  MissionContext ctx;
  ctx.oe = cfg.dynamics.chief;
  ctx.oe.M = s.mean_anomaly;
  ctx.koz = KeepOutZone::sphere(s.r_koz, cfg.koz.delta_r_obs);
  ctx.uncertainty = cfg.uncertainty;
  ctx.uncertainty.beta = s.beta;
  ctx.dt = cfg.dynamics.dt;
  ctx.n_max = cfg.dynamics.n_max;
  ctx.scp = cfg.scp;
  ctx.gravity = cfg.dynamics.gravity;
  return ctx;
}

inline nlohmann::json to_json(const RoeState& x) { return std::vector<double>(x.v.data(), x.v.data() + 6); }

inline RoeState roe_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 6) throw std::domain_error("x0_roe_m must have 6 entries");
  return RoeState(Vec6(v.data()));
}

inline nlohmann::json to_json(const Scenario& s) {
  return {{"x0_roe_m", to_json(s.x0)}, {"mean_anomaly_rad", s.mean_anomaly}, {"r_koz_m", s.r_koz},
          {"beta", s.beta},           {"intent", s.intent.str()},           {"seed", s.seed}};
}

/// Throws std::domain_error on a missing or ill-typed field.
inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.x0 = roe_from_json(j.at("x0_roe_m"));
    s.mean_anomaly = j.value("mean_anomaly_rad", 0.0);
    s.r_koz = j.value("r_koz_m", 30.0);
    s.beta = j.value("beta", 1.0);
    if (j.contains("intent")) s.intent = IntentPriority::parse(j.at("intent").get<std::string>());
    s.seed = j.value("seed", std::uint64_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw std::domain_error(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace itg
