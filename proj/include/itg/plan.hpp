#pragma once

// Waypoint plans: K waypoints in the reduced (d_lambda, d_ey = d_iy) plane plus
// per-phase integer step counts.

#include "itg/astro.hpp"

#include <numeric>
#include <stdexcept>
#include <vector>

namespace itg {

inline constexpr int kMaxPhases = 3;
inline constexpr int kMaxSteps = 100;

struct Waypoint {
  double d_lambda = 0.0;  // m
  double d_eyiy = 0.0;    // m, shared d_ey = d_iy

  RoeState state() const { return RoeState(0.0, d_lambda, 0.0, d_eyiy, 0.0, d_eyiy); }
  static Waypoint from_state(const RoeState& x) { return {x.d_lambda(), 0.5 * (x.d_ey() + x.d_iy())}; }
};

struct WaypointPlan {
  std::vector<Waypoint> waypoints;
  std::vector<int> durations;  // steps per phase

  int phases() const { return static_cast<int>(waypoints.size()); }
  int total_steps() const { return std::accumulate(durations.begin(), durations.end(), 0); }

  void validate(int k_max = kMaxPhases, int n_max = kMaxSteps) const {
    if (waypoints.empty()) throw std::domain_error("plan: no waypoints");
    if (waypoints.size() != durations.size()) throw std::domain_error("plan: waypoint/duration count mismatch");
    if (phases() > k_max) throw std::domain_error("plan: more phases than K_max");
    for (int d : durations) {
      if (d < 1) throw std::domain_error("plan: durations must be positive");
    }
    if (total_steps() > n_max) throw std::domain_error("plan: total steps exceed N_max");
  }
};

}  // namespace itg
