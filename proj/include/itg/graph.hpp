#pragma once

// Waypoint/behavior-primitive graph over the five canonical relative-orbit
// domains, campaign templates and structured sampling.

#include "itg/plan.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace itg {

enum class DomainId { A_central, B_plusV_safe, C_plusV_axis, D_minusV_safe, E_minusV_axis };
inline constexpr int kNumDomains = 5;

inline constexpr std::array<DomainId, kNumDomains> kAllDomains = {
    DomainId::A_central, DomainId::B_plusV_safe, DomainId::C_plusV_axis, DomainId::D_minusV_safe,
    DomainId::E_minusV_axis};

inline constexpr std::string_view to_string(DomainId d) {
  constexpr std::array<std::string_view, kNumDomains> names = {
      "A_central", "B_plusV_safe", "C_plusV_axis", "D_minusV_safe", "E_minusV_axis"};
  return names[static_cast<int>(d)];
}

inline constexpr char letter(DomainId d) { return static_cast<char>('a' + static_cast<int>(d)); }

inline DomainId domain_from_string(std::string_view s) {
  for (DomainId d : kAllDomains) {
    if (s == to_string(d) || (s.size() == 1 && (s[0] == letter(d) || s[0] == letter(d) - 32))) return d;
  }
  throw std::domain_error("unknown domain '" + std::string(s) + "'");
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double distance(double v) const { return v < lo ? lo - v : (v > hi ? v - hi : 0.0); }
};

/// Box in the reduced (d_lambda, d_ey = d_iy) plane; d_a = d_ex = d_ix = 0.
struct DomainBox {
  Interval d_lambda;
  Interval d_eyiy;

  bool contains(double lam, double eyiy) const { return distance(lam, eyiy) == 0.0; }
  /// L-infinity distance to the box.
  double distance(double lam, double eyiy) const {
    return std::max(d_lambda.distance(lam), d_eyiy.distance(eyiy));
  }
  double distance(const Waypoint& w) const { return distance(w.d_lambda, w.d_eyiy); }
};

inline const DomainBox& domain_box(DomainId d) {
  static const std::array<DomainBox, kNumDomains> boxes = {{
      {{-5.0, 5.0}, {30.0, 70.0}},
      {{100.0, 250.0}, {30.0, 70.0}},
      {{100.0, 250.0}, {-5.0, 5.0}},
      {{-250.0, -100.0}, {30.0, 70.0}},
      {{-250.0, -100.0}, {-5.0, 5.0}},
  }};
  return boxes[static_cast<int>(d)];
}

enum class Primitive {
  StationKeeping = 1,
  DriftPlusV,
  DriftMinusV,
  ExpandRN,
  ShrinkRN,
  ApproachFromMinusV,
  RetreatToPlusV,
  ApproachFromPlusV,
  RetreatToMinusV,
  DuckingPlusV,
  DuckingMinusV,
};
inline constexpr int kNumPrimitives = 11;

inline constexpr std::string_view to_string(Primitive p) {
  constexpr std::array<std::string_view, kNumPrimitives> names = {
      "Station-Keeping",      "Drift +V-dir.",      "Drift -V-dir.",
      "Expand R/N separation", "Shrink R/N separation", "Approach from -V-bar",
      "Retreat to +V-bar",    "Approach from +V-bar", "Retreat to -V-bar",
      "Ducking (fast drift) +V-dir.", "Ducking (fast drift) -V-dir."};
  return names[static_cast<int>(p) - 1];
}

inline Primitive primitive_from_id(int id) {
  if (id < 1 || id > kNumPrimitives) throw std::domain_error("primitive id out of range: " + std::to_string(id));
  return static_cast<Primitive>(id);
}

struct Edge {
  DomainId from;
  DomainId to;
};

/// Directed edges of each non-self-loop primitive.
inline const std::vector<Edge>& primitive_edges(Primitive p) {
  using D = DomainId;
  static const std::array<std::vector<Edge>, kNumPrimitives> table = {{
      {},
      {{D::D_minusV_safe, D::A_central}, {D::A_central, D::B_plusV_safe}, {D::D_minusV_safe, D::B_plusV_safe}},
      {{D::B_plusV_safe, D::A_central}, {D::A_central, D::D_minusV_safe}, {D::B_plusV_safe, D::D_minusV_safe}},
      {{D::E_minusV_axis, D::D_minusV_safe}, {D::C_plusV_axis, D::B_plusV_safe}},
      {{D::B_plusV_safe, D::C_plusV_axis}, {D::D_minusV_safe, D::E_minusV_axis}},
      {{D::E_minusV_axis, D::A_central}},
      {{D::A_central, D::C_plusV_axis}},
      {{D::C_plusV_axis, D::A_central}},
      {{D::A_central, D::E_minusV_axis}},
      {{D::E_minusV_axis, D::C_plusV_axis}},
      {{D::C_plusV_axis, D::E_minusV_axis}},
  }};
  return table[static_cast<int>(p) - 1];
}

inline bool transition_valid(Primitive p, DomainId from, DomainId to) {
  if (p == Primitive::StationKeeping) return from == to;
  for (const Edge& e : primitive_edges(p)) {
    if (e.from == from && e.to == to) return true;
  }
  return false;
}

/// The primitive realizing a region transition; self-transitions are station-keeping.
inline std::optional<Primitive> primitive_between(DomainId from, DomainId to) {
  for (int id = 1; id <= kNumPrimitives; ++id) {
    if (transition_valid(primitive_from_id(id), from, to)) return primitive_from_id(id);
  }
  return std::nullopt;
}

struct BehaviorSequence {
  DomainId start = DomainId::A_central;
  std::vector<Primitive> primitives;
  // Destination of each primitive. Optional: Drift +/-V leave d and b along
  // two edges each, so a bare primitive list may need resolving.
  std::vector<DomainId> targets;
};

struct SequenceCheck {
  bool feasible = false;
  std::vector<DomainId> path;  // start plus one node per primitive; prefix up to the failure otherwise
};

namespace detail {

inline bool resolve_path(const std::vector<Primitive>& prims, std::size_t k, std::vector<DomainId>& path) {
  if (k == prims.size()) return true;
  for (DomainId to : kAllDomains) {
    if (!transition_valid(prims[k], path.back(), to)) continue;
    path.push_back(to);
    if (resolve_path(prims, k + 1, path)) return true;
    path.pop_back();
  }
  return false;
}

}  // namespace detail

/// Walks the graph from the start node. Without explicit targets the first
/// completing path in domain order is taken.
inline SequenceCheck sequence_feasible(const BehaviorSequence& seq) {
  SequenceCheck out;
  out.path.push_back(seq.start);
  if (!seq.targets.empty()) {
    if (seq.targets.size() != seq.primitives.size()) return out;
    for (std::size_t k = 0; k < seq.primitives.size(); ++k) {
      if (!transition_valid(seq.primitives[k], out.path.back(), seq.targets[k])) return out;
      out.path.push_back(seq.targets[k]);
    }
    out.feasible = true;
    return out;
  }
  out.feasible = detail::resolve_path(seq.primitives, 0, out.path);
  return out;
}

struct DomainMatch {
  DomainId id;
  double distance;  // m, L-infinity; 0 inside
};

/// Nearest domain of a state. Empty when the state leaves the 2-D reduction
/// (d_a, d_ex, d_ix nonzero or d_ey != d_iy) by more than `tolerance`.
inline std::optional<DomainMatch> domain_of(const RoeState& x, double tolerance = 1e-6) {
  if (std::abs(x.d_a()) > tolerance || std::abs(x.d_ex()) > tolerance || std::abs(x.d_ix()) > tolerance ||
      std::abs(x.d_ey() - x.d_iy()) > tolerance) {
    return std::nullopt;
  }
  const Waypoint w = Waypoint::from_state(x);
  DomainMatch best{DomainId::A_central, domain_box(DomainId::A_central).distance(w)};
  for (DomainId d : kAllDomains) {
    const double dist = domain_box(d).distance(w);
    if (dist < best.distance) best = {d, dist};
  }
  return best;
}

enum class CampaignType { Circumnavigation, Flyby, Ducking };
inline constexpr std::array<CampaignType, 3> kAllCampaigns = {CampaignType::Circumnavigation, CampaignType::Flyby,
                                                              CampaignType::Ducking};

inline constexpr std::string_view to_string(CampaignType c) {
  constexpr std::array<std::string_view, 3> names = {"Circumnavigation", "Flyby", "Ducking"};
  return names[static_cast<int>(c)];
}

inline CampaignType campaign_from_string(std::string_view s) {
  for (CampaignType c : kAllCampaigns) {
    if (s == to_string(c)) return c;
  }
  throw std::domain_error("unknown campaign '" + std::string(s) + "'");
}

using RegionPath = std::array<DomainId, 4>;  // start + three phase ends; repeats are no-ops

/// Every admissible region path of a campaign, alternatives expanded.
inline const std::vector<RegionPath>& campaign_paths(CampaignType c) {
  using D = DomainId;
  constexpr D a = D::A_central, b = D::B_plusV_safe, cc = D::C_plusV_axis, d = D::D_minusV_safe,
              e = D::E_minusV_axis;
  static const std::array<std::vector<RegionPath>, 3> table = [] {
    std::array<std::vector<RegionPath>, 3> t;
    for (D s : {b, cc, d, e}) {
      for (D f : {b, cc, d, e}) t[0].push_back({s, a, a, f});
    }
    t[1] = {{cc, b, d, e}, {cc, b, d, d}, {b, b, d, e}, {b, b, d, d},
            {e, d, b, cc}, {e, d, b, b}, {d, d, b, cc}, {d, d, b, b}};
    t[2] = {{b, cc, e, d}, {b, cc, e, e}, {cc, cc, e, d}, {cc, cc, e, e},
            {d, e, cc, b}, {d, e, cc, cc}, {e, e, cc, b}, {e, e, cc, cc}};
    return t;
  }();
  return table[static_cast<int>(c)];
}

inline std::vector<DomainId> admissible_starts(CampaignType c) {
  std::vector<DomainId> out;
  for (const RegionPath& p : campaign_paths(c)) {
    if (std::find(out.begin(), out.end(), p[0]) == out.end()) out.push_back(p[0]);
  }
  return out;
}

/// Per-primitive duration windows in steps.
struct DurationWindows {
  Interval station_keeping{4, 16};
  Interval transfer{8, 40};
  Interval ducking{4, 12};

  const Interval& window(Primitive p) const {
    if (p == Primitive::StationKeeping) return station_keeping;
    if (p == Primitive::DuckingPlusV || p == Primitive::DuckingMinusV) return ducking;
    return transfer;
  }

  void validate() const {
    for (const Interval* w : {&station_keeping, &transfer, &ducking}) {
      if (w->lo < 1 || w->hi < w->lo) throw std::domain_error("duration window must satisfy 1 <= lo <= hi");
    }
  }
};

struct CampaignSample {
  CampaignType campaign;
  BehaviorSequence sequence;
  std::vector<DomainId> path;
  std::vector<int> durations;

  int total_steps() const { return std::accumulate(durations.begin(), durations.end(), 0); }
};

inline std::vector<int> sample_durations(const std::vector<Primitive>& prims, const DurationWindows& win,
                                         std::mt19937_64& rng, int n_max = kMaxSteps) {
  int floor_sum = 0;
  for (Primitive p : prims) floor_sum += static_cast<int>(win.window(p).lo);
  if (floor_sum > n_max) throw std::domain_error("duration windows cannot fit within N_max");
  std::vector<int> d(prims.size());
  for (;;) {
    int sum = 0;
    for (std::size_t k = 0; k < prims.size(); ++k) {
      const Interval& w = win.window(prims[k]);
      d[k] = std::uniform_int_distribution<int>(static_cast<int>(w.lo), static_cast<int>(w.hi))(rng);
      sum += d[k];
    }
    if (sum <= n_max) return d;
  }
}

inline CampaignSample sample_campaign(CampaignType c, DomainId start, std::mt19937_64& rng,
                                      const DurationWindows& win = {}, int n_max = kMaxSteps) {
  std::vector<const RegionPath*> rows;
  for (const RegionPath& p : campaign_paths(c)) {
    if (p[0] == start) rows.push_back(&p);
  }
  if (rows.empty()) {
    std::string msg = std::string(to_string(c)) + " cannot start at " + std::string(to_string(start)) +
                      "; admissible starts:";
    for (DomainId d : admissible_starts(c)) msg += " " + std::string(to_string(d));
    throw std::domain_error(msg);
  }
  const RegionPath& p = *rows[std::uniform_int_distribution<std::size_t>(0, rows.size() - 1)(rng)];
  CampaignSample s{c, {start, {}, {p.begin() + 1, p.end()}}, {p.begin(), p.end()}, {}};
  for (std::size_t k = 1; k < p.size(); ++k) s.sequence.primitives.push_back(*primitive_between(p[k - 1], p[k]));
  s.durations = sample_durations(s.sequence.primitives, win, rng, n_max);
  return s;
}

inline Waypoint sample_in_domain(DomainId d, std::mt19937_64& rng) {
  const DomainBox& box = domain_box(d);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double lam = box.d_lambda.lo + box.d_lambda.width() * u(rng);
  const double eyiy = box.d_eyiy.lo + box.d_eyiy.width() * u(rng);
  return {lam, eyiy};
}

/// One waypoint per phase, drawn uniformly in the box of the phase's target node.
inline WaypointPlan sample_heuristic_waypoints(const std::vector<DomainId>& path, const std::vector<int>& durations,
                                               std::mt19937_64& rng) {
  if (path.size() != durations.size() + 1) throw std::domain_error("path must have one node more than phases");
  WaypointPlan plan;
  plan.durations = durations;
  for (std::size_t k = 1; k < path.size(); ++k) plan.waypoints.push_back(sample_in_domain(path[k], rng));
  return plan;
}

}  // namespace itg
