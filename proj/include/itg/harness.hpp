#pragma once

// Dataset bootstrapping for the waypoint policy, waypoint-policy evaluation
// and the end-to-end evaluation grid. Reports are folds over per-scenario
// records so they can be recomputed from the persisted rows.

#include "itg/reasoning.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>

namespace itg {

inline constexpr int kRecordSchemaVersion = 1;

// Evaluation draws come from a separate stream so a shared seed never
// reproduces training rows.
inline constexpr std::uint64_t kTestStream = 0x5445535453455453ULL;

// ---------------------------------------------------------------------------
// Policy dataset

struct PolicyRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  Scenario scenario;
  CampaignType campaign = CampaignType::Circumnavigation;
  std::vector<DomainId> path;
  std::vector<Primitive> behaviors;
  WaypointPlan plan;
  double t_f = 0.0;
  std::string scp_status;
  int failed_phase = -1;
  double reward = 0.0;
  MetricVector metrics;

  bool success() const { return scp_status == to_string(ScpStatus::Converged); }
};

inline nlohmann::json to_json(const PolicyRow& r) {
  nlohmann::json b = nlohmann::json::array();
  for (Primitive p : r.behaviors) b.push_back(static_cast<int>(p));
  return {{"schema", kRecordSchemaVersion},
          {"index", r.index},
          {"seed", r.seed},
          {"scenario", to_json(r.scenario)},
          {"campaign", std::string(to_string(r.campaign))},
          {"path", path_string(r.path)},
          {"behaviors", b},
          {"plan", to_json(r.plan)},
          {"t_f", r.t_f},
          {"scp_status", r.scp_status},
          {"failed_phase", r.failed_phase},
          {"reward", r.reward},
          {"metrics", to_json(r.metrics)}};
}

inline PolicyRow policy_row_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<int>() != kRecordSchemaVersion) throw std::domain_error("policy row: unsupported schema");
  PolicyRow r;
  r.index = j.at("index").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.scenario = scenario_from_json(j.at("scenario"));
  r.campaign = campaign_from_string(j.at("campaign").get<std::string>());
  for (char c : j.at("path").get<std::string>()) {
    if (c < 'a' || c > 'e') throw std::domain_error("policy row: bad path");
    r.path.push_back(static_cast<DomainId>(c - 'a'));
  }
  for (int id : j.at("behaviors").get<std::vector<int>>()) r.behaviors.push_back(primitive_from_id(id));
  r.plan = plan_from_json(j.at("plan"));
  r.t_f = j.at("t_f").get<double>();
  r.scp_status = j.at("scp_status").get<std::string>();
  r.failed_phase = j.at("failed_phase").get<int>();
  r.reward = j.at("reward").get<double>();
  const auto& m = j.at("metrics");
  r.metrics = {m.at(std::string(metric_name(Metric::Fuel))).get<double>(),
               m.at(std::string(metric_name(Metric::Time))).get<double>(),
               m.at(std::string(metric_name(Metric::Observation))).get<double>(),
               m.at(std::string(metric_name(Metric::SafetyMargin))).get<double>()};
  return r;
}

/// Scenario plus campaign for one harness index: campaign uniform, start
/// uniform among its admissible nodes, x0 uniform in the start box.
struct HarnessDraw {
  Scenario scenario;
  CampaignSample campaign;
};

inline HarnessDraw draw_case(const Config& cfg, std::uint64_t seed, std::mt19937_64& rng) {
  const CampaignType c = kAllCampaigns[std::uniform_int_distribution<std::size_t>(0, kAllCampaigns.size() - 1)(rng)];
  const DomainId start = pick(admissible_starts(c), rng);
  HarnessDraw d{sample_scenario(start, cfg.harness, rng), {}};
  d.scenario.seed = seed;
  d.campaign = sample_campaign(c, start, rng, cfg.graph.durations, cfg.dynamics.n_max);
  return d;
}

inline PolicyRow make_policy_row(std::size_t index, const Config& cfg, std::uint64_t seed) {
  const std::uint64_t s = derive_seed(seed, index);
  std::mt19937_64 rng(s);
  const HarnessDraw d = draw_case(cfg, s, rng);
  PolicyRow r;
  r.index = index;
  r.seed = s;
  r.scenario = d.scenario;
  r.campaign = d.campaign.campaign;
  r.path = d.campaign.path;
  r.behaviors = d.campaign.sequence.primitives;
  r.plan = sample_heuristic_waypoints(d.campaign.path, d.campaign.durations, rng);
  r.t_f = d.campaign.total_steps() * cfg.dynamics.dt;
  const MissionContext ctx = make_mission_context(cfg, d.scenario);
  const Trajectory t = solve_mission(d.scenario.x0, r.plan, ctx);
  r.scp_status = to_string(t.status);
  r.failed_phase = t.failed_phase;
  r.reward = training_reward(t, cfg.reward, ctx.koz, ctx.oe, ctx.gravity);
  r.metrics = metric_vector(t, ctx.koz, ctx.oe, ctx.dt, cfg.reward, ctx.gravity);
  return r;
}

using Progress = std::function<void(std::size_t done, std::size_t total)>;

/// Writes n JSONL rows in index order; failed SCP rows are kept and flagged
/// through scp_status. Returns the number of converged rows.
inline std::size_t generate_policy_dataset(std::size_t n, const Config& cfg, std::uint64_t seed, std::ostream& sink,
                                           int threads = 1, const Progress& progress = {}) {
  if (n < 1) throw std::domain_error("gen-data: n must be at least 1");
  std::vector<PolicyRow> rows(n);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(n, threads, [&](std::size_t i) {
    rows[i] = make_policy_row(i, cfg, seed);
    const std::size_t k = ++done;
    if (progress) {
      std::lock_guard lk(mu);
      progress(k, n);
    }
  });
  std::size_t ok = 0;
  for (const PolicyRow& r : rows) {
    sink << to_json(r).dump() << "\n";
    ok += r.success();
  }
  return ok;
}

inline std::vector<PolicyRow> load_policy_rows(std::istream& in) {
  std::vector<PolicyRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      rows.push_back(policy_row_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw std::domain_error("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

inline std::vector<TrainingSample> training_samples(const std::vector<PolicyRow>& rows, bool include_failures) {
  std::vector<TrainingSample> out;
  for (const PolicyRow& r : rows) {
    if (!r.success() && !include_failures) continue;
    const PolicyConditioning x{r.scenario.x0, r.t_f, r.behaviors, r.scenario.mean_anomaly, r.scenario.r_koz,
                               r.scenario.beta};
    out.push_back({x, r.plan, r.reward});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Waypoint policy evaluation

/// Max over waypoints of the L-infinity distance to the box of the phase's
/// target node (path[k + 1]).
inline double waypoint_domain_error(const WaypointPlan& plan, const std::vector<DomainId>& path) {
  if (path.size() != plan.waypoints.size() + 1) throw std::domain_error("waypoint_domain_error: path/plan mismatch");
  double e = 0.0;
  for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
    e = std::max(e, domain_box(path[k + 1]).distance(plan.waypoints[k]));
  }
  return e;
}

struct WaypointEvalRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string path;
  bool success = false;
  std::string scp_status;
  double reward = 0.0;
  double domain_error = 0.0;
};

inline nlohmann::json to_json(const WaypointEvalRow& r) {
  return {{"index", r.index},   {"seed", r.seed},     {"path", r.path},
          {"success", r.success}, {"scp_status", r.scp_status}, {"reward", r.reward},
          {"domain_error_m", r.domain_error}};
}

struct WaypointReport {
  std::size_t n = 0;
  double scp_success_pct = 0.0;
  double reward_mean = 0.0;  // over SCP successes
  double reward_std = 0.0;   // population std over SCP successes
  double exact_pct = 0.0;
  double lt5m_pct = 0.0;
  double lt10m_pct = 0.0;
};

inline WaypointReport fold_waypoint_report(const std::vector<WaypointEvalRow>& rows) {
  WaypointReport r;
  r.n = rows.size();
  if (rows.empty()) return r;
  std::size_t ok = 0, exact = 0, lt5 = 0, lt10 = 0;
  double sum = 0.0, sq = 0.0;
  for (const auto& x : rows) {
    if (x.success) {
      ++ok;
      sum += x.reward;
      sq += x.reward * x.reward;
    }
    exact += x.domain_error <= 1e-9;
    lt5 += x.domain_error < 5.0;
    lt10 += x.domain_error < 10.0;
  }
  const double n = static_cast<double>(rows.size());
  r.scp_success_pct = 100.0 * ok / n;
  r.exact_pct = 100.0 * exact / n;
  r.lt5m_pct = 100.0 * lt5 / n;
  r.lt10m_pct = 100.0 * lt10 / n;
  if (ok > 0) {
    r.reward_mean = sum / ok;
    r.reward_std = std::sqrt(std::max(0.0, sq / ok - r.reward_mean * r.reward_mean));
  }
  return r;
}

inline nlohmann::json to_json(const WaypointReport& r) {
  return {{"n", r.n},
          {"scp_success_pct", r.scp_success_pct},
          {"reward_mean", r.reward_mean},
          {"reward_std", r.reward_std},
          {"reward_over", "scp_successes"},
          {"waypoint_error_buckets", {{"exact_pct", r.exact_pct}, {"lt5m_pct", r.lt5m_pct}, {"lt10m_pct", r.lt10m_pct}}}};
}

/// Mean inference (or heuristic waypoints when `policy` is null) on n_test
/// cases drawn like the training rows.
inline std::vector<WaypointEvalRow> evaluate_waypoint_policy(const PolicyWeights* policy, std::size_t n_test,
                                                             const Config& cfg, std::uint64_t seed, int threads = 1,
                                                             const Progress& progress = {}) {
  std::vector<WaypointEvalRow> rows(n_test);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(n_test, threads, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed ^ kTestStream, i);
    std::mt19937_64 rng(s);
    const HarnessDraw d = draw_case(cfg, s, rng);
    const ReasoningInput in = reasoning_input(d.scenario, cfg);
    const ReasoningOutput dec = decision_from_sample(d.campaign, cfg.dynamics.dt, "");
    const WaypointPlan plan = plan_for(dec, in, cfg.dynamics.dt, policy, rng);
    const MissionContext ctx = make_mission_context(cfg, d.scenario);
    const Trajectory t = solve_mission(d.scenario.x0, plan, ctx);
    WaypointEvalRow& r = rows[i];
    r.index = i;
    r.seed = s;
    r.path = path_string(d.campaign.path);
    r.success = t.converged();
    r.scp_status = to_string(t.status);
    r.reward = composite_reward(t, cfg.reward.lambda, ctx.koz, ctx.oe,
                                cfg.reward.sentinel_for_reporting ? -ctx.koz.r_koz : 0.0, ctx.gravity);
    r.domain_error = waypoint_domain_error(plan, d.campaign.path);
    const std::size_t k = ++done;
    if (progress) {
      std::lock_guard lk(mu);
      progress(k, n_test);
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// End-to-end evaluation

enum class ReasonerKind { Heuristic, Chat };

inline std::string_view to_string(ReasonerKind k) { return k == ReasonerKind::Heuristic ? "heuristic" : "llm"; }

struct E2eRow {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::string intent;
  nlohmann::json decision;
  bool feasible = false;
  bool fallback = false;
  bool success = false;
  std::string scp_status;
  std::vector<Metric> trace_metrics;
  int intent_match = 0;      // top-2 intent metrics named in the trace
  bool comparable = false;   // selected and at least one alternative converged
  int reason_wins = 0;       // trace metrics on which the selection beats every alternative
  int reason_metric_count = 0;
  int intent_wins = 0;       // same over the intent's top two
  MetricVector metrics;
};

inline nlohmann::json to_json(const E2eRow& r) {
  nlohmann::json tm = nlohmann::json::array();
  for (Metric m : r.trace_metrics) tm.push_back(metric_name(m));
  return {{"index", r.index},         {"seed", r.seed},
          {"intent", r.intent},       {"decision", r.decision},
          {"feasible", r.feasible},   {"fallback", r.fallback},
          {"success", r.success},     {"scp_status", r.scp_status},
          {"trace_metrics", tm},      {"intent_match", r.intent_match},
          {"comparable", r.comparable}, {"reason_wins", r.reason_wins},
          {"reason_metric_count", r.reason_metric_count}, {"intent_wins", r.intent_wins},
          {"metrics", to_json(r.metrics)}};
}

/// Number of metrics in `metrics` on which `sel` is strictly better than every
/// alternative. Ties do not count.
inline int count_wins(const MetricVector& sel, const std::vector<MetricVector>& alts,
                      const std::vector<Metric>& metrics) {
  int wins = 0;
  for (Metric m : metrics) {
    wins += std::all_of(alts.begin(), alts.end(), [&](const MetricVector& a) { return sel.better(m, a); });
  }
  return wins;
}

struct E2eReport {
  std::size_t n = 0;
  double behavior_feasibility_pct = 0.0;
  double scp_success_pct = 0.0;
  double fallback_pct = 0.0;
  double match_both_pct = 0.0;
  double match_one_pct = 0.0;
  double match_zero_pct = 0.0;
  std::size_t comparable = 0;
  double reason_dual_pct = 0.0;
  double reason_single_pct = 0.0;
  double intent_dual_pct = 0.0;
  double intent_single_pct = 0.0;
};

inline E2eReport fold_e2e_report(const std::vector<E2eRow>& rows) {
  E2eReport r;
  r.n = rows.size();
  if (rows.empty()) return r;
  std::size_t feas = 0, ok = 0, fb = 0, m2 = 0, m1 = 0, m0 = 0, rd = 0, rs = 0, id = 0, is = 0;
  for (const auto& x : rows) {
    feas += x.feasible;
    ok += x.success;
    fb += x.fallback;
    m2 += x.intent_match == 2;
    m1 += x.intent_match == 1;
    m0 += x.intent_match == 0;
    if (!x.comparable) continue;
    ++r.comparable;
    rd += x.reason_metric_count == 2 && x.reason_wins == 2;
    rs += x.reason_wins == 1;
    id += x.intent_wins == 2;
    is += x.intent_wins == 1;
  }
  const double n = static_cast<double>(rows.size());
  r.behavior_feasibility_pct = 100.0 * feas / n;
  r.scp_success_pct = 100.0 * ok / n;
  r.fallback_pct = 100.0 * fb / n;
  r.match_both_pct = 100.0 * m2 / n;
  r.match_one_pct = 100.0 * m1 / n;
  r.match_zero_pct = 100.0 * m0 / n;
  if (r.comparable > 0) {
    const double c = static_cast<double>(r.comparable);
    r.reason_dual_pct = 100.0 * rd / c;
    r.reason_single_pct = 100.0 * rs / c;
    r.intent_dual_pct = 100.0 * id / c;
    r.intent_single_pct = 100.0 * is / c;
  }
  return r;
}

inline nlohmann::json to_json(const E2eReport& r) {
  return {{"n", r.n},
          {"behavior_feasibility_pct", r.behavior_feasibility_pct},
          {"scp_success_pct", r.scp_success_pct},
          {"fallback_pct", r.fallback_pct},
          {"intent_reason_match", {{"both_pct", r.match_both_pct}, {"one_pct", r.match_one_pct}, {"zero_pct", r.match_zero_pct}}},
          {"wins_over", "comparable scenarios"},
          {"comparable", r.comparable},
          {"wins",
           {{"reason_dual", r.reason_dual_pct},
            {"reason_single", r.reason_single_pct},
            {"intent_dual", r.intent_dual_pct},
            {"intent_single", r.intent_single_pct}}}};
}

/// One scenario of an end-to-end cell: reasoner, waypoints, SCP, trace
/// metrics, then three alternatives from the same input for the win count.
inline E2eRow evaluate_e2e_case(std::size_t i, ReasonerKind reasoner, ChatClient* client, const PolicyWeights* policy,
                                const Config& cfg, std::uint64_t seed) {
  const std::uint64_t s = derive_seed(seed ^ kTestStream, i);
  std::mt19937_64 rng(s);
  Scenario sc = sample_scenario(cfg.harness, rng);
  sc.seed = s;
  const ReasoningInput in = reasoning_input(sc, cfg);
  const MissionContext ctx = make_mission_context(cfg, sc);

  ReasoningOutput dec = reasoner == ReasonerKind::Heuristic ? heuristic_reason(in, cfg, rng)
                                                            : llm_reason(in, *client, cfg, rng);
  E2eRow r;
  r.index = i;
  r.seed = s;
  r.intent = sc.intent.str();
  r.decision = to_json(dec);
  r.feasible = sequence_feasible(dec.behaviors).feasible;
  r.fallback = dec.fallback;
  r.trace_metrics = extract_metrics(dec.reasoning);
  for (Metric m : r.trace_metrics) r.intent_match += m == sc.intent[0] || m == sc.intent[1];
  r.reason_metric_count = static_cast<int>(r.trace_metrics.size());

  const std::string key = decision_key(dec);
  const Candidate sel = evaluate_decision(0, std::move(dec), in, ctx, cfg.reward, policy, rng);
  r.success = sel.success();
  r.scp_status = to_string(sel.trajectory.status);
  r.metrics = sel.metrics;

  const CandidateSet alts = sample_candidates(in, 3, ctx, cfg, policy, rng, {key});
  std::vector<MetricVector> ok;
  for (std::size_t k : alts.successful()) ok.push_back(alts.candidates[k].metrics);
  r.comparable = r.success && !ok.empty();
  if (r.comparable) {
    r.reason_wins = count_wins(sel.metrics, ok, r.trace_metrics);
    r.intent_wins = count_wins(sel.metrics, ok, {sc.intent[0], sc.intent[1]});
  }
  return r;
}

inline std::vector<E2eRow> evaluate_end_to_end(ReasonerKind reasoner, ChatClient* client, const PolicyWeights* policy,
                                               std::size_t n_test, const Config& cfg, std::uint64_t seed,
                                               int threads = 1, const Progress& progress = {}) {
  if (reasoner == ReasonerKind::Chat && !client) throw std::domain_error("eval-e2e: chat reasoner needs a client");
  std::vector<E2eRow> rows(n_test);
  std::atomic<std::size_t> done{0};
  std::mutex mu;
  parallel_for(n_test, threads, [&](std::size_t i) {
    rows[i] = evaluate_e2e_case(i, reasoner, client, policy, cfg, seed);
    const std::size_t k = ++done;
    if (progress) {
      std::lock_guard lk(mu);
      progress(k, n_test);
    }
  });
  return rows;
}

/// Fixed-width summary for standard output.
inline void print_waypoint_summary(std::ostream& os, const std::string& label, const WaypointReport& r) {
  os << std::fixed << std::setprecision(1) << std::left << std::setw(12) << label << " n=" << r.n
     << "  scp_success=" << r.scp_success_pct << "%  reward=" << std::setprecision(2) << r.reward_mean << " +/- "
     << r.reward_std << std::setprecision(1) << "  exact=" << r.exact_pct << "%  <5m=" << r.lt5m_pct
     << "%  <10m=" << r.lt10m_pct << "%\n";
  os.unsetf(std::ios::floatfield);
}

inline void print_e2e_summary(std::ostream& os, const std::string& label, const E2eReport& r) {
  os << std::fixed << std::setprecision(1) << std::left << std::setw(22) << label << " n=" << r.n
     << "  feasible=" << r.behavior_feasibility_pct << "%  scp=" << r.scp_success_pct
     << "%  match 2/1/0=" << r.match_both_pct << "/" << r.match_one_pct << "/" << r.match_zero_pct
     << "%  reason wins d/s=" << r.reason_dual_pct << "/" << r.reason_single_pct
     << "%  intent wins d/s=" << r.intent_dual_pct << "/" << r.intent_single_pct << "%\n";
  os.unsetf(std::ios::floatfield);
}

}  // namespace itg
