#pragma once

// HTTP/JSON facade under /api/v1: sessions, reasoning, waypoint generation
// with operator overrides, solving, candidate comparison and the graph tables.
// Handlers are plain methods returning {status, body} so they can be driven
// without a socket.

#include "itg/harness.hpp"

#include <httplib.h>
#ifdef _res
#undef _res
#endif

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>

namespace itg {

inline constexpr int kWireSchemaVersion = 1;

struct Reply {
  int status = 200;
  nlohmann::json body;
};

inline Reply error_reply(int status, std::string code, std::string message, nlohmann::json detail = nullptr) {
  return {status, {{"code", std::move(code)}, {"message", std::move(message)}, {"detail", std::move(detail)}}};
}

struct ServiceOptions {
  ReasonerKind reasoner = ReasonerKind::Heuristic;
  std::string cors_origin = "*";
  std::string persist_dir;  // empty: in-memory only
};

enum class Origin { Model, Operator };
inline std::string_view to_string(Origin o) { return o == Origin::Model ? "model" : "operator"; }

struct Session {
  std::string id;
  Scenario scenario;
  ReasoningOutput decision;
  Origin behaviors_origin = Origin::Model;
  std::optional<WaypointPlan> plan;
  Origin plan_origin = Origin::Model;
  std::optional<Trajectory> trajectory;
  MetricVector metrics;
  std::vector<nlohmann::json> history;  // append-only
  std::mutex mu;
};

/// Graph tables: domain boxes, primitive edges, campaign paths.
inline nlohmann::json domains_json() {
  nlohmann::json doms = nlohmann::json::array();
  for (DomainId d : kAllDomains) {
    const DomainBox& b = domain_box(d);
    doms.push_back({{"id", std::string(to_string(d))},
                    {"letter", std::string(1, letter(d))},
                    {"d_lambda_m", {b.d_lambda.lo, b.d_lambda.hi}},
                    {"d_eyiy_m", {b.d_eyiy.lo, b.d_eyiy.hi}}});
  }
  nlohmann::json prims = nlohmann::json::array();
  for (int id = 1; id <= kNumPrimitives; ++id) {
    const Primitive p = primitive_from_id(id);
    nlohmann::json edges = nlohmann::json::array();
    for (const Edge& e : primitive_edges(p)) edges.push_back({std::string(1, letter(e.from)), std::string(1, letter(e.to))});
    prims.push_back({{"id", id}, {"name", std::string(to_string(p))}, {"edges", edges}});
  }
  nlohmann::json camps = nlohmann::json::array();
  for (CampaignType c : kAllCampaigns) {
    nlohmann::json paths = nlohmann::json::array(), starts = nlohmann::json::array();
    for (const RegionPath& p : campaign_paths(c)) paths.push_back(path_string({p.begin(), p.end()}));
    for (DomainId d : admissible_starts(c)) starts.push_back(std::string(1, letter(d)));
    camps.push_back({{"name", std::string(to_string(c))}, {"paths", paths}, {"admissible_starts", starts}});
  }
  return {{"schema", kWireSchemaVersion}, {"domains", doms}, {"primitives", prims}, {"campaigns", camps}};
}

class Service {
 public:
  /// `policy` may be null (heuristic waypoints); `client` is required for the chat reasoner.
  Service(Config cfg, std::optional<PolicyWeights> policy, std::shared_ptr<ChatClient> client, ServiceOptions opt)
      : cfg_(std::move(cfg)), policy_(std::move(policy)), client_(std::move(client)), opt_(std::move(opt)) {
    if (opt_.reasoner == ReasonerKind::Chat && !client_) throw std::domain_error("service: chat reasoner needs a client");
  }

  Reply domains() const { return {200, domains_json()}; }

  Reply create_session(const nlohmann::json& body) {
    if (!body.is_object() || !body.contains("scenario")) {
      return error_reply(400, "invalid_scenario", "body must be an object with a scenario");
    }
    Scenario sc;
    try {
      sc = scenario_from_json(body.at("scenario"));
      if (body.contains("intent")) sc.intent = IntentPriority::parse(body.at("intent").get<std::string>());
    } catch (const std::exception& e) {
      return error_reply(400, "invalid_scenario", e.what());
    }
    const auto m = domain_of(sc.x0, cfg_.graph.domain_tolerance);
    nlohmann::json diag = nullptr;
    if (m) diag = {{"nearest", std::string(to_string(m->id))}, {"distance_m", m->distance}};
    auto s = std::make_shared<Session>();
    s->scenario = sc;
    try {
      std::mt19937_64 rng(derive_seed(sc.seed, 0));
      const ReasoningInput in = reasoning_input(sc, cfg_);
      s->decision = opt_.reasoner == ReasonerKind::Heuristic ? heuristic_reason(in, cfg_, rng)
                                                             : llm_reason(in, *client_, cfg_, rng);
    } catch (const std::domain_error& e) {
      return error_reply(422, "x0_outside_domains", e.what(), diag);
    }
    {
      std::lock_guard lk(mu_);
      s->id = "s" + std::to_string(++next_id_);
      sessions_[s->id] = s;
    }
    std::lock_guard lk(s->mu);
    s->history.push_back({{"event", "reason"}, {"origin", "model"}, {"decision", to_json(s->decision)}});
    persist(*s);
    return {201, {{"schema", kWireSchemaVersion}, {"session_id", s->id}, {"reasoning_output", to_json(s->decision)},
                  {"x0_domain", diag}}};
  }

  Reply get_session(const std::string& id) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard lk(s->mu);
    return {200, session_json(*s)};
  }

  /// Operator behavior override: {b_seq, tf?}. Rejected when infeasible.
  Reply set_behaviors(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard lk(s->mu);
    if (!body.is_object() || !body.contains("b_seq") || !body.at("b_seq").is_array()) {
      return error_reply(400, "invalid_override", "b_seq array required");
    }
    ReasoningOutput d;
    d.behaviors.start = s->decision.path.front();
    for (const auto& b : body.at("b_seq")) {
      const auto p = detail::primitive_from_json(b);
      if (!p) return error_reply(400, "invalid_override", "unknown primitive", b);
      d.behaviors.primitives.push_back(*p);
    }
    const int k = static_cast<int>(d.behaviors.primitives.size());
    if (k < 1 || k > kMaxPhases) return error_reply(422, "infeasible_behaviors", "1 to 3 behaviors required");
    const SequenceCheck chk = sequence_feasible(d.behaviors);
    if (!chk.feasible) {
      return error_reply(422, "infeasible_behaviors", "sequence violates the transition graph",
                         {{"valid_prefix", path_string(chk.path)}});
    }
    d.path = chk.path;
    d.behaviors.targets.assign(chk.path.begin() + 1, chk.path.end());
    const double tf = body.value("tf", s->decision.t_f);
    const long n = std::lround(tf / cfg_.dynamics.dt);
    if (n < k || n > cfg_.dynamics.n_max) return error_reply(422, "invalid_tf", "tf outside [K, N_max] steps");
    d.durations = split_durations(d.behaviors.primitives, static_cast<int>(n), cfg_.graph.durations);
    d.t_f = static_cast<double>(n) * cfg_.dynamics.dt;
    d.reasoning = s->decision.reasoning;
    s->decision = std::move(d);
    s->behaviors_origin = Origin::Operator;
    s->plan.reset();
    s->trajectory.reset();
    s->history.push_back({{"event", "override_behaviors"}, {"origin", "operator"}, {"decision", to_json(s->decision)}});
    persist(*s);
    return {200, {{"schema", kWireSchemaVersion}, {"decision", to_json(s->decision)}}};
  }

  /// Without override: model plan. With {override: {waypoints?, durations?}}:
  /// merged into the current plan; null waypoint entries keep the current value.
  Reply waypoints(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard lk(s->mu);
    const bool has_override = body.is_object() && body.contains("override") && !body.at("override").is_null();
    WaypointPlan plan = has_override && s->plan ? *s->plan : model_plan(*s);
    if (has_override) {
      const auto& ov = body.at("override");
      try {
        if (ov.contains("waypoints")) {
          const auto& w = ov.at("waypoints");
          if (!w.is_array() || w.size() != plan.waypoints.size()) {
            return error_reply(400, "invalid_override", "waypoints must have one entry per phase");
          }
          for (std::size_t k = 0; k < w.size(); ++k) {
            if (w[k].is_null()) continue;
            plan.waypoints[k] = {w[k].at(0).get<double>(), w[k].at(1).get<double>()};
          }
        }
        if (ov.contains("durations")) plan.durations = ov.at("durations").get<std::vector<int>>();
      } catch (const nlohmann::json::exception& e) {
        return error_reply(400, "invalid_override", e.what());
      }
      if (plan.durations.size() != plan.waypoints.size()) {
        return error_reply(400, "invalid_override", "durations must have one entry per phase");
      }
      if (std::any_of(plan.durations.begin(), plan.durations.end(), [](int d) { return d < 1; })) {
        return error_reply(422, "invalid_durations", "durations must be positive");
      }
      if (plan.total_steps() > cfg_.dynamics.n_max) {
        return error_reply(422, "durations_exceed_n_max", "sum of durations exceeds N_max",
                           {{"total_steps", plan.total_steps()}, {"n_max", cfg_.dynamics.n_max}});
      }
    }
    const bool changed = !s->plan || !same_plan(*s->plan, plan);
    s->plan = plan;
    s->plan_origin = has_override ? Origin::Operator : Origin::Model;
    if (changed) s->trajectory.reset();
    nlohmann::json errs = nlohmann::json::array();
    for (std::size_t k = 0; k < plan.waypoints.size(); ++k) {
      errs.push_back(domain_box(s->decision.path[k + 1]).distance(plan.waypoints[k]));
    }
    if (has_override) {
      s->history.push_back({{"event", "override_waypoints"}, {"origin", "operator"}, {"plan", to_json(plan)}});
    } else {
      s->history.push_back({{"event", "waypoints"}, {"origin", "model"}, {"plan", to_json(plan)}});
    }
    persist(*s);
    return {200,
            {{"schema", kWireSchemaVersion},
             {"plan", to_json(plan)},
             {"origin", std::string(to_string(s->plan_origin))},
             {"target_path", path_string(s->decision.path)},
             {"domain_errors", errs},
             {"max_domain_error_m", waypoint_domain_error(plan, s->decision.path)}}};
  }

  Reply solve(const std::string& id) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard lk(s->mu);
    if (!s->plan) return error_reply(409, "no_plan", "request waypoints before solving");
    const MissionContext ctx = make_mission_context(cfg_, s->scenario);
    s->trajectory = solve_mission(s->scenario.x0, *s->plan, ctx);
    s->metrics = metric_vector(*s->trajectory, ctx.koz, ctx.oe, ctx.dt, cfg_.reward, ctx.gravity);
    s->history.push_back({{"event", "solve"}, {"scp_status", to_string(s->trajectory->status)}});
    persist(*s);
    return {200, solve_json(*s, ctx)};
  }

  Reply candidates(const std::string& id, const nlohmann::json& body) {
    auto s = find(id);
    if (!s) return not_found(id);
    std::lock_guard lk(s->mu);
    const int m = body.is_object() ? body.value("m", cfg_.reasoning.candidates) : cfg_.reasoning.candidates;
    if (m < 2 || m > 16) return error_reply(400, "invalid_m", "m must lie in [2, 16]");
    std::mt19937_64 rng(derive_seed(s->scenario.seed, 2));
    const ReasoningInput in = reasoning_input(s->scenario, cfg_);
    const MissionContext ctx = make_mission_context(cfg_, s->scenario);
    const CandidateSet set = sample_candidates(in, m, ctx, cfg_, policy_ ? &*policy_ : nullptr, rng);
    const bool any = !set.successful().empty();
    const int selected = any ? set.candidates[lexicographic_select(set, s->scenario.intent)].id : -1;
    nlohmann::json rows = nlohmann::json::array();
    for (const Candidate& c : set.candidates) {
      nlohmann::json r = to_json(c);
      r["selected"] = c.id == selected;
      rows.push_back(std::move(r));
    }
    s->history.push_back({{"event", "candidates"}, {"m", m}, {"selected_id", selected}});
    persist(*s);
    return {200,
            {{"schema", kWireSchemaVersion},
             {"intent", s->scenario.intent.str()},
             {"candidates", rows},
             {"selected_id", selected},
             {"any_success", any}}};
  }

  /// Routes, CORS and JSON error bodies on an httplib server.
  void bind(httplib::Server& srv) {
    srv.set_default_headers({{"Access-Control-Allow-Origin", opt_.cors_origin},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    auto send = [](httplib::Response& res, const Reply& r) {
      res.status = r.status;
      res.set_content(r.body.dump(), "application/json");
    };
    auto with_body = [send](auto fn) {
      return [send, fn](const httplib::Request& req, httplib::Response& res) {
        nlohmann::json body = nlohmann::json::object();
        if (!req.body.empty()) {
          body = nlohmann::json::parse(req.body, nullptr, false);
          if (body.is_discarded()) return send(res, error_reply(400, "invalid_json", "request body is not JSON"));
        }
        send(res, fn(req, body));
      };
    };
    srv.Get("/api/v1/domains", [this, send](const httplib::Request&, httplib::Response& res) { send(res, domains()); });
    srv.Post("/api/v1/sessions",
             with_body([this](const httplib::Request&, const nlohmann::json& b) { return create_session(b); }));
    srv.Get(R"(/api/v1/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, get_session(req.matches[1]));
    });
    srv.Post(R"(/api/v1/sessions/([^/]+)/behaviors)",
             with_body([this](const httplib::Request& r, const nlohmann::json& b) { return set_behaviors(r.matches[1], b); }));
    srv.Post(R"(/api/v1/sessions/([^/]+)/waypoints)",
             with_body([this](const httplib::Request& r, const nlohmann::json& b) { return waypoints(r.matches[1], b); }));
    srv.Post(R"(/api/v1/sessions/([^/]+)/solve)",
             with_body([this](const httplib::Request& r, const nlohmann::json&) { return solve(r.matches[1]); }));
    srv.Post(R"(/api/v1/sessions/([^/]+)/candidates)",
             with_body([this](const httplib::Request& r, const nlohmann::json& b) { return candidates(r.matches[1], b); }));
    srv.set_exception_handler([send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, error_reply(500, "internal", what));
    });
    srv.set_error_handler([send](const httplib::Request&, httplib::Response& res) {
      if (res.body.empty()) send(res, error_reply(res.status, "http_" + std::to_string(res.status), "no such route"));
    });
  }

 private:
  std::shared_ptr<Session> find(const std::string& id) {
    std::lock_guard lk(mu_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  static Reply not_found(const std::string& id) { return error_reply(404, "unknown_session", "no session " + id); }

  static bool same_plan(const WaypointPlan& a, const WaypointPlan& b) {
    if (a.durations != b.durations || a.waypoints.size() != b.waypoints.size()) return false;
    for (std::size_t k = 0; k < a.waypoints.size(); ++k) {
      if (a.waypoints[k].d_lambda != b.waypoints[k].d_lambda || a.waypoints[k].d_eyiy != b.waypoints[k].d_eyiy) {
        return false;
      }
    }
    return true;
  }

  WaypointPlan model_plan(const Session& s) const {
    std::mt19937_64 rng(derive_seed(s.scenario.seed, 1));
    return plan_for(s.decision, reasoning_input(s.scenario, cfg_), cfg_.dynamics.dt, policy_ ? &*policy_ : nullptr,
                    rng);
  }

  nlohmann::json solve_json(const Session& s, const MissionContext& ctx) const {
    const Trajectory& t = *s.trajectory;
    nlohmann::json roe = nlohmann::json::array(), rtn = nlohmann::json::array(), imp = nlohmann::json::array();
    for (std::size_t j = 0; j < t.states.size(); ++j) {
      roe.push_back(to_json(t.states[j]));
      const RtnState y = roe_to_rtn(t.states[j], ctx.oe, t.epochs[j], ctx.gravity);
      rtn.push_back({y.r[0], y.r[1], y.r[2]});
    }
    for (const Impulse& u : t.impulses) imp.push_back({u.dv[0], u.dv[1], u.dv[2]});
    nlohmann::json phases = nlohmann::json::array();
    for (std::size_t k = 0; k < t.phase_status.size(); ++k) {
      phases.push_back({{"index", k}, {"status", to_string(t.phase_status[k])}});
    }
    return {{"schema", kWireSchemaVersion},
            {"trajectory", {{"epochs_s", t.epochs}, {"roe_m", roe}, {"rtn_m", rtn}, {"impulses_mps", imp}}},
            {"metrics", to_json(s.metrics)},
            {"scp_status", to_string(t.status)},
            {"failed_phase", t.failed_phase},
            {"iterations", t.iterations},
            {"phases", phases}};
  }

  nlohmann::json session_json(const Session& s) const {
    return {{"schema", kWireSchemaVersion},
            {"session_id", s.id},
            {"scenario", to_json(s.scenario)},
            {"decision", to_json(s.decision)},
            {"behaviors_origin", std::string(to_string(s.behaviors_origin))},
            {"plan", s.plan ? to_json(*s.plan) : nlohmann::json(nullptr)},
            {"plan_origin", std::string(to_string(s.plan_origin))},
            {"scp_status", s.trajectory ? nlohmann::json(to_string(s.trajectory->status)) : nlohmann::json(nullptr)},
            {"metrics", s.trajectory ? to_json(s.metrics) : nlohmann::json(nullptr)},
            {"history", s.history}};
  }

  void persist(const Session& s) const {
    if (opt_.persist_dir.empty()) return;
    std::filesystem::create_directories(opt_.persist_dir);
    std::ofstream(std::filesystem::path(opt_.persist_dir) / (s.id + ".json")) << session_json(s).dump(2) << "\n";
  }

  Config cfg_;
  std::optional<PolicyWeights> policy_;
  std::shared_ptr<ChatClient> client_;
  ServiceOptions opt_;
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 0;
};

}  // namespace itg
