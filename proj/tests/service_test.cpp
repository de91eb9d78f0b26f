#include "itg/service.hpp"

#include <gtest/gtest.h>

#include <thread>

namespace itg {
namespace {

const nlohmann::json kScenarioD = {{"x0_roe_m", {0, -150, 0, 40, 0, 40}}, {"r_koz_m", 30}, {"beta", 1.0},
                                   {"mean_anomaly_rad", 0.5}, {"seed", 3}};

Service heuristic_service() { return Service(Config{}, std::nullopt, nullptr, {}); }

std::string new_session(Service& svc, const char* intent = "fuel,time,observation,safety_margin") {
  const Reply r = svc.create_session({{"scenario", kScenarioD}, {"intent", intent}});
  EXPECT_EQ(r.status, 201) << r.body.dump();
  return r.body.at("session_id").get<std::string>();
}

TEST(Domains, TablesAreComplete) {
  const nlohmann::json j = domains_json();
  EXPECT_EQ(j.at("domains").size(), 5u);
  EXPECT_EQ(j.at("primitives").size(), 11u);
  EXPECT_EQ(j.at("campaigns").size(), 3u);
  EXPECT_EQ(j.at("primitives").at(0).at("name"), std::string(to_string(Primitive::StationKeeping)));
}

TEST(Sessions, CreateValidatesInput) {
  Service svc = heuristic_service();
  EXPECT_EQ(svc.create_session(nlohmann::json::array()).status, 400);
  EXPECT_EQ(svc.create_session({{"scenario", kScenarioD}, {"intent", "fuel,fuel"}}).status, 400);
  const Reply out = svc.create_session({{"scenario", {{"x0_roe_m", {0, 400, 0, 40, 0, 40}}}}});
  EXPECT_EQ(out.status, 422);
  EXPECT_EQ(out.body.at("code"), "x0_outside_domains");
  EXPECT_EQ(out.body.at("detail").at("nearest"), std::string(to_string(DomainId::B_plusV_safe)));
  EXPECT_EQ(svc.get_session("nope").status, 404);

  const std::string id = new_session(svc);
  const Reply g = svc.get_session(id);
  EXPECT_EQ(g.status, 200);
}

TEST(Sessions, WaypointsDeterministicAndOverridable) {
  Service svc = heuristic_service();
  const std::string id = new_session(svc);
  ASSERT_EQ(svc.set_behaviors(id, {{"b_seq", {2, 1, 2}}, {"tf", 13500}}).status, 200);
  EXPECT_EQ(svc.set_behaviors(id, {{"b_seq", {8}}}).status, 422);
  EXPECT_EQ(svc.set_behaviors(id, {{"b_seq", {2}}, {"tf", 1e7}}).status, 422);

  const Reply w1 = svc.waypoints(id, {});
  const Reply w2 = svc.waypoints(id, {});
  ASSERT_EQ(w1.status, 200);
  EXPECT_EQ(w1.body, w2.body);
  EXPECT_EQ(w1.body.at("target_path"), "daab");
  EXPECT_EQ(w1.body.at("max_domain_error_m"), 0.0);

  const Reply o = svc.waypoints(id, {{"override", {{"waypoints", {{7, 50}, nullptr, nullptr}}}}});
  ASSERT_EQ(o.status, 200);
  EXPECT_DOUBLE_EQ(o.body.at("domain_errors").at(0).get<double>(), 2.0);
  EXPECT_EQ(o.body.at("origin"), "operator");
  EXPECT_EQ(o.body.at("plan").at("waypoints").at(1), w1.body.at("plan").at("waypoints").at(1));

  const Reply big = svc.waypoints(id, {{"override", {{"durations", {40, 40, 40}}}}});
  EXPECT_EQ(big.status, 422);
  EXPECT_EQ(big.body.at("code"), "durations_exceed_n_max");
  EXPECT_EQ(svc.waypoints(id, {{"override", {{"waypoints", {{0, 50}}}}}}).status, 400);
}

TEST(Sessions, SolveAndCandidates) {
  Service svc = heuristic_service();
  const std::string id = new_session(svc);
  EXPECT_EQ(svc.solve(id).status, 409);
  ASSERT_EQ(svc.waypoints(id, {}).status, 200);
  const Reply s1 = svc.solve(id);
  const Reply s2 = svc.solve(id);
  ASSERT_EQ(s1.status, 200);
  EXPECT_EQ(s1.body, s2.body);

  const Reply c = svc.candidates(id, {});
  ASSERT_EQ(c.status, 200);
  EXPECT_EQ(c.body.at("candidates").size(), 4u);
  int marked = 0;
  for (const auto& row : c.body.at("candidates")) marked += row.at("selected").get<bool>();
  EXPECT_EQ(marked, c.body.at("any_success").get<bool>() ? 1 : 0);
  EXPECT_EQ(svc.candidates(id, {{"m", 1}}).status, 400);

  const auto history = svc.get_session(id).body.at("history");
  EXPECT_GE(history.size(), 5u);
  EXPECT_EQ(history.at(0).at("event"), "reason");
}

TEST(Sessions, ChatReasonerUsesClient) {
  EXPECT_THROW(Service(Config{}, std::nullopt, nullptr, {ReasonerKind::Chat}), std::domain_error);
  Service svc(Config{}, std::nullopt, std::make_shared<MockChatClient>(), {ReasonerKind::Chat});
  const Reply r = svc.create_session({{"scenario", kScenarioD}});
  ASSERT_EQ(r.status, 201);
  EXPECT_FALSE(r.body.at("reasoning_output").at("fallback").get<bool>());
}

TEST(Http, RoutesAndCors) {
  Service svc = heuristic_service();
  httplib::Server srv;
  svc.bind(srv);
  const int port = srv.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();

  httplib::Client cli("127.0.0.1", port);
  const auto d = cli.Get("/api/v1/domains");
  ASSERT_TRUE(d);
  EXPECT_EQ(d->status, 200);
  EXPECT_EQ(d->get_header_value("Access-Control-Allow-Origin"), "*");
  EXPECT_EQ(nlohmann::json::parse(d->body).at("primitives").size(), 11u);

  const auto bad = cli.Post("/api/v1/sessions", "{not json", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  EXPECT_TRUE(nlohmann::json::parse(bad->body).contains("code"));

  const auto ok = cli.Post("/api/v1/sessions", nlohmann::json{{"scenario", kScenarioD}}.dump(), "application/json");
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 201);
  const std::string id = nlohmann::json::parse(ok->body).at("session_id");
  const auto got = cli.Get("/api/v1/sessions/" + id);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->status, 200);
  EXPECT_EQ(cli.Get("/api/v1/sessions/zzz")->status, 404);

  srv.stop();
  t.join();
}

}  // namespace
}  // namespace itg
