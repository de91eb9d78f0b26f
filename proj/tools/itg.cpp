// itg: dataset generation, training, evaluation, single solves and the HTTP service.
//
// Exit codes: 0 success, 1 domain error, 2 configuration or usage error.

#include "itg/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using itg::Config;
using nlohmann::json;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

Config load(const Globals& g) { return g.config_path.empty() ? Config{} : itg::load_config(g.config_path); }

std::ofstream open_out(const std::string& path) {
  if (path.empty()) throw std::domain_error("--out is required");
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::domain_error("cannot write " + path);
  return f;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::domain_error("cannot read " + path);
  return f;
}

std::optional<itg::PolicyWeights> load_weights(const std::string& path) {
  if (path.empty()) return std::nullopt;
  auto f = open_in(path);
  try {
    return itg::policy_from_json(json::parse(f));
  } catch (const json::exception& e) {
    throw std::domain_error(path + ": " + e.what());
  }
}

std::shared_ptr<itg::ChatClient> make_client(const Config& cfg) {
  if (cfg.reasoning.client == itg::ClientKind::Mock) return std::make_shared<itg::MockChatClient>(cfg);
  auto s = itg::RemoteChatSettings::from_env();
  s.timeout_s = cfg.reasoning.timeout_s;
  s.max_concurrency = cfg.reasoning.concurrency;
  return std::make_shared<itg::RemoteChatClient>(s);
}

itg::Progress progress_bar(const char* what) {
  return [what](std::size_t done, std::size_t total) {
    if (done == total || done % std::max<std::size_t>(1, total / 20) == 0) {
      std::cerr << what << " " << done << "/" << total << "\n";
    }
  };
}

json scale_header(const Config& cfg, std::size_t n_test) {
  return {{"n_train", cfg.harness.n_train}, {"n_test", n_test}, {"reference_n_train", 50000}, {"reference_n_test", 500}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intent-to-trajectory pipeline for proximity operations"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON config document")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "global seed");
  app.add_option("--out", g.out, "output path");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "bootstrap (X, y, R) rows with heuristic waypoints and SCP");
  std::size_t gen_n = 0;
  gen->add_option("--n", gen_n, "rows (default: harness.n_train)");

  // train-waypoint
  auto* trn = app.add_subcommand("train-waypoint", "reward-weighted MLE of the waypoint generator");
  std::string trn_data;
  trn->add_option("--data", trn_data, "rows from gen-data")->required();

  // eval-waypoint
  auto* evw = app.add_subcommand("eval-waypoint", "SCP success, reward and domain error of a waypoint policy");
  std::string evw_weights, evw_rows;
  std::size_t evw_n = 0;
  evw->add_option("--weights", evw_weights, "trained weights; heuristic baseline only when omitted");
  evw->add_option("--n", evw_n, "test cases (default: harness.n_test)");
  evw->add_option("--rows", evw_rows, "per-case JSONL records");

  // build-reasoning-data
  auto* brd = app.add_subcommand("build-reasoning-data", "annotated (context, decision) pairs from M candidates");
  std::string brd_weights;
  std::size_t brd_n = 100;
  brd->add_option("--weights", brd_weights, "frozen waypoint generator")->required();
  brd->add_option("--n", brd_n, "scenarios");

  // solve
  auto* slv = app.add_subcommand("solve", "reason, plan and solve one scenario");
  std::string slv_scenario, slv_intent, slv_weights;
  slv->add_option("--scenario", slv_scenario, "scenario JSON")->required();
  slv->add_option("--intent", slv_intent, "priority, e.g. fuel,time,observation,safety_margin");
  slv->add_option("--weights", slv_weights, "waypoint generator; heuristic waypoints when omitted");
  bool slv_llm = false;
  slv->add_flag("--llm", slv_llm, "use the configured chat client as reasoner");

  // eval-e2e
  auto* e2e = app.add_subcommand("eval-e2e", "reasoner x waypoint grid: feasibility, SCP, intent match, wins");
  std::string e2e_weights, e2e_rows;
  std::size_t e2e_n = 0;
  e2e->add_option("--weights", e2e_weights, "waypoint generator for the neural cells")->required();
  e2e->add_option("--n", e2e_n, "scenarios per cell (default: harness.n_test)");
  e2e->add_option("--rows", e2e_rows, "per-scenario JSONL records");

  // serve
  auto* srv = app.add_subcommand("serve", "HTTP/JSON service under /api/v1");
  std::string srv_host = "127.0.0.1", srv_weights, srv_cors = "*", srv_persist;
  int srv_port = 8080;
  bool srv_llm = false;
  srv->add_option("--host", srv_host);
  srv->add_option("--port", srv_port);
  srv->add_option("--weights", srv_weights, "waypoint generator; heuristic waypoints when omitted");
  srv->add_option("--cors-origin", srv_cors);
  srv->add_option("--persist-dir", srv_persist, "write session snapshots here");
  srv->add_flag("--llm", srv_llm, "use the configured chat client as reasoner");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    const Config cfg = load(g);

    if (*gen) {
      const std::size_t n = gen_n ? gen_n : static_cast<std::size_t>(cfg.harness.n_train);
      auto f = open_out(g.out);
      const std::size_t ok = itg::generate_policy_dataset(n, cfg, g.seed, f, g.threads, progress_bar("gen-data"));
      std::cout << "rows " << n << ", converged " << ok << "\n";
    } else if (*trn) {
      auto in = open_in(trn_data);
      const auto rows = itg::load_policy_rows(in);
      const auto samples = itg::training_samples(rows, cfg.harness.train_on_failures);
      itg::TrainConfig tc = cfg.policy;
      tc.seed = g.seed;
      const itg::TrainingResult r = itg::train(samples, tc);
      auto f = open_out(g.out);
      f << itg::to_json(r.weights).dump() << "\n";
      std::cout << "samples " << samples.size() << ", validation NLL " << r.initial_validation_nll << " -> "
                << (r.history.empty() ? r.initial_validation_nll : r.history.back().validation_nll) << "\n";
    } else if (*evw) {
      const std::size_t n = evw_n ? evw_n : static_cast<std::size_t>(cfg.harness.n_test);
      const auto weights = load_weights(evw_weights);
      json report = {{"schema", itg::kRecordSchemaVersion}, {"scale", scale_header(cfg, n)}, {"seed", g.seed}};
      std::ofstream rows_out;
      if (!evw_rows.empty()) rows_out = open_out(evw_rows);
      auto run = [&](const char* label, const itg::PolicyWeights* w) {
        const auto rows = itg::evaluate_waypoint_policy(w, n, cfg, g.seed, g.threads, progress_bar(label));
        const auto rep = itg::fold_waypoint_report(rows);
        report[label] = itg::to_json(rep);
        itg::print_waypoint_summary(std::cout, label, rep);
        if (rows_out) {
          for (const auto& r : rows) rows_out << json{{"cell", label}, {"row", itg::to_json(r)}}.dump() << "\n";
        }
      };
      run("heuristic", nullptr);
      if (weights) run("neural", &*weights);
      if (!g.out.empty()) open_out(g.out) << report.dump(2) << "\n";
    } else if (*brd) {
      const auto weights = load_weights(brd_weights);
      const auto client = make_client(cfg);
      auto f = open_out(g.out);
      const auto sum = itg::build_reasoning_dataset(static_cast<int>(brd_n), cfg, &*weights, *client, g.seed, f,
                                                    &std::cerr, g.threads);
      std::cout << "requested " << sum.requested << ", written " << sum.written << ", failures " << sum.failures
                << "\n";
    } else if (*slv) {
      auto in = open_in(slv_scenario);
      itg::Scenario sc;
      try {
        sc = itg::scenario_from_json(json::parse(in));
      } catch (const json::exception& e) {
        throw std::domain_error(slv_scenario + ": " + e.what());
      }
      if (!slv_intent.empty()) sc.intent = itg::IntentPriority::parse(slv_intent);
      if (!g.seed) g.seed = sc.seed;
      const auto weights = load_weights(slv_weights);
      std::mt19937_64 rng(itg::derive_seed(g.seed, 0));
      const itg::ReasoningInput rin = itg::reasoning_input(sc, cfg);
      itg::ReasoningOutput dec;
      if (slv_llm) {
        const auto client = make_client(cfg);
        dec = itg::llm_reason(rin, *client, cfg, rng);
      } else {
        dec = itg::heuristic_reason(rin, cfg, rng);
      }
      const itg::MissionContext ctx = itg::make_mission_context(cfg, sc);
      const itg::Candidate c =
          itg::evaluate_decision(0, std::move(dec), rin, ctx, cfg.reward, weights ? &*weights : nullptr, rng);
      json traj = {{"epochs_s", c.trajectory.epochs}};
      json roe = json::array(), imp = json::array();
      for (const auto& x : c.trajectory.states) roe.push_back(itg::to_json(x));
      for (const auto& u : c.trajectory.impulses) imp.push_back({u.dv[0], u.dv[1], u.dv[2]});
      traj["roe_m"] = roe;
      traj["impulses_mps"] = imp;
      const json rec = {{"schema", itg::kRecordSchemaVersion},
                        {"scenario", itg::to_json(sc)},
                        {"decision", itg::to_json(c.decision)},
                        {"plan", itg::to_json(c.plan)},
                        {"scp_status", itg::to_string(c.trajectory.status)},
                        {"failed_phase", c.trajectory.failed_phase},
                        {"metrics", itg::to_json(c.metrics)},
                        {"trajectory", traj}};
      if (g.out.empty()) {
        std::cout << rec.dump() << "\n";
      } else {
        open_out(g.out) << rec.dump() << "\n";
        std::cout << "scp " << itg::to_string(c.trajectory.status) << " " << itg::to_json(c.metrics).dump() << "\n";
      }
    } else if (*e2e) {
      const std::size_t n = e2e_n ? e2e_n : static_cast<std::size_t>(cfg.harness.n_test);
      const auto weights = load_weights(e2e_weights);
      const auto client = make_client(cfg);
      json report = {{"schema", itg::kRecordSchemaVersion}, {"scale", scale_header(cfg, n)}, {"seed", g.seed},
                     {"cells", json::object()}};
      std::ofstream rows_out;
      if (!e2e_rows.empty()) rows_out = open_out(e2e_rows);
      for (auto reasoner : {itg::ReasonerKind::Heuristic, itg::ReasonerKind::Chat}) {
        for (const itg::PolicyWeights* w : {static_cast<const itg::PolicyWeights*>(nullptr), &*weights}) {
          const std::string label = std::string(itg::to_string(reasoner)) + "+" + (w ? "neural" : "heuristic");
          const auto rows = itg::evaluate_end_to_end(reasoner, client.get(), w, n, cfg, g.seed, g.threads,
                                                     progress_bar(label.c_str()));
          const auto rep = itg::fold_e2e_report(rows);
          report["cells"][label] = itg::to_json(rep);
          itg::print_e2e_summary(std::cout, label, rep);
          if (rows_out) {
            for (const auto& r : rows) rows_out << json{{"cell", label}, {"row", itg::to_json(r)}}.dump() << "\n";
          }
        }
      }
      if (!g.out.empty()) open_out(g.out) << report.dump(2) << "\n";
    } else if (*srv) {
      itg::ServiceOptions opt;
      opt.reasoner = srv_llm ? itg::ReasonerKind::Chat : itg::ReasonerKind::Heuristic;
      opt.cors_origin = srv_cors;
      opt.persist_dir = srv_persist;
      itg::Service service(cfg, load_weights(srv_weights), srv_llm ? make_client(cfg) : nullptr, opt);
      httplib::Server server;
      service.bind(server);
      std::cerr << "listening on " << srv_host << ":" << srv_port << "\n";
      if (!server.listen(srv_host, srv_port)) throw std::domain_error("cannot bind " + srv_host);
    }
  } catch (const itg::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
