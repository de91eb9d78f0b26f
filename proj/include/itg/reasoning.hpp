#pragma once

// Intent-to-behavior layer: heuristic reasoner, candidate generation,
// lexicographic selection, chat-based annotation/generation/extraction, the
// deterministic offline mock client and the reasoning dataset builder.

#include "itg/chat.hpp"
#include "itg/parallel.hpp"
#include "itg/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace itg {

struct ReasoningInput {
  RoeState x0;
  OrbitalElements oe = reference_chief();
  double r_koz = 30.0;
  double beta = 1.0;
  IntentPriority intent;
};

inline ReasoningInput reasoning_input(const Scenario& s, const Config& cfg) {
  ReasoningInput in{s.x0, cfg.dynamics.chief, s.r_koz, s.beta, s.intent};
  in.oe.M = s.mean_anomaly;
  return in;
}

struct ReasoningOutput {
  std::string reasoning;
  double t_f = 0.0;  // s
  BehaviorSequence behaviors;
  std::vector<DomainId> path;  // start plus one node per behavior
  std::vector<int> durations;
  bool fallback = false;    // the chat answer was rejected and the heuristic reasoner answered
  bool tf_clamped = false;  // t_f projected onto a valid step count
  std::string note;

  int total_steps() const { return std::accumulate(durations.begin(), durations.end(), 0); }
};

// ---------------------------------------------------------------------------
// Traces and metric extraction

inline std::string_view metric_phrase(Metric m) {
  switch (m) {
    case Metric::Fuel: return "appears likely to need only modest delta-v";
    case Metric::Time: return "should keep the transfer time short";
    case Metric::Observation: return "has a good chance of supporting observation";
    case Metric::SafetyMargin: return "is likely to preserve a comfortable safety margin";
  }
  return "";
}

/// One sentence naming one or two metrics in order.
inline std::string compose_trace(std::string_view subject, const std::vector<Metric>& metrics) {
  std::string s(subject);
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    s += i == 0 ? " " : " and ";
    s += metric_phrase(metrics[i]);
  }
  return s + ".";
}

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// First whole-word position of `word` in `text`, npos if absent.
inline std::size_t find_word(const std::string& text, std::string_view word) {
  auto is_word = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t pos = text.find(word); pos != std::string::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !is_word(text[pos - 1]);
    const std::size_t end = pos + word.size();
    const bool right = end >= text.size() || !is_word(text[end]);
    if (left && right) return pos;
  }
  return std::string::npos;
}

}  // namespace detail

/// Keyword rules: up to two metrics in order of first appearance.
inline std::vector<Metric> extract_metrics(std::string_view text) {
  static const std::array<std::pair<Metric, std::vector<std::string_view>>, 4> groups = {{
      {Metric::Fuel, {"fuel", "delta-v", "control cost"}},
      {Metric::Time, {"time", "transfer time", "tof"}},
      {Metric::Observation, {"observation"}},
      {Metric::SafetyMargin, {"safety", "safety margin", "clearance"}},
  }};
  const std::string t = detail::lower(text);
  std::vector<std::pair<std::size_t, Metric>> hits;
  for (const auto& [m, words] : groups) {
    std::size_t first = std::string::npos;
    for (std::string_view w : words) first = std::min(first, detail::find_word(t, w));
    if (first != std::string::npos) hits.emplace_back(first, m);
  }
  std::sort(hits.begin(), hits.end());
  std::vector<Metric> out;
  for (std::size_t i = 0; i < hits.size() && i < 2; ++i) out.push_back(hits[i].second);
  return out;
}

// ---------------------------------------------------------------------------
// Heuristic reasoner

/// Start node of x0; throws naming the nearest domain when x0 is outside
/// every domain by more than `tolerance`.
inline DomainId start_domain(const RoeState& x0, double tolerance) {
  const auto m = domain_of(x0, tolerance);
  if (!m) throw std::domain_error("x0 leaves the (d_lambda, d_ey = d_iy) reduction beyond tolerance");
  if (m->distance > tolerance) {
    std::ostringstream os;
    os << "x0 lies " << m->distance << " m outside every domain; nearest is " << to_string(m->id);
    throw std::domain_error(os.str());
  }
  return m->id;
}

inline std::vector<CampaignType> campaigns_from(DomainId start) {
  std::vector<CampaignType> out;
  for (CampaignType c : kAllCampaigns) {
    const auto s = admissible_starts(c);
    if (std::find(s.begin(), s.end(), start) != s.end()) out.push_back(c);
  }
  if (out.empty()) throw std::domain_error("no campaign starts at " + std::string(to_string(start)));
  return out;
}

inline ReasoningOutput decision_from_sample(const CampaignSample& s, double dt, std::string trace) {
  ReasoningOutput out;
  out.reasoning = std::move(trace);
  out.behaviors = s.sequence;
  out.path = s.path;
  out.durations = s.durations;
  out.t_f = s.total_steps() * dt;
  return out;
}

/// Uniform campaign among those admitting the start domain; the trace names
/// the top intent metric.
inline ReasoningOutput heuristic_reason(const ReasoningInput& in, const Config& cfg, std::mt19937_64& rng) {
  const DomainId start = start_domain(in.x0, cfg.graph.domain_tolerance);
  const CampaignType c = pick(campaigns_from(start), rng);
  const CampaignSample s = sample_campaign(c, start, rng, cfg.graph.durations, cfg.dynamics.n_max);
  return decision_from_sample(s, cfg.dynamics.dt,
                              compose_trace("This " + std::string(to_string(c)) + " plan", {in.intent[0]}));
}

/// Splits a step budget across phases in proportion to the window midpoints.
inline std::vector<int> split_durations(const std::vector<Primitive>& prims, int total, const DurationWindows& win) {
  std::vector<double> mid;
  for (Primitive p : prims) mid.push_back(0.5 * (win.window(p).lo + win.window(p).hi));
  return project_durations(mid, total);
}

// ---------------------------------------------------------------------------
// Candidates and selection

struct Candidate {
  int id = 0;
  ReasoningOutput decision;
  WaypointPlan plan;
  Trajectory trajectory;
  MetricVector metrics;
  double reward = 0.0;

  bool success() const { return trajectory.converged(); }
  std::string label() const;
};

struct CandidateSet {
  std::vector<Candidate> candidates;

  std::vector<std::size_t> successful() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i].success()) out.push_back(i);
    }
    return out;
  }
};

/// Waypoints for a decision: mean policy inference, or heuristic draws inside
/// the target boxes when no policy is given.
inline WaypointPlan plan_for(const ReasoningOutput& d, const ReasoningInput& in, double dt,
                             const PolicyWeights* policy, std::mt19937_64& rng) {
  if (policy) {
    const PolicyConditioning c{in.x0, d.t_f, d.behaviors.primitives, in.oe.M, in.r_koz, in.beta};
    return infer(*policy, c, dt, InferMode::Mean);
  }
  return sample_heuristic_waypoints(d.path, d.durations, rng);
}

/// Plans and solves one decision.
inline Candidate evaluate_decision(int id, ReasoningOutput d, const ReasoningInput& in, const MissionContext& ctx,
                                   const RewardConfig& reward, const PolicyWeights* policy, std::mt19937_64& rng) {
  Candidate c;
  c.id = id;
  c.plan = plan_for(d, in, ctx.dt, policy, rng);
  c.decision = std::move(d);
  c.trajectory = solve_mission(in.x0, c.plan, ctx);
  c.metrics = metric_vector(c.trajectory, ctx.koz, ctx.oe, ctx.dt, reward, ctx.gravity);
  c.reward = training_reward(c.trajectory, reward, ctx.koz, ctx.oe, ctx.gravity);
  return c;
}

inline std::string path_string(const std::vector<DomainId>& path) {
  std::string s;
  for (DomainId d : path) s += letter(d);
  return s;
}

inline std::string Candidate::label() const {
  return path_string(decision.path) + "-" + std::to_string(decision.total_steps());
}

inline std::string decision_key(const ReasoningOutput& d) {
  return path_string(d.path) + ":" + std::to_string(d.total_steps());
}

/// Up to `m` heuristic decisions distinct in (region path, step count) and not
/// in `exclude`, each planned and solved. Never throws on SCP failure.
inline CandidateSet sample_candidates(const ReasoningInput& in, int m, const MissionContext& ctx, const Config& cfg,
                                      const PolicyWeights* policy, std::mt19937_64& rng,
                                      std::vector<std::string> exclude = {}) {
  CandidateSet set;
  for (int attempt = 0; attempt < cfg.reasoning.max_attempts && static_cast<int>(set.candidates.size()) < m;
       ++attempt) {
    ReasoningOutput d = heuristic_reason(in, cfg, rng);
    const std::string key = decision_key(d);
    if (std::find(exclude.begin(), exclude.end(), key) != exclude.end()) continue;
    exclude.push_back(key);
    set.candidates.push_back(
        evaluate_decision(static_cast<int>(set.candidates.size()), std::move(d), in, ctx, cfg.reward, policy, rng));
  }
  return set;
}

/// M distinct candidates; throws when every candidate fails SCP.
inline CandidateSet generate_candidates(const ReasoningInput& in, int m, const MissionContext& ctx,
                                        const Config& cfg, const PolicyWeights* policy, std::mt19937_64& rng) {
  if (m < 2) throw std::domain_error("generate_candidates: M must be at least 2");
  CandidateSet set = sample_candidates(in, m, ctx, cfg, policy, rng);
  if (set.successful().empty()) {
    std::string msg = "all candidates failed SCP:";
    for (const Candidate& c : set.candidates) msg += " " + std::to_string(c.id) + "=" + to_string(c.trajectory.status);
    throw std::runtime_error(msg);
  }
  return set;
}

/// Lexicographic argbest under the intent order; exact ties fall through to
/// the next metric, then to the lowest index.
inline std::size_t lexicographic_select(const std::vector<MetricVector>& rows, const IntentPriority& intent) {
  if (rows.empty()) throw std::domain_error("lexicographic_select: no candidates");
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    for (Metric m : intent.order()) {
      if (rows[i].better(m, rows[best])) {
        best = i;
        break;
      }
      if (rows[best].better(m, rows[i])) break;
    }
  }
  return best;
}

/// Index into set.candidates of the lexicographic choice among successes.
inline std::size_t lexicographic_select(const CandidateSet& set, const IntentPriority& intent) {
  const auto ok = set.successful();
  if (ok.empty()) throw std::domain_error("lexicographic_select: no successful candidate");
  std::vector<MetricVector> rows;
  for (std::size_t i : ok) rows.push_back(set.candidates[i].metrics);
  return ok[lexicographic_select(rows, intent)];
}

// ---------------------------------------------------------------------------
// Prompts

namespace detail {

/// Shortest round-trip decimal.
inline std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string_view column_name(Metric m) {
  switch (m) {
    case Metric::Fuel: return "fuel_dv";
    case Metric::Time: return "time_sec";
    case Metric::Observation: return "obs";
    case Metric::SafetyMargin: return "safety_margin";
  }
  return "";
}

inline std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

/// Value after "<key> = " on its own line.
inline std::optional<std::string> field(const std::string& text, std::string_view key) {
  const std::string tag = std::string(key) + " = ";
  std::size_t pos = 0;
  while ((pos = text.find(tag, pos)) != std::string::npos) {
    if (pos == 0 || text[pos - 1] == '\n') {
      const std::size_t start = pos + tag.size();
      return trim(text.substr(start, text.find('\n', start) - start));
    }
    ++pos;
  }
  return std::nullopt;
}

}  // namespace detail

struct CandidateRow {
  int id = 0;
  std::string policy;
  MetricVector metrics;
};

inline std::vector<CandidateRow> candidate_rows(const CandidateSet& set) {
  std::vector<CandidateRow> rows;
  for (std::size_t i : set.successful()) {
    const Candidate& c = set.candidates[i];
    rows.push_back({c.id, c.label(), c.metrics});
  }
  return rows;
}

inline ChatRequest annotation_prompt(const std::vector<CandidateRow>& rows, const IntentPriority& intent,
                                     const ReasoningConfig& rc = {}) {
  ChatRequest r;
  r.temperature = rc.temperature;
  r.max_tokens = rc.max_tokens;
  r.system =
      "You are a rendezvous mission operator picking one trajectory candidate from a table of metrics.\n"
      "Rank candidates lexicographically in the priority order; do not form a weighted sum.\n"
      "Reply with valid JSON and nothing else.\n"
      "Write one_line_reason as a hedged sentence on why the chosen candidate suits the intent, given its metrics.\n"
      "The candidates trade off against each other and nothing is guaranteed, so make no absolute claims and "
      "do not compare the chosen candidate with the others.\n";
  std::string u = "Priority order: ";
  for (std::size_t i = 0; i < 4; ++i) u += (i ? " > " : "") + std::string(intent_name(intent[i]));
  u += "\nMetrics: ";
  for (std::size_t i = 0; i < 4; ++i) u += (i ? ", " : "") + std::string(detail::column_name(intent[i]));
  u +=
      "\nRules:\n"
      "- fuel_dv and time_sec: small values are preferred.\n"
      "- obs and safety_margin: large values are preferred.\n"
      "- Every candidate already satisfies the safety constraint; safety_margin measures conservatism.\n"
      "\nCandidates CSV:\nid,policy,fuel_dv,time_sec,obs,safety_margin\n";
  for (const CandidateRow& row : rows) {
    u += std::to_string(row.id) + "," + row.policy + "," + detail::num(row.metrics.fuel_dv) + "," +
         detail::num(row.metrics.transfer_time_sec) + "," + detail::num(row.metrics.observation_score) + "," +
         detail::num(row.metrics.safety_margin_m) + "\n";
  }
  u +=
      "\nReply with JSON: {\"best_candidate_id\": <int>, \"one_line_reason\": \"<one sentence>\"}\n"
      "\nStyle of one_line_reason:\n"
      "- a single short sentence\n"
      "- no candidate ids or labels\n"
      "- no comparative or superlative words (lower, higher, lowest, highest, better, best, worse, worst, more, "
      "less)\n"
      "- no ranking symbols or comparisons (>, <, >=, <=, versus, than)\n"
      "- hedged wording, for example: should keep the transfer time short\n";
  r.user = std::move(u);
  return r;
}

inline ChatRequest generation_prompt(const ReasoningInput& in, const ReasoningConfig& rc = {}) {
  ChatRequest r;
  r.temperature = rc.temperature;
  r.max_tokens = rc.max_tokens;
  r.system =
      "You pick trajectory-level decisions from a structured mission context.\n"
      "Respect the intent priority and the constraints, think briefly, and give a strict JSON answer.\n";
  std::string x0 = "[";
  for (int i = 0; i < 6; ++i) x0 += (i ? ", " : "") + detail::num(in.x0.v[i]);
  x0 += "]";
  std::string prims;
  for (int id = 1; id <= kNumPrimitives; ++id) {
    prims += "  " + std::to_string(id) + ": " + std::string(to_string(primitive_from_id(id))) + "\n";
  }
  r.user = "Role: rendezvous mission operator.\n"
           "Choose a behavior sequence b_seq (primitive ids, at most " +
           std::to_string(kMaxPhases) +
           ") and a transfer time tf in seconds for the context below, then justify the choice in one line.\n"
           "Primitives:\n" +
           prims + "\nx0_roe_m = " + x0 + "\nr_koz = " + detail::num(in.r_koz) +
           "\nbeta = " + detail::num(in.beta) + "\nintent_priority = " + in.intent.str() +
           "\n\nAnswer as <|think|> notes <|answer|> {\"reasoning\": \"...\", \"tf\": <s>, \"b_seq\": [...]} "
           "<|end|>\n";
  return r;
}

inline ChatRequest extraction_prompt(std::string_view sentence, const ReasoningConfig& rc = {}) {
  ChatRequest r;
  r.temperature = 0.0;
  r.max_tokens = rc.max_tokens;
  r.system = "Report metric names using only the allowed list.\n";
  r.user =
      "List at most two metrics the sentence mentions, in the order they appear.\n"
      "Allowed: fuel_dv, transfer_time_sec, observation_score, safety_margin_m.\n"
      "Cues per metric:\n"
      "- fuel_dv: fuel, delta-v, control cost\n"
      "- transfer_time_sec: time, transfer time, tof\n"
      "- observation_score: observation\n"
      "- safety_margin_m: safety, safety margin, clearance\n"
      "Reply with strict JSON: {\"focused_metrics\": [\"...\"]}\n"
      "Sentence:\n" +
      std::string(sentence) + "\n";
  return r;
}

// ---------------------------------------------------------------------------
// Offline mock

/// Deterministic stand-in for a chat model. Annotation follows
/// lexicographic_select; generation samples a feasible campaign; extraction
/// applies the keyword rules. Output depends only on the request text.
class MockChatClient final : public ChatClient {
 public:
  explicit MockChatClient(Config cfg = {}) : cfg_(std::move(cfg)) {}

  ChatResponse complete(const ChatRequest& req) override {
    const std::uint64_t h = fnv1a(req.system + '\x1f' + req.user);
    if (req.user.find("Candidates CSV:") != std::string::npos) return {annotate(req.user, h)};
    if (detail::field(req.user, "x0_roe_m")) return {generate(req.user, h)};
    if (const auto pos = req.user.find("Sentence:\n"); pos != std::string::npos) {
      nlohmann::json names = nlohmann::json::array();
      for (Metric m : extract_metrics(req.user.substr(pos + 10))) names.push_back(metric_name(m));
      return {nlohmann::json{{"focused_metrics", names}}.dump()};
    }
    throw ChatError("mock client: unrecognized prompt");
  }

  static std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
    return h;
  }

 private:
  // One or two top-priority metrics; two in three cases out of four.
  static std::vector<Metric> named(const IntentPriority& intent, std::uint64_t h) {
    if ((h >> 17) % 4 == 0) return {intent[0]};
    return {intent[0], intent[1]};
  }

  static IntentPriority parse_priority(const std::string& text) {
    const auto pos = text.find("Priority order: ");
    if (pos == std::string::npos) throw ChatError("mock client: no priority line");
    const std::size_t start = pos + 16;
    std::string line = text.substr(start, text.find('\n', start) - start);
    std::replace(line.begin(), line.end(), '>', ',');
    return IntentPriority::parse(line);
  }

  std::string annotate(const std::string& text, std::uint64_t h) const {
    const IntentPriority intent = parse_priority(text);
    const std::string header = "id,policy,fuel_dv,time_sec,obs,safety_margin\n";
    std::size_t pos = text.find(header);
    if (pos == std::string::npos) throw ChatError("mock client: no CSV header");
    pos += header.size();
    std::vector<int> ids;
    std::vector<MetricVector> rows;
    while (pos < text.size() && text[pos] != '\n') {
      const std::size_t end = text.find('\n', pos);
      std::stringstream line(text.substr(pos, end - pos));
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(line, cell, ',')) cells.push_back(cell);
      if (cells.size() != 6) throw ChatError("mock client: malformed CSV row");
      ids.push_back(std::stoi(cells[0]));
      rows.push_back({std::stod(cells[2]), std::stod(cells[3]), std::stod(cells[4]), std::stod(cells[5])});
      pos = end == std::string::npos ? text.size() : end + 1;
    }
    if (rows.empty()) throw ChatError("mock client: empty candidate table");
    const std::size_t best = lexicographic_select(rows, intent);
    return nlohmann::json{{"best_candidate_id", ids[best]},
                          {"one_line_reason", compose_trace("The chosen trajectory", named(intent, h))}}
        .dump();
  }

  std::string generate(const std::string& text, std::uint64_t h) const {
    ReasoningInput in;
    try {
      in.x0 = roe_from_json(nlohmann::json::parse(*detail::field(text, "x0_roe_m")));
      in.intent = IntentPriority::parse(detail::field(text, "intent_priority").value_or(""));
    } catch (const std::exception& e) {
      throw ChatError(std::string("mock client: bad generation prompt: ") + e.what());
    }
    std::mt19937_64 rng(h);
    ReasoningOutput d;
    try {
      d = heuristic_reason(in, cfg_, rng);
    } catch (const std::domain_error&) {
      // a model still answers; the caller rejects the empty sequence
      return "<|think|>\nno admissible campaign\n<|answer|>\n{\"reasoning\":\"\",\"tf\":0,\"b_seq\":[]}\n<|end|>";
    }
    nlohmann::json ids = nlohmann::json::array();
    for (Primitive p : d.behaviors.primitives) ids.push_back(static_cast<int>(p));
    std::string start(to_string(d.path.front()));
    const std::string trace = compose_trace("This plan", named(in.intent, h));
    return "<|think|>\nstart " + start + ", top priority " + std::string(intent_name(in.intent[0])) +
           "\n<|answer|>\n" + nlohmann::json{{"reasoning", trace}, {"tf", d.t_f}, {"b_seq", ids}}.dump() +
           "\n<|end|>";
  }

  Config cfg_;
};

// ---------------------------------------------------------------------------
// Chat-backed operations

struct Annotation {
  int best_id = 0;
  std::string reason;
  int attempts = 0;
};

/// Strict JSON object or nullopt.
inline std::optional<nlohmann::json> parse_strict_object(const std::string& s) {
  const auto j = nlohmann::json::parse(s, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  return j;
}

/// Asks the client to choose among the successful candidates. One retry on a
/// malformed reply; an out-of-range id is an error.
inline Annotation annotate(const CandidateSet& set, const IntentPriority& intent, ChatClient& client,
                           const ReasoningConfig& rc = {}) {
  const std::vector<CandidateRow> rows = candidate_rows(set);
  if (rows.empty()) throw std::domain_error("annotate: no successful candidate");
  const ChatRequest req = annotation_prompt(rows, intent, rc);
  for (int attempt = 1; attempt <= 2; ++attempt) {
    const auto j = parse_strict_object(client.complete(req).content);
    if (!j || !j->contains("best_candidate_id") || !j->at("best_candidate_id").is_number_integer() ||
        !j->contains("one_line_reason") || !j->at("one_line_reason").is_string()) {
      continue;
    }
    const int id = j->at("best_candidate_id").get<int>();
    if (std::none_of(rows.begin(), rows.end(), [&](const CandidateRow& r) { return r.id == id; })) {
      throw std::domain_error("annotate: best_candidate_id " + std::to_string(id) + " is not in the table");
    }
    return {id, j->at("one_line_reason").get<std::string>(), attempt};
  }
  throw std::runtime_error("annotate: malformed reply after one retry");
}

/// Chat-based extraction with the keyword rules as fallback for a malformed reply.
inline std::vector<Metric> extract_metrics(std::string_view text, ChatClient& client, const ReasoningConfig& rc = {}) {
  const ChatRequest req = extraction_prompt(text, rc);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto j = parse_strict_object(client.complete(req).content);
    if (!j || !j->contains("focused_metrics") || !j->at("focused_metrics").is_array()) continue;
    std::vector<Metric> out;
    try {
      for (const auto& n : j->at("focused_metrics")) {
        const Metric m = metric_from_string(n.get<std::string>());
        if (std::find(out.begin(), out.end(), m) == out.end() && out.size() < 2) out.push_back(m);
      }
    } catch (const std::exception&) {
      continue;
    }
    return out;
  }
  return extract_metrics(text);
}

namespace detail {

inline std::optional<Primitive> primitive_from_json(const nlohmann::json& j) {
  if (j.is_number_integer()) {
    const int id = j.get<int>();
    if (id >= 1 && id <= kNumPrimitives) return primitive_from_id(id);
    return std::nullopt;
  }
  if (j.is_string()) {
    for (int id = 1; id <= kNumPrimitives; ++id) {
      if (to_string(primitive_from_id(id)) == j.get<std::string>()) return primitive_from_id(id);
    }
  }
  return std::nullopt;
}

}  // namespace detail

/// Chat-generated (b_seq, tf). Unusable answers fall back to the heuristic
/// reasoner with `fallback` set; tf is projected onto [K, N_max] steps.
inline ReasoningOutput llm_reason(const ReasoningInput& in, ChatClient& client, const Config& cfg,
                                  std::mt19937_64& rng) {
  const DomainId start = start_domain(in.x0, cfg.graph.domain_tolerance);
  auto fallback = [&](std::string why) {
    ReasoningOutput out = heuristic_reason(in, cfg, rng);
    out.fallback = true;
    out.note = std::move(why);
    return out;
  };
  std::string content;
  try {
    content = client.complete(generation_prompt(in, cfg.reasoning)).content;
  } catch (const ChatError& e) {
    return fallback(e.what());
  }
  const std::size_t a = content.find("<|answer|>");
  if (a == std::string::npos) return fallback("no answer block");
  const std::size_t e = content.find("<|end|>", a);
  const auto j = parse_strict_object(detail::trim(content.substr(a + 10, e == std::string::npos ? e : e - a - 10)));
  if (!j) return fallback("answer is not a JSON object");
  if (!j->contains("reasoning") || !j->at("reasoning").is_string() || !j->contains("tf") ||
      !j->at("tf").is_number() || !j->contains("b_seq") || !j->at("b_seq").is_array()) {
    return fallback("answer lacks reasoning, tf or b_seq");
  }
  ReasoningOutput out;
  out.reasoning = j->at("reasoning").get<std::string>();
  out.behaviors.start = start;
  for (const auto& b : j->at("b_seq")) {
    const auto p = detail::primitive_from_json(b);
    if (!p) return fallback("unknown primitive in b_seq");
    out.behaviors.primitives.push_back(*p);
  }
  const int k = static_cast<int>(out.behaviors.primitives.size());
  if (k < 1 || k > kMaxPhases) return fallback("b_seq must hold 1 to " + std::to_string(kMaxPhases) + " behaviors");
  const SequenceCheck chk = sequence_feasible(out.behaviors);
  if (!chk.feasible) return fallback("b_seq violates the transition graph");
  out.path = chk.path;
  out.behaviors.targets.assign(chk.path.begin() + 1, chk.path.end());

  const double dt = cfg.dynamics.dt;
  const double tf = j->at("tf").get<double>();
  const double steps = tf / dt;
  long n = std::isfinite(steps) ? std::lround(steps) : 0;
  const bool on_grid = std::isfinite(steps) && std::abs(steps - static_cast<double>(n)) <= 1e-9 * std::max(1.0, steps);
  const long clamped = std::clamp<long>(n, k, cfg.dynamics.n_max);
  out.tf_clamped = !on_grid || clamped != n;
  out.durations = split_durations(out.behaviors.primitives, static_cast<int>(clamped), cfg.graph.durations);
  out.t_f = static_cast<double>(clamped) * dt;
  if (out.tf_clamped) out.note = "tf projected from " + detail::num(tf) + " s to " + detail::num(out.t_f) + " s";
  return out;
}

// ---------------------------------------------------------------------------
// Records

inline nlohmann::json to_json(const WaypointPlan& p) {
  nlohmann::json w = nlohmann::json::array();
  for (const Waypoint& x : p.waypoints) w.push_back({x.d_lambda, x.d_eyiy});
  return {{"waypoints", w}, {"durations", p.durations}};
}

inline WaypointPlan plan_from_json(const nlohmann::json& j) {
  WaypointPlan p;
  for (const auto& w : j.at("waypoints")) p.waypoints.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
  p.durations = j.at("durations").get<std::vector<int>>();
  return p;
}

inline nlohmann::json to_json(const MetricVector& m) {
  return {{std::string(metric_name(Metric::Fuel)), m.fuel_dv},
          {std::string(metric_name(Metric::Time)), m.transfer_time_sec},
          {std::string(metric_name(Metric::Observation)), m.observation_score},
          {std::string(metric_name(Metric::SafetyMargin)), m.safety_margin_m}};
}

inline nlohmann::json to_json(const ReasoningOutput& d) {
  nlohmann::json ids = nlohmann::json::array();
  for (Primitive p : d.behaviors.primitives) ids.push_back(static_cast<int>(p));
  nlohmann::json j = {{"reasoning", d.reasoning}, {"tf", d.t_f},           {"b_seq", ids},
                      {"path", path_string(d.path)}, {"durations", d.durations}, {"fallback", d.fallback},
                      {"tf_clamped", d.tf_clamped}};
  if (!d.note.empty()) j["note"] = d.note;
  return j;
}

inline nlohmann::json to_json(const Candidate& c) {
  return {{"id", c.id},
          {"policy", c.label()},
          {"decision", to_json(c.decision)},
          {"plan", to_json(c.plan)},
          {"scp_status", to_string(c.trajectory.status)},
          {"failed_phase", c.trajectory.failed_phase},
          {"metrics", to_json(c.metrics)},
          {"reward", c.reward}};
}

// ---------------------------------------------------------------------------
// Reasoning dataset

struct DatasetSummary {
  int requested = 0;
  int written = 0;
  int failures = 0;
};

/// One line per scenario: context, intent, candidate table, selected id and
/// the supervised (reasoning, tf, b_seq) target. Failed scenarios are logged
/// to `log` and skipped.
inline DatasetSummary build_reasoning_dataset(int n, const Config& cfg, const PolicyWeights* policy,
                                              ChatClient& client, std::uint64_t seed, std::ostream& sink,
                                              std::ostream* log = nullptr, int threads = 1) {
  std::vector<std::string> lines(static_cast<std::size_t>(n));
  std::vector<std::string> errors(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), threads, [&](std::size_t i) {
    const std::uint64_t s = derive_seed(seed, i);
    std::mt19937_64 rng(s);
    Scenario sc = sample_scenario(cfg.harness, rng);
    sc.seed = s;
    try {
      const ReasoningInput in = reasoning_input(sc, cfg);
      const MissionContext ctx = make_mission_context(cfg, sc);
      const CandidateSet set = generate_candidates(in, cfg.reasoning.candidates, ctx, cfg, policy, rng);
      const Annotation a = annotate(set, sc.intent, client, cfg.reasoning);
      const Candidate& chosen = set.candidates.at(static_cast<std::size_t>(a.best_id));
      nlohmann::json cands = nlohmann::json::array();
      for (const Candidate& c : set.candidates) cands.push_back(to_json(c));
      nlohmann::json b = nlohmann::json::array();
      for (Primitive p : chosen.decision.behaviors.primitives) b.push_back(static_cast<int>(p));
      const nlohmann::json rec = {{"schema", 1},
                                  {"index", i},
                                  {"seed", s},
                                  {"scenario", to_json(sc)},
                                  {"intent", sc.intent.str()},
                                  {"candidates", cands},
                                  {"selected_id", a.best_id},
                                  {"reason", a.reason},
                                  {"eta", {{"reasoning", a.reason}, {"tf", chosen.decision.t_f}, {"b_seq", b}}}};
      lines[i] = rec.dump();
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  DatasetSummary sum{n, 0, 0};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      ++sum.failures;
      if (log) *log << "scenario " << i << ": " << errors[i] << "\n";
      continue;
    }
    sink << lines[i] << "\n";
    ++sum.written;
  }
  return sum;
}

}  // namespace itg
