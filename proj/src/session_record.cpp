#include <sstream>

#include "mindcheck/errors.hpp"
#include "mindcheck/session.hpp"

namespace mindcheck {

namespace {

constexpr std::string_view kRecordFormat = "mindcheck.session/1";

std::string_view score_label(Score s) {
  switch (s) {
    case Score::Good: return "doing well";
    case Score::SomeProblems: return "some problems";
    case Score::NeedsAttention: return "needs attention";
  }
  return "";
}

Phase parse_phase(const std::string& s) {
  if (s == "screening") return Phase::Screening;
  if (s == "summary") return Phase::Summary;
  if (s == "cbt") return Phase::Cbt;
  if (s == "done") return Phase::Done;
  throw PersistenceError("unknown phase '" + s + "'");
}

StateId parse_state(const std::string& key, const DimensionCatalog& catalog) {
  if (key == "start") return StateId::start();
  if (key == "end") return StateId::end();
  constexpr std::string_view prefix = "question:";
  if (key.rfind(prefix, 0) == 0) return StateId::question(catalog.require(key.substr(prefix.size())));
  throw PersistenceError("unknown state '" + key + "'");
}

nlohmann::json slugs(const DimensionSet& set, const DimensionCatalog& catalog) {
  auto arr = nlohmann::json::array();
  for (auto d : set.members()) arr.push_back(catalog.slug(d));
  return arr;
}

DimensionSet slug_set(const nlohmann::json& arr, const DimensionCatalog& catalog) {
  DimensionSet set;
  for (const auto& s : arr) set.insert(catalog.require(s.get<std::string>()));
  return set;
}

nlohmann::json optional_slug(const std::optional<DimensionId>& d, const DimensionCatalog& catalog) {
  return d ? nlohmann::json(catalog.slug(*d)) : nlohmann::json();
}

std::optional<DimensionId> parse_optional_slug(const nlohmann::json& j, const DimensionCatalog& catalog) {
  if (j.is_null()) return std::nullopt;
  return catalog.require(j.get<std::string>());
}

nlohmann::json turn_to_json(const Turn& t, const DimensionCatalog& catalog) {
  nlohmann::json j{{"role", t.role == Turn::Role::User ? "user" : "engine"}, {"text", t.text}};
  if (t.kind) j["kind"] = std::string(to_string(*t.kind));
  if (t.dimension) j["dimension"] = catalog.slug(*t.dimension);
  if (t.stage) j["stage"] = *t.stage;
  if (t.role == Turn::Role::User) j["timestamp"] = t.timestamp;
  return j;
}

Turn turn_from_json(const nlohmann::json& j, const DimensionCatalog& catalog) {
  Turn t;
  const auto role = j.at("role").get<std::string>();
  if (role != "user" && role != "engine") throw PersistenceError("unknown turn role '" + role + "'");
  t.role = role == "user" ? Turn::Role::User : Turn::Role::Engine;
  t.text = j.at("text").get<std::string>();
  if (j.contains("kind")) {
    t.kind = parse_turn_kind(j["kind"].get<std::string>());
    if (!t.kind) throw PersistenceError("unknown turn kind '" + j["kind"].get<std::string>() + "'");
  }
  if (j.contains("dimension")) t.dimension = catalog.require(j["dimension"].get<std::string>());
  if (j.contains("stage")) t.stage = j["stage"].get<int>();
  if (t.role == Turn::Role::User) t.timestamp = j.at("timestamp").get<std::string>();
  return t;
}

}  // namespace

nlohmann::json session_config_to_json(const SessionConfig& c) {
  return {{"learning_rate", c.scheduler.learning_rate},
          {"discount", c.scheduler.discount},
          {"epsilon", c.scheduler.epsilon},
          {"scheduler_seed", c.scheduler.rng_seed},
          {"question_seed", c.question_seed},
          {"rephrase_questions", c.rephrase_questions}};
}

SessionConfig session_config_from_json(const nlohmann::json& j) {
  SessionConfig c;
  c.scheduler.learning_rate = j.value("learning_rate", c.scheduler.learning_rate);
  c.scheduler.discount = j.value("discount", c.scheduler.discount);
  c.scheduler.epsilon = j.value("epsilon", c.scheduler.epsilon);
  c.scheduler.rng_seed = j.value("scheduler_seed", c.scheduler.rng_seed);
  c.question_seed = j.value("question_seed", c.question_seed);
  c.rephrase_questions = j.value("rephrase_questions", c.rephrase_questions);
  c.scheduler.validate();
  return c;
}

nlohmann::json record_to_json(const SessionRecord& r, const DimensionCatalog& catalog) {
  nlohmann::json j;
  j["format"] = kRecordFormat;
  j["session_id"] = r.session_id;
  j["user_id"] = r.user_id;
  j["created_at"] = r.created_at;
  j["catalog_version"] = catalog.version();
  j["selected"] = slugs(r.selected, catalog);
  j["config"] = session_config_to_json(r.config);
  j["qtable_before"] = qtable_to_json(r.qtable_before, catalog);
  j["qtable_after"] = qtable_to_json(r.qtable_after, catalog);
  j["phase"] = std::string(to_string(r.phase));
  j["current_state"] = state_key(r.current_state, catalog);
  j["visited"] = slugs(r.visited, catalog);
  auto scores = nlohmann::json::object();
  for (const auto& [d, s] : r.scores) scores[catalog.slug(d)] = to_int(s);
  j["scores"] = std::move(scores);
  auto turns = nlohmann::json::array();
  for (const auto& t : r.turns) turns.push_back(turn_to_json(t, catalog));
  j["turns"] = std::move(turns);
  auto rv = nlohmann::json::array();
  for (const auto& c : r.rv) rv.push_back(rv_to_json(c, catalog));
  j["rv"] = std::move(rv);
  j["cbt"] = r.cbt ? cbt_to_json(*r.cbt, catalog) : nlohmann::json();
  auto unclassified = nlohmann::json::array();
  for (const auto& u : r.unclassified)
    unclassified.push_back({{"text", u.text}, {"timestamp", u.timestamp}, {"asked", optional_slug(u.asked, catalog)}});
  j["unclassified"] = std::move(unclassified);
  j["notes"] = r.notes;
  j["telemetry"] = telemetry_to_json(r.telemetry);
  return j;
}

SessionRecord record_from_json(const nlohmann::json& j, const DimensionCatalog& catalog) {
  try {
    if (j.at("format").get<std::string>() != kRecordFormat) throw PersistenceError("unsupported session record format");
    SessionRecord r;
    r.session_id = j.at("session_id").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.created_at = j.at("created_at").get<std::string>();
    r.selected = slug_set(j.at("selected"), catalog);
    r.config = session_config_from_json(j.at("config"));
    r.qtable_before = qtable_from_json(j.at("qtable_before"), catalog);
    r.qtable_after = qtable_from_json(j.at("qtable_after"), catalog);
    r.phase = parse_phase(j.at("phase").get<std::string>());
    r.current_state = parse_state(j.at("current_state").get<std::string>(), catalog);
    r.visited = slug_set(j.at("visited"), catalog);
    for (const auto& [slug, s] : j.at("scores").items()) r.scores[catalog.require(slug)] = score_from_int(s.get<int>());
    for (const auto& t : j.at("turns")) r.turns.push_back(turn_from_json(t, catalog));
    for (const auto& c : j.at("rv")) r.rv.push_back(rv_from_json(c, catalog));
    if (!j.at("cbt").is_null()) r.cbt = cbt_from_json(j["cbt"], catalog);
    for (const auto& u : j.at("unclassified"))
      r.unclassified.push_back({u.at("text").get<std::string>(), u.at("timestamp").get<std::string>(),
                                parse_optional_slug(u.at("asked"), catalog)});
    r.notes = j.at("notes").get<std::vector<std::string>>();
    r.telemetry = telemetry_from_json(j.at("telemetry"));
    return r;
  } catch (const PersistenceError&) {
    throw;
  } catch (const std::exception& e) {
    throw PersistenceError(std::string("malformed session record: ") + e.what());
  }
}

SessionReport build_report(const SessionRecord& r, const DimensionCatalog& catalog) {
  SessionReport rep;
  rep.session_id = r.session_id;
  nlohmann::json data;
  data["session_id"] = r.session_id;
  data["user_id"] = r.user_id;
  data["created_at"] = r.created_at;
  data["catalog_version"] = catalog.version();

  std::ostringstream text;
  text << "Session report\n";
  text << "Session: " << r.session_id << "\nUser: " << r.user_id << "\nDate: " << r.created_at << "\n\n";

  text << "Dimension scores\n";
  auto table = nlohmann::json::array();
  auto flagged = nlohmann::json::array();
  for (auto d : r.visited.members()) {
    const auto it = r.scores.find(d);
    nlohmann::json row{{"dimension", catalog.slug(d)}, {"display_name", catalog.display_name(d)}};
    row["score"] = it == r.scores.end() ? nlohmann::json() : nlohmann::json(to_int(it->second));
    table.push_back(std::move(row));
    text << "  " << catalog.display_name(d) << ": ";
    if (it == r.scores.end()) {
      text << "not answered\n";
    } else {
      text << to_int(it->second) << " (" << score_label(it->second) << ")\n";
      if (it->second == Score::NeedsAttention) flagged.push_back(catalog.slug(d));
    }
  }
  if (table.empty()) text << "  none\n";
  data["scores"] = table;
  data["flagged"] = flagged;
  text << "\nFlagged for attention: ";
  if (flagged.empty()) text << "none";
  for (std::size_t i = 0; i < flagged.size(); ++i)
    text << (i ? ", " : "") << catalog.display_name(catalog.require(flagged[i].get<std::string>()));
  text << "\n";

  auto rv = nlohmann::json::array();
  if (!r.rv.empty()) text << "\nReflection and validation\n";
  for (const auto& c : r.rv) {
    rv.push_back(rv_to_json(c, catalog));
    text << "  " << catalog.display_name(c.dimension) << " [" << to_string(c.outcome) << "]\n";
    text << "    Q: " << c.original_question << "\n    A: " << c.original_response << "\n";
    for (const auto& f : c.followups) {
      text << "    Q: " << f.question << "\n    A: " << f.response << "\n";
      if (f.guide) text << "    Guide: " << *f.guide << "\n";
    }
    if (!c.validation.empty()) text << "    Validation: " << c.validation << "\n";
    if (!c.note.empty()) text << "    Note: " << c.note << "\n";
  }
  data["rv"] = rv;

  if (r.cbt) {
    const auto& s = *r.cbt;
    data["cbt"] = cbt_to_json(s, catalog);
    text << "\nCBT: " << catalog.display_name(s.chosen) << " [" << to_string(s.status) << "]\n";
    text << "  Situation: " << s.situation << "\n";
    for (const auto& st : s.stages) {
      text << "  Stage " << to_int(st.stage) << " (" << to_string(st.stage) << ")"
           << (st.passed ? " passed" : "") << "\n";
      for (const auto& a : st.attempts) {
        text << "    Q: " << a.question << "\n    A: " << a.response << "\n";
        if (a.guide) text << "    Guide: " << *a.guide << "\n";
      }
    }
    if (!s.recommendation.empty()) text << "  Recommendation: " << s.recommendation << "\n";
  } else {
    data["cbt"] = nullptr;
  }

  auto unclassified = nlohmann::json::array();
  if (!r.unclassified.empty()) text << "\nUnclassified responses\n";
  for (const auto& u : r.unclassified) {
    unclassified.push_back({{"text", u.text}, {"timestamp", u.timestamp}, {"asked", optional_slug(u.asked, catalog)}});
    text << "  [" << u.timestamp << "] " << (u.text.empty() ? "(empty)" : u.text) << "\n";
  }
  data["unclassified"] = unclassified;

  data["notes"] = r.notes;
  if (!r.notes.empty()) text << "\nNotes\n";
  for (const auto& n : r.notes) text << "  " << n << "\n";

  data["telemetry"] = telemetry_to_json(r.telemetry);
  rep.data = std::move(data);
  rep.text = text.str();
  return rep;
}

}  // namespace mindcheck
