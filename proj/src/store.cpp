#include "mindcheck/store.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "mindcheck/errors.hpp"

namespace mindcheck {

namespace {

constexpr const char* kQTableFormat = "mindcheck.qtable/1";

std::string encode_key(const std::string& key) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : key) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

}  // namespace

std::optional<std::string> MemoryTextStore::get(const std::string& key) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void MemoryTextStore::put(const std::string& key, const std::string& text) {
  std::lock_guard lock(mu_);
  entries_[key] = text;
}

FileTextStore::FileTextStore(std::filesystem::path root) : root_(std::move(root)) {}

std::filesystem::path FileTextStore::path_for(const std::string& key) const {
  return root_ / (encode_key(key) + ".json");
}

std::optional<std::string> FileTextStore::get(const std::string& key) {
  std::lock_guard lock(mu_);
  const auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    if (std::filesystem::exists(path)) throw PersistenceError("cannot read " + path.string());
    return std::nullopt;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void FileTextStore::put(const std::string& key, const std::string& text) {
  std::lock_guard lock(mu_);
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  const auto path = path_for(key);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw PersistenceError("cannot write " + tmp.string());
    out << text;
    out.flush();
    if (!out) throw PersistenceError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw PersistenceError("cannot replace " + path.string() + ": " + ec.message());
}

nlohmann::json qtable_to_json(const QTable& q, const DimensionCatalog& catalog) {
  nlohmann::json values = nlohmann::json::object();
  for (int s = 0; s < kStateCount - 1; ++s) {
    const auto state = StateId::from_index(s);
    nlohmann::json row = nlohmann::json::object();
    for (int a = 0; a < kActionCount; ++a) {
      const auto action = ActionId::from_index(a);
      row[action_key(action, catalog)] = q.at(state, action);
    }
    values[state_key(state, catalog)] = std::move(row);
  }
  return {{"format", kQTableFormat}, {"owner", q.owner()}, {"values", std::move(values)}};
}

QTable qtable_from_json(const nlohmann::json& doc, const DimensionCatalog& catalog) {
  if (!doc.is_object() || doc.value("format", "") != kQTableFormat) {
    throw PersistenceError("not a Q-table record");
  }
  if (!doc.contains("owner") || !doc["owner"].is_string() || !doc.contains("values") ||
      !doc["values"].is_object()) {
    throw PersistenceError("Q-table record missing owner or values");
  }
  QTable q(doc["owner"].get<std::string>());
  const auto& values = doc["values"];
  for (int s = 0; s < kStateCount - 1; ++s) {
    const auto state = StateId::from_index(s);
    const auto skey = state_key(state, catalog);
    if (!values.contains(skey) || !values[skey].is_object()) {
      throw PersistenceError("Q-table record missing state '" + skey + "'");
    }
    const auto& row = values[skey];
    for (int a = 0; a < kActionCount; ++a) {
      const auto action = ActionId::from_index(a);
      const auto akey = action_key(action, catalog);
      if (!row.contains(akey) || !row[akey].is_number()) {
        throw PersistenceError("Q-table record missing cell (" + skey + ", " + akey + ")");
      }
      const double v = row[akey].get<double>();
      if (!std::isfinite(v)) throw PersistenceError("non-finite Q-value at (" + skey + ", " + akey + ")");
      q.set(state, action, v);
    }
  }
  return q;
}

std::string qtable_key(const std::string& user_id) { return "qtable/" + user_id; }

void persist_qtable(TextStore& store, const QTable& q, const DimensionCatalog& catalog) {
  store.put(qtable_key(q.owner()), qtable_to_json(q, catalog).dump(2));
}

QTable load_qtable(TextStore& store, const std::string& user_id, const DimensionCatalog& catalog,
                   const Priorities& priorities, const SchedulerConfig& config) {
  auto text = store.get(qtable_key(user_id));
  if (!text) return init_qtable(priorities, config, user_id);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(*text);
  } catch (const nlohmann::json::exception& e) {
    throw PersistenceError("corrupt Q-table record for '" + user_id + "': " + e.what());
  }
  auto q = qtable_from_json(doc, catalog);
  if (q.owner() != user_id) throw PersistenceError("Q-table record owner mismatch for '" + user_id + "'");
  return q;
}

}  // namespace mindcheck
