#pragma once

// Keyed text storage for per-user Q-tables and session records, plus the
// Q-table record format.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mindcheck/catalog.hpp"
#include "mindcheck/scheduler.hpp"

namespace mindcheck {

class TextStore {
 public:
  virtual ~TextStore() = default;
  /// nullopt when the key has never been written.
  virtual std::optional<std::string> get(const std::string& key) = 0;
  /// Throws PersistenceError on write failure.
  virtual void put(const std::string& key, const std::string& text) = 0;
};

class MemoryTextStore : public TextStore {
 public:
  std::optional<std::string> get(const std::string& key) override;
  void put(const std::string& key, const std::string& text) override;

 private:
  std::mutex mu_;
  std::map<std::string, std::string> entries_;
};

/// One file per key under `root`; keys are percent-encoded into file names.
/// Writes go to a temporary file and are renamed into place.
class FileTextStore : public TextStore {
 public:
  explicit FileTextStore(std::filesystem::path root);

  std::optional<std::string> get(const std::string& key) override;
  void put(const std::string& key, const std::string& text) override;

  std::filesystem::path path_for(const std::string& key) const;

 private:
  std::filesystem::path root_;
  std::mutex mu_;
};

nlohmann::json qtable_to_json(const QTable& q, const DimensionCatalog& catalog);
/// Throws PersistenceError unless every (state, action) cell is present and finite.
QTable qtable_from_json(const nlohmann::json& doc, const DimensionCatalog& catalog);

std::string qtable_key(const std::string& user_id);

void persist_qtable(TextStore& store, const QTable& q, const DimensionCatalog& catalog);

/// The stored table for `user_id`, or a fresh one from `priorities` when none
/// exists. A stored record that fails to parse throws PersistenceError.
QTable load_qtable(TextStore& store, const std::string& user_id, const DimensionCatalog& catalog,
                   const Priorities& priorities, const SchedulerConfig& config);

}  // namespace mindcheck
