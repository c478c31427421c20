#pragma once

// Epsilon-greedy tabular Q-learning over the question sequence. States are
// Start, one per asked question, and End; actions ask a dimension's question
// or finish the screening.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "mindcheck/catalog.hpp"
#include "mindcheck/domain.hpp"
#include "mindcheck/random.hpp"

namespace mindcheck {

inline constexpr int kStateCount = kDimensionCount + 2;   // 39
inline constexpr int kActionCount = kDimensionCount + 1;  // 38

class StateId {
 public:
  enum class Kind { Start, Question, End };

  static constexpr StateId start() { return StateId(0); }
  static StateId question(DimensionId d) { return StateId(d.index()); }
  static constexpr StateId end() { return StateId(kStateCount - 1); }
  /// Inverse of index(); throws std::out_of_range.
  static StateId from_index(int index);

  Kind kind() const noexcept;
  /// Only valid for Question states.
  DimensionId dimension() const;
  /// 0 = Start, 1..37 = Question(d), 38 = End.
  int index() const noexcept { return index_; }

  friend auto operator<=>(StateId, StateId) = default;

 private:
  explicit constexpr StateId(int index) : index_(index) {}
  int index_;
};

class ActionId {
 public:
  static ActionId ask(DimensionId d) { return ActionId(d.index() - 1); }
  static constexpr ActionId finish() { return ActionId(kActionCount - 1); }
  static ActionId from_index(int index);

  bool is_finish() const noexcept { return index_ == kActionCount - 1; }
  /// Only valid for Ask actions.
  DimensionId dimension() const;
  /// 0..36 = Ask(d), 37 = Finish.
  int index() const noexcept { return index_; }

  friend auto operator<=>(ActionId, ActionId) = default;

 private:
  explicit constexpr ActionId(int index) : index_(index) {}
  int index_;
};

/// The state the action leads to.
StateId successor(ActionId a);

struct SchedulerConfig {
  double learning_rate = 0.1;
  double discount = 0.9;
  /// Probability of taking the greedy action.
  double epsilon = 0.9;
  std::uint64_t rng_seed = 0;

  /// Throws std::invalid_argument when a parameter is out of range.
  void validate() const;

  friend bool operator==(const SchedulerConfig&, const SchedulerConfig&) = default;
};

using Priorities = std::map<DimensionId, double>;

/// Throws CatalogError when a slug is unknown or a dimension is missing.
Priorities parse_priorities(const nlohmann::json& doc, const DimensionCatalog& catalog);
const Priorities& default_priorities();

/// Q-values for every (state, action) pair except those out of End.
class QTable {
 public:
  explicit QTable(std::string owner = {});

  const std::string& owner() const noexcept { return owner_; }
  void set_owner(std::string owner) { owner_ = std::move(owner); }

  double at(StateId s, ActionId a) const { return values_[slot(s, a)]; }
  void set(StateId s, ActionId a, double value) { values_[slot(s, a)] = value; }

  /// max over all actions of Q(s, .); 0 for End.
  double max_value(StateId s) const;

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  static std::size_t slot(StateId s, ActionId a);

  std::string owner_;
  std::array<double, static_cast<std::size_t>((kStateCount - 1) * kActionCount)> values_{};
};

/// Q(s, Ask(d)) = priorities[d] for every non-End state s, Q(s, Finish) = 0.
QTable init_qtable(const Priorities& priorities, const SchedulerConfig& config,
                   std::string owner = {});

/// Epsilon-greedy choice among unvisited selectable dimensions. With
/// probability epsilon returns the argmax (ties to the lowest index),
/// otherwise a uniform draw over the same candidate set. Returns Finish when
/// no candidate remains.
ActionId select_next(StateId state, const QTable& q, const DimensionSet& visited,
                     const DimensionSet& selectable, const SchedulerConfig& config, Rng& rng);

/// select_next with every dimension selectable.
ActionId select_next(StateId state, const QTable& q, const DimensionSet& visited,
                     const SchedulerConfig& config, Rng& rng);

/// One-step Q-learning update of the single cell (s, a):
///   Q(s,a) += alpha * (reward + gamma * max_a' Q(s',a') - Q(s,a))
/// where the bootstrap term is 0 when s' is End.
void update(QTable& q, StateId s, ActionId a, double reward, StateId s_next,
            const SchedulerConfig& config);

inline void update(QTable& q, StateId s, ActionId a, Score reward, StateId s_next,
                   const SchedulerConfig& config) {
  update(q, s, a, static_cast<double>(to_int(reward)), s_next, config);
}

std::string state_key(StateId s, const DimensionCatalog& catalog);
std::string action_key(ActionId a, const DimensionCatalog& catalog);

}  // namespace mindcheck
