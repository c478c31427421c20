#include "mindcheck/scheduler.hpp"

#include <cmath>
#include <stdexcept>

#include "mindcheck/errors.hpp"
#include "mindcheck/resources.hpp"

namespace mindcheck {

StateId StateId::from_index(int index) {
  if (index < 0 || index >= kStateCount) throw std::out_of_range("state index out of range");
  return StateId(index);
}

StateId::Kind StateId::kind() const noexcept {
  if (index_ == 0) return Kind::Start;
  if (index_ == kStateCount - 1) return Kind::End;
  return Kind::Question;
}

DimensionId StateId::dimension() const {
  if (kind() != Kind::Question) throw std::logic_error("state has no dimension");
  return DimensionId::from_index(index_);
}

ActionId ActionId::from_index(int index) {
  if (index < 0 || index >= kActionCount) throw std::out_of_range("action index out of range");
  return ActionId(index);
}

DimensionId ActionId::dimension() const {
  if (is_finish()) throw std::logic_error("finish action has no dimension");
  return DimensionId::from_index(index_ + 1);
}

StateId successor(ActionId a) {
  return a.is_finish() ? StateId::end() : StateId::question(a.dimension());
}

void SchedulerConfig::validate() const {
  if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
    throw std::invalid_argument("learning rate must be in (0, 1]");
  }
  if (!(discount >= 0.0 && discount < 1.0)) throw std::invalid_argument("discount must be in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must be in [0, 1]");
}

Priorities parse_priorities(const nlohmann::json& doc, const DimensionCatalog& catalog) {
  if (!doc.is_object() || !doc.contains("priorities") || !doc["priorities"].is_object()) {
    throw CatalogError("malformed priorities: missing 'priorities' object");
  }
  Priorities out;
  for (const auto& [slug, value] : doc["priorities"].items()) {
    if (!value.is_number()) throw CatalogError("priority for '" + slug + "' is not a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) throw CatalogError("priority for '" + slug + "' is not finite");
    out[catalog.require(slug)] = v;
  }
  for (auto d : all_dimensions()) {
    if (!out.contains(d)) throw CatalogError("missing priority entry for '" + catalog.slug(d) + "'");
  }
  return out;
}

const Priorities& default_priorities() {
  static const Priorities priorities = parse_priorities(
      nlohmann::json::parse(resources::default_priorities_text()), default_catalog());
  return priorities;
}

QTable::QTable(std::string owner) : owner_(std::move(owner)) {}

std::size_t QTable::slot(StateId s, ActionId a) {
  if (s.kind() == StateId::Kind::End) throw std::logic_error("End has no actions");
  return static_cast<std::size_t>(s.index() * kActionCount + a.index());
}

double QTable::max_value(StateId s) const {
  if (s.kind() == StateId::Kind::End) return 0.0;
  double best = at(s, ActionId::from_index(0));
  for (int a = 1; a < kActionCount; ++a) best = std::max(best, at(s, ActionId::from_index(a)));
  return best;
}

QTable init_qtable(const Priorities& priorities, const SchedulerConfig& config, std::string owner) {
  config.validate();
  QTable q(std::move(owner));
  for (auto d : all_dimensions()) {
    auto it = priorities.find(d);
    if (it == priorities.end()) {
      throw PreconditionError("missing priority entry for dimension " + std::to_string(d.index()));
    }
    for (int s = 0; s < kStateCount - 1; ++s) q.set(StateId::from_index(s), ActionId::ask(d), it->second);
  }
  for (int s = 0; s < kStateCount - 1; ++s) q.set(StateId::from_index(s), ActionId::finish(), 0.0);
  return q;
}

ActionId select_next(StateId state, const QTable& q, const DimensionSet& visited,
                     const DimensionSet& selectable, const SchedulerConfig& config, Rng& rng) {
  if (state.kind() == StateId::Kind::End) throw PreconditionError("select_next called in End state");
  const auto candidates = (selectable - visited).members();
  if (candidates.empty()) return ActionId::finish();

  if (rng.uniform01() < config.epsilon) {
    DimensionId best = candidates.front();
    double best_value = q.at(state, ActionId::ask(best));
    for (auto d : candidates) {
      const double v = q.at(state, ActionId::ask(d));
      if (v > best_value) {
        best = d;
        best_value = v;
      }
    }
    return ActionId::ask(best);
  }
  return ActionId::ask(candidates[rng.uniform_index(candidates.size())]);
}

ActionId select_next(StateId state, const QTable& q, const DimensionSet& visited,
                     const SchedulerConfig& config, Rng& rng) {
  return select_next(state, q, visited, DimensionSet::all(), config, rng);
}

void update(QTable& q, StateId s, ActionId a, double reward, StateId s_next,
            const SchedulerConfig& config) {
  const double bootstrap = q.max_value(s_next);
  const double old = q.at(s, a);
  q.set(s, a, old + config.learning_rate * (reward + config.discount * bootstrap - old));
}

std::string state_key(StateId s, const DimensionCatalog& catalog) {
  switch (s.kind()) {
    case StateId::Kind::Start: return "start";
    case StateId::Kind::End: return "end";
    case StateId::Kind::Question: return "question:" + catalog.slug(s.dimension());
  }
  return {};
}

std::string action_key(ActionId a, const DimensionCatalog& catalog) {
  return a.is_finish() ? std::string("finish") : "ask:" + catalog.slug(a.dimension());
}

}  // namespace mindcheck
