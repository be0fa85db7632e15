#include <algorithm>
#include <set>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::curriculum {

namespace {

using world::Action;

const Snapshot& at(const SnapshotTable& table, gvf::StateIndex s) { return table.states[s]; }

gvf::Policy option_policy(const OptionSpec& spec, std::size_t states, const PolicyMap& policies) {
    switch (spec.policy) {
        case PolicyKind::primitive:
        case PolicyKind::fixed:
            return gvf::Policy::constant(states, world::action_count, static_cast<gvf::ActionIndex>(spec.action));
        case PolicyKind::uniform: return gvf::Policy::uniform(states, world::action_count);
        case PolicyKind::maximize: {
            auto it = policies.find(spec.id);
            if (it == policies.end())
                throw CurriculumError("option " + spec.abbrev + " has no learned policy yet");
            if (it->second.state_count() != states)
                throw CurriculumError("policy of option " + spec.abbrev + " does not match the world");
            return it->second;
        }
    }
    throw CurriculumError("unknown policy kind");
}

void check_table(const SnapshotTable& snapshots, const world::PoseMdp& env) {
    if (snapshots.states.size() != env.size())
        throw ArgumentError("snapshot table has " + std::to_string(snapshots.states.size()) + " states, world has " +
                            std::to_string(env.size()));
}

}  // namespace

std::shared_ptr<gvf::OptionDef> bind_option(const Registry& registry, int option_id, const world::PoseMdp& env,
                                            const SnapshotTable& snapshots, const PolicyMap& policies,
                                            std::optional<gvf::TerminationMode> mode) {
    check_table(snapshots, env);
    const OptionSpec& spec = registry.option(option_id);
    auto out = std::make_shared<gvf::OptionDef>();
    out->name = spec.abbrev;
    out->policy = option_policy(spec, env.size(), policies);
    if (spec.policy == PolicyKind::primitive) {
        out->mode = gvf::TerminationMode::one_step;
        out->termination = [](gvf::StateIndex) { return 1.0; };
        return out;
    }
    out->mode = mode.value_or(spec.mode);
    const SnapshotTable* table = &snapshots;
    const OptionSpec* s = &spec;
    const Registry* r = &registry;
    out->termination = [r, s, table](gvf::StateIndex i) { return option_termination(*r, *s, at(*table, i)); };
    if (spec.initiation) out->initiation = [s, table](gvf::StateIndex i) { return s->initiation(at(*table, i)); };
    return out;
}

gvf::ForecastDef bind_forecast(const Registry& registry, int forecast_id, const world::PoseMdp& env,
                               const SnapshotTable& snapshots, const PolicyMap& policies,
                               std::optional<gvf::TerminationMode> mode) {
    const ForecastSpec& spec = registry.forecast(forecast_id);
    gvf::ForecastDef out;
    out.id = spec.id;
    out.name = spec.abbrev;
    out.kind = spec.kind;
    out.option = bind_option(registry, spec.option, env, snapshots, policies, mode);
    auto outcome = std::make_shared<gvf::OutcomeDef>();
    const SnapshotTable* table = &snapshots;
    const ForecastSpec* f = &spec;
    outcome->cumulant = [f, table](gvf::StateIndex s, gvf::ActionIndex a) {
        return f->cumulant(at(*table, s), static_cast<Action>(a));
    };
    outcome->terminal = [f, table](gvf::StateIndex s) { return f->terminal(at(*table, s)); };
    out.outcome = std::move(outcome);
    return out;
}

gvf::OptionObjective bind_objective(const Registry& registry, int option_id, const world::PoseMdp& env,
                                    const SnapshotTable& snapshots, std::optional<gvf::TerminationMode> mode) {
    check_table(snapshots, env);
    const OptionSpec& spec = registry.option(option_id);
    if (spec.policy != PolicyKind::maximize)
        throw ArgumentError("option " + spec.abbrev + " does not maximize an objective");
    gvf::OptionObjective out;
    const SnapshotTable* table = &snapshots;
    const OptionSpec* s = &spec;
    const Registry* r = &registry;
    out.outcome.cumulant = [s, table](gvf::StateIndex i, gvf::ActionIndex a) {
        return s->objective_cumulant(at(*table, i), static_cast<Action>(a));
    };
    out.outcome.terminal = [s, table](gvf::StateIndex i) { return s->objective_terminal(at(*table, i)); };
    out.termination = [r, s, table](gvf::StateIndex i) { return option_termination(*r, *s, at(*table, i)); };
    if (!spec.admissible.empty()) {
        std::array<bool, world::action_count> allowed{};
        for (Action a : spec.admissible) allowed[static_cast<std::size_t>(a)] = true;
        out.admissible = [allowed](gvf::StateIndex, gvf::ActionIndex a) { return allowed[a]; };
    }
    if (spec.initiation) out.initiation = [s, table](gvf::StateIndex i) { return s->initiation(at(*table, i)); };
    out.mode = mode.value_or(spec.mode);
    out.penalty = registry.config().number_or("penalty", gvf::default_penalty);
    return out;
}

Oracle::Oracle(const Registry& registry, const world::PoseMdp& env, double tol)
    : registry_(&registry), env_(&env), tol_(tol) {
    if (!(tol > 0.0)) throw ArgumentError("oracle tolerance must be positive");
    snapshots_.states.resize(env.size());
    for (std::size_t s = 0; s < env.size(); ++s) {
        snapshots_.states[s] = registry.empty_snapshot();
        snapshots_.states[s].touch = env.touch[s] != 0;
    }
}

void Oracle::solve_through(int layer) {
    if (layer <= solved_layer_) return;
    const auto& order = registry_->order();
    // Entries are processed in introduction order; an entry above `layer`
    // waits, and everything after it that fits is still handled.
    std::set<std::size_t> skipped;
    for (std::size_t i = cursor_; i < order.size(); ++i) {
        const Ref ref = order[i];
        if (tables_.count(ref.id) && ref.kind == RefKind::forecast) continue;
        if (registry_->layer_of(ref) > layer) {
            skipped.insert(i);
            continue;
        }
        switch (ref.kind) {
            case RefKind::forecast: {
                if (tables_.count(ref.id)) break;
                const auto def = bind_forecast(*registry_, ref.id, *env_, snapshots_, policies_);
                auto table = gvf::solve_forecast_dp(env_->mdp, def, tol_);
                for (std::size_t s = 0; s < env_->size(); ++s)
                    snapshots_.states[s].forecast[static_cast<std::size_t>(ref.id)] = table.values[s];
                tables_.emplace(ref.id, std::move(table));
                break;
            }
            case RefKind::option: {
                if (registry_->option(ref.id).policy != PolicyKind::maximize || learned_.count(ref.id)) break;
                const auto objective = bind_objective(*registry_, ref.id, *env_, snapshots_);
                auto learned = gvf::learn_option_policy_dp(env_->mdp, objective);
                policies_[ref.id] = learned.policy;
                learned_.emplace(ref.id, std::move(learned));
                break;
            }
            case RefKind::alias: {
                const AliasSpec& spec = registry_->alias(ref.id);
                for (auto& snap : snapshots_.states) snap.alias[static_cast<std::size_t>(ref.id)] = spec.expression(snap);
                break;
            }
        }
    }
    cursor_ = skipped.empty() ? order.size() : *skipped.begin();
    solved_layer_ = layer;
}

const gvf::ValueTable& Oracle::table(int forecast_id) const {
    auto it = tables_.find(forecast_id);
    if (it == tables_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " has not been solved");
    return it->second;
}

const gvf::Policy& Oracle::policy(int option_id) const {
    auto it = policies_.find(option_id);
    if (it == policies_.end()) throw ArgumentError("option " + std::to_string(option_id) + " has not been solved");
    return it->second;
}

const gvf::LearnedOption& Oracle::learned(int option_id) const {
    auto it = learned_.find(option_id);
    if (it == learned_.end()) throw ArgumentError("option " + std::to_string(option_id) + " has not been solved");
    return it->second;
}

}  // namespace forecast_forge::curriculum
