#include <cmath>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/gvf_core.hpp"

namespace forecast_forge {

std::string_view to_string(ValueKind kind) {
    switch (kind) {
        case ValueKind::probability: return "probability";
        case ValueKind::count: return "count";
        case ValueKind::raw: return "raw";
    }
    return "raw";
}

ValueKind parse_value_kind(std::string_view text) {
    if (text == "probability") return ValueKind::probability;
    if (text == "count") return ValueKind::count;
    if (text == "raw") return ValueKind::raw;
    throw ArgumentError("unknown value kind '" + std::string(text) + "'");
}

}  // namespace forecast_forge

namespace forecast_forge::gvf {

FiniteMdp::FiniteMdp(std::size_t state_count, std::size_t action_count)
    : states_(state_count), actions_(action_count), rows_(state_count * action_count) {
    if (action_count == 0) throw ArgumentError("FiniteMdp needs at least one action");
}

void FiniteMdp::set_transition(StateIndex s, ActionIndex a, std::vector<Successor> distribution) {
    if (s >= states_ || a >= actions_) throw ArgumentError("transition index out of range");
    rows_[s * actions_ + a] = std::move(distribution);
}

void FiniteMdp::set_deterministic(StateIndex s, ActionIndex a, StateIndex next) {
    set_transition(s, a, {{next, 1.0}});
}

std::span<const Successor> FiniteMdp::successors(StateIndex s, ActionIndex a) const {
    return rows_[s * actions_ + a];
}

void FiniteMdp::validate() const {
    for (StateIndex s = 0; s < states_; ++s) {
        for (ActionIndex a = 0; a < actions_; ++a) {
            double total = 0.0;
            for (const auto& succ : successors(s, a)) {
                if (succ.state >= states_)
                    throw ConfigurationError("transition from state " + std::to_string(s) +
                                             " leads outside the state set");
                if (succ.probability < 0.0)
                    throw ConfigurationError("negative transition probability at state " + std::to_string(s));
                total += succ.probability;
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw ConfigurationError("transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                                         ") sums to " + std::to_string(total));
        }
    }
}

Policy Policy::deterministic(std::span<const ActionIndex> actions, std::size_t action_count) {
    Policy p;
    p.states_ = actions.size();
    p.actions_ = action_count;
    p.probs_.assign(p.states_ * action_count, 0.0);
    for (std::size_t s = 0; s < actions.size(); ++s) {
        if (actions[s] >= action_count) throw ArgumentError("policy action out of range");
        p.probs_[s * action_count + actions[s]] = 1.0;
    }
    return p;
}

Policy Policy::constant(std::size_t state_count, std::size_t action_count, ActionIndex action) {
    std::vector<ActionIndex> actions(state_count, action);
    return deterministic(actions, action_count);
}

Policy Policy::uniform(std::size_t state_count, std::size_t action_count) {
    Policy p;
    p.states_ = state_count;
    p.actions_ = action_count;
    p.probs_.assign(state_count * action_count, 1.0 / static_cast<double>(action_count));
    return p;
}

Policy Policy::from_table(std::size_t state_count, std::size_t action_count, std::vector<double> probs) {
    if (probs.size() != state_count * action_count) throw ArgumentError("policy table has the wrong size");
    Policy p;
    p.states_ = state_count;
    p.actions_ = action_count;
    p.probs_ = std::move(probs);
    return p;
}

ActionIndex Policy::sample(StateIndex s, RngStream& rng) const {
    return rng.pick(distribution(s));
}

ActionIndex Policy::mode(StateIndex s) const {
    auto row = distribution(s);
    ActionIndex best = 0;
    for (ActionIndex a = 1; a < row.size(); ++a)
        if (row[a] > row[best]) best = a;
    return best;
}

bool Policy::is_deterministic() const {
    for (double p : probs_)
        if (p != 0.0 && p != 1.0) return false;
    return true;
}

std::string_view to_string(TerminationMode mode) {
    switch (mode) {
        case TerminationMode::pre_step: return "pre_step";
        case TerminationMode::post_step: return "post_step";
        case TerminationMode::one_step: return "one_step";
    }
    return "post_step";
}

TerminationMode parse_termination_mode(std::string_view text) {
    if (text == "pre_step" || text == "pre") return TerminationMode::pre_step;
    if (text == "post_step" || text == "post") return TerminationMode::post_step;
    if (text == "one_step" || text == "one") return TerminationMode::one_step;
    throw ArgumentError("unknown termination mode '" + std::string(text) + "'");
}

std::string_view to_string(Gating gating) {
    return gating == Gating::match_support ? "match_support" : "importance_ratio";
}

bool sample_termination(const OptionDef& option, StateIndex state, RngStream& rng) {
    return rng.bernoulli(option.termination(state));
}

}  // namespace forecast_forge::gvf
