#include <algorithm>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/gvf_core.hpp"

namespace forecast_forge::gvf {

double td_target(const Transition& t, double next_estimate) {
    const double w = t.termination;
    if (t.mode == TerminationMode::pre_step) {
        if (w >= 1.0) return t.terminal;
        return w * t.terminal + (1.0 - w) * (t.cumulant + next_estimate);
    }
    if (t.mode == TerminationMode::one_step || w >= 1.0) return t.cumulant + t.terminal;
    return t.cumulant + w * t.terminal + (1.0 - w) * next_estimate;
}

TdLearner::TdLearner(int forecast_id, features::Approximator& backend, AlphaSchedule schedule, Gating gating)
    : forecast_id_(forecast_id), backend_(&backend), schedule_(schedule), gating_(gating) {
    if (!(schedule.alpha > 0.0)) throw ArgumentError("step size must be positive");
    if (schedule.visit_decay && !(schedule.decay_scale > 0.0)) throw ArgumentError("decay scale must be positive");
    if (!backend.registered(forecast_id))
        throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered with the backend");
}

double TdLearner::step_size(const features::StateRef& state) {
    if (!schedule_.visit_decay) return schedule_.alpha;
    std::uint32_t visits;
    if (state.slot != features::no_slot) {
        if (state.slot >= dense_visits_.size()) dense_visits_.resize(state.slot + 1, 0);
        visits = ++dense_visits_[state.slot];
    } else {
        visits = ++sparse_visits_[state.key];
    }
    return std::max(schedule_.alpha, std::min(1.0, schedule_.decay_scale / static_cast<double>(visits)));
}

TdStep TdLearner::step(const Transition& t, std::optional<double> behavior_probability,
                       std::optional<double> next_estimate) {
    if (!(t.termination >= 0.0 && t.termination <= 1.0)) throw ArgumentError("termination weight outside [0, 1]");
    double weight = 1.0;
    if (gating_ == Gating::importance_ratio) {
        if (!behavior_probability || !(*behavior_probability > 0.0))
            throw ArgumentError("importance-ratio gating needs a positive behavior probability");
        weight = t.target_probability / *behavior_probability;
    }

    const bool terminated = t.mode == TerminationMode::one_step || t.termination >= 1.0;
    double bootstrap = 0.0;
    if (!terminated) bootstrap = next_estimate ? *next_estimate : backend_->predict(forecast_id_, t.next);
    TdStep out;
    out.target = td_target(t, bootstrap);
    out.error = out.target - backend_->predict(forecast_id_, t.state);
    out.terminated = terminated;
    if (t.target_probability <= 0.0) return out;

    backend_->apply_update(forecast_id_, t.state, out.error, step_size(t.state), weight);
    out.applied = true;
    ++applied_;
    return out;
}

TdStep td_step(TdLearner& learner, const Transition& transition, std::optional<double> behavior_probability) {
    return learner.step(transition, behavior_probability);
}

}  // namespace forecast_forge::gvf
