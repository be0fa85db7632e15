#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forecast_forge/rng.hpp"
#include "forecast_forge/state_features.hpp"
#include "forecast_forge/value_kind.hpp"

namespace forecast_forge::gvf {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;

/// Stand-in for an infinitely negative cumulant on masked actions.
inline constexpr double default_penalty = -1.0e6;

struct Successor {
    StateIndex state;
    double probability;
};

class FiniteMdp {
public:
    FiniteMdp(std::size_t state_count, std::size_t action_count);

    std::size_t state_count() const noexcept { return states_; }
    std::size_t action_count() const noexcept { return actions_; }

    void set_transition(StateIndex s, ActionIndex a, std::vector<Successor> distribution);
    void set_deterministic(StateIndex s, ActionIndex a, StateIndex next);
    std::span<const Successor> successors(StateIndex s, ActionIndex a) const;

    /// Throws ConfigurationError unless every row is a distribution over
    /// valid states.
    void validate() const;

private:
    std::size_t states_;
    std::size_t actions_;
    std::vector<std::vector<Successor>> rows_;
};

/// Action distribution per state, stored densely.
class Policy {
public:
    Policy() = default;
    static Policy deterministic(std::span<const ActionIndex> actions, std::size_t action_count);
    static Policy constant(std::size_t state_count, std::size_t action_count, ActionIndex action);
    static Policy uniform(std::size_t state_count, std::size_t action_count);
    static Policy from_table(std::size_t state_count, std::size_t action_count, std::vector<double> probs);

    std::size_t state_count() const noexcept { return states_; }
    std::size_t action_count() const noexcept { return actions_; }
    double probability(StateIndex s, ActionIndex a) const { return probs_[s * actions_ + a]; }
    std::span<const double> distribution(StateIndex s) const {
        return {probs_.data() + s * actions_, actions_};
    }
    ActionIndex sample(StateIndex s, RngStream& rng) const;
    /// Most probable action, lowest index first.
    ActionIndex mode(StateIndex s) const;
    bool is_deterministic() const;

private:
    std::size_t states_ = 0;
    std::size_t actions_ = 0;
    std::vector<double> probs_;
};

enum class TerminationMode { pre_step, post_step, one_step };

std::string_view to_string(TerminationMode mode);
TerminationMode parse_termination_mode(std::string_view text);

struct OptionDef {
    std::string name;
    Policy policy;
    std::function<bool(StateIndex)> initiation;  // empty: every state
    std::function<double(StateIndex)> termination;
    TerminationMode mode = TerminationMode::post_step;

    bool initiable(StateIndex s) const { return !initiation || initiation(s); }
};

struct OutcomeDef {
    std::function<double(StateIndex, ActionIndex)> cumulant;
    std::function<double(StateIndex)> terminal;
};

struct ForecastDef {
    int id = 0;
    std::string name;
    std::shared_ptr<const OptionDef> option;
    std::shared_ptr<const OutcomeDef> outcome;
    ValueKind kind = ValueKind::raw;
};

struct ValueTable {
    int forecast_id = 0;
    std::vector<double> values;
    double residual = 0.0;
    TerminationMode mode = TerminationMode::post_step;
};

/// Fixed-point evaluation of the forecast's expected outcome. Throws
/// DivergentForecast when some closed class never terminates but keeps
/// accumulating cumulant, or when max_sweeps is exhausted.
ValueTable solve_forecast_dp(const FiniteMdp& mdp, const ForecastDef& forecast, double tol = 1e-10,
                             int max_sweeps = 100000, bool strict_beta = false);

/// Max over states of |T f - f| for the forecast's evaluation operator.
double bellman_residual(const FiniteMdp& mdp, const ForecastDef& forecast, std::span<const double> values);

/// Truncated absorbing-chain series sum_{k=0}^{K} P^k r; pre-step mode only.
ValueTable evaluate_forecast_series(const FiniteMdp& mdp, const ForecastDef& forecast, int last_term);

/// One sampled outcome from `start`.
double mc_return(const FiniteMdp& mdp, StateIndex start, const ForecastDef& forecast, RngStream& rng,
                 std::size_t step_cap = 1'000'000);

bool sample_termination(const OptionDef& option, StateIndex state, RngStream& rng);

// ---------------------------------------------------------------------------
// Option learning

struct OptionObjective {
    OutcomeDef outcome;
    std::function<double(StateIndex)> termination;
    std::function<bool(StateIndex, ActionIndex)> admissible;  // empty: all
    std::function<bool(StateIndex)> initiation;               // empty: all
    TerminationMode mode = TerminationMode::post_step;
    double penalty = default_penalty;
};

struct LearnedOption {
    Policy policy;
    std::vector<double> q;       // state * actions + action
    std::vector<double> values;  // state value under the greedy policy
};

/// Lowest-index action whose value is within tie_tolerance of the max.
ActionIndex greedy_action(std::span<const double> q_row, double tie_tolerance = 1e-9);

/// Policy iteration on the known model.
LearnedOption learn_option_policy_dp(const FiniteMdp& mdp, const OptionObjective& objective,
                                     double tol = 1e-12, int max_iterations = 1000);

struct QSchedule {
    std::size_t episodes = 50000;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double step_size = 1.0;
    std::size_t max_episode_steps = 1000;
};

/// Tabular Q-learning with epsilon-greedy exploration from uniformly drawn
/// initiable start states.
LearnedOption learn_option_policy_q(const FiniteMdp& mdp, const OptionObjective& objective,
                                    const QSchedule& schedule, RngStream& rng);

// ---------------------------------------------------------------------------
// Temporal-difference learning

enum class Gating { match_support, importance_ratio };

std::string_view to_string(Gating gating);

/// Step size; with visit_decay the n-th update of a state uses
/// max(alpha, min(1, decay_scale / n)). decay_scale 1 is plain 1/n.
struct AlphaSchedule {
    double alpha = 0.1;
    bool visit_decay = false;
    double decay_scale = 1.0;
};

/// One observed step, already reduced to the quantities the target needs.
/// `termination` is the probability that the option ends on this step
/// (0 or 1 when sampled, fractional for an expected target). For pre-step
/// targets `terminal` is z at the current state, otherwise at the next.
struct Transition {
    features::StateRef state;
    features::StateRef next;
    ActionIndex action = 0;
    double cumulant = 0.0;
    double termination = 0.0;
    double terminal = 0.0;
    TerminationMode mode = TerminationMode::post_step;
    double target_probability = 1.0;  // pi(action | state) of the option
};

struct TdStep {
    double target = 0.0;
    double error = 0.0;
    bool terminated = false;
    bool applied = false;
};

double td_target(const Transition& transition, double next_estimate);

class TdLearner {
public:
    TdLearner(int forecast_id, features::Approximator& backend, AlphaSchedule schedule, Gating gating);

    int forecast_id() const noexcept { return forecast_id_; }
    Gating gating() const noexcept { return gating_; }
    const AlphaSchedule& schedule() const noexcept { return schedule_; }
    features::Approximator& backend() const noexcept { return *backend_; }
    std::uint64_t applied_updates() const noexcept { return applied_; }

    /// behavior_probability is required under importance-ratio gating.
    /// `next_estimate`, when given, replaces a fresh prediction at the next
    /// state (so callers can bootstrap from a pre-step snapshot).
    TdStep step(const Transition& transition, std::optional<double> behavior_probability,
                std::optional<double> next_estimate = std::nullopt);

private:
    double step_size(const features::StateRef& state);

    int forecast_id_;
    features::Approximator* backend_;
    AlphaSchedule schedule_;
    Gating gating_;
    std::uint64_t applied_ = 0;
    std::vector<std::uint32_t> dense_visits_;
    std::unordered_map<std::uint64_t, std::uint32_t> sparse_visits_;
};

TdStep td_step(TdLearner& learner, const Transition& transition,
               std::optional<double> behavior_probability = std::nullopt);

}  // namespace forecast_forge::gvf
