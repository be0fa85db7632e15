#include <algorithm>
#include <cmath>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/gvf_core.hpp"

namespace forecast_forge::gvf {

namespace {

struct Model {
    std::size_t n = 0;
    std::size_t actions = 0;
    TerminationMode mode = TerminationMode::post_step;
    std::vector<double> beta, z, cumulant;  // cumulant: state * actions + action
    std::vector<char> admissible;
    std::vector<char> initiable;
};

Model build_model(const FiniteMdp& mdp, const OptionObjective& objective) {
    if (!objective.termination || !objective.outcome.cumulant || !objective.outcome.terminal)
        throw ConfigurationError("option objective is incomplete");
    Model m;
    m.n = mdp.state_count();
    m.actions = mdp.action_count();
    m.mode = objective.mode;
    m.beta.resize(m.n);
    m.z.resize(m.n);
    m.cumulant.resize(m.n * m.actions);
    m.admissible.resize(m.n * m.actions);
    m.initiable.resize(m.n);
    std::vector<StateIndex> dead;
    for (StateIndex s = 0; s < m.n; ++s) {
        const double b = objective.termination(s);
        if (!(b >= 0.0 && b <= 1.0))
            throw ConfigurationError("objective termination is " + std::to_string(b) + " at state " + std::to_string(s));
        m.beta[s] = b;
        m.z[s] = objective.outcome.terminal(s);
        m.initiable[s] = !objective.initiation || objective.initiation(s);
        bool any = false;
        for (ActionIndex a = 0; a < m.actions; ++a) {
            const bool ok = !objective.admissible || objective.admissible(s, a);
            m.admissible[s * m.actions + a] = ok;
            m.cumulant[s * m.actions + a] = ok ? objective.outcome.cumulant(s, a) : objective.penalty;
            any = any || ok;
        }
        if (!any && m.initiable[s]) dead.push_back(s);
    }
    if (!dead.empty())
        throw DeadState("no admissible action at " + std::to_string(dead.size()) + " initiable state(s), first " +
                            std::to_string(dead.front()),
                        dead);
    return m;
}

// Value of arriving at s' (the part of a backup after the cumulant).
double arrival(const Model& m, StateIndex s2, std::span<const double> v) {
    if (m.mode == TerminationMode::one_step) return m.z[s2];
    const double b = m.beta[s2];
    if (b >= 1.0) return m.z[s2];
    return b * m.z[s2] + (1.0 - b) * v[s2];
}

double q_value(const FiniteMdp& mdp, const Model& m, StateIndex s, ActionIndex a, std::span<const double> v) {
    double next = 0.0;
    for (const auto& succ : mdp.successors(s, a)) next += succ.probability * arrival(m, succ.state, v);
    return m.cumulant[s * m.actions + a] + next;
}

// v holds max-Q / policy-Q values; arrival() folds in termination at s'.
// Under post-step semantics a certain-termination state is worth z.
double state_value(const Model& m, StateIndex s, double q) {
    if (m.mode == TerminationMode::post_step && m.beta[s] >= 1.0) return m.z[s];
    return q;
}

Policy greedy_policy(const Model& m, std::span<const double> q) {
    std::vector<ActionIndex> actions(m.n);
    for (StateIndex s = 0; s < m.n; ++s) actions[s] = greedy_action(q.subspan(s * m.actions, m.actions));
    return Policy::deterministic(actions, m.actions);
}

}  // namespace

ActionIndex greedy_action(std::span<const double> q_row, double tie_tolerance) {
    if (q_row.empty()) throw ArgumentError("greedy_action on an empty row");
    const double best = *std::max_element(q_row.begin(), q_row.end());
    const double slack = tie_tolerance * std::max(1.0, std::abs(best));
    for (ActionIndex a = 0; a < q_row.size(); ++a)
        if (q_row[a] >= best - slack) return a;
    return 0;
}

LearnedOption learn_option_policy_dp(const FiniteMdp& mdp, const OptionObjective& objective, double tol,
                                     int max_iterations) {
    const Model m = build_model(mdp, objective);
    std::vector<ActionIndex> policy(m.n, 0);
    for (StateIndex s = 0; s < m.n; ++s) {
        for (ActionIndex a = 0; a < m.actions; ++a) {
            if (m.admissible[s * m.actions + a]) {
                policy[s] = a;
                break;
            }
        }
    }

    std::vector<double> v(m.n, 0.0), next(m.n, 0.0), q(m.n * m.actions, 0.0);
    constexpr int eval_sweeps = 1'000'000;
    for (int iteration = 0; iteration < max_iterations; ++iteration) {
        // Policy evaluation. v[s] is the value of acting from s under the
        // current policy; termination at s' is applied inside arrival().
        bool converged = false;
        for (int sweep = 0; sweep < eval_sweeps; ++sweep) {
            double delta = 0.0;
            for (StateIndex s = 0; s < m.n; ++s) {
                next[s] = q_value(mdp, m, s, policy[s], v);
                delta = std::max(delta, std::abs(next[s] - v[s]));
            }
            v.swap(next);
            if (delta <= tol) {
                converged = true;
                break;
            }
        }
        if (!converged) throw DivergentForecast("policy evaluation did not converge", {});

        bool stable = true;
        for (StateIndex s = 0; s < m.n; ++s) {
            for (ActionIndex a = 0; a < m.actions; ++a) q[s * m.actions + a] = q_value(mdp, m, s, a, v);
            auto row = std::span<const double>(q).subspan(s * m.actions, m.actions);
            const double best = *std::max_element(row.begin(), row.end());
            const double slack = 1e-9 * std::max(1.0, std::abs(best));
            if (row[policy[s]] < best - slack) {
                policy[s] = greedy_action(row);
                stable = false;
            }
        }
        if (stable) {
            LearnedOption out;
            out.policy = greedy_policy(m, q);
            out.q = std::move(q);
            out.values.resize(m.n);
            for (StateIndex s = 0; s < m.n; ++s) {
                const double best = out.q[s * m.actions + out.policy.mode(s)];
                out.values[s] = m.mode == TerminationMode::pre_step
                                    ? m.beta[s] * m.z[s] + (1.0 - m.beta[s]) * best
                                    : state_value(m, s, best);
            }
            return out;
        }
    }
    throw DivergentForecast("policy iteration did not stabilize within " + std::to_string(max_iterations) +
                                " iterations",
                            {});
}

LearnedOption learn_option_policy_q(const FiniteMdp& mdp, const OptionObjective& objective,
                                    const QSchedule& schedule, RngStream& rng) {
    if (schedule.episodes == 0) throw ArgumentError("Q-learning needs at least one episode");
    if (!(schedule.step_size > 0.0 && schedule.step_size <= 1.0))
        throw ArgumentError("Q-learning step size must lie in (0, 1]");
    const Model m = build_model(mdp, objective);
    std::vector<StateIndex> starts;
    for (StateIndex s = 0; s < m.n; ++s)
        if (m.initiable[s]) starts.push_back(s);
    if (starts.empty()) throw NotInitiable("option objective has no initiable state");

    std::vector<double> q(m.n * m.actions, 0.0);
    for (std::size_t i = 0; i < q.size(); ++i)
        if (!m.admissible[i]) q[i] = objective.penalty;

    auto max_q = [&](StateIndex s) {
        return *std::max_element(q.begin() + static_cast<std::ptrdiff_t>(s * m.actions),
                                 q.begin() + static_cast<std::ptrdiff_t>((s + 1) * m.actions));
    };
    auto draw_next = [&](StateIndex s, ActionIndex a) {
        auto row = mdp.successors(s, a);
        if (row.size() == 1) return row.front().state;
        double u = rng.uniform();
        for (const auto& succ : row) {
            if (u < succ.probability) return succ.state;
            u -= succ.probability;
        }
        return row.back().state;
    };

    const double span = schedule.episodes > 1 ? static_cast<double>(schedule.episodes - 1) : 1.0;
    for (std::size_t episode = 0; episode < schedule.episodes; ++episode) {
        const double frac = static_cast<double>(episode) / span;
        const double epsilon = schedule.epsilon_start + (schedule.epsilon_end - schedule.epsilon_start) * frac;
        StateIndex s = starts[rng.below(starts.size())];
        for (std::size_t t = 0; t < schedule.max_episode_steps; ++t) {
            ActionIndex a;
            if (rng.uniform() < epsilon) {
                a = static_cast<ActionIndex>(rng.below(m.actions));
            } else {
                a = greedy_action(std::span<const double>(q).subspan(s * m.actions, m.actions));
            }
            const StateIndex s2 = draw_next(s, a);
            double target = m.cumulant[s * m.actions + a];
            if (m.mode == TerminationMode::one_step) {
                target += m.z[s2];
            } else {
                const double b = m.beta[s2];
                target += b * m.z[s2] + (b < 1.0 ? (1.0 - b) * max_q(s2) : 0.0);
            }
            double& cell = q[s * m.actions + a];
            cell += schedule.step_size * (target - cell);
            if (m.mode == TerminationMode::one_step || rng.bernoulli(m.beta[s2])) break;
            s = s2;
        }
    }

    LearnedOption out;
    out.policy = greedy_policy(m, q);
    out.values.resize(m.n);
    for (StateIndex s = 0; s < m.n; ++s) {
        const double best = q[s * m.actions + out.policy.mode(s)];
        out.values[s] = m.mode == TerminationMode::pre_step ? m.beta[s] * m.z[s] + (1.0 - m.beta[s]) * best
                                                            : state_value(m, s, best);
    }
    out.q = std::move(q);
    return out;
}

}  // namespace forecast_forge::gvf
