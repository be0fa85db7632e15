#include <algorithm>
#include <cmath>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/gvf_core.hpp"

namespace forecast_forge::gvf {

namespace {

// Forecast reduced to arrays: per-state termination, terminal value,
// policy-averaged cumulant and policy-averaged successor weights.
struct Compiled {
    TerminationMode mode;
    std::vector<double> beta;
    std::vector<double> z;
    std::vector<double> cumulant;
    std::vector<std::size_t> row_start;
    std::vector<Successor> flow;
    std::vector<bool> defined;

    std::span<const Successor> row(StateIndex s) const {
        return {flow.data() + row_start[s], row_start[s + 1] - row_start[s]};
    }
};

Compiled compile(const FiniteMdp& mdp, const ForecastDef& forecast, bool strict_beta) {
    if (!forecast.option || !forecast.outcome) throw ConfigurationError("forecast '" + forecast.name + "' is incomplete");
    const OptionDef& option = *forecast.option;
    const OutcomeDef& outcome = *forecast.outcome;
    const std::size_t n = mdp.state_count();
    const std::size_t actions = mdp.action_count();
    if (option.policy.state_count() != n || option.policy.action_count() != actions)
        throw ConfigurationError("policy of option '" + option.name + "' does not match the MDP");
    if (!option.termination || !outcome.cumulant || !outcome.terminal)
        throw ConfigurationError("forecast '" + forecast.name + "' is missing a function");

    Compiled c;
    c.mode = option.mode;
    c.beta.resize(n);
    c.z.resize(n);
    c.cumulant.assign(n, 0.0);
    c.defined.assign(n, false);
    c.row_start.assign(n + 1, 0);
    std::vector<double> merged(n, 0.0);
    std::vector<StateIndex> touched;

    for (StateIndex s = 0; s < n; ++s) {
        const double b = option.termination(s);
        if (!(b >= 0.0 && b <= 1.0))
            throw ConfigurationError("termination of option '" + option.name + "' is " + std::to_string(b) +
                                     " at state " + std::to_string(s));
        if (strict_beta && b <= 0.0)
            throw ConfigurationError("termination of option '" + option.name + "' is zero at state " +
                                     std::to_string(s) + " under strict mode");
        c.beta[s] = b;
        c.z[s] = outcome.terminal(s);
    }

    for (StateIndex s = 0; s < n; ++s) {
        c.row_start[s] = c.flow.size();
        auto dist = option.policy.distribution(s);
        double total = 0.0;
        for (double p : dist) {
            if (p < 0.0) throw ConfigurationError("negative policy probability in option '" + option.name + "'");
            total += p;
        }
        c.defined[s] = std::abs(total - 1.0) <= 1e-9;
        const bool needed = c.mode == TerminationMode::one_step || c.beta[s] < 1.0;
        if (!c.defined[s]) {
            if (needed)
                throw ConfigurationError("policy row of option '" + option.name + "' at state " +
                                         std::to_string(s) + " sums to " + std::to_string(total) + " in " +
                                         std::string(to_string(c.mode)) + " mode");
            continue;
        }
        if (c.mode == TerminationMode::post_step && c.beta[s] >= 1.0) continue;
        for (ActionIndex a = 0; a < actions; ++a) {
            const double p = dist[a];
            if (p == 0.0) continue;
            c.cumulant[s] += p * outcome.cumulant(s, a);
            for (const auto& succ : mdp.successors(s, a)) {
                if (merged[succ.state] == 0.0) touched.push_back(succ.state);
                merged[succ.state] += p * succ.probability;
            }
        }
        std::sort(touched.begin(), touched.end());
        for (StateIndex t : touched) {
            c.flow.push_back({t, merged[t]});
            merged[t] = 0.0;
        }
        touched.clear();
    }
    c.row_start[n] = c.flow.size();
    return c;
}

double backup(const Compiled& c, StateIndex s, std::span<const double> f) {
    const double b = c.beta[s];
    switch (c.mode) {
        case TerminationMode::pre_step: {
            if (b >= 1.0) return c.z[s];
            double next = 0.0;
            for (const auto& succ : c.row(s)) next += succ.probability * f[succ.state];
            return b * c.z[s] + (1.0 - b) * (c.cumulant[s] + next);
        }
        case TerminationMode::post_step: {
            if (b >= 1.0) return c.z[s];
            double next = 0.0;
            for (const auto& succ : c.row(s)) {
                const double b2 = c.beta[succ.state];
                next += succ.probability * (b2 * c.z[succ.state] + (1.0 - b2) * f[succ.state]);
            }
            return c.cumulant[s] + next;
        }
        case TerminationMode::one_step: {
            double next = 0.0;
            for (const auto& succ : c.row(s)) next += succ.probability * c.z[succ.state];
            return c.cumulant[s] + next;
        }
    }
    return 0.0;
}

// States that can never terminate: beta == 0 and every successor again
// such a state. Returns the recurrent classes inside that set that carry a
// nonzero cumulant.
std::vector<StateIndex> divergent_states(const Compiled& c) {
    if (c.mode == TerminationMode::one_step) return {};
    const std::size_t n = c.beta.size();
    std::vector<char> inside(n, 0);
    for (StateIndex s = 0; s < n; ++s) inside[s] = c.beta[s] == 0.0 && c.defined[s];
    bool changed = true;
    while (changed) {
        changed = false;
        for (StateIndex s = 0; s < n; ++s) {
            if (!inside[s]) continue;
            for (const auto& succ : c.row(s)) {
                if (!inside[succ.state]) {
                    inside[s] = 0;
                    changed = true;
                    break;
                }
            }
        }
    }

    // Tarjan's algorithm, iterative, on the never-terminating subgraph.
    std::vector<long> index(n, -1), low(n, 0), component(n, -1);
    std::vector<char> on_stack(n, 0);
    std::vector<StateIndex> stack;
    std::vector<std::pair<StateIndex, std::size_t>> call;
    long counter = 0, components = 0;
    for (StateIndex root = 0; root < n; ++root) {
        if (!inside[root] || index[root] >= 0) continue;
        call.push_back({root, 0});
        while (!call.empty()) {
            auto& [v, edge] = call.back();
            if (edge == 0) {
                index[v] = low[v] = counter++;
                stack.push_back(v);
                on_stack[v] = 1;
            }
            auto row = c.row(v);
            bool descended = false;
            while (edge < row.size()) {
                const StateIndex w = row[edge].state;
                ++edge;
                if (index[w] < 0) {
                    call.push_back({w, 0});
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            if (low[v] == index[v]) {
                StateIndex w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    component[w] = components;
                } while (w != v);
                ++components;
            }
            const StateIndex finished = v;
            call.pop_back();
            if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[finished]);
        }
    }

    // A component is closed if no edge leaves it; closed components are
    // visited forever once entered.
    std::vector<char> closed(static_cast<std::size_t>(components), 1);
    std::vector<char> active(static_cast<std::size_t>(components), 0);
    for (StateIndex s = 0; s < n; ++s) {
        if (!inside[s]) continue;
        for (const auto& succ : c.row(s))
            if (component[succ.state] != component[s]) closed[component[s]] = 0;
        if (c.cumulant[s] != 0.0) active[component[s]] = 1;
    }
    std::vector<StateIndex> out;
    for (StateIndex s = 0; s < n; ++s)
        if (inside[s] && closed[component[s]] && active[component[s]]) out.push_back(s);
    return out;
}

std::string state_list(const std::vector<StateIndex>& states) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(states.size(), 12);
    for (std::size_t i = 0; i < shown; ++i) out += (i ? " " : "") + std::to_string(states[i]);
    if (states.size() > shown) out += " ...";
    return out;
}

}  // namespace

ValueTable solve_forecast_dp(const FiniteMdp& mdp, const ForecastDef& forecast, double tol, int max_sweeps,
                             bool strict_beta) {
    if (!(tol > 0.0)) throw ArgumentError("tolerance must be positive");
    const Compiled c = compile(mdp, forecast, strict_beta);
    const auto cycle = divergent_states(c);
    if (!cycle.empty())
        throw DivergentForecast("forecast '" + forecast.name +
                                    "' diverges: never-terminating states with nonzero cumulant: " +
                                    state_list(cycle),
                                cycle);

    const std::size_t n = mdp.state_count();
    std::vector<double> f(n, 0.0), g(n, 0.0);
    double delta = 0.0;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        delta = 0.0;
        for (StateIndex s = 0; s < n; ++s) {
            g[s] = backup(c, s, f);
            delta = std::max(delta, std::abs(g[s] - f[s]));
        }
        f.swap(g);
        if (delta <= tol) {
            double residual = 0.0;
            for (StateIndex s = 0; s < n; ++s) residual = std::max(residual, std::abs(backup(c, s, f) - f[s]));
            return {forecast.id, std::move(f), residual, c.mode};
        }
    }
    std::vector<StateIndex> unsettled;
    for (StateIndex s = 0; s < n; ++s)
        if (std::abs(backup(c, s, f) - f[s]) > tol) unsettled.push_back(s);
    throw DivergentForecast("forecast '" + forecast.name + "' did not converge within " + std::to_string(max_sweeps) +
                                " sweeps (last change " + std::to_string(delta) + "); unsettled states: " +
                                state_list(unsettled),
                            unsettled);
}

double bellman_residual(const FiniteMdp& mdp, const ForecastDef& forecast, std::span<const double> values) {
    if (values.size() != mdp.state_count()) throw ArgumentError("value vector has the wrong size");
    const Compiled c = compile(mdp, forecast, false);
    double residual = 0.0;
    for (StateIndex s = 0; s < values.size(); ++s)
        residual = std::max(residual, std::abs(backup(c, s, values) - values[s]));
    return residual;
}

ValueTable evaluate_forecast_series(const FiniteMdp& mdp, const ForecastDef& forecast, int last_term) {
    if (last_term < 0) throw ArgumentError("series needs a non-negative last term index");
    if (forecast.option && forecast.option->mode != TerminationMode::pre_step)
        throw ConfigurationError("series evaluation is defined for pre-step termination only");
    const Compiled c = compile(mdp, forecast, false);
    const std::size_t n = mdp.state_count();
    const std::size_t absorbing = n;

    // Absorbing chain over n + 1 states: continuation mass flows along the
    // policy, termination mass flows to the absorbing state.
    std::vector<std::vector<Successor>> chain(n + 1);
    std::vector<double> reward(n + 1, 0.0);
    for (StateIndex s = 0; s < n; ++s) {
        const double b = c.beta[s];
        reward[s] = b * c.z[s] + (b < 1.0 ? (1.0 - b) * c.cumulant[s] : 0.0);
        if (b < 1.0)
            for (const auto& succ : c.row(s)) chain[s].push_back({succ.state, (1.0 - b) * succ.probability});
        if (b > 0.0) chain[s].push_back({absorbing, b});
    }
    chain[absorbing].push_back({absorbing, 1.0});

    // v = sum_{k=0}^{K} P^k r, by Horner: v <- r + P v.
    std::vector<double> v = reward, next(n + 1, 0.0);
    for (int k = 1; k <= last_term; ++k) {
        for (StateIndex s = 0; s <= n; ++s) {
            double acc = 0.0;
            for (const auto& succ : chain[s]) acc += succ.probability * v[succ.state];
            next[s] = reward[s] + acc;
        }
        v.swap(next);
    }
    v.pop_back();
    double residual = 0.0;
    for (StateIndex s = 0; s < n; ++s) residual = std::max(residual, std::abs(backup(c, s, v) - v[s]));
    return {forecast.id, std::move(v), residual, TerminationMode::pre_step};
}

double mc_return(const FiniteMdp& mdp, StateIndex start, const ForecastDef& forecast, RngStream& rng,
                 std::size_t step_cap) {
    if (start >= mdp.state_count()) throw ArgumentError("start state out of range");
    const OptionDef& option = *forecast.option;
    const OutcomeDef& outcome = *forecast.outcome;
    if (!option.initiable(start))
        throw NotInitiable("option '" + option.name + "' cannot start at state " + std::to_string(start));

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

    double total = 0.0;
    StateIndex s = start;
    switch (option.mode) {
        case TerminationMode::pre_step:
            for (std::size_t t = 0; t < step_cap; ++t) {
                if (rng.bernoulli(option.termination(s))) return total + outcome.terminal(s);
                const ActionIndex a = option.policy.sample(s, rng);
                total += outcome.cumulant(s, a);
                s = draw_next(s, a);
            }
            break;
        case TerminationMode::post_step:
            if (option.termination(s) >= 1.0) return outcome.terminal(s);
            for (std::size_t t = 0; t < step_cap; ++t) {
                const ActionIndex a = option.policy.sample(s, rng);
                total += outcome.cumulant(s, a);
                s = draw_next(s, a);
                if (rng.bernoulli(option.termination(s))) return total + outcome.terminal(s);
            }
            break;
        case TerminationMode::one_step: {
            const ActionIndex a = option.policy.sample(s, rng);
            total += outcome.cumulant(s, a);
            return total + outcome.terminal(draw_next(s, a));
        }
    }
    throw RolloutOverrun("rollout of forecast '" + forecast.name + "' exceeded " + std::to_string(step_cap) + " steps");
}

}  // namespace forecast_forge::gvf
