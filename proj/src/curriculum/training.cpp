#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::curriculum {

namespace {

using world::Action;

constexpr double missing = std::numeric_limits<double>::quiet_NaN();
constexpr int readout_iterations = 3;

gvf::Gating parse_gating(const std::string& text) {
    if (text == "match_support") return gvf::Gating::match_support;
    if (text == "importance_ratio") return gvf::Gating::importance_ratio;
    throw ConfigurationError("td.gating must be match_support or importance_ratio, got '" + text + "'");
}

gvf::AlphaSchedule schedule_for(const CurriculumConfig& config, int forecast_id) {
    gvf::AlphaSchedule out;
    out.alpha = config.number_or("td.alpha." + std::to_string(forecast_id), config.number_or("td.alpha", 0.1));
    // td.decay[.<id>] = scale of the visit-count decay, 0 for none.
    const double scale = config.number_or("td.decay." + std::to_string(forecast_id), config.number_or("td.decay", 0.0));
    out.visit_decay = scale > 0.0;
    if (out.visit_decay) out.decay_scale = scale;
    return out;
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

// Probability that the option's policy picks `a` at `s`.
double policy_probability(const OptionSpec& option, const gvf::Policy* learned, std::size_t s, Action a) {
    switch (option.policy) {
        case PolicyKind::primitive:
        case PolicyKind::fixed: return option.action == a ? 1.0 : 0.0;
        case PolicyKind::uniform: return 1.0 / world::action_count;
        case PolicyKind::maximize: return learned->probability(s, static_cast<gvf::ActionIndex>(a));
    }
    return 0.0;
}

Action sample_action(const OptionSpec& option, const gvf::Policy* learned, std::size_t s, RngStream& rng) {
    switch (option.policy) {
        case PolicyKind::primitive:
        case PolicyKind::fixed: return option.action;
        case PolicyKind::uniform: return static_cast<Action>(rng.below(world::action_count));
        case PolicyKind::maximize: return static_cast<Action>(learned->sample(s, rng));
    }
    return Action::rf;
}

// A forecast ready for the per-step fan-out.
struct Active {
    const ForecastSpec* spec;
    const OptionSpec* option;
    const gvf::Policy* learned;
    gvf::TdLearner* learner;
    gvf::TerminationMode mode;
};

struct Candidate {
    const OptionSpec* option;
    const gvf::Policy* learned;
};

}  // namespace

LearningContext::LearningContext(const Registry& registry, const world::PoseMdp& env, features::BackendKind backend,
                                 std::uint64_t seed)
    : registry_(&registry), env_(&env), seed_(seed) {
    std::vector<std::uint64_t> keys;
    keys.reserve(env.size());
    for (const auto& pose : env.poses) keys.push_back(world::pose_key(pose));
    backend_ = features::make_approximator(backend, std::move(keys));
    const std::size_t rays = env.pixels.empty() ? 0 : env.pixels.front().size();
    permutation_ = world::make_pixel_permutation(derive_seed(seed, 0, "pixels"), rays);
    if (backend == features::BackendKind::linear) {
        pixels_.reserve(env.size());
        for (const auto& px : env.pixels) pixels_.push_back(permutation_.apply(px));
    }
    position = env.start;
    last_estimates.assign(static_cast<std::size_t>(registry.max_forecast_id() + 1), 0.0);
}

void LearningContext::activate_through(int layer) {
    const auto& config = registry_->config();
    const std::string gating = config.text("td.gating", "match_support");
    for (int id : registry_->forecasts_through(layer)) {
        if (backend_->registered(id)) continue;
        backend_->register_forecast(id, registry_->forecast(id).kind);
        learners_.emplace(id, gvf::TdLearner(id, *backend_, schedule_for(config, id),
                                             parse_gating(config.text("td.gating." + std::to_string(id), gating))));
    }
    active_layer_ = std::max(active_layer_, layer);
}

gvf::TdLearner& LearningContext::learner(int forecast_id) {
    auto it = learners_.find(forecast_id);
    if (it == learners_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not active");
    return it->second;
}

features::StateRef LearningContext::state_ref(std::size_t state, std::span<const double> features) const {
    return {world::pose_key(env_->poses[state]), state, features};
}

std::vector<double> LearningContext::observation_features(std::size_t state, bool touch,
                                                          std::span<const double> estimates) const {
    world::Observation obs;
    obs.pixels = pixels_.empty() ? permutation_.apply(env_->pixels[state]) : pixels_[state];
    obs.touch = touch;
    std::vector<std::pair<int, double>> prev;
    for (int id : backend_->forecast_ids()) {
        const double v = static_cast<std::size_t>(id) < estimates.size() ? estimates[static_cast<std::size_t>(id)] : 0.0;
        prev.emplace_back(id, std::isnan(v) ? 0.0 : v);
    }
    return features::build_state_vector(obs, prev).values;
}

std::vector<double> LearningContext::predict_all(std::size_t state, std::span<const double> features) const {
    std::vector<double> out(static_cast<std::size_t>(registry_->max_forecast_id() + 1), missing);
    const auto ref = state_ref(state, features);
    for (int id : backend_->forecast_ids()) out[static_cast<std::size_t>(id)] = backend_->predict(id, ref);
    return out;
}

SnapshotTable LearningContext::estimate_table() const {
    SnapshotTable out;
    out.states.resize(env_->size());
    const bool linear = backend_->kind() == features::BackendKind::linear;
    for (std::size_t s = 0; s < env_->size(); ++s) {
        Snapshot snap = registry_->empty_snapshot();
        if (linear) {
            // Stationary readout: feed the pose's own estimates back in.
            std::vector<double> estimates(snap.forecast.size(), 0.0);
            for (int k = 0; k < readout_iterations; ++k)
                estimates = predict_all(s, observation_features(s, false, estimates));
            snap.forecast = std::move(estimates);
        } else {
            snap.forecast = predict_all(s, {});
        }
        snap.touch = env_->touch[s] != 0;
        registry_->fill_aliases(snap, active_layer_);
        out.states[s] = std::move(snap);
    }
    return out;
}

void LearningContext::seed_from_oracle(const Oracle& oracle, int through_layer) {
    auto* table = dynamic_cast<features::TabularApproximator*>(backend_.get());
    if (!table) throw ConfigurationError("oracle seeding needs the tabular backend");
    activate_through(through_layer);
    for (int id : registry_->forecasts_through(through_layer)) {
        const auto& values = oracle.table(id).values;
        for (std::size_t s = 0; s < env_->size(); ++s) table->set_value(id, world::pose_key(env_->poses[s]), values[s]);
    }
    for (int id : registry_->options_through(through_layer))
        if (registry_->option(id).policy == PolicyKind::maximize) policies_[id] = oracle.policy(id);
}

TrainingStats train_layer(LearningContext& ctx, int layer, std::uint64_t budget, RngStream& rng) {
    const Registry& registry = ctx.registry();
    const world::PoseMdp& env = ctx.env();
    const CurriculumConfig& config = registry.config();
    if (layer < 1 || layer > registry.max_layer())
        throw ArgumentError("layer " + std::to_string(layer) + " does not exist");
    if (ctx.verified_layer() < layer - 1) {
        std::vector<int> pending;
        for (int l = ctx.verified_layer() + 1; l < layer; ++l)
            for (int id : registry.layer(l).forecasts) pending.push_back(id);
        throw GateFailure("layer " + std::to_string(layer) + " needs layer " + std::to_string(ctx.verified_layer() + 1) +
                              " verified first",
                          pending);
    }
    ctx.activate_through(layer);
    TrainingStats stats;
    stats.layer = layer;

    // Maximizing options of this layer learn from the current estimates.
    for (int id : registry.layer(layer).options) {
        const OptionSpec& option = registry.option(id);
        if (option.policy != PolicyKind::maximize || ctx.policies().count(id)) continue;
        const SnapshotTable snapshots = ctx.estimate_table();
        const auto objective = bind_objective(registry, id, env, snapshots);
        gvf::QSchedule schedule;
        schedule.episodes = static_cast<std::size_t>(config.number_or("q.episodes", 50000));
        schedule.epsilon_start = config.number_or("q.epsilon_start", 1.0);
        schedule.epsilon_end = config.number_or("q.epsilon_end", 0.05);
        schedule.step_size = config.number_or("q.step_size", 1.0);
        schedule.max_episode_steps = static_cast<std::size_t>(config.number_or("q.max_steps", 1000));
        ctx.policies()[id] = gvf::learn_option_policy_q(env.mdp, objective, schedule, rng).policy;
        stats.option_episodes[id] = schedule.episodes;
    }
    if (budget == 0) return stats;

    std::vector<Active> active;
    for (int id : registry.forecasts_through(layer)) {
        const ForecastSpec& spec = registry.forecast(id);
        const OptionSpec& option = registry.option(spec.option);
        const gvf::Policy* learned = nullptr;
        if (option.policy == PolicyKind::maximize) learned = &ctx.policies().at(option.id);
        const auto mode = option.policy == PolicyKind::primitive ? gvf::TerminationMode::one_step : option.mode;
        active.push_back({&spec, &option, learned, &ctx.learner(id), mode});
        stats.applied_updates[id] = 0;
    }
    // Primitive options count as registered options too.
    std::vector<Candidate> candidates;
    for (Action a : world::all_actions) {
        const int id = static_cast<int>(a) + 1;
        if (registry.has_option(id) && registry.option(id).policy == PolicyKind::primitive)
            candidates.push_back({&registry.option(id), nullptr});
    }
    for (int id : registry.options_through(layer)) {
        const OptionSpec& option = registry.option(id);
        const gvf::Policy* learned = nullptr;
        if (option.policy == PolicyKind::maximize) {
            auto it = ctx.policies().find(id);
            if (it == ctx.policies().end()) continue;
            learned = &it->second;
        }
        candidates.push_back({&option, learned});
    }

    const double option_prob = config.number_or("behavior.option_prob", 0.5);
    const auto option_cap = static_cast<std::uint64_t>(config.number_or("behavior.option_cap", 200));
    const bool expected = config.number_or("td.expected_termination", 1.0) != 0.0;
    const bool linear = ctx.backend().kind() == features::BackendKind::linear;

    std::size_t s = ctx.position;
    std::vector<double> x = linear ? ctx.observation_features(s, ctx.last_contact, ctx.last_estimates)
                                   : std::vector<double>{};
    Snapshot snap = registry.empty_snapshot();
    snap.forecast = ctx.predict_all(s, x);
    snap.touch = ctx.last_contact;
    registry.fill_aliases(snap, layer);

    const Candidate* following = nullptr;
    std::uint64_t followed = 0;
    std::vector<const Candidate*> initiable;
    for (std::uint64_t step = 0; step < budget; ++step) {
        if (!following) {
            initiable.clear();
            for (const auto& c : candidates)
                if (!c.option->initiation || c.option->initiation(snap)) initiable.push_back(&c);
            if (!initiable.empty() && rng.uniform() < option_prob) {
                following = initiable[rng.below(initiable.size())];
                followed = 0;
            }
        }
        // The behavior component choosing this action: null for a uniform
        // primitive draw (a chosen primitive option is one too).
        const Candidate* component =
            following && following->option->policy != PolicyKind::primitive ? following : nullptr;
        const Action a = following ? sample_action(*following->option, following->learned, s, rng)
                                   : static_cast<Action>(rng.below(world::action_count));
        auto component_probability = [&](Action b) {
            return component ? policy_probability(*component->option, component->learned, s, b)
                             : 1.0 / world::action_count;
        };
        const double behavior_prob = component_probability(a);

        const std::size_t s2 = env.successor(s, a);
        const bool contact = a == Action::ef && env.touch[s] != 0;
        std::vector<double> x2 = linear ? ctx.observation_features(s2, contact, snap.forecast) : std::vector<double>{};
        Snapshot snap2 = registry.empty_snapshot();
        snap2.forecast = ctx.predict_all(s2, x2);
        snap2.touch = contact;
        registry.fill_aliases(snap2, layer);

        const auto here = ctx.state_ref(s, x);
        const auto there = ctx.state_ref(s2, x2);
        for (const Active& f : active) {
            if (component && f.learner->gating() == gvf::Gating::importance_ratio) {
                // Ratios are only unbiased where the component covers the target policy.
                bool covered = true;
                for (Action b : world::all_actions)
                    if (policy_probability(*f.option, f.learned, s, b) > 0.0 && component_probability(b) == 0.0)
                        covered = false;
                if (!covered) continue;
            }
            gvf::Transition t;
            t.state = here;
            t.next = there;
            t.action = static_cast<gvf::ActionIndex>(a);
            t.mode = f.mode;
            const double pi = policy_probability(*f.option, f.learned, s, a);
            if (f.mode == gvf::TerminationMode::one_step) {
                t.cumulant = f.spec->cumulant(snap, a);
                t.terminal = f.spec->terminal(snap2);
                t.termination = 1.0;
                t.target_probability = pi;
            } else {
                const double beta = option_termination(registry, *f.option, snap);
                if (beta >= 1.0) {
                    // The option ends before acting; the target is z here.
                    t.cumulant = 0.0;
                    t.terminal = f.spec->terminal(snap);
                    t.termination = 1.0;
                    t.target_probability = 1.0;
                    t.mode = gvf::TerminationMode::post_step;
                } else if (f.mode == gvf::TerminationMode::pre_step) {
                    t.cumulant = f.spec->cumulant(snap, a);
                    t.terminal = f.spec->terminal(snap);
                    t.termination = expected ? beta : (rng.bernoulli(beta) ? 1.0 : 0.0);
                    t.target_probability = pi;
                } else {
                    const double beta2 = option_termination(registry, *f.option, snap2);
                    t.cumulant = f.spec->cumulant(snap, a);
                    t.terminal = f.spec->terminal(snap2);
                    t.termination = expected ? beta2 : (rng.bernoulli(beta2) ? 1.0 : 0.0);
                    t.target_probability = pi;
                }
            }
            const double bootstrap = snap2.forecast[static_cast<std::size_t>(f.spec->id)];
            const auto result = f.learner->step(t, behavior_prob, bootstrap);
            if (result.applied) ++stats.applied_updates[f.spec->id];
        }

        if (following) {
            ++followed;
            const double beta = option_termination(registry, *following->option, snap2);
            if (followed >= option_cap || rng.bernoulli(beta)) following = nullptr;
        }
        ++stats.actions[static_cast<std::size_t>(a)];
        s = s2;
        x = std::move(x2);
        snap = std::move(snap2);
        ++stats.steps;
    }
    ctx.position = s;
    ctx.last_contact = snap.touch;
    ctx.last_estimates = snap.forecast;
    return stats;
}

double greedy_match(const gvf::Policy& policy, const gvf::LearnedOption& oracle, std::size_t actions,
                    double tie_tolerance) {
    const std::size_t n = policy.state_count();
    if (n == 0 || oracle.q.size() != n * actions) throw ArgumentError("policy and oracle sizes differ");
    std::size_t matched = 0;
    for (std::size_t s = 0; s < n; ++s) {
        auto row = std::span<const double>(oracle.q).subspan(s * actions, actions);
        const double best = *std::max_element(row.begin(), row.end());
        const double slack = tie_tolerance * std::max(1.0, std::abs(best));
        if (row[policy.mode(s)] >= best - slack) ++matched;
    }
    return static_cast<double>(matched) / static_cast<double>(n);
}

double VerificationReport::mean_error() const {
    if (forecasts.empty()) return 0.0;
    double total = 0.0;
    for (const auto& f : forecasts) total += f.mean_err;
    return total / static_cast<double>(forecasts.size());
}

std::vector<int> VerificationReport::offenders(double gate) const {
    std::vector<int> out;
    for (const auto& f : forecasts)
        if (f.max_err > gate) out.push_back(f.id);
    return out;
}

std::string format_check(const ForecastCheck& c) {
    return std::to_string(c.layer) + ", " + std::to_string(c.id) + ", " + c.name + ", " + fixed(c.max_err) + ", " +
           fixed(c.mean_err) + ", " + fixed(c.frac_within_tol, 4);
}

std::string VerificationReport::to_text() const {
    std::string out = "# layer, id, name, max_err, mean_err, frac_within_tol (tol " + fixed(tolerance, 4) + ")\n";
    for (const auto& f : forecasts) out += format_check(f) + "\n";
    for (const auto& o : options)
        out += std::to_string(o.layer) + ", option " + std::to_string(o.id) + ", " + o.name + ", greedy_match " +
               fixed(o.greedy_match, 4) + "\n";
    return out;
}

VerificationReport verify_layer(const LearningContext& ctx, const Oracle& oracle, int layer, double tol,
                                bool only_layer) {
    const Registry& registry = ctx.registry();
    if (oracle.solved_layer() < layer)
        throw ArgumentError("oracle has solved layers 1.." + std::to_string(oracle.solved_layer()) + ", not " +
                            std::to_string(layer));
    VerificationReport report;
    report.layer = layer;
    report.tolerance = tol;
    const SnapshotTable estimates = ctx.estimate_table();
    const std::size_t n = ctx.env().size();

    std::vector<int> ids = only_layer ? registry.layer(layer).forecasts : registry.forecasts_through(layer);
    for (int id : ids) {
        const auto& truth = oracle.table(id).values;
        ForecastCheck check;
        check.id = id;
        check.layer = registry.forecast(id).layer;
        check.name = registry.forecast(id).abbrev;
        std::size_t within = 0;
        double total = 0.0;
        for (std::size_t s = 0; s < n; ++s) {
            double est = estimates.states[s].f(id);
            if (std::isnan(est)) est = 0.0;
            const double err = std::abs(est - truth[s]);
            check.max_err = std::max(check.max_err, err);
            total += err;
            if (err <= tol) ++within;
        }
        check.mean_err = n ? total / static_cast<double>(n) : 0.0;
        check.frac_within_tol = n ? static_cast<double>(within) / static_cast<double>(n) : 1.0;
        report.forecasts.push_back(std::move(check));
    }

    std::vector<int> options;
    if (only_layer) {
        options = registry.layer(layer).options;
    } else {
        options = registry.options_through(layer);
    }
    for (int id : options) {
        const OptionSpec& spec = registry.option(id);
        if (spec.policy != PolicyKind::maximize) continue;
        OptionCheck check{spec.layer, id, spec.abbrev, 0.0};
        auto it = ctx.policies().find(id);
        if (it != ctx.policies().end()) check.greedy_match = greedy_match(it->second, oracle.learned(id), world::action_count);
        report.options.push_back(std::move(check));
    }
    return report;
}

CurriculumRun run_curriculum(const Registry& registry, const world::PoseMdp& env, Oracle& oracle, std::uint64_t seed,
                             int through_layer, features::BackendKind backend, RunMode mode) {
    if (through_layer < 1 || through_layer > registry.max_layer())
        throw ArgumentError("layers run from 1 to " + std::to_string(registry.max_layer()));
    if (&oracle.registry() != &registry || &oracle.env() != &env)
        throw ArgumentError("oracle was built for a different registry or world");
    const auto& config = registry.config();
    const double gate = config.number("gate.tolerance", "the layer gate");
    const double option_gate = config.number_or("gate.option_match", 0.9);

    CurriculumRun run;
    run.context = std::make_unique<LearningContext>(registry, env, backend, seed);
    LearningContext& ctx = *run.context;
    std::string& text = run.report;
    text = "curriculum seed=" + std::to_string(seed) + " backend=" + std::string(features::to_string(backend)) +
           " mode=" + (mode == RunMode::learn ? "learn" : "oracle") + " poses=" + std::to_string(env.size()) +
           " through_layer=" + std::to_string(through_layer) + "\n";

    auto names = [&](const LayerSpec& spec) {
        std::string out;
        auto add = [&](const std::string& label, const std::vector<int>& ids, auto abbrev) {
            if (ids.empty()) return;
            out += " " + label + ":";
            for (int id : ids) out += " " + abbrev(id);
        };
        add("forecasts", spec.forecasts, [&](int id) { return registry.forecast(id).abbrev; });
        add("options", spec.options, [&](int id) { return registry.option(id).abbrev; });
        add("aliases", spec.aliases, [&](int id) { return registry.alias(id).abbrev; });
        return out;
    };

    for (int layer = 1; layer <= through_layer; ++layer) {
        oracle.solve_through(layer);
        std::uint64_t steps = 0;
        if (mode == RunMode::oracle) {
            ctx.seed_from_oracle(oracle, layer);
        } else {
            const auto budget = static_cast<std::uint64_t>(
                config.number("budget.layer" + std::to_string(layer), "layer " + std::to_string(layer)));
            RngStream rng(derive_seed(seed, static_cast<std::uint64_t>(layer), "behavior"));
            steps = train_layer(ctx, layer, budget, rng).steps;
        }
        VerificationReport report = verify_layer(ctx, oracle, layer, gate, true);
        bool ok = report.mean_error() <= gate;
        for (const auto& o : report.options) ok = ok && o.greedy_match >= option_gate;

        text += "\n== layer " + std::to_string(layer) + ":" + names(registry.layer(layer)) + "\n";
        text += "steps " + std::to_string(steps) + ", mean_err " + fixed(report.mean_error()) + ", " +
                (ok ? "verified" : "FAILED") + "\n";
        text += report.to_text();
        run.layers.push_back(std::move(report));
        if (!ok) {
            run.passed = false;
            std::string offenders;
            for (const auto& f : run.layers.back().forecasts)
                if (f.mean_err > gate) offenders += " " + f.name;
            for (const auto& o : run.layers.back().options)
                if (o.greedy_match < option_gate) offenders += " " + o.name;
            text += "halted at layer " + std::to_string(layer) + "; offenders:" + offenders + "\n";
            break;
        }
        ctx.mark_verified(layer);
        run.completed_layer = layer;
    }

    if (run.completed_layer > 0) {
        const VerificationReport all = verify_layer(ctx, oracle, run.completed_layer, gate, false);
        text += "\n== aggregate, layers 1-" + std::to_string(run.completed_layer) + "\n";
        text += "mean_err " + fixed(all.mean_error()) + "\n";
        text += all.to_text();
    }
    text += std::string("\nresult: ") + (run.passed ? "pass" : "fail") + "\n";
    return run;
}

}  // namespace forecast_forge::curriculum
