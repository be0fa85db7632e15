#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "forecast_forge/cli.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::cli {

namespace {

using curriculum::CurriculumConfig;
using curriculum::Registry;

std::string number(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string pose_text(const world::Pose& p) {
    return std::to_string(p.x) + "," + std::to_string(p.y) + "," + std::to_string(p.heading);
}

CurriculumConfig make_config(const std::string& path, const std::vector<std::string>& overrides) {
    CurriculumConfig cfg = path.empty() ? CurriculumConfig::defaults()
                                        : CurriculumConfig::with_defaults(CurriculumConfig::load(path));
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw ArgumentError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

// World, pose MDP and curriculum for one invocation.
struct Session {
    world::WorldSpec world;
    world::PoseMdp env;
    Registry registry;

    Session(const std::string& world_path, CurriculumConfig config)
        : world(world::load_world(world_path)),
          env(world::as_finite_mdp(world, world::RobotParams{})),
          registry(curriculum::build_standard_curriculum(config)) {}

    std::size_t state_at(const world::Pose& pose) const {
        auto s = env.find(pose);
        if (!s) throw ArgumentError("pose " + pose_text(pose) + " is not reachable in this world");
        return *s;
    }
};

int forecast_layer(const Registry& registry, int id) { return registry.forecast(id).layer; }

// Independent stream per sample, so results do not depend on the
// worker count.
std::vector<double> sample_returns(const gvf::FiniteMdp& mdp, std::size_t start, const gvf::ForecastDef& def,
                                   std::size_t samples, std::uint64_t seed) {
    std::vector<double> out(samples);
    const std::size_t workers = std::max<std::size_t>(1, std::min(worker_threads(), samples));
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](std::size_t w) {
        try {
            for (std::size_t i = w; i < samples; i += workers) {
                RngStream rng(derive_seed(seed, i, "mc"));
                out[i] = gvf::mc_return(mdp, start, def, rng);
            }
        } catch (...) {
            errors[w] = std::current_exception();
        }
    };
    std::vector<std::thread> threads;
    for (std::size_t w = 1; w < workers; ++w) threads.emplace_back(work, w);
    work(0);
    for (auto& t : threads) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

int world_check(const std::string& path, std::ostream& out) {
    const auto w = world::load_world(path);
    const auto env = world::as_finite_mdp(w, world::RobotParams{});
    std::size_t touch = 0;
    for (auto t : env.touch) touch += t;
    out << "world " << path << "\n";
    out << "digest " << world::world_digest(w) << "\n";
    out << "bounds " << w.x0 << " " << w.y0 << " " << w.x1 << " " << w.y1 << "\n";
    out << "segments " << w.segments.size() << ", circles " << w.circles.size() << "\n";
    out << "start " << pose_text(w.start) << "\n";
    out << "reachable poses " << env.size() << ", touch poses " << touch << "\n";
    std::map<std::string, std::size_t> annotations;
    for (const auto& a : w.annotations) ++annotations[a.name];
    for (const auto& [name, count] : annotations) out << "annotation " << name << " " << count << "\n";
    out << "ok\n";
    return 0;
}

struct DpArgs {
    std::string world, config, mode, out;
    std::vector<std::string> set;
    int forecast = 0;
    double tol = 1e-10;
};

int dp_solve(const DpArgs& a, std::ostream& out) {
    Session session(a.world, make_config(a.config, a.set));
    curriculum::Oracle oracle(session.registry, session.env, a.tol);
    oracle.solve_through(forecast_layer(session.registry, a.forecast));
    std::optional<gvf::TerminationMode> mode;
    if (!a.mode.empty()) mode = gvf::parse_termination_mode(a.mode);
    const auto def = curriculum::bind_forecast(session.registry, a.forecast, session.env, oracle.snapshots(),
                                               oracle.policies(), mode);
    const auto table = gvf::solve_forecast_dp(session.env.mdp, def, a.tol);
    const auto& v = table.values;
    const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    std::string text = "# forecast " + std::to_string(a.forecast) + " " + def.name + " mode " +
                       std::string(gvf::to_string(def.option->mode)) + " states " + std::to_string(v.size()) +
                       " residual " + number(table.residual, 12) + "\n";
    text += "# min " + number(lo) + " mean " + number(mean) + " max " + number(hi) + "\n";
    text += "x, y, h, value\n";
    for (std::size_t s = 0; s < v.size(); ++s) text += pose_text(session.env.poses[s]) + ", " + number(v[s], 9) + "\n";
    if (a.out.empty()) {
        out << text;
    } else {
        save_report(a.out, text);
        out << "# forecast " << a.forecast << " " << def.name << ": " << v.size() << " values written to " << a.out
            << "\n";
    }
    return 0;
}

struct McArgs {
    std::string world, config, pose, mode;
    std::vector<std::string> set;
    int forecast = 0;
    std::size_t samples = 1000;
    std::uint64_t seed = 0;
};

int mc_estimate(const McArgs& a, std::ostream& out) {
    if (a.samples < 2) throw ArgumentError("--samples must be at least 2");
    Session session(a.world, make_config(a.config, a.set));
    const std::size_t start = session.state_at(parse_pose(a.pose));
    curriculum::Oracle oracle(session.registry, session.env);
    oracle.solve_through(forecast_layer(session.registry, a.forecast));
    std::optional<gvf::TerminationMode> mode;
    if (!a.mode.empty()) mode = gvf::parse_termination_mode(a.mode);
    const auto def = curriculum::bind_forecast(session.registry, a.forecast, session.env, oracle.snapshots(),
                                               oracle.policies(), mode);
    const double dp = gvf::solve_forecast_dp(session.env.mdp, def).values[start];
    const auto returns = sample_returns(session.env.mdp, start, def, a.samples, a.seed);
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(returns.size() - 1);
    const double se = std::sqrt(var / static_cast<double>(returns.size()));
    out << "forecast " << a.forecast << " " << def.name << " pose " << pose_text(session.env.poses[start])
        << " mode " << gvf::to_string(def.option->mode) << "\n";
    out << "samples " << a.samples << " seed " << a.seed << "\n";
    out << "mean " << number(mean) << " stderr " << number(se) << "\n";
    out << "dp " << number(dp) << " z " << (se > 0.0 ? number((mean - dp) / se, 3) : std::string("n/a")) << "\n";
    return 0;
}

struct TrainArgs {
    std::string world, config, backend = "tabular", out;
    std::vector<std::string> set;
    std::uint64_t seed = 0;
    int through = 11;
    bool oracle = false;
};

int train(const TrainArgs& a, std::ostream& out) {
    Session session(a.world, make_config(a.config, a.set));
    curriculum::Oracle oracle(session.registry, session.env);
    const auto backend = features::parse_backend_kind(a.backend);
    auto run = curriculum::run_curriculum(session.registry, session.env, oracle, a.seed, a.through, backend,
                                          a.oracle ? curriculum::RunMode::oracle : curriculum::RunMode::learn);
    const int saved = run.context->active_layer();
    std::filesystem::path dir(a.out);
    save_report(dir / "report.txt", run.report);
    save_params(dir / "params.txt", capture_params(*run.context, session.world, saved));
    out << run.report;
    out << "wrote " << (dir / "report.txt").string() << " and " << (dir / "params.txt").string() << "\n";
    return run.passed ? 0 : 1;
}

struct VerifyArgs {
    std::string world, params;
    double tol = 0.05;
    bool force = false;
};

int verify(const VerifyArgs& a, std::ostream& out) {
    const ParamsFile params = load_params(a.params);
    Session session(a.world, params.config);
    auto ctx = restore_context(params, session.registry, session.env, session.world, a.force);
    if (params.through_layer < 1) throw ArgumentError("parameter file holds no layers");
    curriculum::Oracle oracle(session.registry, session.env);
    oracle.solve_through(params.through_layer);
    const double option_gate = session.registry.config().number_or("gate.option_match", 0.9);
    bool ok = true;
    std::string offenders;
    out << "verify " << a.params << " world " << params.world_digest << " tol " << number(a.tol, 4) << "\n";
    for (int layer = 1; layer <= params.through_layer; ++layer) {
        const auto report = curriculum::verify_layer(*ctx, oracle, layer, a.tol, true);
        bool layer_ok = report.mean_error() <= a.tol;
        for (const auto& f : report.forecasts)
            if (f.mean_err > a.tol) offenders += " " + f.name;
        for (const auto& o : report.options)
            if (o.greedy_match < option_gate) {
                layer_ok = false;
                offenders += " " + o.name;
            }
        ok = ok && layer_ok;
        out << "\n== layer " << layer << ": mean_err " << number(report.mean_error()) << ", "
            << (layer_ok ? "verified" : "FAILED") << "\n"
            << report.to_text();
    }
    const auto all = curriculum::verify_layer(*ctx, oracle, params.through_layer, a.tol, false);
    out << "\n== aggregate, layers 1-" << params.through_layer << "\nmean_err " << number(all.mean_error()) << "\n";
    if (!offenders.empty()) out << "offenders:" << offenders << "\n";
    out << "result: " << (ok ? "pass" : "fail") << "\n";
    return ok ? 0 : 1;
}

struct RenderArgs {
    std::string world, params, config, ring, pose, out;
    std::vector<std::string> set;
    bool dp = false, force = false;
    int heatmap = 0;
};

int render_map(const RenderArgs& a, std::ostream& out) {
    if (a.dp == !a.params.empty()) throw ArgumentError("give exactly one of --params or --dp");
    if (a.ring.empty() == (a.heatmap == 0)) throw ArgumentError("give exactly one of --forecast-ring or --heatmap");
    std::optional<ParamsFile> params;
    if (!a.params.empty()) params = load_params(a.params);
    Session session(a.world, params ? params->config : make_config(a.config, a.set));
    const Registry& reg = session.registry;

    std::string ring_name = a.ring;
    std::transform(ring_name.begin(), ring_name.end(), ring_name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const curriculum::Ring* ring = a.ring.empty() ? nullptr : &reg.ring(ring_name);
    int needed = 0;
    if (ring) {
        for (int k = 0; k < 12; ++k) needed = std::max(needed, forecast_layer(reg, ring->member(k)));
    } else {
        needed = forecast_layer(reg, a.heatmap);
    }

    curriculum::SnapshotTable values;
    std::string source;
    if (params) {
        auto ctx = restore_context(*params, reg, session.env, session.world, a.force);
        if (params->through_layer < needed)
            throw ArgumentError("parameter file stops at layer " + std::to_string(params->through_layer) +
                                ", the map needs layer " + std::to_string(needed));
        values = ctx->estimate_table();
        source = "estimates, seed " + std::to_string(params->seed) + " backend " +
                 std::string(features::to_string(params->backend));
    } else {
        curriculum::Oracle oracle(reg, session.env);
        oracle.solve_through(needed);
        values = oracle.snapshots();
        source = "dp";
    }

    RenderedMap map;
    if (ring) {
        const std::size_t s = session.state_at(parse_pose(a.pose));
        const auto kind = reg.forecast(ring->base).kind;
        const double scale = kind == ValueKind::probability ? 1.0 : 1.0 / reg.beta_floor();
        map = render_ring(ring_values(reg, *ring, values, s), scale,
                          ring->name + " ring at " + pose_text(session.env.poses[s]) + " from " + source);
    } else {
        std::vector<double> v(session.env.size());
        for (std::size_t s = 0; s < v.size(); ++s) v[s] = values.states[s].f(a.heatmap);
        map = render_heatmap(session.env, session.world, v,
                             reg.forecast(a.heatmap).abbrev + " heatmap from " + source);
    }
    save_report(a.out, map.image.to_pgm());
    out << map.table;
    return 0;
}

struct RolloutArgs {
    std::string world, params, config, pose;
    std::vector<std::string> set;
    int option = 0;
    std::uint64_t seed = 0;
    std::size_t max_steps = 1000;
    bool force = false;
};

int rollout_trace(const RolloutArgs& a, std::ostream& out) {
    std::optional<ParamsFile> params;
    if (!a.params.empty()) params = load_params(a.params);
    Session session(a.world, params ? params->config : make_config(a.config, a.set));
    const Registry& reg = session.registry;
    const auto& spec = reg.option(a.option);
    const std::size_t start = session.state_at(parse_pose(a.pose));

    curriculum::SnapshotTable values;
    curriculum::PolicyMap policies;
    if (params) {
        auto ctx = restore_context(*params, reg, session.env, session.world, a.force);
        if (params->through_layer < spec.layer)
            throw ArgumentError("parameter file stops before option " + spec.abbrev + "'s layer");
        values = ctx->estimate_table();
        policies = ctx->policies();
    } else {
        curriculum::Oracle oracle(reg, session.env);
        oracle.solve_through(std::max(spec.layer, 1));
        values = oracle.snapshots();
        policies = oracle.policies();
    }
    const auto option = curriculum::bind_option(reg, a.option, session.env, values, policies);
    if (!option->initiable(start))
        throw NotInitiable("option " + spec.abbrev + " cannot start at " + pose_text(session.env.poses[start]));

    RngStream rng(derive_seed(a.seed, static_cast<std::uint64_t>(a.option), "rollout"));
    out << "option " << a.option << " " << spec.abbrev << " mode " << gvf::to_string(option->mode) << " from "
        << pose_text(session.env.poses[start]) << " seed " << a.seed << "\n";
    out << "step, pose, action, next, beta\n";
    std::size_t s = start;
    if (option->mode == gvf::TerminationMode::post_step && option->termination(s) >= 1.0) {
        out << "terminated before acting at " << pose_text(session.env.poses[s]) << "\n";
        return 0;
    }
    for (std::size_t t = 0; t < a.max_steps; ++t) {
        if (option->mode == gvf::TerminationMode::pre_step && gvf::sample_termination(*option, s, rng)) {
            out << "terminated after " << t << " steps at " << pose_text(session.env.poses[s]) << "\n";
            return 0;
        }
        const auto act = static_cast<world::Action>(option->policy.sample(s, rng));
        const std::size_t next = session.env.successor(s, act);
        const double beta = option->termination(next);
        out << t << ", " << pose_text(session.env.poses[s]) << ", " << world::to_string(act) << ", "
            << pose_text(session.env.poses[next]) << ", " << number(beta, 4) << "\n";
        s = next;
        if (option->mode == gvf::TerminationMode::one_step ||
            (option->mode == gvf::TerminationMode::post_step && gvf::sample_termination(*option, s, rng))) {
            out << "terminated after " << t + 1 << " steps at " << pose_text(session.env.poses[s]) << "\n";
            return 0;
        }
    }
    out << "stopped at the step cap (" << a.max_steps << ") at " << pose_text(session.env.poses[s]) << "\n";
    return 0;
}

}  // namespace

std::size_t worker_threads() {
    const char* text = std::getenv("FORECAST_FORGE_THREADS");
    std::size_t n = 0;
    if (text && *text) {
        char* end = nullptr;
        const long v = std::strtol(text, &end, 10);
        if (*end != '\0' || v < 0) throw ArgumentError("FORECAST_FORGE_THREADS must be a non-negative integer");
        n = static_cast<std::size_t>(v);
    }
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

world::Pose parse_pose(std::string_view text) {
    world::Pose p;
    int* fields[] = {&p.x, &p.y, &p.heading};
    std::size_t pos = 0;
    for (int i = 0; i < 3; ++i) {
        const auto end = i < 2 ? text.find(',', pos) : text.size();
        if (end == std::string_view::npos) throw ArgumentError("pose must look like x,y,h");
        const auto part = text.substr(pos, end - pos);
        char* stop = nullptr;
        const std::string s(part);
        const long v = std::strtol(s.c_str(), &stop, 10);
        if (s.empty() || *stop != '\0') throw ArgumentError("pose must look like x,y,h, got '" + std::string(text) + "'");
        *fields[i] = static_cast<int>(v);
        pos = end + 1;
    }
    if (p.heading < 0 || p.heading >= world::heading_count) throw ArgumentError("heading must lie in 0..11");
    return p;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Forecast curriculum tools for a robot microworld", "forecast-forge"};
    app.require_subcommand(1);
    std::function<int()> action;

    auto* world_cmd = app.add_subcommand("world", "World files")->require_subcommand(1);
    std::string world_file;
    auto* check = world_cmd->add_subcommand("check", "Parse a world file and enumerate its poses");
    check->add_option("file", world_file, "World file")->required();
    check->callback([&] { action = [&] { return world_check(world_file, out); }; });

    DpArgs dp;
    auto* dp_cmd = app.add_subcommand("dp", "Exact solutions")->require_subcommand(1);
    auto* solve = dp_cmd->add_subcommand("solve", "Solve one forecast over every reachable pose");
    solve->add_option("--world", dp.world)->required();
    solve->add_option("--forecast", dp.forecast)->required();
    solve->add_option("--mode", dp.mode)->check(CLI::IsMember({"pre", "post", "one"}));
    solve->add_option("--tol", dp.tol);
    solve->add_option("--config", dp.config);
    solve->add_option("--set", dp.set, "Config override key=value");
    solve->add_option("--out", dp.out);
    solve->callback([&] { action = [&] { return dp_solve(dp, out); }; });

    McArgs mc;
    auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo")->require_subcommand(1);
    auto* estimate = mc_cmd->add_subcommand("estimate", "Average sampled outcomes from one pose");
    estimate->add_option("--world", mc.world)->required();
    estimate->add_option("--forecast", mc.forecast)->required();
    estimate->add_option("--pose", mc.pose)->required();
    estimate->add_option("--samples", mc.samples)->required();
    estimate->add_option("--seed", mc.seed)->required();
    estimate->add_option("--mode", mc.mode)->check(CLI::IsMember({"pre", "post", "one"}));
    estimate->add_option("--config", mc.config);
    estimate->add_option("--set", mc.set);
    estimate->callback([&] { action = [&] { return mc_estimate(mc, out); }; });

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Run the curriculum and save parameters");
    train_cmd->add_option("--world", tr.world)->required();
    train_cmd->add_option("--config", tr.config);
    train_cmd->add_option("--seed", tr.seed)->required();
    train_cmd->add_option("--through-layer", tr.through)->check(CLI::Range(1, 11));
    train_cmd->add_option("--backend", tr.backend)->check(CLI::IsMember({"tabular", "linear"}));
    train_cmd->add_option("--out", tr.out)->required();
    train_cmd->add_option("--set", tr.set);
    train_cmd->add_flag("--oracle", tr.oracle, "Seed every layer from exact values instead of learning");
    train_cmd->callback([&] { action = [&] { return train(tr, out); }; });

    VerifyArgs vf;
    auto* verify_cmd = app.add_subcommand("verify", "Compare saved parameters with exact values");
    verify_cmd->add_option("--world", vf.world)->required();
    verify_cmd->add_option("--params", vf.params)->required();
    verify_cmd->add_option("--tol", vf.tol);
    verify_cmd->add_flag("--force", vf.force, "Load parameters saved for another world");
    verify_cmd->callback([&] { action = [&] { return verify(vf, out); }; });

    RenderArgs rd;
    auto* render_cmd = app.add_subcommand("render", "Images")->require_subcommand(1);
    auto* map_cmd = render_cmd->add_subcommand("map", "Ring or heatmap of forecast values");
    map_cmd->add_option("--world", rd.world)->required();
    map_cmd->add_option("--params", rd.params);
    map_cmd->add_flag("--dp", rd.dp);
    map_cmd->add_option("--forecast-ring", rd.ring)->check(CLI::IsMember({"tm", "dtam", "dwm"}));
    map_cmd->add_option("--heatmap", rd.heatmap, "Forecast id");
    map_cmd->add_option("--pose", rd.pose);
    map_cmd->add_option("--out", rd.out)->required();
    map_cmd->add_option("--config", rd.config);
    map_cmd->add_option("--set", rd.set);
    map_cmd->add_flag("--force", rd.force);
    map_cmd->callback([&] {
        if (!rd.ring.empty() && rd.pose.empty()) throw CLI::ValidationError("--forecast-ring needs --pose");
        action = [&] { return render_map(rd, out); };
    });

    RolloutArgs ro;
    auto* rollout_cmd = app.add_subcommand("rollout", "Option rollouts")->require_subcommand(1);
    auto* trace = rollout_cmd->add_subcommand("trace", "Follow one option from a pose");
    trace->add_option("--world", ro.world)->required();
    trace->add_option("--option", ro.option)->required();
    trace->add_option("--pose", ro.pose)->required();
    trace->add_option("--seed", ro.seed)->required();
    trace->add_option("--params", ro.params);
    trace->add_option("--config", ro.config);
    trace->add_option("--set", ro.set);
    trace->add_option("--max-steps", ro.max_steps);
    trace->add_flag("--force", ro.force);
    trace->callback([&] { action = [&] { return rollout_trace(ro, out); }; });

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return 2;
    }
    try {
        return action ? action() : 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return run(args, std::cout, std::cerr);
}

}  // namespace forecast_forge::cli
