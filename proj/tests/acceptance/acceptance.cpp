// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "../unit/support.hpp"
#include "forecast_forge/cli.hpp"
#include "forecast_forge/errors.hpp"

using namespace forecast_forge;
using namespace forecast_forge::curriculum;
using world::Action;
namespace fs = std::filesystem;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

testing::Demo& demo(int through) { return testing::Demo::two_rooms(through); }

gvf::ForecastDef bound(const Oracle& oracle, int id, std::optional<gvf::TerminationMode> mode = std::nullopt) {
    return bind_forecast(oracle.registry(), id, oracle.env(), oracle.snapshots(), oracle.policies(), mode);
}

Result series_equivalence() {
    RngStream rng(20240101);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 20, actions = 3;
        const auto mdp = testing::random_mdp(n, actions, 3, rng);
        const auto beta = testing::random_values(n, 0.1, 1.0, rng);
        const auto z = testing::random_values(n, -1.0, 1.0, rng);
        const auto c = testing::random_values(n * actions, -1.0, 1.0, rng);
        const auto f = testing::table_forecast(n, actions, beta, z, c, gvf::TerminationMode::pre_step, rng);
        const auto dp = gvf::solve_forecast_dp(mdp, f, 1e-13);
        const auto series = gvf::evaluate_forecast_series(mdp, f, 500);
        for (std::size_t s = 0; s < n; ++s) worst = std::max(worst, std::abs(dp.values[s] - series.values[s]));
    }
    return {worst <= 1e-6, "max |series - dp| " + fmt(worst)};
}

Result mc_dp_agreement() {
    auto& d = demo(5);
    RngStream pick(77);
    std::vector<std::size_t> probes;
    while (probes.size() < 20) probes.push_back(pick.below(d.env.size()));
    std::size_t pairs = 0, agree = 0;
    for (int id : {1, 2, 3, 15, 16}) {
        const auto f = bound(d.oracle, id);
        const auto& dp = d.oracle.table(id).values;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const std::size_t s = probes[i];
            RngStream rng(derive_seed(5, static_cast<std::uint64_t>(id * 100 + static_cast<int>(i)), "acceptance"));
            std::vector<double> samples(20000);
            for (auto& x : samples) x = gvf::mc_return(d.env.mdp, s, f, rng);
            const double mean = testing::mean_of(samples), se = testing::stderr_of(samples);
            ++pairs;
            if (std::abs(mean - dp[s]) <= 3.0 * se + 1e-12) ++agree;
        }
    }
    const double frac = static_cast<double>(agree) / static_cast<double>(pairs);
    return {frac >= 0.95, std::to_string(agree) + "/" + std::to_string(pairs) + " pairs within 3 se"};
}

Result corridor_cap() {
    testing::Demo c("corridor40");
    c.oracle.solve_through(7);
    const auto& post = c.oracle.table(29).values;
    const auto pre = gvf::solve_forecast_dp(c.env.mdp, bound(c.oracle, 29, gvf::TerminationMode::pre_step)).values;
    // Mid-corridor poses heading along the corridor where following the right wall can start.
    const auto& rfwr = c.registry.option(9);
    const auto& snaps = c.oracle.snapshots().states;
    double mid_post = 1e9, mid_pre = 1e9;
    std::size_t mid = 0;
    for (std::size_t s = 0; s < c.env.size(); ++s) {
        const auto& p = c.env.poses[s];
        if (p.x < 15 || p.x > 25 || (p.heading != 0 && p.heading != 6) || !rfwr.initiation(snaps[s])) continue;
        ++mid;
        mid_post = std::min(mid_post, post[s]);
        mid_pre = std::min(mid_pre, pre[s]);
    }
    const double max_post = *std::max_element(post.begin(), post.end());
    const double max_pre = *std::max_element(pre.begin(), pre.end());
    const bool ok = mid > 0 && max_post <= 10.0 + 1e-9 && mid_post >= 9.9 && max_pre <= 9.0 + 1e-9;
    return {ok, std::to_string(mid) + " mid-corridor poses; post max " + fmt(max_post, 10) + ", post mid-corridor min " + fmt(mid_post, 6) + "; pre max " +
                    fmt(max_pre, 10) + ", pre mid-corridor min " + fmt(mid_pre, 6)};
}

// Opposite heading of a pose with exactly one touching heading: rtt needs six turns from there.
std::size_t lone_touch_pose(const world::PoseMdp& env) {
    for (std::size_t s = 0; s < env.size(); ++s) {
        const auto& p = env.poses[s];
        if (!env.touch[s]) continue;
        int touching = 0;
        bool all = true;
        for (int h = 0; h < 12; ++h) {
            const auto t = env.find({p.x, p.y, h});
            if (!t) all = false;
            else touching += env.touch[*t];
        }
        if (all && touching == 1) return env.at({p.x, p.y, (p.heading + 6) % 12});
    }
    throw Error("no pose with a single touching heading");
}

Result rotation_survival() {
    auto& d = demo(4);
    const std::size_t start = lone_touch_pose(d.env);
    auto survival = [&](const Oracle& oracle, gvf::TerminationMode mode, std::uint64_t stream) {
        const auto f = bound(oracle, 15, mode);
        RngStream rng(derive_seed(17, stream, "footnote"));
        double hits = 0.0;
        for (int i = 0; i < 100000; ++i) hits += gvf::mc_return(oracle.env().mdp, start, f, rng);
        return hits / 100000.0;
    };
    const double pre = survival(d.oracle, gvf::TerminationMode::pre_step, 1);
    const double post = survival(d.oracle, gvf::TerminationMode::post_step, 2);

    auto config = CurriculumConfig::defaults();
    config.set("beta.floor", "0.01");
    const Registry fine = build_standard_curriculum(config);
    Oracle fine_oracle(fine, d.env);
    fine_oracle.solve_through(4);
    const double pre_fine = survival(fine_oracle, gvf::TerminationMode::pre_step, 3);

    const bool ok = std::abs(pre - std::pow(0.9, 6)) <= 0.01 && std::abs(pre_fine - std::pow(0.99, 6)) <= 0.005 &&
                    std::abs(post - std::pow(0.9, 5)) <= 0.01;
    return {ok, "pre " + fmt(pre) + " (0.9^6 = " + fmt(std::pow(0.9, 6)) + "), floor 0.01 pre " + fmt(pre_fine) +
                    " (0.99^6 = " + fmt(std::pow(0.99, 6)) + "), post " + fmt(post) + " (0.9^5 = " +
                    fmt(std::pow(0.9, 5)) + ")"};
}

Result map_shifts() {
    auto& d = demo(9);
    double worst = 0.0;
    for (const char* name : {"TM", "DTAM", "DWM"}) {
        const Ring& ring = d.registry.ring(name);
        auto v = [&](int slot, std::size_t s) { return d.oracle.table(ring.member(slot)).values[s]; };
        for (std::size_t s = 0; s < d.env.size(); ++s) {
            const std::size_t right = d.env.successor(s, Action::rotr), left = d.env.successor(s, Action::rotl);
            for (int i = 1; i <= 6; ++i) worst = std::max(worst, std::abs(v(i, s) - v(i - 1, right)));
            for (int i = 7; i <= 11; ++i) worst = std::max(worst, std::abs(v(i, s) - v(i + 1, left)));
        }
    }
    return {worst <= 1e-9, "max identity gap " + fmt(worst)};
}

Result td_convergence() {
    auto config = CurriculumConfig::defaults();
    const char* budgets[] = {"50000", "50000", "150000", "250000", "500000", "1000000"};
    for (int l = 1; l <= 6; ++l) config.set("budget.layer" + std::to_string(l), budgets[l - 1]);
    auto& d = demo(6);
    const Registry registry = build_standard_curriculum(config);
    Oracle oracle(registry, d.env);
    oracle.solve_through(6);
    // The layer gate is not part of this check: every layer trains on its budget.
    LearningContext ctx(registry, d.env, features::BackendKind::tabular_pose, 2026);
    std::uint64_t steps = 0;
    for (int layer = 1; layer <= 6; ++layer) {
        RngStream rng(derive_seed(2026, static_cast<std::uint64_t>(layer), "behavior"));
        steps += train_layer(ctx, layer, static_cast<std::uint64_t>(config.number("budget.layer" + std::to_string(layer))), rng).steps;
        ctx.mark_verified(layer);
    }
    const auto table = ctx.estimate_table();
    std::size_t pairs = 0, close = 0;
    for (int id : registry.forecasts_through(6)) {
        const auto& dp = oracle.table(id).values;
        for (std::size_t s = 0; s < d.env.size(); ++s) {
            ++pairs;
            if (std::abs(table.states[s].f(id) - dp[s]) <= 0.05) ++close;
        }
    }
    const double frac = static_cast<double>(close) / static_cast<double>(pairs);
    return {frac >= 0.95 && steps == 2'000'000,
            std::to_string(steps) + " steps, " + fmt(100.0 * frac, 5) + "% of " + std::to_string(pairs) +
                " pairs within 0.05"};
}

int cyclic(int a, int b) {
    const int d = ((a - b) % 12 + 12) % 12;
    return std::min(d, 12 - d);
}

Result learned_options() {
    auto& d = demo(8);
    LearningContext ctx(d.registry, d.env, features::BackendKind::tabular_pose, 31);
    ctx.seed_from_oracle(d.oracle, 3);
    ctx.mark_verified(3);
    RngStream rng(derive_seed(31, 4, "options"));
    train_layer(ctx, 4, 0, rng);
    const double rtt = greedy_match(ctx.policies().at(6), d.oracle.learned(6), world::action_count);

    LearningContext ctx8(d.registry, d.env, features::BackendKind::tabular_pose, 32);
    ctx8.seed_from_oracle(d.oracle, 7);
    ctx8.mark_verified(7);
    RngStream rng8(derive_seed(32, 8, "options"));
    train_layer(ctx8, 8, 0, rng8);
    const double mcwp = greedy_match(ctx8.policies().at(14), d.oracle.learned(14), world::action_count);

    // Follow the learned rtt greedily and compare with the fewest rotations to a touching heading.
    const gvf::Policy& policy = ctx.policies().at(6);
    std::size_t wall_adjacent = 0, minimal = 0;
    for (std::size_t s = 0; s < d.env.size(); ++s) {
        const auto& p = d.env.poses[s];
        int best = 99;
        for (int h = 0; h < 12; ++h)
            if (auto t = d.env.find({p.x, p.y, h}); t && d.env.touch[*t]) best = std::min(best, cyclic(h, p.heading));
        if (best == 99) continue;
        ++wall_adjacent;
        std::size_t cur = s;
        int turns = 0;
        while (!d.env.touch[cur] && turns <= 12) {
            const auto dist = policy.distribution(cur);
            const auto a = static_cast<Action>(gvf::greedy_action(dist));
            if (a != Action::rotl && a != Action::rotr) break;
            cur = d.env.successor(cur, a);
            ++turns;
        }
        if (d.env.touch[cur] && turns == best) ++minimal;
    }
    const bool ok = rtt >= 0.95 && mcwp >= 0.95 && minimal == wall_adjacent;
    return {ok, "rtt match " + fmt(rtt) + ", mcwp match " + fmt(mcwp) + ", minimal rotations at " +
                    std::to_string(minimal) + "/" + std::to_string(wall_adjacent) + " wall-adjacent poses"};
}

Result doorway() {
    auto& d = demo(11);
    std::set<std::size_t> annotated;
    for (const auto& p : d.world.annotated("doorway")) annotated.insert(d.env.at(p));
    std::size_t wrong = 0, ones = 0;
    const auto& states = d.oracle.snapshots().states;
    for (std::size_t s = 0; s < states.size(); ++s) {
        const double v = states[s].a(13);
        ones += v == 1.0;
        if (v != (annotated.count(s) ? 1.0 : 0.0)) ++wrong;
    }
    return {wrong == 0 && !annotated.empty(), std::to_string(ones) + " poses with D=1, " +
                                                  std::to_string(annotated.size()) + " annotated, " +
                                                  std::to_string(wrong) + " mismatches"};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Result determinism() {
    const fs::path root = fs::temp_directory_path() / "forecast_forge_acceptance";
    fs::remove_all(root);
    const std::string world = testing::world_path("two_rooms");
    auto cli_run = [](std::vector<std::string> args) {
        std::ostringstream out, err;
        return cli::run(args, out, err);
    };
    for (const char* name : {"a", "b"}) {
        const fs::path dir = root / name;
        cli_run({"train", "--world", world, "--seed", "9", "--through-layer", "3", "--out", dir.string()});
        cli_run({"render", "map", "--world", world, "--params", (dir / "params.txt").string(), "--forecast-ring", "tm",
                 "--pose", "8,8,0", "--out", (dir / "ring.pgm").string()});
    }
    bool same = true;
    for (const char* file : {"report.txt", "params.txt", "ring.pgm"}) {
        const auto a = slurp(root / "a" / file);
        same = same && !a.empty() && a == slurp(root / "b" / file);
    }
    const auto loaded = cli::load_params(root / "a" / "params.txt");
    cli::save_params(root / "resaved.txt", loaded);
    const bool roundtrip = slurp(root / "a" / "params.txt") == slurp(root / "resaved.txt");

    bool refused = false;
    auto& d = demo(3);
    const auto other = world::load_world(testing::world_path("single_room"));
    const auto other_env = world::as_finite_mdp(other, world::RobotParams{});
    try {
        cli::restore_context(loaded, d.registry, other_env, other);
    } catch (const DigestMismatch&) {
        refused = true;
    }
    return {same && roundtrip && refused, std::string("identical outputs ") + (same ? "yes" : "no") +
                                              ", save-load-save " + (roundtrip ? "identical" : "differs") +
                                              ", foreign digest " + (refused ? "refused" : "accepted")};
}

Result full_curriculum() {
    auto& d = demo(11);
    const auto run = run_curriculum(d.registry, d.env, d.oracle, 7, 11, features::BackendKind::tabular_pose);
    double worst = 0.0;
    for (const auto& layer : run.layers) worst = std::max(worst, layer.mean_error());
    const bool aggregate = run.report.find("== aggregate") != std::string::npos;
    return {run.passed && run.completed_layer == 11 && worst <= 0.05 && aggregate,
            "completed layer " + std::to_string(run.completed_layer) + ", worst layer mean_err " + fmt(worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Result()>>> criteria{
        {"series vs exact pre-step solve", series_equivalence},
        {"Monte Carlo vs exact", mc_dp_agreement},
        {"corridor value cap", corridor_cap},
        {"rotation survival probabilities", rotation_survival},
        {"map shift identities", map_shifts},
        {"TD convergence, layers 1-6", td_convergence},
        {"learned options", learned_options},
        {"doorway ground truth", doorway},
        {"determinism and persistence", determinism},
        {"full curriculum", full_curriculum},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = criteria[i].second();
        } catch (const std::exception& e) {
            r = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failures += !r.pass;
        std::cout << "criterion " << i + 1 << " " << (r.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << ": "
                  << r.detail << " [" << fmt(secs, 3) << " s]" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
