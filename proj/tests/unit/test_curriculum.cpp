#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "forecast_forge/errors.hpp"
#include "support.hpp"

using namespace forecast_forge;
using namespace forecast_forge::curriculum;
using world::Action;

namespace {

Snapshot blank(const Registry& registry) {
    Snapshot s = registry.empty_snapshot();
    std::fill(s.forecast.begin(), s.forecast.end(), 0.0);
    return s;
}

const Registry& standard() {
    static const Registry registry = build_standard_curriculum(CurriculumConfig::defaults());
    return registry;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("curriculum") {

TEST_CASE("standard registry has the indexed entities") {
    const Registry& r = standard();
    int forecasts = 0, options = 0, aliases = 0;
    for (int id = 1; id <= 60; ++id) {
        forecasts += r.has_forecast(id);
        options += r.has_option(id);
        aliases += r.has_alias(id);
    }
    CHECK(forecasts == 47);
    CHECK(options == 18);
    CHECK(aliases == 13);
    CHECK(r.max_layer() == 11);
    CHECK(r.forecast(1).abbrev == "T");
    CHECK(r.forecast(15).abbrev == "TA");
    CHECK(r.forecast(47).abbrev == "DR");
    CHECK(r.option(6).abbrev == "rtt");
    CHECK(r.alias(13).abbrev == "D");
    for (int id = 1; id <= 5; ++id) {
        CHECK(r.option(id).policy == PolicyKind::primitive);
        CHECK(r.option(id).action == static_cast<Action>(id - 1));
    }
}

TEST_CASE("rings hold eleven members and resolve slots 0 and 12 to the base") {
    const Registry& r = standard();
    const std::vector<std::tuple<std::string, int, int>> rings{{"TM", 1, 4}, {"DTAM", 16, 18}, {"DWM", 35, 36}};
    for (const auto& [name, base, first] : rings) {
        const Ring& ring = r.ring(name);
        CHECK(ring.base == base);
        CHECK(ring.member(0) == base);
        CHECK(ring.member(12) == base);
        for (int k = 1; k <= 11; ++k) CHECK(ring.member(k) == first + k - 1);
    }
    CHECK_THROWS_AS(r.ring("XX"), ArgumentError);
    CHECK_THROWS_AS(r.ring("TM").member(13), ArgumentError);
}

TEST_CASE("every reference points to an earlier entity") {
    const Registry& r = standard();
    std::map<Ref, std::size_t> position;
    for (std::size_t i = 0; i < r.order().size(); ++i) position[r.order()[i]] = i;
    for (int id = 1; id <= 5; ++id) position[{RefKind::option, id}] = 0;
    auto check_refs = [&](Ref self, const std::vector<Ref>& refs) {
        for (const Ref& dep : refs) {
            if (dep.kind == RefKind::option && dep.id <= 5) continue;
            REQUIRE(position.count(dep));
            CHECK(position.at(dep) < position.at(self));
            CHECK(r.layer_of(dep) <= r.layer_of(self));
        }
    };
    for (int id : r.forecasts_through(11)) check_refs({RefKind::forecast, id}, r.forecast(id).refs);
    for (int id : r.options_through(11)) check_refs({RefKind::option, id}, r.option(id).refs);
    for (int id : r.aliases_through(11)) check_refs({RefKind::alias, id}, r.alias(id).refs);
}

TEST_CASE("deleting TA reports its dependents") {
    const auto config = CurriculumConfig::defaults();
    Entities entities = standard_entities(config);
    entities.remove({RefKind::forecast, 15});
    try {
        Registry::assemble(entities, config);
        FAIL("assembly should fail");
    } catch (const CurriculumError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("option 7;") != std::string::npos);
        CHECK(msg.find("option 8;") != std::string::npos);
        CHECK(msg.find("forecast 16;") != std::string::npos);
    }
}

TEST_CASE("a missing threshold names its owner") {
    auto config = CurriculumConfig::defaults();
    config.erase("theta.wlr.1");
    CHECK_THROWS_AS(build_standard_curriculum(config), ConfigurationError);
}

TEST_CASE("alias arithmetic") {
    const Registry& r = standard();
    const Ring& dwm = r.ring("DWM");
    Snapshot s = blank(r);

    s.forecast[29] = 0.8;
    CHECK(evaluate_alias(r, 1, s) == 1.0);
    s.forecast[29] = 0.2;
    CHECK(evaluate_alias(r, 1, s) == 0.0);

    s.forecast[static_cast<std::size_t>(dwm.member(3))] = 4.0;
    s.forecast[static_cast<std::size_t>(dwm.member(9))] = 6.0;
    CHECK(evaluate_alias(r, 3, s) == 10.0);
    s.forecast[static_cast<std::size_t>(dwm.member(0))] = 2.5;
    s.forecast[static_cast<std::size_t>(dwm.member(6))] = 3.5;
    CHECK(evaluate_alias(r, 4, s) == 6.0);
    CHECK(evaluate_alias(r, 10, s) == 60.0);

    Snapshot missing = r.empty_snapshot();
    CHECK_THROWS_AS(evaluate_alias(r, 1, missing), CurriculumError);
    CHECK_THROWS(evaluate_alias(r, 14, s));
}

TEST_CASE("RA does not decrease as either free space grows") {
    const Registry& r = standard();
    const Ring& dwm = r.ring("DWM");
    RngStream rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        Snapshot s = blank(r);
        for (int k = 0; k < 12; ++k) s.forecast[static_cast<std::size_t>(dwm.member(k))] = 10.0 * rng.uniform();
        const double before = evaluate_alias(r, 10, s);
        const int slot = std::array<int, 4>{0, 3, 6, 9}[rng.below(4)];
        s.forecast[static_cast<std::size_t>(dwm.member(slot))] += 5.0 * rng.uniform();
        CHECK(evaluate_alias(r, 10, s) >= before);
    }
}

TEST_CASE("config text parsing and defaults") {
    const auto c = CurriculumConfig::parse("# comment\n a.b = 3 \n\nname=rftt\n");
    CHECK(c.number("a.b") == 3.0);
    CHECK(c.text("name", "") == "rftt");
    CHECK(c.text("other", "x") == "x");
    CHECK_FALSE(c.has("other"));
    CHECK_THROWS_AS(c.number("other", "someone"), ConfigurationError);
    CHECK_THROWS_AS(CurriculumConfig::parse("no equals sign\n"), ParseError);
    CHECK(CurriculumConfig::parse(c.serialize()).entries() == c.entries());

    const auto merged = CurriculumConfig::with_defaults(CurriculumConfig::parse("theta.r.1=5\n"));
    CHECK(merged.number("theta.r.1") == 5.0);
    CHECK(merged.number("beta.floor") == 0.1);
    CHECK(merged.text("termination.default", "") == "post_step");
}

TEST_CASE("shipped config file matches the built-in defaults") {
    const auto shipped = CurriculumConfig::load(std::string(FORECAST_FORGE_DATA_DIR) + "/curriculum.cfg");
    CHECK(shipped.entries() == CurriculumConfig::defaults().entries());
    CHECK_FALSE(read_file(std::string(FORECAST_FORGE_DATA_DIR) + "/curriculum.cfg").empty());
}

TEST_CASE("map shift identities hold on exact tables") {
    auto& demo = testing::Demo::two_rooms(9);
    const auto& env = demo.env;
    for (const char* name : {"TM", "DTAM", "DWM"}) {
        const Ring& ring = demo.registry.ring(name);
        auto v = [&](int slot, std::size_t s) { return demo.oracle.table(ring.member(slot)).values[s]; };
        double worst = 0.0;
        for (std::size_t s = 0; s < env.size(); ++s) {
            const std::size_t right = env.successor(s, Action::rotr);
            const std::size_t left = env.successor(s, Action::rotl);
            for (int i = 1; i <= 6; ++i) worst = std::max(worst, std::abs(v(i, s) - v(i - 1, right)));
            for (int i = 7; i <= 11; ++i) worst = std::max(worst, std::abs(v(i, s) - v(i + 1, left)));
        }
        INFO(name);
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("exact values respect their kind's range") {
    auto& demo = testing::Demo::two_rooms(11);
    const double cap = 1.0 / demo.registry.beta_floor();
    for (int id : demo.registry.forecasts_through(11)) {
        const auto& values = demo.oracle.table(id).values;
        const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
        INFO(demo.registry.forecast(id).abbrev);
        CHECK(*lo >= -1e-12);
        switch (demo.registry.forecast(id).kind) {
            case ValueKind::probability: CHECK(*hi <= 1.0 + 1e-12); break;
            case ValueKind::count: CHECK(*hi <= cap + 1e-9); break;
            case ValueKind::raw: break;
        }
    }
}

TEST_CASE("boolean aliases emit only 0 and 1 on exact estimates") {
    auto& demo = testing::Demo::two_rooms(11);
    for (const auto& snap : demo.oracle.snapshots().states)
        for (int id : demo.registry.aliases_through(11)) {
            if (!demo.registry.alias(id).boolean) continue;
            const double a = snap.a(id);
            CHECK((a == 0.0 || a == 1.0));
        }
}

TEST_CASE("doorway alias matches the annotated poses") {
    auto& demo = testing::Demo::two_rooms(11);
    std::set<std::size_t> doorway;
    for (const auto& p : demo.world.annotated("doorway")) doorway.insert(demo.env.at(p));
    REQUIRE_FALSE(doorway.empty());
    std::size_t mismatches = 0;
    const auto& states = demo.oracle.snapshots().states;
    for (std::size_t s = 0; s < states.size(); ++s) {
        const double d = states[s].a(13);
        if (d != (doorway.count(s) ? 1.0 : 0.0)) ++mismatches;
        CHECK(d == evaluate_alias(demo.registry, 13, states[s]));
    }
    CHECK(mismatches == 0);
}

TEST_CASE("DTA decreases along unblocked forward rolls that end in termination") {
    auto& demo = testing::Demo::two_rooms(5);
    const auto& dta = demo.oracle.table(16).values;
    auto terminates = [&](std::size_t s) {
        for (int k = 0; k < 100; ++k) {
            if (dta[s] == 0.0) return true;
            const std::size_t next = demo.env.successor(s, Action::rf);
            if (next == s) return false;
            s = next;
        }
        return false;
    };
    std::size_t chains = 0;
    for (std::size_t s = 0; s < demo.env.size(); ++s) {
        const std::size_t next = demo.env.successor(s, Action::rf);
        if (next == s || dta[s] == 0.0 || !terminates(s)) continue;
        ++chains;
        CHECK(dta[s] > dta[next]);
    }
    CHECK(chains > 1000);
}

TEST_CASE("wall forecasts are immediate where the robot faces a touchable wall") {
    auto& demo = testing::Demo::two_rooms(7);
    const double theta = demo.registry.config().number("theta.wall.3");
    std::size_t blocked = 0;
    for (std::size_t s = 0; s < demo.env.size(); ++s) {
        if (demo.oracle.table(15).values[s] <= theta) continue;
        ++blocked;
        CHECK(demo.oracle.table(29).values[s] == 0.0);
        CHECK(demo.oracle.table(30).values[s] == 0.0);
    }
    CHECK(blocked > 0);
}

TEST_CASE("zero budget leaves parameters untouched") {
    auto& demo = testing::Demo::two_rooms(1);
    LearningContext ctx(demo.registry, demo.env, features::BackendKind::tabular_pose, 3);
    RngStream rng(3);
    const auto stats = train_layer(ctx, 1, 0, rng);
    CHECK(stats.steps == 0);
    const auto table = ctx.estimate_table();
    for (const auto& snap : table.states) CHECK(snap.f(1) == 0.0);
    CHECK(ctx.position == demo.env.start);
}

TEST_CASE("layer 1 learns touch") {
    auto& demo = testing::Demo::two_rooms(1);
    auto train = [&](std::uint64_t steps) {
        LearningContext ctx(demo.registry, demo.env, features::BackendKind::tabular_pose, 11);
        RngStream rng(derive_seed(11, 1, "behavior"));
        train_layer(ctx, 1, steps, rng);
        const auto report = verify_layer(ctx, demo.oracle, 1, 0.01);
        REQUIRE(report.forecasts.size() == 1);
        return report.forecasts[0];
    };
    // A uniform walk of 1e5 steps misses ef at a few touch poses.
    const auto short_run = train(100'000);
    CHECK(short_run.mean_err <= 0.01);
    CHECK(short_run.frac_within_tol >= 0.99);
    CHECK(train(400'000).max_err <= 0.01);
}

TEST_CASE("TL is updated once per executed rotl") {
    auto& demo = testing::Demo::two_rooms(2);
    LearningContext ctx(demo.registry, demo.env, features::BackendKind::tabular_pose, 5);
    ctx.seed_from_oracle(demo.oracle, 1);
    ctx.mark_verified(1);
    RngStream rng(5);
    const auto stats = train_layer(ctx, 2, 20'000, rng);
    CHECK(stats.steps == 20'000);
    std::uint64_t total = 0;
    for (auto n : stats.actions) total += n;
    CHECK(total == stats.steps);
    CHECK(stats.applied_updates.at(2) == stats.actions[static_cast<std::size_t>(Action::rotl)]);
    CHECK(stats.applied_updates.at(3) == stats.actions[static_cast<std::size_t>(Action::rotr)]);
    CHECK(stats.applied_updates.at(1) == stats.actions[static_cast<std::size_t>(Action::ef)]);
}

TEST_CASE("training refuses a layer whose prerequisites are unverified") {
    auto& demo = testing::Demo::two_rooms(2);
    LearningContext ctx(demo.registry, demo.env, features::BackendKind::tabular_pose, 1);
    RngStream rng(1);
    CHECK_THROWS_AS(train_layer(ctx, 3, 10, rng), GateFailure);
    CHECK_THROWS_AS(train_layer(ctx, 12, 10, rng), ArgumentError);
}

TEST_CASE("verification of seeded and untrained tables") {
    auto& demo = testing::Demo::two_rooms(4);
    const double tol = 1e-10;
    LearningContext seeded(demo.registry, demo.env, features::BackendKind::tabular_pose, 1);
    seeded.seed_from_oracle(demo.oracle, 4);
    const auto good = verify_layer(seeded, demo.oracle, 4, tol, false);
    CHECK(good.forecasts.size() == 15);
    for (const auto& f : good.forecasts) {
        CHECK(f.max_err <= 2 * tol);
        CHECK(f.frac_within_tol == 1.0);
    }
    for (const auto& o : good.options) CHECK(o.greedy_match == 1.0);
    CHECK(good.offenders(tol).empty());

    LearningContext fresh(demo.registry, demo.env, features::BackendKind::tabular_pose, 1);
    fresh.activate_through(4);
    const auto bad = verify_layer(fresh, demo.oracle, 3, tol);
    for (const auto& f : bad.forecasts) {
        const auto& values = demo.oracle.table(f.id).values;
        double max = 0.0, sum = 0.0;
        for (double v : values) {
            max = std::max(max, std::abs(v));
            sum += std::abs(v);
        }
        CHECK(f.max_err == doctest::Approx(max).epsilon(1e-12));
        CHECK(f.mean_err == doctest::Approx(sum / static_cast<double>(values.size())).epsilon(1e-12));
    }
    CHECK_FALSE(bad.offenders(tol).empty());
    CHECK(bad.to_text().find("TM") != std::string::npos);
}

TEST_CASE("oracle-mode run passes every layer") {
    auto& demo = testing::Demo::two_rooms(11);
    const auto run = run_curriculum(demo.registry, demo.env, demo.oracle, 4, 11, features::BackendKind::tabular_pose,
                                    RunMode::oracle);
    CHECK(run.passed);
    CHECK(run.completed_layer == 11);
    CHECK(run.layers.size() == 11);
    CHECK(run.report.find("aggregate") != std::string::npos);
    CHECK(run.report.find("FAILED") == std::string::npos);
}

TEST_CASE("learned runs are reproducible") {
    auto& demo = testing::Demo::two_rooms(2);
    auto once = [&] {
        return run_curriculum(demo.registry, demo.env, demo.oracle, 17, 2, features::BackendKind::tabular_pose)
            .report;
    };
    const std::string a = once();
    CHECK(a == once());
    CHECK(a.find("layer 2") != std::string::npos);
}

}  // TEST_SUITE
