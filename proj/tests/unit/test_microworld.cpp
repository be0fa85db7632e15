#include <doctest.h>

#include <algorithm>
#include <set>

#include "forecast_forge/errors.hpp"
#include "support.hpp"

using namespace forecast_forge;
using world::Action;
using world::Pose;

namespace {

const world::RobotParams params{};

world::WorldSpec box(int size) {
    const std::string s = std::to_string(size);
    return world::parse_world("BOUNDS 0 0 " + s + " " + s + "\nSEG 0 0 " + s + " 0\nSEG " + s + " 0 " + s + " " + s +
                              "\nSEG " + s + " " + s + " 0 " + s + "\nSEG 0 " + s + " 0 0\nSTART " +
                              std::to_string(size / 2) + " " + std::to_string(size / 2) + " 0\n");
}

// Heading pointing straight at the wall y = 0 (negative y).
constexpr int facing_down = 3;

}  // namespace

TEST_SUITE("microworld") {

TEST_CASE("minimal world parses") {
    const auto w = world::parse_world("# open space\nBOUNDS 0 0 10 10\nSTART 5 5 3\n");
    CHECK(w.segments.empty());
    CHECK(w.circles.empty());
    CHECK(w.start == Pose{5, 5, 3});
    CHECK(world::enumerate_poses(w, params).size() > 12);
}

TEST_CASE("parse errors carry line numbers") {
    try {
        world::parse_world("BOUNDS 0 0 10 10\nSTART 5 5 0\nSEG 1 2 3\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(world::parse_world("BOUNDS 0 0 10 10\nSTART 5 5 0\nWALL 1 1 2 2\n"), ParseError);
    CHECK_THROWS_AS(world::parse_world("BOUNDS 0 0 10 10\n"), ParseError);
    CHECK_THROWS_AS(world::parse_world("START 1 1 0\n"), ParseError);
    CHECK_THROWS_AS(world::parse_world("BOUNDS 0 0 10 10\nSTART 5 5 x\n"), ParseError);
}

TEST_CASE("validation lists every offending line") {
    try {
        world::parse_world("BOUNDS 0 0 10 10\nSTART 5 5 0\nSEG 0 0 20 0\nSEG 3 3 3 3\nCIRC 9 9 4\n");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(e.offenders().size() == 3);
        CHECK(e.offenders()[0].find("line 3") != std::string::npos);
        CHECK(e.offenders()[1].find("line 4") != std::string::npos);
        CHECK(e.offenders()[2].find("line 5") != std::string::npos);
    }
    CHECK_THROWS_AS(world::parse_world("BOUNDS 0 0 10 10\nSEG 5 0 5 10\nSTART 5 5 0\n"), ValidationError);
    CHECK_THROWS_AS(world::parse_world("BOUNDS 0 0 10 10\nSTART 5 5 12\n"), ValidationError);
}

TEST_CASE("serialization round-trips and fixes the digest") {
    const auto w = world::load_world(testing::world_path("two_rooms"));
    const auto again = world::parse_world(world::serialize_world(w));
    CHECK(world::serialize_world(again) == world::serialize_world(w));
    CHECK(world::world_digest(again) == world::world_digest(w));
    CHECK(world::world_digest(w).size() == 16);
    CHECK(world::world_digest(w) != world::world_digest(world::load_world(testing::world_path("single_room"))));
}

TEST_CASE("shipped worlds enumerate to their golden pose counts") {
    CHECK(world::as_finite_mdp(world::load_world(testing::world_path("two_rooms")), params).size() == 5508);
    CHECK(world::as_finite_mdp(world::load_world(testing::world_path("single_room")), params).size() == 2700);
    CHECK(world::as_finite_mdp(world::load_world(testing::world_path("symmetric")), params).size() == 3216);
    CHECK(world::as_finite_mdp(world::load_world(testing::world_path("corridor40")), params).size() == 5412);
}

TEST_CASE("single free cell has only the twelve rotations") {
    const auto w = world::parse_world("BOUNDS 0 0 1 1\nSTART 0 0 0\n");
    world::WorldSpec one = w;
    one.x1 = one.y1 = 0;
    CHECK(world::enumerate_poses(one, params).size() == 12);
}

TEST_CASE("corridor pose counts grow linearly with length") {
    std::vector<std::size_t> counts;
    for (int len : {10, 20, 30, 40}) {
        const std::string l = std::to_string(len);
        const auto w = world::parse_world("BOUNDS 0 0 " + l + " 4\nSEG 0 0 " + l + " 0\nSEG 0 4 " + l + " 4\nSTART 2 2 0\n");
        counts.push_back(world::enumerate_poses(w, params).size());
    }
    for (std::size_t i = 2; i < counts.size(); ++i) CHECK(counts[i] - counts[i - 1] == counts[1] - counts[0]);
}

TEST_CASE("enumeration cap is enforced") {
    CHECK_THROWS_AS(world::enumerate_poses(box(16), params, 100), Error);
}

TEST_CASE("rotations form a cyclic group") {
    const auto w = box(16);
    const Pose p{8, 8, 4};
    Pose q = p;
    for (int i = 0; i < 12; ++i) q = world::step(w, params, q, Action::rotl).pose;
    CHECK(q == p);
    CHECK(world::step(w, params, world::step(w, params, p, Action::rotr).pose, Action::rotl).pose == p);
    CHECK(world::step(w, params, p, Action::rotr).pose.heading == 5);
    CHECK(world::step(w, params, Pose{8, 8, 0}, Action::rotl).pose.heading == 11);
}

TEST_CASE("heading displacements are pairwise distinct exact negatives") {
    std::set<std::array<int, 2>> seen;
    for (int h = 0; h < world::heading_count; ++h) {
        const auto d = world::step_displacement(h, 2);
        const auto opposite = world::step_displacement((h + 6) % 12, 2);
        CHECK(d[0] == -opposite[0]);
        CHECK(d[1] == -opposite[1]);
        seen.insert(d);
    }
    CHECK(seen.size() == 12);
}

TEST_CASE("rf then rb in open space returns to the start") {
    const auto w = box(20);
    for (int h = 0; h < 12; ++h) {
        const Pose p{10, 10, h};
        const Pose moved = world::step(w, params, p, Action::rf).pose;
        CHECK(moved != p);
        CHECK(world::step(w, params, moved, Action::rb).pose == p);
    }
}

TEST_CASE("walls block motion and flush poses can touch") {
    const auto w = box(16);
    const Pose flush{8, 1, facing_down};
    CHECK(world::step(w, params, flush, Action::rf).pose == flush);
    CHECK(world::touch_feasible(w, params, flush));
    const auto ef = world::step(w, params, flush, Action::ef);
    CHECK(ef.pose == flush);
    CHECK(ef.events.contact);
    // 30 degrees off the wall normal is outside the 10 degree cone.
    CHECK_FALSE(world::touch_feasible(w, params, Pose{8, 1, facing_down + 1}));
    CHECK_FALSE(world::touch_feasible(w, params, Pose{8, 8, facing_down}));
    CHECK_FALSE(world::step(w, params, Pose{8, 8, facing_down}, Action::ef).events.contact);
}

TEST_CASE("reachable poses never penetrate barriers and ef reports touch") {
    const auto w = world::load_world(testing::world_path("two_rooms"));
    const auto env = world::as_finite_mdp(w, params);
    for (std::size_t s = 0; s < env.size(); ++s) {
        const Pose& p = env.poses[s];
        REQUIRE(world::pose_valid(w, params, p));
        const bool touch = world::touch_feasible(w, params, p);
        CHECK(world::step(w, params, p, Action::ef).events.contact == touch);
        CHECK(static_cast<bool>(env.touch[s]) == touch);
    }
}

TEST_CASE("pose MDP rows are deterministic and rotations cycle headings") {
    const auto w = world::load_world(testing::world_path("single_room"));
    const auto env = world::as_finite_mdp(w, params);
    CHECK_NOTHROW(env.mdp.validate());
    for (std::size_t s = 0; s < env.size(); ++s) {
        for (std::size_t a = 0; a < world::action_count; ++a) {
            const auto row = env.mdp.successors(s, a);
            REQUIRE(row.size() == 1);
            CHECK(row[0].probability == 1.0);
            CHECK(row[0].state == env.successor(s, static_cast<Action>(a)));
        }
        const Pose& p = env.poses[s];
        const Pose& l = env.poses[env.successor(s, Action::rotl)];
        CHECK(l.x == p.x);
        CHECK(l.y == p.y);
        CHECK(l.heading == (p.heading + 11) % 12);
        const Pose& f = env.poses[env.successor(s, Action::rf)];
        if (f == p) CHECK(world::step(w, params, p, Action::rf).pose == p);
    }
    CHECK(env.poses[env.start] == w.start);
    CHECK_FALSE(env.find(Pose{-5, -5, 0}).has_value());
    CHECK_THROWS_AS(env.at(Pose{-5, -5, 0}), ArgumentError);
}

TEST_CASE("camera pixels are deterministic and lie in the unit interval") {
    const auto w = world::load_world(testing::world_path("two_rooms"));
    const auto a = world::render_pixels(w, params, Pose{8, 8, 2});
    const auto b = world::render_pixels(w, params, Pose{8, 8, 2});
    CHECK(a == b);
    CHECK(a.size() == 32);
    for (double v : a) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("mirrored poses see reversed pixels") {
    // symmetric.world is mirror-symmetric about y = 9; heading h mirrors to -h.
    const auto w = world::load_world(testing::world_path("symmetric"));
    for (const Pose p : {Pose{6, 9, 1}, Pose{4, 7, 2}, Pose{9, 5, 11}, Pose{3, 12, 4}}) {
        const Pose m{p.x, 18 - p.y, (12 - p.heading) % 12};
        auto a = world::render_pixels(w, params, p);
        const auto b = world::render_pixels(w, params, m);
        std::reverse(a.begin(), a.end());
        CHECK(a == b);
    }
}

TEST_CASE("contact and one step back look different") {
    const auto w = box(16);
    const auto touching = world::render_pixels(w, params, Pose{8, 1, facing_down});
    const auto back = world::render_pixels(w, params, Pose{8, 3, facing_down});
    CHECK(touching != back);
}

TEST_CASE("sense permutes pixels and latches the previous contact") {
    const auto w = box(16);
    const auto perm = world::make_pixel_permutation(99, 32);
    const auto raw = world::render_pixels(w, params, Pose{5, 5, 0});
    const auto obs = world::sense(w, params, Pose{5, 5, 0}, {true}, perm);
    CHECK(obs.touch);
    CHECK_FALSE(world::sense(w, params, Pose{5, 5, 0}, {false}, perm).touch);
    for (std::size_t i = 0; i < 32; ++i) CHECK(obs.pixels[i] == raw[perm.order()[i]]);
}

TEST_CASE("pixel permutations are seeded bijections") {
    CHECK(world::make_pixel_permutation(5, 1).order()[0] == 0);
    const auto p = world::make_pixel_permutation(7, 32);
    const auto q = world::make_pixel_permutation(7, 32);
    CHECK(std::equal(p.order().begin(), p.order().end(), q.order().begin(), q.order().end()));
    std::vector<std::size_t> sorted(p.order().begin(), p.order().end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 32; ++i) CHECK(sorted[i] == i);
    std::vector<std::size_t> inverse(32);
    for (std::size_t i = 0; i < 32; ++i) inverse[p.order()[i]] = i;
    const world::PixelPermutation inv(inverse);
    std::vector<double> x(32);
    for (std::size_t i = 0; i < 32; ++i) x[i] = static_cast<double>(i);
    CHECK(inv.apply(p.apply(x)) == x);
    CHECK_THROWS_AS(p.apply(std::vector<double>(3)), ArgumentError);
}

TEST_CASE("action names round-trip") {
    for (Action a : world::all_actions) CHECK(world::parse_action(world::to_string(a)) == a);
    CHECK_THROWS_AS(world::parse_action("jump"), ArgumentError);
}

}  // TEST_SUITE
