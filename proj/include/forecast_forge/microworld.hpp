#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "forecast_forge/gvf_core.hpp"

namespace forecast_forge::world {

inline constexpr int heading_count = 12;
inline constexpr int action_count = 5;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

struct Segment {
    Vec2 a;
    Vec2 b;
};

struct Circle {
    Vec2 center;
    double radius = 0.0;
};

/// Lattice position plus one of twelve headings. Heading h points
/// 30*h degrees clockwise from +x; rotr increments it, rotl decrements it.
struct Pose {
    int x = 0;
    int y = 0;
    int heading = 0;
    auto operator<=>(const Pose&) const = default;
};

enum class Action : std::uint8_t { rf = 0, rb = 1, rotl = 2, rotr = 3, ef = 4 };

inline constexpr std::array<Action, action_count> all_actions{Action::rf, Action::rb, Action::rotl,
                                                              Action::rotr, Action::ef};

std::string_view to_string(Action action);
Action parse_action(std::string_view text);

struct Annotation {
    std::string name;
    Pose pose;
};

/// Parsed world file. Bounds limit the lattice; they are not barriers.
struct WorldSpec {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    std::vector<Segment> segments;
    std::vector<Circle> circles;
    Pose start;
    std::vector<Annotation> annotations;
    // Source line of each entity, for validation messages.
    std::vector<int> segment_lines;
    std::vector<int> circle_lines;
    std::vector<int> annotation_lines;
    int start_line = 0;

    bool in_bounds(int x, int y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    std::vector<Pose> annotated(std::string_view name) const;
};

struct RobotParams {
    double radius = 0.9;
    int step_length = 2;
    int camera_rays = 32;
    double field_of_view_deg = 30.0;
    double far_distance = 8.0;
    double touch_cone_deg = 10.0;
    double finger_reach = 1.2;
    double contact_tolerance = 0.25;
};

struct Events {
    bool contact = false;
};

struct StepResult {
    Pose pose;
    Events events;
};

struct Observation {
    std::vector<double> pixels;
    bool touch = false;
};

/// Fixed shuffle applied to camera pixels before they reach a learner.
class PixelPermutation {
public:
    PixelPermutation() = default;
    explicit PixelPermutation(std::vector<std::size_t> order) : order_(std::move(order)) {}
    std::size_t size() const noexcept { return order_.size(); }
    std::span<const std::size_t> order() const noexcept { return order_; }
    std::vector<double> apply(std::span<const double> pixels) const;

private:
    std::vector<std::size_t> order_;
};

WorldSpec parse_world(std::string_view text);
WorldSpec load_world(const std::filesystem::path& path);
std::string serialize_world(const WorldSpec& world);
/// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string world_digest(const WorldSpec& world);

Vec2 heading_vector(int heading);
std::array<int, 2> step_displacement(int heading, int step_length);

bool pose_valid(const WorldSpec& world, const RobotParams& params, const Pose& pose);
StepResult step(const WorldSpec& world, const RobotParams& params, const Pose& pose, Action action);
bool touch_feasible(const WorldSpec& world, const RobotParams& params, const Pose& pose);

std::vector<double> render_pixels(const WorldSpec& world, const RobotParams& params, const Pose& pose);
Observation sense(const WorldSpec& world, const RobotParams& params, const Pose& pose, Events prev_events,
                  const PixelPermutation& permutation);
PixelPermutation make_pixel_permutation(std::uint64_t seed, std::size_t n);

/// Poses reachable from the start pose, sorted by (x, y, heading).
std::vector<Pose> enumerate_poses(const WorldSpec& world, const RobotParams& params, std::size_t cap = 5'000'000);

std::uint64_t pose_key(const Pose& pose);

/// Finite MDP over reachable poses with per-state annotations.
struct PoseMdp {
    gvf::FiniteMdp mdp{0, action_count};
    std::vector<Pose> poses;
    std::vector<std::uint8_t> touch;
    std::vector<std::vector<double>> pixels;
    std::vector<std::uint32_t> next;  // state * action_count + action
    std::unordered_map<std::uint64_t, std::size_t> index;
    std::size_t start = 0;

    std::size_t size() const noexcept { return poses.size(); }
    std::size_t successor(std::size_t state, Action action) const {
        return next[state * action_count + static_cast<std::size_t>(action)];
    }
    std::optional<std::size_t> find(const Pose& pose) const;
    std::size_t at(const Pose& pose) const;
};

PoseMdp as_finite_mdp(const WorldSpec& world, const RobotParams& params, std::size_t cap = 5'000'000);

}  // namespace forecast_forge::world
