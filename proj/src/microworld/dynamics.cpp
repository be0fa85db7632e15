#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <set>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/microworld.hpp"

namespace forecast_forge::world {

namespace {

constexpr double eps = 1e-12;
constexpr double inf = std::numeric_limits<double>::infinity();

Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator*(double k, Vec2 a) { return {k * a.x, k * a.y}; }
double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
double norm(Vec2 a) { return std::sqrt(dot(a, a)); }

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

bool segments_cross(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
    const double d1 = cross(q - p, a - p), d2 = cross(q - p, b - p);
    const double d3 = cross(b - a, p - a), d4 = cross(b - a, q - a);
    return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

double segment_segment_distance(Vec2 p, Vec2 q, Vec2 a, Vec2 b) {
    if (segments_cross(p, q, a, b)) return 0.0;
    return std::min({point_segment_distance(p, a, b), point_segment_distance(q, a, b), point_segment_distance(a, p, q),
                     point_segment_distance(b, p, q)});
}

struct Hit {
    double t = inf;
    Vec2 point;
    Vec2 normal;      // unit, pointing back toward the ray origin side
    double u = 0.0;  // texture coordinate along the barrier surface
};

void ray_segment(Vec2 origin, Vec2 dir, const Segment& s, Hit& best) {
    const Vec2 e = s.b - s.a;
    const double denom = cross(dir, e);
    if (std::abs(denom) < eps) return;
    const Vec2 w = s.a - origin;
    const double t = cross(w, e) / denom;
    const double u = cross(w, dir) / denom;
    if (t < -eps || u < -eps || u > 1.0 + eps) return;
    Vec2 n{-e.y, e.x};
    n = (1.0 / norm(n)) * n;
    if (dot(n, dir) > 0.0) n = -1.0 * n;
    // Corner ties go to the more head-on face.
    if (t < best.t - 1e-9 || (t < best.t + 1e-9 && -dot(n, dir) > -dot(best.normal, dir))) {
        best.t = std::max(t, 0.0);
        best.point = origin + best.t * dir;
        best.normal = n;
        best.u = std::clamp(u, 0.0, 1.0) * norm(e);
    }
}

void ray_circle(Vec2 origin, Vec2 dir, const Circle& c, Hit& best) {
    const Vec2 m = origin - c.center;
    const double b = dot(m, dir);
    const double cc = dot(m, m) - c.radius * c.radius;
    const double disc = b * b - cc;
    if (disc < 0.0) return;
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t < -eps) t = -b + root;
    if (t < -eps) return;
    t = std::max(t, 0.0);
    if (t >= best.t) return;
    const Vec2 p = origin + t * dir;
    Vec2 n = (1.0 / c.radius) * (p - c.center);
    if (dot(n, dir) > 0.0) n = -1.0 * n;
    // Signed angle: the stripe pattern is even, so it mirrors cleanly about
    // the horizontal line through the center.
    const double angle = std::atan2(p.y - c.center.y, p.x - c.center.x);
    best = {t, p, n, c.radius * angle};
}

Hit cast(const WorldSpec& w, Vec2 origin, Vec2 dir) {
    Hit best;
    for (const auto& s : w.segments) ray_segment(origin, dir, s, best);
    for (const auto& c : w.circles) ray_circle(origin, dir, c, best);
    return best;
}

double square_wave(double u, double period) {
    return std::cos(2.0 * std::numbers::pi * u / period) >= -1e-12 ? 1.0 : -1.0;
}

Vec2 center(const Pose& p) { return {static_cast<double>(p.x), static_cast<double>(p.y)}; }

}  // namespace

Vec2 heading_vector(int heading) {
    // Exact values for multiples of 30 degrees, clockwise from +x.
    static constexpr double h3 = 0.86602540378443864676;
    static constexpr std::array<Vec2, heading_count> table{{{1.0, 0.0},
                                                             {h3, -0.5},
                                                             {0.5, -h3},
                                                             {0.0, -1.0},
                                                             {-0.5, -h3},
                                                             {-h3, -0.5},
                                                             {-1.0, 0.0},
                                                             {-h3, 0.5},
                                                             {-0.5, h3},
                                                             {0.0, 1.0},
                                                             {0.5, h3},
                                                             {h3, 0.5}}};
    return table[static_cast<std::size_t>(((heading % heading_count) + heading_count) % heading_count)];
}

std::array<int, 2> step_displacement(int heading, int step_length) {
    const Vec2 d = heading_vector(heading);
    return {static_cast<int>(std::lround(step_length * d.x)), static_cast<int>(std::lround(step_length * d.y))};
}

bool pose_valid(const WorldSpec& w, const RobotParams& params, const Pose& pose) {
    if (!w.in_bounds(pose.x, pose.y)) return false;
    const Vec2 p = center(pose);
    for (const auto& s : w.segments)
        if (point_segment_distance(p, s.a, s.b) < params.radius - eps) return false;
    for (const auto& c : w.circles)
        if (norm(p - c.center) < c.radius + params.radius - eps) return false;
    return true;
}

StepResult step(const WorldSpec& w, const RobotParams& params, const Pose& pose, Action action) {
    StepResult out{pose, {}};
    switch (action) {
        case Action::rotl: out.pose.heading = (pose.heading + heading_count - 1) % heading_count; return out;
        case Action::rotr: out.pose.heading = (pose.heading + 1) % heading_count; return out;
        case Action::ef: out.events.contact = touch_feasible(w, params, pose); return out;
        case Action::rf:
        case Action::rb: break;
    }
    auto [dx, dy] = step_displacement(pose.heading, params.step_length);
    if (action == Action::rb) {
        dx = -dx;
        dy = -dy;
    }
    const Pose target{pose.x + dx, pose.y + dy, pose.heading};
    if (!w.in_bounds(target.x, target.y)) return out;
    const Vec2 from = center(pose), to = center(target);
    for (const auto& s : w.segments)
        if (segment_segment_distance(from, to, s.a, s.b) < params.radius - eps) return out;
    for (const auto& c : w.circles)
        if (point_segment_distance(c.center, from, to) < c.radius + params.radius - eps) return out;
    out.pose = target;
    return out;
}

bool touch_feasible(const WorldSpec& w, const RobotParams& params, const Pose& pose) {
    const Vec2 dir = heading_vector(pose.heading);
    const Hit hit = cast(w, center(pose), dir);
    if (hit.t == inf) return false;
    if (hit.t < params.radius - params.contact_tolerance || hit.t > params.radius + params.finger_reach) return false;
    const double cos_angle = -dot(hit.normal, dir);
    return cos_angle >= std::cos(params.touch_cone_deg * std::numbers::pi / 180.0) - 1e-12;
}

std::vector<double> render_pixels(const WorldSpec& w, const RobotParams& params, const Pose& pose) {
    const int n = params.camera_rays;
    if (n <= 0) throw ArgumentError("camera needs at least one ray");
    std::vector<double> pixels(static_cast<std::size_t>(n));
    const Vec2 origin = center(pose);
    const double base = -30.0 * pose.heading;
    for (int k = 0; k < n; ++k) {
        // Ray 0 is the leftmost; offsets are symmetric about the heading.
        const double offset = params.field_of_view_deg * (0.5 - (k + 0.5) / n);
        const double rad = (base + offset) * std::numbers::pi / 180.0;
        const Vec2 dir{std::cos(rad), std::sin(rad)};
        const Hit hit = cast(w, origin, dir);
        double value;
        if (hit.t <= params.far_distance) {
            value = 0.5 * (1.0 + square_wave(hit.u, 1.0));
        } else {
            const Vec2 p = origin + params.far_distance * dir;
            value = 0.5 * (1.0 + square_wave(p.x, 6.0) * square_wave(p.y, 6.0));
        }
        pixels[static_cast<std::size_t>(k)] = value;
    }
    return pixels;
}

Observation sense(const WorldSpec& w, const RobotParams& params, const Pose& pose, Events prev_events,
                  const PixelPermutation& permutation) {
    return {permutation.apply(render_pixels(w, params, pose)), prev_events.contact};
}

PixelPermutation make_pixel_permutation(std::uint64_t seed, std::size_t n) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    RngStream rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    return PixelPermutation(std::move(order));
}

std::vector<Pose> enumerate_poses(const WorldSpec& w, const RobotParams& params, std::size_t cap) {
    if (!pose_valid(w, params, w.start)) throw ValidationError("start pose is not collision-free", {});
    std::set<Pose> seen{w.start};
    std::deque<Pose> frontier{w.start};
    while (!frontier.empty()) {
        const Pose p = frontier.front();
        frontier.pop_front();
        for (Action a : all_actions) {
            const Pose q = step(w, params, p, a).pose;
            if (seen.insert(q).second) {
                if (seen.size() > cap)
                    throw Error("pose enumeration exceeded the cap of " + std::to_string(cap) + " poses");
                frontier.push_back(q);
            }
        }
    }
    return {seen.begin(), seen.end()};
}

std::optional<std::size_t> PoseMdp::find(const Pose& pose) const {
    if (pose.heading < 0 || pose.heading >= heading_count) return std::nullopt;
    auto it = index.find(pose_key(pose));
    if (it == index.end()) return std::nullopt;
    return it->second;
}

std::size_t PoseMdp::at(const Pose& pose) const {
    auto s = find(pose);
    if (!s)
        throw ArgumentError("pose (" + std::to_string(pose.x) + "," + std::to_string(pose.y) + "," +
                            std::to_string(pose.heading) + ") is not reachable in this world");
    return *s;
}

PoseMdp as_finite_mdp(const WorldSpec& w, const RobotParams& params, std::size_t cap) {
    PoseMdp out;
    out.poses = enumerate_poses(w, params, cap);
    const std::size_t n = out.poses.size();
    out.mdp = gvf::FiniteMdp(n, action_count);
    out.index.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.index.emplace(pose_key(out.poses[i]), i);
    out.start = out.index.at(pose_key(w.start));
    out.next.resize(n * action_count);
    out.touch.resize(n);
    out.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Pose& p = out.poses[i];
        for (Action a : all_actions) {
            const std::size_t j = out.index.at(pose_key(step(w, params, p, a).pose));
            out.next[i * action_count + static_cast<std::size_t>(a)] = static_cast<std::uint32_t>(j);
            out.mdp.set_deterministic(i, static_cast<std::size_t>(a), j);
        }
        out.touch[i] = touch_feasible(w, params, p);
        out.pixels[i] = render_pixels(w, params, p);
    }
    return out;
}

}  // namespace forecast_forge::world
