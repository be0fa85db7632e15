#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/microworld.hpp"

namespace forecast_forge::world {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream in(line);
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

template <typename T>
T parse_number(const std::string& tok, int line) {
    T value{};
    const char* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ParseError("expected a number, got '" + tok + "'", line);
    return value;
}

void expect_args(const std::vector<std::string>& toks, std::size_t n, int line) {
    if (toks.size() != n + 1)
        throw ParseError(toks[0] + " takes " + std::to_string(n) + " arguments, got " + std::to_string(toks.size() - 1),
                         line);
}

std::string fmt(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string pose_text(const Pose& p) {
    return std::to_string(p.x) + " " + std::to_string(p.y) + " " + std::to_string(p.heading);
}

}  // namespace

std::string_view to_string(Action action) {
    switch (action) {
        case Action::rf: return "rf";
        case Action::rb: return "rb";
        case Action::rotl: return "rotl";
        case Action::rotr: return "rotr";
        case Action::ef: return "ef";
    }
    return "rf";
}

Action parse_action(std::string_view text) {
    for (Action a : all_actions)
        if (to_string(a) == text) return a;
    throw ArgumentError("unknown action '" + std::string(text) + "'");
}

std::vector<Pose> WorldSpec::annotated(std::string_view name) const {
    std::vector<Pose> out;
    for (const auto& a : annotations)
        if (a.name == name) out.push_back(a.pose);
    return out;
}

std::vector<double> PixelPermutation::apply(std::span<const double> pixels) const {
    if (order_.empty()) return {pixels.begin(), pixels.end()};
    if (order_.size() != pixels.size()) throw ArgumentError("pixel permutation size does not match the camera");
    std::vector<double> out(pixels.size());
    for (std::size_t i = 0; i < order_.size(); ++i) out[i] = pixels[order_[i]];
    return out;
}

WorldSpec parse_world(std::string_view text) {
    WorldSpec w;
    bool have_bounds = false, have_start = false;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        auto toks = tokenize(raw);
        if (toks.empty()) continue;
        const std::string& kw = toks[0];
        if (kw == "BOUNDS") {
            expect_args(toks, 4, line);
            if (have_bounds) throw ParseError("duplicate BOUNDS", line);
            have_bounds = true;
            w.x0 = parse_number<int>(toks[1], line);
            w.y0 = parse_number<int>(toks[2], line);
            w.x1 = parse_number<int>(toks[3], line);
            w.y1 = parse_number<int>(toks[4], line);
        } else if (kw == "SEG") {
            expect_args(toks, 4, line);
            w.segments.push_back({{parse_number<double>(toks[1], line), parse_number<double>(toks[2], line)},
                                  {parse_number<double>(toks[3], line), parse_number<double>(toks[4], line)}});
            w.segment_lines.push_back(line);
        } else if (kw == "CIRC") {
            expect_args(toks, 3, line);
            w.circles.push_back({{parse_number<double>(toks[1], line), parse_number<double>(toks[2], line)},
                                 parse_number<double>(toks[3], line)});
            w.circle_lines.push_back(line);
        } else if (kw == "START") {
            expect_args(toks, 3, line);
            if (have_start) throw ParseError("duplicate START", line);
            have_start = true;
            w.start = {parse_number<int>(toks[1], line), parse_number<int>(toks[2], line),
                       parse_number<int>(toks[3], line)};
            w.start_line = line;
        } else if (kw == "ANNOT") {
            expect_args(toks, 4, line);
            w.annotations.push_back({toks[1],
                                     {parse_number<int>(toks[2], line), parse_number<int>(toks[3], line),
                                      parse_number<int>(toks[4], line)}});
            w.annotation_lines.push_back(line);
        } else {
            throw ParseError("unknown directive '" + kw + "'", line);
        }
    }
    if (!have_bounds) throw ParseError("missing BOUNDS", 0);
    if (!have_start) throw ParseError("missing START", 0);

    std::vector<std::string> bad;
    auto inside = [&](double x, double y) { return x >= w.x0 && x <= w.x1 && y >= w.y0 && y <= w.y1; };
    if (w.x0 >= w.x1 || w.y0 >= w.y1) bad.push_back("BOUNDS: empty rectangle");
    for (std::size_t i = 0; i < w.segments.size(); ++i) {
        const auto& s = w.segments[i];
        const std::string where = "line " + std::to_string(w.segment_lines[i]) + ": SEG ";
        if (!inside(s.a.x, s.a.y) || !inside(s.b.x, s.b.y)) bad.push_back(where + "outside bounds");
        if (s.a.x == s.b.x && s.a.y == s.b.y) bad.push_back(where + "has zero length");
    }
    for (std::size_t i = 0; i < w.circles.size(); ++i) {
        const auto& c = w.circles[i];
        const std::string where = "line " + std::to_string(w.circle_lines[i]) + ": CIRC ";
        if (!(c.radius > 0.0)) bad.push_back(where + "has non-positive radius");
        else if (!inside(c.center.x - c.radius, c.center.y - c.radius) ||
                 !inside(c.center.x + c.radius, c.center.y + c.radius))
            bad.push_back(where + "outside bounds");
    }
    const RobotParams defaults;
    auto check_pose = [&](const Pose& p, const std::string& where) {
        if (p.heading < 0 || p.heading >= heading_count) bad.push_back(where + "heading out of range");
        else if (!w.in_bounds(p.x, p.y)) bad.push_back(where + "outside bounds");
        else if (!pose_valid(w, defaults, p)) bad.push_back(where + "collides with a barrier");
    };
    if (bad.empty()) {
        check_pose(w.start, "line " + std::to_string(w.start_line) + ": START ");
        for (std::size_t i = 0; i < w.annotations.size(); ++i)
            check_pose(w.annotations[i].pose,
                       "line " + std::to_string(w.annotation_lines[i]) + ": ANNOT " + w.annotations[i].name + " ");
    }
    if (!bad.empty()) throw ValidationError("world failed validation:", bad);
    return w;
}

WorldSpec load_world(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open world file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_world(buf.str());
}

std::string serialize_world(const WorldSpec& w) {
    std::string out = "BOUNDS " + std::to_string(w.x0) + " " + std::to_string(w.y0) + " " + std::to_string(w.x1) +
                      " " + std::to_string(w.y1) + "\n";
    for (const auto& s : w.segments)
        out += "SEG " + fmt(s.a.x) + " " + fmt(s.a.y) + " " + fmt(s.b.x) + " " + fmt(s.b.y) + "\n";
    for (const auto& c : w.circles)
        out += "CIRC " + fmt(c.center.x) + " " + fmt(c.center.y) + " " + fmt(c.radius) + "\n";
    out += "START " + pose_text(w.start) + "\n";
    for (const auto& a : w.annotations) out += "ANNOT " + a.name + " " + pose_text(a.pose) + "\n";
    return out;
}

std::string world_digest(const WorldSpec& w) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_world(w)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::uint64_t pose_key(const Pose& p) {
    constexpr int offset = 1 << 23;
    if (p.x <= -offset || p.x >= offset || p.y <= -offset || p.y >= offset || p.heading < 0 ||
        p.heading >= heading_count)
        throw ArgumentError("pose out of the representable range");
    return (static_cast<std::uint64_t>(p.x + offset) << 28) | (static_cast<std::uint64_t>(p.y + offset) << 4) |
           static_cast<std::uint64_t>(p.heading);
}

}  // namespace forecast_forge::world
