#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "forecast_forge/cli.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::cli {

namespace {

constexpr int ring_size = 120;
constexpr double ring_radius = 44.0;
constexpr double disc_radius = 9.0;
constexpr std::size_t pgm_line_limit = 70;

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::uint8_t shade(double value, double scale) {
    if (!(scale > 0.0) || std::isnan(value)) return 0;
    return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(value / scale, 0.0, 1.0)));
}

}  // namespace

std::string GrayImage::to_pgm() const {
    if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height)
        throw ArgumentError("image size does not match its pixels");
    std::string out = "P2\n";
    for (const auto& c : comments) out += "# " + c + "\n";
    out += std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    for (int y = 0; y < height; ++y) {
        std::string line;
        for (int x = 0; x < width; ++x) {
            const std::string v = std::to_string(pixels[static_cast<std::size_t>(y) * width + x]);
            if (!line.empty() && line.size() + 1 + v.size() > pgm_line_limit) {
                out += line + "\n";
                line.clear();
            }
            line += (line.empty() ? "" : " ") + v;
        }
        out += line + "\n";
    }
    return out;
}

std::array<double, 12> ring_values(const curriculum::Registry& registry, const curriculum::Ring& ring,
                                   const curriculum::SnapshotTable& values, std::size_t state) {
    if (state >= values.states.size()) throw ArgumentError("state outside the value table");
    std::array<double, 12> out{};
    for (int k = 0; k < 12; ++k) {
        const int id = ring.member(k);
        if (!registry.has_forecast(id)) throw ArgumentError("ring member " + std::to_string(id) + " is unknown");
        out[static_cast<std::size_t>(k)] = values.states[state].f(id);
    }
    return out;
}

RenderedMap render_ring(const std::array<double, 12>& slots, double scale, std::string_view title) {
    RenderedMap out;
    auto& img = out.image;
    img.width = img.height = ring_size;
    img.pixels.assign(static_cast<std::size_t>(ring_size * ring_size), 0);
    img.comments = {std::string(title), "scale " + number(scale)};
    const double c = (ring_size - 1) / 2.0;
    for (int k = 0; k < 12; ++k) {
        // Slot 0 at twelve o'clock, clockwise on screen.
        const double angle = (-90.0 + 30.0 * k) * std::numbers::pi / 180.0;
        const double cx = c + ring_radius * std::cos(angle);
        const double cy = c + ring_radius * std::sin(angle);
        const std::uint8_t v = shade(slots[static_cast<std::size_t>(k)], scale);
        for (int y = 0; y < ring_size; ++y)
            for (int x = 0; x < ring_size; ++x)
                if (std::hypot(x - cx, y - cy) <= disc_radius) img.pixels[static_cast<std::size_t>(y * ring_size + x)] = v;
    }
    out.table = "# " + std::string(title) + "\nslot, value\n";
    for (int k = 0; k < 12; ++k) out.table += std::to_string(k) + ", " + number(slots[static_cast<std::size_t>(k)]) + "\n";
    out.table += "scale " + number(scale) + "\n";
    return out;
}

RenderedMap render_heatmap(const world::PoseMdp& env, const world::WorldSpec& world, const std::vector<double>& values,
                           std::string_view title) {
    if (values.size() != env.size()) throw ArgumentError("heatmap needs one value per pose");
    const int w = world.x1 - world.x0 + 1, h = world.y1 - world.y0 + 1;
    std::vector<double> cell(static_cast<std::size_t>(w * h), 0.0);
    std::vector<bool> seen(cell.size(), false);
    for (std::size_t s = 0; s < env.size(); ++s) {
        const auto& p = env.poses[s];
        const auto i = static_cast<std::size_t>((p.y - world.y0) * w + (p.x - world.x0));
        const double v = std::isnan(values[s]) ? 0.0 : values[s];
        cell[i] = seen[i] ? std::max(cell[i], v) : v;
        seen[i] = true;
    }
    const double scale = cell.empty() ? 0.0 : *std::max_element(cell.begin(), cell.end());
    RenderedMap out;
    auto& img = out.image;
    img.width = w;
    img.height = h;
    img.pixels.resize(cell.size());
    img.comments = {std::string(title), "scale " + number(scale)};
    out.table = "# " + std::string(title) + "\nx, y, value\n";
    for (int row = 0; row < h; ++row) {
        const int y = world.y1 - row;  // top row is the largest y
        for (int x = world.x0; x <= world.x1; ++x) {
            const auto i = static_cast<std::size_t>((y - world.y0) * w + (x - world.x0));
            img.pixels[static_cast<std::size_t>(row * w + (x - world.x0))] = shade(cell[i], scale);
        }
    }
    for (int y = world.y0; y <= world.y1; ++y)
        for (int x = world.x0; x <= world.x1; ++x) {
            const auto i = static_cast<std::size_t>((y - world.y0) * w + (x - world.x0));
            if (seen[i]) out.table += std::to_string(x) + ", " + std::to_string(y) + ", " + number(cell[i]) + "\n";
        }
    out.table += "scale " + number(scale) + "\n";
    return out;
}

}  // namespace forecast_forge::cli
