#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/microworld.hpp"

namespace forecast_forge::cli {

/// Worker cap from FORECAST_FORGE_THREADS (unset or 0: hardware count).
std::size_t worker_threads();

/// Parses "x,y,h".
world::Pose parse_pose(std::string_view text);

// ---------------------------------------------------------------------------
// Parameter files

/// Learned state of a run in plain text: header, config, per-forecast
/// parameters and option policies.
struct ParamsFile {
    std::string world_digest;
    features::BackendKind backend = features::BackendKind::tabular_pose;
    std::uint64_t seed = 0;
    int through_layer = 0;   // layers whose parameters are stored
    int verified_layer = 0;
    curriculum::CurriculumConfig config;
    std::map<int, ValueKind> kinds;
    std::map<int, std::vector<std::pair<std::uint64_t, double>>> tables;       // tabular entries
    std::map<int, std::pair<std::vector<double>, double>> linear;            // weights, bias
    std::map<int, std::vector<double>> policies;                              // state-major rows
    std::size_t policy_states = 0;
};

ParamsFile capture_params(const curriculum::LearningContext& context, const world::WorldSpec& world,
                          int through_layer);
std::string serialize_params(const ParamsFile& params);
ParamsFile parse_params(std::string_view text);
void save_params(const std::filesystem::path& path, const ParamsFile& params);
ParamsFile load_params(const std::filesystem::path& path);

/// Rebuilds a learning context from saved parameters. Throws
/// DigestMismatch when the file was written for another world, unless
/// `force` is set.
std::unique_ptr<curriculum::LearningContext> restore_context(const ParamsFile& params,
                                                             const curriculum::Registry& registry,
                                                             const world::PoseMdp& env,
                                                             const world::WorldSpec& world, bool force = false);

void save_report(const std::filesystem::path& path, std::string_view text);

// ---------------------------------------------------------------------------
// Rendering

/// Plain-text graymap, maxval 255, row-major from the top row.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<std::string> comments;

    std::string to_pgm() const;
};

struct RenderedMap {
    GrayImage image;
    std::string table;
};

/// Slot k of the ring at `state` (slot 0 is the base forecast).
std::array<double, 12> ring_values(const curriculum::Registry& registry, const curriculum::Ring& ring,
                                   const curriculum::SnapshotTable& values, std::size_t state);

/// Twelve discs on a clock face, slot 0 at the top and slots increasing
/// clockwise. Intensity is value / scale.
RenderedMap render_ring(const std::array<double, 12>& slots, double scale, std::string_view title);

/// Max over headings at each lattice cell, normalized by the image max.
RenderedMap render_heatmap(const world::PoseMdp& env, const world::WorldSpec& world,
                           const std::vector<double>& values, std::string_view title);

// ---------------------------------------------------------------------------
// Dispatch

/// Runs one subcommand. Exit status 0 on success, 1 on validation or
/// verification failure, 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main_entry(int argc, char** argv);

}  // namespace forecast_forge::cli
