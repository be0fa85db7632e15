#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "forecast_forge/curriculum.hpp"

namespace testing {

using namespace forecast_forge;

inline std::string world_path(const std::string& name) {
    return std::string(FORECAST_FORGE_DATA_DIR) + "/worlds/" + name + ".world";
}

// Demo environments are loaded once per test binary.
struct Demo {
    world::WorldSpec world;
    world::PoseMdp env;
    curriculum::Registry registry;
    curriculum::Oracle oracle;

    explicit Demo(const std::string& name, curriculum::CurriculumConfig config = curriculum::CurriculumConfig::defaults())
        : world(world::load_world(world_path(name))),
          env(world::as_finite_mdp(world, world::RobotParams{})),
          registry(curriculum::build_standard_curriculum(config)),
          oracle(registry, env) {}

    static Demo& two_rooms(int through_layer) {
        static Demo demo("two_rooms");
        if (demo.oracle.solved_layer() < through_layer) demo.oracle.solve_through(through_layer);
        return demo;
    }
};

// Random MDP with `branch` successors per (state, action).
inline gvf::FiniteMdp random_mdp(std::size_t states, std::size_t actions, std::size_t branch, RngStream& rng) {
    gvf::FiniteMdp mdp(states, actions);
    for (std::size_t s = 0; s < states; ++s)
        for (std::size_t a = 0; a < actions; ++a) {
            std::vector<double> w(branch);
            double total = 0.0;
            for (auto& x : w) total += x = 0.05 + rng.uniform();
            std::vector<gvf::Successor> row;
            for (std::size_t k = 0; k < branch; ++k) row.push_back({rng.below(states), w[k] / total});
            mdp.set_transition(s, a, row);
        }
    return mdp;
}

inline std::vector<double> random_values(std::size_t n, double lo, double hi, RngStream& rng) {
    std::vector<double> out(n);
    for (auto& v : out) v = lo + (hi - lo) * rng.uniform();
    return out;
}

// Forecast with tabulated beta, z and c(s, a) under a random stochastic policy.
inline gvf::ForecastDef table_forecast(std::size_t states, std::size_t actions, std::vector<double> beta,
                                       std::vector<double> z, std::vector<double> c, gvf::TerminationMode mode,
                                       RngStream& rng) {
    std::vector<double> probs(states * actions);
    for (std::size_t s = 0; s < states; ++s) {
        double total = 0.0;
        for (std::size_t a = 0; a < actions; ++a) total += probs[s * actions + a] = 0.1 + rng.uniform();
        for (std::size_t a = 0; a < actions; ++a) probs[s * actions + a] /= total;
    }
    auto option = std::make_shared<gvf::OptionDef>();
    option->name = "random";
    option->policy = gvf::Policy::from_table(states, actions, probs);
    option->termination = [beta](gvf::StateIndex s) { return beta[s]; };
    option->mode = mode;
    auto outcome = std::make_shared<gvf::OutcomeDef>();
    outcome->cumulant = [c, actions](gvf::StateIndex s, gvf::ActionIndex a) { return c[s * actions + a]; };
    outcome->terminal = [z](gvf::StateIndex s) { return z[s]; };
    gvf::ForecastDef def;
    def.id = 1;
    def.name = "random";
    def.option = option;
    def.outcome = outcome;
    return def;
}

// Constant beta, c and z on any MDP, under a fixed-action policy.
inline gvf::ForecastDef constant_forecast(std::size_t states, std::size_t actions, double beta, double c, double z,
                                          gvf::TerminationMode mode) {
    auto option = std::make_shared<gvf::OptionDef>();
    option->name = "constant";
    option->policy = gvf::Policy::constant(states, actions, 0);
    option->termination = [beta](gvf::StateIndex) { return beta; };
    option->mode = mode;
    auto outcome = std::make_shared<gvf::OutcomeDef>();
    outcome->cumulant = [c](gvf::StateIndex, gvf::ActionIndex) { return c; };
    outcome->terminal = [z](gvf::StateIndex) { return z; };
    gvf::ForecastDef def;
    def.id = 1;
    def.name = "constant";
    def.option = option;
    def.outcome = outcome;
    return def;
}

inline double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double stderr_of(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace testing
