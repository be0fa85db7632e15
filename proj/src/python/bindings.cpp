#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "forecast_forge/cli.hpp"
#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace py = pybind11;
using namespace forecast_forge;

namespace {

// A loaded world with its pose MDP and the standard curriculum.
struct Workspace {
    world::WorldSpec world;
    world::PoseMdp env;
    curriculum::Registry registry;
    std::unique_ptr<curriculum::Oracle> oracle;

    Workspace(const std::string& path, const std::map<std::string, std::string>& overrides)
        : world(world::load_world(path)),
          env(world::as_finite_mdp(world, world::RobotParams{})),
          registry(curriculum::build_standard_curriculum(merged(overrides))),
          oracle(std::make_unique<curriculum::Oracle>(registry, env)) {}

    static curriculum::CurriculumConfig merged(const std::map<std::string, std::string>& overrides) {
        auto config = curriculum::CurriculumConfig::defaults();
        for (const auto& [k, v] : overrides) config.set(k, v);
        return config;
    }

    std::size_t state(const std::tuple<int, int, int>& pose) const {
        return env.at({std::get<0>(pose), std::get<1>(pose), std::get<2>(pose)});
    }

    std::vector<double> values(int forecast) {
        oracle->solve_through(registry.layer_of({curriculum::RefKind::forecast, forecast}));
        return oracle->table(forecast).values;
    }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Forecast curriculum on a simulated robot";

    py::register_exception<Error>(m, "ForecastError");

    py::class_<Workspace>(m, "Workspace")
        .def(py::init<const std::string&, const std::map<std::string, std::string>&>(), py::arg("world"),
             py::arg("overrides") = std::map<std::string, std::string>{})
        .def_property_readonly("digest", [](const Workspace& w) { return world::world_digest(w.world); })
        .def_property_readonly("size", [](const Workspace& w) { return w.env.size(); })
        .def("poses",
             [](const Workspace& w) {
                 std::vector<std::tuple<int, int, int>> out;
                 for (const auto& p : w.env.poses) out.emplace_back(p.x, p.y, p.heading);
                 return out;
             })
        .def("state", &Workspace::state)
        .def("touch", [](const Workspace& w, std::size_t s) { return w.env.touch.at(s) != 0; })
        .def("pixels", [](const Workspace& w, std::size_t s) { return w.env.pixels.at(s); })
        .def("successor",
             [](const Workspace& w, std::size_t s, int action) {
                 if (action < 0 || action >= world::action_count) throw ArgumentError("action out of range");
                 return w.env.successor(s, static_cast<world::Action>(action));
             })
        .def("forecast_name", [](const Workspace& w, int id) { return w.registry.forecast(id).abbrev; })
        .def("values", &Workspace::values, py::arg("forecast"),
             "Exact values of a forecast at every reachable pose")
        .def(
            "alias",
            [](Workspace& w, int alias_id, std::size_t s) {
                w.oracle->solve_through(w.registry.layer_of({curriculum::RefKind::alias, alias_id}));
                return w.oracle->snapshots().states.at(s).a(alias_id);
            },
            py::arg("alias"), py::arg("state"));

    m.def(
        "run",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int code = cli::run(args, out, err);
            return std::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run one command-line subcommand; returns (exit code, stdout, stderr)");
}
