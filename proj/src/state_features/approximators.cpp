#include <algorithm>
#include <cmath>
#include <string>

#include "forecast_forge/errors.hpp"
#include "forecast_forge/microworld.hpp"
#include "forecast_forge/state_features.hpp"

namespace forecast_forge::features {

std::string_view to_string(BackendKind kind) {
    return kind == BackendKind::tabular_pose ? "tabular" : "linear";
}

BackendKind parse_backend_kind(std::string_view text) {
    if (text == "tabular" || text == "tabular_pose") return BackendKind::tabular_pose;
    if (text == "linear") return BackendKind::linear;
    throw ArgumentError("unknown backend '" + std::string(text) + "'");
}

std::uint64_t discretize_pose(const world::Pose& pose) { return world::pose_key(pose); }

StateVector build_state_vector(const world::Observation& observation,
                               std::span<const std::pair<int, double>> prev_estimates) {
    StateVector out;
    out.observation_size = observation.pixels.size() + 1;
    out.values.reserve(out.observation_size + prev_estimates.size());
    out.values.assign(observation.pixels.begin(), observation.pixels.end());
    out.values.push_back(observation.touch ? 1.0 : 0.0);
    int last = 0;
    for (const auto& [id, value] : prev_estimates) {
        if (id <= last)
            throw ArgumentError("previous estimates must be ordered by strictly increasing forecast id (got " +
                                std::to_string(id) + " after " + std::to_string(last) + ")");
        last = id;
        out.forecast_ids.push_back(id);
        out.values.push_back(value);
    }
    return out;
}

void Approximator::register_forecast(int forecast_id, ValueKind kind) {
    if (forecast_id <= 0) throw ArgumentError("forecast ids are positive");
    kinds_[forecast_id] = kind;
}

ValueKind Approximator::value_kind(int forecast_id) const {
    require(forecast_id);
    return kinds_.at(forecast_id);
}

std::vector<int> Approximator::forecast_ids() const {
    std::vector<int> ids;
    for (const auto& [id, kind] : kinds_) ids.push_back(id);
    return ids;
}

void Approximator::require(int forecast_id) const {
    if (!registered(forecast_id)) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
}

double Approximator::predict(int forecast_id, const StateRef& state) const {
    const double v = raw_predict(forecast_id, state);
    switch (kinds_.at(forecast_id)) {
        case ValueKind::probability: return std::clamp(v, 0.0, 1.0);
        case ValueKind::count: return std::max(v, 0.0);
        case ValueKind::raw: return v;
    }
    return v;
}

double predict(const Approximator& approximator, int forecast_id, const StateRef& state) {
    return approximator.predict(forecast_id, state);
}

void apply_update(Approximator& approximator, int forecast_id, const StateRef& state, double delta, double alpha,
                  double weight) {
    approximator.apply_update(forecast_id, state, delta, alpha, weight);
}

// ---------------------------------------------------------------------------

TabularApproximator::TabularApproximator(std::vector<std::uint64_t> slot_keys) : slot_keys_(std::move(slot_keys)) {
    slot_of_.reserve(slot_keys_.size());
    for (std::size_t i = 0; i < slot_keys_.size(); ++i) {
        if (!slot_of_.emplace(slot_keys_[i], i).second) throw ArgumentError("duplicate slot key");
    }
}

void TabularApproximator::register_forecast(int forecast_id, ValueKind kind) {
    Approximator::register_forecast(forecast_id, kind);
    auto& table = tables_[forecast_id];
    if (table.dense.size() != slot_keys_.size()) table.dense.assign(slot_keys_.size(), 0.0);
}

std::size_t TabularApproximator::resolve_slot(const StateRef& state) const {
    if (state.slot < slot_keys_.size() && slot_keys_[state.slot] == state.key) return state.slot;
    auto it = slot_of_.find(state.key);
    return it == slot_of_.end() ? no_slot : it->second;
}

const double* TabularApproximator::find(int forecast_id, const StateRef& state) const {
    auto t = tables_.find(forecast_id);
    if (t == tables_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
    const std::size_t slot = resolve_slot(state);
    if (slot != no_slot) return &t->second.dense[slot];
    auto it = t->second.sparse.find(state.key);
    return it == t->second.sparse.end() ? nullptr : &it->second;
}

double& TabularApproximator::cell(int forecast_id, const StateRef& state) {
    auto t = tables_.find(forecast_id);
    if (t == tables_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
    const std::size_t slot = resolve_slot(state);
    if (slot != no_slot) return t->second.dense[slot];
    return t->second.sparse[state.key];
}

double TabularApproximator::raw_predict(int forecast_id, const StateRef& state) const {
    const double* v = find(forecast_id, state);
    return v ? *v : 0.0;
}

void TabularApproximator::apply_update(int forecast_id, const StateRef& state, double delta, double alpha,
                                       double weight) {
    cell(forecast_id, state) += alpha * weight * delta;
}

std::unique_ptr<Approximator> TabularApproximator::clone() const {
    return std::make_unique<TabularApproximator>(*this);
}

void TabularApproximator::set_value(int forecast_id, std::uint64_t key, double value) {
    cell(forecast_id, StateRef{key, no_slot, {}}) = value;
}

double TabularApproximator::value(int forecast_id, std::uint64_t key) const {
    return raw_predict(forecast_id, StateRef{key, no_slot, {}});
}

std::vector<std::pair<std::uint64_t, double>> TabularApproximator::entries(int forecast_id) const {
    auto t = tables_.find(forecast_id);
    if (t == tables_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
    std::vector<std::pair<std::uint64_t, double>> out;
    for (std::size_t i = 0; i < slot_keys_.size(); ++i)
        if (t->second.dense[i] != 0.0) out.emplace_back(slot_keys_[i], t->second.dense[i]);
    for (const auto& [key, v] : t->second.sparse)
        if (v != 0.0) out.emplace_back(key, v);
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------

void LinearApproximator::register_forecast(int forecast_id, ValueKind kind) {
    Approximator::register_forecast(forecast_id, kind);
    params_[forecast_id];
}

double LinearApproximator::raw_predict(int forecast_id, const StateRef& state) const {
    auto it = params_.find(forecast_id);
    if (it == params_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
    const auto& w = it->second.weights;
    const std::size_t n = std::min(w.size(), state.features.size());
    double acc = it->second.bias;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * state.features[i];
    return acc;
}

void LinearApproximator::apply_update(int forecast_id, const StateRef& state, double delta, double alpha,
                                      double weight) {
    auto it = params_.find(forecast_id);
    if (it == params_.end()) throw ArgumentError("forecast " + std::to_string(forecast_id) + " is not registered");
    auto& p = it->second;
    if (p.weights.size() < state.features.size()) p.weights.resize(state.features.size(), 0.0);
    const double step = alpha * weight * delta;
    for (std::size_t i = 0; i < state.features.size(); ++i) p.weights[i] += step * state.features[i];
    p.bias += step;
}

std::unique_ptr<Approximator> LinearApproximator::clone() const {
    return std::make_unique<LinearApproximator>(*this);
}

std::span<const double> LinearApproximator::weights(int forecast_id) const {
    require(forecast_id);
    return params_.at(forecast_id).weights;
}

double LinearApproximator::bias(int forecast_id) const {
    require(forecast_id);
    return params_.at(forecast_id).bias;
}

void LinearApproximator::set_parameters(int forecast_id, std::vector<double> weights, double bias) {
    require(forecast_id);
    params_[forecast_id] = {std::move(weights), bias};
}

std::unique_ptr<Approximator> make_approximator(BackendKind kind, std::vector<std::uint64_t> slot_keys) {
    if (kind == BackendKind::tabular_pose) return std::make_unique<TabularApproximator>(std::move(slot_keys));
    return std::make_unique<LinearApproximator>();
}

}  // namespace forecast_forge::features
