#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "forecast_forge/value_kind.hpp"

namespace forecast_forge::world {
struct Pose;
struct Observation;
}  // namespace forecast_forge::world

namespace forecast_forge::features {

inline constexpr std::size_t no_slot = std::numeric_limits<std::size_t>::max();

/// Handle to the current input. The tabular backend reads `key` (with
/// `slot` as a fast-path hint); the linear backend reads `features`.
struct StateRef {
    std::uint64_t key = 0;
    std::size_t slot = no_slot;
    std::span<const double> features;
};

/// Observation followed by the previous step's estimates, ordered by
/// forecast id.
struct StateVector {
    std::vector<double> values;
    std::size_t observation_size = 0;
    std::vector<int> forecast_ids;
};

StateVector build_state_vector(const world::Observation& observation,
                               std::span<const std::pair<int, double>> prev_estimates);

std::uint64_t discretize_pose(const world::Pose& pose);

enum class BackendKind { tabular_pose, linear };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

/// Owns the parameters of every registered forecast.
class Approximator {
public:
    virtual ~Approximator() = default;

    virtual BackendKind kind() const = 0;
    virtual double raw_predict(int forecast_id, const StateRef& state) const = 0;
    virtual void apply_update(int forecast_id, const StateRef& state, double delta, double alpha,
                              double weight) = 0;
    virtual std::unique_ptr<Approximator> clone() const = 0;

    /// Registers a forecast or updates its value kind. Idempotent.
    virtual void register_forecast(int forecast_id, ValueKind kind);
    bool registered(int forecast_id) const { return kinds_.count(forecast_id) != 0; }
    ValueKind value_kind(int forecast_id) const;
    std::vector<int> forecast_ids() const;

    /// Raw prediction clamped to the forecast's value kind.
    double predict(int forecast_id, const StateRef& state) const;

protected:
    void require(int forecast_id) const;

private:
    std::map<int, ValueKind> kinds_;
};

double predict(const Approximator& approximator, int forecast_id, const StateRef& state);
void apply_update(Approximator& approximator, int forecast_id, const StateRef& state, double delta,
                  double alpha, double weight);

/// One value per (forecast, pose key). Keys given at construction get
/// dense slots; any other key falls back to a hash map.
class TabularApproximator final : public Approximator {
public:
    TabularApproximator() = default;
    explicit TabularApproximator(std::vector<std::uint64_t> slot_keys);

    BackendKind kind() const override { return BackendKind::tabular_pose; }
    double raw_predict(int forecast_id, const StateRef& state) const override;
    void apply_update(int forecast_id, const StateRef& state, double delta, double alpha,
                      double weight) override;
    std::unique_ptr<Approximator> clone() const override;
    void register_forecast(int forecast_id, ValueKind kind) override;

    void set_value(int forecast_id, std::uint64_t key, double value);
    double value(int forecast_id, std::uint64_t key) const;
    /// Nonzero entries of one forecast, sorted by key.
    std::vector<std::pair<std::uint64_t, double>> entries(int forecast_id) const;

private:
    struct Table {
        std::vector<double> dense;
        std::unordered_map<std::uint64_t, double> sparse;
    };
    double& cell(int forecast_id, const StateRef& state);
    const double* find(int forecast_id, const StateRef& state) const;
    std::size_t resolve_slot(const StateRef& state) const;

    std::vector<std::uint64_t> slot_keys_;
    std::unordered_map<std::uint64_t, std::size_t> slot_of_;
    std::map<int, Table> tables_;
};

/// w . x + b per forecast. Weight vectors grow with zeros when the state
/// vector grows.
class LinearApproximator final : public Approximator {
public:
    LinearApproximator() = default;

    BackendKind kind() const override { return BackendKind::linear; }
    double raw_predict(int forecast_id, const StateRef& state) const override;
    void apply_update(int forecast_id, const StateRef& state, double delta, double alpha,
                      double weight) override;
    std::unique_ptr<Approximator> clone() const override;
    void register_forecast(int forecast_id, ValueKind kind) override;

    std::span<const double> weights(int forecast_id) const;
    double bias(int forecast_id) const;
    void set_parameters(int forecast_id, std::vector<double> weights, double bias);

private:
    struct Params {
        std::vector<double> weights;
        double bias = 0.0;
    };
    std::map<int, Params> params_;
};

std::unique_ptr<Approximator> make_approximator(BackendKind kind, std::vector<std::uint64_t> slot_keys = {});

}  // namespace forecast_forge::features
