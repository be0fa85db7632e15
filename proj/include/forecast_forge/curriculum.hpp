#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forecast_forge/gvf_core.hpp"
#include "forecast_forge/microworld.hpp"
#include "forecast_forge/state_features.hpp"

namespace forecast_forge::curriculum {

/// Flat key=value settings. `parse` keeps exactly what the text says;
/// `with_defaults` layers it over the built-in defaults.
class CurriculumConfig {
public:
    static CurriculumConfig defaults();
    static CurriculumConfig parse(std::string_view text);
    static CurriculumConfig load(const std::filesystem::path& path);
    static CurriculumConfig with_defaults(const CurriculumConfig& overrides);

    bool has(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;
    std::string text(std::string_view key, std::string_view fallback) const;
    /// Throws ConfigurationError naming `owner` when the key is missing.
    double number(std::string_view key, std::string_view owner = {}) const;
    double number_or(std::string_view key, double fallback) const;
    void set(std::string key, std::string value);
    void erase(std::string_view key);
    const std::map<std::string, std::string, std::less<>>& entries() const noexcept { return entries_; }
    std::string serialize() const;

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

/// Values visible to curriculum expressions at one state: forecast
/// estimates by id, alias values by id, and the touch bit. NaN marks a
/// value that is not available.
struct Snapshot {
    std::vector<double> forecast;
    std::vector<double> alias;
    bool touch = false;

    double f(int id) const { return forecast[static_cast<std::size_t>(id)]; }
    double a(int id) const { return alias[static_cast<std::size_t>(id)]; }
};

using ValueExpr = std::function<double(const Snapshot&)>;
using ActionExpr = std::function<double(const Snapshot&, world::Action)>;
using Condition = std::function<bool(const Snapshot&)>;

enum class RefKind { forecast, option, alias };

struct Ref {
    RefKind kind;
    int id;
    auto operator<=>(const Ref&) const = default;
};

std::string describe(RefKind kind, int id);

enum class PolicyKind { primitive, fixed, uniform, maximize };

struct OptionSpec {
    int id = 0;
    std::string name;
    std::string abbrev;
    int layer = 0;
    PolicyKind policy = PolicyKind::primitive;
    world::Action action = world::Action::rf;  // primitive and fixed policies
    Condition initiation;                      // empty: every state
    ValueExpr termination;                     // empty for primitives
    gvf::TerminationMode mode = gvf::TerminationMode::post_step;
    // Objective of a maximizing option.
    ActionExpr objective_cumulant;
    ValueExpr objective_terminal;
    std::vector<world::Action> admissible;  // empty: all
    std::vector<Ref> refs;
};

struct ForecastSpec {
    int id = 0;
    std::string name;
    std::string abbrev;
    int layer = 0;
    int option = 0;
    ActionExpr cumulant;
    ValueExpr terminal;
    ValueKind kind = ValueKind::raw;
    std::vector<Ref> refs;
};

struct AliasSpec {
    int id = 0;
    std::string name;
    std::string abbrev;
    int layer = 0;
    ValueExpr expression;
    bool boolean = true;
    std::vector<Ref> refs;
};

/// Twelve clock positions around a base forecast. Slots 0 and 12 are the
/// base itself; slots 1..11 are the members.
struct Ring {
    std::string name;
    int base = 0;
    std::array<int, 11> members{};
    int member(int slot) const;
};

struct LayerSpec {
    int number = 0;
    std::vector<int> forecasts;
    std::vector<int> options;
    std::vector<int> aliases;
};

/// Unvalidated entity lists in introduction order.
struct Entities {
    std::vector<OptionSpec> options;
    std::vector<ForecastSpec> forecasts;
    std::vector<AliasSpec> aliases;
    std::vector<Ring> rings;
    std::vector<Ref> order;  // introduction order of non-primitive entities

    void remove(Ref ref);
};

class Registry {
public:
    /// Validates references, ordering and layer placement.
    static Registry assemble(Entities entities, CurriculumConfig config);

    const OptionSpec& option(int id) const;
    const ForecastSpec& forecast(int id) const;
    const AliasSpec& alias(int id) const;
    bool has_option(int id) const { return option_index_.count(id) != 0; }
    bool has_forecast(int id) const { return forecast_index_.count(id) != 0; }
    bool has_alias(int id) const { return alias_index_.count(id) != 0; }
    const Ring& ring(std::string_view name) const;
    const std::vector<Ring>& rings() const noexcept { return entities_.rings; }

    const std::vector<Ref>& order() const noexcept { return entities_.order; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    const LayerSpec& layer(int number) const;
    int max_layer() const noexcept { return static_cast<int>(layers_.size()); }
    int max_forecast_id() const noexcept { return max_forecast_id_; }
    int max_alias_id() const noexcept { return max_alias_id_; }

    std::vector<int> forecasts_through(int layer) const;
    std::vector<int> options_through(int layer) const;  // non-primitive
    std::vector<int> aliases_through(int layer) const;
    int layer_of(Ref ref) const;

    const CurriculumConfig& config() const noexcept { return config_; }
    double beta_floor() const noexcept { return beta_floor_; }

    Snapshot empty_snapshot() const;
    /// Fills alias values (through `layer`) in id order from the forecast
    /// values already in the snapshot.
    void fill_aliases(Snapshot& snapshot, int layer) const;

private:
    Entities entities_;
    CurriculumConfig config_;
    std::map<int, std::size_t> option_index_, forecast_index_, alias_index_;
    std::vector<LayerSpec> layers_;
    int max_forecast_id_ = 0;
    int max_alias_id_ = 0;
    double beta_floor_ = 0.0;
};

/// Forecasts, options and aliases of the standard eleven-layer curriculum.
Entities standard_entities(const CurriculumConfig& config);
Registry build_standard_curriculum(const CurriculumConfig& config);

/// Pure evaluation of one alias from forecast values; lower aliases are
/// recomputed rather than read from the snapshot.
double evaluate_alias(const Registry& registry, int alias_id, const Snapshot& estimates);

/// Termination probability of a non-primitive option, floored.
double option_termination(const Registry& registry, const OptionSpec& option, const Snapshot& snapshot);

// ---------------------------------------------------------------------------
// Binding to the pose MDP

using PolicyMap = std::map<int, gvf::Policy>;

/// Per-state snapshots built from tables or learned estimates.
struct SnapshotTable {
    std::vector<Snapshot> states;
};

std::shared_ptr<gvf::OptionDef> bind_option(const Registry& registry, int option_id, const world::PoseMdp& env,
                                            const SnapshotTable& snapshots, const PolicyMap& policies,
                                            std::optional<gvf::TerminationMode> mode = std::nullopt);
gvf::ForecastDef bind_forecast(const Registry& registry, int forecast_id, const world::PoseMdp& env,
                               const SnapshotTable& snapshots, const PolicyMap& policies,
                               std::optional<gvf::TerminationMode> mode = std::nullopt);
gvf::OptionObjective bind_objective(const Registry& registry, int option_id, const world::PoseMdp& env,
                                    const SnapshotTable& snapshots,
                                    std::optional<gvf::TerminationMode> mode = std::nullopt);

/// Exact values of every forecast in introduction order, with maximizing
/// options solved by policy iteration.
class Oracle {
public:
    Oracle(const Registry& registry, const world::PoseMdp& env, double tol = 1e-10);
    Oracle(const Oracle&) = delete;
    Oracle& operator=(const Oracle&) = delete;

    void solve_through(int layer);
    int solved_layer() const noexcept { return solved_layer_; }
    const gvf::ValueTable& table(int forecast_id) const;
    const gvf::Policy& policy(int option_id) const;
    const gvf::LearnedOption& learned(int option_id) const;
    const PolicyMap& policies() const noexcept { return policies_; }
    const SnapshotTable& snapshots() const noexcept { return snapshots_; }
    const Registry& registry() const noexcept { return *registry_; }
    const world::PoseMdp& env() const noexcept { return *env_; }

private:
    const Registry* registry_;
    const world::PoseMdp* env_;
    double tol_;
    int solved_layer_ = 0;
    std::size_t cursor_ = 0;
    std::map<int, gvf::ValueTable> tables_;
    std::map<int, gvf::LearnedOption> learned_;
    PolicyMap policies_;
    SnapshotTable snapshots_;
};

// ---------------------------------------------------------------------------
// Learning

struct TrainingStats {
    int layer = 0;
    std::uint64_t steps = 0;
    std::map<int, std::uint64_t> applied_updates;
    std::map<int, std::size_t> option_episodes;
    std::array<std::uint64_t, world::action_count> actions{};  // executed, by action index
};

/// Everything that persists across layers while learning: backend,
/// learners, option policies, the walker's state and the verified layers.
class LearningContext {
public:
    LearningContext(const Registry& registry, const world::PoseMdp& env, features::BackendKind backend,
                    std::uint64_t seed);

    const Registry& registry() const noexcept { return *registry_; }
    const world::PoseMdp& env() const noexcept { return *env_; }
    features::Approximator& backend() noexcept { return *backend_; }
    const features::Approximator& backend() const noexcept { return *backend_; }
    const PolicyMap& policies() const noexcept { return policies_; }
    PolicyMap& policies() noexcept { return policies_; }
    const world::PixelPermutation& permutation() const noexcept { return permutation_; }
    std::uint64_t seed() const noexcept { return seed_; }

    /// Registers the forecasts of layers up to `layer` with the backend.
    void activate_through(int layer);
    int active_layer() const noexcept { return active_layer_; }
    void mark_verified(int layer) { verified_layer_ = std::max(verified_layer_, layer); }
    int verified_layer() const noexcept { return verified_layer_; }

    /// Estimates of every active forecast at every pose, with aliases.
    SnapshotTable estimate_table() const;
    /// Copies exact values into the backend (tabular only) and exact
    /// option policies into the context.
    void seed_from_oracle(const Oracle& oracle, int through_layer);

    gvf::TdLearner& learner(int forecast_id);
    features::StateRef state_ref(std::size_t state, std::span<const double> features) const;
    /// Pixels, touch bit and the given estimates (indexed by forecast id)
    /// of every registered forecast.
    std::vector<double> observation_features(std::size_t state, bool touch,
                                             std::span<const double> estimates) const;
    /// Predictions of every registered forecast at `state`, indexed by id
    /// (NaN for unregistered ids). The linear backend reads `features`.
    std::vector<double> predict_all(std::size_t state, std::span<const double> features) const;

    std::size_t position = 0;       // walker's current state
    bool last_contact = false;
    std::vector<double> last_estimates;  // previous-step estimates by forecast id

private:
    const Registry* registry_;
    const world::PoseMdp* env_;
    std::unique_ptr<features::Approximator> backend_;
    std::map<int, gvf::TdLearner> learners_;
    PolicyMap policies_;
    world::PixelPermutation permutation_;
    std::vector<std::vector<double>> pixels_;  // permuted, per state
    std::uint64_t seed_;
    int active_layer_ = 0;
    int verified_layer_ = 0;
};

/// Learns the layer's maximizing options, then runs the behavior policy for
/// `budget` steps, updating every active forecast off-policy.
TrainingStats train_layer(LearningContext& context, int layer, std::uint64_t budget, RngStream& rng);

struct ForecastCheck {
    int layer = 0;
    int id = 0;
    std::string name;
    double max_err = 0.0;
    double mean_err = 0.0;
    double frac_within_tol = 0.0;
};

struct OptionCheck {
    int layer = 0;
    int id = 0;
    std::string name;
    double greedy_match = 0.0;
};

struct VerificationReport {
    int layer = 0;
    double tolerance = 0.0;
    std::vector<ForecastCheck> forecasts;
    std::vector<OptionCheck> options;

    /// Mean absolute error over every (forecast, pose) pair.
    double mean_error() const;
    std::vector<int> offenders(double gate) const;
    std::string to_text() const;
};

std::string format_check(const ForecastCheck& check);

/// Compares estimates of forecasts introduced at or below `layer` with the
/// oracle. With `only_layer`, restricts to forecasts introduced in `layer`.
VerificationReport verify_layer(const LearningContext& context, const Oracle& oracle, int layer, double tol,
                                bool only_layer = true);

/// Fraction of initiable states where the policy's action is one of the
/// oracle's greedy actions.
double greedy_match(const gvf::Policy& policy, const gvf::LearnedOption& oracle, std::size_t actions,
                    double tie_tolerance = 1e-9);

enum class RunMode { learn, oracle };

struct CurriculumRun {
    std::string report;
    bool passed = true;
    int completed_layer = 0;
    std::unique_ptr<LearningContext> context;
    std::vector<VerificationReport> layers;
};

CurriculumRun run_curriculum(const Registry& registry, const world::PoseMdp& env, Oracle& oracle,
                             std::uint64_t seed, int through_layer, features::BackendKind backend,
                             RunMode mode = RunMode::learn);

}  // namespace forecast_forge::curriculum
