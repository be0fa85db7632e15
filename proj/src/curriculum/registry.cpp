#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::curriculum {

namespace {

constexpr double missing = std::numeric_limits<double>::quiet_NaN();

template <typename T>
std::map<int, std::size_t> index_by_id(const std::vector<T>& items, const char* what) {
    std::map<int, std::size_t> out;
    for (std::size_t i = 0; i < items.size(); ++i)
        if (!out.emplace(items[i].id, i).second)
            throw CurriculumError(std::string("duplicate ") + what + " id " + std::to_string(items[i].id));
    return out;
}

}  // namespace

std::string describe(RefKind kind, int id) {
    switch (kind) {
        case RefKind::forecast: return "forecast " + std::to_string(id);
        case RefKind::option: return "option " + std::to_string(id);
        case RefKind::alias: return "alias " + std::to_string(id);
    }
    return "entity " + std::to_string(id);
}

int Ring::member(int slot) const {
    if (slot < 0 || slot > 12) throw ArgumentError("ring slot must lie in 0..12");
    if (slot == 0 || slot == 12) return base;
    return members[static_cast<std::size_t>(slot - 1)];
}

void Entities::remove(Ref ref) {
    auto drop = [&](auto& items) {
        items.erase(std::remove_if(items.begin(), items.end(), [&](const auto& e) { return e.id == ref.id; }),
                    items.end());
    };
    switch (ref.kind) {
        case RefKind::forecast: drop(forecasts); break;
        case RefKind::option: drop(options); break;
        case RefKind::alias: drop(aliases); break;
    }
    order.erase(std::remove(order.begin(), order.end(), ref), order.end());
}

Registry Registry::assemble(Entities entities, CurriculumConfig config) {
    Registry r;
    r.option_index_ = index_by_id(entities.options, "option");
    r.forecast_index_ = index_by_id(entities.forecasts, "forecast");
    r.alias_index_ = index_by_id(entities.aliases, "alias");
    r.entities_ = std::move(entities);
    r.config_ = std::move(config);
    r.beta_floor_ = r.config_.number("beta.floor", "option termination");
    if (!(r.beta_floor_ >= 0.0 && r.beta_floor_ <= 1.0)) throw CurriculumError("beta.floor must lie in [0, 1]");

    for (auto& f : r.entities_.forecasts) {
        const Ref opt{RefKind::option, f.option};
        if (std::find(f.refs.begin(), f.refs.end(), opt) == f.refs.end()) f.refs.push_back(opt);
    }

    auto exists = [&](Ref ref) {
        switch (ref.kind) {
            case RefKind::forecast: return r.has_forecast(ref.id);
            case RefKind::option: return r.has_option(ref.id);
            case RefKind::alias: return r.has_alias(ref.id);
        }
        return false;
    };
    auto refs_of = [&](Ref ref) -> const std::vector<Ref>& {
        switch (ref.kind) {
            case RefKind::forecast: return r.forecast(ref.id).refs;
            case RefKind::option: return r.option(ref.id).refs;
            case RefKind::alias: return r.alias(ref.id).refs;
        }
        throw CurriculumError("bad reference kind");
    };

    std::map<Ref, std::size_t> position;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < r.entities_.order.size(); ++i) {
        const Ref ref = r.entities_.order[i];
        if (!exists(ref)) {
            problems.push_back("introduction order lists " + describe(ref.kind, ref.id) + ", which is not defined");
            continue;
        }
        if (!position.emplace(ref, i).second) problems.push_back(describe(ref.kind, ref.id) + " is introduced twice");
    }
    for (const auto& o : r.entities_.options)
        if (o.policy != PolicyKind::primitive && !position.count({RefKind::option, o.id}))
            problems.push_back("option " + std::to_string(o.id) + " is missing from the introduction order");
    for (const auto& f : r.entities_.forecasts)
        if (!position.count({RefKind::forecast, f.id}))
            problems.push_back("forecast " + std::to_string(f.id) + " is missing from the introduction order");
    for (const auto& a : r.entities_.aliases)
        if (!position.count({RefKind::alias, a.id}))
            problems.push_back("alias " + std::to_string(a.id) + " is missing from the introduction order");

    // Direct reference checks, and the set of entities with a dangling
    // reference somewhere below them.
    std::set<Ref> broken;
    for (const auto& [ref, pos] : position) {
        for (const Ref& dep : refs_of(ref)) {
            if (!exists(dep)) {
                problems.push_back(describe(ref.kind, ref.id) + " refers to " + describe(dep.kind, dep.id) +
                                   ", which is not defined");
                broken.insert(ref);
                continue;
            }
            if (dep.kind == RefKind::option && r.option(dep.id).policy == PolicyKind::primitive) continue;
            auto it = position.find(dep);
            if (it == position.end()) continue;
            if (it->second >= pos)
                problems.push_back(describe(ref.kind, ref.id) + " refers to " + describe(dep.kind, dep.id) +
                                   ", which is introduced later");
            if (r.layer_of(dep) > r.layer_of(ref))
                problems.push_back(describe(ref.kind, ref.id) + " (layer " + std::to_string(r.layer_of(ref)) +
                                   ") refers to " + describe(dep.kind, dep.id) + " from layer " +
                                   std::to_string(r.layer_of(dep)));
        }
    }
    if (!broken.empty()) {
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& [ref, pos] : position) {
                if (broken.count(ref)) continue;
                for (const Ref& dep : refs_of(ref)) {
                    if (broken.count(dep)) {
                        broken.insert(ref);
                        grew = true;
                        break;
                    }
                }
            }
        }
        std::string affected = "affected entities:";
        for (const Ref& ref : broken) affected += " " + describe(ref.kind, ref.id) + ";";
        problems.push_back(affected);
    }
    for (const auto& ring : r.entities_.rings) {
        if (!r.has_forecast(ring.base)) problems.push_back("ring " + ring.name + " has no base forecast");
        for (int m : ring.members)
            if (!r.has_forecast(m)) problems.push_back("ring " + ring.name + " member " + std::to_string(m) + " is missing");
    }
    if (!problems.empty()) {
        std::string msg = "curriculum failed to build:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw CurriculumError(msg);
    }

    int top = 0;
    for (const auto& [ref, pos] : position) top = std::max(top, r.layer_of(ref));
    r.layers_.resize(static_cast<std::size_t>(top));
    for (int i = 0; i < top; ++i) r.layers_[static_cast<std::size_t>(i)].number = i + 1;
    for (const Ref& ref : r.entities_.order) {
        const int layer = r.layer_of(ref);
        if (layer < 1) throw CurriculumError(describe(ref.kind, ref.id) + " has no layer");
        auto& spec = r.layers_[static_cast<std::size_t>(layer - 1)];
        switch (ref.kind) {
            case RefKind::forecast: spec.forecasts.push_back(ref.id); break;
            case RefKind::option: spec.options.push_back(ref.id); break;
            case RefKind::alias: spec.aliases.push_back(ref.id); break;
        }
    }
    for (auto& spec : r.layers_) {
        std::sort(spec.forecasts.begin(), spec.forecasts.end());
        std::sort(spec.options.begin(), spec.options.end());
        std::sort(spec.aliases.begin(), spec.aliases.end());
    }
    for (const auto& f : r.entities_.forecasts) r.max_forecast_id_ = std::max(r.max_forecast_id_, f.id);
    for (const auto& a : r.entities_.aliases) r.max_alias_id_ = std::max(r.max_alias_id_, a.id);
    return r;
}

const OptionSpec& Registry::option(int id) const {
    auto it = option_index_.find(id);
    if (it == option_index_.end()) throw ArgumentError("unknown option " + std::to_string(id));
    return entities_.options[it->second];
}

const ForecastSpec& Registry::forecast(int id) const {
    auto it = forecast_index_.find(id);
    if (it == forecast_index_.end()) throw ArgumentError("unknown forecast " + std::to_string(id));
    return entities_.forecasts[it->second];
}

const AliasSpec& Registry::alias(int id) const {
    auto it = alias_index_.find(id);
    if (it == alias_index_.end()) throw ArgumentError("unknown alias " + std::to_string(id));
    return entities_.aliases[it->second];
}

const Ring& Registry::ring(std::string_view name) const {
    for (const auto& ring : entities_.rings)
        if (ring.name == name) return ring;
    throw ArgumentError("unknown ring '" + std::string(name) + "'");
}

const LayerSpec& Registry::layer(int number) const {
    if (number < 1 || number > max_layer()) throw ArgumentError("layer " + std::to_string(number) + " does not exist");
    return layers_[static_cast<std::size_t>(number - 1)];
}

int Registry::layer_of(Ref ref) const {
    switch (ref.kind) {
        case RefKind::forecast: return forecast(ref.id).layer;
        case RefKind::option: return option(ref.id).layer;
        case RefKind::alias: return alias(ref.id).layer;
    }
    return 0;
}

std::vector<int> Registry::forecasts_through(int layer) const {
    std::vector<int> out;
    for (const auto& f : entities_.forecasts)
        if (f.layer <= layer) out.push_back(f.id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> Registry::options_through(int layer) const {
    std::vector<int> out;
    for (const auto& o : entities_.options)
        if (o.policy != PolicyKind::primitive && o.layer <= layer) out.push_back(o.id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> Registry::aliases_through(int layer) const {
    std::vector<int> out;
    for (const auto& a : entities_.aliases)
        if (a.layer <= layer) out.push_back(a.id);
    std::sort(out.begin(), out.end());
    return out;
}

Snapshot Registry::empty_snapshot() const {
    Snapshot s;
    s.forecast.assign(static_cast<std::size_t>(max_forecast_id_ + 1), missing);
    s.alias.assign(static_cast<std::size_t>(max_alias_id_ + 1), missing);
    return s;
}

void Registry::fill_aliases(Snapshot& snapshot, int layer) const {
    for (const auto& a : entities_.aliases) {
        snapshot.alias[static_cast<std::size_t>(a.id)] = a.layer <= layer ? a.expression(snapshot) : missing;
    }
}

double evaluate_alias(const Registry& registry, int alias_id, const Snapshot& estimates) {
    const AliasSpec& target = registry.alias(alias_id);
    Snapshot work = estimates;
    std::fill(work.alias.begin(), work.alias.end(), missing);
    // Lower aliases first; aliases are numbered in dependency order.
    std::function<double(int)> eval = [&](int id) -> double {
        const AliasSpec& spec = registry.alias(id);
        for (const Ref& dep : spec.refs) {
            if (dep.kind == RefKind::forecast) {
                if (static_cast<std::size_t>(dep.id) >= work.forecast.size() || std::isnan(work.f(dep.id)))
                    throw CurriculumError("alias " + spec.abbrev + " needs an estimate of forecast " +
                                          std::to_string(dep.id));
            } else if (dep.kind == RefKind::alias) {
                if (std::isnan(work.a(dep.id))) work.alias[static_cast<std::size_t>(dep.id)] = eval(dep.id);
            }
        }
        return spec.expression(work);
    };
    return eval(target.id);
}

double option_termination(const Registry& registry, const OptionSpec& option, const Snapshot& snapshot) {
    if (option.policy == PolicyKind::primitive || !option.termination) return 1.0;
    const double raw = std::clamp(option.termination(snapshot), 0.0, 1.0);
    return std::max(raw, registry.beta_floor());
}

}  // namespace forecast_forge::curriculum
