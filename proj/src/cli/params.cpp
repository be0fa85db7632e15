#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "forecast_forge/cli.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::cli {

namespace {

constexpr std::string_view magic = "FORECASTPARAMS v1";

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Splits on newlines, keeping the 1-based line number for diagnostics.
class Lines {
public:
    explicit Lines(std::string_view text) : text_(text) {}

    bool done() const { return pos_ >= text_.size(); }
    int line() const { return line_; }

    std::string_view next() {
        if (done()) throw ParseError("unexpected end of parameter file", line_ + 1);
        const auto end = text_.find('\n', pos_);
        std::string_view out = text_.substr(pos_, end == std::string_view::npos ? std::string_view::npos : end - pos_);
        pos_ = end == std::string_view::npos ? text_.size() : end + 1;
        ++line_;
        if (!out.empty() && out.back() == '\r') out.remove_suffix(1);
        return out;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    int line_ = 0;
};

std::vector<std::string_view> words(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && line[i] == ' ') ++i;
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ') ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

template <typename T>
T parse_int(std::string_view text, int line) {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("expected an integer, got '" + std::string(text) + "'", line);
    return v;
}

double parse_real(std::string_view text, int line) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw ParseError("expected a number, got '" + std::string(text) + "'", line);
    return v;
}

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

}  // namespace

ParamsFile capture_params(const curriculum::LearningContext& context, const world::WorldSpec& world,
                          int through_layer) {
    ParamsFile out;
    out.world_digest = world::world_digest(world);
    out.backend = context.backend().kind();
    out.seed = context.seed();
    out.through_layer = through_layer;
    out.verified_layer = std::min(context.verified_layer(), through_layer);
    out.config = context.registry().config();
    out.policy_states = context.env().size();
    const auto& backend = context.backend();
    for (int id : backend.forecast_ids()) {
        out.kinds[id] = backend.value_kind(id);
        if (const auto* table = dynamic_cast<const features::TabularApproximator*>(&backend)) {
            out.tables[id] = table->entries(id);
        } else {
            const auto& linear = dynamic_cast<const features::LinearApproximator&>(backend);
            const auto w = linear.weights(id);
            out.linear[id] = {std::vector<double>(w.begin(), w.end()), linear.bias(id)};
        }
    }
    for (const auto& [id, policy] : context.policies()) {
        std::vector<double> rows;
        rows.reserve(policy.state_count() * policy.action_count());
        for (std::size_t s = 0; s < policy.state_count(); ++s)
            for (double p : policy.distribution(s)) rows.push_back(p);
        out.policies[id] = std::move(rows);
    }
    return out;
}

std::string serialize_params(const ParamsFile& p) {
    std::string out(magic);
    out += " seed=" + std::to_string(p.seed) + " world=" + p.world_digest +
           " backend=" + std::string(features::to_string(p.backend)) +
           " through_layer=" + std::to_string(p.through_layer) +
           " verified_layer=" + std::to_string(p.verified_layer) + " states=" + std::to_string(p.policy_states) + "\n";
    for (const auto& [k, v] : p.config.entries()) out += "config\t" + k + "\t" + v + "\n";
    for (const auto& [id, kind] : p.kinds) out += "kind\t" + std::to_string(id) + "\t" + std::string(to_string(kind)) + "\n";
    for (const auto& [id, kind] : p.kinds) {
        const std::string tag = std::to_string(id);
        if (auto t = p.tables.find(id); t != p.tables.end()) {
            for (const auto& [key, v] : t->second) out += tag + "\t" + std::to_string(key) + "\t" + number(v) + "\n";
        } else if (auto l = p.linear.find(id); l != p.linear.end()) {
            out += tag;
            for (double w : l->second.first) out += "\t" + number(w);
            out += "\t" + number(l->second.second) + "\n";
        } else {
            throw ArgumentError("forecast " + tag + " has no parameters");
        }
    }
    for (const auto& [id, rows] : p.policies) {
        const std::size_t states = p.policy_states;
        if (states == 0 || rows.size() != states * world::action_count)
            throw ArgumentError("policy of option " + std::to_string(id) + " has the wrong size");
        for (std::size_t s = 0; s < states; ++s) {
            out += "policy\t" + std::to_string(id) + "\t" + std::to_string(s);
            for (std::size_t a = 0; a < world::action_count; ++a) out += "\t" + number(rows[s * world::action_count + a]);
            out += "\n";
        }
    }
    return out;
}

ParamsFile parse_params(std::string_view text) {
    Lines in(text);
    if (in.done()) throw ParseError("empty parameter file", 1);
    const auto header = words(in.next());
    if (header.size() < 2 || header[0] != "FORECASTPARAMS" || header[1] != "v1")
        throw ParseError("not a parameter file (missing 'FORECASTPARAMS v1')", 1);
    ParamsFile p;
    std::map<std::string_view, std::string_view> fields;
    for (std::size_t i = 2; i < header.size(); ++i) {
        const auto eq = header[i].find('=');
        if (eq == std::string_view::npos) throw ParseError("header field without '='", 1);
        fields[header[i].substr(0, eq)] = header[i].substr(eq + 1);
    }
    auto field = [&](std::string_view key) {
        auto it = fields.find(key);
        if (it == fields.end()) throw ParseError("header lacks '" + std::string(key) + "='", 1);
        return it->second;
    };
    p.seed = parse_int<std::uint64_t>(field("seed"), 1);
    p.world_digest = std::string(field("world"));
    p.backend = features::parse_backend_kind(field("backend"));
    p.through_layer = fields.count("through_layer") ? parse_int<int>(field("through_layer"), 1) : 0;
    p.verified_layer =
        fields.count("verified_layer") ? parse_int<int>(field("verified_layer"), 1) : p.through_layer;
    if (p.verified_layer > p.through_layer) throw ParseError("verified_layer exceeds through_layer", 1);
    p.policy_states = fields.count("states") ? parse_int<std::size_t>(field("states"), 1) : 0;
    const bool tabular = p.backend == features::BackendKind::tabular_pose;

    std::string config_text;
    while (!in.done()) {
        const auto raw = in.next();
        const int line = in.line();
        if (raw.empty()) continue;
        const auto f = fields_of(raw);
        if (f[0] == "config") {
            if (f.size() != 3) throw ParseError("expected 'config<TAB>key<TAB>value'", line);
            config_text += std::string(f[1]) + "=" + std::string(f[2]) + "\n";
        } else if (f[0] == "kind") {
            if (f.size() != 3) throw ParseError("expected 'kind<TAB>id<TAB>kind'", line);
            p.kinds[parse_int<int>(f[1], line)] = parse_value_kind(f[2]);
        } else if (f[0] == "policy") {
            if (f.size() != 3 + world::action_count) throw ParseError("expected one probability per action", line);
            const int id = parse_int<int>(f[1], line);
            const auto s = parse_int<std::size_t>(f[2], line);
            if (s >= p.policy_states) throw ParseError("policy state outside the header's state count", line);
            auto& rows = p.policies[id];
            rows.resize(p.policy_states * world::action_count, 0.0);
            for (std::size_t a = 0; a < world::action_count; ++a)
                rows[s * world::action_count + a] = parse_real(f[3 + a], line);
        } else {
            const int id = parse_int<int>(f[0], line);
            if (!p.kinds.count(id)) throw ParseError("forecast " + std::to_string(id) + " has no kind record", line);
            if (tabular) {
                if (f.size() != 3) throw ParseError("expected 'id<TAB>key<TAB>value'", line);
                p.tables[id].emplace_back(parse_int<std::uint64_t>(f[1], line), parse_real(f[2], line));
            } else {
                if (f.size() < 3) throw ParseError("expected 'id<TAB>weights...<TAB>bias'", line);
                if (p.linear.count(id)) throw ParseError("forecast " + std::to_string(id) + " appears twice", line);
                auto& [weights, bias] = p.linear[id];
                for (std::size_t i = 1; i + 1 < f.size(); ++i) weights.push_back(parse_real(f[i], line));
                bias = parse_real(f.back(), line);
            }
        }
    }
    p.config = curriculum::CurriculumConfig::parse(config_text);
    return p;
}

void save_params(const std::filesystem::path& path, const ParamsFile& params) { save_report(path, serialize_params(params)); }

ParamsFile load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open parameter file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_params(text.str());
}

std::unique_ptr<curriculum::LearningContext> restore_context(const ParamsFile& params,
                                                             const curriculum::Registry& registry,
                                                             const world::PoseMdp& env,
                                                             const world::WorldSpec& world, bool force) {
    const std::string digest = world::world_digest(world);
    if (params.world_digest != digest && !force)
        throw DigestMismatch("parameters were saved for world " + params.world_digest + ", this world is " + digest +
                             " (use --force to load anyway)");
    if (params.through_layer < 0 || params.through_layer > registry.max_layer())
        throw ArgumentError("parameter file covers layer " + std::to_string(params.through_layer) +
                            ", the curriculum has " + std::to_string(registry.max_layer()));
    auto ctx = std::make_unique<curriculum::LearningContext>(registry, env, params.backend, params.seed);
    if (params.through_layer > 0) ctx->activate_through(params.through_layer);
    auto& backend = ctx->backend();
    for (const auto& [id, kind] : params.kinds) {
        if (!backend.registered(id))
            throw ArgumentError("parameter file has forecast " + std::to_string(id) + " beyond its layer");
        backend.register_forecast(id, kind);
    }
    if (auto* table = dynamic_cast<features::TabularApproximator*>(&backend)) {
        for (const auto& [id, entries] : params.tables)
            for (const auto& [key, v] : entries) table->set_value(id, key, v);
    } else {
        auto& linear = dynamic_cast<features::LinearApproximator&>(backend);
        for (const auto& [id, wb] : params.linear) linear.set_parameters(id, wb.first, wb.second);
    }
    for (const auto& [id, rows] : params.policies) {
        if (params.policy_states != env.size())
            throw ArgumentError("saved policies cover " + std::to_string(params.policy_states) + " states, world has " +
                                std::to_string(env.size()));
        ctx->policies()[id] = gvf::Policy::from_table(env.size(), world::action_count, rows);
    }
    ctx->mark_verified(params.verified_layer);
    return ctx;
}

void save_report(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw ArgumentError("failed writing " + path.string());
}

}  // namespace forecast_forge::cli
