#include <charconv>
#include <fstream>
#include <sstream>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::curriculum {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

constexpr std::string_view default_text = R"(# Termination semantics of non-primitive options and the floor applied
# to their termination probability.
termination.default=post_step
beta.floor=0.1
penalty=-1000000
# A probability forecast counts as true above this value.
theta.truth.1=0.5
option.dta=rftt
# TA above 0.95 means the robot faces something it can touch, or is one
# rotation away from it.
theta.rftt.1=0.95
theta.nta.1=0.95
theta.wall.1=0.5
theta.wall.2=1.5
theta.wall.3=0.95
theta.wlr.1=0.5
theta.wa.1=0.5
theta.wa.2=8.09
theta.lrc.1=1.0
theta.fbc.1=1.0
theta.r.1=3.75
theta.mh.3=4
theta.mh.4=8
theta.sr.5=25
theta.lr.6=40
theta.lr.7=200
theta.d.1=1.5
theta.d.2=3.75
# Behavior steps per layer.
budget.layer1=50000
budget.layer2=50000
budget.layer3=200000
budget.layer4=300000
budget.layer5=600000
budget.layer6=2500000
budget.layer7=1000000
budget.layer8=10000000
budget.layer9=3000000
budget.layer10=100000
budget.layer11=2000000
td.alpha=1
# WDA follows a random policy: ratio-weighted updates with a decaying step.
td.gating.33=importance_ratio
td.alpha.33=0.005
td.decay.33=8
# Bootstrap with the expected termination at the next state instead of a draw.
td.expected_termination=1
td.gating=match_support
behavior.option_prob=0.5
behavior.option_cap=200
q.episodes=500000
q.epsilon_start=1.0
q.epsilon_end=0.05
q.step_size=1.0
q.max_steps=1000
gate.tolerance=0.05
gate.option_match=0.9
)";

}  // namespace

CurriculumConfig CurriculumConfig::parse(std::string_view text) {
    CurriculumConfig cfg;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
        const std::string body = trim(raw);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", line);
        std::string key = trim(std::string_view(body).substr(0, eq));
        std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) throw ParseError("empty key", line);
        cfg.entries_[std::move(key)] = std::move(value);
    }
    return cfg;
}

CurriculumConfig CurriculumConfig::defaults() { return parse(default_text); }

CurriculumConfig CurriculumConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config file '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

CurriculumConfig CurriculumConfig::with_defaults(const CurriculumConfig& overrides) {
    CurriculumConfig cfg = defaults();
    for (const auto& [k, v] : overrides.entries_) cfg.entries_[k] = v;
    return cfg;
}

bool CurriculumConfig::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> CurriculumConfig::get(std::string_view key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string CurriculumConfig::text(std::string_view key, std::string_view fallback) const {
    auto v = get(key);
    return v ? *v : std::string(fallback);
}

double CurriculumConfig::number(std::string_view key, std::string_view owner) const {
    auto v = get(key);
    if (!v) {
        std::string msg = "missing configuration key '" + std::string(key) + "'";
        if (!owner.empty()) msg += " required by " + std::string(owner);
        throw ConfigurationError(msg);
    }
    double out = 0.0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || ptr != v->data() + v->size())
        throw ConfigurationError("configuration key '" + std::string(key) + "' is not a number: '" + *v + "'");
    return out;
}

double CurriculumConfig::number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

void CurriculumConfig::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

void CurriculumConfig::erase(std::string_view key) {
    auto it = entries_.find(key);
    if (it != entries_.end()) entries_.erase(it);
}

std::string CurriculumConfig::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
}

}  // namespace forecast_forge::curriculum
