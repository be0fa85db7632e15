#include <cmath>
#include <string>

#include "forecast_forge/curriculum.hpp"
#include "forecast_forge/errors.hpp"

namespace forecast_forge::curriculum {

namespace {

using world::Action;

Ref F(int id) { return {RefKind::forecast, id}; }
Ref O(int id) { return {RefKind::option, id}; }
Ref A(int id) { return {RefKind::alias, id}; }

double flag(bool b) { return b ? 1.0 : 0.0; }

ActionExpr constant_cumulant(double c) {
    return [c](const Snapshot&, Action) { return c; };
}

ValueExpr constant(double v) {
    return [v](const Snapshot&) { return v; };
}

ValueExpr forecast_value(int id) {
    return [id](const Snapshot& s) { return s.f(id); };
}

class Builder {
public:
    explicit Builder(const CurriculumConfig& config) : config_(config) {
        floor_ = config.number("beta.floor", "option termination");
        truth_ = config.number("theta.truth.1", "probability conditions");
        mode_ = gvf::parse_termination_mode(config.text("termination.default", "post_step"));
    }

    double theta(const std::string& entity, int k) const {
        return config_.number("theta." + entity + "." + std::to_string(k), entity);
    }

    void primitive(int id, std::string name, std::string abbrev, Action action) {
        OptionSpec o;
        o.id = id;
        o.name = std::move(name);
        o.abbrev = std::move(abbrev);
        o.layer = 0;
        o.policy = PolicyKind::primitive;
        o.action = action;
        o.mode = gvf::TerminationMode::one_step;
        e.options.push_back(std::move(o));
    }

    OptionSpec& option(int id, std::string name, std::string abbrev, int layer, PolicyKind policy) {
        OptionSpec o;
        o.id = id;
        o.name = std::move(name);
        o.abbrev = std::move(abbrev);
        o.layer = layer;
        o.policy = policy;
        o.mode = mode_;
        e.options.push_back(std::move(o));
        e.order.push_back(O(id));
        return e.options.back();
    }

    ForecastSpec& forecast(int id, std::string name, std::string abbrev, int layer, int option, ValueKind kind) {
        ForecastSpec f;
        f.id = id;
        f.name = std::move(name);
        f.abbrev = std::move(abbrev);
        f.layer = layer;
        f.option = option;
        f.kind = kind;
        e.forecasts.push_back(std::move(f));
        e.order.push_back(F(id));
        return e.forecasts.back();
    }

    AliasSpec& alias(int id, std::string name, std::string abbrev, int layer, bool boolean) {
        AliasSpec a;
        a.id = id;
        a.name = std::move(name);
        a.abbrev = std::move(abbrev);
        a.layer = layer;
        a.boolean = boolean;
        e.aliases.push_back(std::move(a));
        e.order.push_back(A(id));
        return e.aliases.back();
    }

    /// Clock ring around `base`: slots 1..6 rotate right then read the
    /// previous slot, slots 7..11 rotate left then read the next slot.
    /// Slots are introduced 1..6 then 11..7 so each one's reference exists.
    void ring(const std::string& name, const std::string& abbrev, int base, int first_id, int layer, ValueKind kind) {
        Ring ring{abbrev, base, {}};
        for (int slot = 1; slot <= 11; ++slot) ring.members[static_cast<std::size_t>(slot - 1)] = first_id + slot - 1;
        auto add = [&](int slot) {
            const int id = ring.member(slot);
            const bool right = slot <= 6;
            const int from = ring.member(right ? slot - 1 : slot + 1);
            auto& f = forecast(id, name + " (" + std::to_string(slot) + ")", abbrev + "(" + std::to_string(slot) + ")",
                               layer, right ? 4 : 3, kind);
            f.cumulant = constant_cumulant(0.0);
            f.terminal = forecast_value(from);
            f.refs = {F(from)};
        };
        for (int slot = 1; slot <= 6; ++slot) add(slot);
        for (int slot = 11; slot >= 7; --slot) add(slot);
        e.rings.push_back(ring);
    }

    Entities e;
    double floor_ = 0.1;
    double truth_ = 0.5;
    gvf::TerminationMode mode_ = gvf::TerminationMode::post_step;

private:
    const CurriculumConfig& config_;
};

}  // namespace

Entities standard_entities(const CurriculumConfig& config) {
    Builder b(config);
    const double floor = b.floor_;
    const double truth = b.truth_;

    b.primitive(1, "roll forward", "rf", Action::rf);
    b.primitive(2, "roll backward", "rb", Action::rb);
    b.primitive(3, "rotate left", "rotl", Action::rotl);
    b.primitive(4, "rotate right", "rotr", Action::rotr);
    b.primitive(5, "extend finger", "ef", Action::ef);

    // Layer 1
    {
        auto& f = b.forecast(1, "TOUCH", "T", 1, 5, ValueKind::probability);
        f.cumulant = constant_cumulant(0.0);
        f.terminal = [](const Snapshot& s) { return flag(s.touch); };
    }
    // Layer 2
    for (auto [id, name, abbrev, opt] : {std::tuple{2, "TOUCH LEFT", "TL", 3}, std::tuple{3, "TOUCH RIGHT", "TR", 4}}) {
        auto& f = b.forecast(id, name, abbrev, 2, opt, ValueKind::probability);
        f.cumulant = constant_cumulant(0.0);
        f.terminal = forecast_value(1);
        f.refs = {F(1)};
    }
    // Layer 3
    b.ring("TOUCHMAP", "TM", 1, 4, 3, ValueKind::probability);

    // Layer 4
    {
        auto& o = b.option(6, "rotate to touch", "rtt", 4, PolicyKind::maximize);
        o.termination = [truth, floor](const Snapshot& s) { return s.f(1) > truth ? 1.0 : floor; };
        o.objective_cumulant = constant_cumulant(0.0);
        o.objective_terminal = forecast_value(1);
        o.admissible = {Action::rotl, Action::rotr, Action::ef};
        o.refs = {F(1)};
        auto& f = b.forecast(15, "TOUCH ADJACENT", "TA", 4, 6, ValueKind::probability);
        f.cumulant = constant_cumulant(0.0);
        f.terminal = forecast_value(1);
        f.refs = {F(1)};
    }

    // Layer 5
    {
        auto& rfta = b.option(7, "roll forward to adjacent", "rfta", 5, PolicyKind::fixed);
        rfta.action = Action::rf;
        rfta.termination = forecast_value(15);
        rfta.refs = {F(15)};
        const double th = b.theta("rftt", 1);
        auto& rftt = b.option(8, "roll forward to touch", "rftt", 5, PolicyKind::fixed);
        rftt.action = Action::rf;
        rftt.termination = [th](const Snapshot& s) { return s.f(15) > th ? 1.0 : 0.0; };
        rftt.refs = {F(15)};

        const std::string which = config.text("option.dta", "rftt");
        if (which != "rftt" && which != "rfta")
            throw ConfigurationError("option.dta must be rftt or rfta, got '" + which + "'");
        const int opt = which == "rftt" ? 8 : 7;
        auto& dta = b.forecast(16, "DISTANCE TO TA", "DTA", 5, opt, ValueKind::count);
        dta.cumulant = constant_cumulant(1.0);
        dta.terminal = constant(0.0);
        const double nta_th = b.theta("nta", 1);
        auto& nta = b.forecast(17, "NEAR TA", "NTA", 5, opt, ValueKind::probability);
        nta.cumulant = constant_cumulant(0.0);
        nta.terminal = [nta_th](const Snapshot& s) { return flag(s.f(15) > nta_th); };
        nta.refs = {F(15)};
    }

    // Layer 6
    b.ring("DISTANCE-TO-TA MAP", "DTAM", 16, 18, 6, ValueKind::count);
    const Ring dtam = b.e.rings.back();

    // Layer 7
    {
        const double t1 = b.theta("wall", 1), t2 = b.theta("wall", 2), t3 = b.theta("wall", 3);
        struct WallOption {
            int id;
            const char* name;
            const char* abbrev;
            Action action;
            int slot;
            int forecast;
            const char* fname;
            const char* fabbrev;
        };
        const WallOption walls[] = {
            {9, "roll forward along wall on right", "rfwr", Action::rf, 3, 29, "WALL RIGHT, FORWARD", "WRF"},
            {10, "roll forward along wall on left", "rfwl", Action::rf, 9, 30, "WALL LEFT, FORWARD", "WLF"},
            {11, "roll backward along wall on right", "rbwr", Action::rb, 3, 31, "WALL RIGHT, BACKWARD", "WRB"},
            {12, "roll backward along wall on left", "rbwl", Action::rb, 9, 32, "WALL LEFT, BACKWARD", "WLB"},
        };
        for (const auto& w : walls) {
            const int side = dtam.member(w.slot);
            auto& o = b.option(w.id, w.name, w.abbrev, 7, PolicyKind::fixed);
            o.action = w.action;
            o.initiation = [side, t1, t2](const Snapshot& s) { return t1 < s.f(side) && s.f(side) < t2; };
            o.termination = [side, t1, t2, t3, floor](const Snapshot& s) {
                const bool in_range = t1 < s.f(side) && s.f(side) < t2;
                return (s.f(15) > t3 || !in_range) ? 1.0 : floor;
            };
            o.refs = {F(15), F(side)};
        }
        for (const auto& w : walls) {
            auto& f = b.forecast(w.forecast, w.fname, w.fabbrev, 7, w.id, ValueKind::count);
            f.cumulant = constant_cumulant(1.0);
            f.terminal = constant(0.0);
        }
    }

    // Layer 8
    {
        const double th = b.theta("wlr", 1);
        auto& wlr = b.alias(1, "Wall Left or Right", "WLR", 8, true);
        wlr.expression = [th](const Snapshot& s) {
            return flag(s.f(29) > th || s.f(30) > th || s.f(31) > th || s.f(32) > th);
        };
        wlr.refs = {F(29), F(30), F(31), F(32)};
        auto wall_reached = [floor](const Snapshot& s) { return s.a(1) > 0.5 ? 1.0 : floor; };
        auto& mrw = b.option(13, "move randomly until wall left or right", "mrw", 8, PolicyKind::uniform);
        mrw.termination = wall_reached;
        mrw.refs = {A(1)};
        auto& mcwp = b.option(14, "move to canonical wall position", "mcwp", 8, PolicyKind::maximize);
        mcwp.termination = wall_reached;
        mcwp.objective_cumulant = constant_cumulant(0.0);
        mcwp.objective_terminal = [](const Snapshot& s) { return s.a(1); };
        mcwp.refs = {A(1)};
        for (auto [id, name, abbrev, opt] :
             {std::tuple{33, "WALL DISTANCE A", "WDA", 13}, std::tuple{34, "WALL DISTANCE B", "WDB", 14}}) {
            auto& f = b.forecast(id, name, abbrev, 8, opt, ValueKind::count);
            f.cumulant = constant_cumulant(1.0);
            f.terminal = constant(0.0);
        }
    }

    // Layer 9
    {
        const double t1 = b.theta("wa", 1), t2 = b.theta("wa", 2);
        auto& wa = b.alias(2, "Wall Adjacent", "WA", 9, true);
        wa.expression = [t1, t2](const Snapshot& s) { return flag(s.f(15) > t1 && s.f(33) < t2); };
        wa.refs = {F(15), F(33)};
        auto& rfw = b.option(15, "roll forward to wall", "rfw", 9, PolicyKind::fixed);
        rfw.action = Action::rf;
        rfw.termination = [floor](const Snapshot& s) { return s.a(2) > 0.5 ? 1.0 : floor; };
        rfw.refs = {A(2)};
        auto& dw = b.forecast(35, "DISTANCE TO WALL", "DW", 9, 15, ValueKind::count);
        dw.cumulant = constant_cumulant(1.0);
        dw.terminal = constant(0.0);
    }
    b.ring("DISTANCE-TO-WALL MAP", "DWM", 35, 36, 9, ValueKind::count);
    const Ring dwm = b.e.rings.back();

    // Layer 10
    {
        const int d0 = dwm.member(0), d3 = dwm.member(3), d6 = dwm.member(6), d9 = dwm.member(9);
        auto& lrfs = b.alias(3, "Left-Right Free Space", "LRFS", 10, false);
        lrfs.expression = [d3, d9](const Snapshot& s) { return s.f(d3) + s.f(d9); };
        lrfs.refs = {F(d3), F(d9)};
        auto& fbfs = b.alias(4, "Front-back Free Space", "FBFS", 10, false);
        fbfs.expression = [d0, d6](const Snapshot& s) { return s.f(d0) + s.f(d6); };
        fbfs.refs = {F(d0), F(d6)};
        const double lrc_tol = b.theta("lrc", 1), fbc_tol = b.theta("fbc", 1);
        auto& lrc = b.alias(5, "Left-right Centered", "LRC", 10, true);
        lrc.expression = [d3, d9, lrc_tol](const Snapshot& s) { return flag(std::abs(s.f(d3) - s.f(d9)) <= lrc_tol); };
        lrc.refs = {F(d3), F(d9)};
        auto& fbc = b.alias(6, "Front-Back Centered", "FBC", 10, true);
        fbc.expression = [d0, d6, fbc_tol](const Snapshot& s) { return flag(std::abs(s.f(d0) - s.f(d6)) <= fbc_tol); };
        fbc.refs = {F(d0), F(d6)};
        const double r1 = b.theta("r", 1);
        auto& room = b.alias(7, "Room", "R", 10, true);
        room.expression = [d0, d3, d6, d9, r1](const Snapshot& s) {
            return flag(s.f(d0) < r1 && s.f(d3) < r1 && s.f(d6) < r1 && s.f(d9) < r1);
        };
        room.refs = {F(d0), F(d3), F(d6), F(d9)};
        auto& cr = b.alias(8, "Centered in a Room", "CR", 10, true);
        cr.expression = [](const Snapshot& s) { return flag(s.a(7) > 0.5 && s.a(5) > 0.5 && s.a(6) > 0.5); };
        cr.refs = {A(7), A(5), A(6)};
        const double m3 = b.theta("mh", 3), m4 = b.theta("mh", 4);
        auto& mh = b.alias(9, "Middle of Hall", "MH", 10, true);
        mh.expression = [m3, m4](const Snapshot& s) { return flag(s.a(8) > 0.5 && s.a(3) < m3 && s.a(4) > m4); };
        mh.refs = {A(8), A(3), A(4)};
        auto& ra = b.alias(10, "Room Area", "RA", 10, false);
        ra.expression = [](const Snapshot& s) { return s.a(3) * s.a(4); };
        ra.refs = {A(3), A(4)};
        const double s5 = b.theta("sr", 5);
        auto& sr = b.alias(11, "Small Room", "SR", 10, true);
        sr.expression = [s5](const Snapshot& s) { return flag(s.a(8) > 0.5 && s.a(10) < s5); };
        sr.refs = {A(8), A(10)};
        const double l6 = b.theta("lr", 6), l7 = b.theta("lr", 7);
        auto& lr = b.alias(12, "Large Room", "LR", 10, true);
        lr.expression = [l6, l7](const Snapshot& s) { return flag(s.a(8) > 0.5 && l6 < s.a(10) && s.a(10) < l7); };
        lr.refs = {A(8), A(10)};

        auto maximize_alias = [&](int id, const char* name, const char* abbrev, int alias_id) {
            auto& o = b.option(id, name, abbrev, 10, PolicyKind::maximize);
            o.termination = [alias_id, floor](const Snapshot& s) { return s.a(alias_id) > 0.5 ? 1.0 : floor; };
            o.objective_cumulant = constant_cumulant(0.0);
            o.objective_terminal = [alias_id](const Snapshot& s) { return s.a(alias_id); };
            o.refs = {A(alias_id)};
        };
        maximize_alias(16, "go to middle of hallway", "gmh", 9);
        maximize_alias(17, "go to center of room", "gcr", 8);
        auto& gfr = b.option(18, "go forward into room", "gfr", 10, PolicyKind::fixed);
        gfr.action = Action::rf;
        gfr.termination = [](const Snapshot& s) { return s.a(7); };
        gfr.refs = {A(7)};
    }

    // Layer 11
    {
        auto& dr = b.forecast(47, "DISTANCE TO ROOM", "DR", 11, 18, ValueKind::count);
        dr.cumulant = constant_cumulant(1.0);
        dr.terminal = constant(0.0);
        const double t1 = b.theta("d", 1), t2 = b.theta("d", 2);
        const int left = dtam.member(3), right = dtam.member(9);
        auto& d = b.alias(13, "Doorway", "D", 11, true);
        d.expression = [left, right, t1, t2](const Snapshot& s) {
            return flag(s.f(left) < t1 && s.f(right) < t1 && s.f(47) < t2);
        };
        d.refs = {F(left), F(right), F(47)};
    }
    return std::move(b.e);
}

Registry build_standard_curriculum(const CurriculumConfig& config) {
    return Registry::assemble(standard_entities(config), config);
}

}  // namespace forecast_forge::curriculum
