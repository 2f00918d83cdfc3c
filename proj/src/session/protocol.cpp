#include "socsim/session/protocol.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "socsim/errors.hpp"

namespace soc::session {

namespace {

using json = nlohmann::ordered_json;

constexpr std::array<std::string_view, 13> kTypes = {
    "hello", "config", "tick", "event", "grains", "stats", "control.set_drive",
    "control.drop", "control.pause", "control.reset", "control.stop", "error", "bye"};

// Byte range of the value stored under a top-level key of a JSON object
// that nlohmann has already accepted, so the scan can assume valid syntax.
class Scanner {
public:
    explicit Scanner(std::string_view s) : s_(s) {}

    std::optional<std::pair<std::size_t, std::size_t>> value_of(std::string_view key) {
        p_ = 0;
        ws();
        if (p_ >= s_.size() || s_[p_] != '{') return std::nullopt;
        ++p_;
        for (;;) {
            ws();
            if (p_ >= s_.size() || s_[p_] == '}') return std::nullopt;
            const std::size_t kb = p_;
            skip_string();
            const std::string_view k = s_.substr(kb + 1, p_ - kb - 2);
            ws();
            ++p_;  // ':'
            ws();
            const std::size_t vb = p_;
            skip_value();
            if (k == key) return std::make_pair(vb, p_);
            ws();
            if (p_ < s_.size() && s_[p_] == ',') ++p_;
        }
    }

private:
    void ws() {
        while (p_ < s_.size() && (s_[p_] == ' ' || s_[p_] == '\t' || s_[p_] == '\n' || s_[p_] == '\r')) ++p_;
    }
    void skip_string() {
        ++p_;
        while (p_ < s_.size() && s_[p_] != '"') p_ += (s_[p_] == '\\') ? 2 : 1;
        ++p_;
    }
    void skip_value() {
        int depth = 0;
        while (p_ < s_.size()) {
            const char c = s_[p_];
            if (c == '"') {
                skip_string();
                if (depth == 0) return;
                continue;
            }
            if (c == '{' || c == '[') ++depth;
            if (c == '}' || c == ']') {
                if (depth == 0) return;
                if (--depth == 0) {
                    ++p_;
                    return;
                }
            }
            if (depth == 0 && (c == ',' || c == ' ' || c == '\t' || c == '\r' || c == '\n')) return;
            ++p_;
        }
    }

    std::string_view s_;
    std::size_t p_ = 0;
};

class Fields {
public:
    Fields(const json& j, std::string_view line) : j_(j), line_(line) {}

    [[noreturn]] void fail(std::string_view key, const std::string& what) const {
        Scanner sc(line_);
        if (auto r = sc.value_of(key)) throw ProtocolError(what, r->first, r->second);
        throw ProtocolError(what, 0, line_.size());
    }

    bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

    const json& need(const char* key) const {
        if (!j_.contains(key)) fail(key, std::string("missing field '") + key + "'");
        return j_.at(key);
    }

    double real(const char* key) const {
        const json& v = need(key);
        if (!v.is_number()) fail(key, std::string("field '") + key + "' must be a number");
        return v.get<double>();
    }
    std::optional<double> maybe_real(const char* key) const {
        if (!has(key)) return std::nullopt;
        return real(key);
    }
    std::uint64_t count(const char* key) const {
        const json& v = need(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            fail(key, std::string("field '") + key + "' must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool flag(const char* key) const {
        const json& v = need(key);
        if (!v.is_boolean()) fail(key, std::string("field '") + key + "' must be true or false");
        return v.get<bool>();
    }
    std::string text(const char* key) const {
        const json& v = need(key);
        if (!v.is_string()) fail(key, std::string("field '") + key + "' must be a string");
        return v.get<std::string>();
    }
    std::array<double, 2> pair(const char* key) const {
        const json& v = need(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
            fail(key, std::string("field '") + key + "' must be [x, y]");
        return {v[0].get<double>(), v[1].get<double>()};
    }
    Coord coord(const char* key) const {
        const json& v = need(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
            fail(key, std::string("field '") + key + "' must be [row, col]");
        return {v[0].get<int>(), v[1].get<int>()};
    }

private:
    const json& j_;
    std::string_view line_;
};

json coord_json(Coord c) { return json::array({c.row, c.col}); }

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

double wire_round(double x) {
    if (!std::isfinite(x)) return x;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return std::strtod(buf, nullptr);
}

std::string_view Message::type() const { return kTypes[body.index()]; }

bool Message::is_control() const {
    return is<SetDrive>() || is<Drop>() || is<Pause>() || is<Reset>() || is<Stop>();
}

std::string encode(const Message& msg) {
    json j;
    j["t"] = msg.type();
    j["k"] = msg.tick;
    std::visit(Overloaded{
                   [&](const Hello& m) {
                       j["server"] = m.server;
                       j["protocol"] = m.protocol;
                   },
                   [&](const ConfigMsg& m) { j["config"] = m.config; },
                   [&](const TickMsg& m) {
                       j["events"] = m.events;
                       j["size"] = m.size;
                       j["load"] = m.load;
                       j["rate"] = m.rate;
                       j["v"] = json::array({m.v[0], m.v[1]});
                       j["paused"] = m.paused;
                   },
                   [&](const EventMsg& m) {
                       const CascadeEvent& e = m.event;
                       j["id"] = e.event_id;
                       j["trigger"] = coord_json(e.trigger_site);
                       j["size"] = e.size;
                       j["area"] = e.area;
                       j["duration"] = e.duration;
                       j["loss"] = e.boundary_loss;
                       j["magnitude"] = wire_round(e.magnitude);
                       if (m.has_moment) j["moment"] = e.moment;
                       json steps = json::array();
                       for (const Step& step : e.steps) {
                           json s = json::array();
                           for (const Slip& slip : step)
                               s.push_back(json::array({slip.site.row, slip.site.col, slip.amount}));
                           steps.push_back(std::move(s));
                       }
                       j["steps"] = std::move(steps);
                   },
                   [&](const GrainsMsg& m) {
                       j["event"] = m.event_id;
                       json entries = json::array();
                       for (const auto& g : m.entries) {
                           json e;
                           e["onset"] = g.onset;
                           e["grain"] = g.grain_index;
                           e["amp"] = g.amplitude;
                           e["pitch"] = g.pitch_ratio;
                           entries.push_back(std::move(e));
                       }
                       j["entries"] = std::move(entries);
                   },
                   [&](const StatsMsg& m) {
                       j["events"] = m.events;
                       j["max_size"] = m.max_size;
                       j["decades"] = wire_round(m.decades);
                       j["s_min"] = m.s_min;
                       j["tau"] = m.tau ? json(wire_round(*m.tau)) : json(nullptr);
                       j["stderr"] = m.std_error ? json(wire_round(*m.std_error)) : json(nullptr);
                       json h = json::array();
                       for (const auto& [c, d] : m.histogram) h.push_back(json::array({wire_round(c), wire_round(d)}));
                       j["histogram"] = std::move(h);
                   },
                   [&](const SetDrive& m) { j["v"] = json::array({m.v[0], m.v[1]}); },
                   [&](const Drop& m) {
                       j["n"] = m.n;
                       if (m.site) j["site"] = coord_json(*m.site);
                   },
                   [&](const Pause& m) { j["paused"] = m.paused; },
                   [&](const Reset&) {},
                   [&](const Stop&) {},
                   [&](const ErrorMsg& m) {
                       j["code"] = m.code;
                       j["message"] = m.message;
                   },
                   [&](const Bye& m) { j["reason"] = m.reason; },
               },
               msg.body);
    return j.dump();
}

Message decode(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        const std::size_t at = e.byte == 0 ? 0 : std::min<std::size_t>(e.byte - 1, line.size());
        throw ProtocolError("malformed JSON", at, std::min(at + 1, line.size()));
    }
    if (!j.is_object()) throw ProtocolError("message must be a JSON object", 0, line.size());
    const Fields f(j, line);

    const std::string type = f.text("t");
    Message msg;
    msg.tick = f.count("k");

    if (type == "hello") {
        Hello m;
        m.server = f.text("server");
        m.protocol = static_cast<int>(f.count("protocol"));
        msg.body = m;
    } else if (type == "config") {
        const json& c = f.need("config");
        if (!c.is_object()) f.fail("config", "field 'config' must be an object");
        msg.body = ConfigMsg{c};
    } else if (type == "tick") {
        TickMsg m;
        m.events = f.count("events");
        m.size = f.count("size");
        m.load = f.real("load");
        m.rate = f.real("rate");
        m.v = f.pair("v");
        m.paused = f.flag("paused");
        msg.body = m;
    } else if (type == "event") {
        EventMsg m;
        CascadeEvent& e = m.event;
        e.event_id = f.count("id");
        e.trigger_site = f.coord("trigger");
        e.size = f.count("size");
        e.area = f.count("area");
        e.duration = f.count("duration");
        e.boundary_loss = f.real("loss");
        e.magnitude = f.real("magnitude");
        if (f.has("moment")) {
            m.has_moment = true;
            e.moment = f.real("moment");
        }
        const json& steps = f.need("steps");
        if (!steps.is_array()) f.fail("steps", "field 'steps' must be an array");
        for (const json& s : steps) {
            if (!s.is_array()) f.fail("steps", "each step must be an array of [row, col, amount]");
            Step step;
            for (const json& slip : s) {
                if (!slip.is_array() || slip.size() != 3 || !slip[0].is_number_integer() ||
                    !slip[1].is_number_integer() || !slip[2].is_number())
                    f.fail("steps", "each slip must be [row, col, amount]");
                step.push_back({{slip[0].get<int>(), slip[1].get<int>()}, slip[2].get<double>()});
            }
            e.steps.push_back(std::move(step));
        }
        msg.body = std::move(m);
    } else if (type == "grains") {
        GrainsMsg m;
        m.event_id = f.count("event");
        const json& entries = f.need("entries");
        if (!entries.is_array()) f.fail("entries", "field 'entries' must be an array");
        for (const json& e : entries) {
            if (!e.is_object()) f.fail("entries", "each entry must be an object");
            const Fields g(e, line);
            sonify::GrainEntry entry;
            try {
                entry.onset = g.real("onset");
                entry.grain_index = g.count("grain");
                entry.amplitude = g.real("amp");
                entry.pitch_ratio = g.real("pitch");
            } catch (const ProtocolError& err) {
                f.fail("entries", err.what());
            }
            m.entries.push_back(entry);
        }
        msg.body = std::move(m);
    } else if (type == "stats") {
        StatsMsg m;
        m.events = f.count("events");
        m.max_size = f.count("max_size");
        m.decades = f.real("decades");
        m.s_min = f.count("s_min");
        m.tau = f.maybe_real("tau");
        m.std_error = f.maybe_real("stderr");
        const json& h = f.need("histogram");
        if (!h.is_array()) f.fail("histogram", "field 'histogram' must be an array");
        for (const json& b : h) {
            if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
                f.fail("histogram", "each bin must be [center, density]");
            m.histogram.push_back({b[0].get<double>(), b[1].get<double>()});
        }
        msg.body = std::move(m);
    } else if (type == "control.set_drive") {
        msg.body = SetDrive{f.pair("v")};
    } else if (type == "control.drop") {
        Drop m;
        m.n = f.count("n");
        if (m.n > kMaxDrop) f.fail("n", "field 'n' exceeds " + std::to_string(kMaxDrop));
        if (f.has("site")) m.site = f.coord("site");
        msg.body = m;
    } else if (type == "control.pause") {
        msg.body = Pause{f.flag("paused")};
    } else if (type == "control.reset") {
        msg.body = Reset{};
    } else if (type == "control.stop") {
        msg.body = Stop{};
    } else if (type == "error") {
        msg.body = ErrorMsg{f.text("code"), f.text("message")};
    } else if (type == "bye") {
        msg.body = Bye{f.text("reason")};
    } else {
        f.fail("t", "unknown message type '" + type + "'");
    }
    return msg;
}

}  // namespace soc::session
