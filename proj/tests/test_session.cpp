#include <cmath>
#include <sstream>

#include "doctest.h"
#include "socsim/errors.hpp"
#include "socsim/session/session.hpp"

using namespace soc::session;

namespace {

struct Capture {
    std::vector<Message> messages;
    std::vector<std::string> lines;
    Sink sink() {
        return [this](const std::string& line) {
            lines.push_back(line);
            messages.push_back(decode(line));
        };
    }
    template <typename T>
    std::vector<Message> only() const {
        std::vector<Message> out;
        for (const auto& m : messages)
            if (m.is<T>()) out.push_back(m);
        return out;
    }
    std::vector<std::string> event_lines() const {
        std::vector<std::string> out;
        for (std::size_t i = 0; i < lines.size(); ++i)
            if (messages[i].is<EventMsg>()) out.push_back(lines[i]);
        return out;
    }
};

SessionConfig springblock_config(std::uint64_t max_ticks) {
    SessionConfig c;
    c.model = ModelKind::springblock;
    c.size = 5;
    c.seed = 3;
    c.max_ticks = max_ticks;
    c.corpus = "none";
    return c;
}

Message control(std::uint64_t k, Body b) { return Message{k, std::move(b)}; }

}  // namespace

TEST_CASE("session: zero drive gives 100 quiet ticks") {
    for (ModelKind kind : {ModelKind::springblock, ModelKind::sandpile, ModelKind::oslo}) {
        SessionConfig c = springblock_config(100);
        c.model = kind;
        Session s(c);
        ScriptedControls none({});
        Capture cap;
        const SessionLog log = s.run(none, cap.sink());
        const auto ticks = cap.only<TickMsg>();
        REQUIRE(ticks.size() == 100);
        for (std::size_t k = 0; k < ticks.size(); ++k) {
            CHECK(ticks[k].tick == k);
            CHECK(ticks[k].as<TickMsg>().size == 0);
            CHECK(ticks[k].as<TickMsg>().events == 0);
        }
        CHECK(cap.only<EventMsg>().empty());
        CHECK(cap.messages.front().is<Hello>());
        CHECK(cap.messages[1].is<ConfigMsg>());
        CHECK(cap.messages.back().is<Bye>());
        CHECK(cap.messages.back().as<Bye>().reason == "max_ticks");
        REQUIRE(log.records.size() == 1);
        CHECK(log.records.back().is<Stop>());
        CHECK(log.records.back().tick == 100);
    }
}

TEST_CASE("session: no quake before the drive is switched on") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SessionConfig c = springblock_config(600);
        c.seed = seed;
        Session s(c);
        ScriptedControls controls({control(10, SetDrive{{1.0, 0.0}})});
        Capture cap;
        s.run(controls, cap.sink());
        const auto events = cap.only<EventMsg>();
        REQUIRE(!events.empty());
        CHECK(events.front().tick >= 10);
        for (const auto& t : cap.only<TickMsg>()) {
            if (t.tick < 10) CHECK(t.as<TickMsg>().rate == 0.0);
            if (t.tick >= 10) CHECK(t.as<TickMsg>().rate == 0.01);
        }
    }
}

TEST_CASE("session: messages are ordered by tick") {
    SessionConfig c = springblock_config(300);
    c.stats_interval = 7;
    Session s(c);
    ScriptedControls controls({control(0, SetDrive{{3.0, 4.0}}), control(50, Drop{5, std::nullopt})});
    Capture cap;
    s.run(controls, cap.sink());
    for (std::size_t i = 1; i < cap.messages.size(); ++i) CHECK(cap.messages[i - 1].tick <= cap.messages[i].tick);
    const auto stats = cap.only<StatsMsg>();
    CHECK(stats.size() == 300 / 7);
    std::size_t seen = 0;
    for (const auto& e : cap.only<EventMsg>()) seen += e.tick <= stats.back().tick;
    CHECK(stats.back().as<StatsMsg>().events == seen);
}

TEST_CASE("session: replaying the log reproduces the event stream byte for byte") {
    for (ModelKind kind : {ModelKind::springblock, ModelKind::sandpile, ModelKind::oslo}) {
        SessionConfig c = springblock_config(0);
        c.model = kind;
        c.size = kind == ModelKind::oslo ? 16 : 6;
        c.corpus = "crackle";
        const auto corpus = load_corpus(c);
        Session s(c, &*corpus);
        ScriptedControls controls({
            control(2, SetDrive{{0.7, 0.2}}),
            control(40, Drop{3, std::nullopt}),
            control(41, Pause{true}),
            control(60, Pause{false}),
            control(90, SetDrive{{5.0, -2.0}}),
            control(90, Drop{1, soc::Coord{0, 0}}),
            control(150, Reset{}),
            control(151, SetDrive{{2.0, 0.0}}),
            control(260, Stop{}),
        });
        Capture cap;
        std::ostringstream live_log;
        RunOptions opts;
        opts.log = &live_log;
        const SessionLog log = s.run(controls, cap.sink(), opts);
        CHECK(!cap.only<GrainsMsg>().empty());

        std::ostringstream written;
        log.write(written);
        CHECK(written.str() == live_log.str());
        std::istringstream in(written.str());
        const SessionLog back = SessionLog::read(in);
        CHECK(back.records == log.records);
        CHECK(back.config.to_json() == c.to_json());

        std::ostringstream replayed;
        replay_events(back, replayed);
        std::string original;
        for (const auto& l : cap.event_lines()) original += l + "\n";
        CHECK(!original.empty());
        CHECK(replayed.str() == original);
    }
}

TEST_CASE("session: reset followed by the same controls repeats the stream") {
    auto run = [](std::vector<Message> controls) {
        SessionConfig c = springblock_config(0);
        c.model = ModelKind::sandpile;
        c.size = 8;
        c.corpus = "crackle";
        const auto corpus = load_corpus(c);
        Session s(c, &*corpus);
        ScriptedControls src(std::move(controls));
        Capture cap;
        s.run(src, cap.sink());
        return cap;
    };
    const auto a = run({control(5, SetDrive{{0.0, 2.0}}), control(30, Drop{4, soc::Coord{3, 3}}),
                        control(100, Reset{}), control(105, SetDrive{{0.0, 2.0}}),
                        control(130, Drop{4, soc::Coord{3, 3}}), control(200, Stop{})});
    const auto b = run({control(5, SetDrive{{0.0, 2.0}}), control(30, Drop{4, soc::Coord{3, 3}}),
                        control(100, Stop{})});
    auto bodies = [](const Capture& cap, std::uint64_t from, std::uint64_t to) {
        std::vector<std::string> out;
        for (const auto& m : cap.messages) {
            if (m.tick < from || m.tick >= to) continue;
            // Grain onsets are session time, so only their choice and level must repeat.
            Message copy = m;
            copy.tick = 0;
            if (m.is<GrainsMsg>()) {
                auto g = m.as<GrainsMsg>();
                for (auto& e : g.entries) e.onset = 0.0;
                copy.body = g;
            } else if (!m.is<EventMsg>()) {
                continue;
            }
            out.push_back(encode(copy));
        }
        return out;
    };
    const auto after_reset = bodies(a, 100, 200);
    const auto fresh = bodies(b, 0, 100);
    CHECK(!fresh.empty());
    CHECK(after_reset == fresh);
}

TEST_CASE("session: piles take fractional drive rates") {
    SessionConfig c = springblock_config(100);
    c.model = ModelKind::sandpile;
    c.size = 4;
    c.drive = {0.5, 0.0};
    Session s(c);
    ScriptedControls none({});
    Capture cap;
    s.run(none, cap.sink());
    double lost = 0.0;
    for (const auto& e : cap.only<EventMsg>()) lost += e.as<EventMsg>().event.boundary_loss;
    const auto ticks = cap.only<TickMsg>();
    CHECK(ticks.back().as<TickMsg>().load + lost == 50.0);
    CHECK(ticks.front().as<TickMsg>().rate == 0.5);
}

TEST_CASE("session: pause freezes the drive, controls still apply") {
    SessionConfig c = springblock_config(60);
    c.model = ModelKind::oslo;
    c.size = 8;
    c.drive = {1.0, 0.0};
    Session s(c);
    ScriptedControls controls({control(10, Pause{true}), control(20, Drop{2, std::nullopt}),
                               control(30, Pause{false})});
    Capture cap;
    s.run(controls, cap.sink());
    const auto ticks = cap.only<TickMsg>();
    for (std::size_t k = 11; k < 20; ++k) CHECK(ticks[k].as<TickMsg>().load == ticks[10].as<TickMsg>().load);
    CHECK(ticks[15].as<TickMsg>().paused);
    CHECK(ticks[20].as<TickMsg>().load >= ticks[19].as<TickMsg>().load);
    CHECK_FALSE(ticks[30].as<TickMsg>().paused);
}

TEST_CASE("session: bad controls are reported and the session goes on") {
    SessionConfig c = springblock_config(20);
    c.model = ModelKind::sandpile;
    c.size = 4;
    Session s(c);
    ScriptedControls controls({control(3, Drop{1, soc::Coord{9, 9}}), control(4, SetDrive{{1e308, 1e308}})});
    Capture cap;
    const auto log = s.run(controls, cap.sink());
    const auto errors = cap.only<ErrorMsg>();
    REQUIRE(errors.size() == 2);
    CHECK(errors[0].tick == 3);
    CHECK(errors[0].as<ErrorMsg>().code == "bad_control");
    CHECK(cap.only<TickMsg>().size() == 20);
    CHECK(log.records.size() == 3);
}

TEST_CASE("session: divergence ends the session with an error and a clean log") {
    SessionConfig c = springblock_config(0);
    c.model = ModelKind::sandpile;
    c.size = 3;
    c.z_c = 1;
    c.sweep_cap = 1000;
    Session s(c);
    ScriptedControls controls({control(4, Drop{1, soc::Coord{1, 1}})});
    Capture cap;
    const auto log = s.run(controls, cap.sink());
    const auto errors = cap.only<ErrorMsg>();
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].as<ErrorMsg>().code == "divergence");
    CHECK(cap.messages.back().as<Bye>().reason == "divergence");
    CHECK(log.records.back().is<Stop>());
    CHECK(log.records.back().tick == 4);
}

TEST_CASE("session: grains follow their event") {
    SessionConfig c = springblock_config(200);
    c.corpus = "crackle";
    c.drive = {2.0, 0.0};
    const auto corpus = load_corpus(c);
    Session s(c, &*corpus);
    ScriptedControls none({});
    Capture cap;
    s.run(none, cap.sink());
    std::size_t checked = 0;
    for (std::size_t i = 0; i + 1 < cap.messages.size(); ++i) {
        if (!cap.messages[i].is<EventMsg>()) continue;
        const auto& ev = cap.messages[i].as<EventMsg>().event;
        REQUIRE(cap.messages[i + 1].is<GrainsMsg>());
        const auto& g = cap.messages[i + 1].as<GrainsMsg>();
        CHECK(g.event_id == ev.event_id);
        std::size_t want = 0;
        for (const auto& step : ev.steps) want += std::min<std::size_t>(step.size(), c.mapping.density_cap);
        CHECK(g.entries.size() == want);
        for (const auto& e : g.entries) {
            CHECK(e.onset >= double(cap.messages[i].tick) * c.tick_seconds);
            CHECK(e.grain_index < corpus->grains.size());
        }
        ++checked;
    }
    CHECK(checked > 0);
}

TEST_CASE("session: live controls and stop request") {
    LiveControls live;
    live.push(control(99, Drop{2, std::nullopt}));
    auto first = live.poll(0);
    REQUIRE(first.size() == 1);
    CHECK(live.poll(1).empty());
    live.request_stop();
    auto last = live.poll(2);
    REQUIRE(last.size() == 1);
    CHECK(last[0].is<Stop>());

    SessionConfig c = springblock_config(0);
    Session s(c);
    LiveControls stopper;
    stopper.request_stop();
    Capture cap;
    const auto log = s.run(stopper, cap.sink());
    CHECK(cap.messages.back().as<Bye>().reason == "stop");
    CHECK(log.records.size() == 1);
}

TEST_CASE("session config: key-value, JSON and validation") {
    const auto c = SessionConfig::from_pairs({{"model", "sandpile"}, {"size", "16"}, {"seed", "9"},
                                              {"sonify.gain", "0.3"}, {"drive_x", "1.5"}});
    CHECK(c.width == 16);
    CHECK(c.height == 16);
    CHECK(c.mapping.gain == 0.3);
    CHECK(c.effective_rate_scale() == 1.0);
    const auto j = c.to_json();
    CHECK(j["model"] == "sandpile");
    CHECK(j.contains("z_c"));
    CHECK_FALSE(j.contains("alpha"));
    CHECK(SessionConfig::from_json(j).to_json() == j);
    CHECK(SessionConfig::from_json(springblock_config(7).to_json()).to_json() == springblock_config(7).to_json());

    CHECK_THROWS_AS(SessionConfig::from_pairs({{"tick_seconds", "0.001"}}), soc::ConfigError);
    CHECK_THROWS_AS(SessionConfig::from_pairs({{"model", "lava"}}), soc::ConfigError);
    CHECK_THROWS_AS(SessionConfig::from_pairs({{"colour", "red"}}), soc::ConfigError);
    CHECK_THROWS_AS(SessionConfig::from_pairs({{"sonify.colour", "red"}}), soc::ConfigError);
    CHECK_THROWS_AS(SessionConfig::from_pairs({{"size", "1"}}), soc::ConfigError);
    try {
        SessionConfig::from_pairs({{"alpha", "0.3"}});
        FAIL("expected ConfigError");
    } catch (const soc::ConfigError& e) {
        CHECK(std::string(e.what()).find("(0, 0.25]") != std::string::npos);
    }
}

TEST_CASE("session log: malformed logs are rejected") {
    const std::string header = encode({0, ConfigMsg{springblock_config(0).to_json()}});
    auto read = [](const std::string& text) {
        std::istringstream in(text);
        return SessionLog::read(in);
    };
    CHECK_NOTHROW(read(header + "\n" + encode({3, Stop{}}) + "\n"));
    CHECK_THROWS_AS(read(""), soc::ParseError);
    CHECK_THROWS_AS(read(header + "\n"), soc::ParseError);
    CHECK_THROWS_AS(read(encode({3, Stop{}}) + "\n"), soc::ParseError);
    CHECK_THROWS_AS(read(header + "\n" + encode({1, Bye{"x"}}) + "\n" + encode({3, Stop{}}) + "\n"), soc::ParseError);
    CHECK_THROWS_AS(read(header + "\n" + encode({5, Reset{}}) + "\n" + encode({3, Stop{}}) + "\n"), soc::ParseError);
    CHECK_THROWS_AS(read(header + "\n" + encode({3, Stop{}}) + "\n" + encode({4, Reset{}}) + "\n"), soc::ParseError);
    try {
        read(header + "\n{\"t\":\"control.stop\",\"k\":x}\n");
        FAIL("expected ParseError");
    } catch (const soc::ParseError& e) {
        CHECK(e.offset() > header.size());
    }
}
