#include <algorithm>
#include <atomic>
#include <chrono>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "socsim/errors.hpp"
#include "socsim/session/server.hpp"
#include "socsim/sonify/wav.hpp"

using namespace soc::session;

namespace {

SessionConfig live_config() {
    SessionConfig c;
    c.model = ModelKind::springblock;
    c.size = 5;
    c.seed = 11;
    c.tick_seconds = 0.005;
    c.corpus = "crackle";
    return c;
}

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(line);
    return out;
}

}  // namespace

TEST_CASE("server: endpoints, live stream, stop and replay") {
    const SessionConfig config = live_config();
    auto corpus = load_corpus(config);
    const std::size_t corpus_samples = corpus->samples.size();
    Server server(config, std::move(corpus));
    std::ostringstream log_text;
    ServeOptions opts;
    opts.port = 0;
    opts.log = &log_text;
    const int port = server.bind(opts);
    REQUIRE(port > 0);

    SessionLog log;
    std::thread runner([&] { log = server.run(); });

    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(10, 0);

    const auto wav = client.Get("/corpus");
    REQUIRE(wav);
    CHECK(wav->status == 200);
    const auto audio = soc::sonify::decode_wav(std::vector<std::uint8_t>(wav->body.begin(), wav->body.end()));
    CHECK(audio.samples.size() == corpus_samples);

    const auto snap = client.Get("/snapshot");
    REQUIRE(snap);
    CHECK(snap->status == 200);
    CHECK(snap->body.rfind("springblock 5 0.25", 0) == 0);

    const std::string bad = "{\"t\":\"control.pause\",\"k\":0,\"paused\":true}\n{\"t\":\"frobnicate\",\"k\":0}\n";
    const auto rejected = client.Post("/session", bad, "application/x-ndjson");
    REQUIRE(rejected);
    CHECK(rejected->status == 400);
    const auto err = nlohmann::json::parse(rejected->body);
    CHECK(bad.substr(err["begin"].get<std::size_t>(), err["end"].get<std::size_t>() - err["begin"].get<std::size_t>()) ==
          "\"frobnicate\"");

    std::string streamed;
    std::atomic<int> preamble{0};
    std::thread reader([&] {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(20, 0);
        c.Get("/session", [&](const char* data, std::size_t n) {
            streamed.append(data, n);
            preamble = static_cast<int>(std::count(streamed.begin(), streamed.end(), '\n'));
            return true;
        });
    });
    for (int i = 0; i < 400 && preamble < 2; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    REQUIRE(preamble >= 2);

    const auto ok = client.Post("/session",
                                "{\"t\":\"control.set_drive\",\"k\":0,\"v\":[2,0]}\n"
                                "{\"t\":\"control.drop\",\"k\":0,\"n\":3}\n",
                                "application/x-ndjson");
    REQUIRE(ok);
    CHECK(ok->status == 202);
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    server.request_stop();
    runner.join();
    reader.join();

    const auto lines = split_lines(streamed);
    REQUIRE(lines.size() > 3);
    CHECK(decode(lines[0]).is<Hello>());
    CHECK(decode(lines[1]).is<ConfigMsg>());
    CHECK(decode(lines.back()).is<Bye>());
    std::string events;
    std::size_t grains = 0;
    for (const auto& l : lines) {
        const Message m = decode(l);
        if (m.is<EventMsg>()) events += l + "\n";
        grains += m.is<GrainsMsg>();
    }
    CHECK(!events.empty());
    CHECK(grains > 0);

    REQUIRE(log.records.size() == 3);
    CHECK(log.records[0].is<SetDrive>());
    CHECK(log.records[1].is<Drop>());
    CHECK(log.records[2].is<Stop>());
    std::istringstream in(log_text.str());
    const SessionLog back = SessionLog::read(in);
    std::ostringstream replayed;
    replay_events(back, replayed);
    CHECK(replayed.str() == events);

    CHECK_FALSE(client.Get("/snapshot"));
}

TEST_CASE("server: invalid config fails before any socket is opened") {
    SessionConfig c = live_config();
    c.alpha = 0.3;
    CHECK_THROWS_AS(Server(c, std::nullopt), soc::ConfigError);
}

TEST_CASE("stdio: controls in, messages out, end of input stops") {
    SessionConfig c = live_config();
    c.corpus = "none";
    std::istringstream in("{\"t\":\"control.drop\",\"k\":0,\"n\":4}\nnot json\n");
    std::ostringstream out, log;
    const SessionLog result = serve_stdio(c, nullptr, in, out, &log, true);
    const auto lines = split_lines(out.str());
    CHECK(decode(lines.front()).is<Hello>());
    CHECK(decode(lines.back()).as<Bye>().reason == "stop");
    bool saw_error = false;
    for (const auto& l : lines) saw_error |= decode(l).is<ErrorMsg>();
    CHECK(saw_error);
    REQUIRE(result.records.size() == 2);
    CHECK(result.records[0].is<Drop>());
    CHECK(result.records.back().is<Stop>());
    std::istringstream back(log.str());
    CHECK(SessionLog::read(back).records == result.records);
}
