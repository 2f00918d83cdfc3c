#include "socsim/session/server.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "socsim/errors.hpp"
#include "socsim/sonify/wav.hpp"

namespace soc::session {

namespace {

using Clock = std::chrono::steady_clock;
constexpr std::size_t kMaxBacklog = 200'000;  // lines; a stalled client is dropped beyond this

// Fans session lines out to every open GET /session stream.
class Hub {
public:
    struct Subscriber {
        std::deque<std::string> queue;
        bool dropped = false;
    };

    void publish(const std::string& line) {
        std::lock_guard lock(mutex_);
        if (preamble_.size() < 2) preamble_.push_back(line);
        for (auto& s : subscribers_) {
            if (s->dropped) continue;
            if (s->queue.size() >= kMaxBacklog) {
                s->dropped = true;
                s->queue.clear();
                continue;
            }
            s->queue.push_back(line);
        }
        cv_.notify_all();
    }

    std::shared_ptr<Subscriber> subscribe() {
        std::lock_guard lock(mutex_);
        auto s = std::make_shared<Subscriber>();
        s->queue.assign(preamble_.begin(), preamble_.end());
        subscribers_.push_back(s);
        return s;
    }

    void unsubscribe(const std::shared_ptr<Subscriber>& s) {
        std::lock_guard lock(mutex_);
        std::erase(subscribers_, s);
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        cv_.notify_all();
    }

    // Waits briefly for lines; returns them and whether the stream has ended.
    std::pair<std::deque<std::string>, bool> take(const std::shared_ptr<Subscriber>& s) {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, std::chrono::milliseconds(200),
                     [&] { return !s->queue.empty() || closed_ || s->dropped; });
        std::deque<std::string> batch;
        batch.swap(s->queue);
        return {std::move(batch), closed_ || s->dropped};
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::vector<std::string> preamble_;  // hello and config, replayed to late joiners
    std::vector<std::shared_ptr<Subscriber>> subscribers_;
    bool closed_ = false;
};

// GET /snapshot asks; the session thread answers at the next tick boundary.
class SnapshotMailbox {
public:
    std::optional<std::string> request(std::chrono::milliseconds timeout) {
        std::future<std::string> answer;
        {
            std::lock_guard lock(mutex_);
            if (finished_) return last_;
            pending_.emplace_back();
            answer = pending_.back().get_future();
        }
        if (answer.wait_for(timeout) != std::future_status::ready) return std::nullopt;
        return answer.get();
    }

    void serve(const Session& session) {
        std::lock_guard lock(mutex_);
        if (pending_.empty()) return;
        const std::string text = session.snapshot();
        for (auto& p : pending_) p.set_value(text);
        pending_.clear();
    }

    void finish(const Session& session) {
        std::lock_guard lock(mutex_);
        last_ = session.snapshot();
        finished_ = true;
        for (auto& p : pending_) p.set_value(last_);
        pending_.clear();
    }

private:
    std::mutex mutex_;
    std::vector<std::promise<std::string>> pending_;
    std::string last_;
    bool finished_ = false;
};

std::string protocol_error_json(const std::string& what, std::size_t begin, std::size_t end) {
    nlohmann::ordered_json j;
    j["t"] = "error";
    j["k"] = 0;
    j["code"] = "protocol";
    j["message"] = what;
    j["begin"] = begin;
    j["end"] = end;
    return j.dump() + "\n";
}

}  // namespace

struct Server::Impl {
    SessionConfig config;
    std::optional<sonify::GrainCorpus> corpus;
    std::string corpus_wav;
    Session session;
    LiveControls live;
    Hub hub;
    SnapshotMailbox snapshots;
    httplib::Server http;
    ServeOptions options;
    bool bound = false;

    Impl(SessionConfig c, std::optional<sonify::GrainCorpus> k)
        : config(std::move(c)), corpus(std::move(k)), session(config, corpus ? &*corpus : nullptr) {
        if (corpus) corpus_wav = sonify::encode_wav(corpus->samples, corpus->sample_rate);
        routes();
    }

    void routes() {
        http.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

        http.Get("/session", [this](const httplib::Request&, httplib::Response& res) {
            auto sub = hub.subscribe();
            res.set_chunked_content_provider(
                "application/x-ndjson",
                [this, sub](std::size_t, httplib::DataSink& sink) {
                    auto [batch, ended] = hub.take(sub);
                    for (std::string& line : batch) {
                        line += '\n';
                        if (!sink.write(line.data(), line.size())) return false;
                    }
                    if (ended && batch.empty()) sink.done();
                    return true;
                },
                [this, sub](bool) { hub.unsubscribe(sub); });
        });

        http.Options("/session", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });

        http.Post("/session", [this](const httplib::Request& req, httplib::Response& res) {
            std::vector<Message> batch;
            std::size_t start = 0;
            const std::string& body = req.body;
            while (start < body.size()) {
                std::size_t end = body.find('\n', start);
                if (end == std::string::npos) end = body.size();
                const std::string_view line(body.data() + start, end - start);
                if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
                    try {
                        Message m = decode(line);
                        if (!m.is_control()) {
                            res.status = 400;
                            res.set_content(protocol_error_json("only control messages may be posted", start, end),
                                            "application/x-ndjson");
                            return;
                        }
                        batch.push_back(std::move(m));
                    } catch (const ProtocolError& e) {
                        res.status = 400;
                        res.set_content(protocol_error_json(e.what(), start + e.begin(), start + e.end()),
                                        "application/x-ndjson");
                        return;
                    }
                }
                start = end + 1;
            }
            for (Message& m : batch) live.push(std::move(m));
            res.status = 202;
            res.set_content(nlohmann::ordered_json{{"accepted", batch.size()}}.dump(), "application/json");
        });

        http.Get("/corpus", [this](const httplib::Request&, httplib::Response& res) {
            if (!corpus) {
                res.status = 404;
                res.set_content("no corpus in this session\n", "text/plain");
                return;
            }
            res.set_content(corpus_wav, "audio/wav");
        });

        http.Get("/snapshot", [this](const httplib::Request&, httplib::Response& res) {
            if (auto text = snapshots.request(std::chrono::milliseconds(5000))) {
                res.set_content(*text, "text/plain");
            } else {
                res.status = 503;
                res.set_content("session did not reach a tick boundary in time\n", "text/plain");
            }
        });
    }

    SessionLog run() {
        std::thread listener([this] { http.listen_after_bind(); });
        http.wait_until_ready();

        const auto t0 = Clock::now();
        const auto tick = std::chrono::duration<double>(config.tick_seconds);
        RunOptions opts;
        opts.log = options.log;
        if (options.realtime)
            opts.before_tick = [&](std::uint64_t k) {
                std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(tick * double(k)));
            };
        opts.at_boundary = [this](const Session& s) { snapshots.serve(s); };

        SessionLog log;
        try {
            log = session.run(live, [this](const std::string& line) { hub.publish(line); }, opts);
        } catch (...) {
            shutdown(listener);
            throw;
        }
        shutdown(listener);
        return log;
    }

    void shutdown(std::thread& listener) {
        snapshots.finish(session);
        hub.close();
        // Give open streams a moment to drain the final bye line.
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        http.stop();
        listener.join();
    }
};

Server::Server(SessionConfig config, std::optional<sonify::GrainCorpus> corpus)
    : impl_(std::make_unique<Impl>(std::move(config), std::move(corpus))) {}

Server::~Server() = default;

int Server::bind(const ServeOptions& options) {
    impl_->options = options;
    int port = options.port;
    if (port == 0) {
        port = impl_->http.bind_to_any_port(options.host);
        if (port < 0) throw std::runtime_error("cannot bind " + options.host);
    } else if (!impl_->http.bind_to_port(options.host, port)) {
        throw std::runtime_error("cannot bind " + options.host + ":" + std::to_string(port));
    }
    impl_->bound = true;
    return port;
}

SessionLog Server::run() {
    if (!impl_->bound) throw std::logic_error("Server::run before bind");
    return impl_->run();
}

void Server::request_stop() { impl_->live.request_stop(); }

LiveControls& Server::controls() { return impl_->live; }

// ---------------------------------------------------------------------------

SessionLog serve_stdio(const SessionConfig& config, const sonify::GrainCorpus* corpus, std::istream& in,
                       std::ostream& out, std::ostream* log, bool realtime,
                       const std::atomic<bool>* interrupted) {
    Session session(config, corpus);
    auto live = std::make_shared<LiveControls>();

    // The reader may stay blocked on input after the session ends, so it is
    // detached and owns its share of the state.
    // Rejected lines travel through the control queue as error messages so
    // they reach the output in order with the controls around them.
    std::thread([live, &in] {
        std::string line;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                Message m = decode(line);
                if (!m.is_control()) throw ProtocolError("only control messages are accepted", 0, line.size());
                live->push(std::move(m));
            } catch (const ProtocolError& e) {
                live->push(Message{0, ErrorMsg{"protocol", e.what()}});
            }
        }
        live->request_stop();
    }).detach();

    const auto t0 = Clock::now();
    const auto tick = std::chrono::duration<double>(config.tick_seconds);
    RunOptions opts;
    opts.log = log;
    opts.before_tick = [&](std::uint64_t k) {
        if (interrupted && interrupted->load()) live->request_stop();
        if (realtime) std::this_thread::sleep_until(t0 + std::chrono::duration_cast<Clock::duration>(tick * double(k)));
    };
    auto sink = [&](const std::string& line) { out << line << '\n' << std::flush; };
    return session.run(*live, sink, opts);
}

}  // namespace soc::session
