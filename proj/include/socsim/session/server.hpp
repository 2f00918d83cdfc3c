// HTTP front end for one live session.
//
//   GET  /session   chunked JSONL stream of every session message
//   POST /session   JSONL control messages, one per line
//   GET  /corpus    the active grain corpus as a 16-bit WAV
//   GET  /snapshot  current grid in the model's snapshot format
//
// The session loop runs on the thread that calls run(); HTTP handlers only
// touch the control queue, the broadcast hub and the snapshot mailbox.

#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "socsim/session/session.hpp"

namespace soc::session {

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::ostream* log = nullptr;
    bool realtime = true;  // pace ticks at tick_seconds
};

class Server {
public:
    /// Builds the session (so a bad config fails here, before any socket is opened).
    Server(SessionConfig config, std::optional<sonify::GrainCorpus> corpus);
    ~Server();

    /// Binds the listening socket; returns the port. Throws std::runtime_error on failure.
    int bind(const ServeOptions& options);

    /// Serves until the session stops, then closes all streams. Returns the log.
    SessionLog run();

    /// Ends the session at the next tick boundary; safe from any thread.
    void request_stop();

    LiveControls& controls();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Session over standard streams: controls are read line by line from `in`
/// (end of input stops the session); every message goes to `out`.
SessionLog serve_stdio(const SessionConfig& config, const sonify::GrainCorpus* corpus, std::istream& in,
                       std::ostream& out, std::ostream* log, bool realtime,
                       const std::atomic<bool>* interrupted = nullptr);

}  // namespace soc::session
