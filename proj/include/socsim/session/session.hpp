// Tick-driven interactive session: one model, optional sonification, a
// control queue in and a JSONL message stream out, with a replayable log.

#pragma once

#include <array>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "socsim/config.hpp"
#include "socsim/session/protocol.hpp"
#include "socsim/sonify/corpus.hpp"
#include "socsim/sonify/schedule.hpp"

namespace soc::session {

enum class ModelKind { sandpile, oslo, springblock };

std::string_view model_name(ModelKind kind);
ModelKind parse_model(const std::string& name);

struct SessionConfig {
    ModelKind model = ModelKind::springblock;
    int width = 5;   // sandpile columns
    int height = 5;  // sandpile rows
    int size = 5;    // Oslo length or spring-block side
    int z_c = 4;
    double alpha = 0.25;
    double residual_noise = 0.0;
    /// Drive units per unit of |v|: grains per tick for the piles, force per
    /// tick for the spring-block. Unset means 1 for piles and 0.01 for blocks.
    std::optional<double> rate_scale;
    std::array<double, 2> drive{0.0, 0.0};
    double tick_seconds = 0.05;
    std::uint64_t seed = 0;
    std::uint64_t stats_interval = 20;
    std::uint64_t max_ticks = 0;  // 0 runs until a stop control
    std::uint64_t sweep_cap = 10'000'000;
    std::string corpus = "crackle";  // WAV path, "crackle" (synthetic) or "none"
    sonify::MappingConfig mapping;

    double effective_rate_scale() const;
    /// Throws ConfigError naming the offending key.
    void validate() const;

    /// Canonical form used in logs and the config message; every default is spelled out.
    nlohmann::ordered_json to_json() const;
    static SessionConfig from_json(const nlohmann::ordered_json& j);

    /// Flat keys as in the config file; mapping keys take a `sonify.` prefix.
    static SessionConfig from_pairs(const KeyValues& kv, SessionConfig base);
    static SessionConfig from_pairs(const KeyValues& kv);
};

/// The grain corpus named by `config.corpus`, or nothing for "none".
std::optional<sonify::GrainCorpus> load_corpus(const SessionConfig& config);

/// Supplies the controls to apply at a tick boundary, in arrival order.
/// Error messages in the batch are passed through to the stream unlogged;
/// other non-control messages are ignored.
class ControlSource {
public:
    virtual ~ControlSource() = default;
    virtual std::vector<Message> poll(std::uint64_t tick) = 0;
};

/// Delivers recorded controls at the tick they are stamped with.
class ScriptedControls : public ControlSource {
public:
    explicit ScriptedControls(std::vector<Message> records);
    std::vector<Message> poll(std::uint64_t tick) override;

private:
    std::vector<Message> records_;
    std::size_t next_ = 0;
};

/// Thread-safe queue filled by network or stdin readers.
class LiveControls : public ControlSource {
public:
    void push(Message msg);
    /// Makes the next poll end the session (used on SIGINT).
    void request_stop();
    std::vector<Message> poll(std::uint64_t tick) override;

private:
    std::mutex mutex_;
    std::deque<Message> queue_;
    bool stop_ = false;
};

struct SessionLog {
    SessionConfig config;
    std::vector<Message> records;  // controls, stamped with the tick they applied at

    void write(std::ostream& out) const;
    /// Throws ParseError (byte offset into the stream) for a malformed log,
    /// including one that does not end with control.stop.
    static SessionLog read(std::istream& in);
};

using Sink = std::function<void(const std::string& line)>;

struct RunOptions {
    /// Called before each tick; the live server sleeps here to pace ticks.
    std::function<void(std::uint64_t tick)> before_tick;
    /// Called after each tick with the session, from the session's own thread.
    std::function<void(const class Session&)> at_boundary;
    /// When set, the log is written here as it grows, one flushed line per record.
    std::ostream* log = nullptr;
};

class Session {
public:
    /// Throws ConfigError for an invalid configuration. `corpus` may be null
    /// (no grains messages) and must outlive the session.
    explicit Session(SessionConfig config, const sonify::GrainCorpus* corpus = nullptr);
    ~Session();
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Runs until a stop control (or max_ticks), then emits bye. Returns the log.
    SessionLog run(ControlSource& controls, const Sink& sink, const RunOptions& options = {});

    const SessionConfig& config() const { return config_; }
    /// Grid snapshot in the model's text format.
    std::string snapshot() const;

private:
    class Model;
    struct Tick;

    void apply(const Message& control, Tick& tick);
    void reset_state();
    void emit(const Sink& sink, Message msg);
    void emit_stats(const Sink& sink, std::uint64_t k);

    SessionConfig config_;
    const sonify::GrainCorpus* corpus_;
    std::unique_ptr<Model> model_;
    std::optional<sonify::ScheduleBuilder> schedule_;
    std::vector<std::uint64_t> sizes_;
    std::array<double, 2> drive_{};
    double grain_debt_ = 0.0;
    bool paused_ = false;
};

/// Re-runs `log` and writes only its event lines, newline-terminated.
void replay_events(const SessionLog& log, std::ostream& out);

}  // namespace soc::session
