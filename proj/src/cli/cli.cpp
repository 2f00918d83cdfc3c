#include "socsim/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <functional>
#include <ios>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "socsim/config.hpp"
#include "socsim/errors.hpp"
#include "socsim/sandpile.hpp"
#include "socsim/session/protocol.hpp"
#include "socsim/session/server.hpp"
#include "socsim/session/session.hpp"
#include "socsim/sonify/corpus.hpp"
#include "socsim/sonify/render.hpp"
#include "socsim/sonify/schedule.hpp"
#include "socsim/sonify/wav.hpp"
#include "socsim/springblock.hpp"
#include "socsim/stats.hpp"

namespace soc::cli {
namespace {

using session::SessionConfig;

/// Flags that override config-file keys. Values stay raw strings so the
/// config parser reports every bad value the same way, file or flag.
class Overrides {
public:
    void add(CLI::App& app, const std::string& flag, const std::string& key, const std::string& help) {
        auto& slot = values_[key];
        options_[key] = app.add_option(flag, slot, help);
    }

    void merge_into(KeyValues& kv) const {
        for (const auto& [key, opt] : options_)
            if (opt->count() > 0) kv[key] = values_.at(key);
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, CLI::Option*> options_;
};

KeyValues load_pairs(const std::string& path) {
    if (path.empty()) return {};
    return read_key_values(path);
}

std::string take(KeyValues& kv, const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    std::string v = it->second;
    kv.erase(it);
    return v;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path + " for writing");
    return f;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::ios_base::failure("cannot open " + path);
    return f;
}

void check_written(std::ostream& f, const std::string& path) {
    f.flush();
    if (!f) throw std::ios_base::failure("write to " + path + " failed");
}

/// Calls `fn` for every event line; other lines (ticks, grains, ...) are skipped.
void for_each_event(const std::string& path, const std::function<void(const session::EventMsg&)>& fn) {
    std::ifstream in = open_in(path);
    std::string line;
    std::size_t offset = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t base = offset;
        offset += line.size() + 1;
        if (line.rfind("{\"t\":\"event\"", 0) != 0) continue;
        try {
            fn(session::decode(line).as<session::EventMsg>());
        } catch (const ProtocolError& e) {
            throw ProtocolError(path + ":" + std::to_string(line_no) + ": malformed event line",
                                base + e.begin(), base + e.end());
        }
    }
    if (in.bad()) throw std::ios_base::failure("read from " + path + " failed");
}

// --- simulate ------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
    std::string snapshot;
    Overrides overrides;
};

void simulate(const SimulateArgs& a) {
    KeyValues kv = load_pairs(a.config);
    a.overrides.merge_into(kv);
    const std::uint64_t events = parse_unsigned("events", take(kv, "events", "1000"));
    const std::uint64_t warmup = parse_unsigned("warmup", take(kv, "warmup", "0"));
    const SessionConfig c = SessionConfig::from_pairs(kv);
    c.validate();

    const std::string snapshot_path = a.snapshot.empty() ? a.out + ".snapshot" : a.snapshot;
    std::ofstream out = open_out(a.out);

    std::uint64_t k = 0;
    auto write = [&](const CascadeEvent& ev, bool moment) {
        out << session::encode({k++, session::EventMsg{ev, moment}}) << '\n';
    };
    std::ostringstream snap;

    switch (c.model) {
    case session::ModelKind::sandpile: {
        Sandpile pile(c.width, c.height, c.z_c, c.seed);
        pile.limits().sweep_cap = c.sweep_cap;
        for (std::uint64_t i = 0; i < warmup; ++i) pile.add_grain(pile.random_site());
        for (std::uint64_t i = 0; i < events; ++i) write(pile.add_grain(pile.random_site()), false);
        write_snapshot(snap, pile);
        break;
    }
    case session::ModelKind::oslo: {
        OsloPile pile(c.size, c.seed);
        pile.sweep_cap() = c.sweep_cap;
        for (std::uint64_t i = 0; i < warmup; ++i) pile.add_grain();
        for (std::uint64_t i = 0; i < events; ++i) write(pile.add_grain(), false);
        write_snapshot(snap, pile);
        break;
    }
    case session::ModelKind::springblock: {
        SpringBlockParams p;
        p.size = c.size;
        p.alpha = c.alpha;
        p.residual_noise = c.residual_noise;
        p.rate_scale = c.effective_rate_scale();
        SpringBlock model(p, c.seed);
        model.limits().sweep_cap = c.sweep_cap;
        for (std::uint64_t i = 0; i < warmup; ++i) model.drive_extremal();
        for (std::uint64_t i = 0; i < events; ++i) write(model.drive_extremal(), true);
        write_snapshot(snap, model);
        break;
    }
    }
    check_written(out, a.out);
    std::ofstream snap_out = open_out(snapshot_path);
    snap_out << snap.str();
    check_written(snap_out, snapshot_path);
}

// --- stats ---------------------------------------------------------------

struct StatsArgs {
    std::string in;
    std::string report;
    std::string csv;
    std::uint64_t s_min = 5;
    int bins = 5;
};

void stats(const StatsArgs& a, std::ostream& out) {
    EventEnsemble ensemble;
    ensemble.source = a.in;
    for_each_event(a.in, [&](const session::EventMsg& m) { ensemble.add(m.event, m.has_moment); });
    const CriticalityReport report = criticality_report(ensemble, a.s_min, a.bins);
    const std::string text = report.to_json().dump(2) + "\n";
    if (a.report.empty() || a.report == "-") {
        out << text;
    } else {
        std::ofstream f = open_out(a.report);
        f << text;
        check_written(f, a.report);
    }
    if (!a.csv.empty()) {
        std::ofstream f = open_out(a.csv);
        f << histogram_csv(report.histogram);
        check_written(f, a.csv);
    }
}

// --- sonify --------------------------------------------------------------

struct SonifyArgs {
    std::string in;
    std::string corpus = "crackle";
    std::string out;
    std::string config;
    std::string schedule;
    Overrides overrides;
};

void sonify_events(const SonifyArgs& a) {
    KeyValues kv = load_pairs(a.config);
    a.overrides.merge_into(kv);
    const sonify::MappingConfig mapping = sonify::MappingConfig::from_pairs(kv);

    std::vector<CascadeEvent> events;
    for_each_event(a.in, [&](const session::EventMsg& m) { events.push_back(m.event); });

    sonify::Audio audio = a.corpus == "crackle" ? sonify::make_crackle(4.0, mapping.sample_rate, mapping.seed)
                                                : sonify::read_wav(a.corpus);
    const sonify::GrainCorpus corpus = sonify::ingest_corpus(std::move(audio), mapping.grain_ms, mapping.hop_ms);
    const sonify::GrainSchedule schedule = sonify::events_to_schedule(events, corpus, mapping);
    const std::vector<float> signal = sonify::render(schedule, corpus, mapping.sample_rate, mapping.limiter_knee);

    std::ofstream wav = open_out(a.out);
    wav << sonify::encode_wav(signal, mapping.sample_rate);
    check_written(wav, a.out);
    if (!a.schedule.empty()) {
        std::ofstream f = open_out(a.schedule);
        f << sonify::schedule_to_jsonl(schedule);
        check_written(f, a.schedule);
    }
}

// --- serve ---------------------------------------------------------------

std::atomic<bool> g_interrupted{false};

extern "C" void on_sigint(int) { g_interrupted = true; }

struct SignalScope {
    using Handler = void (*)(int);
    Handler previous;
    SignalScope() {
        g_interrupted = false;
        previous = std::signal(SIGINT, on_sigint);
    }
    ~SignalScope() { std::signal(SIGINT, previous); }
};

struct ServeArgs {
    std::string config;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string log;
    bool stdio = false;
    bool fast = false;
    Overrides overrides;
};

void serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    KeyValues kv = load_pairs(a.config);
    a.overrides.merge_into(kv);
    const SessionConfig config = SessionConfig::from_pairs(kv);
    config.validate();
    std::optional<sonify::GrainCorpus> corpus = session::load_corpus(config);

    std::ofstream log_file;
    if (!a.log.empty()) log_file = open_out(a.log);
    std::ostream* log = a.log.empty() ? nullptr : &log_file;

    SignalScope signals;
    if (a.stdio) {
        session::serve_stdio(config, corpus ? &*corpus : nullptr, std::cin, out, log, !a.fast, &g_interrupted);
        if (log) check_written(log_file, a.log);
        return;
    }

    session::Server server(config, std::move(corpus));
    session::ServeOptions opts;
    opts.host = a.host;
    opts.port = a.port;
    opts.log = log;
    opts.realtime = !a.fast;
    const int port = server.bind(opts);
    err << "socsim: serving on http://" << a.host << ":" << port << "/session" << std::endl;

    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!done) {
            if (g_interrupted) {
                server.request_stop();
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });
    try {
        server.run();
    } catch (...) {
        done = true;
        watcher.join();
        throw;
    }
    done = true;
    watcher.join();
    if (log) check_written(log_file, a.log);
}

// --- replay --------------------------------------------------------------

struct ReplayArgs {
    std::string log;
    std::string out;
};

void replay(const ReplayArgs& a, std::ostream& out) {
    std::ifstream in = open_in(a.log);
    const session::SessionLog log = session::SessionLog::read(in);
    if (a.out == "-") {
        session::replay_events(log, out);
        return;
    }
    std::ofstream f = open_out(a.out);
    session::replay_events(log, f);
    check_written(f, a.out);
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-organized criticality simulator, statistics and sonification", "socsim"};
    app.require_subcommand(1);
    app.footer("Exit codes: 0 ok, 1 config/usage, 2 I/O, 3 divergence, 4 malformed or insufficient data.");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate", "Drive a model and write one event line per drive");
    sim_cmd->add_option("--config", sim.config, "Flat key = value config file");
    sim.overrides.add(*sim_cmd, "--model", "model", "sandpile, oslo or springblock");
    sim.overrides.add(*sim_cmd, "--size", "size", "Side length (sandpile: width and height)");
    sim.overrides.add(*sim_cmd, "--width", "width", "Sandpile columns");
    sim.overrides.add(*sim_cmd, "--height", "height", "Sandpile rows");
    sim.overrides.add(*sim_cmd, "--z-c", "z_c", "Sandpile toppling threshold");
    sim.overrides.add(*sim_cmd, "--alpha", "alpha", "Spring-block transfer fraction, (0, 0.25]");
    sim.overrides.add(*sim_cmd, "--residual-noise", "residual_noise", "Spring-block residual force noise");
    sim.overrides.add(*sim_cmd, "--events", "events", "Number of recorded drives (default 1000)");
    sim.overrides.add(*sim_cmd, "--warmup", "warmup", "Unrecorded drives before recording (default 0)");
    sim.overrides.add(*sim_cmd, "--seed", "seed", "PRNG seed");
    sim.overrides.add(*sim_cmd, "--sweep-cap", "sweep_cap", "Sweeps before a cascade counts as divergent");
    sim_cmd->add_option("--out", sim.out, "Events JSONL")->required();
    sim_cmd->add_option("--snapshot", sim.snapshot, "Final grid snapshot (default <out>.snapshot)");

    StatsArgs st;
    auto* stats_cmd = app.add_subcommand("stats", "Criticality report for an events file");
    stats_cmd->add_option("--in", st.in, "Events JSONL")->required();
    stats_cmd->add_option("--s-min", st.s_min, "Lower cutoff of the power-law fit")->capture_default_str()
        ->check(CLI::PositiveNumber);
    stats_cmd->add_option("--bins", st.bins, "Histogram bins per decade")->capture_default_str()
        ->check(CLI::PositiveNumber);
    stats_cmd->add_option("--report", st.report, "Report JSON (default stdout)");
    stats_cmd->add_option("--csv", st.csv, "Histogram CSV");

    SonifyArgs so;
    auto* sonify_cmd = app.add_subcommand("sonify", "Render an events file to audio");
    sonify_cmd->add_option("--in", so.in, "Events JSONL")->required();
    sonify_cmd->add_option("--corpus", so.corpus, "Grain source WAV, or 'crackle'")->capture_default_str();
    sonify_cmd->add_option("--out", so.out, "Output WAV (16-bit PCM mono)")->required();
    sonify_cmd->add_option("--config", so.config, "Mapping config file");
    so.overrides.add(*sonify_cmd, "--duration", "min_duration", "Minimum output length in seconds");
    so.overrides.add(*sonify_cmd, "--seed", "seed", "Schedule seed");
    so.overrides.add(*sonify_cmd, "--sample-rate", "sample_rate", "Output sample rate");
    sonify_cmd->add_option("--schedule", so.schedule, "Also write the grain schedule as JSONL");

    ServeArgs sv;
    auto* serve_cmd = app.add_subcommand("serve", "Run an interactive session");
    serve_cmd->add_option("--config", sv.config, "Session config file");
    serve_cmd->add_option("--host", sv.host, "Bind address")->capture_default_str();
    serve_cmd->add_option("--port", sv.port, "Port; 0 picks a free one")->capture_default_str()
        ->check(CLI::Range(0, 65535));
    serve_cmd->add_option("--log", sv.log, "Session log (.slog)");
    serve_cmd->add_flag("--stdio", sv.stdio, "Speak the protocol on stdin/stdout instead of HTTP");
    serve_cmd->add_flag("--fast", sv.fast, "Do not pace ticks to wall-clock time");
    sv.overrides.add(*serve_cmd, "--model", "model", "sandpile, oslo or springblock");
    sv.overrides.add(*serve_cmd, "--size", "size", "Side length");
    sv.overrides.add(*serve_cmd, "--seed", "seed", "PRNG seed");
    sv.overrides.add(*serve_cmd, "--corpus", "corpus", "Grain source WAV, 'crackle' or 'none'");
    sv.overrides.add(*serve_cmd, "--tick-seconds", "tick_seconds", "Tick length, [0.005, 1]");
    sv.overrides.add(*serve_cmd, "--max-ticks", "max_ticks", "Stop after this many ticks (0: never)");

    ReplayArgs rp;
    auto* replay_cmd = app.add_subcommand("replay", "Re-run a session log and write its event lines");
    replay_cmd->add_option("--log", rp.log, "Session log (.slog)")->required();
    replay_cmd->add_option("--out", rp.out, "Events JSONL, or - for stdout")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (*sim_cmd) simulate(sim);
        else if (*stats_cmd) stats(st, out);
        else if (*sonify_cmd) sonify_events(so);
        else if (*serve_cmd) serve(sv, out, err);
        else if (*replay_cmd) replay(rp, out);
        return kOk;
    } catch (const ConfigError& e) {
        err << "socsim: configuration error: " << e.what() << '\n';
        return kConfig;
    } catch (const DivergenceError& e) {
        err << "socsim: divergence: " << e.what() << '\n';
        return kDivergence;
    } catch (const Error& e) {
        err << "socsim: " << e.what() << '\n';
        return kData;
    } catch (const std::ios_base::failure& e) {
        err << "socsim: I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::system_error& e) {
        err << "socsim: I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::runtime_error& e) {
        // socket setup
        err << "socsim: " << e.what() << '\n';
        return kIo;
    }
}

}  // namespace soc::cli
