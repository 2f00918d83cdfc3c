#include "socsim/session/session.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <variant>

#include "socsim/errors.hpp"
#include "socsim/sandpile.hpp"
#include "socsim/sonify/wav.hpp"
#include "socsim/springblock.hpp"
#include "socsim/stats.hpp"

namespace soc::session {

namespace {

using json = nlohmann::ordered_json;

constexpr const char* kSonifyPrefix = "sonify.";

json mapping_to_json(const sonify::MappingConfig& m) {
    json j;
    j["tick_seconds"] = m.tick_seconds;
    j["step_seconds"] = m.step_seconds;
    j["density_cap"] = m.density_cap;
    j["gain"] = m.gain;
    j["centroid_hi"] = m.centroid_hi;
    j["centroid_lo"] = m.centroid_lo;
    j["sweep_steps"] = m.sweep_steps;
    j["flatness_target"] = m.flatness_target;
    j["weight_rms"] = m.weights.rms;
    j["weight_centroid"] = m.weights.centroid;
    j["weight_flatness"] = m.weights.flatness;
    j["pitch_jitter"] = m.pitch_jitter;
    j["seed"] = m.seed;
    j["limiter_knee"] = m.limiter_knee;
    j["grain_ms"] = m.grain_ms;
    j["hop_ms"] = m.hop_ms;
    j["sample_rate"] = m.sample_rate;
    j["min_duration"] = m.min_duration;
    return j;
}

std::string scalar_text(const std::string& key, const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return v.dump();
    throw ConfigError(key + ": expected a number or a string");
}

int small_int(const std::string& key, const std::string& value) {
    const std::int64_t v = parse_integer(key, value);
    if (v < -1'000'000'000 || v > 1'000'000'000) throw ConfigError(key + ": out of range");
    return static_cast<int>(v);
}

}  // namespace

std::string_view model_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::sandpile: return "sandpile";
        case ModelKind::oslo: return "oslo";
        case ModelKind::springblock: return "springblock";
    }
    return "?";
}

ModelKind parse_model(const std::string& name) {
    if (name == "sandpile") return ModelKind::sandpile;
    if (name == "oslo") return ModelKind::oslo;
    if (name == "springblock") return ModelKind::springblock;
    throw ConfigError("model must be sandpile, oslo or springblock, got '" + name + "'");
}

// ---------------------------------------------------------------------------
// Configuration

double SessionConfig::effective_rate_scale() const {
    if (rate_scale) return *rate_scale;
    return model == ModelKind::springblock ? 0.01 : 1.0;
}

void SessionConfig::validate() const {
    switch (model) {
        case ModelKind::sandpile:
            if (width < 1 || height < 1) throw ConfigError("width and height must be >= 1");
            if (z_c < 1) throw ConfigError("z_c must be >= 1");
            break;
        case ModelKind::oslo:
            if (size < 1) throw ConfigError("size must be >= 1");
            break;
        case ModelKind::springblock:
            if (size < 2) throw ConfigError("size must be >= 2 for the spring-block lattice");
            if (!(alpha > 0.0 && alpha <= 0.25)) throw ConfigError("alpha must lie in (0, 0.25]");
            if (!(residual_noise >= 0.0 && residual_noise < 1.0))
                throw ConfigError("residual_noise must lie in [0, 1)");
            break;
    }
    const double scale = effective_rate_scale();
    if (!(scale >= 0.0) || !std::isfinite(scale)) throw ConfigError("rate_scale must be finite and >= 0");
    if (!std::isfinite(drive[0]) || !std::isfinite(drive[1])) throw ConfigError("drive must be finite");
    if (!std::isfinite(scale * std::sqrt(drive[0] * drive[0] + drive[1] * drive[1])))
        throw ConfigError("drive magnitude overflows");
    if (!(tick_seconds >= 0.005 && tick_seconds <= 1.0))
        throw ConfigError("tick_seconds must lie in [0.005, 1]");
    if (stats_interval < 1) throw ConfigError("stats_interval must be >= 1");
    if (sweep_cap < 1) throw ConfigError("sweep_cap must be >= 1");
    if (corpus.empty()) throw ConfigError("corpus must be a WAV path, 'crackle' or 'none'");
    mapping.validate();
}

json SessionConfig::to_json() const {
    json j;
    j["model"] = model_name(model);
    if (model == ModelKind::sandpile) {
        j["width"] = width;
        j["height"] = height;
        j["z_c"] = z_c;
    } else {
        j["size"] = size;
    }
    if (model == ModelKind::springblock) {
        j["alpha"] = alpha;
        j["residual_noise"] = residual_noise;
    }
    j["rate_scale"] = effective_rate_scale();
    j["drive"] = json::array({drive[0], drive[1]});
    j["tick_seconds"] = tick_seconds;
    j["seed"] = seed;
    j["stats_interval"] = stats_interval;
    j["max_ticks"] = max_ticks;
    j["sweep_cap"] = sweep_cap;
    j["corpus"] = corpus;
    j["mapping"] = mapping_to_json(mapping);
    return j;
}

SessionConfig SessionConfig::from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("session config must be a JSON object");
    KeyValues kv;
    for (const auto& [key, value] : j.items()) {
        if (key == "drive") {
            if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
                throw ConfigError("drive must be [x, y]");
            kv["drive_x"] = value[0].dump();
            kv["drive_y"] = value[1].dump();
        } else if (key == "mapping") {
            if (!value.is_object()) throw ConfigError("mapping must be an object");
            for (const auto& [mk, mv] : value.items())
                kv[kSonifyPrefix + mk] = scalar_text(kSonifyPrefix + mk, mv);
        } else {
            kv[key] = scalar_text(key, value);
        }
    }
    return from_pairs(kv);
}

SessionConfig SessionConfig::from_pairs(const KeyValues& kv) { return from_pairs(kv, SessionConfig{}); }

SessionConfig SessionConfig::from_pairs(const KeyValues& kv, SessionConfig c) {
    std::map<std::string, std::string> mapping;
    for (const auto& [key, value] : kv) {
        if (key.rfind(kSonifyPrefix, 0) == 0) {
            mapping[key.substr(std::string(kSonifyPrefix).size())] = value;
        } else if (key == "model") {
            c.model = parse_model(value);
        } else if (key == "width") {
            c.width = small_int(key, value);
        } else if (key == "height") {
            c.height = small_int(key, value);
        } else if (key == "size") {
            c.size = small_int(key, value);
        } else if (key == "z_c") {
            c.z_c = small_int(key, value);
        } else if (key == "alpha") {
            c.alpha = parse_real(key, value);
        } else if (key == "residual_noise") {
            c.residual_noise = parse_real(key, value);
        } else if (key == "rate_scale") {
            c.rate_scale = parse_real(key, value);
        } else if (key == "drive_x") {
            c.drive[0] = parse_real(key, value);
        } else if (key == "drive_y") {
            c.drive[1] = parse_real(key, value);
        } else if (key == "tick_seconds") {
            c.tick_seconds = parse_real(key, value);
        } else if (key == "seed") {
            c.seed = parse_unsigned(key, value);
        } else if (key == "stats_interval") {
            c.stats_interval = parse_unsigned(key, value);
        } else if (key == "max_ticks") {
            c.max_ticks = parse_unsigned(key, value);
        } else if (key == "sweep_cap") {
            c.sweep_cap = parse_unsigned(key, value);
        } else if (key == "corpus") {
            c.corpus = value;
        } else {
            throw ConfigError("unknown session key '" + key + "'");
        }
    }
    // A square sandpile can be given by its side alone.
    if (c.model == ModelKind::sandpile && kv.count("size")) {
        if (!kv.count("width")) c.width = c.size;
        if (!kv.count("height")) c.height = c.size;
    }
    if (!mapping.empty()) c.mapping = sonify::MappingConfig::from_pairs(mapping, c.mapping);
    c.validate();
    return c;
}

std::optional<sonify::GrainCorpus> load_corpus(const SessionConfig& config) {
    const auto& m = config.mapping;
    if (config.corpus == "none") return std::nullopt;
    if (config.corpus == "crackle")
        return sonify::ingest_corpus(sonify::make_crackle(4.0, m.sample_rate, config.seed), m.grain_ms, m.hop_ms);
    return sonify::ingest_corpus(sonify::read_wav(config.corpus), m.grain_ms, m.hop_ms);
}

// ---------------------------------------------------------------------------
// Control sources

ScriptedControls::ScriptedControls(std::vector<Message> records) : records_(std::move(records)) {}

std::vector<Message> ScriptedControls::poll(std::uint64_t tick) {
    std::vector<Message> out;
    while (next_ < records_.size() && records_[next_].tick <= tick) out.push_back(records_[next_++]);
    return out;
}

void LiveControls::push(Message msg) {
    std::lock_guard lock(mutex_);
    queue_.push_back(std::move(msg));
}

void LiveControls::request_stop() {
    std::lock_guard lock(mutex_);
    stop_ = true;
}

std::vector<Message> LiveControls::poll(std::uint64_t) {
    std::lock_guard lock(mutex_);
    std::vector<Message> out(std::make_move_iterator(queue_.begin()), std::make_move_iterator(queue_.end()));
    queue_.clear();
    if (stop_) out.push_back(Message{0, Stop{}});
    return out;
}

// ---------------------------------------------------------------------------
// Log

void SessionLog::write(std::ostream& out) const {
    out << encode(Message{0, ConfigMsg{config.to_json()}}) << '\n';
    for (const Message& r : records) out << encode(r) << '\n';
}

SessionLog SessionLog::read(std::istream& in) {
    SessionLog log;
    std::string line;
    std::size_t offset = 0;
    bool have_header = false;
    bool stopped = false;
    while (std::getline(in, line)) {
        const std::size_t at = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        Message msg;
        try {
            msg = decode(line);
        } catch (const ProtocolError& e) {
            throw ParseError(e.what(), at + e.begin());
        }
        if (!have_header) {
            if (!msg.is<ConfigMsg>()) throw ParseError("log must start with a config line", at);
            try {
                log.config = SessionConfig::from_json(msg.as<ConfigMsg>().config);
            } catch (const ConfigError& e) {
                throw ParseError(std::string("invalid config in log header: ") + e.what(), at);
            }
            have_header = true;
            continue;
        }
        if (stopped) throw ParseError("record after control.stop", at);
        if (!msg.is_control()) throw ParseError("log records must be control messages", at);
        if (!log.records.empty() && msg.tick < log.records.back().tick)
            throw ParseError("record ticks must not decrease", at);
        stopped = msg.is<Stop>();
        log.records.push_back(std::move(msg));
    }
    if (!have_header) throw ParseError("empty log", 0);
    if (!stopped) throw ParseError("log does not end with control.stop", offset);
    return log;
}

// ---------------------------------------------------------------------------
// Session

class Session::Model {
public:
    explicit Model(const SessionConfig& c) : state_(make(c)) {
        std::visit(
            [&](auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, OsloPile>)
                    m.sweep_cap() = c.sweep_cap;
                else
                    m.limits().sweep_cap = c.sweep_cap;
            },
            state_);
    }

    bool is_springblock() const { return std::holds_alternative<SpringBlock>(state_); }

    void set_drive(std::array<double, 2> v) {
        if (auto* sb = std::get_if<SpringBlock>(&state_)) sb->set_plate_rate(v[0], v[1]);
    }

    double plate_rate() const {
        const auto* sb = std::get_if<SpringBlock>(&state_);
        return sb ? sb->plate_rate() : 0.0;
    }

    /// Piles take `grains` new grains at random sites; the block lattice takes one plate step.
    void advance(std::uint64_t grains, std::vector<CascadeEvent>& out) {
        if (auto* p = std::get_if<Sandpile>(&state_)) {
            for (std::uint64_t i = 0; i < grains; ++i) out.push_back(p->add_grain(p->random_site()));
        } else if (auto* o = std::get_if<OsloPile>(&state_)) {
            for (std::uint64_t i = 0; i < grains; ++i) out.push_back(o->add_grain());
        } else {
            out.push_back(std::get<SpringBlock>(state_).tick());
        }
    }

    void drop(const Drop& d, std::vector<CascadeEvent>& out) {
        if (auto* p = std::get_if<Sandpile>(&state_)) {
            if (d.site && !p->grid().contains(*d.site))
                throw DomainError("drop site (" + std::to_string(d.site->row) + ", " +
                                  std::to_string(d.site->col) + ") is off the grid");
            for (std::uint64_t i = 0; i < d.n; ++i)
                out.push_back(p->add_grain(d.site ? *d.site : p->random_site()));
        } else if (auto* o = std::get_if<OsloPile>(&state_)) {
            for (std::uint64_t i = 0; i < d.n; ++i) out.push_back(o->add_grain());
        } else {
            auto& sb = std::get<SpringBlock>(state_);
            for (std::uint64_t i = 0; i < d.n; ++i) out.push_back(sb.drive_extremal());
        }
    }

    double load() const {
        return std::visit(
            [](const auto& m) -> double {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, SpringBlock>)
                    return m.total_force();
                else
                    return static_cast<double>(m.total_grains());
            },
            state_);
    }

    std::string snapshot() const {
        std::ostringstream out;
        std::visit([&](const auto& m) { write_snapshot(out, m); }, state_);
        return out.str();
    }

private:
    using State = std::variant<Sandpile, OsloPile, SpringBlock>;

    static State make(const SessionConfig& c) {
        switch (c.model) {
            case ModelKind::sandpile: return Sandpile(c.width, c.height, c.z_c, c.seed);
            case ModelKind::oslo: return OsloPile(c.size, c.seed);
            case ModelKind::springblock: {
                SpringBlockParams p;
                p.size = c.size;
                p.alpha = c.alpha;
                p.residual_noise = c.residual_noise;
                p.rate_scale = c.effective_rate_scale();
                return SpringBlock(p, c.seed);
            }
        }
        throw ConfigError("unknown model");
    }

    State state_;
};

struct Session::Tick {
    std::vector<CascadeEvent> events;
    std::vector<Message> notices;
};

Session::Session(SessionConfig config, const sonify::GrainCorpus* corpus)
    : config_(std::move(config)), corpus_(corpus) {
    config_.validate();
    if (corpus_) {
        sonify::MappingConfig m = config_.mapping;
        m.tick_seconds = config_.tick_seconds;
        schedule_.emplace(*corpus_, m);
    }
    reset_state();
}

Session::~Session() = default;

void Session::reset_state() {
    model_ = std::make_unique<Model>(config_);
    drive_ = config_.drive;
    model_->set_drive(drive_);
    grain_debt_ = 0.0;
    paused_ = false;
    sizes_.clear();
    if (schedule_) schedule_->reset();
}

std::string Session::snapshot() const { return model_->snapshot(); }

void Session::apply(const Message& control, Tick& tick) {
    try {
        if (const auto* d = std::get_if<SetDrive>(&control.body)) {
            const double scale = config_.effective_rate_scale();
            const auto& v = d->v;
            if (!std::isfinite(scale * std::sqrt(v[0] * v[0] + v[1] * v[1])))
                throw DomainError("drive magnitude overflows");
            model_->set_drive(v);
            drive_ = v;
        } else if (const auto* d = std::get_if<Drop>(&control.body)) {
            model_->drop(*d, tick.events);
        } else if (const auto* p = std::get_if<Pause>(&control.body)) {
            paused_ = p->paused;
        } else if (control.is<Reset>()) {
            reset_state();
            tick.events.clear();
        }
    } catch (const DomainError& e) {
        tick.notices.push_back(Message{control.tick, ErrorMsg{"bad_control", e.what()}});
    }
}

void Session::emit(const Sink& sink, Message msg) { sink(encode(msg)); }

void Session::emit_stats(const Sink& sink, std::uint64_t k) {
    StatsMsg s;
    s.events = sizes_.size();
    if (!sizes_.empty()) {
        const auto [lo, hi] = std::minmax_element(sizes_.begin(), sizes_.end());
        s.max_size = *hi;
        s.decades = std::log10(double(*hi) / double(*lo));
        for (const auto& b : log_binned_histogram(sizes_, 5)) s.histogram.push_back({b.center, b.density});
        try {
            const PowerLawFit fit = fit_power_law(sizes_, s.s_min);
            s.tau = fit.tau_hat;
            s.std_error = fit.std_error;
        } catch (const EstimationError&) {
        }
    }
    emit(sink, Message{k, s});
}

SessionLog Session::run(ControlSource& controls, const Sink& sink, const RunOptions& options) {
    SessionLog log{config_, {}};
    auto record = [&](const Message& m) {
        log.records.push_back(m);
        if (options.log) *options.log << encode(m) << '\n' << std::flush;
    };
    if (options.log) *options.log << encode(Message{0, ConfigMsg{config_.to_json()}}) << '\n' << std::flush;

    emit(sink, Message{0, Hello{}});
    emit(sink, Message{0, ConfigMsg{config_.to_json()}});

    for (std::uint64_t k = 0;; ++k) {
        if (options.before_tick) options.before_tick(k);

        std::string reason;
        if (config_.max_ticks != 0 && k >= config_.max_ticks) reason = "max_ticks";
        Tick tick;
        try {
            if (reason.empty()) {
                for (Message c : controls.poll(k)) {
                    c.tick = k;
                    if (c.is<ErrorMsg>()) {
                        tick.notices.push_back(std::move(c));
                        continue;
                    }
                    if (!c.is_control()) continue;
                    if (c.is<Stop>()) {
                        reason = "stop";
                        break;
                    }
                    record(c);
                    apply(c, tick);
                }
            }
            if (reason.empty() && !paused_) {
                if (model_->is_springblock()) {
                    model_->advance(0, tick.events);
                } else {
                    const double v = std::sqrt(drive_[0] * drive_[0] + drive_[1] * drive_[1]);
                    grain_debt_ += config_.effective_rate_scale() * v;
                    const double whole = std::floor(grain_debt_);
                    grain_debt_ -= whole;
                    model_->advance(static_cast<std::uint64_t>(whole), tick.events);
                }
            }
        } catch (const DivergenceError& e) {
            tick.notices.push_back(Message{k, ErrorMsg{"divergence", e.what()}});
            reason = "divergence";
        }
        if (!reason.empty()) {
            for (Message& n : tick.notices) emit(sink, std::move(n));
            record(Message{k, Stop{}});
            emit(sink, Message{k, Bye{reason}});
            return log;
        }

        for (Message& n : tick.notices) emit(sink, std::move(n));

        TickMsg t;
        std::vector<const CascadeEvent*> nonzero;
        for (const CascadeEvent& ev : tick.events) {
            t.size += ev.size;
            if (ev.size > 0) nonzero.push_back(&ev);
        }
        t.events = nonzero.size();
        t.load = model_->load();
        t.rate = model_->is_springblock()
                     ? model_->plate_rate()
                     : config_.effective_rate_scale() * std::sqrt(drive_[0] * drive_[0] + drive_[1] * drive_[1]);
        t.v = drive_;
        t.paused = paused_;
        emit(sink, Message{k, t});

        const bool moment = model_->is_springblock();
        for (std::size_t i = 0; i < nonzero.size(); ++i) {
            const CascadeEvent& ev = *nonzero[i];
            sizes_.push_back(ev.size);
            emit(sink, Message{k, EventMsg{ev, moment}});
            if (schedule_) {
                GrainsMsg g;
                g.event_id = ev.event_id;
                const double start = (double(k) + double(i) / double(nonzero.size())) * config_.tick_seconds;
                schedule_->add_event(ev, start, g.entries);
                emit(sink, Message{k, std::move(g)});
            }
        }
        if ((k + 1) % config_.stats_interval == 0) emit_stats(sink, k);
        if (options.at_boundary) options.at_boundary(*this);
    }
}

void replay_events(const SessionLog& log, std::ostream& out) {
    Session session(log.config, nullptr);
    ScriptedControls controls(log.records);
    session.run(controls, [&](const std::string& line) {
        if (line.rfind(R"({"t":"event")", 0) == 0) out << line << '\n';
    });
}

}  // namespace soc::session
