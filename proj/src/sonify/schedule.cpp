#include "socsim/sonify/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "json.hpp"
#include "socsim/config.hpp"
#include "socsim/errors.hpp"

namespace soc::sonify {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
}

}  // namespace

void MappingConfig::validate() const {
    require(tick_seconds > 0.0 && std::isfinite(tick_seconds), "tick_seconds must be > 0");
    require(step_seconds > 0.0 && std::isfinite(step_seconds), "step_seconds must be > 0");
    require(density_cap >= 1, "density_cap must be >= 1");
    require(gain > 0.0 && std::isfinite(gain), "gain must be > 0");
    require(centroid_hi > 0.0 && std::isfinite(centroid_hi), "centroid_hi must be > 0 Hz");
    require(centroid_lo > 0.0 && std::isfinite(centroid_lo), "centroid_lo must be > 0 Hz");
    require(sweep_steps > 0.0 && std::isfinite(sweep_steps), "sweep_steps must be > 0");
    require(flatness_target >= 0.0 && flatness_target <= 1.0, "flatness_target must lie in [0, 1]");
    for (double w : {weights.rms, weights.centroid, weights.flatness})
        require(w >= 0.0 && std::isfinite(w), "descriptor weights must be finite and >= 0");
    require(pitch_jitter >= 0.0 && pitch_jitter < 0.5, "pitch_jitter must lie in [0, 0.5)");
    require(limiter_knee > 0.0 && limiter_knee < 1.0, "limiter_knee must lie in (0, 1)");
    require(grain_ms >= 5.0 && std::isfinite(grain_ms), "grain_ms must be >= 5");
    require(hop_ms > 0.0 && std::isfinite(hop_ms), "hop_ms must be > 0");
    require(sample_rate >= 8000 && sample_rate <= 384000, "sample_rate must lie in [8000, 384000]");
    require(min_duration >= 0.0 && std::isfinite(min_duration), "min_duration must be >= 0");
}

MappingConfig MappingConfig::from_pairs(const std::map<std::string, std::string>& kv,
                                        MappingConfig base) {
    using Setter = std::function<void(MappingConfig&, const std::string&, const std::string&)>;
    auto real = [](double MappingConfig::*field) -> Setter {
        return [field](MappingConfig& c, const std::string& k, const std::string& v) {
            c.*field = parse_real(k, v);
        };
    };
    const std::map<std::string, Setter> setters = {
        {"tick_seconds", real(&MappingConfig::tick_seconds)},
        {"step_seconds", real(&MappingConfig::step_seconds)},
        {"density_cap",
         [](MappingConfig& c, const std::string& k, const std::string& v) {
             c.density_cap = static_cast<std::size_t>(parse_unsigned(k, v));
         }},
        {"gain", real(&MappingConfig::gain)},
        {"centroid_hi", real(&MappingConfig::centroid_hi)},
        {"centroid_lo", real(&MappingConfig::centroid_lo)},
        {"sweep_steps", real(&MappingConfig::sweep_steps)},
        {"flatness_target", real(&MappingConfig::flatness_target)},
        {"weight_rms",
         [](MappingConfig& c, const std::string& k, const std::string& v) { c.weights.rms = parse_real(k, v); }},
        {"weight_centroid",
         [](MappingConfig& c, const std::string& k, const std::string& v) {
             c.weights.centroid = parse_real(k, v);
         }},
        {"weight_flatness",
         [](MappingConfig& c, const std::string& k, const std::string& v) {
             c.weights.flatness = parse_real(k, v);
         }},
        {"pitch_jitter", real(&MappingConfig::pitch_jitter)},
        {"seed", [](MappingConfig& c, const std::string& k, const std::string& v) { c.seed = parse_unsigned(k, v); }},
        {"limiter_knee", real(&MappingConfig::limiter_knee)},
        {"grain_ms", real(&MappingConfig::grain_ms)},
        {"hop_ms", real(&MappingConfig::hop_ms)},
        {"sample_rate",
         [](MappingConfig& c, const std::string& k, const std::string& v) {
             const auto sr = parse_integer(k, v);
             if (sr < 1 || sr > 384000) throw ConfigError("sample_rate must lie in [8000, 384000]");
             c.sample_rate = static_cast<int>(sr);
         }},
        {"min_duration", real(&MappingConfig::min_duration)},
    };
    for (const auto& [key, value] : kv) {
        auto it = setters.find(key);
        if (it == setters.end()) throw ConfigError("unknown mapping key '" + key + "'");
        it->second(base, key, value);
    }
    base.validate();
    return base;
}

MappingConfig MappingConfig::from_pairs(const std::map<std::string, std::string>& kv) {
    return from_pairs(kv, MappingConfig{});
}

ScheduleBuilder::ScheduleBuilder(const GrainCorpus& corpus, const MappingConfig& config)
    : corpus_(corpus), config_(config), rng_(config.seed) {
    config_.validate();
    if (corpus_.empty()) throw ConfigError("sonification needs a non-empty grain corpus");
}

void ScheduleBuilder::add_event(const CascadeEvent& event, double start_time,
                                std::vector<GrainEntry>& out) {
    const std::size_t first = out.size();
    const double ratio = config_.centroid_lo / config_.centroid_hi;
    for (std::size_t j = 0; j < event.steps.size(); ++j) {
        const std::size_t slips = event.steps[j].size();
        if (slips == 0) continue;
        const std::size_t count = std::min(slips, config_.density_cap);
        const double amplitude = std::clamp(config_.gain * std::log10(1.0 + double(slips)), 0.0, 1.0);
        const double progress = 1.0 - std::exp(-double(j) / config_.sweep_steps);

        Descriptor target;
        target.rms = corpus_.min_rms + (corpus_.max_rms - corpus_.min_rms) * amplitude;
        target.centroid = config_.centroid_hi * std::pow(ratio, progress);
        target.flatness = config_.flatness_target;
        const std::size_t grain = select_grain(corpus_, target, config_.weights);

        const double slot = start_time + double(j) * config_.step_seconds;
        for (std::size_t g = 0; g < count; ++g) {
            GrainEntry e;
            e.onset = slot + rng_.uniform() * config_.step_seconds;
            e.grain_index = grain;
            e.amplitude = amplitude;
            e.pitch_ratio = 1.0 + config_.pitch_jitter * (2.0 * rng_.uniform() - 1.0);
            out.push_back(e);
        }
    }
    std::stable_sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
                     [](const GrainEntry& a, const GrainEntry& b) { return a.onset < b.onset; });
}

double ScheduleBuilder::entry_end(const GrainEntry& entry) const {
    const double length = double(corpus_.grains[entry.grain_index].length);
    return entry.onset + length / (double(corpus_.sample_rate) * entry.pitch_ratio);
}

GrainSchedule events_to_schedule(std::span<const CascadeEvent> events, const GrainCorpus& corpus,
                                 const MappingConfig& config) {
    ScheduleBuilder builder(corpus, config);
    GrainSchedule schedule;
    schedule.total_duration = config.min_duration;
    if (events.empty()) return schedule;

    const std::uint64_t first_id = events.front().event_id;
    std::uint64_t last_id = first_id;
    for (const CascadeEvent& ev : events) {
        if (ev.event_id < last_id) throw DomainError("events must be ordered by event_id");
        last_id = ev.event_id;
        builder.add_event(ev, double(ev.event_id - first_id) * config.tick_seconds, schedule.entries);
    }
    std::stable_sort(schedule.entries.begin(), schedule.entries.end(),
                     [](const GrainEntry& a, const GrainEntry& b) { return a.onset < b.onset; });

    double end = double(last_id - first_id + 1) * config.tick_seconds;
    for (const GrainEntry& e : schedule.entries) end = std::max(end, builder.entry_end(e));
    schedule.total_duration = std::max(schedule.total_duration, end);
    return schedule;
}

std::string schedule_to_jsonl(const GrainSchedule& schedule) {
    std::string out;
    for (const GrainEntry& e : schedule.entries) {
        nlohmann::ordered_json j;
        j["onset"] = e.onset;
        j["grain"] = e.grain_index;
        j["amp"] = e.amplitude;
        j["pitch"] = e.pitch_ratio;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace soc::sonify
